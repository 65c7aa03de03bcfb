"""Batch command-line front end: model files, conversion, decoding, verification.

Model files are JSON documents.  Common keys: ``kind`` ("crf" or "hmc"),
``hidden_symbols``, ``obs_symbols``, ``n``, ``mode`` ("strict" or
"generalized").  CRF files carry ``V`` (n-1 pairwise tables) and ``U``
(n emission tables) as nested row-major arrays of natural-log potentials;
the string ``"-inf"`` denotes log of zero.  HMC files carry ``init``,
``trans`` and ``emit`` as probability-domain rows.

Exit codes: 0 ok, 2 parse error, 3 degenerate model, 4 impossible
observation, 5 equivalence failure, 6 budget exceeded.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .crf import (
    MODES,
    STRICT,
    CrfModel,
    DegenerateModel,
    crf_posterior_marginals,
    random_crf_model,
)
from .equivalence import crf_to_hmc, crf_to_hmc_generalized
from .hmc import HmcModel, ImpossibleObservation, hmc_posterior_marginals
from .oracle import (
    DEFAULT_BUDGET,
    all_sequences,
    enumerate_crf_posterior_batch,
    enumerate_hmc_posterior_batch,
    posterior_matrix_marginals,
)
from .tables import Alphabet, Table2, ValidationError

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_IMPOSSIBLE = 4
EXIT_MISMATCH = 5
EXIT_BUDGET = 6

NEG_INF_TOKEN = "-inf"


class ParseError(ValueError):
    """A model or sequence file was rejected; the message names the spot."""


# ---------------------------------------------------------------------------
# JSON model files
# ---------------------------------------------------------------------------


def _parse_number(value, path: str) -> float:
    if value == NEG_INF_TOKEN:
        return float("-inf")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f'{path}: expected a number or "{NEG_INF_TOKEN}", got {value!r}')
    v = float(value)
    if math.isnan(v) or math.isinf(v):
        raise ParseError(f'{path}: non-finite values must be written as "{NEG_INF_TOKEN}"')
    return v


def _parse_row(value, cols: int, path: str, nonnegative: bool = False) -> np.ndarray:
    if not isinstance(value, list) or len(value) != cols:
        raise ParseError(f"{path}: expected {cols} entries")
    out = np.empty(cols)
    for j, cell in enumerate(value):
        out[j] = _parse_number(cell, f"{path}[{j}]")
        if nonnegative and out[j] < 0:
            raise ParseError(f"{path}[{j}]: probabilities must be nonnegative")
    return out


def _parse_table(value, rows: int, cols: int, path: str, nonnegative: bool = False) -> np.ndarray:
    if not isinstance(value, list) or len(value) != rows:
        raise ParseError(f"{path}: expected {rows} rows")
    return np.stack([_parse_row(r, cols, f"{path}[{i}]", nonnegative) for i, r in enumerate(value)])


def _parse_table_list(value, count: int, rows: int, cols: int, path: str,
                      nonnegative: bool = False) -> list[np.ndarray]:
    if not isinstance(value, list) or len(value) != count:
        raise ParseError(f"{path}: expected {count} tables")
    return [_parse_table(t, rows, cols, f"{path}[{i}]", nonnegative) for i, t in enumerate(value)]


def _jsonable(a: np.ndarray):
    """Nested lists with -inf replaced by its string token."""
    if a.ndim == 1:
        return [NEG_INF_TOKEN if v == float("-inf") else float(v) for v in a]
    return [_jsonable(row) for row in a]


def _symbols(value, path: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not value or not all(isinstance(s, str) for s in value):
        raise ParseError(f"{path}: expected a nonempty list of strings")
    if len(set(value)) != len(value):
        raise ParseError(f"{path}: symbols must be unique")
    return tuple(value)


@dataclass
class ModelFile:
    """The raw content of a model file, exactly as serialized.

    Keeping the parsed numbers verbatim (rather than the validated model)
    makes write-then-read reproduce every table entry exactly.
    """

    kind: str
    hidden_symbols: tuple[str, ...]
    obs_symbols: tuple[str, ...]
    n: int
    mode: str
    V: list[np.ndarray] | None = None      # log domain, CRF only
    U: list[np.ndarray] | None = None
    init: np.ndarray | None = None         # probability domain, HMC only
    trans: list[np.ndarray] | None = None
    emit: list[np.ndarray] | None = None

    @classmethod
    def from_json(cls, text: str) -> "ModelFile":
        def reject_constant(name):
            raise ParseError(f'non-finite literal {name} is not allowed; use "{NEG_INF_TOKEN}"')

        try:
            doc = json.loads(text, parse_constant=reject_constant)
        except json.JSONDecodeError as e:
            raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
        if not isinstance(doc, dict):
            raise ParseError("top level: expected a JSON object")

        kind = doc.get("kind")
        if kind not in ("crf", "hmc"):
            raise ParseError(f'kind: expected "crf" or "hmc", got {kind!r}')
        hidden = _symbols(doc.get("hidden_symbols"), "hidden_symbols")
        obs = _symbols(doc.get("obs_symbols"), "obs_symbols")
        n = doc.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ParseError(f"n: expected an integer >= 1, got {n!r}")
        mode = doc.get("mode", STRICT)
        if mode not in MODES:
            raise ParseError(f"mode: expected one of {MODES}, got {mode!r}")

        k, l = len(hidden), len(obs)
        if kind == "crf":
            for key in ("init", "trans", "emit"):
                if key in doc:
                    raise ParseError(f"{key}: not a CRF file key")
            v = _parse_table_list(doc.get("V"), n - 1, k, k, "V")
            u = _parse_table_list(doc.get("U"), n, k, l, "U")
            if mode == STRICT:
                for name, tabs in (("V", v), ("U", u)):
                    for i, t in enumerate(tabs):
                        if not np.isfinite(t).all():
                            raise ParseError(
                                f'{name}[{i}]: contains "{NEG_INF_TOKEN}" but mode is "strict"'
                            )
            return cls(kind, hidden, obs, n, mode, V=v, U=u)

        for key in ("V", "U"):
            if key in doc:
                raise ParseError(f"{key}: not an HMC file key")
        init = _parse_row(doc.get("init"), k, "init", nonnegative=True)
        trans = _parse_table_list(doc.get("trans"), n - 1, k, k, "trans", nonnegative=True)
        emit = _parse_table_list(doc.get("emit"), n, k, l, "emit", nonnegative=True)
        return cls(kind, hidden, obs, n, mode, init=init, trans=trans, emit=emit)

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "hidden_symbols": list(self.hidden_symbols),
            "obs_symbols": list(self.obs_symbols),
            "n": self.n,
            "mode": self.mode,
        }
        if self.kind == "crf":
            doc["V"] = [_jsonable(t) for t in self.V]
            doc["U"] = [_jsonable(t) for t in self.U]
        else:
            doc["init"] = _jsonable(self.init)
            doc["trans"] = [_jsonable(t) for t in self.trans]
            doc["emit"] = [_jsonable(t) for t in self.emit]
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"

    @classmethod
    def load(cls, path: str) -> "ModelFile":
        try:
            text = sys.stdin.read() if path == "-" else Path(path).read_text()
        except OSError as e:
            raise ParseError(f"cannot read {path}: {e}") from None
        return cls.from_json(text)

    def dump(self, path: str):
        text = self.to_json()
        if path == "-":
            sys.stdout.write(text)
        else:
            Path(path).write_text(text)

    @classmethod
    def from_crf(cls, model: CrfModel) -> "ModelFile":
        return cls(
            "crf", model.hidden.symbols, model.obs.symbols, model.length, model.mode,
            V=[t.log_values.copy() for t in model.pair_potentials],
            U=[t.log_values.copy() for t in model.emit_potentials],
        )

    @classmethod
    def from_hmc(cls, model: HmcModel, mode: str = STRICT) -> "ModelFile":
        return cls(
            "hmc", model.hidden.symbols, model.obs.symbols, model.length, mode,
            init=model.init.probabilities(),
            trans=[t.probabilities() for t in model.transitions],
            emit=[t.probabilities() for t in model.emissions],
        )

    def to_model(self):
        """Validate into a CrfModel or HmcModel; parse-level failures re-raise."""
        hidden, obs = Alphabet(self.hidden_symbols), Alphabet(self.obs_symbols)
        try:
            if self.kind == "crf":
                return CrfModel(hidden, obs, tuple(Table2(t) for t in self.V),
                                tuple(Table2(t) for t in self.U), mode=self.mode)
            return HmcModel.from_probabilities(hidden, obs, self.init, self.trans, self.emit)
        except ValidationError as e:
            raise ParseError(str(e)) from None


# ---------------------------------------------------------------------------
# Sequence files
# ---------------------------------------------------------------------------


def read_sequences(path: str) -> list[tuple[int, list[str]]]:
    """(line number, symbol tokens) per nonblank line of a sequence file."""
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None
    out = []
    for i, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if tokens:
            out.append((i, tokens))
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_random(args) -> int:
    try:
        model = random_crf_model(args.n, args.hidden, args.obs, seed=args.seed, mode=args.mode)
    except ValidationError as e:
        return _fail(EXIT_PARSE, str(e))
    ModelFile.from_crf(model).dump(args.output)
    return EXIT_OK


def cmd_convert(args) -> int:
    try:
        mf = ModelFile.load(args.model)
        if mf.kind != "crf":
            raise ParseError('kind: convert expects a "crf" model file')
        model = mf.to_model()
    except ParseError as e:
        return _fail(EXIT_PARSE, str(e))
    try:
        if model.mode == STRICT:
            hmc, trace = crf_to_hmc(model)
        else:
            hmc, trace = crf_to_hmc_generalized(model)
    except DegenerateModel as e:
        return _fail(EXIT_DEGENERATE, str(e))
    ModelFile.from_hmc(hmc, mode=mf.mode).dump(args.output)
    if args.trace is not None:
        doc = {
            "psi": [_jsonable(t.log_values) for t in trace.psi],
            "phi": [_jsonable(t.log_values) for t in trace.phi],
            "beta": [_jsonable(t.log_values) for t in trace.beta],
            "unreachable": [sorted(u) for u in trace.unreachable],
        }
        text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
        if args.trace == "-":
            sys.stdout.write(text)
        else:
            Path(args.trace).write_text(text)
    return EXIT_OK


def _tiled_model(model, length: int):
    """Retile a time-homogeneous model to another sequence length."""
    if isinstance(model, CrfModel):
        pairs, emits = model.pair_potentials, model.emit_potentials
    else:
        pairs, emits = model.transitions, model.emissions
    for group, name in ((pairs, "pairwise"), (emits, "emission")):
        for t in group[1:]:
            if not np.array_equal(t.log_values, group[0].log_values):
                raise ValidationError(f"--tile requires identical {name} tables at every position")
    if length > 1 and not pairs:
        raise ValidationError("--tile cannot extend a length-1 model (no pairwise table to repeat)")
    if isinstance(model, CrfModel):
        if length == 1:
            return CrfModel(model.hidden, model.obs, (), (emits[0],), mode=model.mode)
        return CrfModel.homogeneous(model.hidden, model.obs, length, pairs[0], emits[0],
                                    mode=model.mode)
    if length == 1:
        return HmcModel(model.hidden, model.obs, model.init, (), (emits[0],))
    return HmcModel.homogeneous(model.hidden, model.obs, length, model.init, pairs[0], emits[0])


def cmd_decode(args) -> int:
    try:
        mf = ModelFile.load(args.model)
        model = mf.to_model()
        lines = read_sequences(args.sequences)
    except ParseError as e:
        return _fail(EXIT_PARSE, str(e))

    is_crf = isinstance(model, CrfModel)
    marginal_fn = crf_posterior_marginals if is_crf else hmc_posterior_marginals
    tiled = {model.length: model}
    parse_errors = impossible = 0

    for line_no, tokens in lines:
        try:
            y = tuple(model.obs.index(t) for t in tokens)
            if len(y) != model.length and not args.tile:
                raise ValidationError(
                    f"expected {model.length} symbols, got {len(y)} (use --tile for other lengths)"
                )
            if len(y) not in tiled:
                tiled[len(y)] = _tiled_model(model, len(y))
            line_model = tiled[len(y)]
        except ValidationError as e:
            parse_errors += 1
            print(f"line {line_no}: {e}", file=sys.stderr)
            continue
        try:
            marginals = marginal_fn(line_model, y)
        except (DegenerateModel, ImpossibleObservation) as e:
            impossible += 1
            print(f"line {line_no}: {e}", file=sys.stderr)
            continue
        labels = marginals.mpm_labels()
        fields = [" ".join(model.hidden.symbol(i) for i in labels)]
        if args.marginals:
            for row in marginals.probabilities():
                fields.append(",".join(f"{p:.6f}" for p in row))
        print("\t".join(fields))

    if parse_errors:
        return EXIT_PARSE
    if impossible:
        return EXIT_IMPOSSIBLE
    return EXIT_OK


def _sampled_sequences(obs_size: int, length: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, obs_size, size=(count, length), dtype=np.intp)


def cmd_verify(args) -> int:
    try:
        mf = ModelFile.load(args.model)
        if mf.kind != "crf":
            raise ParseError('kind: verify expects a "crf" model file')
        model = mf.to_model()
        against = None
        if args.against is not None:
            amf = ModelFile.load(args.against)
            if amf.kind != "hmc":
                raise ParseError('kind: --against expects an "hmc" model file')
            against = amf.to_model()
            if (against.hidden.symbols != model.hidden.symbols
                    or against.obs.symbols != model.obs.symbols
                    or against.length != model.length):
                raise ParseError("--against model does not match the CRF's alphabets and length")
    except ParseError as e:
        return _fail(EXIT_PARSE, str(e))

    try:
        if against is not None:
            hmc = against
        elif model.mode == STRICT:
            hmc, _ = crf_to_hmc(model)
        else:
            hmc, _ = crf_to_hmc_generalized(model)
    except DegenerateModel as e:
        return _fail(EXIT_DEGENERATE, str(e))

    k, l, n = model.hidden.size, model.obs.size, model.length
    num_labelings = k**n
    if num_labelings > args.budget:
        return _fail(EXIT_BUDGET,
                     f"{k}^{n} = {num_labelings} labelings exceed the budget of {args.budget}")
    exhaustive = l**n * num_labelings <= args.budget
    if exhaustive:
        ys = all_sequences(l, n)
    elif args.samples is not None:
        ys = _sampled_sequences(l, n, args.samples, args.seed)
    else:
        return _fail(EXIT_BUDGET,
                     f"exhaustive check needs {l}^{n} * {k}^{n} = {l**n * num_labelings} "
                     f"enumerations, over the budget of {args.budget}; pass --samples")

    chunk = max(1, args.budget // num_labelings)
    checked = skipped = 0
    worst = -1.0
    worst_y = None
    worst_pos = 0
    for start in range(0, len(ys), chunk):
        block = ys[start:start + chunk]
        pc, log_kappa = enumerate_crf_posterior_batch(model, block, budget=args.budget)
        ph, _ = enumerate_hmc_posterior_batch(hmc, block, budget=args.budget)
        valid = ~np.isneginf(log_kappa)
        skipped += int((~valid).sum())
        if not valid.any():
            continue
        pc, ph, block = pc[valid], ph[valid], block[valid]
        hmc_dead = np.isnan(ph[:, 0])
        ph = np.where(np.isnan(ph), 0.0, ph)
        diffs = np.abs(pc - ph).max(axis=1)
        diffs[hmc_dead] = 1.0
        checked += len(block)
        i = int(np.argmax(diffs))
        if diffs[i] > worst:
            worst = float(diffs[i])
            worst_y = tuple(int(v) for v in block[i])
            mc = posterior_matrix_marginals(pc[i:i + 1], k, n)
            mh = posterior_matrix_marginals(ph[i:i + 1], k, n)
            worst_pos = int(np.argmax(np.abs(mc - mh).max(axis=2)))

    if checked == 0:
        return _fail(EXIT_DEGENERATE, "every checked observation sequence has zero evidence")

    passed = worst <= args.tolerance
    report = {
        "hidden_size": k,
        "obs_size": l,
        "n": n,
        "mode": model.mode,
        "exhaustive": bool(exhaustive),
        "sequences_checked": int(checked),
        "sequences_skipped_zero_evidence": int(skipped),
        "max_discrepancy": float(worst),
        "worst_y": [model.obs.symbol(i) for i in worst_y],
        "worst_position": worst_pos,
        "tolerance": float(args.tolerance),
        "passed": bool(passed),
    }
    print(f"checked {checked} observation sequence(s)"
          + (f", skipped {skipped} with zero evidence" if skipped else "")
          + f" ({'exhaustive' if exhaustive else 'sampled'})")
    print(f"max posterior discrepancy: {worst:.3e} (tolerance {args.tolerance:.1e})")
    print(f"worst y: {' '.join(report['worst_y'])} (position {worst_pos})")
    print("PASS" if passed else "FAIL")
    if args.report is not None:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK if passed else EXIT_MISMATCH


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chainequiv",
        description="Linear-chain CRFs, hidden Markov chains, and the exact conversion between them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("random", help="generate a seeded random CRF model file")
    p.add_argument("--n", type=int, required=True, help="sequence length (>= 1)")
    p.add_argument("--hidden", type=int, required=True, help="number of hidden labels")
    p.add_argument("--obs", type=int, required=True, help="number of observation symbols")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--mode", choices=MODES, default=STRICT,
                   help='"generalized" zeroes each cell with probability 0.1')
    p.add_argument("-o", "--output", default="-", help="output path (default stdout)")
    p.set_defaults(func=cmd_random)

    p = sub.add_parser("convert", help="construct the HMC equivalent to a CRF model file")
    p.add_argument("model", help='CRF model file (or "-" for stdin)')
    p.add_argument("-o", "--output", default="-", help="output path (default stdout)")
    p.add_argument("--trace", metavar="FILE",
                   help="also write the psi/phi/beta construction trace as JSON")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("decode", help="MPM-decode observation sequences with a model file")
    p.add_argument("model", help='CRF or HMC model file (or "-" for stdin)')
    p.add_argument("sequences", help="text file, one whitespace-separated sequence per line")
    p.add_argument("--marginals", action="store_true",
                   help="append per-position marginal columns (6 decimals)")
    p.add_argument("--tile", action="store_true",
                   help="retile a time-homogeneous model to each line's length")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("verify", help="check a CRF and its constructed HMC agree on every y")
    p.add_argument("model", help='CRF model file (or "-" for stdin)')
    p.add_argument("--against", metavar="FILE",
                   help="verify against this HMC file instead of constructing one")
    p.add_argument("--tolerance", type=float, default=1e-9,
                   help="max allowed posterior discrepancy (default 1e-9)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                   help="max total enumerated labelings (default 10^6)")
    p.add_argument("--samples", type=int, default=None,
                   help="check this many random y instead of all of them")
    p.add_argument("--seed", type=int, default=0, help="seed for --samples (default 0)")
    p.add_argument("--report", metavar="FILE", help="write a machine-readable JSON report")
    p.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
