"""Linear-chain conditional random fields over finite alphabets.

A model assigns each label sequence ``x`` given observations ``y`` the
unnormalized log weight

    sum_n pair[n](x_n, x_{n+1})  +  sum_n emit[n](x_n, y_n)

with one pairwise table per adjacent position pair and one emission table
per position.  This module computes that score, the exact normalizer, the
per-position posterior marginals and the MPM (maximum posterior mode)
decoding, all in O(length * num_labels^2).
"""

from dataclasses import dataclass

import numpy as np

from .tables import (
    LOG_ZERO,
    Alphabet,
    LabelSeq,
    LengthMismatch,
    ObsSeq,
    PosteriorMarginals,
    Table1,
    Table2,
    ValidationError,
    as_index_sequence,
    chain_log_marginals,
    chain_log_totals,
)

STRICT = "strict"
GENERALIZED = "generalized"
MODES = (STRICT, GENERALIZED)


class DegenerateModel(ValueError):
    """Every label sequence has zero weight for the given observations."""


@dataclass(frozen=True, eq=False)
class CrfModel:
    """A time-indexed linear-chain CRF.

    Parameters
    ----------
    hidden, obs : Alphabet
        Label and observation alphabets.
    pair_potentials : tuple of Table2
        ``length - 1`` tables over (hidden x hidden), one per adjacent pair.
    emit_potentials : tuple of Table2
        ``length`` tables over (hidden x obs), one per position.
    mode : str
        ``"strict"`` requires all potentials finite; ``"generalized"``
        additionally allows ``-inf`` (weight exactly zero).
    """

    hidden: Alphabet
    obs: Alphabet
    pair_potentials: tuple[Table2, ...]
    emit_potentials: tuple[Table2, ...]
    mode: str = STRICT

    def __post_init__(self):
        object.__setattr__(self, "pair_potentials", tuple(self.pair_potentials))
        object.__setattr__(self, "emit_potentials", tuple(self.emit_potentials))
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        n = len(self.emit_potentials)
        if n < 1:
            raise ValidationError("a CRF needs at least one emission table (length >= 1)")
        if len(self.pair_potentials) != n - 1:
            raise ValidationError(
                f"expected {n - 1} pairwise tables for length {n}, got {len(self.pair_potentials)}"
            )
        k, l = self.hidden.size, self.obs.size
        for i, t in enumerate(self.pair_potentials):
            if t.shape != (k, k):
                raise ValidationError(f"pair_potentials[{i}] has shape {t.shape}, expected {(k, k)}")
        for i, t in enumerate(self.emit_potentials):
            if t.shape != (k, l):
                raise ValidationError(f"emit_potentials[{i}] has shape {t.shape}, expected {(k, l)}")
        if self.mode == STRICT:
            for name, tabs in (("pair_potentials", self.pair_potentials),
                               ("emit_potentials", self.emit_potentials)):
                for i, t in enumerate(tabs):
                    if not np.isfinite(t.log_values).all():
                        raise ValidationError(
                            f"{name}[{i}] contains -inf; strict mode requires finite potentials"
                        )

    @property
    def length(self) -> int:
        return len(self.emit_potentials)

    @classmethod
    def homogeneous(cls, hidden: Alphabet, obs: Alphabet, length: int,
                    pair: Table2, emit: Table2, mode: str = STRICT) -> "CrfModel":
        """Tile a single (pairwise, emission) table pair across all positions."""
        if length < 1:
            raise ValidationError("length must be >= 1")
        return cls(hidden, obs, (pair,) * (length - 1), (emit,) * length, mode=mode)


def default_alphabets(hidden_size: int, obs_size: int) -> tuple[Alphabet, Alphabet]:
    """Generated symbol names h0..h{k-1} / o0..o{l-1} for synthetic models."""
    if hidden_size < 1 or obs_size < 1:
        raise ValidationError("alphabet sizes must be >= 1")
    return (Alphabet(tuple(f"h{i}" for i in range(hidden_size))),
            Alphabet(tuple(f"o{i}" for i in range(obs_size))))


def random_crf_model(length: int, hidden_size: int, obs_size: int, seed: int,
                     mode: str = STRICT, low: float = -5.0, high: float = 5.0,
                     zero_prob: float = 0.1) -> CrfModel:
    """Seeded random CRF with potentials i.i.d. uniform on [low, high].

    Deterministic for a fixed seed; in generalized mode each cell is
    independently set to ``-inf`` with probability ``zero_prob``.  Pairwise
    tables are drawn first (in position order), then emission tables.
    """
    hidden, obs = default_alphabets(hidden_size, obs_size)
    if length < 1:
        raise ValidationError("length must be >= 1")
    rng = np.random.default_rng(seed)

    def draw(shape):
        t = rng.uniform(low, high, shape)
        if mode == GENERALIZED:
            t[rng.random(shape) < zero_prob] = -np.inf
        return Table2(t)

    k, l = hidden_size, obs_size
    pair = tuple(draw((k, k)) for _ in range(length - 1))
    emit = tuple(draw((k, l)) for _ in range(length))
    return CrfModel(hidden, obs, pair, emit, mode=mode)


def _check_obs(model: CrfModel, y) -> ObsSeq:
    y = as_index_sequence(y, model.obs.size, "observation sequence")
    if len(y) != model.length:
        raise LengthMismatch(
            f"observation sequence has length {len(y)}, model expects {model.length}"
        )
    return y


def _check_obs_batch(model: CrfModel, ys) -> np.ndarray:
    arr = np.asarray(ys, dtype=np.intp)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValidationError("expected a nonempty (count, length) array of observation indices")
    if arr.shape[1] != model.length:
        raise LengthMismatch(
            f"observation sequences have length {arr.shape[1]}, model expects {model.length}"
        )
    if arr.min() < 0 or arr.max() >= model.obs.size:
        raise ValidationError(f"observation index out of range for alphabet of size {model.obs.size}")
    return arr


def _chain_parts(model: CrfModel, obs: np.ndarray):
    """Fold the model into its observation-conditioned factor chain.

    Each position's emission term joins the factor between that position and
    the next, with the last position's term joining the final factor.  For
    length 1 there are no factors and the single emission column is the
    unary term.  ``obs`` is a (count, length) index array; each sequence
    becomes one column of the chain.
    """
    emits = [t.log_values for t in model.emit_potentials]
    if model.length == 1:
        return emits[0][:, obs[:, 0]], []
    steps = []
    for k, pair in enumerate(model.pair_potentials):
        right = emits[k + 1][:, obs[:, k + 1]] if k == model.length - 2 else None
        steps.append((pair.log_values, emits[k][:, obs[:, k]], right))
    first = np.zeros((model.hidden.size, obs.shape[0]))
    return first, steps


def crf_log_score(model: CrfModel, x, y) -> float:
    """Unnormalized log weight of the labeling ``x`` given observations ``y``."""
    x = as_index_sequence(x, model.hidden.size, "label sequence")
    y = _check_obs(model, y)
    if len(x) != model.length:
        raise LengthMismatch(f"label sequence has length {len(x)}, model expects {model.length}")
    score = 0.0
    for n in range(model.length - 1):
        score += model.pair_potentials[n][x[n], x[n + 1]]
    for n in range(model.length):
        score += model.emit_potentials[n][x[n], y[n]]
    return score


def crf_log_normalizer(model: CrfModel, y) -> float:
    """Log of the sum of exp(score) over all label sequences.

    Computed by a forward pass over the y-conditioned factor chain; equals
    brute-force enumeration on small instances.  Raises
    :class:`DegenerateModel` when every labeling has zero weight (possible
    only in generalized mode).
    """
    y = _check_obs(model, y)
    first, steps = _chain_parts(model, np.asarray([y], dtype=np.intp))
    total = float(chain_log_totals(first, steps)[0])
    if total == LOG_ZERO:
        raise DegenerateModel("all label sequences have zero weight for these observations")
    return total


def crf_posterior_marginals(model: CrfModel, y) -> PosteriorMarginals:
    """Posterior distribution of the label at each position given ``y``."""
    y = _check_obs(model, y)
    first, steps = _chain_parts(model, np.asarray([y], dtype=np.intp))
    totals, rows = chain_log_marginals(first, steps)
    if totals[0] == LOG_ZERO:
        raise DegenerateModel("all label sequences have zero weight for these observations")
    return PosteriorMarginals(tuple(Table1(r[:, 0]) for r in rows))


def crf_posterior_marginals_batch(model: CrfModel, ys) -> tuple[np.ndarray, np.ndarray]:
    """Posterior marginals for many observation sequences in one pass.

    ``ys`` is a (count, length) array of observation indices.  Returns
    ``(log_normalizers, log_marginals)`` with shapes (count,) and
    (count, length, num_labels); entries for sequences where every labeling
    has zero weight come back as ``-inf`` / NaN instead of raising, so
    callers can filter.  Column ``i`` equals ``crf_posterior_marginals``
    on ``ys[i]``.
    """
    obs = _check_obs_batch(model, ys)
    first, steps = _chain_parts(model, obs)
    totals, rows = chain_log_marginals(first, steps)
    return totals, np.stack(rows, axis=1).transpose(2, 1, 0)


def crf_mpm_decode(model: CrfModel, y) -> LabelSeq:
    """MPM decoding: the position-wise argmax of the posterior marginals."""
    return crf_posterior_marginals(model, y).mpm_labels()
