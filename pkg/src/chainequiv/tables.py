"""Finite alphabets, log-domain weight tables, and shared numeric helpers.

Every weight and probability in this package lives in the log domain as a
plain float: ``-inf`` is a first-class value meaning "weight exactly zero".
Probabilities are exponentiated only at API boundaries.  NaN is rejected at
table construction so that every downstream operation is total.
"""

import math
from dataclasses import dataclass, field

import numpy as np

LOG_ZERO = float("-inf")


class ValidationError(ValueError):
    """A table, alphabet, sequence or model failed a structural check."""


class LengthMismatch(ValidationError):
    """Two sequences (or a sequence and a model) disagree on length."""


class AllZeroRow(ValidationError):
    """A row with no mass at all was asked to normalize."""


@dataclass(frozen=True)
class Alphabet:
    """An ordered collection of distinct symbol names.

    ``index`` and ``symbol`` are mutually inverse bijections between the
    symbol names and ``range(size)``.
    """

    symbols: tuple[str, ...]
    _positions: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise ValidationError("an alphabet needs at least one symbol")
        positions = {s: i for i, s in enumerate(symbols)}
        if len(positions) != len(symbols):
            raise ValidationError("alphabet symbols must be unique")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_positions", positions)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self._positions[symbol]
        except KeyError:
            raise ValidationError(f"symbol {symbol!r} is not in the alphabet") from None

    def symbol(self, index: int) -> str:
        if not 0 <= index < len(self.symbols):
            raise ValidationError(f"index {index} out of range for alphabet of size {self.size}")
        return self.symbols[index]

    def __contains__(self, symbol) -> bool:
        return symbol in self._positions


def _as_log_array(values, ndim: int, what: str) -> np.ndarray:
    a = np.array(values, dtype=float)
    if a.ndim != ndim:
        raise ValidationError(f"{what} expects a {ndim}-dimensional array, got shape {a.shape}")
    if a.size == 0:
        raise ValidationError(f"{what} must not be empty")
    if np.isnan(a).any():
        raise ValidationError(f"{what} rejects NaN entries")
    if np.isposinf(a).any():
        raise ValidationError(f"{what} rejects +inf entries (only finite values and -inf are valid)")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Table1:
    """A dense vector of log-domain weights indexed by one alphabet."""

    log_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "log_values", _as_log_array(self.log_values, 1, "Table1"))

    @classmethod
    def from_probabilities(cls, probs) -> "Table1":
        return cls(_log_of_probs(probs, "Table1"))

    @property
    def size(self) -> int:
        return self.log_values.shape[0]

    def __getitem__(self, i: int) -> float:
        if not 0 <= i < self.size:
            raise IndexError(f"index {i} out of range for Table1 of size {self.size}")
        return float(self.log_values[i])

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_values)


@dataclass(frozen=True, eq=False)
class Table2:
    """A dense row-major matrix of log-domain weights over two alphabets."""

    log_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "log_values", _as_log_array(self.log_values, 2, "Table2"))

    @classmethod
    def from_probabilities(cls, probs) -> "Table2":
        return cls(_log_of_probs(probs, "Table2"))

    @property
    def shape(self) -> tuple[int, int]:
        return self.log_values.shape

    def __getitem__(self, ij: tuple[int, int]) -> float:
        i, j = ij
        rows, cols = self.shape
        if not (0 <= i < rows and 0 <= j < cols):
            raise IndexError(f"index ({i}, {j}) out of range for Table2 of shape {self.shape}")
        return float(self.log_values[i, j])

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_values)


def _log_of_probs(probs, what: str) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if np.isnan(p).any():
        raise ValidationError(f"{what} rejects NaN entries")
    if (p < 0).any():
        raise ValidationError(f"{what}.from_probabilities needs nonnegative values")
    with np.errstate(divide="ignore"):
        return np.log(p)


# Sequences of alphabet indices.  Plain tuples keep them hashable and cheap.
LabelSeq = tuple[int, ...]
ObsSeq = tuple[int, ...]


def as_index_sequence(seq, alphabet_size: int, what: str = "sequence") -> tuple[int, ...]:
    """Coerce to a tuple of ints and check every index against the alphabet."""
    out = tuple(int(i) for i in seq)
    if not out:
        raise ValidationError(f"{what} must have length >= 1")
    for i in out:
        if not 0 <= i < alphabet_size:
            raise ValidationError(f"{what} index {i} out of range for alphabet of size {alphabet_size}")
    return out


def log_sum_exp(values, axis: int | None = None):
    """log(sum(exp(values))), computed without overflow for finite inputs.

    The empty sum (and a sum of only ``-inf`` terms) is ``-inf``.  With
    ``axis`` given, reduces a numpy array along that axis and returns an
    array; otherwise flattens and returns a float.
    """
    a = np.asarray(values, dtype=float)
    if axis is None:
        if a.size == 0:
            return LOG_ZERO
        m = float(a.max())
        if m == LOG_ZERO:
            return LOG_ZERO
        return m + math.log(float(np.exp(a - m).sum()))
    m = a.max(axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(a - m_safe).sum(axis=axis)) + np.squeeze(m_safe, axis=axis)
    return out


def normalize_log(row: Table1) -> Table1:
    """Shift a log-domain row so its exponentiated entries sum to one.

    Raises :class:`AllZeroRow` when every entry is ``-inf``.  Being a pure
    translation, normalization preserves the argmax.  The shift is computed
    as ``max + log1p(rest)`` with the leading term split out, which keeps
    renormalizing an already normalized row from moving any entry by more
    than a few ulps.
    """
    v = row.log_values
    top = int(np.argmax(v))
    m = float(v[top])
    if m == LOG_ZERO:
        raise AllZeroRow("cannot normalize a row whose entries are all -inf")
    shifted = v - m  # the top entry lands on exactly zero
    rest = np.exp(shifted)
    rest[top] = 0.0
    return Table1(shifted - math.log1p(float(rest.sum())))


def hamming_loss(a, b) -> int:
    """Number of positions at which two label sequences disagree."""
    a = tuple(a)
    b = tuple(b)
    if len(a) != len(b):
        raise LengthMismatch(f"sequences have different lengths ({len(a)} vs {len(b)})")
    return sum(1 for x, y in zip(a, b) if x != y)


@dataclass(frozen=True, eq=False)
class PosteriorMarginals:
    """Per-position posterior label distributions, one normalized log row each."""

    rows: tuple[Table1, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def length(self) -> int:
        return len(self.rows)

    def probabilities(self) -> np.ndarray:
        """Stack the rows into a (length, num_labels) probability array."""
        return np.stack([r.probabilities() for r in self.rows])

    def mpm_labels(self) -> LabelSeq:
        """Position-wise argmax labels; the lowest index wins on ties."""
        return tuple(int(np.argmax(r.log_values)) for r in self.rows)


# ---------------------------------------------------------------------------
# Pairwise-factor chain recursions.
#
# A chain over positions 0..n-1 assigns each path x, per column c, the weight
#
#     exp(first[x_0, c] + sum_k F_k(x_k, x_{k+1}, c))
#
# with F_k(i, j, c) = pair_k[i, j] + left_k[i, c] + right_k[j, c].  The column
# axis batches independent conditioning contexts (e.g. many observation
# sequences); a single context is simply the one-column case.  All passes
# renormalize their messages at every step, reaccumulating the dropped
# constants, so they stay well-scaled for long chains and large potentials.
# ---------------------------------------------------------------------------


def _forward_messages(first, steps):
    msgs = [np.asarray(first, dtype=float)]
    shift = np.zeros(msgs[0].shape[1])
    for pair, left, right in steps:
        b = msgs[-1] if left is None else msgs[-1] + left
        m = log_sum_exp(b[:, None, :] + pair[:, :, None], axis=0)
        if right is not None:
            m = m + right
        c = m.max(axis=0)
        c = np.where(np.isfinite(c), c, 0.0)
        msgs.append(m - c)
        shift += c
    return msgs, shift


def chain_log_totals(first: np.ndarray, steps) -> np.ndarray:
    """Per-column log total weight of a batched pairwise-factor chain.

    ``first`` has shape (num_states, num_columns); each step is a
    ``(pair, left, right)`` triple where ``pair`` is (num_states, num_states)
    shared across columns and ``left`` / ``right`` are optional per-column
    addends on the source / destination state.  Columns whose every path has
    zero weight come back as ``-inf``.
    """
    msgs, shift = _forward_messages(first, steps)
    return shift + log_sum_exp(msgs[-1], axis=0)


def chain_log_marginals(first: np.ndarray, steps) -> tuple[np.ndarray, list[np.ndarray]]:
    """Per-position, per-column chain marginals plus the per-column log totals.

    Returns ``(totals, rows)`` where ``rows[k]`` is the (num_states,
    num_columns) normalized log marginal at position ``k``.  Columns with
    zero total weight get a ``-inf`` total and NaN rows; callers decide how
    to surface that (the per-sequence operations raise).
    """
    msgs, shift = _forward_messages(first, steps)
    totals = shift + log_sum_exp(msgs[-1], axis=0)

    n = len(steps) + 1
    rows = [None] * n
    bwd = np.zeros_like(msgs[0])
    rows[n - 1] = msgs[n - 1] + bwd
    for k in range(len(steps) - 1, -1, -1):
        pair, left, right = steps[k]
        t = bwd if right is None else bwd + right
        m = log_sum_exp(pair[:, :, None] + t[None, :, :], axis=1)
        if left is not None:
            m = m + left
        c = m.max(axis=0)
        bwd = m - np.where(np.isfinite(c), c, 0.0)
        rows[k] = msgs[k] + bwd

    with np.errstate(invalid="ignore"):
        rows = [r - log_sum_exp(r, axis=0) for r in rows]
    return totals, rows
