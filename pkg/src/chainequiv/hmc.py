"""Hidden Markov chains with time-indexed transitions and emissions.

The joint probability of labels ``x`` and observations ``y`` factorizes as

    init(x_1) emit[1](y_1 | x_1) * prod_{n>=2} trans[n](x_n | x_{n-1}) emit[n](y_n | x_n)

All rows are stored as log-probabilities.  Transitions and emissions are
time-indexed because the CRF-to-HMC construction produces genuinely
time-varying rows; a stationary chain is the special case of tiling one
table pair.
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
    log_sum_exp,
)

ROW_SUM_TOL = 1e-9


class ImpossibleObservation(ValueError):
    """The observation sequence has probability zero under the model."""


def _check_stochastic(log_rows: np.ndarray, what: str):
    sums = np.atleast_1d(np.exp(log_rows).sum(axis=-1))
    worst = int(np.argmax(np.abs(sums - 1.0)))
    if abs(sums[worst] - 1.0) > ROW_SUM_TOL:
        label = what if log_rows.ndim == 1 else f"{what} row {worst}"
        raise ValidationError(
            f"{label} sums to {sums[worst]:.12g}, expected 1 within {ROW_SUM_TOL}"
        )


def _renormalized(table):
    """Shift each log row so it sums to exactly one after exponentiation."""
    a = table.log_values
    totals = log_sum_exp(a, axis=-1) if a.ndim == 2 else log_sum_exp(a)
    if a.ndim == 2:
        return Table2(a - np.asarray(totals)[:, None])
    return Table1(a - totals)


@dataclass(frozen=True, eq=False)
class HmcModel:
    """A hidden Markov chain over finite alphabets.

    Parameters
    ----------
    hidden, obs : Alphabet
        Label and observation alphabets.
    init : Table1
        Log-probabilities of the first label.
    transitions : tuple of Table2
        ``length - 1`` row-stochastic tables over (hidden x hidden).
    emissions : tuple of Table2
        ``length`` row-stochastic tables over (hidden x obs).

    Rows must sum to one within ``1e-9`` (probability domain) and are then
    exactly renormalized, since constructions produce rows normalized only
    up to floating rounding.
    """

    hidden: Alphabet
    obs: Alphabet
    init: Table1
    transitions: tuple[Table2, ...]
    emissions: tuple[Table2, ...]

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "emissions", tuple(self.emissions))
        n = len(self.emissions)
        if n < 1:
            raise ValidationError("an HMC needs at least one emission table (length >= 1)")
        if len(self.transitions) != n - 1:
            raise ValidationError(
                f"expected {n - 1} transition tables for length {n}, got {len(self.transitions)}"
            )
        k, l = self.hidden.size, self.obs.size
        if self.init.size != k:
            raise ValidationError(f"init has size {self.init.size}, expected {k}")
        for i, t in enumerate(self.transitions):
            if t.shape != (k, k):
                raise ValidationError(f"transitions[{i}] has shape {t.shape}, expected {(k, k)}")
        for i, t in enumerate(self.emissions):
            if t.shape != (k, l):
                raise ValidationError(f"emissions[{i}] has shape {t.shape}, expected {(k, l)}")

        _check_stochastic(self.init.log_values, "init")
        for i, t in enumerate(self.transitions):
            _check_stochastic(t.log_values, f"transitions[{i}]")
        for i, t in enumerate(self.emissions):
            _check_stochastic(t.log_values, f"emissions[{i}]")

        object.__setattr__(self, "init", _renormalized(self.init))
        object.__setattr__(self, "transitions", tuple(_renormalized(t) for t in self.transitions))
        object.__setattr__(self, "emissions", tuple(_renormalized(t) for t in self.emissions))

    @property
    def length(self) -> int:
        return len(self.emissions)

    @classmethod
    def from_probabilities(cls, hidden: Alphabet, obs: Alphabet, init, transitions,
                           emissions) -> "HmcModel":
        """Build from probability-domain rows (zeros become -inf internally)."""
        return cls(
            hidden,
            obs,
            Table1.from_probabilities(init),
            tuple(Table2.from_probabilities(t) for t in transitions),
            tuple(Table2.from_probabilities(t) for t in emissions),
        )

    @classmethod
    def homogeneous(cls, hidden: Alphabet, obs: Alphabet, length: int, init: Table1,
                    trans: Table2, emit: Table2) -> "HmcModel":
        """Tile one (transition, emission) pair into a stationary chain."""
        if length < 1:
            raise ValidationError("length must be >= 1")
        return cls(hidden, obs, init, (trans,) * (length - 1), (emit,) * length)


def _check_obs(model: HmcModel, y) -> ObsSeq:
    y = as_index_sequence(y, model.obs.size, "observation sequence")
    if len(y) != model.length:
        raise LengthMismatch(
            f"observation sequence has length {len(y)}, model expects {model.length}"
        )
    return y


def _check_obs_batch(model: HmcModel, ys) -> np.ndarray:
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


def _chain_parts(model: HmcModel, obs: np.ndarray):
    """Fold init and emissions into the observation-conditioned factor chain."""
    emits = [t.log_values for t in model.emissions]
    first = model.init.log_values[:, None] + emits[0][:, obs[:, 0]]
    steps = [
        (model.transitions[k].log_values, None, emits[k + 1][:, obs[:, k + 1]])
        for k in range(model.length - 1)
    ]
    return first, steps


def hmc_log_joint(model: HmcModel, x, y) -> float:
    """Log joint probability of the labeling ``x`` and observations ``y``.

    ``-inf`` whenever any factor in the chain is zero.
    """
    x = as_index_sequence(x, model.hidden.size, "label sequence")
    y = _check_obs(model, y)
    if len(x) != model.length:
        raise LengthMismatch(f"label sequence has length {len(x)}, model expects {model.length}")
    logp = model.init[x[0]] + model.emissions[0][x[0], y[0]]
    for n in range(1, model.length):
        logp += model.transitions[n - 1][x[n - 1], x[n]]
        logp += model.emissions[n][x[n], y[n]]
    return logp


def hmc_log_evidence(model: HmcModel, y) -> float:
    """Log marginal probability of the observations (``-inf`` is allowed)."""
    y = _check_obs(model, y)
    first, steps = _chain_parts(model, np.asarray([y], dtype=np.intp))
    return float(chain_log_totals(first, steps)[0])


def hmc_posterior_marginals(model: HmcModel, y) -> PosteriorMarginals:
    """Posterior distribution of the label at each position, by forward-backward.

    Raises :class:`ImpossibleObservation` when the observations have
    probability zero (conditioning on them would be undefined).
    """
    y = _check_obs(model, y)
    first, steps = _chain_parts(model, np.asarray([y], dtype=np.intp))
    totals, rows = chain_log_marginals(first, steps)
    if totals[0] == LOG_ZERO:
        raise ImpossibleObservation("observation sequence has probability zero under the model")
    return PosteriorMarginals(tuple(Table1(r[:, 0]) for r in rows))


def hmc_posterior_marginals_batch(model: HmcModel, ys) -> tuple[np.ndarray, np.ndarray]:
    """Posterior marginals for many observation sequences in one pass.

    ``ys`` is a (count, length) array of observation indices.  Returns
    ``(log_evidences, log_marginals)`` with shapes (count,) and
    (count, length, num_labels); zero-probability sequences come back as
    ``-inf`` / NaN instead of raising, so callers can filter.  Column ``i``
    equals ``hmc_posterior_marginals`` on ``ys[i]``.
    """
    obs = _check_obs_batch(model, ys)
    first, steps = _chain_parts(model, obs)
    totals, rows = chain_log_marginals(first, steps)
    return totals, np.stack(rows, axis=1).transpose(2, 1, 0)


def hmc_mpm_decode(model: HmcModel, y) -> LabelSeq:
    """MPM decoding: the position-wise argmax of the posterior marginals."""
    return hmc_posterior_marginals(model, y).mpm_labels()
