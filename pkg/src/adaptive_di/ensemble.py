"""Expanding fixed-shares ensemble of smoothing filters.

Each expert is a base filter with its own birth time and running smoothed
value.  On every new observation the ensemble scores each expert's current
value against the observation, reweights multiplicatively with
``exp(-gamma * loss)``, shares a ``beta`` fraction of the mass uniformly, and
then lets every expert absorb the observation.  Every ``tau`` samples a
fresh copy of the base set is born so that the pool can re-adapt after an
abrupt change.

States are immutable values; ``step`` returns a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, StateError
from .filters import EXPONENTIAL, FilterSpec

DEFAULT_BASE_SET = (
    FilterSpec.exponential(0.1),
    FilterSpec.exponential(0.2),
    FilterSpec.uniform(),
)


@dataclass(frozen=True)
class EnsembleHyper:
    tau: int = 10
    beta: float = 0.01
    gamma: float = 1.0
    base_set: tuple = DEFAULT_BASE_SET
    max_experts: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "base_set", tuple(self.base_set))
        if isinstance(self.tau, bool) or int(self.tau) != self.tau or self.tau < 1:
            raise ParameterError(f"tau must be a positive integer, got {self.tau!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ParameterError(f"gamma must be positive, got {self.gamma!r}")
        if not self.base_set:
            raise ParameterError("base_set must not be empty")
        if self.max_experts is not None and self.max_experts < 1:
            raise ParameterError("max_experts must be a positive integer")


@dataclass(frozen=True)
class ExpertState:
    spec: FilterSpec
    weight: float
    value: float
    birth: int


@dataclass(frozen=True)
class EnsembleState:
    """Pool of experts held column-wise.

    Each expert's value is a normalized taper average kept by the recursion
    ``norm <- gain + decay * norm`` and ``value += gain / norm * (x - value)``,
    with ``(gain, decay) = (alpha, 1 - alpha)`` for exponential experts and
    ``(1, 1)`` for uniform ones.  ``counts`` is the number of samples each
    expert has absorbed; ``t`` is the time of the last absorbed sample
    (``t0 - 1`` initially).
    """

    hyper: EnsembleHyper
    t0: int
    t: int
    weights: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    norms: np.ndarray
    gains: np.ndarray
    decays: np.ndarray
    births: np.ndarray
    capped: bool = False
    specs: tuple = field(default=(), repr=False)

    @property
    def n_experts(self):
        return self.weights.size

    @property
    def alphas(self):
        """Exponential rate per expert, 0 for uniform experts."""
        return np.where(self.decays == 1.0, 0.0, self.gains)

    @property
    def experts(self):
        return tuple(
            ExpertState(s, float(w), float(v) if c else math.nan, int(b))
            for s, w, v, c, b in zip(self.specs, self.weights, self.values,
                                     self.counts, self.births)
        )


def _evolve(state, **changes):
    # dataclasses.replace re-runs field introspection; this is the hot path
    new = object.__new__(EnsembleState)
    new.__dict__.update(state.__dict__)
    new.__dict__.update(changes)
    return new


def _columns(specs):
    gains = np.array([s.alpha if s.kind == EXPONENTIAL else 1.0 for s in specs])
    decays = np.array([1.0 - s.alpha if s.kind == EXPONENTIAL else 1.0 for s in specs])
    births = np.array([s.birth for s in specs], dtype=np.int64)
    return gains, decays, births


def init_ensemble(hyper, t0=0):
    """One expert per base filter, born at ``t0`` with uniform weight."""
    if not isinstance(hyper, EnsembleHyper):
        raise ParameterError("hyper must be an EnsembleHyper")
    specs = tuple(s.born_at(t0) for s in hyper.base_set)
    if hyper.max_experts is not None:
        specs = specs[: hyper.max_experts]
    n = len(specs)
    gains, decays, births = _columns(specs)
    return EnsembleState(
        hyper=hyper,
        t0=int(t0),
        t=int(t0) - 1,
        weights=np.full(n, 1.0 / n),
        values=np.zeros(n),
        counts=np.zeros(n, dtype=np.int64),
        norms=np.zeros(n),
        gains=gains,
        decays=decays,
        births=births,
        specs=specs,
    )


def _check_ready(state, what):
    if np.any(state.counts == 0):
        raise StateError(f"{what} needs every expert to hold a value")


def predict(state):
    """Weighted average of the experts' current values."""
    _check_ready(state, "predict")
    w = state.weights
    return float(w @ state.values / w.sum())


def _shared_weights(weights, values, observed, beta, gamma):
    loss = (values - observed) ** 2
    # shifting by the smallest loss only rescales v, which renormalization undoes
    v = weights * np.exp(-gamma * (loss - loss.min()))
    total = v.sum()
    if not total > 0:
        with np.errstate(divide="ignore"):
            logv = np.log(weights) - gamma * loss
        v = np.exp(logv - logv.max())
        total = v.sum()
    v /= total
    w = (1.0 - beta) * v + beta / v.size
    return w / w.sum()


def share_update(state, observed):
    """Exponential reweighting by squared loss followed by fixed sharing."""
    if not math.isfinite(observed):
        raise DomainError(f"observed value must be finite, got {observed!r}")
    _check_ready(state, "share_update")
    hyper = state.hyper
    w = _shared_weights(state.weights, state.values, observed, hyper.beta, hyper.gamma)
    return _evolve(state, weights=w)


def spawn_experts(state, t):
    """Add a newborn copy of the base set, each with the current mean weight."""
    hyper = state.hyper
    k = len(hyper.base_set)
    if hyper.max_experts is not None and state.n_experts + k > hyper.max_experts:
        return _evolve(state, capped=True)
    newborn = tuple(s.born_at(t) for s in hyper.base_set)
    gains, decays, births = _columns(newborn)
    w = np.concatenate([state.weights, np.full(k, state.weights.mean())])
    return _evolve(
        state,
        weights=w / w.sum(),
        values=np.concatenate([state.values, np.zeros(k)]),
        counts=np.concatenate([state.counts, np.zeros(k, dtype=np.int64)]),
        norms=np.concatenate([state.norms, np.zeros(k)]),
        gains=np.concatenate([state.gains, gains]),
        decays=np.concatenate([state.decays, decays]),
        births=np.concatenate([state.births, births]),
        specs=state.specs + newborn,
    )


def _absorbed(state, observed):
    norms = state.gains + state.decays * state.norms
    values = state.values + state.gains / norms * (observed - state.values)
    return values, norms


def absorb(state, observed):
    """Fold ``observed`` into every expert's smoothed value."""
    values, norms = _absorbed(state, observed)
    return _evolve(state, values=values, norms=norms, counts=state.counts + 1, t=state.t + 1)


def ensemble_value(state):
    return float(state.weights @ state.values)


def step(state, observed):
    """Process one observation; returns ``(estimate, new_state)``.

    Order: score and share the incumbents on their pre-sample values, spawn
    newcomers if due, absorb the sample into everyone (newborns included, so
    each newcomer's first value is the sample at its birth time), and report
    the weighted average.
    """
    observed = float(observed)
    if not math.isfinite(observed):
        raise DomainError(f"observed value must be finite, got {observed!r}")
    t = state.t + 1
    if t > state.t0:
        hyper = state.hyper
        weights = _shared_weights(state.weights, state.values, observed,
                                  hyper.beta, hyper.gamma)
        state = _evolve(state, weights=weights)
        if (t - state.t0) % hyper.tau == 0:
            state = spawn_experts(state, t)
    values, norms = _absorbed(state, observed)
    state = _evolve(state, values=values, norms=norms, counts=state.counts + 1, t=t)
    return float(state.weights @ values), state


def run_ensemble(hyper, series, t0=0):
    """Run an ensemble over a whole series; returns the estimates and final state."""
    state = init_ensemble(hyper, t0)
    out = np.empty(len(series))
    for n, x in enumerate(series):
        out[n], state = step(state, x)
    return out, state


def expected_expert_count(hyper, t, t0=0):
    """Pool size after absorbing the sample at time ``t`` when no cap applies."""
    return len(hyper.base_set) * (1 + (t - t0) // hyper.tau)
