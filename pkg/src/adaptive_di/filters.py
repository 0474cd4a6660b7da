"""Causal taper functions and the smoothed values they produce.

A taper ``g(t, T; t0)`` weights past instantaneous estimates at times
``t0 <= t <= T`` and is zero before its birth time ``t0``.  Two shapes are
supported: exponential forgetting with rate ``alpha`` and the uniform
(running-mean) taper.  Everywhere outside ``exp_recursive_update`` the
weights are used in normalized form, so an expert born late reports values
on the same scale as one born at the start of the stream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, ParameterError

EXPONENTIAL = "exp"
UNIFORM = "unif"


@dataclass(frozen=True)
class FilterSpec:
    """A base filter: its shape, forgetting rate and birth time."""

    kind: str
    alpha: float | None = None
    birth: int = 0

    def __post_init__(self):
        if self.kind == EXPONENTIAL:
            _check_alpha(self.alpha)
        elif self.kind == UNIFORM:
            if self.alpha is not None:
                raise ParameterError("uniform filter takes no alpha")
        else:
            raise ParameterError(f"unknown filter kind {self.kind!r}")

    @classmethod
    def exponential(cls, alpha, birth=0):
        return cls(EXPONENTIAL, float(alpha), int(birth))

    @classmethod
    def uniform(cls, birth=0):
        return cls(UNIFORM, None, int(birth))

    @classmethod
    def parse(cls, text, birth=0):
        """Build a spec from ``"exp(0.1)"`` or ``"unif"``."""
        s = text.strip().lower()
        if s in ("unif", "uniform"):
            return cls.uniform(birth)
        m = re.fullmatch(r"exp\(\s*([^)]+?)\s*\)", s)
        if m is None:
            raise ParameterError(f"cannot parse filter {text!r}")
        try:
            alpha = float(m.group(1))
        except ValueError:
            raise ParameterError(f"cannot parse filter {text!r}") from None
        return cls.exponential(alpha, birth)

    def born_at(self, t):
        return replace(self, birth=int(t))

    def weight(self, t, T):
        """Unnormalized taper value g(t, T; birth)."""
        if self.kind == EXPONENTIAL:
            return exp_filter_weight(self.alpha, t, T, self.birth)
        return uniform_filter_weight(t, T, self.birth)

    def __str__(self):
        if self.kind == EXPONENTIAL:
            return f"exp({self.alpha!r})"
        return "unif"


def _check_alpha(alpha):
    if alpha is None or not np.isfinite(alpha) or not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha!r}")


def exp_filter_weight(alpha, t, T, t0=0):
    """alpha * (1 - alpha)**(T - t), or 0 before the birth time."""
    _check_alpha(alpha)
    if t < t0 or t > T:
        return 0.0
    return alpha * (1.0 - alpha) ** (T - t)


def uniform_filter_weight(t, T, t0=0):
    if t0 > T:
        raise DomainError(f"birth {t0} is after horizon {T}")
    if t < t0 or t > T:
        return 0.0
    return 1.0 / (T - t0 + 1)


def normalized_weights(spec, T):
    """Weights over ``spec.birth .. T`` rescaled to sum to one."""
    if T < spec.birth:
        raise DomainError(f"horizon {T} precedes birth {spec.birth}")
    w = np.array([spec.weight(t, T) for t in range(spec.birth, T + 1)])
    return w / w.sum()


def smoothed_value(spec, series):
    """Normalized-taper average of ``series``, indexed from ``spec.birth``.

    >>> smoothed_value(FilterSpec.uniform(), [1.0, 2.0, 3.0])
    2.0
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("series must be a non-empty 1-D sequence")
    if spec.kind != EXPONENTIAL:
        # sequential running sum, the same rounding as a cumulative mean
        return float(np.cumsum(x)[-1] / x.size)
    T = spec.birth + x.size - 1
    return float(normalized_weights(spec, T) @ x)


def exp_recursive_update(prev, x, alpha):
    """One step of the plain exponential recursion alpha*x + (1-alpha)*prev."""
    return alpha * x + (1.0 - alpha) * prev

