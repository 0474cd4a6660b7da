"""Piecewise-constant experiments for the ensemble's MSE bound.

The ensemble is run on ``observed = truth + noise`` where ``truth`` is
piecewise constant, and its cumulative squared error against ``truth`` is
compared with

    (m/gamma) ln n_T - (1/gamma) ln(beta^m (1-beta)^(T-m)) + gamma T / 8
        + m sigma*^2 ln(T/e).

Times are 1-based in this module: ``changepoints[0] == 1`` and index ``n``
of a series holds time ``n + 1``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleHyper, run_ensemble
from .errors import ParameterError


@dataclass(frozen=True)
class PiecewiseSpec:
    T: int
    changepoints: tuple
    levels: tuple
    noise_sd: tuple | float = 0.0
    seed: int = 0

    def __post_init__(self):
        cps = tuple(int(c) for c in self.changepoints)
        object.__setattr__(self, "changepoints", cps)
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        sd = self.noise_sd
        sd = (float(sd),) * len(cps) if np.isscalar(sd) else tuple(float(s) for s in sd)
        object.__setattr__(self, "noise_sd", sd)
        if self.T < 1:
            raise ParameterError("T must be positive")
        if not cps or cps[0] != 1:
            raise ParameterError("the first changepoint must be t=1")
        if any(b <= a for a, b in zip(cps, cps[1:])) or cps[-1] > self.T:
            raise ParameterError("changepoints must be strictly increasing and <= T")
        if len(self.levels) != len(cps) or len(sd) != len(cps):
            raise ParameterError("need one level and one noise_sd per segment")
        if any(s < 0 for s in sd):
            raise ParameterError("noise_sd must be non-negative")

    @property
    def m(self):
        return len(self.changepoints)

    @property
    def sigma_star(self):
        return max(self.noise_sd)

    def segment_ids(self):
        t = np.arange(1, self.T + 1)
        return np.searchsorted(self.changepoints, t, side="right") - 1

    @classmethod
    def evenly_spaced(cls, T, levels, noise_sd, seed=0):
        m = len(levels)
        cps = tuple(1 + (k * T) // m for k in range(m))
        return cls(T, cps, tuple(levels), noise_sd, seed)


@dataclass(frozen=True)
class BoundTerms:
    expert_term: float
    share_term: float
    gamma_term: float
    noise_term: float
    finite: bool

    @property
    def total(self):
        return self.expert_term + self.share_term + self.gamma_term + self.noise_term

    @property
    def regret(self):
        """The tracking-regret part of the bound (everything but the noise term)."""
        return self.expert_term + self.share_term + self.gamma_term


@dataclass(frozen=True)
class BoundReport:
    mean_sse: float
    stderr: float
    trials: int
    n_experts: int
    bound: BoundTerms
    bound_alt: BoundTerms  # m counted as transitions between segments (m - 1)
    mean_regret: float

    @property
    def passed(self):
        if not self.bound.finite:
            return True
        return self.mean_sse + 2 * self.stderr <= self.bound.total

    @property
    def passed_alt(self):
        if not self.bound_alt.finite:
            return True
        return self.mean_sse + 2 * self.stderr <= self.bound_alt.total


def gen_piecewise(spec, rng=None):
    """Return ``(truth, observed)`` arrays of length ``spec.T``."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    seg = spec.segment_ids()
    truth = np.asarray(spec.levels)[seg]
    sd = np.asarray(spec.noise_sd)[seg]
    return truth, truth + sd * rng.standard_normal(spec.T)


def oracle_mean(observed, changepoints):
    """Running mean of ``observed`` restarted at every (known) changepoint."""
    x = np.asarray(observed, dtype=float)
    out = np.empty_like(x)
    bounds = [int(c) - 1 for c in changepoints] + [x.size]
    for a, b in zip(bounds[:-1], bounds[1:]):
        out[a:b] = np.cumsum(x[a:b]) / np.arange(1, b - a + 1)
    return out


def regret(estimates, oracle, truth):
    """Cumulative squared error of ``estimates`` minus that of ``oracle``."""
    e, o, y = (np.asarray(v, dtype=float) for v in (estimates, oracle, truth))
    if not e.shape == o.shape == y.shape:
        raise ParameterError("estimates, oracle and truth must have equal lengths")
    return float(np.sum((e - y) ** 2) - np.sum((o - y) ** 2))


def mse_bound(m, gamma, beta, T, n_t, sigma_star):
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    if not 0 <= beta <= 1:
        raise ParameterError("beta must lie in [0, 1]")
    if not (0 <= m < T and n_t >= 1):
        raise ParameterError("need 0 <= m < T and n_t >= 1")
    finite = True
    log_share = 0.0
    for count, p in ((m, beta), (T - m, 1.0 - beta)):
        if count == 0:
            continue
        if p == 0:
            finite = False
            log_share = -math.inf
            break
        log_share += count * math.log(p)
    return BoundTerms(
        expert_term=m / gamma * math.log(n_t),
        share_term=-log_share / gamma,
        gamma_term=gamma * T / 8.0,
        noise_term=m * sigma_star**2 * math.log(T / math.e),
        finite=finite,
    )


def harmonic_partition_sum(changepoints, T):
    """Sum over segments of sum_t 1 / (t - t_k + 1)."""
    bounds = list(changepoints) + [T + 1]
    return float(sum(np.sum(1.0 / np.arange(1, b - a + 1)) for a, b in zip(bounds[:-1], bounds[1:])))


def _trial(spec, hyper, seed_seq):
    truth, observed = gen_piecewise(spec, np.random.default_rng(seed_seq))
    est, state = run_ensemble(hyper, observed, t0=1)
    sse = float(np.sum((est - truth) ** 2))
    reg = regret(est, oracle_mean(observed, spec.changepoints), truth)
    return sse, reg, state.n_experts


def run_bound_experiment(spec, hyper=None, trials=100, threads=1):
    """Monte-Carlo mean cumulative squared error against the evaluated bound.

    Trial ``n`` uses the ``n``-th child of ``SeedSequence(spec.seed)``, so the
    report does not depend on ``threads``.
    """
    hyper = hyper or EnsembleHyper()
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    seeds = np.random.SeedSequence(spec.seed).spawn(trials)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _trial(spec, hyper, s), seeds))
    else:
        results = [_trial(spec, hyper, s) for s in seeds]
    sse = np.array([r[0] for r in results])
    reg = np.array([r[1] for r in results])
    n_t = results[0][2]
    stderr = float(sse.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    args = (hyper.gamma, hyper.beta, spec.T, n_t, spec.sigma_star)
    return BoundReport(
        mean_sse=float(sse.mean()),
        stderr=stderr,
        trials=trials,
        n_experts=n_t,
        bound=mse_bound(spec.m, *args),
        bound_alt=mse_bound(spec.m - 1, *args),
        mean_regret=float(reg.mean()),
    )


REPORT_COLUMNS = (
    "T", "m", "changepoints", "levels", "sigma_star", "tau", "beta", "gamma",
    "base_filters", "trials", "seed", "n_experts",
    "expert_term", "share_term", "gamma_term", "noise_term", "bound", "bound_transitions",
    "mean_sse", "stderr", "mean_regret", "pass", "pass_transitions",
)


def report_row(spec, hyper, report):
    b = report.bound
    return {
        "T": spec.T,
        "m": spec.m,
        "changepoints": " ".join(str(c) for c in spec.changepoints),
        "levels": " ".join(repr(v) for v in spec.levels),
        "sigma_star": repr(spec.sigma_star),
        "tau": hyper.tau,
        "beta": repr(hyper.beta),
        "gamma": repr(hyper.gamma),
        "base_filters": " ".join(str(s) for s in hyper.base_set),
        "trials": report.trials,
        "seed": spec.seed,
        "n_experts": report.n_experts,
        "expert_term": repr(b.expert_term),
        "share_term": repr(b.share_term),
        "gamma_term": repr(b.gamma_term),
        "noise_term": repr(b.noise_term),
        "bound": repr(b.total),
        "bound_transitions": repr(report.bound_alt.total),
        "mean_sse": repr(report.mean_sse),
        "stderr": repr(report.stderr),
        "mean_regret": repr(report.mean_regret),
        "pass": "true" if report.passed else "false",
        "pass_transitions": "true" if report.passed_alt else "false",
    }


def write_report_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def render_summary(spec, hyper, report):
    b = report.bound
    lines = [
        f"piecewise experiment: T={spec.T}, segments={spec.m}, sigma*={spec.sigma_star}",
        f"ensemble: tau={hyper.tau} beta={hyper.beta} gamma={hyper.gamma} "
        f"base={', '.join(str(s) for s in hyper.base_set)}; n_T={report.n_experts}",
        f"empirical cumulative squared error: {report.mean_sse:.6g} "
        f"(stderr {report.stderr:.3g}, {report.trials} trials)",
        f"mean tracking regret vs oracle mean: {report.mean_regret:.6g} "
        f"(regret bound {b.regret:.6g})",
        "bound terms:",
        f"  (m/gamma) ln n_T            = {b.expert_term:.6g}",
        f"  -(1/gamma) ln b^m (1-b)^T-m = {b.share_term:.6g}",
        f"  gamma T / 8                 = {b.gamma_term:.6g}",
        f"  m sigma*^2 ln(T/e)          = {b.noise_term:.6g}",
        f"  total                       = {b.total:.6g}"
        + ("" if b.finite else "  (infinite: beta at boundary)"),
        f"  total with m-1 transitions  = {report.bound_alt.total:.6g}",
        f"result: {'PASS' if report.passed else 'FAIL'} "
        f"(mean + 2 stderr = {report.mean_sse + 2 * report.stderr:.6g})",
    ]
    return "\n".join(lines) + "\n"
