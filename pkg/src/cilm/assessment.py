"""Model comparison and predictive checks: WAIC, HPD intervals and
posterior-predictive incidence curves."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import (NEVER, EpidemicRecord, Population, ValidationError, incidence_curve,
                   pairwise_distances)
from .core import build_timeline as _build_timeline
from .inference import McmcTrace
from .kernel import ModelSpec
from .simulate import run_from_state


@dataclass(frozen=True)
class WaicResult:
    waic: float
    lppd: float
    p_waic: float
    n_units: int


def waic(pointwise) -> WaicResult:
    """WAIC = -2 (lppd - p_waic) from a (draws, units) log-likelihood matrix."""
    ll = np.asarray(pointwise, dtype=float)
    if ll.ndim != 2 or ll.shape[0] < 2:
        raise ValidationError("need a (draws >= 2, units) matrix")
    if np.any(np.all(ll == -np.inf, axis=0)):
        raise ValidationError("a unit has zero likelihood under every draw")
    S = ll.shape[0]
    lppd = float(np.sum(logsumexp(ll, axis=0) - math.log(S)))
    with np.errstate(invalid="ignore"):
        var = np.var(ll, axis=0, ddof=1)
    var[~np.isfinite(var)] = np.inf
    p_waic = float(np.sum(var))
    return WaicResult(-2.0 * (lppd - p_waic), lppd, p_waic, ll.shape[1])


def pointwise_log_likelihood(trace: McmcTrace, record: EpidemicRecord, pop: Population,
                             model: ModelSpec, dist=None, max_draws: Optional[int] = None,
                             ) -> np.ndarray:
    """Per-exposure log-likelihood matrix over post-burn-in draws.

    A unit is one (individual, day) Bernoulli term of the likelihood.
    ``max_draws`` thins evenly when the posterior sample is larger.
    """
    dist = pairwise_distances(pop) if dist is None else dist
    lik = model.likelihood(record, dist, pop)
    rows = np.arange(trace.burn_in, trace.iters)
    if max_draws is not None and rows.size > max_draws:
        rows = rows[np.linspace(0, rows.size - 1, max_draws).round().astype(int)]
    return np.stack([lik.pointwise(trace.params_at(r)) for r in rows])


def hpdi(samples, mass: float = 0.95):
    """Shortest interval spanning ``ceil(mass * n)`` consecutive order
    statistics; the lowest starting index wins ties."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = s.size
    if not 0 < mass <= 1:
        raise ValidationError("mass must lie in (0, 1]")
    w = math.ceil(mass * n - 1e-9)
    if n < 20 or w > n or w < 1:
        raise ValidationError(f"need at least 20 samples for an HPDI, got {n}")
    widths = s[w - 1:] - s[: n - w + 1]
    i = int(np.argmin(widths))
    return float(s[i]), float(s[i + w - 1])


@dataclass
class CurveEnsemble:
    days: np.ndarray          # day each curve entry refers to (new I-entries on that day)
    curves: np.ndarray        # (n_sims, len(days))
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    observed: Optional[np.ndarray] = None
    records: Optional[list] = None

    @classmethod
    def from_curves(cls, days, curves, observed=None, records=None, mass=0.95):
        curves = np.asarray(curves)
        if curves.shape[1] == 0:
            empty = np.zeros(0)
            return cls(np.asarray(days), curves, empty, empty, empty, observed, records)
        bounds = np.array([hpdi(curves[:, k], mass) for k in range(curves.shape[1])])
        return cls(np.asarray(days), curves, bounds[:, 0], np.median(curves, axis=0),
                   bounds[:, 1], observed, records)

    @property
    def n_sims(self) -> int:
        return self.curves.shape[0]

    def coverage(self, curve=None) -> float:
        """Fraction of days on which ``curve`` lies inside the band."""
        curve = self.observed if curve is None else np.asarray(curve)
        if curve is None or len(curve) == 0:
            return float("nan")
        return float(np.mean((curve >= self.lower) & (curve <= self.upper)))

    def to_csv(self, path, include_sims: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t", "lower", "median", "upper"]
            if self.observed is not None:
                head.append("observed")
            if include_sims:
                head += [f"sim{i}" for i in range(self.n_sims)]
            w.writerow(head)
            for k, day in enumerate(self.days):
                row = [int(day), repr(float(self.lower[k])), repr(float(self.median[k])),
                       repr(float(self.upper[k]))]
                if self.observed is not None:
                    row.append(int(self.observed[k]))
                if include_sims:
                    row += [int(v) for v in self.curves[:, k]]
                w.writerow(row)


def _posterior_rows(trace: McmcTrace, n_sims: int, rng) -> np.ndarray:
    rows = np.arange(trace.burn_in, trace.iters)
    return rng.choice(rows, size=n_sims, replace=rows.size < n_sims)


def ppd_complete(trace: McmcTrace, record: EpidemicRecord, pop: Population, model: ModelSpec,
                 n_sims: int = 100, rng=None, dist=None, keep_records: bool = False
                 ) -> CurveEnsemble:
    """Re-simulate the whole epidemic from its initial infectives for
    ``n_sims`` posterior draws and summarize the incidence curves."""
    rng = np.random.default_rng() if rng is None else rng
    dist = pairwise_distances(pop) if dist is None else dist
    tl = model.timeline(record)
    t0 = record.first_day()
    init = tl.s_exit == t0
    s_exit = np.where(init, tl.s_exit, NEVER)
    i_start = np.where(init, tl.i_start, NEVER)
    r_start = np.where(init, tl.r_start, NEVER)
    curves, records = [], []
    for row in _posterior_rows(trace, n_sims, rng):
        sim = run_from_state(pop, trace.params_at(row), model, s_exit, i_start, r_start, t0,
                             record.t_max, rng, dist)
        curves.append(incidence_curve(model.timeline(sim)))
        if keep_records:
            records.append(sim)
    observed = incidence_curve(tl)
    days = np.arange(1, record.t_max + 1)
    return CurveEnsemble.from_curves(days, np.array(curves).reshape(n_sims, -1), observed,
                                     records if keep_records else None)


def ppd_forecast(trace_early: McmcTrace, record: EpidemicRecord, pop: Population,
                 model: ModelSpec, from_t: int = 5, n_sims: int = 100, rng=None, dist=None,
                 keep_records: bool = False) -> CurveEnsemble:
    """Forecast incidence after day ``from_t`` from the compartment state
    observed on that day, using a posterior fitted to the early window.

    Curve entries cover new I-entries on days ``from_t + 1 .. t_max``.
    """
    if not 0 <= from_t <= record.t_max:
        raise ValidationError(f"from_t {from_t} outside 0..{record.t_max}")
    rng = np.random.default_rng() if rng is None else rng
    dist = pairwise_distances(pop) if dist is None else dist
    if model.infectious_period is None:
        raise ValidationError("forecasting needs a fixed infectious period")
    early = _build_timeline(record.truncate(from_t), model.frame, model.latent_period,
                            model.infectious_period)
    curves, records = [], []
    for row in _posterior_rows(trace_early, n_sims, rng):
        sim = run_from_state(pop, trace_early.params_at(row), model, early.s_exit,
                             early.i_start, early.r_start, from_t, record.t_max, rng, dist)
        curves.append(incidence_curve(model.timeline(sim))[from_t:])
        if keep_records:
            records.append(sim)
    observed = incidence_curve(model.timeline(record))[from_t:]
    days = np.arange(from_t + 1, record.t_max + 1)
    return CurveEnsemble.from_curves(days, np.array(curves).reshape(n_sims, -1), observed,
                                     records if keep_records else None)
