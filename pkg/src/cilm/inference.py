"""Bayesian fitting of spatial ILMs / composite ILMs by adaptive
random-walk Metropolis-within-Gibbs."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .core import (EpidemicRecord, ModelParams, Population, ValidationError, pairwise_distances,
                   parsing)
from .kernel import ModelSpec, NumericalError

POSITIVE = ("alpha", "beta", "epsilon", "beta_tilde")
PARAM_ORDER = ("alpha", "beta", "beta_tilde", "epsilon", "delta")


class InitializationError(RuntimeError):
    """The chain cannot start: the posterior is zero at the initial point."""


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors. Gamma entries are ``(shape, rate)``; ``delta``
    is ``(mean, sd)`` of a normal."""

    alpha: tuple = (1.5, 1.0)
    beta: tuple = (2.0, 3.0)
    beta_tilde: tuple = (2.0, 3.0)
    epsilon: tuple = (1.5, 1.0)
    delta: tuple = (1.0, 1.0)

    def __post_init__(self):
        for name in ("alpha", "beta", "beta_tilde", "epsilon"):
            a, b = getattr(self, name)
            if not (a > 0 and b > 0):
                raise ValidationError(f"{name} prior needs positive shape and rate")
        if not self.delta[1] > 0:
            raise ValidationError("delta prior needs a positive sd")

    def logpdf(self, name: str, value: float) -> float:
        if name == "delta":
            return float(stats.norm.logpdf(value, *self.delta))
        if not value > 0:
            return -math.inf
        shape, rate = getattr(self, name)
        return float(stats.gamma.logpdf(value, shape, scale=1.0 / rate))

    def sample(self, name: str, rng) -> float:
        if name == "delta":
            return float(rng.normal(*self.delta))
        shape, rate = getattr(self, name)
        return float(rng.gamma(shape, 1.0 / rate))

    def as_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in PARAM_ORDER}


def log_prior(params: ModelParams, priors: PriorSpec = PriorSpec()) -> float:
    """Sum of prior log-densities over the parameters present; ``-inf``
    outside the support."""
    total = 0.0
    for name, value in params.as_dict().items():
        lp = priors.logpdf(name, value)
        if lp == -math.inf:
            return -math.inf
        total += lp
    return total


@dataclass
class McmcTrace:
    names: tuple
    draws: np.ndarray            # (iters, n_params)
    log_post: np.ndarray         # (iters,)
    acceptance: dict
    seed: int
    burn_in: int
    metadata: dict = field(default_factory=dict)

    @property
    def iters(self) -> int:
        return self.draws.shape[0]

    def posterior(self) -> np.ndarray:
        return self.draws[self.burn_in:]

    def column(self, name: str, post: bool = True) -> np.ndarray:
        d = self.posterior() if post else self.draws
        return d[:, self.names.index(name)]

    def params_at(self, row: int) -> ModelParams:
        kw = dict(zip(self.names, map(float, self.draws[row])))
        return ModelParams(**kw)

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            order = [self.names.index(n) for n in PARAM_ORDER if n in self.names]
            w.writerow(["iter", *(self.names[j] for j in order), "log_post"])
            for i, (row, lp) in enumerate(zip(self.draws, self.log_post)):
                w.writerow([i, *(repr(float(row[j])) for j in order), repr(float(lp))])
        meta = {"seed": self.seed, "burn_in": self.burn_in, "acceptance": self.acceptance,
                **self.metadata}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "McmcTrace":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or len(rows[0]) < 3:
            raise ValidationError(f"{path}: not a trace file")
        header = rows[0]
        names = tuple(header[1:-1])
        with parsing(path):
            arr = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(header))
        meta = json.loads(path.with_suffix(".json").read_text())
        seed = meta.pop("seed")
        burn_in = meta.pop("burn_in")
        acceptance = meta.pop("acceptance")
        return cls(names, arr[:, 1:-1], arr[:, -1], acceptance, seed, burn_in, meta)


class _Posterior:
    def __init__(self, likelihood, names, priors):
        self.likelihood = likelihood
        self.names = names
        self.priors = priors

    def __call__(self, values) -> float:
        params = ModelParams(**dict(zip(self.names, values)))
        lp = log_prior(params, self.priors)
        if lp == -math.inf:
            return -math.inf
        try:
            ll = self.likelihood(params)
        except NumericalError:
            return -math.inf
        return lp + ll


def fit_mcmc(record: EpidemicRecord, pop: Population, model: ModelSpec,
             priors: PriorSpec = PriorSpec(), iters: int = 2000, seed: int = 0,
             burn_in: Optional[int] = None, init: Optional[dict] = None, dist=None,
             workers: int = 1, target_accept: float = 0.44, adapt_every: int = 50,
             max_init_tries: int = 100) -> McmcTrace:
    """Adaptive random-walk Metropolis with one block per parameter.

    Positive parameters move on the log scale (with the Jacobian term in
    the acceptance ratio); ``delta`` moves on the real line. During
    burn-in, step sizes adapt every ``adapt_every`` iterations toward
    ``target_accept``; they are frozen afterwards. Starting values are
    drawn from the priors (``delta`` starts at 1) unless ``init`` is given.
    """
    if iters < 2:
        raise ValidationError("need at least two iterations")
    burn_in = iters // 2 if burn_in is None else int(burn_in)
    if not 0 <= burn_in < iters:
        raise ValidationError("need 0 <= burn_in < iters")
    rng = np.random.default_rng(seed)
    dist = pairwise_distances(pop) if dist is None else dist
    likelihood = model.likelihood(record, dist, pop, workers=workers)
    names = model.param_names
    target = _Posterior(likelihood, names, priors)

    if init is not None:
        x = np.array([float(init[n]) for n in names])
        lp = target(x)
        if lp == -math.inf:
            raise InitializationError(f"posterior is zero at the given initial point {init}")
    else:
        for _ in range(max_init_tries):
            x = np.array([1.0 if n == "delta" else priors.sample(n, rng) for n in names])
            lp = target(x)
            if lp > -math.inf:
                break
        else:
            raise InitializationError(
                f"no prior draw out of {max_init_tries} gives a non-zero posterior for "
                f"model {model.label}; supply an explicit initial point")

    log_scale = np.array([n in POSITIVE for n in names])
    log_step = np.log(np.where(log_scale, 0.3, 0.5))
    n_p = len(names)
    draws = np.empty((iters, n_p))
    log_post = np.empty(iters)
    accepted = np.zeros(n_p)
    batch_acc = np.zeros(n_p)
    n_adapt = 0
    for it in range(iters):
        for j in range(n_p):
            prop = x.copy()
            z = rng.normal()
            if log_scale[j]:
                prop[j] = x[j] * math.exp(math.exp(log_step[j]) * z)
                jac = math.log(prop[j]) - math.log(x[j])
            else:
                prop[j] = x[j] + math.exp(log_step[j]) * z
                jac = 0.0
            lp_prop = target(prop)
            if math.log(rng.random()) < lp_prop - lp + jac:
                x, lp = prop, lp_prop
                batch_acc[j] += 1
                if it >= burn_in:
                    accepted[j] += 1
        draws[it] = x
        log_post[it] = lp
        if it < burn_in and (it + 1) % adapt_every == 0:
            n_adapt += 1
            log_step += (batch_acc / adapt_every - target_accept) / math.sqrt(n_adapt)
            batch_acc[:] = 0
    n_post = iters - burn_in
    acceptance = {n: float(accepted[j] / n_post) for j, n in enumerate(names)}
    meta = {"model": model.label, "spark": model.spark.value, "frame": model.frame,
            "composite": model.composite, "priors": priors.as_dict(),
            "proposal": "adaptive random-walk Metropolis, one block per parameter",
            "burn_in_rule": "iters // 2" if burn_in == iters // 2 else "user",
            "final_steps": {n: float(math.exp(s)) for n, s in zip(names, log_step)}}
    return McmcTrace(tuple(names), draws, log_post, acceptance, seed, burn_in, meta)


def split_rhat(chain) -> float:
    """Potential scale reduction from the two halves of one chain.

    Reported as 1 when neither half varies and both agree, and floored at
    1 otherwise (values below 1 carry no evidence of non-convergence).
    """
    chain = np.asarray(chain, dtype=float)
    half = chain.shape[0] // 2
    if half < 2:
        raise ValidationError("need at least four draws for split R-hat")
    return potential_scale_reduction([chain[:half], chain[half: 2 * half]])


def potential_scale_reduction(chains) -> float:
    chains = np.asarray(chains, dtype=float)
    m, n = chains.shape
    means = chains.mean(axis=1)
    W = chains.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else math.inf
    var_plus = (n - 1) / n * W + B / n
    return max(1.0, math.sqrt(var_plus / W))


def diagnostics(trace: McmcTrace, threshold: float = 1.1) -> dict:
    """Per-parameter acceptance rate and split R-hat over post-burn-in draws."""
    out = {}
    post = trace.posterior()
    for j, name in enumerate(trace.names):
        rhat = split_rhat(post[:, j])
        out[name] = {"acceptance": trace.acceptance.get(name, float("nan")),
                     "rhat": rhat, "flagged": bool(rhat > threshold)}
    return out
