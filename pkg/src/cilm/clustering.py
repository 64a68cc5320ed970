"""Population partitioning: K-means on locations and a truncated
stick-breaking Dirichlet-process mixture over locations and infection days."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .core import EpidemicRecord, Population, ValidationError
from .kernel import ClusterAssignment


# ---------------------------------------------------------------- K-means

def kmeans(pop: Population, K: int, rng: np.random.Generator, max_iters: int = 300,
           n_init: int = 10) -> ClusterAssignment:
    """Lloyd's algorithm on the spatial coordinates.

    Each restart seeds centroids at ``K`` distinct random individuals; the
    restart with the smallest within-cluster sum of squares wins (earliest
    restart on ties). Nearest-centroid ties go to the lowest index, and a
    cluster that empties is re-seeded with the point farthest from its
    current centroid.
    """
    X = pop.coords
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ValidationError(f"K must lie in 1..{n}, got {K}")
    best = None
    for _ in range(max(1, n_init)):
        cent = X[rng.choice(n, size=K, replace=False)].copy()
        labels = np.full(n, -1)
        for _ in range(max_iters):
            d2 = ((X[:, None, :] - cent[None, :, :]) ** 2).sum(axis=2)
            new = np.argmin(d2, axis=1)
            for k in range(K):
                if not np.any(new == k):
                    own = d2[np.arange(n), new]
                    sizes = np.bincount(new, minlength=K)
                    own[sizes[new] <= 1] = -1.0   # never strip another singleton
                    far = int(np.argmax(own))
                    new[far] = k
            cent = np.array([X[new == k].mean(axis=0) for k in range(K)])
            if np.array_equal(new, labels):
                break
            labels = new
        wcss = float(((X - cent[labels]) ** 2).sum())
        if best is None or wcss < best[0]:
            best = (wcss, labels, cent)
    return ClusterAssignment(best[1], best[2])


def within_cluster_ss(pop: Population, clusters: ClusterAssignment) -> float:
    return float(((pop.coords - clusters.centroids[clusters.membership]) ** 2).sum())


# ---------------------------------------------------------- standardization

@dataclass(frozen=True)
class StandardizedData:
    """Locations rescaled onto the time window, plus hurdle-coded days.

    ``t == 0`` means never infected; infected individuals carry their
    infection day, with day 0 moved to 1 so that it stays distinct from
    the hurdle value.
    """

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    t_min: float
    t_max: float
    x_range: tuple
    y_range: tuple

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def to_original(self, cx, cy):
        """Map standardized coordinates back to the population's units."""
        span = self.t_max - self.t_min
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        return (x0 + (np.asarray(cx) - self.t_min) * (x1 - x0) / span,
                y0 + (np.asarray(cy) - self.t_min) * (y1 - y0) / span)


def _rescale(v, lo, hi, t_min, t_max):
    return t_min + (t_max - t_min) * (v - lo) / (hi - lo)


def standardize(pop: Population, record: Optional[EpidemicRecord] = None,
                t_min: float = 0.0, t_max: Optional[float] = None) -> StandardizedData:
    """Rescale x and y affinely onto ``[t_min, t_max]``.

    The window defaults to the study period ``[0, record.t_max]``. Without a
    record every individual is coded as never infected.
    """
    if t_max is None:
        if record is None:
            raise ValidationError("t_max is required without an epidemic record")
        t_max = record.t_max
    if not t_max > t_min:
        raise ValidationError(f"need t_max > t_min, got [{t_min}, {t_max}]")
    x, y = pop.x, pop.y
    x_range = (float(x.min()), float(x.max()))
    y_range = (float(y.min()), float(y.max()))
    if x_range[0] == x_range[1] or y_range[0] == y_range[1]:
        raise ValidationError("degenerate coordinate range; cannot standardize")
    if record is None:
        t = np.zeros(pop.n, dtype=np.int64)
    else:
        if record.n != pop.n:
            raise ValidationError("record and population sizes differ")
        t = np.array([0 if v is None else max(v, 1) for v in record.infection_time],
                     dtype=np.int64)
    return StandardizedData(_rescale(x, *x_range, t_min, t_max),
                            _rescale(y, *y_range, t_min, t_max),
                            t, float(t_min), float(t_max), x_range, y_range)


# ------------------------------------------------------ hurdle neg. binomial

def nb_logpmf(t, mu, phi):
    """Negative binomial with mean ``mu`` and dispersion ``phi``."""
    t = np.asarray(t, dtype=float)
    return (gammaln(t + phi) - gammaln(phi) - gammaln(t + 1)
            + t * np.log(mu / (mu + phi)) + phi * np.log(phi / (mu + phi)))


def _log1mexp(a):
    """``log(1 - exp(a))`` for ``a < 0``."""
    a = np.asarray(a, dtype=float)
    return np.where(a > -np.log(2), np.log(-np.expm1(a)), np.log1p(-np.exp(a)))


def _truncated_nb_logpmf(t, mu, phi):
    """log NB(t) - log(1 - NB(0)) for t > 0."""
    log_p0 = phi * np.log(phi / (mu + phi))
    return nb_logpmf(t, mu, phi) - _log1mexp(log_p0)


def hurdle_nb_logpmf(t, theta, mu, phi):
    """Hurdle negative binomial log-pmf: mass ``theta`` at 0 and a
    zero-truncated NB(mu, phi) scaled by ``1 - theta`` on t > 0."""
    theta = np.asarray(theta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(mu <= 0) or np.any(phi <= 0) or np.any((theta <= 0) | (theta >= 1)):
        raise ValidationError("hurdle NB needs mu > 0, phi > 0 and 0 < theta < 1")
    t = np.asarray(t)
    if np.any(t < 0):
        raise ValidationError("t must be a non-negative integer")
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log1p(-theta) + _truncated_nb_logpmf(np.maximum(t, 1), mu, phi)
    out = np.where(t == 0, np.log(theta), pos)
    return float(out) if out.ndim == 0 else out


def sample_hurdle_nb(theta, mu, phi, rng: np.random.Generator, size=None):
    """Draw from the hurdle NB (zero-truncated part by rejection)."""
    theta, mu, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(mu, float),
                                         np.asarray(phi, float))
    if size is not None:
        theta, mu, phi = (np.broadcast_to(a, size) for a in (theta, mu, phi))
    out = np.zeros(theta.shape, dtype=np.int64)
    pos = rng.random(theta.shape) >= theta
    todo = np.flatnonzero(pos.ravel())
    flat = out.reshape(-1)
    m, p = mu.reshape(-1), phi.reshape(-1)
    while todo.size:
        draw = rng.negative_binomial(p[todo], p[todo] / (m[todo] + p[todo]))
        ok = draw > 0
        flat[todo[ok]] = draw[ok]
        todo = todo[~ok]
    return out


# ---------------------------------------------------------- stick breaking

def stick_weights(U: np.ndarray) -> np.ndarray:
    """Mixture weights from stick fractions: pi_1 = U_1 and
    pi_m = U_m * prod_{j<m} (1 - U_j). The last fraction must be 1."""
    U = np.asarray(U, dtype=float)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - U[:-1])])
    return U * remaining


# -------------------------------------------------------------------- DPMM

@dataclass
class DpmmState:
    g: np.ndarray
    c_x: np.ndarray
    c_y: np.ndarray
    c_t: np.ndarray
    theta: np.ndarray
    omega_x: float
    omega_y: float
    phi: float
    U: np.ndarray
    pi: np.ndarray
    gamma_dp: float
    bounds: tuple = (0.0, 1.0)

    def copy(self) -> "DpmmState":
        return DpmmState(self.g.copy(), self.c_x.copy(), self.c_y.copy(), self.c_t.copy(),
                         self.theta.copy(), self.omega_x, self.omega_y, self.phi, self.U.copy(),
                         self.pi.copy(), self.gamma_dp, self.bounds)

    @property
    def occupied(self) -> int:
        return int(np.unique(self.g).size)


@dataclass(frozen=True)
class DpmmPriors:
    scale_shape: float = 1.5     # omega_x, omega_y, phi ~ Gamma(shape, rate)
    scale_rate: float = 1.0
    theta_a: float = 2.0
    theta_b: float = 2.0
    gamma_shape: float = 1.0
    gamma_rate: float = 2.0


def _gamma_logpdf(v, shape, rate):
    return shape * np.log(rate) - gammaln(shape) + (shape - 1) * np.log(v) - rate * v


def draw_centroid(xbar: float, omega: float, n_m: int, rng) -> float:
    """Conditional draw of a cluster's spatial mean: N(xbar, omega^2 / n_m)."""
    return rng.normal(xbar, omega / np.sqrt(n_m))


def draw_theta(n_zero, n_pos, rng, priors: DpmmPriors = DpmmPriors()):
    """Hurdle probability given member counts with t = 0 and t > 0."""
    return rng.beta(np.asarray(n_zero) + priors.theta_a, np.asarray(n_pos) + priors.theta_b)


def draw_sticks(counts: np.ndarray, gamma_dp: float, rng) -> np.ndarray:
    """U_m ~ Beta(n_m + 1, gamma + sum_{j>m} n_j) for m < M, U_M = 1."""
    counts = np.asarray(counts, dtype=float)
    tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0.0]])
    U = rng.beta(counts[:-1] + 1.0, gamma_dp + tail[:-1])
    return np.concatenate([np.minimum(U, 1.0 - 1e-12), [1.0]])


def draw_concentration(U: np.ndarray, rng, priors: DpmmPriors = DpmmPriors()) -> float:
    """gamma | U ~ Gamma(M, rate = 2 - sum_{m<M} log(1 - U_m)) under the Gamma(1, 2) prior."""
    M = len(U)
    rate = priors.gamma_rate - np.sum(np.log1p(-np.asarray(U[:-1])))
    return rng.gamma(priors.gamma_shape + M - 1, 1.0 / rate)


class _Adapter:
    """Robbins-Monro step-size tuning toward a target acceptance rate."""

    def __init__(self, step, target=0.44):
        self.log_step = np.log(step)
        self.target = target
        self.n = 0

    @property
    def step(self):
        return np.exp(self.log_step)

    def update(self, accept_rate):
        self.n += 1
        self.log_step = self.log_step + (np.asarray(accept_rate) - self.target) / np.sqrt(self.n)


def dpmm_gibbs(data: StandardizedData, M: int = 30, iters: int = 2000,
               burn_in: Optional[int] = None, rng: Optional[np.random.Generator] = None,
               spatial_only: bool = False, priors: DpmmPriors = DpmmPriors(),
               init: Optional[DpmmState] = None, adapt: bool = True) -> list:
    """Gibbs sampler for the truncated DP mixture; returns post-burn-in states.

    Each sweep updates memberships, spatial means (closed form), temporal
    means (random-walk Metropolis), hurdle probabilities (closed form),
    the shared spreads and dispersion (log-scale random-walk Metropolis),
    stick fractions and the concentration, in that order. With
    ``spatial_only`` the infection-day factor is dropped throughout.
    """
    rng = np.random.default_rng() if rng is None else rng
    burn_in = iters // 2 if burn_in is None else burn_in
    if data.n < 2:
        raise ValidationError("DPMM clustering needs at least two individuals")
    if not 0 <= burn_in < iters:
        raise ValidationError("need 0 <= burn_in < iters")
    sampler = _DpmmSampler(data, M, rng, spatial_only, priors, init)
    out = []
    for it in range(iters):
        sampler.sweep()
        if it < burn_in:
            if adapt and (it + 1) % 25 == 0:
                sampler.adapt()
        else:
            out.append(sampler.state.copy())
    return out


class _DpmmSampler:
    def __init__(self, data, M, rng, spatial_only, priors, init):
        self.x, self.y, self.t = data.x, data.y, data.t
        self.lo, self.hi = data.t_min, data.t_max
        self.M = M
        self.rng = rng
        self.spatial_only = spatial_only
        self.priors = priors
        self.pos = self.t > 0
        self.t_pos = self.t[self.pos].astype(float)
        if init is None:
            gamma_dp = 1.0
            U = np.concatenate([rng.beta(1.0, gamma_dp, M - 1), [1.0]])
            spread = 1.5
            init = DpmmState(
                g=np.zeros(data.n, dtype=np.int64),
                c_x=rng.uniform(self.lo, self.hi, M), c_y=rng.uniform(self.lo, self.hi, M),
                c_t=rng.uniform(self.lo, self.hi, M), theta=rng.beta(2.0, 2.0, M),
                omega_x=spread, omega_y=spread, phi=spread, U=U, pi=stick_weights(U),
                gamma_dp=gamma_dp, bounds=(self.lo, self.hi))
        self.state = init.copy()
        self.steps = {"c_t": _Adapter(1.0), "omega_x": _Adapter(0.2),
                      "omega_y": _Adapter(0.2), "phi": _Adapter(0.3)}
        self._acc = {k: [0, 0] for k in self.steps}

    def _pos_loglik(self, mu_of_pos, phi):
        return _truncated_nb_logpmf(self.t_pos, mu_of_pos, phi)

    # updates -------------------------------------------------------------
    def update_g(self):
        s = self.state
        with np.errstate(divide="ignore"):
            logw = np.log(s.pi)[None, :] - np.log(s.omega_x) - np.log(s.omega_y) \
                - (self.x[:, None] - s.c_x[None, :]) ** 2 / (2 * s.omega_x ** 2) \
                - (self.y[:, None] - s.c_y[None, :]) ** 2 / (2 * s.omega_y ** 2)
        if not self.spatial_only:
            logw = logw + hurdle_nb_logpmf(self.t[:, None], s.theta[None, :], s.c_t[None, :],
                                           s.phi)
        logw = logw - logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        cdf = np.cumsum(w, axis=1)
        u = self.rng.random(len(self.x)) * cdf[:, -1]
        s.g = np.minimum((cdf < u[:, None]).sum(axis=1), self.M - 1).astype(np.int64)

    def update_spatial_means(self):
        s, M = self.state, self.M
        n_m = np.bincount(s.g, minlength=M)
        occ = n_m > 0
        for c, v, om in ((s.c_x, self.x, s.omega_x), (s.c_y, self.y, s.omega_y)):
            mean = np.bincount(s.g, weights=v, minlength=M)[occ] / n_m[occ]
            fresh = self.rng.uniform(self.lo, self.hi, M)
            fresh[occ] = self.rng.normal(mean, om / np.sqrt(n_m[occ]))
            c[:] = fresh

    def _ct_target(self, c_t, phi):
        """Per-cluster log target for the temporal means (flat prior inside the window)."""
        ll = self._pos_loglik(c_t[self.state.g[self.pos]], phi)
        return np.bincount(self.state.g[self.pos], weights=ll, minlength=self.M)

    def update_temporal_means(self):
        s, M = self.state, self.M
        n_m = np.bincount(s.g, minlength=M)
        occ = n_m > 0
        prop = s.c_t + self.steps["c_t"].step * self.rng.normal(size=M)
        inside = (prop > self.lo) & (prop <= self.hi) & (prop > 0)
        cur = self._ct_target(s.c_t, s.phi)
        with np.errstate(invalid="ignore", divide="ignore"):
            new = self._ct_target(np.where(inside, prop, s.c_t), s.phi)
        log_u = np.log(self.rng.random(M))
        accept = inside & (log_u < new - cur) & occ
        s.c_t = np.where(accept, prop, s.c_t)
        empty = ~occ
        s.c_t[empty] = self.rng.uniform(self.lo, self.hi, int(empty.sum()))
        self._acc["c_t"][0] += int(accept.sum())
        self._acc["c_t"][1] += int(occ.sum())

    def update_theta(self):
        s = self.state
        n0 = np.bincount(s.g[~self.pos], minlength=self.M)
        n1 = np.bincount(s.g[self.pos], minlength=self.M)
        s.theta = draw_theta(n0, n1, self.rng, self.priors)

    def _scale_loglik(self, name, value):
        s = self.state
        if name == "omega_x":
            r = self.x - s.c_x[s.g]
            return -len(r) * np.log(value) - np.sum(r ** 2) / (2 * value ** 2)
        if name == "omega_y":
            r = self.y - s.c_y[s.g]
            return -len(r) * np.log(value) - np.sum(r ** 2) / (2 * value ** 2)
        return float(np.sum(self._pos_loglik(s.c_t[s.g[self.pos]], value)))

    def update_scales(self):
        s, p = self.state, self.priors
        names = ["omega_x", "omega_y"] if self.spatial_only else ["omega_x", "omega_y", "phi"]
        for name in names:
            cur = getattr(s, name)
            prop = cur * np.exp(self.steps[name].step * self.rng.normal())
            log_r = (self._scale_loglik(name, prop) + _gamma_logpdf(prop, p.scale_shape, p.scale_rate)
                     + np.log(prop)) \
                - (self._scale_loglik(name, cur) + _gamma_logpdf(cur, p.scale_shape, p.scale_rate)
                   + np.log(cur))
            acc = np.log(self.rng.random()) < log_r
            if acc:
                setattr(s, name, float(prop))
            self._acc[name][0] += int(acc)
            self._acc[name][1] += 1

    def update_sticks(self):
        s = self.state
        n_m = np.bincount(s.g, minlength=self.M)
        s.U = draw_sticks(n_m, s.gamma_dp, self.rng)

    def update_concentration(self):
        s = self.state
        s.gamma_dp = float(draw_concentration(s.U, self.rng, self.priors))
        s.pi = stick_weights(s.U)

    def sweep(self):
        self.update_g()
        self.update_spatial_means()
        if not self.spatial_only:
            self.update_temporal_means()
            self.update_theta()
        self.update_scales()
        self.update_sticks()
        self.update_concentration()

    def adapt(self):
        for name, (a, n) in self._acc.items():
            if n:
                self.steps[name].update(a / n)
            self._acc[name] = [0, 0]


def extract_assignment(chain: Sequence[DpmmState], pop: Population,
                       data: Optional[StandardizedData] = None) -> ClusterAssignment:
    """Point estimate of the clustering from post-burn-in sweeps.

    Each individual takes its most frequent label (lowest label on ties);
    occupied labels are compacted to 0..K-1 in ascending order; centroids
    are posterior medians of the spatial means, mapped back to the
    population's coordinate units.
    """
    if len(chain) == 0:
        raise ValidationError("empty DPMM chain")
    G = np.stack([s.g for s in chain])                       # (sweeps, N)
    M = max(len(chain[0].c_x), int(G.max()) + 1)
    counts = np.zeros((G.shape[1], M), dtype=np.int64)
    np.add.at(counts, (np.broadcast_to(np.arange(G.shape[1]), G.shape), G), 1)
    mode = np.argmax(counts, axis=1)
    labels, g = np.unique(mode, return_inverse=True)
    cx = np.median(np.stack([s.c_x for s in chain])[:, labels], axis=0)
    cy = np.median(np.stack([s.c_y for s in chain])[:, labels], axis=0)
    if data is None:
        data = standardize(pop, t_min=chain[0].bounds[0], t_max=chain[0].bounds[1])
    ox, oy = data.to_original(cx, cy)
    return ClusterAssignment(g, np.column_stack([ox, oy]))
