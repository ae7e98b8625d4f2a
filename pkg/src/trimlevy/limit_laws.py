"""Limit laws of the normalized pair (trimmed sum, r-th largest jump).

Every law is the pushforward of two independent standard normals
``(N_X, N_G)`` under a scheme-specific map; marginal CDFs are evaluated
analytically, except for the normal scale mixture of ``NEG_DET_SCALE``,
which uses Gauss-Hermite quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .norming import h_fn, h_inverse_fn
from .schemes import ConfigError, Scheme, check_compatible

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(160)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2.0 * math.pi)


def delta_limit_cdf(gamma: float, x, t: float = 1.0):
    """``Phi(sqrt(t) h_gamma(x))``; 0 below the lower edge ``-1/|gamma|`` of R_gamma."""
    if gamma > 0:
        raise ConfigError("gamma must be <= 0")
    if not t > 0:
        raise ConfigError("t must be > 0")
    x = np.asarray(x, dtype=float)
    if gamma == 0:
        out = ndtr(math.sqrt(t) * 2.0 * x)
    else:
        inside = 1.0 - gamma * x > 0
        safe = np.where(inside, x, 0.0)
        out = np.where(inside, ndtr(math.sqrt(t) * h_fn(gamma, safe)), 0.0)
    return float(out) if out.ndim == 0 else out


def _lognormal_cdf(g: float, x: np.ndarray) -> np.ndarray:
    """CDF of ``exp(-g N / 2)``."""
    pos = x > 0
    safe = np.where(pos, x, 1.0)
    return np.where(pos, ndtr(2.0 * np.log(safe) / g), 0.0)


def _scale_mixture_cdf(g: float, x: np.ndarray) -> np.ndarray:
    """CDF of ``N_X exp(-g N_G / 2)``: ``E[Phi(x exp(g N_G / 2))]``."""
    scale = np.exp(g * _GH_NODES / 2.0)
    return ndtr(np.multiply.outer(x, scale)) @ _GH_WEIGHTS


@dataclass(frozen=True)
class LimitLaw:
    scheme: Scheme
    gamma: float
    c_alpha: float = None
    t: float = 1.0

    # -- sampling -----------------------------------------------------------
    def transform(self, nx: np.ndarray, ng: np.ndarray) -> np.ndarray:
        """Apply the scheme's map to independent standard normal arrays."""
        g = abs(self.gamma)
        s = self.scheme
        out = np.empty((len(nx), 2))
        if s in (Scheme.COND_CLT, Scheme.JOINT_RANDOM):
            out[:, 0] = nx
            out[:, 1] = h_inverse_fn(self.gamma, ng)
        elif s is Scheme.DELTA_ONLY:
            out[:, 0] = np.nan
            out[:, 1] = h_inverse_fn(self.gamma, ng / math.sqrt(self.t))
        elif s is Scheme.NEG_DET_SCALE:
            e = np.exp(-g * ng / 2.0)
            out[:, 0] = nx * e
            out[:, 1] = e
        elif s is Scheme.NEG_DET_CENTER:
            e = np.exp(-g * ng / 2.0)
            out[:, 0] = (2.0 / g) * (e - 1.0)
            out[:, 1] = e
        elif s is Scheme.RV_DET_CENTER:
            out[:, 0] = nx + ng / math.sqrt(self.c_alpha)
            out[:, 1] = ng / 2.0
        else:  # G0_DET_SCALE, SLOW_DET_CENTER
            out[:, 0] = nx
            out[:, 1] = ng / 2.0
        return out

    def sample(self, rng, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        gen = rng.generator() if hasattr(rng, "generator") else rng
        z = gen.standard_normal((n, 2))
        return self.transform(z[:, 0], z[:, 1])

    # -- marginals ----------------------------------------------------------
    @property
    def components(self) -> tuple:
        return (2,) if self.scheme is Scheme.DELTA_ONLY else (1, 2)

    def marginal_cdf(self, component: int, x):
        if component not in self.components:
            raise ConfigError(f"{self.scheme.value} has no limit for component {component}")
        x = np.asarray(x, dtype=float)
        out = self._cdf(component, np.atleast_1d(x)).reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def _cdf(self, component: int, x: np.ndarray) -> np.ndarray:
        g = abs(self.gamma)
        s = self.scheme
        if component == 2:
            if s in (Scheme.COND_CLT, Scheme.JOINT_RANDOM):
                return np.asarray(delta_limit_cdf(self.gamma, x))
            if s is Scheme.DELTA_ONLY:
                return np.asarray(delta_limit_cdf(self.gamma, x, self.t))
            if s in (Scheme.NEG_DET_SCALE, Scheme.NEG_DET_CENTER):
                return _lognormal_cdf(g, x)
            return ndtr(2.0 * x)
        if s is Scheme.NEG_DET_SCALE:
            return _scale_mixture_cdf(g, x)
        if s is Scheme.NEG_DET_CENTER:
            # (2/g)(E - 1) <= x  <=>  E <= 1 + g x / 2
            return _lognormal_cdf(g, 1.0 + g * x / 2.0)
        if s is Scheme.RV_DET_CENTER:
            return ndtr(x / math.sqrt(1.0 + 1.0 / self.c_alpha))
        return ndtr(x)

    # -- moment ledger ------------------------------------------------------
    def moments(self) -> dict:
        """Means, variances and correlation of the limit pair (closed forms)."""
        g2 = self.gamma * self.gamma
        g = abs(self.gamma)
        s = self.scheme
        nan = float("nan")
        if s in (Scheme.COND_CLT, Scheme.JOINT_RANDOM, Scheme.DELTA_ONLY):
            tt = self.t if s is Scheme.DELTA_ONLY else 1.0
            if self.gamma == 0:
                m2, v2 = 0.0, 0.25 / tt
            else:
                m2 = math.expm1(g2 / (8 * tt)) / g
                v2 = (math.exp(g2 / (2 * tt)) - math.exp(g2 / (4 * tt))) / g2
            if s is Scheme.DELTA_ONLY:
                return dict(mean1=nan, mean2=m2, var1=nan, var2=v2, corr=nan)
            return dict(mean1=0.0, mean2=m2, var1=1.0, var2=v2, corr=0.0)
        if s in (Scheme.NEG_DET_SCALE, Scheme.NEG_DET_CENTER):
            m2 = math.exp(g2 / 8)
            v2 = math.exp(g2 / 2) - math.exp(g2 / 4)
            if s is Scheme.NEG_DET_SCALE:
                # cov(N_X E, E) = E[N_X] E[E^2] - 0 = 0
                return dict(mean1=0.0, mean2=m2, var1=math.exp(g2 / 2), var2=v2, corr=0.0)
            return dict(mean1=(2 / g) * (m2 - 1), mean2=m2, var1=4 * v2 / g2, var2=v2, corr=1.0)
        if s is Scheme.RV_DET_CENTER:
            c = self.c_alpha
            return dict(mean1=0.0, mean2=0.0, var1=1.0 + 1.0 / c, var2=0.25,
                        corr=1.0 / math.sqrt(1.0 + c))
        return dict(mean1=0.0, mean2=0.0, var1=1.0, var2=0.25, corr=0.0)


def make_limit_law(scheme, gamma: float, c_alpha: float = None, t: float = 1.0) -> LimitLaw:
    scheme = Scheme.parse(scheme)
    check_compatible(scheme, gamma, c_alpha=c_alpha, t=t)
    return LimitLaw(scheme=scheme, gamma=float(gamma),
                    c_alpha=None if c_alpha is None else float(c_alpha), t=float(t))


def limit_sample(law: LimitLaw, rng, n: int) -> np.ndarray:
    return law.sample(rng, n)


def marginal_quantile(law: LimitLaw, component: int, p, iterations: int = 200) -> np.ndarray:
    """Quantiles of a marginal by bisection on :meth:`LimitLaw.marginal_cdf`."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probabilities must lie in (0, 1)")
    lo_p, hi_p = float(p.min()), float(p.max())
    width = 1.0
    while law.marginal_cdf(component, -width) > lo_p or law.marginal_cdf(component, width) < hi_p:
        width *= 2.0
        if width > 1e300:
            raise RuntimeError("could not bracket the quantile")
    lo = np.full_like(p, -width)
    hi = np.full_like(p, width)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = law.marginal_cdf(component, mid) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)
