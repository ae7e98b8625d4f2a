"""Limit functions h_gamma, normalizing sequences (a_r, b_r), de Haan diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .models import DomainError, LevyTailModel


def h_fn(gamma: float, x):
    """Limit function ``h_gamma``: ``2x`` at gamma = 0, ``-(2/gamma) log(1 - gamma x)`` otherwise."""
    if gamma > 0:
        raise DomainError("gamma must be <= 0")
    x = np.asarray(x, dtype=float)
    if gamma == 0:
        out = 2.0 * x
    else:
        arg = -gamma * x
        if np.any(~(arg > -1.0)):
            raise DomainError("x outside R_gamma (need 1 - gamma x > 0)")
        # 2x log1p(u)/u with u = -gamma x; Taylor series where u is tiny or subnormal
        small = np.abs(arg) < 1e-8
        safe = np.where(small, 1.0, arg)
        out = 2.0 * x * np.where(small, 1.0 - arg / 2.0, np.log1p(safe) / safe)
    return float(out) if out.ndim == 0 else out


def h_inverse_fn(gamma: float, y):
    """Inverse of :func:`h_fn`; defined on the whole real line."""
    if gamma > 0:
        raise DomainError("gamma must be <= 0")
    y = np.asarray(y, dtype=float)
    if gamma == 0:
        out = 0.5 * y
    else:
        u = abs(gamma) * y / 2.0
        small = np.abs(u) < 1e-8
        safe = np.where(small, 1.0, u)
        out = 0.5 * y * np.where(small, 1.0 + u / 2.0, np.expm1(safe) / safe)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NormingSequences:
    r: float
    a_r: float
    b_r: float
    log_a: float
    log_b: float
    regime: float

    def to_dict(self) -> dict:
        return {"r": self.r, "a_r": self.a_r, "b_r": self.b_r,
                "log_a": self.log_a, "log_b": self.log_b, "regime": self.regime}


def norming_sequences(model: LevyTailModel, r: float) -> NormingSequences:
    """Scale ``a_r`` and center ``b_r = tail_inverse(r)`` for the model's regime.

    For gamma < 0, ``a_r = |gamma| b_r``.  For gamma = 0,
    ``a_r = 2 (tail_inverse(r - sqrt r) - tail_inverse(r))``, evaluated as
    ``2 b_r expm1(...)`` on the log scale so that it survives underflow of
    ``b_r`` itself.
    """
    r = float(r)
    if not r > 1.0:
        raise DomainError(f"trimming level must exceed 1, got {r}")
    if model.analytic_norming is not None:
        a, b = model.analytic_norming(r)
        return NormingSequences(r, a, b, math.log(a), math.log(b), model.gamma)

    log_b = float(model.log_tail_inverse(r))
    if model.gamma < 0:
        log_a = log_b + math.log(abs(model.gamma))
    else:
        log_up = float(model.log_tail_inverse(r - math.sqrt(r)))
        diff = math.expm1(log_up - log_b)
        if not diff > 0:
            raise DomainError("tail inverse is flat near r; a_r would vanish")
        log_a = log_b + math.log(2.0 * diff)
    b = float(model.tail_inverse(r))
    a = b * math.exp(log_a - log_b) if b > 0 else math.exp(log_a)
    return NormingSequences(r, a, b, log_a, log_b, model.gamma)


def empirical_h(model: LevyTailModel, r: float, x):
    """Finite-r left side ``(r - tail(a_r x + b_r)) / sqrt(r)`` of the tail condition."""
    ns = norming_sequences(model, r)
    x = np.asarray(x, dtype=float)
    # a_r x + b_r = b_r (1 + x a_r / b_r)
    scale = 1.0 + x * math.exp(ns.log_a - ns.log_b)
    if np.any(~(scale > 0)):
        raise DomainError("a_r x + b_r must be positive")
    tails = np.asarray(model.tail_at_log(ns.log_b + np.log(scale)), dtype=float)
    out = (r - tails) / math.sqrt(r)
    return float(out) if out.ndim == 0 else out


# -- de Haan diagnostics ------------------------------------------------------

def H(t):
    return np.exp(2.0 * np.sqrt(t))


def H_inverse(y):
    ly = np.log(y)
    return 0.25 * ly * ly


def auxiliary_f(t):
    return np.sqrt(t)


class DeHaanDiagnostics:
    """The Gamma-varying ``H(t) = exp(2 sqrt t)`` and the composed ``V``.

    ``V(x) = tail_inverse(H_inverse(x))``.  ``pi_p`` and its auxiliary ``g_p``
    connect back to truncated moments through
    ``int_0^x u^p Pi(du) = pi_p(H(tail(x)))``.  Large arguments are taken on
    the log scale (``log_x``) because ``H`` overflows quickly.
    """

    def __init__(self, model: LevyTailModel):
        self.model = model

    H = staticmethod(H)
    H_inverse = staticmethod(H_inverse)
    f = staticmethod(auxiliary_f)

    def log_V(self, log_x):
        t = 0.25 * np.asarray(log_x, dtype=float) ** 2
        return self.model.log_tail_inverse(t)

    def V(self, x):
        return np.exp(self.log_V(np.log(x)))

    def g_p(self, p: float, t: float) -> float:
        return 0.5 * float(self.V(t)) ** p * math.log(t)

    def pi_p(self, p: float, t: float = None, *, log_t: float = None) -> float:
        """``int_t^inf V(v)^p (log v / 2) dv / v``, integrated over ``w = log v``."""
        if (t is None) == (log_t is None):
            raise TypeError("pass exactly one of t, log_t")
        if log_t is None:
            log_t = math.log(t)
        if not log_t > 0:
            raise DomainError("pi_p needs t > 1")

        def integrand(w):
            return math.exp(p * float(self.log_V(w))) * 0.5 * w

        # geometric panels: V^p decays only polynomially in w for regularly varying tails
        total, a, width = 0.0, log_t, max(1.0, log_t)
        for _ in range(2000):
            val, _err = integrate.quad(integrand, a, a + width, epsabs=0.0, epsrel=1e-11, limit=200)
            total += val
            a += width
            width *= 1.5
            if val <= 1e-16 * total:
                return total
        raise RuntimeError("pi_p quadrature did not settle")


def dehaan_v_check(model: LevyTailModel, x: float, log_s: float) -> float:
    """Finite-s ratio ``(V(s x) - V(s)) / a(H_inverse(s))`` with ``s = exp(log_s)``.

    Converges to ``-log(x)/2`` when gamma = 0 and to
    ``-(x**(gamma/2) - 1) / gamma`` when gamma < 0.
    """
    if not x > 0:
        raise DomainError("x must be > 0")
    t = 0.25 * log_s * log_s
    if not t > 1.0:
        raise DomainError("s too small: need H_inverse(s) > 1")
    diag = DeHaanDiagnostics(model)
    lv_s = float(diag.log_V(log_s))
    lv_sx = float(diag.log_V(log_s + math.log(x)))
    ns = norming_sequences(model, t)
    return math.exp(lv_s - ns.log_a) * math.expm1(lv_sx - lv_s)


def dehaan_v_limit(gamma: float, x: float) -> float:
    if gamma == 0:
        return -0.5 * math.log(x)
    return -0.5 * (x ** (gamma / 2.0) - 1.0) / (gamma / 2.0)
