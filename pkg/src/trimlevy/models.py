"""Lévy tail models for driftless subordinators.

A model is described by its tail ``tail(x) = Pi(x, inf)`` together with the
generalized inverse of the tail.  The inverse is also exposed on a log scale
because the centering ``b_r`` underflows double precision for the
log-power family at large ``r``.

Built-in families:

* :class:`StableModel`     -- ``x**-alpha``, gamma = 0, regularly varying.
* :class:`LogPowerModel`   -- ``log(1/x)**2 / gamma**2`` on (0, 1), gamma < 0.
* :class:`SlowTailModel`   -- ``log(1/x)**4`` on (0, 1), gamma = 0, slowly varying.
* :class:`TabulatedModel`  -- user grid, monotone cubic interpolation in log-log.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class ModelError(ValueError):
    """A model specification is malformed or inadmissible."""


def _as_positive(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be > 0")
    return arr


def _scalar_or_array(arr: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


class LevyTailModel:
    """Base class for a Lévy tail with an explicit generalized inverse.

    Subclasses implement ``_tail`` and ``_log_tail_inverse`` on validated
    numpy arrays.  ``analytic_moment(p, t)`` returns ``None`` when no closed
    form is available; the moments module then falls back to quadrature.
    """

    gamma: float = 0.0
    label: str = "levy"
    # Largest jump size with positive tail mass (inf when unbounded).
    support_edge: float = math.inf
    analytic_norming: Optional[Callable[[float], tuple]] = None

    # -- public API ---------------------------------------------------------
    def tail(self, x):
        arr = _as_positive(x, "x")
        return _scalar_or_array(self._tail(arr), x)

    def log_tail_inverse(self, y):
        arr = _as_positive(y, "y")
        return _scalar_or_array(self._log_tail_inverse(arr), y)

    def tail_inverse(self, y):
        arr = _as_positive(y, "y")
        return _scalar_or_array(np.exp(self._log_tail_inverse(arr)), y)

    def tail_at_log(self, log_x):
        """Tail evaluated at ``exp(log_x)``; overridden where that underflows."""
        return self.tail(np.exp(np.asarray(log_x, dtype=float)))

    def analytic_moment(self, p: float, t):
        return None

    @property
    def has_analytic_moments(self) -> bool:
        return type(self).analytic_moment is not LevyTailModel.analytic_moment

    def to_spec(self) -> dict:
        raise NotImplementedError

    # -- subclass hooks -----------------------------------------------------
    def _tail(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _log_tail_inverse(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_spec()})"


@dataclass(frozen=True, repr=False)
class StableModel(LevyTailModel):
    """Stable subordinator: ``tail(x) = x**-alpha`` for ``0 < alpha < 1``."""

    alpha: float = 0.5
    gamma: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ModelError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def label(self) -> str:
        return f"stable(alpha={self.alpha:g})"

    @property
    def c_alpha(self) -> float:
        return self.alpha / (2.0 - self.alpha)

    def _tail(self, x):
        return x ** (-self.alpha)

    def _log_tail_inverse(self, y):
        return -np.log(y) / self.alpha

    def tail_at_log(self, log_x):
        return np.exp(-self.alpha * np.asarray(log_x, dtype=float))

    def tail_inverse(self, y):
        arr = _as_positive(y, "y")
        return _scalar_or_array(arr ** (-1.0 / self.alpha), y)

    def analytic_moment(self, p, t):
        # int_0^t u^p alpha u^(-alpha-1) du
        a = self.alpha
        t = np.asarray(t, dtype=float)
        return a * t ** (p - a) / (p - a)

    def to_spec(self) -> dict:
        return {"model": "stable", "alpha": self.alpha}


@dataclass(frozen=True, repr=False)
class LogPowerModel(LevyTailModel):
    """Tail ``log(1/x)**2 / gamma**2`` on (0, 1), zero beyond 1.

    ``exp(-sqrt(tail(x))) = x**(1/|gamma|)`` is regularly varying at 0,
    which places the model in the ``gamma < 0`` regime.
    """

    gamma: float = -1.0
    support_edge: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not self.gamma < 0:
            raise ModelError(f"LogPowerModel needs gamma < 0, got {self.gamma}")

    @property
    def label(self) -> str:
        return f"logpower(gamma={self.gamma:g})"

    def _tail(self, x):
        with np.errstate(divide="ignore"):
            lg = -np.log(np.minimum(x, 1.0))
        return np.where(x < 1.0, lg * lg / (self.gamma * self.gamma), 0.0)

    def _log_tail_inverse(self, y):
        return -abs(self.gamma) * np.sqrt(y)

    def tail_at_log(self, log_x):
        lx = np.minimum(np.asarray(log_x, dtype=float), 0.0)
        return lx * lx / (self.gamma * self.gamma)

    def analytic_moment(self, p, t):
        # int_{tail(t)}^inf exp(-c sqrt(u)) du with c = p|gamma|, s = sqrt(tail(t))
        g = abs(self.gamma)
        c = p * g
        t = np.minimum(np.asarray(t, dtype=float), 1.0)
        s = -np.log(t) / g
        return 2.0 * t**p * (s / c + 1.0 / (c * c))

    def to_spec(self) -> dict:
        return {"model": "logpower", "gamma": self.gamma}


@dataclass(frozen=True, repr=False)
class SlowTailModel(LevyTailModel):
    """Slowly varying tail ``log(1/x)**4`` on (0, 1), zero beyond 1."""

    gamma: float = field(default=0.0, init=False)
    support_edge: float = field(default=1.0, init=False)

    label = "slowtail"

    def _tail(self, x):
        with np.errstate(divide="ignore"):
            lg = -np.log(np.minimum(x, 1.0))
        return np.where(x < 1.0, lg**4, 0.0)

    def _log_tail_inverse(self, y):
        return -(y**0.25)

    def tail_at_log(self, log_x):
        lx = np.minimum(np.asarray(log_x, dtype=float), 0.0)
        return lx**4

    def analytic_moment(self, p, t):
        # int_{v0}^inf 4 v^3 exp(-p v) dv with v0 = log(1/t)
        t = np.minimum(np.asarray(t, dtype=float), 1.0)
        v0 = -np.log(t)
        poly = sum(
            math.factorial(3) / math.factorial(k) * v0**k / p ** (4 - k)
            for k in range(4)
        )
        return 4.0 * t**p * poly

    def to_spec(self) -> dict:
        return {"model": "slowtail"}


class TabulatedModel(LevyTailModel):
    """User-supplied tail on a grid, interpolated monotonically in log-log.

    Both coordinates must be strictly decreasing in ``x`` order, which rules
    out atoms and flat stretches.  Evaluation outside the grid raises
    :class:`DomainError` unless ``extrapolate`` is set, in which case the
    terminal log-log slopes are continued as power laws.
    """

    def __init__(self, x, tail, gamma: float = 0.0, extrapolate: bool = False,
                 label: str = "tabulated", path: Optional[str] = None):
        x = np.asarray(x, dtype=float)
        tail = np.asarray(tail, dtype=float)
        if x.ndim != 1 or x.shape != tail.shape or x.size < 2:
            raise ModelError("grid needs matching 1-d x and tail arrays of length >= 2")
        if np.any(x <= 0) or np.any(tail <= 0):
            raise ModelError("grid values must be positive")
        order = np.argsort(x)
        x, tail = x[order], tail[order]
        if np.any(np.diff(x) <= 0):
            raise ModelError("repeated x value in grid")
        if np.any(np.diff(tail) >= 0):
            raise ModelError("tail must be strictly decreasing (atom or flat segment)")
        self.x = x
        self.tail_values = tail
        self.gamma = float(gamma)
        self.extrapolate = bool(extrapolate)
        self.label = label
        self.path = path
        self._lx = np.log(x)
        self._ly = np.log(tail)
        self._fwd = PchipInterpolator(self._lx, self._ly, extrapolate=False)
        self._slope_lo = (self._ly[1] - self._ly[0]) / (self._lx[1] - self._lx[0])
        self._slope_hi = (self._ly[-1] - self._ly[-2]) / (self._lx[-1] - self._lx[-2])

    @classmethod
    def from_csv(cls, path, **kwargs) -> "TabulatedModel":
        xs, ts = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "tail"]:
                raise ModelError(f"{path}: expected header 'x,tail'")
            rows = list(reader)
        try:
            for row in rows:
                xs.append(float(row["x"]))
                ts.append(float(row["tail"]))
        except (TypeError, ValueError) as exc:
            raise ModelError(f"{path}: malformed row ({exc})") from None
        if np.any(np.diff(xs) <= 0):
            raise ModelError(f"{path}: rows must be strictly increasing in x")
        return cls(xs, ts, path=str(path), **kwargs)

    def _log_tail_of_log_x(self, lx: np.ndarray) -> np.ndarray:
        lo, hi = self._lx[0], self._lx[-1]
        inside = (lx >= lo) & (lx <= hi)
        if not self.extrapolate and not np.all(inside):
            raise DomainError("x outside tabulated grid")
        out = np.empty_like(lx)
        out[inside] = self._fwd(lx[inside])
        below, above = lx < lo, lx > hi
        out[below] = self._ly[0] + self._slope_lo * (lx[below] - lo)
        out[above] = self._ly[-1] + self._slope_hi * (lx[above] - hi)
        return out

    def _tail(self, x):
        lx = np.log(np.atleast_1d(x))
        return np.exp(self._log_tail_of_log_x(lx)).reshape(np.shape(x))

    def _log_tail_inverse(self, y):
        ly = np.log(np.atleast_1d(y)).astype(float)
        top, bottom = self._ly[0], self._ly[-1]
        inside = (ly <= top) & (ly >= bottom)
        if not self.extrapolate and not np.all(inside):
            raise DomainError("y outside tabulated range")
        out = np.empty_like(ly)
        above, below = ly > top, ly < bottom
        out[above] = self._lx[0] + (ly[above] - top) / self._slope_lo
        out[below] = self._lx[-1] + (ly[below] - bottom) / self._slope_hi
        if np.any(inside):
            out[inside] = self._bisect(ly[inside])
        return out.reshape(np.shape(y))

    def _bisect(self, ly: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        # log tail is strictly decreasing in log x; bracket by the grid ends
        lo = np.full_like(ly, self._lx[0])
        hi = np.full_like(ly, self._lx[-1])
        while np.max(hi - lo) > tol * max(1.0, float(np.max(np.abs(hi)))):
            mid = 0.5 * (lo + hi)
            go_right = self._fwd(mid) > ly
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
        return 0.5 * (lo + hi)

    def to_spec(self) -> dict:
        spec = {"model": "tabulated", "path": self.path, "gamma": self.gamma}
        if self.extrapolate:
            spec["extrapolate"] = True
        return spec


def model_from_spec(spec: dict, base_dir: Optional[Path] = None) -> LevyTailModel:
    """Build a model from its JSON configuration dictionary."""
    kind = spec.get("model")
    if kind == "stable":
        return StableModel(alpha=float(spec.get("alpha", 0.5)))
    if kind == "logpower":
        return LogPowerModel(gamma=float(spec.get("gamma", -1.0)))
    if kind == "slowtail":
        return SlowTailModel()
    if kind == "tabulated":
        if "path" not in spec:
            raise ModelError("tabulated model needs a 'path'")
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return TabulatedModel.from_csv(
            path,
            gamma=float(spec.get("gamma", 0.0)),
            extrapolate=bool(spec.get("extrapolate", False)),
        )
    raise ModelError(f"unknown model kind: {kind!r}")


# -- validation ---------------------------------------------------------------

# Fixed probe constants so validation is deterministic.
PROBE_LOG_X = np.linspace(-700.0, 0.0, 400)
PROBE_Y = np.logspace(-2, 6, 100)
ROUND_TRIP_TOL = 1e-10
BLOWUP_LEVEL = 1e3


@dataclass
class ValidationReport:
    passed: bool
    gamma: float
    issues: list = field(default_factory=list)   # (code, message) pairs
    diagnostics: dict = field(default_factory=dict)

    def codes(self) -> list:
        return [code for code, _ in self.issues]


def validate_model(model: LevyTailModel) -> ValidationReport:
    """Check the standing assumptions on a model and report every violation.

    Reason codes: ``gamma-positive`` (excluded: positive jumps force gamma <= 0), ``not-monotone``,
    ``finite-activity``, ``round-trip``, ``not-integrable``, ``evaluation``.
    """
    from .moments import MomentError, truncated_moment

    issues = []
    diag = {}
    if model.gamma > 0:
        issues.append(("gamma-positive", "gamma > 0: regime excluded, positive jumps force gamma <= 0"))

    bounded_grid = isinstance(model, TabulatedModel) and not model.extrapolate
    if bounded_grid:
        log_xs = np.linspace(model._lx[0], model._lx[-1], 200)
        ys = np.exp(np.linspace(model._ly[-1], model._ly[0], 100))
    else:
        log_xs = PROBE_LOG_X[PROBE_LOG_X < math.log(model.support_edge)]
        ys = PROBE_Y

    try:
        tails = np.asarray(model.tail_at_log(log_xs), dtype=float)
        if np.any(np.diff(tails) > 0):
            issues.append(("not-monotone", "tail increases somewhere on the probe grid"))
        diag["tail_at_smallest_probe"] = float(tails[0])
        if not bounded_grid and not tails[0] > BLOWUP_LEVEL:
            issues.append(("finite-activity", "tail does not blow up at 0"))

        log_inv = np.asarray(model.log_tail_inverse(ys), dtype=float)
        if np.any(np.diff(log_inv) > 0):
            issues.append(("not-monotone", "tail inverse increases on the probe grid"))
        back = np.asarray(model.tail_at_log(log_inv), dtype=float)
        err = float(np.max(np.abs(back - ys) / ys))
        diag["round_trip_rel_err"] = err
        if err > ROUND_TRIP_TOL:
            issues.append(("round-trip", f"tail(tail_inverse(y)) off by {err:.3g}"))
    except DomainError as exc:
        issues.append(("evaluation", str(exc)))

    try:
        m1 = truncated_moment(model, 1.0, 1.0)
        diag["first_moment_below_1"] = m1.value
        if not math.isfinite(m1.value):
            issues.append(("not-integrable", "int_0^1 u Pi(du) is infinite"))
    except (MomentError, DomainError) as exc:
        issues.append(("not-integrable", f"could not evaluate int_0^1 u Pi(du): {exc}"))

    return ValidationReport(passed=not issues, gamma=model.gamma, issues=issues, diagnostics=diag)
