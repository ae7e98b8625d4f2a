"""Normalization schemes and their regime requirements."""
from __future__ import annotations

from enum import Enum


class ConfigError(ValueError):
    """Incompatible combination of model, scheme and parameters."""


class Scheme(str, Enum):
    COND_CLT = "COND_CLT"                 # random centering and scaling of the trimmed sum
    JOINT_RANDOM = "JOINT_RANDOM"         # same pair, joint limit with independent parts
    NEG_DET_SCALE = "NEG_DET_SCALE"       # gamma < 0, deterministic scale sigma(b_r)
    NEG_DET_CENTER = "NEG_DET_CENTER"     # gamma < 0, deterministic center mu(b_r)
    G0_DET_SCALE = "G0_DET_SCALE"         # gamma = 0, deterministic scale
    RV_DET_CENTER = "RV_DET_CENTER"       # gamma = 0, regularly varying tail, c_alpha > 0
    SLOW_DET_CENTER = "SLOW_DET_CENTER"   # gamma = 0, slowly varying tail, c_alpha = 0
    DELTA_ONLY = "DELTA_ONLY"             # r-th largest jump alone, any horizon t

    @classmethod
    def parse(cls, name) -> "Scheme":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ConfigError(f"unknown scheme {name!r}; choose from "
                              + ", ".join(s.value for s in cls)) from None


# Columns whose marginal limit law is tested for each scheme.
TESTED_COLUMNS = {
    Scheme.COND_CLT: (1,),
    Scheme.JOINT_RANDOM: (1, 2),
    Scheme.NEG_DET_SCALE: (1, 2),
    Scheme.NEG_DET_CENTER: (1, 2),
    Scheme.G0_DET_SCALE: (1, 2),
    Scheme.RV_DET_CENTER: (1, 2),
    Scheme.SLOW_DET_CENTER: (1, 2),
    Scheme.DELTA_ONLY: (2,),
}


def check_compatible(scheme: Scheme, gamma: float, c_alpha=None, t: float = 1.0) -> None:
    """Raise :class:`ConfigError` unless ``scheme`` applies to the given regime."""
    scheme = Scheme.parse(scheme)
    if gamma > 0:
        raise ConfigError("gamma > 0 is excluded")
    if t != 1.0 and scheme is not Scheme.DELTA_ONLY:
        raise ConfigError(f"{scheme.value} is only defined at t = 1; use DELTA_ONLY for t != 1")
    if scheme in (Scheme.NEG_DET_SCALE, Scheme.NEG_DET_CENTER) and not gamma < 0:
        raise ConfigError(f"{scheme.value} needs gamma < 0")
    if scheme in (Scheme.G0_DET_SCALE, Scheme.RV_DET_CENTER, Scheme.SLOW_DET_CENTER) and gamma != 0:
        raise ConfigError(f"{scheme.value} needs gamma = 0")
    if scheme is Scheme.RV_DET_CENTER:
        if c_alpha is None or not 0.0 < c_alpha <= 1.0:
            raise ConfigError("RV_DET_CENTER needs c_alpha in (0, 1] (regularly varying tail)")
    if scheme is Scheme.SLOW_DET_CENTER:
        if c_alpha is None or c_alpha != 0.0:
            raise ConfigError("SLOW_DET_CENTER needs c_alpha = 0 (slowly varying tail)")
