"""Sampled travelling-wave profiles and their lab-frame evaluation."""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from sgwaves.errors import DegenerateVelocityError, ParameterError
from sgwaves.model import Params, circle_circumference, equilibria

PROFILE_KINDS = (
    "kink",
    "antikink",
    "array",
    "half-array",
    "bounded-pair",
    "static-stable",
    "static-unstable",
)


@dataclass
class WaveProfile:
    """
    Reduced profile g(xi) of a travelling wave, always stored in the canonical
    frame (kinks and arrays increasing in xi); `sign` = -1 marks the
    reflected (anti) wave, whose lab field is g(-xi).

    `v` is None when the speed is a free parameter (unperturbed kink,
    bounded pair at alpha = 0). `Xi` is the period of arrays.
    """

    kind: str
    xi: np.ndarray
    g: np.ndarray
    gp: np.ndarray
    gamma: float
    alpha: float
    mu: float
    v: Optional[float]
    winding: int
    Xi: Optional[float] = None
    sign: int = 1
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ParameterError(f"unknown profile kind: {self.kind}")
        self.xi = np.asarray(self.xi, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        self.gp = np.asarray(self.gp, dtype=float)
        if not (len(self.xi) == len(self.g) == len(self.gp)) or len(self.xi) < 2:
            raise ParameterError("profile needs at least two aligned (xi, g, gp) samples")
        if self.kind == "array" and not (self.Xi and self.Xi > 0):
            raise ParameterError("array profiles need a positive period Xi")
        self._spline: Optional[CubicHermiteSpline] = None

    def __len__(self) -> int:
        return len(self.xi)

    @property
    def params(self) -> Params:
        return Params(self.gamma, self.alpha)

    @property
    def limits(self) -> Tuple[Optional[float], Optional[float]]:
        """Asymptotic values of g as xi -> -inf and +inf (None when unbounded or periodic)."""
        eq = equilibria(self.params, 0)
        if self.kind in ("kink", "antikink"):
            return eq.g_max - 2.0 * math.pi, eq.g_max
        if self.kind == "bounded-pair":
            return eq.g_max, eq.g_max
        if self.kind == "half-array":
            return eq.g_max - 2.0 * math.pi, None
        if self.kind.startswith("static"):
            return float(self.g[0]), float(self.g[0])
        return None, None

    def circumference(self, m: int = 1) -> Optional[float]:
        if self.Xi is None or self.v is None or abs(self.v) >= 1.0:
            return None
        return circle_circumference(self.Xi, self.v, m)

    def _interpolant(self) -> CubicHermiteSpline:
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.xi, self.g, self.gp)
        return self._spline

    def evaluate(self, xi) -> Tuple[np.ndarray, np.ndarray]:
        """(g, gp) at arbitrary xi: periodic lift for arrays, asymptotes outside the samples."""
        xi = np.asarray(xi, dtype=float)
        spline = self._interpolant()
        lo, hi = self.xi[0], self.xi[-1]
        if self.kind == "array":
            turns = np.floor((xi - lo) / self.Xi)
            local = xi - turns * self.Xi
            return spline(local) + 2.0 * math.pi * turns, spline(local, 1)
        inside = np.clip(xi, lo, hi)
        g = spline(inside)
        gp = spline(inside, 1)
        left, right = self.limits
        if left is not None:
            g = np.where(xi < lo, left, g)
        if right is not None:
            g = np.where(xi > hi, right, g)
        gp = np.where((xi < lo) | (xi > hi), 0.0, gp)
        return g, gp

    def field_values(
        self, x, t: float = 0.0, x0: float = 0.0, velocity: Optional[float] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Lab field phi(x, t) and phi_t for the profile with its front at x0 when t = 0.

        phi = g(sign * (x - x0 - v t) / sqrt(1 - v^2)) + pi and phi_t = -v phi_x.
        """
        v = self.v if velocity is None else velocity
        if v is None:
            raise ParameterError("profile velocity is a free parameter; pass `velocity`")
        if abs(v) >= 1.0:
            raise DegenerateVelocityError(f"lab field needs |v| < 1, got {v}")
        scale = math.sqrt(1.0 - v * v)
        xi = self.sign * (np.asarray(x, dtype=float) - x0 - v * t) / scale
        g, gp = self.evaluate(xi)
        phi_x = gp * self.sign / scale
        return g + math.pi, -v * phi_x

    def reflect(self) -> "WaveProfile":
        """The mirrored wave: kink <-> antikink, arrays and half-arrays change direction."""
        kind = {"kink": "antikink", "antikink": "kink"}.get(self.kind, self.kind)
        return replace(
            self,
            kind=kind,
            sign=-self.sign,
            v=None if self.v is None else -self.v,
            winding=-self.winding,
            meta=dict(self.meta),
        )
