"""
Parameters, washboard potential and the algebra linking reduced viscosity to wave speed.

The travelling-wave Ansatz phi(x, t) = g~(x - v t) turns the damped, driven
sine-Gordon equation

    phi_tt - phi_xx + sin(phi) + alpha * phi_t + gamma = 0

into the motion of a unit-mass particle in the tilted potential
U(g) = -(cos g + gamma * g) with viscosity mu = alpha * |v| / sqrt(1 - v^2).
For subluminal waves g = g~ - pi and xi = sign(v) * (x - v t) / sqrt(1 - v^2).
"""

import math
from dataclasses import dataclass
from typing import Literal, Tuple, Union

import numpy as np
from loguru import logger
from scipy.integrate import quad

from sgwaves.errors import DegenerateVelocityError, ParameterError, UndefinedVelocityError

ArrayLike = Union[float, np.ndarray]
VelocityRegime = Literal["static", "subluminal", "luminal", "superluminal"]


@dataclass(frozen=True)
class Params:
    """Physical parameters: constant forcing gamma and linear dissipation alpha."""

    gamma: float
    alpha: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.gamma) or not 0.0 <= self.gamma < 1.0:
            raise ParameterError(
                f"gamma must lie in the admissible range [0, 1), got {self.gamma}"
            )
        if not math.isfinite(self.alpha) or self.alpha < 0.0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def curvature(self) -> float:
        """|U''| at every equilibrium, sqrt(1 - gamma^2)."""
        return math.sqrt(1.0 - self.gamma * self.gamma)

    def mu(self, v: float) -> float:
        """Reduced viscosity for a subluminal wave speed v."""
        return mu_from_velocity(self.alpha, v)


@dataclass(frozen=True)
class State:
    """Phase point (g, g') of the reduced equation. Fields may be numpy arrays."""

    g: ArrayLike
    gp: ArrayLike

    def as_array(self) -> np.ndarray:
        return np.array([self.g, self.gp], dtype=float)


@dataclass(frozen=True)
class Equilibrium:
    """k-th minimum and maximum of the washboard potential."""

    k: int
    g_min: float
    g_max: float
    u_min: float
    u_max: float


@dataclass(frozen=True)
class VelocityMap:
    mu: float
    v: float
    sign: int = 1
    degenerate: bool = False


@dataclass
class EnergyDensities:
    """Energy density h, current j, normalization K and domain total H."""

    h: np.ndarray
    j: np.ndarray
    K: float
    H: float


def normalize_forcing(gamma: float) -> Tuple[float, bool]:
    """Map gamma < 0 onto gamma >= 0 by phi -> -phi.

    Returns:
        (|gamma|, flipped) where flipped tells the caller to negate phi on output.
    """
    if gamma < 0:
        return -gamma, True
    return gamma, False


def potential(g: ArrayLike, gamma: float) -> ArrayLike:
    """Washboard potential U(g) = -(cos g + gamma g)."""
    return -(np.cos(g) + gamma * g)


def potential_gradient(g: ArrayLike, gamma: float) -> ArrayLike:
    """U_g = sin g - gamma."""
    return np.sin(g) - gamma


def saddle_gap(d: ArrayLike, gamma: float) -> ArrayLike:
    """U(g_M) - U(g_M - d) for any maximum g_M, free of cancellation for small d.

    Uses sin(g_M) = gamma and cos(g_M) = -sqrt(1 - gamma^2).
    """
    c = math.sqrt(1.0 - gamma * gamma)
    d = np.asarray(d, dtype=float)
    half = np.sin(0.5 * d)
    gap = 2.0 * c * half * half - gamma * (d - np.sin(d))
    return gap if gap.ndim else float(gap)


def equilibria(params: Params, k: int = 0) -> Equilibrium:
    """Positions and potential values of the k-th minimum and maximum of U."""
    gamma = params.gamma
    if gamma >= 1.0:
        raise ParameterError("no equilibria for gamma >= 1")
    a = math.asin(gamma)
    c = math.sqrt(1.0 - gamma * gamma)
    two_k_pi = 2.0 * k * math.pi
    g_min = a + two_k_pi
    g_max = math.pi - a + two_k_pi
    u_min = -(gamma * (a + two_k_pi) + c)
    u_max = -(gamma * (-a + (2 * k + 1) * math.pi) - c)
    return Equilibrium(k=k, g_min=g_min, g_max=g_max, u_min=u_min, u_max=u_max)


def constant_solutions(gamma: float, k: int = 0) -> Tuple[float, float]:
    """Stable and unstable constant solutions (phi_s, phi_u) of the field equation."""
    a = math.asin(gamma)
    return -a + 2.0 * k * math.pi, a + math.pi + 2.0 * k * math.pi


def mechanical_energy(state: State, gamma: float) -> ArrayLike:
    """e = g'^2 / 2 + U(g)."""
    return 0.5 * np.square(state.gp) + potential(state.g, gamma)


def velocity_from_mu(alpha: float, mu: float, sign: int = 1) -> float:
    """Wave speed v = sign * mu / sqrt(alpha^2 + mu^2).

    alpha = 0 with mu > 0 returns the luminal boundary +-1 (degenerate).
    """
    if alpha < 0 or mu < 0:
        raise ParameterError(f"alpha and mu must be >= 0, got alpha={alpha}, mu={mu}")
    if alpha == 0.0 and mu == 0.0:
        raise UndefinedVelocityError(
            "velocity is a free parameter when alpha = 0 and mu = 0"
        )
    if alpha == 0.0:
        logger.warning("alpha = 0 with mu > 0 only admits the luminal limit |v| = 1")
        return float(np.sign(sign)) * 1.0
    return float(np.sign(sign)) * mu / math.hypot(alpha, mu)


def velocity_map(alpha: float, mu: float, sign: int = 1) -> VelocityMap:
    v = velocity_from_mu(alpha, mu, sign)
    return VelocityMap(mu=mu, v=v, sign=1 if sign >= 0 else -1, degenerate=abs(v) == 1.0)


def mu_from_velocity(alpha: float, v: float, allow_superluminal: bool = False) -> float:
    """Reduced viscosity mu = alpha / sqrt(|v^-2 - 1|).

    The superluminal branch (|v| > 1) is only returned with allow_superluminal,
    for classification; those waves are unstable.
    """
    if alpha < 0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    speed = abs(v)
    if speed == 1.0:
        raise DegenerateVelocityError(
            "|v| = 1: the reduced equation is first order, see classify_velocity"
        )
    if speed > 1.0 and not allow_superluminal:
        raise ParameterError(f"superluminal speed |v| = {speed} is not constructible")
    if speed == 0.0 or alpha == 0.0:
        return 0.0
    if speed > 1.0:
        return alpha / math.sqrt(1.0 - 1.0 / (speed * speed))
    return alpha * speed / math.sqrt(1.0 - speed * speed)


def classify_velocity(alpha: float, v: float) -> Tuple[VelocityRegime, bool]:
    """Regime of a travelling wave with speed v and whether non-constant waves can be stable.

    Only subluminal (and static) waves may be stable; luminal and
    superluminal non-constant waves sit on a maximum of h at one end.
    """
    speed = abs(v)
    if speed == 0.0:
        return "static", True
    if speed < 1.0:
        return "subluminal", True
    if speed == 1.0:
        return "luminal", False
    return "superluminal", False


def luminal_span(params: Params, g_from: float, g_to: float, sign: int = 1) -> float:
    """Travel coordinate xi~ needed by a luminal (v = +-1) profile to move from g_from to g_to.

    The reduced equation is +-alpha g~' = sin g~ + gamma, so
    xi~ = +-alpha * integral dz / (sin z + gamma). Returns +-inf when the
    interval touches a constant solution (logarithmic divergence).
    """
    gamma, alpha = params.gamma, params.alpha
    if alpha == 0.0:
        raise DegenerateVelocityError("alpha = 0 at |v| = 1 admits only constant solutions")
    lo, hi = sorted((g_from, g_to))
    a = math.asin(gamma)
    # zeros of sin z + gamma: -a + 2k pi and pi + a + 2k pi
    for base in (-a, math.pi + a):
        k0 = math.floor((lo - base) / (2.0 * math.pi))
        for k in (k0, k0 + 1):
            z = base + 2.0 * k * math.pi
            if lo <= z <= hi:
                direction = 1.0 if g_to >= g_from else -1.0
                return sign * direction * math.inf
    value, _ = quad(lambda z: 1.0 / (math.sin(z) + gamma), g_from, g_to, limit=200)
    return sign * alpha * value


def asymptotic_velocity(params: Params) -> float:
    """Power-balance velocity v_inf = [1 + (4 alpha / (pi gamma))^2]^(-1/2)."""
    if params.gamma == 0.0:
        raise ParameterError("asymptotic velocity is singular at gamma = 0")
    ratio = 4.0 * params.alpha / (math.pi * params.gamma)
    return 1.0 / math.sqrt(1.0 + ratio * ratio)


def energy_constant(gamma: float) -> float:
    """K = sqrt(1 - gamma^2) + gamma asin(gamma), zeroing h at phi = -asin(gamma)."""
    return math.sqrt(1.0 - gamma * gamma) + gamma * math.asin(gamma)


def energy_density(
    phi: ArrayLike, phi_x: ArrayLike, phi_t: ArrayLike, gamma: float
) -> Tuple[ArrayLike, ArrayLike]:
    """Energy density h and current density j = phi_x phi_t."""
    h = (
        0.5 * np.square(phi_t)
        + 0.5 * np.square(phi_x)
        + gamma * phi
        - np.cos(phi)
        + energy_constant(gamma)
    )
    j = phi_x * phi_t
    return h, j


def to_lab_frame(xi: ArrayLike, g: ArrayLike, v: float, sign: int = 1):
    """Map a canonical reduced profile to lab coordinates at t = 0.

    Returns (x, phi) with x = sign * xi * sqrt(1 - v^2) and phi = g + pi.
    """
    if abs(v) >= 1.0:
        raise DegenerateVelocityError("lab frame map needs |v| < 1")
    scale = math.sqrt(1.0 - v * v)
    return sign * np.asarray(xi) * scale, np.asarray(g) + math.pi


def from_lab_frame(x: ArrayLike, v: float, sign: int = 1, t: float = 0.0) -> ArrayLike:
    """Reduced coordinate xi for lab position x at time t."""
    if abs(v) >= 1.0:
        raise DegenerateVelocityError("lab frame map needs |v| < 1")
    return sign * (np.asarray(x) - v * t) / math.sqrt(1.0 - v * v)


def circle_circumference(Xi: float, v: float, m: int = 1) -> float:
    """Length m * Xi * sqrt(1 - v^2) of a circle hosting m periods of an array."""
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    return m * Xi * math.sqrt(1.0 - v * v)


def winding_number(phi_left: float, phi_right: float) -> int:
    """Topological charge (phi(+inf) - phi(-inf)) / 2 pi, rounded to the nearest integer."""
    return int(round((phi_right - phi_left) / (2.0 * math.pi)))
