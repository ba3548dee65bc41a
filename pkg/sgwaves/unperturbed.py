"""
Closed-form and quadrature solutions of the undamped reduction.

At gamma = 0, mu = 0 the particle moves in the plain pendulum potential
-cos g with energy e = g'^2 / 2 - cos g, giving the kink separatrix, the
libration orbits (-1 < e < 1) and the rotations (e > 1). At mu = 0,
gamma > 0 the saddle energy carries a homoclinic orbit, the bounded pair.
"""

import math
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import quad
from scipy.optimize import brentq

from sgwaves.errors import ParameterError
from sgwaves.model import Params, equilibria, potential, saddle_gap
from sgwaves.profiles import WaveProfile

PeriodMethod = Literal["agm", "quadrature"]
Regime = Literal["libration", "separatrix", "rotation"]

AGM_TOL = 1e-16
AGM_MAXITER = 64
PAIR_MIN_GAP = 1e-9


@dataclass(frozen=True)
class PendulumOrbit:
    """Closed orbit of the plain pendulum at energy e."""

    e: float
    regime: Regime
    period: float


def kink_closed_form(xi, sign: int = 1):
    """Unperturbed kink 4 atan(exp(sign * xi)) - pi."""
    value = 4.0 * np.arctan(np.exp(sign * np.asarray(xi, dtype=float))) - math.pi
    return value if np.ndim(value) else float(value)


def _kink_slope(xi, sign: int = 1):
    return sign * 2.0 / np.cosh(np.asarray(xi, dtype=float))


def arithmetic_geometric_mean(a: float, b: float) -> float:
    for _ in range(AGM_MAXITER):
        if abs(a - b) <= AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def complete_elliptic_k(k: float) -> float:
    """K(k) = pi / (2 agm(1, sqrt(1 - k^2))) for modulus 0 <= k < 1."""
    if not 0.0 <= k < 1.0:
        raise ParameterError(f"elliptic modulus must lie in [0, 1), got {k}")
    return math.pi / (2.0 * arithmetic_geometric_mean(1.0, math.sqrt(1.0 - k * k)))


def _quarter_libration(e: float) -> float:
    # g = g_t - s^2 removes the inverse square root at the turning point g_t
    g_t = math.acos(-e)

    def integrand(s):
        g = g_t - s * s
        gap = e + math.cos(g)
        if gap <= 0.0:
            return 2.0 / math.sqrt(2.0 * math.sin(g_t))
        return 2.0 * s / math.sqrt(2.0 * gap)

    value, _ = quad(integrand, 0.0, math.sqrt(g_t), epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


def libration_period(e: float, method: PeriodMethod = "agm") -> float:
    """Period 4 K(k), k^2 = (1 + e) / 2, of the pendulum libration at energy -1 < e < 1."""
    if not -1.0 < e < 1.0:
        raise ParameterError(f"libration needs -1 < e < 1, got {e}")
    if method == "agm":
        return 4.0 * complete_elliptic_k(math.sqrt(0.5 * (1.0 + e)))
    if method == "quadrature":
        return 4.0 * _quarter_libration(e)
    raise ParameterError(f"unknown period method: {method}")


def rotation_period(e: float, method: PeriodMethod = "agm") -> float:
    """Time Xi_0 for the rotating pendulum (e > 1) to advance by 2 pi."""
    if not e > 1.0:
        raise ParameterError(f"rotation needs e > 1, got {e}")
    if method == "agm":
        k = math.sqrt(2.0 / (e + 1.0))
        return 2.0 * k * complete_elliptic_k(k)
    if method == "quadrature":
        value, _ = quad(
            lambda g: 1.0 / math.sqrt(2.0 * (e + math.cos(g))),
            0.0,
            2.0 * math.pi,
            epsabs=1e-13,
            epsrel=1e-12,
            limit=200,
        )
        return value
    raise ParameterError(f"unknown period method: {method}")


def pendulum_orbit(e: float) -> PendulumOrbit:
    if e < -1.0:
        raise ParameterError(f"pendulum energy must be >= -1, got {e}")
    if e == -1.0:
        return PendulumOrbit(e, "libration", 2.0 * math.pi)
    if e < 1.0:
        return PendulumOrbit(e, "libration", libration_period(e))
    if e == 1.0:
        return PendulumOrbit(e, "separatrix", math.inf)
    return PendulumOrbit(e, "rotation", rotation_period(e))


def _half_swing(gamma: float, e: float, g_turn: float, g_centre: float) -> float:
    """integral of dg / sqrt(2 (e - U)) from the centre to a turning point."""
    direction = 1.0 if g_turn > g_centre else -1.0
    slope = abs(math.sin(g_turn) - gamma)

    def integrand(s):
        g = g_turn - direction * s * s
        gap = e - potential(g, gamma)
        if gap <= 0.0 or s < 1e-7:
            return 2.0 / math.sqrt(2.0 * slope)
        return 2.0 * s / math.sqrt(2.0 * gap)

    value, _ = quad(
        integrand, 0.0, math.sqrt(abs(g_turn - g_centre)), epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return value


def tilted_libration_period(gamma: float, e: float) -> float:
    """Period of the undamped oscillation about the minimum g_0^m of the tilted potential.

    Defined for U(g_0^m) < e < U(g_0^M).
    """
    eq = equilibria(Params(gamma), 0)
    if not eq.u_min < e < eq.u_max:
        raise ParameterError(
            f"libration about g_0^m needs {eq.u_min:.6g} < e < {eq.u_max:.6g}, got {e}"
        )

    def level(g):
        return potential(g, gamma) - e

    g_right = brentq(level, eq.g_min, eq.g_max, xtol=1e-15)
    g_left = brentq(level, eq.g_max - 2.0 * math.pi, eq.g_min, xtol=1e-15)
    return 2.0 * (
        _half_swing(gamma, e, g_right, eq.g_min) + _half_swing(gamma, e, g_left, eq.g_min)
    )


def bounded_pair_turning_point(gamma: float) -> float:
    """Inner turning point g_t < g_0^m with U(g_t) = U(g_0^M)."""
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"bounded pairs need 0 < gamma < 1, got {gamma}")
    eq = equilibria(Params(gamma), 0)
    d_t = brentq(
        lambda d: saddle_gap(d, gamma),
        math.pi - 2.0 * math.asin(gamma),
        2.0 * math.pi,
        xtol=1e-15,
    )
    return eq.g_max - d_t


def _pair_nodes(d_t: float, count: int, d_min: float) -> np.ndarray:
    """Distances from the saddle, dense near both the turning point and the saddle."""
    s_max = math.sqrt(d_t - d_min)
    near_turn = d_t - np.linspace(0.0, s_max, count) ** 2
    near_saddle = np.geomspace(d_min, d_t, count)
    nodes = np.unique(np.concatenate((near_turn, near_saddle)))
    return nodes[(nodes >= d_min) & (nodes <= d_t)][::-1]


def bounded_pair_profile(
    gamma: float, samples: int = 2001, d_min: float = PAIR_MIN_GAP
) -> WaveProfile:
    """Homoclinic orbit at mu = 0 leaving and re-entering the saddle g_0^M.

    xi(g) is the quadrature of dg / sqrt(2 (U(g_0^M) - U(g))) from the turning
    point, which sits at xi = 0; the orbit is mirrored to negative xi. The
    samples stop where the distance to the saddle reaches `d_min`.
    """
    if gamma == 0.0:
        raise ParameterError(
            "at gamma = 0 the pair splits into two separatrices; use kink_closed_form"
        )
    if samples < 5:
        raise ParameterError(f"samples must be >= 5, got {samples}")
    params = Params(gamma)
    eq = equilibria(params, 0)
    g_t = bounded_pair_turning_point(gamma)
    d_t = eq.g_max - g_t
    c = params.curvature
    # gap'(d_t); negative since the gap closes at the turning point
    slope = c * math.sin(d_t) - gamma * (1.0 - math.cos(d_t))

    def integrand(s):
        if s < 1e-7:
            return 2.0 / math.sqrt(-2.0 * slope)
        gap = saddle_gap(d_t - s * s, gamma)
        if gap <= 0.0:
            return 2.0 / math.sqrt(-2.0 * slope)
        return 2.0 * s / math.sqrt(2.0 * gap)

    nodes = _pair_nodes(d_t, (samples + 1) // 2, d_min)
    s_nodes = np.sqrt(np.maximum(d_t - nodes, 0.0))
    pieces = [
        quad(integrand, a, b, epsabs=1e-14, epsrel=1e-12, limit=100)[0]
        for a, b in zip(s_nodes[:-1], s_nodes[1:])
    ]
    xi_half = np.concatenate(([0.0], np.cumsum(pieces)))
    distinct = np.concatenate(([True], np.diff(xi_half) > 0.0))
    xi_half, nodes = xi_half[distinct], nodes[distinct]
    g_half = eq.g_max - nodes
    gp_half = np.sqrt(2.0 * np.maximum(saddle_gap(nodes, gamma), 0.0))

    xi = np.concatenate((-xi_half[:0:-1], xi_half))
    g = np.concatenate((g_half[:0:-1], g_half))
    gp = np.concatenate((-gp_half[:0:-1], gp_half))
    logger.debug(
        f"bounded pair gamma={gamma}: turning point {g_t:.10f}, half-width {xi_half[-1]:.4f}"
    )
    return WaveProfile(
        kind="bounded-pair",
        xi=xi,
        g=g,
        gp=gp,
        gamma=gamma,
        alpha=0.0,
        mu=0.0,
        v=None,
        winding=0,
        meta={"turning_point": g_t, "energy": eq.u_max, "d_min": d_min},
    )


def kink_profile(
    xi_range: Tuple[float, float] = (-20.0, 20.0),
    samples: int = 2001,
    sign: int = 1,
    velocity: Optional[float] = None,
) -> WaveProfile:
    """The unperturbed kink sampled from its closed form; the speed stays free unless given."""
    xi = np.linspace(xi_range[0], xi_range[1], samples)
    profile = WaveProfile(
        kind="kink",
        xi=xi,
        g=kink_closed_form(xi),
        gp=_kink_slope(xi),
        gamma=0.0,
        alpha=0.0,
        mu=0.0,
        v=velocity,
        winding=1,
        meta={"source": "closed-form"},
    )
    if sign < 0:
        profile = profile.reflect()
        profile.v = velocity
    return profile
