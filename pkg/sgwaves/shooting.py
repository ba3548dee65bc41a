"""
Shooting on the reduced equation for kinks, soliton arrays and half-arrays.

A kink is the heteroclinic orbit g_{-1}^M -> g_0^M between neighbouring
maxima of the tilted potential. It exists only at one viscosity mu_hat(gamma),
found by bisection on the fate of a trajectory launched along the unstable
manifold of g_{-1}^M: below mu_hat it overshoots g_0^M, above it is captured
in the well. Arrays are rotations with g(xi + Xi) = g(xi) + 2 pi, found by
matching the speed after one turn.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from sgwaves.errors import (
    AmbiguousFateError,
    BracketError,
    ParameterError,
    SolverError,
)
from sgwaves.integrate import (
    DEFAULT_HORIZON,
    Crossing,
    OdeProblem,
    Stop,
    Tolerances,
    Trajectory,
    Turning,
    energy_audit,
    integrate,
)
from sgwaves.model import (
    Params,
    State,
    asymptotic_velocity,
    constant_solutions,
    equilibria,
    saddle_gap,
    velocity_map,
)
from sgwaves.profiles import WaveProfile

__all__ = [
    "CONNECTION_TOL",
    "DEFAULT_DELTA",
    "FateReport",
    "SaddleLaunch",
    "SweepRow",
    "WaveProfile",
    "array_periodicity_error",
    "classify_fate",
    "extrapolate_mu_ratio",
    "find_array_mu",
    "find_kink_mu",
    "half_array_profile",
    "launch_from_saddle",
    "period_to_speed",
    "saddle_launch",
    "shoot",
    "static_profile",
    "sweep_mu_hat",
]

DEFAULT_DELTA = 1e-8
MAX_DELTA = 1e-4
CONNECTION_TOL = 1e-9
MIN_KINK_TOL = 1e-13
# kink samples stop this close to the target saddle
SADDLE_MARGIN = 1e-7
SPEED_RANGE = (1e-6, 1e3)

Fate = Literal["Overshoot", "Capture", "Connection", "Ambiguous"]


@dataclass(frozen=True)
class SaddleLaunch:
    """Initial state on the linearized unstable manifold of g_{k-1}^M."""

    mu: float
    delta: float
    lambda_plus: float
    state: State
    k: int = 0


@dataclass
class FateReport:
    """Outcome of one shot; energy_gap is e - U(g_0^M) at the decisive event."""

    fate: Fate
    mu: float
    crossing_xi: Optional[float]
    crossing_speed: Optional[float]
    energy_gap: float
    event_kind: str
    trajectory: Trajectory
    delta: float = DEFAULT_DELTA


@dataclass
class SweepRow:
    gamma: float
    mu_hat: Optional[float] = None
    ratio: Optional[float] = None
    iterations: Optional[int] = None
    velocities: Dict[float, float] = field(default_factory=dict)
    v_inf: Dict[float, float] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _unstable_eigenvalue(params: Params, mu: float) -> float:
    # positive root of l^2 + mu l - sqrt(1 - gamma^2), written without cancellation
    c = params.curvature
    return c / (math.sqrt(0.25 * mu * mu + c) + 0.5 * mu)


def saddle_launch(
    params: Params, mu: float, delta: float = DEFAULT_DELTA, k: int = 0
) -> SaddleLaunch:
    if not 0.0 < delta <= MAX_DELTA:
        raise ParameterError(f"launch offset must lie in (0, {MAX_DELTA}], got {delta}")
    if mu < 0:
        raise ParameterError(f"mu must be >= 0, got {mu}")
    lam = _unstable_eigenvalue(params, mu)
    g_saddle = equilibria(params, k - 1).g_max
    return SaddleLaunch(mu, delta, lam, State(g_saddle + delta, lam * delta), k)


def launch_from_saddle(params: Params, mu: float, delta: float = DEFAULT_DELTA) -> State:
    """(g_{-1}^M + delta, lambda_plus * delta)."""
    return saddle_launch(params, mu, delta).state


def _gap_to_saddle(state: State, params: Params, k: int = 0) -> float:
    """e - U(g_k^M) evaluated without cancellation near the saddle."""
    g_max = equilibria(params, k).g_max
    return 0.5 * state.gp * state.gp - saddle_gap(g_max - state.g, params.gamma)


def classify_fate(
    params: Params,
    mu: float,
    launch: SaddleLaunch,
    horizon: float = DEFAULT_HORIZON,
    tolerances: Optional[Tolerances] = None,
    connection_tol: float = CONNECTION_TOL,
) -> FateReport:
    """Integrate a saddle launch until it crosses g_0^M, turns back, or reaches the horizon.

    A decisive event whose energy lies within `connection_tol` of U(g_0^M)
    is a Connection; the event kind still tells on which side of mu_hat the
    shot fell. At the horizon a state inside the tolerance ball is a
    Connection, one with energy below the saddle is trapped (Capture).
    """
    g_max = equilibria(params, launch.k).g_max
    problem = OdeProblem(params, mu, launch.state)
    stop = Stop(horizon=horizon, events=(Crossing(g_max, +1), Turning(-1)))
    trajectory, event = integrate(problem, stop, tolerances)
    gap = _gap_to_saddle(event.state, params, launch.k)

    if event.kind == "horizon":
        near = abs(event.state.g - g_max) <= connection_tol and abs(event.state.gp) <= connection_tol
        if near:
            fate: Fate = "Connection"
        elif gap < -connection_tol and event.state.g < g_max:
            fate = "Capture"
        else:
            fate = "Ambiguous"
    elif abs(gap) <= connection_tol:
        fate = "Connection"
    elif event.kind == "crossing":
        fate = "Overshoot"
    else:
        fate = "Capture"

    logger.debug(
        f"shot mu={mu:.15g}: {fate} via {event.kind} at xi={event.xi:.6g}, gap={gap:.3e}"
    )
    return FateReport(
        fate=fate,
        mu=mu,
        crossing_xi=event.xi if event.kind != "horizon" else None,
        crossing_speed=float(event.state.gp) if event.kind != "horizon" else None,
        energy_gap=float(gap),
        event_kind=event.kind,
        trajectory=trajectory,
        delta=launch.delta,
    )


def shoot(
    params: Params,
    mu: float,
    delta: float = DEFAULT_DELTA,
    horizon: float = DEFAULT_HORIZON,
    tolerances: Optional[Tolerances] = None,
    connection_tol: float = CONNECTION_TOL,
    k: int = 0,
) -> FateReport:
    """classify_fate with one retry at delta / 100 when the horizon is hit.

    Raises:
        AmbiguousFateError: still undecided after the retry.
    """
    report = classify_fate(
        params, mu, saddle_launch(params, mu, delta, k), horizon, tolerances, connection_tol
    )
    if report.fate != "Ambiguous":
        return report
    logger.warning(f"ambiguous fate at mu={mu:.15g}, retrying with delta={delta / 100:.1e}")
    report = classify_fate(
        params, mu, saddle_launch(params, mu, delta / 100, k), horizon, tolerances, connection_tol
    )
    if report.fate == "Ambiguous":
        raise AmbiguousFateError(
            f"trajectory at mu={mu!r} reached the horizon {horizon} without a decisive event"
        )
    return report


def _below_mu_hat(report: FateReport) -> Optional[bool]:
    """True when the shot sits on the overshoot side, None for an exact horizon connection."""
    if report.fate == "Overshoot":
        return True
    if report.fate == "Capture":
        return False
    if report.event_kind == "crossing":
        return True
    if report.event_kind == "turning":
        return False
    return None


def _velocity(alpha: float, mu: float) -> Tuple[Optional[float], bool]:
    if alpha == 0.0 and mu == 0.0:
        return None, False
    vm = velocity_map(alpha, mu)
    return vm.v, vm.degenerate


def _sample(trajectory: Trajectory, start: float, end: float, step: float):
    count = max(2, int(math.ceil((end - start) / step)) + 1)
    grid = np.linspace(start, end, count)
    y = trajectory(grid)
    return grid, y[0], y[1]


def find_kink_mu(
    params: Params,
    tol: float = 1e-12,
    delta: float = DEFAULT_DELTA,
    horizon: float = DEFAULT_HORIZON,
    tolerances: Optional[Tolerances] = None,
    connection_tol: float = CONNECTION_TOL,
    mu_hi: float = 1.0,
    max_doublings: int = 30,
    sample_step: float = 0.01,
    k: int = 0,
) -> Tuple[float, WaveProfile]:
    """Bisect the shot fate for the kink viscosity mu_hat.

    Returns mu_hat and the kink profile, shifted so that g(0) = -asin(gamma).
    Shots run from g_{k-1}^M towards g_k^M; the profile is translated back to
    the canonical pair g_{-1}^M -> g_0^M.

    Raises:
        ParameterError: gamma = 0 (every mu > 0 captures) or tol below 1e-13.
        BracketError: no capturing mu found by doubling.
    """
    if params.gamma == 0.0:
        raise ParameterError(
            "mu_hat is undefined at gamma = 0: the unperturbed kink exists only at mu = 0"
        )
    if tol < MIN_KINK_TOL:
        raise ParameterError(f"tol must be >= {MIN_KINK_TOL}, got {tol}")

    def fire(mu: float) -> FateReport:
        return shoot(params, mu, delta, horizon, tolerances, connection_tol, k)

    lo, hi = 0.0, mu_hi
    lo_report = fire(lo)
    if _below_mu_hat(lo_report) is not True:
        raise BracketError(f"mu = 0 does not overshoot at gamma={params.gamma}")
    hi_report = fire(hi)
    doublings = 0
    while _below_mu_hat(hi_report):
        if doublings >= max_doublings:
            raise BracketError(f"no capture found up to mu={hi}")
        lo, lo_report = hi, hi_report
        hi *= 2.0
        hi_report = fire(hi)
        doublings += 1
    logger.debug(f"kink bracket [{lo}, {hi}] after {doublings} doublings")

    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        report = fire(mid)
        iterations += 1
        side = _below_mu_hat(report)
        if side is None:
            lo = hi = mid
            lo_report = report
            break
        if side:
            lo, lo_report = mid, report
        else:
            hi = mid

    mu_hat = 0.5 * (lo + hi)
    eq = equilibria(params, k)
    shift = 2.0 * math.pi * k
    trajectory = lo_report.trajectory
    xi_end = trajectory.first_crossing(eq.g_max - SADDLE_MARGIN, +1)
    xi_mid = trajectory.first_crossing(shift - math.asin(params.gamma), +1)
    if xi_end is None or xi_mid is None:
        raise SolverError("overshooting shot never reached the kink mid-level")
    xi, g, gp = _sample(trajectory, trajectory.span[0], xi_end, sample_step)

    v, degenerate = _velocity(params.alpha, mu_hat)
    audit = energy_audit(trajectory, params, lo_report.mu)
    logger.info(
        f"mu_hat({params.gamma}) = {mu_hat:.15g} after {iterations} bisections, "
        f"energy audit {audit:.2e}"
    )
    profile = WaveProfile(
        kind="kink",
        xi=xi - xi_mid,
        g=g - shift,
        gp=gp,
        gamma=params.gamma,
        alpha=params.alpha,
        mu=mu_hat,
        v=v,
        winding=1,
        meta={
            "iterations": iterations,
            "bracket": [lo, hi],
            "energy_audit": audit,
            "delta": delta,
            "degenerate": degenerate,
            "saddle": k,
        },
    )
    return mu_hat, profile


def _array_shot(
    params: Params,
    mu: float,
    gp0: float,
    horizon: float,
    tolerances: Optional[Tolerances],
) -> Tuple[Trajectory, Optional[float], Optional[float]]:
    """Shot from (g_{-1}^M, gp0); returns (trajectory, crossing xi, speed) or Nones when captured."""
    eq = equilibria(params, 0)
    problem = OdeProblem(params, mu, State(eq.g_max - 2.0 * math.pi, gp0))
    stop = Stop(horizon=horizon, events=(Crossing(eq.g_max, +1), Turning(-1)))
    trajectory, event = integrate(problem, stop, tolerances)
    if event.kind != "crossing":
        return trajectory, None, None
    return trajectory, event.xi, float(event.state.gp)


def find_array_mu(
    params: Params,
    gp0: float,
    tol: float = 1e-10,
    horizon: float = DEFAULT_HORIZON,
    tolerances: Optional[Tolerances] = None,
    mu_hi: float = 1.0,
    max_doublings: int = 30,
    sample_step: float = 0.01,
) -> Tuple[float, float, WaveProfile]:
    """Viscosity mu_check and period Xi of the rotation through (g_{-1}^M, gp0).

    The residual R(mu) = gp(at g_0^M) - gp0 is bracketed with capture
    counted as -inf, bisected until R is finite at both ends and then
    polished with Brent's method.
    """
    if not gp0 > 0.0:
        raise ParameterError(
            f"arrays need gp0 > 0, got {gp0}; the gp0 -> 0 limit is the kink (find_kink_mu)"
        )
    shots: Dict[float, Tuple[Trajectory, Optional[float], Optional[float]]] = {}

    def fire(mu: float):
        if mu not in shots:
            shots[mu] = _array_shot(params, mu, gp0, horizon, tolerances)
        return shots[mu]

    def residual(mu: float) -> float:
        speed = fire(mu)[2]
        return -math.inf if speed is None else speed - gp0

    if params.gamma == 0.0:
        mu = 0.0
    else:
        lo, hi = 0.0, mu_hi
        if residual(lo) < 0.0:
            raise BracketError(f"R(0) < 0 at gamma={params.gamma}, gp0={gp0}")
        doublings = 0
        while residual(hi) >= 0.0:
            if doublings >= max_doublings:
                raise BracketError(f"R(mu) stays positive up to mu={hi}")
            lo, hi = hi, 2.0 * hi
            doublings += 1
        while not math.isfinite(residual(hi)) and hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if residual(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
        if math.isfinite(residual(hi)):
            mu = brentq(residual, lo, hi, xtol=tol * 1e-2, maxiter=200)
        else:
            mu = lo

    trajectory, Xi, speed = fire(mu)
    if Xi is None:
        raise SolverError(f"array shot at mu={mu!r} was captured")
    xi, g, gp = _sample(trajectory, 0.0, Xi, sample_step)
    v, degenerate = _velocity(params.alpha, mu)
    logger.info(f"array gamma={params.gamma} gp0={gp0}: mu={mu:.15g}, Xi={Xi:.12g}")
    profile = WaveProfile(
        kind="array",
        xi=xi,
        g=g,
        gp=gp,
        gamma=params.gamma,
        alpha=params.alpha,
        mu=mu,
        v=v,
        winding=1,
        Xi=Xi,
        meta={
            "gp0": gp0,
            "residual": speed - gp0,
            "energy_audit": energy_audit(trajectory, params, mu),
            "degenerate": degenerate,
        },
    )
    return mu, Xi, profile


def array_periodicity_error(
    params: Params,
    mu: float,
    gp0: float,
    Xi: float,
    tolerances: Optional[Tolerances] = None,
    samples: int = 501,
) -> float:
    """max |g(xi + Xi) - g(xi) - 2 pi| over a re-integrated first period."""
    eq = equilibria(params, 0)
    problem = OdeProblem(params, mu, State(eq.g_max - 2.0 * math.pi, gp0))
    trajectory, _ = integrate(problem, Stop(horizon=2.0 * Xi), tolerances)
    grid = np.linspace(0.0, Xi, samples)
    first = trajectory(grid)[0]
    second = trajectory(grid + Xi)[0]
    return float(np.max(np.abs(second - first - 2.0 * math.pi)))


def period_to_speed(
    params: Params,
    Xi_target: float,
    tol: float = 1e-10,
    factor: float = 4.0,
    **array_options,
) -> float:
    """Invert the strictly monotone map gp0 -> Xi(gp0) by bracketed root finding.

    Raises:
        BracketError: no bracket inside gp0 in [1e-6, 1e3].
    """
    if not Xi_target > 0:
        raise ParameterError(f"Xi_target must be positive, got {Xi_target}")
    low, high = SPEED_RANGE

    def excess(gp0: float) -> float:
        return find_array_mu(params, gp0, **array_options)[1] - Xi_target

    x = 1.0
    fx = excess(x)
    if fx == 0.0:
        return x
    # Xi falls as gp0 grows; step towards the target
    step = factor if fx > 0 else 1.0 / factor
    while True:
        y = x * step
        if y < low or y > high:
            y = min(max(y, low), high)
            if y == x:
                raise BracketError(
                    f"period {Xi_target} not reached for gp0 in [{low:g}, {high:g}]"
                )
        fy = excess(y)
        if fy == 0.0:
            return y
        if (fx > 0) != (fy > 0):
            a, b = sorted((x, y))
            return brentq(excess, a, b, xtol=tol, maxiter=200)
        x, fx = y, fy


def _distance_to_orbit(points: np.ndarray, orbit: np.ndarray) -> np.ndarray:
    """Distance from each (g, gp) point to the polyline through the orbit samples."""
    tree = cKDTree(orbit)
    _, nearest = tree.query(points)
    best = np.full(len(points), np.inf)
    for shift in (-1, 0):
        a_idx = np.clip(nearest + shift, 0, len(orbit) - 2)
        a = orbit[a_idx]
        b = orbit[a_idx + 1]
        ab = b - a
        t = np.einsum("ij,ij->i", points - a, ab) / np.einsum("ij,ij->i", ab, ab)
        foot = a + np.clip(t, 0.0, 1.0)[:, None] * ab
        best = np.minimum(best, np.linalg.norm(points - foot, axis=1))
    return best


def half_array_profile(
    params: Params,
    gp0: float,
    horizon: float = 500.0,
    delta: float = DEFAULT_DELTA,
    tolerances: Optional[Tolerances] = None,
    sample_step: float = 0.05,
    orbit_step: float = 0.002,
    **array_options,
) -> WaveProfile:
    """Saddle launch at mu_check(gamma, gp0), measured against the array orbit it approaches.

    meta["distance"] holds the phase-space distance d(xi) to the array
    orbit (g taken mod 2 pi); a capture is reported there rather than raised.
    """
    if params.gamma == 0.0:
        raise ParameterError(
            "at gamma = 0 the saddle launch at mu = 0 is the kink separatrix, not a half-array"
        )
    mu, Xi, array = find_array_mu(params, gp0, tolerances=tolerances, **array_options)
    eq = equilibria(params, 0)
    problem = OdeProblem(params, mu, launch_from_saddle(params, mu, delta))
    trajectory, event = integrate(problem, Stop(horizon=horizon, events=(Turning(-1),)), tolerances)
    captured = event.kind == "turning"
    if captured:
        logger.warning(
            f"half-array launch at gamma={params.gamma}, gp0={gp0} was captured at xi={event.xi:.6g}"
        )

    xi, g, gp = _sample(trajectory, trajectory.span[0], trajectory.span[1], sample_step)
    orbit_xi = np.linspace(0.0, Xi, max(2, int(math.ceil(Xi / orbit_step)) + 1))
    orbit = np.column_stack(array.evaluate(orbit_xi))
    base = eq.g_max - 2.0 * math.pi
    wrapped = base + np.mod(g - base, 2.0 * math.pi)
    distance = _distance_to_orbit(np.column_stack((wrapped, gp)), orbit)

    tail = distance[len(distance) * 3 // 4:]
    turns = int(math.floor((g[-1] - g[0]) / (2.0 * math.pi)))
    v, degenerate = _velocity(params.alpha, mu)
    logger.info(
        f"half-array gamma={params.gamma} gp0={gp0}: distance {distance[-1]:.3e} at xi={xi[-1]:.6g}"
    )
    return WaveProfile(
        kind="half-array",
        xi=xi,
        g=g,
        gp=gp,
        gamma=params.gamma,
        alpha=params.alpha,
        mu=mu,
        v=v,
        winding=turns,
        Xi=Xi,
        meta={
            "gp0": gp0,
            "captured": captured,
            "distance": distance,
            "final_distance": float(distance[-1]),
            "tail_decreasing": bool(len(tail) < 2 or tail[-1] <= tail[0]),
            "energy_audit": energy_audit(trajectory, params, mu),
            "evidence_grade": True,
            "degenerate": degenerate,
        },
    )


def static_profile(
    params: Params,
    stable: bool = True,
    xi_range: Tuple[float, float] = (-10.0, 10.0),
    samples: int = 201,
) -> WaveProfile:
    """Constant solution: the stable phi = -asin(gamma) or the unstable phi = asin(gamma) + pi."""
    phi_s, phi_u = constant_solutions(params.gamma)
    level = (phi_s if stable else phi_u) - math.pi
    xi = np.linspace(xi_range[0], xi_range[1], samples)
    return WaveProfile(
        kind="static-stable" if stable else "static-unstable",
        xi=xi,
        g=np.full(samples, level),
        gp=np.zeros(samples),
        gamma=params.gamma,
        alpha=params.alpha,
        mu=0.0,
        v=0.0,
        winding=0,
    )


def _sweep_row(gamma: float, tol: float, alphas: Sequence[float], options: dict) -> SweepRow:
    row = SweepRow(gamma=gamma)
    try:
        mu_hat, profile = find_kink_mu(Params(gamma), tol=tol, **options)
    except (ParameterError, SolverError) as e:
        row.error = f"{type(e).__name__}: {e}"
        logger.warning(f"sweep row gamma={gamma} failed: {row.error}")
        return row
    row.mu_hat = mu_hat
    row.ratio = mu_hat / gamma
    row.iterations = profile.meta["iterations"]
    for alpha in alphas:
        if alpha > 0:
            row.velocities[alpha] = velocity_map(alpha, mu_hat).v
            row.v_inf[alpha] = asymptotic_velocity(Params(gamma, alpha))
    return row


def sweep_mu_hat(
    gammas: Sequence[float],
    tol: float = 1e-12,
    alphas: Sequence[float] = (),
    workers: int = 1,
    **options,
) -> List[SweepRow]:
    """mu_hat over a gamma grid, rows ordered by gamma; failed rows carry `error`."""
    ordered = sorted(gammas)
    count = len(ordered)
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    _sweep_row,
                    ordered,
                    [tol] * count,
                    [tuple(alphas)] * count,
                    [options] * count,
                )
            )
    else:
        rows = [_sweep_row(gamma, tol, alphas, options) for gamma in ordered]
    logger.info(f"sweep finished: {sum(r.ok for r in rows)}/{count} rows solved")
    return rows


def extrapolate_mu_ratio(rows: Sequence[SweepRow]) -> float:
    """Intercept of the least-squares line through (gamma, mu_hat / gamma)."""
    good = [r for r in rows if r.ok]
    if len(good) < 2:
        raise ParameterError("extrapolation needs at least two solved rows")
    slope, intercept = np.polyfit([r.gamma for r in good], [r.ratio for r in good], 1)
    return float(intercept)
