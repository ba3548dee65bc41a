"""
Finite-difference simulation of phi_tt - phi_xx + sin(phi) + alpha phi_t + gamma = 0.

The scheme is the explicit three-level leapfrog with the damping term
averaged over the outer levels, so each update stays explicit:

    (1 + a) phi^{n+1} = 2 phi^n - (1 - a) phi^{n-1} + dt^2 (D2 phi^n - sin phi^n - gamma),
    a = alpha dt / 2.

Line segments keep their end values pinned; circles use lifted periodic
neighbours phi(x + L) = phi(x) + 2 pi m.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import trapezoid

from sgwaves.errors import (
    BlowUpError,
    CflError,
    DomainError,
    FrontNotFoundError,
    ParameterError,
)
from sgwaves.model import (
    EnergyDensities,
    Params,
    circle_circumference,
    energy_constant,
    energy_density,
)
from sgwaves.profiles import WaveProfile
from sgwaves.unperturbed import kink_profile

CFL_LIMIT = 0.9
DEFAULT_PADDING = 20.0
FRONT_GUARD = 10.0
DEFAULT_TRANSIENT = 0.2
MIN_FRONT_SAMPLES = 10
DEFAULT_BALANCE_CONSTANT = 10.0

FRONTED_KINDS = ("kink", "antikink", "array", "half-array")


@dataclass(frozen=True)
class Domain:
    kind: Literal["line", "circle"]
    left: float
    length: float
    winding: int = 0

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"domain length must be positive, got {self.length}")

    @classmethod
    def line(cls, left: float, right: float) -> "Domain":
        return cls("line", left, right - left)

    @classmethod
    def circle(cls, length: float, winding: int = 1, left: float = 0.0) -> "Domain":
        return cls("circle", left, length, winding)

    @property
    def right(self) -> float:
        return self.left + self.length

    @property
    def lift(self) -> float:
        return 2.0 * math.pi * self.winding


@dataclass
class Field:
    """Grid values of phi and phi_t at time t; phi_prev holds the previous leapfrog level."""

    phi: np.ndarray
    phi_t: np.ndarray
    dx: float
    domain: Domain
    t: float = 0.0
    phi_prev: Optional[np.ndarray] = None
    dt_prev: Optional[float] = None

    @property
    def x(self) -> np.ndarray:
        return self.domain.left + self.dx * np.arange(len(self.phi))

    def copy(self) -> "Field":
        return replace(
            self,
            phi=self.phi.copy(),
            phi_t=self.phi_t.copy(),
            phi_prev=None if self.phi_prev is None else self.phi_prev.copy(),
        )


@dataclass
class Diagnostics:
    times: List[float] = field(default_factory=list)
    H: List[float] = field(default_factory=list)
    dissipation: List[float] = field(default_factory=list)
    boundary_flux: List[float] = field(default_factory=list)
    positions: List[float] = field(default_factory=list)
    front_times: List[float] = field(default_factory=list)
    windings: List[int] = field(default_factory=list)
    balance_residuals: List[float] = field(default_factory=list)
    balance_bounds: List[float] = field(default_factory=list)
    shape_drift: List[float] = field(default_factory=list)
    velocity: Optional[float] = None
    fit_residual: Optional[float] = None
    guard_triggered: bool = False
    steps: int = 0
    history: List[Tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def winding_constant(self) -> bool:
        return len(set(self.windings)) <= 1

    @property
    def balance_ok(self) -> bool:
        return all(r <= b for r, b in zip(self.balance_residuals, self.balance_bounds))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "times": self.times,
            "H": self.H,
            "dissipation": self.dissipation,
            "boundary_flux": self.boundary_flux,
            "front_times": self.front_times,
            "positions": self.positions,
            "windings": self.windings,
            "balance_residuals": self.balance_residuals,
            "balance_bounds": self.balance_bounds,
            "shape_drift": self.shape_drift,
            "velocity": self.velocity,
            "fit_residual": self.fit_residual,
            "guard_triggered": self.guard_triggered,
            "winding_constant": self.winding_constant,
            "balance_ok": self.balance_ok,
            "steps": self.steps,
        }


def _grid(domain: Domain, dx: float) -> Tuple[int, float]:
    if not dx > 0:
        raise ParameterError(f"dx must be positive, got {dx}")
    cells = max(2, int(round(domain.length / dx)))
    return cells, domain.length / cells


def init_from_profile(
    profile: WaveProfile,
    domain: Domain,
    dx: float,
    x0: float = 0.0,
    velocity: Optional[float] = None,
    allow_truncation: bool = False,
    min_padding: float = DEFAULT_PADDING,
) -> Field:
    """Sample phi = g~(x - x0) and phi_t = -v g~'(x - x0) on the domain grid.

    Raises:
        DomainError: the domain cannot host the profile.
    """
    v = profile.v if velocity is None else velocity
    if v is None:
        raise ParameterError("profile speed is free; pass `velocity`")
    if abs(v) >= 1.0:
        raise DomainError(f"only subluminal profiles can be simulated, got v={v}")

    if domain.kind == "line":
        if profile.kind == "array" and not allow_truncation:
            raise DomainError("arrays need a circle domain (or allow_truncation on a line)")
        if profile.kind in FRONTED_KINDS + ("bounded-pair",):
            if x0 - domain.left < min_padding or domain.right - x0 < min_padding:
                raise DomainError(
                    f"front at x0={x0} needs {min_padding} units of padding inside "
                    f"[{domain.left}, {domain.right}]"
                )
        cells, step = _grid(domain, dx)
        x = domain.left + step * np.arange(cells + 1)
    else:
        cells, step = _grid(domain, dx)
        x = domain.left + step * np.arange(cells)
        if profile.kind == "array":
            periods = domain.winding * profile.sign
            expected = circle_circumference(profile.Xi, v, abs(periods)) if periods > 0 else None
            if expected is None or not math.isclose(domain.length, expected, rel_tol=1e-9):
                raise DomainError(
                    f"circle of length {domain.length} does not host {abs(domain.winding)} "
                    f"periods (needs {expected})"
                )
        elif profile.winding != domain.winding:
            raise DomainError(
                f"profile winding {profile.winding} does not match circle winding {domain.winding}"
            )
        elif profile.kind in FRONTED_KINDS + ("bounded-pair",) and domain.length < 2 * min_padding:
            raise DomainError(f"circle of length {domain.length} is shorter than {2 * min_padding}")

    phi, phi_t = profile.field_values(x, 0.0, x0, v)
    if domain.kind == "line":
        left, right = profile.limits
        if profile.sign < 0:
            left, right = right, left
        if left is not None:
            phi[0] = left + math.pi
        if right is not None:
            phi[-1] = right + math.pi
        phi_t[0] = phi_t[-1] = 0.0
    logger.debug(
        f"initialized {profile.kind} on {domain.kind} with {len(x)} points, dx={step:.6g}, v={v:.6g}"
    )
    return Field(phi=np.asarray(phi, float), phi_t=np.asarray(phi_t, float), dx=step, domain=domain)


def _laplacian(phi: np.ndarray, dx: float, domain: Domain) -> np.ndarray:
    out = np.zeros_like(phi)
    out[1:-1] = phi[2:] - 2.0 * phi[1:-1] + phi[:-2]
    if domain.kind == "circle":
        out[0] = phi[1] - 2.0 * phi[0] + (phi[-1] - domain.lift)
        out[-1] = (phi[0] + domain.lift) - 2.0 * phi[-1] + phi[-2]
    return out / (dx * dx)


def _gradient(phi: np.ndarray, dx: float, domain: Domain) -> np.ndarray:
    if domain.kind == "circle":
        ahead = np.append(phi[1:], phi[0] + domain.lift)
        behind = np.insert(phi[:-1], 0, phi[-1] - domain.lift)
        return (ahead - behind) / (2.0 * dx)
    return np.gradient(phi, dx)


def step(field: Field, dt: float, params: Params) -> Field:
    """Advance by dt; the first step (or a change of dt) is bootstrapped by a Taylor expansion.

    Raises:
        CflError: dt > 0.9 dx.
        BlowUpError: phi became non-finite.
    """
    if not 0 < dt <= CFL_LIMIT * field.dx:
        raise CflError(f"dt={dt} violates dt <= {CFL_LIMIT} dx = {CFL_LIMIT * field.dx:.6g}")
    gamma, alpha = params.gamma, params.alpha
    phi = field.phi
    force = _laplacian(phi, field.dx, field.domain) - np.sin(phi) - gamma

    if field.phi_prev is None or field.dt_prev != dt:
        accel = force - alpha * field.phi_t
        new = phi + dt * field.phi_t + 0.5 * dt * dt * accel
        new_t = field.phi_t + dt * accel
    else:
        a = 0.5 * alpha * dt
        new = (2.0 * phi - (1.0 - a) * field.phi_prev + dt * dt * force) / (1.0 + a)
        new_t = (3.0 * new - 4.0 * phi + field.phi_prev) / (2.0 * dt)

    if field.domain.kind == "line":
        new[0], new[-1] = phi[0], phi[-1]
        new_t[0] = new_t[-1] = 0.0
    if not (np.all(np.isfinite(new)) and np.all(np.isfinite(new_t))):
        raise BlowUpError(f"field became non-finite at t={field.t + dt:.6g}", t=field.t + dt)
    return Field(
        phi=new,
        phi_t=new_t,
        dx=field.dx,
        domain=field.domain,
        t=field.t + dt,
        phi_prev=phi,
        dt_prev=dt,
    )


def _integral(values: np.ndarray, field: Field) -> float:
    if field.domain.kind == "circle":
        return float(np.sum(values) * field.dx)
    return float(trapezoid(values, dx=field.dx))


def energy_report(field: Field, params: Params) -> EnergyDensities:
    """h and j on the grid, with phi_x by centred differences, and H by the trapezoid rule."""
    phi_x = _gradient(field.phi, field.dx, field.domain)
    h, j = energy_density(field.phi, phi_x, field.phi_t, params.gamma)
    return EnergyDensities(h=h, j=j, K=energy_constant(params.gamma), H=_integral(h, field))


def power_balance(field: Field, params: Params) -> Tuple[float, float]:
    """Dissipated power alpha * int phi_t^2 and forcing work -gamma * int phi_t."""
    dissipated = params.alpha * _integral(field.phi_t**2, field)
    forcing = -params.gamma * _integral(field.phi_t, field)
    return dissipated, forcing


def _boundary_flux(field: Field, params: Params) -> float:
    if field.domain.kind == "circle":
        return 0.0
    j = energy_report(field, params).j
    return float(j[-1] - j[0])


def front_level(gamma: float) -> float:
    """Tracking level pi - asin(gamma), halfway between the kink's asymptotic values."""
    return math.pi - math.asin(gamma)


def front_position(field: Field, params: Params) -> float:
    """x where phi crosses the tracking level (mod 2 pi on circles), linearly interpolated.

    Raises:
        FrontNotFoundError: no crossing on the grid.
    """
    level = front_level(params.gamma)
    phi = field.phi
    x = field.x
    if field.domain.kind == "circle":
        phi = np.append(phi, phi[0] + field.domain.lift)
        x = np.append(x, field.domain.right)
    branch = np.floor((phi - level) / (2.0 * math.pi))
    crossed = np.nonzero(branch[1:] != branch[:-1])[0]
    if len(crossed) == 0:
        raise FrontNotFoundError(f"phi never crosses {level:.6g} (mod 2 pi) at t={field.t:.6g}")
    i = int(crossed[0])
    target = level + 2.0 * math.pi * max(branch[i], branch[i + 1])
    a, b = phi[i] - target, phi[i + 1] - target
    return float(x[i] + (x[i + 1] - x[i]) * a / (a - b))


def measure_velocity(
    times, positions, transient: float = DEFAULT_TRANSIENT, period: Optional[float] = None
) -> Tuple[float, float]:
    """Least-squares speed of the front after discarding the first `transient` fraction of the run.

    Returns (velocity, rms fit residual). `period` unwraps positions on circles.
    """
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    if len(times) != len(positions) or len(times) == 0:
        raise ParameterError("times and positions must be non-empty and aligned")
    if period is not None:
        positions = np.unwrap(positions, period=period)
    start = times[0] + transient * (times[-1] - times[0])
    keep = times >= start
    if np.count_nonzero(keep) < MIN_FRONT_SAMPLES:
        raise ParameterError(
            f"need >= {MIN_FRONT_SAMPLES} front samples after the transient, "
            f"got {np.count_nonzero(keep)}"
        )
    slope, intercept = np.polyfit(times[keep], positions[keep], 1)
    residual = positions[keep] - (slope * times[keep] + intercept)
    return float(slope), float(np.sqrt(np.mean(residual**2)))


def _front_offset(profile: WaveProfile, v: float) -> float:
    """Lab distance from the profile origin to its tracking-level crossing."""
    target = -math.asin(profile.gamma)
    g = profile.g
    above = np.nonzero(g >= target)[0]
    if len(above) == 0 or above[0] == 0:
        return 0.0
    i = int(above[0])
    xi_c = profile.xi[i - 1] + (profile.xi[i] - profile.xi[i - 1]) * (target - g[i - 1]) / (
        g[i] - g[i - 1]
    )
    return profile.sign * xi_c * math.sqrt(1.0 - v * v)


def shape_drift(
    field: Field, profile: WaveProfile, x_front: float, velocity: Optional[float] = None
) -> float:
    """Sup-norm distance between phi and the profile translated onto the measured front."""
    v = profile.v if velocity is None else velocity
    if v is None:
        raise ParameterError("profile speed is free; pass `velocity`")
    x0 = x_front - _front_offset(profile, v)
    reference, _ = profile.field_values(field.x, 0.0, x0, v)
    difference = field.phi - reference
    if field.domain.kind == "circle":
        difference -= 2.0 * math.pi * np.round(np.mean(difference) / (2.0 * math.pi))
    return float(np.max(np.abs(difference)))


def winding(field: Field) -> int:
    if field.domain.kind == "circle":
        return field.domain.winding
    return int(round((field.phi[-1] - field.phi[0]) / (2.0 * math.pi)))


def perturb(
    field: Field, amplitude: float = 1e-3, center: float = 0.0, width: float = 1.0
) -> Field:
    """Add a Gaussian bump to phi; the next step restarts from the Taylor bootstrap."""
    bumped = field.copy()
    bump = amplitude * np.exp(-(((field.x - center) / width) ** 2))
    if field.domain.kind == "line":
        bump[0] = bump[-1] = 0.0
    bumped.phi = bumped.phi + bump
    bumped.phi_prev = None
    bumped.dt_prev = None
    return bumped


def run(
    field: Field,
    params: Params,
    t_end: float,
    dt: float,
    cadence: float = 1.0,
    transient: float = DEFAULT_TRANSIENT,
    front_guard: float = FRONT_GUARD,
    balance_constant: float = DEFAULT_BALANCE_CONSTANT,
    profile: Optional[WaveProfile] = None,
    velocity: Optional[float] = None,
    track_front: bool = True,
    keep_history: bool = False,
) -> Tuple[Diagnostics, Field]:
    """Step to t_end, recording energy, dissipation, front and winding every `cadence`.

    Each record checks the discrete law dH + d(dissipation) - d(boundary flux) = 0
    against balance_constant * (dt^2 + dx^2) * (1 + |H|). With `profile`
    given, the sup-norm shape drift against it is recorded too.

    Raises:
        BlowUpError: carrying the diagnostics gathered up to the failure.
    """
    if t_end < field.t:
        raise ParameterError(f"t_end={t_end} lies before the field time {field.t}")
    steps_total = int(round((t_end - field.t) / dt))
    every = max(1, int(round(cadence / dt)))
    diagnostics = Diagnostics()
    period = None
    if field.domain.kind == "circle" and field.domain.winding:
        period = field.domain.length / abs(field.domain.winding)

    dissipated = 0.0
    flux = 0.0
    power = params.alpha * _integral(field.phi_t**2, field)
    edge = _boundary_flux(field, params)
    scale = dt * dt + field.dx * field.dx

    def record(current: Field):
        nonlocal track_front
        report = energy_report(current, params)
        if diagnostics.H:
            residual = abs(
                (report.H - diagnostics.H[-1])
                + (dissipated - diagnostics.dissipation[-1])
                - (flux - diagnostics.boundary_flux[-1])
            )
            bound = balance_constant * scale * (1.0 + abs(diagnostics.H[-1]))
            diagnostics.balance_residuals.append(residual)
            diagnostics.balance_bounds.append(bound)
            if residual > bound:
                logger.warning(
                    f"energy balance residual {residual:.3e} exceeds {bound:.3e} at t={current.t:.6g}"
                )
        diagnostics.times.append(current.t)
        diagnostics.H.append(report.H)
        diagnostics.dissipation.append(dissipated)
        diagnostics.boundary_flux.append(flux)
        diagnostics.windings.append(winding(current))
        if keep_history:
            diagnostics.history.append((current.t, current.phi.copy(), current.phi_t.copy()))
        if not track_front:
            return True
        try:
            x_c = front_position(current, params)
        except FrontNotFoundError as e:
            logger.debug(f"front tracking disabled: {e}")
            track_front = False
            return True
        if period is not None and diagnostics.positions:
            previous = diagnostics.positions[-1]
            x_c += period * round((previous - x_c) / period)
        diagnostics.positions.append(x_c)
        diagnostics.front_times.append(current.t)
        if profile is not None:
            diagnostics.shape_drift.append(shape_drift(current, profile, x_c, velocity))
        if current.domain.kind == "line":
            gap = min(x_c - current.domain.left, current.domain.right - x_c)
            if gap < front_guard:
                logger.warning(f"front at x={x_c:.4g} within {front_guard} of the boundary, stopping")
                diagnostics.guard_triggered = True
                return False
        return True

    current = field
    keep_going = record(current)
    try:
        for n in range(1, steps_total + 1):
            if not keep_going:
                break
            current = step(current, dt, params)
            new_power = params.alpha * _integral(current.phi_t**2, current)
            new_edge = _boundary_flux(current, params)
            dissipated += 0.5 * dt * (power + new_power)
            flux += 0.5 * dt * (edge + new_edge)
            power, edge = new_power, new_edge
            diagnostics.steps = n
            if n % every == 0 or n == steps_total:
                keep_going = record(current)
    except BlowUpError as e:
        e.diagnostics = diagnostics
        logger.error(f"run blew up at t={e.t}")
        raise

    if len(diagnostics.front_times) >= 2:
        try:
            diagnostics.velocity, diagnostics.fit_residual = measure_velocity(
                diagnostics.front_times, diagnostics.positions, transient
            )
        except ParameterError as e:
            logger.warning(f"velocity not measured: {e}")
    logger.info(
        f"run to t={current.t:.6g} in {diagnostics.steps} steps: H={diagnostics.H[-1]:.8g}, "
        f"v={diagnostics.velocity}"
    )
    return diagnostics, current


def stability_probe(
    profile: WaveProfile,
    params: Params,
    domain: Domain,
    dx: float,
    dt: float,
    t_end: float,
    x0: float = 0.0,
    amplitude: float = 1e-3,
    width: float = 1.0,
    offset: float = 2.0,
    cadence: float = 1.0,
    velocity: Optional[float] = None,
) -> Dict[str, Any]:
    """Bump the profile next to its front and follow the distance to the translated profile.

    The outcome is a measurement: `grew` reports whether the distance at
    the end exceeds the first recorded one.
    """
    start = init_from_profile(profile, domain, dx, x0=x0, velocity=velocity)
    bumped = perturb(start, amplitude, x0 + offset, width)
    diagnostics, _ = run(
        bumped, params, t_end, dt, cadence=cadence, profile=profile, velocity=velocity
    )
    distances = diagnostics.shape_drift
    return {
        "times": diagnostics.front_times,
        "distance": distances,
        "grew": bool(distances and distances[-1] > distances[0]),
        "velocity": diagnostics.velocity,
    }


def calibrate_balance_constant(
    dx: float = 0.05, dt: float = 0.04, t_end: float = 20.0, velocity: float = 0.5
) -> float:
    """Largest per-record balance residual / ((dt^2 + dx^2)(1 + |H|)) for the free moving kink."""
    params = Params(0.0, 0.0)
    start = init_from_profile(kink_profile(velocity=velocity), Domain.line(-40.0, 40.0), dx, x0=-10.0)
    diagnostics, _ = run(start, params, t_end, dt, balance_constant=math.inf)
    scale = dt * dt + start.dx * start.dx
    ratios = [
        r / (scale * (1.0 + abs(h)))
        for r, h in zip(diagnostics.balance_residuals, diagnostics.H[:-1])
    ]
    return max(ratios) if ratios else 0.0
