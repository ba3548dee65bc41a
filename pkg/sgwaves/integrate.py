"""
Adaptive integration of the washboard particle equation g'' + mu g' + U_g(g) = 0.

Steps are taken with scipy's Dormand-Prince 5(4) pair one at a time so that
events (level crossings, turning points) can be located by bisection on each
step's free interpolant, independently of step-size control.
"""

import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.integrate import RK45, OdeSolution
from scipy.optimize import bisect

from sgwaves.errors import ParameterError, StiffnessError
from sgwaves.model import Params, State, potential

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_HORIZON = 1e4
EVENT_MAXITER = 60

# Gauss-Legendre rule for integrals over single steps; exact for the
# degree-8 polynomial gp^2 built from the quartic interpolant.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class Tolerances:
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    max_step: float = math.inf

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.max_step > 0):
            raise ParameterError(
                f"tolerances must be positive, got rtol={self.rtol}, atol={self.atol}, "
                f"max_step={self.max_step}"
            )


@dataclass(frozen=True)
class OdeProblem:
    """Initial value problem for the reduced equation at viscosity mu."""

    params: Params
    mu: float
    initial: State
    xi0: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise ParameterError(f"mu must be >= 0, got {self.mu}")
        if not (np.isfinite(self.initial.g) and np.isfinite(self.initial.gp)):
            raise ParameterError("initial state must be finite")

    def rhs(self, xi: float, y: np.ndarray) -> np.ndarray:
        g, gp = y
        return np.array([gp, -self.mu * gp - math.sin(g) + self.params.gamma])


@dataclass(frozen=True)
class Crossing:
    """g reaches `level`; direction +1 upward, -1 downward, 0 either way."""

    level: float
    direction: int = 0
    kind: str = field(default="crossing", init=False)

    def value(self, xi: float, y: np.ndarray) -> float:
        return y[0] - self.level


@dataclass(frozen=True)
class Turning:
    """gp reaches zero; direction -1 for + to -, +1 for - to +."""

    direction: int = -1
    kind: str = field(default="turning", init=False)

    def value(self, xi: float, y: np.ndarray) -> float:
        return y[1]


Trigger = Union[Crossing, Turning]


@dataclass(frozen=True)
class Stop:
    """Stopping rule: the first triggered event, or the xi horizon."""

    horizon: float = DEFAULT_HORIZON
    events: Tuple[Trigger, ...] = ()
    backward: bool = False

    def __post_init__(self):
        if not self.horizon > 0:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")


@dataclass(frozen=True)
class Event:
    kind: Literal["crossing", "turning", "horizon"]
    xi: float
    state: State
    trigger: Optional[Trigger] = None


def _triggered(direction: int, before: float, after: float) -> bool:
    if direction > 0:
        return before < 0.0 <= after
    if direction < 0:
        return before > 0.0 >= after
    return (before < 0.0 <= after) or (before > 0.0 >= after)


class Trajectory:
    """Densely sampled orbit: step end points plus the solver's interpolants."""

    def __init__(self, problem: OdeProblem, xi: np.ndarray, y: np.ndarray, solution: OdeSolution):
        self.problem = problem
        self.xi = xi
        self.y = y
        self.solution = solution

    @property
    def g(self) -> np.ndarray:
        return self.y[0]

    @property
    def gp(self) -> np.ndarray:
        return self.y[1]

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.xi[0]), float(self.xi[-1])

    def __len__(self) -> int:
        return len(self.xi)

    def __call__(self, xi) -> np.ndarray:
        return self.solution(xi)

    def state_at(self, xi: float) -> State:
        g, gp = self.solution(xi)
        return State(float(g), float(gp))

    def resample(self, step: float) -> Tuple[np.ndarray, np.ndarray]:
        """Uniform samples (xi, y) at spacing `step`, both end points included."""
        lo, hi = self.span
        count = max(2, int(math.ceil(abs(hi - lo) / step)) + 1)
        grid = np.linspace(lo, hi, count)
        return grid, self.solution(grid)

    def first_crossing(self, level: float, direction: int = 1) -> Optional[float]:
        """xi of the first crossing of g = level, refined on the interpolant."""
        values = self.g - level
        for i in range(len(values) - 1):
            if _triggered(direction, values[i], values[i + 1]):
                trigger = Crossing(level, direction)
                return float(
                    _refine(trigger, self.solution, self.xi[i], self.xi[i + 1], values[i], values[i + 1])
                )
        return None

    def gp2_integral(self) -> np.ndarray:
        """Cumulative integral of gp^2 from the first sample to every sample."""
        if len(self.xi) < 2:
            return np.zeros(len(self.xi))
        mid = 0.5 * (self.xi[1:] + self.xi[:-1])
        half = 0.5 * (self.xi[1:] - self.xi[:-1])
        points = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        gp = self.solution(points.ravel())[1].reshape(points.shape)
        pieces = half * ((gp * gp) @ _GL_WEIGHTS)
        return np.concatenate(([0.0], np.cumsum(pieces)))

    def ode_residual(self, xi: Sequence[float], h: float = 1e-5) -> np.ndarray:
        """|d/dxi interpolant - rhs| at interior points, by central differences."""
        xi = np.asarray(xi, dtype=float)
        ahead = self.solution(xi + h)
        behind = self.solution(xi - h)
        slope = (ahead - behind) / (2.0 * h)
        y = self.solution(xi)
        expected = np.array([self.problem.rhs(t, y[:, i]) for i, t in enumerate(xi)]).T
        return np.max(np.abs(slope - expected), axis=0)


def _refine(trigger: Trigger, dense, a: float, b: float, fa: float, fb: float) -> float:
    if fb == 0.0:
        return b
    if fa == 0.0:
        return a

    def f(xi):
        return trigger.value(xi, dense(xi))

    lo, hi = (a, b) if a < b else (b, a)
    return bisect(f, lo, hi, xtol=1e-15, maxiter=EVENT_MAXITER)


def integrate(
    problem: OdeProblem,
    stop: Optional[Stop] = None,
    tolerances: Optional[Tolerances] = None,
) -> Tuple[Trajectory, Event]:
    """Integrate `problem` until the first event in `stop` or its horizon.

    Raises:
        StiffnessError: the step size underflowed.
    """
    stop = stop or Stop()
    tolerances = tolerances or Tolerances()
    direction = -1.0 if stop.backward else 1.0
    y0 = problem.initial.as_array()

    solver = RK45(
        problem.rhs,
        problem.xi0,
        y0,
        problem.xi0 + direction * stop.horizon,
        rtol=tolerances.rtol,
        atol=tolerances.atol,
        max_step=tolerances.max_step,
    )

    ts: List[float] = [problem.xi0]
    ys: List[np.ndarray] = [y0]
    interpolants = []
    previous = [trigger.value(problem.xi0, y0) for trigger in stop.events]
    fired: Optional[Event] = None

    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integration failed at xi={solver.t}: {message}")
        t_old, t_new = solver.t_old, solver.t
        y_new = solver.y.copy()
        dense = solver.dense_output()

        for index, trigger in enumerate(stop.events):
            current = trigger.value(t_new, y_new)
            if _triggered(trigger.direction, previous[index], current):
                xi_event = _refine(trigger, dense, t_old, t_new, previous[index], current)
                if fired is None or direction * (xi_event - fired.xi) < 0:
                    g, gp = dense(xi_event)
                    fired = Event(trigger.kind, float(xi_event), State(float(g), float(gp)), trigger)
            previous[index] = current

        if fired is not None:
            if fired.xi != ts[-1]:
                ts.append(fired.xi)
                ys.append(np.array([fired.state.g, fired.state.gp]))
                interpolants.append(dense)
            break

        ts.append(t_new)
        ys.append(y_new)
        interpolants.append(dense)

    if fired is None:
        fired = Event("horizon", float(ts[-1]), State(float(ys[-1][0]), float(ys[-1][1])))

    if not interpolants:
        raise StiffnessError("integration produced no steps")
    trajectory = Trajectory(problem, np.asarray(ts), np.array(ys).T, OdeSolution(ts, interpolants))
    logger.debug(
        f"integrated mu={problem.mu:.6g} over [{ts[0]:.6g}, {ts[-1]:.6g}] "
        f"in {len(interpolants)} steps, stop={fired.kind}"
    )
    return trajectory, fired


def energy_audit(trajectory: Trajectory, params: Params, mu: float) -> float:
    """Largest violation of the integrated dissipation law over all sample pairs.

    For samples xi < xi_bar the law reads
    e(xi) - e(xi_bar) = mu * integral_{xi}^{xi_bar} gp^2, so
    E = e + mu * I(xi) must be constant and max(E) - min(E) is the
    worst pairwise residual.
    """
    energy = 0.5 * trajectory.gp**2 + potential(trajectory.g, params.gamma)
    balance = energy + mu * trajectory.gp2_integral()
    return float(np.max(balance) - np.min(balance))
