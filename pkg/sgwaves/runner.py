"""
Command-line runner for the sg-waves solvers.

Every command merges built-in defaults, the config file and its flags into a
RunConfig, validates it, runs one solver and writes its artifact plus a
manifest JSON into the output directory. Exit status: 0 success,
2 invalid input, 3 solver failure.
"""

import json
import math
import os
import platform
import sys
import time
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import scipy
import typer
from loguru import logger

from sgwaves import __version__
from sgwaves.config import (
    RunConfig,
    create_default_config,
    get_default_config_path,
)
from sgwaves.errors import BlowUpError, ConfigError, ParameterError, SolverError
from sgwaves.integrate import Tolerances
from sgwaves.model import (
    Params,
    asymptotic_velocity,
    circle_circumference,
    constant_solutions,
    equilibria,
    normalize_forcing,
)
from sgwaves.pde import Domain, init_from_profile, perturb, run
from sgwaves.profiles import WaveProfile
from sgwaves.shooting import (
    array_periodicity_error,
    extrapolate_mu_ratio,
    find_array_mu,
    find_kink_mu,
    half_array_profile,
    period_to_speed,
    static_profile,
    sweep_mu_hat,
)
from sgwaves.storage import ArtifactStorage, to_jsonable
from sgwaves.unperturbed import (
    bounded_pair_profile,
    kink_profile,
    libration_period,
    pendulum_orbit,
    rotation_period,
    tilted_libration_period,
)

EXIT_INVALID = 2
EXIT_SOLVER = 3

# Global config and storage
_config: Optional[RunConfig] = None
_storage: Optional[ArtifactStorage] = None
_dry_run: bool = False


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = None):
    """Configure loguru logging."""
    logger.remove()

    logger.add(sys.stderr, format="{level}: {message}", level=log_level)

    if log_file:
        logger.add(
            log_file,
            rotation="1 day",
            retention="7 days",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}",
            level=log_level,
        )


def load_config(
    config_file: Optional[str] = None,
    output_dir: Optional[str] = None,
    fmt: Optional[str] = None,
) -> RunConfig:
    """Load configuration from file (or defaults) and apply global overrides."""
    global _config

    if config_file:
        _config = RunConfig.from_file(config_file)
        logger.debug(f"Loaded config from {config_file}")
    elif os.path.exists(get_default_config_path()):
        _config = RunConfig.from_file(get_default_config_path())
        logger.debug(f"Loaded config from {get_default_config_path()}")
    else:
        _config = RunConfig()

    overrides: Dict[str, Any] = {}
    if output_dir:
        overrides["output.dir"] = output_dir
    if fmt:
        overrides["output.format"] = fmt
    _config.update(overrides)
    return _config


def init_storage(config: RunConfig) -> ArtifactStorage:
    """Initialize the artifact writer for this run."""
    global _storage

    _storage = ArtifactStorage(config.output.dir, config.output.format, dry_run=_dry_run)
    if _dry_run:
        logger.info(f"[DRY-RUN] Would write artifacts to {config.output.dir}")
    return _storage


def show_dry_run_summary():
    """Show dry-run summary if in dry-run mode."""
    if _storage and _storage.dry_run:
        summary = _storage.get_dry_run_summary()
        if summary:
            typer.echo(summary, err=True)


def _fail(code: int, message: str):
    typer.echo(f"Error: {message}", err=True)
    raise typer.Exit(code)


def _tolerances(config: RunConfig) -> Tolerances:
    return Tolerances(rtol=config.ode.rtol, atol=config.ode.atol)


def _kink_options(config: RunConfig) -> Dict[str, Any]:
    return {
        "delta": config.shoot.delta,
        "horizon": config.ode.horizon,
        "tolerances": _tolerances(config),
        "connection_tol": config.shoot.connection_tol,
        "mu_hi": config.shoot.mu_hi,
    }


def _array_options(config: RunConfig) -> Dict[str, Any]:
    return {
        "tol": config.array.tol,
        "horizon": config.ode.horizon,
        "tolerances": _tolerances(config),
    }


def _flip(profile: WaveProfile, config: RunConfig) -> WaveProfile:
    """Map a profile solved at |gamma| back to gamma < 0 via phi -> -phi."""
    if config.gamma >= 0:
        return profile
    meta = dict(profile.meta, phi_flipped=True, gamma_input=config.gamma)
    return replace(profile, g=-profile.g - 2.0 * math.pi, gp=-profile.gp, meta=meta)


def _versions() -> Dict[str, str]:
    return {
        "sgwaves": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _execute(command: str, overrides: Dict[str, Any], body: Callable[..., Dict[str, Any]]):
    """Validate the merged config, run `body(config, storage)` and write the manifest."""
    started = time.perf_counter()
    try:
        config = _config if _config is not None else RunConfig()
        config.update({k: v for k, v in overrides.items() if v is not None})
        config.command = command
        config.validate()
        _, flipped = normalize_forcing(config.gamma)
        if flipped:
            logger.info(f"gamma={config.gamma} < 0: solving at |gamma| and mapping phi -> -phi")
        storage = init_storage(config)
        results = body(config, storage)
        manifest = {
            "command": command,
            "config": config.to_dict(),
            "versions": _versions(),
            "results": results.get("results", {}),
            "artifacts": [str(p) for p in results.get("artifacts", [])],
            "evidence_grade": results.get("evidence_grade", False),
            "forcing_flipped": flipped,
            "elapsed_seconds": time.perf_counter() - started,
        }
        storage.write_manifest(config.output.name or command, manifest)
    except (ParameterError, ConfigError) as e:
        _fail(EXIT_INVALID, str(e))
    except SolverError as e:
        _fail(EXIT_SOLVER, f"{type(e).__name__}: {e}")
    except OSError as e:
        _fail(1, str(e))
    typer.echo(json.dumps(to_jsonable(results.get("results", {})), indent=2))
    logger.success(f"{command} finished in {time.perf_counter() - started:.2f}s")
    show_dry_run_summary()


# Typer CLI app
app = typer.Typer(help="Travelling-wave solver suite for the damped, driven sine-Gordon equation")

GAMMA = typer.Option(None, "--gamma", "-g", help="Constant forcing gamma, |gamma| < 1")
ALPHA = typer.Option(None, "--alpha", "-a", help="Dissipation alpha >= 0")


@app.callback()
def main(
    config: Optional[str] = typer.Option(
        None,
        "--config",
        "-c",
        help="Path to configuration file (default: ~/.config/sg-waves/config.yaml)",
    ),
    output_dir: Optional[str] = typer.Option(
        None, "--output-dir", "-o", help="Artifact directory (default: $SGWAVES_OUTPUT_DIR)"
    ),
    fmt: Optional[str] = typer.Option(None, "--format", "-f", help="Output format: csv or json"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose logging"),
    dry_run: bool = typer.Option(
        False, "--dryrun", "-n", help="Run the solvers without writing artifacts"
    ),
):
    """Travelling waves of phi_tt - phi_xx + sin(phi) + alpha phi_t + gamma = 0."""
    global _config, _dry_run
    _dry_run = dry_run
    setup_logging("DEBUG" if verbose else "INFO")
    try:
        _config = load_config(config_file=config, output_dir=output_dir, fmt=fmt)
    except ConfigError as e:
        _fail(EXIT_INVALID, str(e))

    setup_logging("DEBUG" if verbose else _config.log_level, _config.log_file)

    if verbose:
        logger.debug("Verbose logging enabled")

    if _dry_run:
        logger.info("DRY-RUN MODE: No files will be written")


@app.command(name="equilibria")
def equilibria_command(
    gamma: Optional[float] = GAMMA,
    alpha: Optional[float] = ALPHA,
    k: Optional[int] = typer.Option(None, "--k", "-k", help="Index of the potential well"),
):
    """Extrema of the tilted potential and the constant solutions."""

    def body(config: RunConfig, storage: ArtifactStorage):
        eq = equilibria(config.params, config.k)
        phi_s, phi_u = constant_solutions(config.params.gamma, config.k)
        row = {
            "g_min": eq.g_min,
            "g_max": eq.g_max,
            "u_min": eq.u_min,
            "u_max": eq.u_max,
            "k": eq.k,
            "phi_stable": phi_s,
            "phi_unstable": phi_u,
        }
        path = storage.write_table(config.output.name or "equilibria", [row])
        return {"results": row, "artifacts": [path]}

    _execute("equilibria", {"gamma": gamma, "alpha": alpha, "k": k}, body)


def _kink(config: RunConfig) -> WaveProfile:
    params = config.params
    if params.gamma == 0.0:
        return kink_profile(velocity=config.pde.velocity)
    _, profile = find_kink_mu(params, tol=config.shoot.tol, **_kink_options(config))
    return profile


@app.command(name="kink-mu")
def kink_mu_command(
    gamma: Optional[float] = GAMMA,
    alpha: Optional[float] = ALPHA,
    tol: Optional[float] = typer.Option(None, "--tol", help="Bisection width in mu"),
):
    """Viscosity mu_hat and speed v_hat of the perturbed kink."""

    def body(config: RunConfig, storage: ArtifactStorage):
        params = config.params
        mu_hat, profile = find_kink_mu(params, tol=config.shoot.tol, **_kink_options(config))
        results = {
            "mu_hat": mu_hat,
            "v_hat": profile.v,
            "degenerate": profile.meta["degenerate"],
            "v_inf": asymptotic_velocity(params),
            "iterations": profile.meta["iterations"],
            "bracket": profile.meta["bracket"],
            "energy_audit": profile.meta["energy_audit"],
        }
        path = storage.write_json(config.output.name or "kink-mu", results)
        return {"results": results, "artifacts": [path]}

    _execute("kink-mu", {"gamma": gamma, "alpha": alpha, "shoot.tol": tol}, body)


@app.command(name="kink-profile")
def kink_profile_command(
    gamma: Optional[float] = GAMMA,
    alpha: Optional[float] = ALPHA,
    antikink: bool = typer.Option(False, "--antikink", help="Emit the reflected antikink"),
):
    """Sampled kink (or antikink) profile; at gamma = 0 the closed form with a free speed."""

    def body(config: RunConfig, storage: ArtifactStorage):
        profile = _kink(config)
        if antikink:
            profile = profile.reflect()
        profile = _flip(profile, config)
        path = storage.write_profile(profile, config.output.name or "kink-profile")
        results = {"kind": profile.kind, "mu": profile.mu, "v": profile.v, "samples": len(profile)}
        return {"results": results, "artifacts": [path]}

    _execute("kink-profile", {"gamma": gamma, "alpha": alpha}, body)


def _array(config: RunConfig):
    params = config.params
    gp0 = config.array.gp0
    if config.array.period is not None:
        gp0 = period_to_speed(params, config.array.period, **_array_options(config))
    mu, Xi, profile = find_array_mu(params, gp0, **_array_options(config))
    return gp0, mu, Xi, profile


@app.command(name="array")
def array_command(
    gamma: Optional[float] = GAMMA,
    alpha: Optional[float] = ALPHA,
    gp0: Optional[float] = typer.Option(None, "--gp0", help="Speed g' at the saddle g_{-1}^M"),
    period: Optional[float] = typer.Option(None, "--period", help="Target period Xi (solves for gp0)"),
    m: Optional[int] = typer.Option(None, "--m", help="Periods per circle"),
):
    """Soliton-array profile, its viscosity mu_check and period Xi."""

    def body(config: RunConfig, storage: ArtifactStorage):
        gp0_used, mu, Xi, profile = _array(config)
        error = array_periodicity_error(
            config.params, mu, gp0_used, Xi, tolerances=_tolerances(config)
        )
        path = storage.write_profile(_flip(profile, config), config.output.name or "array")
        results = {
            "gp0": gp0_used,
            "mu_check": mu,
            "Xi": Xi,
            "v": profile.v,
            "circumference": profile.circumference(config.array.m),
            "periodicity_error": error,
        }
        return {"results": results, "artifacts": [path]}

    _execute(
        "array",
        {"gamma": gamma, "alpha": alpha, "array.gp0": gp0, "array.period": period, "array.m": m},
        body,
    )


@app.command(name="half-array")
def half_array_command(
    gamma: Optional[float] = GAMMA,
    alpha: Optional[float] = ALPHA,
    gp0: Optional[float] = typer.Option(None, "--gp0", help="Speed of the target array"),
    horizon: Optional[float] = typer.Option(None, "--horizon", help="Integration length in xi"),
):
    """Saddle launch approaching a soliton array; the distance to the array is measured."""

    def body(config: RunConfig, storage: ArtifactStorage):
        profile = half_array_profile(
            config.params,
            config.array.gp0,
            horizon=config.array.horizon,
            delta=config.shoot.delta,
            tolerances=_tolerances(config),
            tol=config.array.tol,
        )
        path = storage.write_profile(_flip(profile, config), config.output.name or "half-array")
        results = {
            "mu": profile.mu,
            "Xi": profile.Xi,
            "captured": profile.meta["captured"],
            "final_distance": profile.meta["final_distance"],
            "tail_decreasing": profile.meta["tail_decreasing"],
            "winding": profile.winding,
        }
        return {"results": results, "artifacts": [path], "evidence_grade": True}

    _execute(
        "half-array",
        {"gamma": gamma, "alpha": alpha, "array.gp0": gp0, "array.horizon": horizon},
        body,
    )


def _pair(config: RunConfig) -> WaveProfile:
    profile = bounded_pair_profile(config.params.gamma, config.pair.samples)
    if config.pair.velocity is not None:
        profile = replace(profile, v=config.pair.velocity)
    return profile


@app.command(name="pair")
def pair_command(
    gamma: Optional[float] = GAMMA,
    samples: Optional[int] = typer.Option(None, "--samples", help="Number of profile samples"),
    velocity: Optional[float] = typer.Option(
        None, "--velocity", help="Speed assigned to the pair (free by default)"
    ),
):
    """Bounded soliton-antisoliton pair at mu = 0."""

    def body(config: RunConfig, storage: ArtifactStorage):
        profile = _pair(config)
        path = storage.write_profile(_flip(profile, config), config.output.name or "pair")
        results = {
            "turning_point": profile.meta["turning_point"],
            "energy": profile.meta["energy"],
            "half_width": float(profile.xi[-1]),
        }
        return {"results": results, "artifacts": [path]}

    _execute(
        "pair",
        {"gamma": gamma, "pair.samples": samples, "pair.velocity": velocity},
        body,
    )


@app.command(name="periods")
def periods_command(
    gamma: Optional[float] = GAMMA,
    energies: Optional[str] = typer.Option(
        None, "--energies", "-e", help="Comma-separated pendulum energies"
    ),
    method: Optional[str] = typer.Option(None, "--method", help="agm or quadrature"),
):
    """Libration and rotation periods of the pendulum (and of the tilted well when gamma > 0)."""

    def body(config: RunConfig, storage: ArtifactStorage):
        gamma_abs = config.params.gamma
        eq = equilibria(Params(gamma_abs), 0)
        rows: List[Dict[str, Any]] = []
        for e in config.periods.energies:
            orbit = pendulum_orbit(e)
            row: Dict[str, Any] = {"e": e, "regime": orbit.regime, "period": orbit.period}
            if config.periods.method == "quadrature" and orbit.regime != "separatrix" and e > -1:
                solver = libration_period if orbit.regime == "libration" else rotation_period
                row["period"] = solver(e, method="quadrature")
            if gamma_abs > 0:
                inside = eq.u_min < e < eq.u_max
                row["tilted_period"] = tilted_libration_period(gamma_abs, e) if inside else None
            rows.append(row)
        path = storage.write_table(config.output.name or "periods", rows)
        return {"results": {"rows": rows}, "artifacts": [path]}

    _execute(
        "periods",
        {"gamma": gamma, "periods.energies": energies, "periods.method": method},
        body,
    )


def _pde_profile(config: RunConfig) -> WaveProfile:
    choice = config.pde.profile
    params = config.params
    if choice in ("kink", "antikink"):
        profile = _kink(config)
        return profile.reflect() if choice == "antikink" else profile
    if choice == "closed-form":
        return kink_profile(velocity=config.pde.velocity or 0.0)
    if choice == "array":
        return _array(config)[3]
    if choice == "pair":
        return _pair(config)
    return static_profile(params, stable=choice == "static-stable")


def _pde_speed(profile: WaveProfile, velocity: Optional[float]) -> float:
    """Speed used to seed phi_t: the profile's own when fixed, else the requested one."""
    if profile.v is None:
        return 0.0 if velocity is None else velocity
    if velocity is not None and velocity != profile.v:
        raise ParameterError(
            f"{profile.kind} profile already travels at v={profile.v:.12g} (mu={profile.mu:.12g});"
            f" --velocity {velocity} applies only to profiles whose speed is free"
        )
    return profile.v


@app.command(name="pde-run")
def pde_run_command(
    gamma: Optional[float] = GAMMA,
    alpha: Optional[float] = ALPHA,
    profile_kind: Optional[str] = typer.Option(None, "--profile", help="Initial profile kind"),
    dx: Optional[float] = typer.Option(None, "--dx", help="Grid spacing"),
    dt: Optional[float] = typer.Option(None, "--dt", help="Time step (dt <= 0.9 dx)"),
    t_end: Optional[float] = typer.Option(None, "--t-end", help="Final time"),
    domain: Optional[str] = typer.Option(None, "--domain", help="line or circle"),
    x0: Optional[float] = typer.Option(None, "--x0", help="Initial front position"),
    m: Optional[int] = typer.Option(None, "--m", help="Array periods on the circle domain"),
    velocity: Optional[float] = typer.Option(
        None, "--velocity", help="Speed for profiles whose speed is free"
    ),
    transient: Optional[float] = typer.Option(
        None, "--transient", help="Fraction of the run discarded before the velocity fit"
    ),
):
    """Simulate the field equation from a travelling-wave profile and measure its velocity."""

    def body(config: RunConfig, storage: ArtifactStorage):
        pde = config.pde
        params = config.params
        profile = _pde_profile(config)
        speed = _pde_speed(profile, pde.velocity)
        if pde.domain == "circle":
            if profile.kind == "array":
                length = circle_circumference(profile.Xi, speed, pde.m)
                space = Domain.circle(length, pde.m, left=pde.left)
            else:
                space = Domain.circle(pde.right - pde.left, profile.winding, left=pde.left)
        else:
            space = Domain.line(pde.left, pde.right)
        field = init_from_profile(profile, space, pde.dx, x0=pde.x0, velocity=speed)
        if pde.perturb:
            field = perturb(field, pde.perturb, pde.x0 + 2.0)
        name = config.output.name or "pde-run"
        try:
            diagnostics, final = run(
                field,
                params,
                pde.t_end,
                pde.dt,
                cadence=pde.cadence,
                transient=pde.transient,
                profile=profile if profile.kind not in ("pair",) else None,
                velocity=speed,
            )
        except BlowUpError as e:
            if e.diagnostics is not None:
                storage.write_json(f"{name}.diagnostics", e.diagnostics.to_dict())
            raise
        artifacts = [storage.write_json(f"{name}.diagnostics", diagnostics.to_dict())]
        if pde.snapshot:
            artifacts.append(
                storage.write_field(f"{name}.field", final, params, flipped=config.gamma < 0)
            )
        predicted = speed
        measured = diagnostics.velocity
        results = {
            "profile": profile.kind,
            "mu": profile.mu,
            "v_predicted": predicted,
            "v_measured": measured,
            "relative_error": (
                abs(measured - predicted) / abs(predicted)
                if measured is not None and predicted
                else None
            ),
            "fit_residual": diagnostics.fit_residual,
            "final_H": diagnostics.H[-1],
            "max_shape_drift": max(diagnostics.shape_drift) if diagnostics.shape_drift else None,
            "balance_ok": diagnostics.balance_ok,
            "winding_constant": diagnostics.winding_constant,
            "guard_triggered": diagnostics.guard_triggered,
        }
        return {"results": results, "artifacts": artifacts}

    _execute(
        "pde-run",
        {
            "gamma": gamma,
            "alpha": alpha,
            "pde.profile": profile_kind,
            "pde.dx": dx,
            "pde.dt": dt,
            "pde.t_end": t_end,
            "pde.domain": domain,
            "pde.x0": x0,
            "pde.m": m,
            "pde.velocity": velocity,
            "pde.transient": transient,
        },
        body,
    )


@app.command(name="sweep")
def sweep_command(
    gammas: Optional[str] = typer.Option(None, "--gammas", help="Comma-separated gamma values"),
    alphas: Optional[str] = typer.Option(None, "--alphas", help="Comma-separated alpha values"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Worker processes"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Bisection width in mu"),
):
    """mu_hat over a gamma grid with mu_hat / gamma extrapolated to gamma -> 0."""

    def body(config: RunConfig, storage: ArtifactStorage):
        options = _kink_options(config)
        rows = sweep_mu_hat(
            config.sweep.gammas,
            tol=config.shoot.tol,
            alphas=config.sweep.alphas,
            workers=config.sweep.workers,
            **options,
        )
        table = []
        for row in rows:
            entry: Dict[str, Any] = {
                "gamma": row.gamma,
                "mu_hat": row.mu_hat,
                "ratio": row.ratio,
                "iterations": row.iterations,
            }
            for alpha in config.sweep.alphas:
                entry[f"v_hat@{alpha!r}"] = row.velocities.get(alpha)
                entry[f"v_inf@{alpha!r}"] = row.v_inf.get(alpha)
            entry["error"] = row.error
            table.append(entry)
        path = storage.write_table(config.output.name or "sweep", table)
        solved = sum(r.ok for r in rows)
        results: Dict[str, Any] = {"rows": len(rows), "solved": solved}
        if solved >= 2:
            results["ratio_at_zero"] = extrapolate_mu_ratio(rows)
            results["quarter_pi"] = math.pi / 4.0
        return {"results": results, "artifacts": [path]}

    _execute(
        "sweep",
        {
            "sweep.gammas": gammas,
            "sweep.alphas": alphas,
            "sweep.workers": workers,
            "shoot.tol": tol,
        },
        body,
    )


@app.command(name="init-config")
def init_config(
    path: Optional[str] = typer.Option(
        None,
        "--path",
        "-p",
        help="Path to create config file (default: ~/.config/sg-waves/config.yaml)",
    ),
):
    """Initialize a default configuration file."""
    config_path = path or get_default_config_path()

    if os.path.exists(config_path):
        typer.echo(f"Config file already exists: {config_path}")
        raise typer.Exit(1)

    config = create_default_config(config_path)
    typer.echo(f"Created default config at: {config_path}")
    typer.echo(f"  Output directory: {config.output.dir}")
    typer.echo(f"  Output format: {config.output.format}")


if __name__ == "__main__":
    app()
