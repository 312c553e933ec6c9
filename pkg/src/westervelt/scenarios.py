"""Experiment definitions and the drivers that run them and write artifacts.

Four built-in scenarios: manufactured-solution convergence studies in 1D and
2D, a steepening Gaussian pulse in 1D and a 2D run through a medium with a
spatially varying sound speed. ``custom`` runs a user-chosen initial profile.
"""
from __future__ import annotations

import csv
import json
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import kernels
from .derham import build_complex, reduce_0form, reduce_1form
from .diagnostics import COLUMNS, ErrorReport, Recorder, SpaceTimeError, convergence_orders, vorticity
from .integrator import ForcingSpec, NO_FORCING, SCHEMES, SplitStepper, StepPlan, laplacian_norm_bound, stability_bounds
from .mesh import TensorGrid
from .model import DiscriminantNegative, SolverState, WesterveltParams, build_sound_speed_weights, make_state

TWO_PI = 2.0 * math.pi
SCENARIOS = ("converge-1d", "converge-2d", "gaussian-1d", "medium-2d", "custom")
DT_POLICIES = ("paper", "auto")
PROFILES = ("gaussian", "cosine", "zero")


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    def __init__(self, step: int, cause: BaseException):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step}: {cause}")

    def __reduce__(self):
        return (NumericalFailure, (self.step, self.cause))


class OutputError(OSError):
    pass


# -- configuration -------------------------------------------------------------

@dataclass
class ScenarioConfig:
    scenario: str
    k: float
    b: float
    resolutions: tuple
    domain: tuple
    t_end: float
    dt_policy: str = "paper"
    cfl_safety: float = 0.9
    dt: Optional[float] = None
    scheme: str = "strang"
    output_dir: Optional[str] = None
    snapshot_stride: int = 0
    jobs: int = 1
    integrated_sound_speed: bool = False
    # gaussian pulse and custom-profile parameters
    mu: float = 0.2
    length_scale: float = 10.0
    sigma: float = 0.05
    profile: str = "gaussian"
    medium: bool = False

    @property
    def dim(self) -> int:
        return len(self.domain)

    def validate(self) -> "ScenarioConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"domain must have 1 to 3 axes, got {self.domain!r}")
        if any(not L > 0 for L in self.domain):
            raise ConfigError(f"domain lengths must be positive, got {self.domain!r}")
        if not self.resolutions:
            raise ConfigError("at least one resolution is required")
        if any(int(n) != n or n < 3 for n in self.resolutions):
            raise ConfigError(f"resolutions must be integers >= 3, got {self.resolutions!r}")
        if self.k < 0 or self.b < 0:
            raise ConfigError(f"k and b must be nonnegative (k={self.k}, b={self.b})")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end!r}")
        if self.dt_policy not in DT_POLICIES:
            raise ConfigError(f"dt_policy must be one of {DT_POLICIES}, got {self.dt_policy!r}")
        if self.dt is None and self.dt_policy == "paper" and self.b == 0:
            raise ConfigError("the paper dt formula needs b > 0; use dt_policy=auto or give dt")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.snapshot_stride < 0 or self.jobs < 1:
            raise ConfigError("snapshot_stride must be >= 0 and jobs >= 1")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        fixed_dim = {"converge-1d": 1, "gaussian-1d": 1, "converge-2d": 2, "medium-2d": 2}
        if self.scenario in fixed_dim and self.dim != fixed_dim[self.scenario]:
            raise ConfigError(f"{self.scenario} needs a {fixed_dim[self.scenario]}D domain")
        if self.scenario.startswith("converge"):
            ns = list(self.resolutions)
            if any(b != 2 * a for a, b in zip(ns, ns[1:])):
                raise ConfigError(f"convergence resolutions must double, got {ns}")
        return self


_DEFAULTS = {
    "converge-1d": dict(k=0.2, b=0.01, resolutions=(20, 40, 80, 160, 320), domain=(1.0,), t_end=1.0),
    "converge-2d": dict(k=0.2, b=0.01, resolutions=(20, 40, 80, 160), domain=(1.0, 1.0), t_end=1.0),
    "gaussian-1d": dict(k=0.2, b=0.01, resolutions=(320,), domain=(10.0,), t_end=6.0, snapshot_stride=41),
    # the final time of the medium run is not fixed by the reference setup
    "medium-2d": dict(k=0.2, b=0.001, resolutions=(320,), domain=(1.0, 1.0), t_end=1.0),
    "custom": dict(k=0.0, b=0.0, resolutions=(64,), domain=(1.0,), t_end=1.0, dt_policy="auto"),
}


def default_config(scenario: str, **overrides) -> ScenarioConfig:
    if scenario not in _DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    kw = dict(_DEFAULTS[scenario])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig(scenario=scenario, **kw).validate()


def make_grid(config: ScenarioConfig, n: int) -> TensorGrid:
    return TensorGrid.uniform([n] * config.dim, list(config.domain))


def resolve_dt(config: ScenarioConfig, grid: TensorGrid, params: WesterveltParams, weights=None) -> float:
    if config.dt is not None:
        return float(config.dt)
    if config.dt_policy == "paper":
        # dx^2 / (4b) in 1D, (4b (1/dx^2 + 1/dy^2))^-1 in 2D
        return 1.0 / (config.b * laplacian_norm_bound(grid))
    return config.cfl_safety * stability_bounds(grid, params, weights)["bound"]


# -- exact solutions and initial data ------------------------------------------

@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact fields with the pressure source that makes them solve the model.

    Callables take the coordinate arrays followed by ``t``. ``velocity_primitive``
    gives, per component, an antiderivative along that component's axis so
    the velocity reduces to edge circulations in closed form.
    """

    dim: int
    k: float
    b: float
    pressure: Callable
    velocity: Callable
    velocity_primitive: Callable
    source_p: Callable
    source_p_primitive: Callable

    def source_p_integral(self, *args):
        *x, t0, t1 = args
        return self.source_p_primitive(*x, t1) - self.source_p_primitive(*x, t0)

    @property
    def forcing(self) -> ForcingSpec:
        return ForcingSpec(source_p=self.source_p, source_p_integral=self.source_p_integral)

    def initial_pressure(self, *x):
        return self.pressure(*x, 0.0)

    def initial_velocity(self, *x):
        return self.velocity(*x, 0.0)

    def coefficients(self, grid: TensorGrid, t: float = 0.0):
        p = reduce_0form(grid, lambda *x: self.pressure(*x, t))
        v = reduce_1form(grid, None, antiderivative=list(_split(lambda *x: self.velocity_primitive(*x, t), self.dim)))
        return p, v


def _split(f, dim):
    return [(lambda a: (lambda *x: f(*x)[a]))(a) for a in range(dim)]


def manufactured_1d(k: float = 0.2, b: float = 0.01) -> ManufacturedSolution:
    def pressure(x, t):
        return math.cos(TWO_PI * t) * np.cos(TWO_PI * x)

    def velocity(x, t):
        return (math.sin(TWO_PI * t) * np.sin(TWO_PI * x),)

    def velocity_primitive(x, t):
        return (-math.sin(TWO_PI * t) * np.cos(TWO_PI * x) / TWO_PI,)

    def source_p(x, t):
        cx = np.cos(TWO_PI * x)
        return 4 * math.pi * (b * math.pi + k * math.sin(TWO_PI * t) * cx) * math.cos(TWO_PI * t) * cx

    def source_p_primitive(x, t):
        cx = np.cos(TWO_PI * x)
        s = math.sin(TWO_PI * t)
        return TWO_PI * b * cx * s + k * cx ** 2 * s ** 2

    return ManufacturedSolution(1, k, b, pressure, velocity, velocity_primitive, source_p, source_p_primitive)


def manufactured_2d(k: float = 0.2, b: float = 0.01) -> ManufacturedSolution:
    def pressure(x, y, t):
        return math.cos(TWO_PI * t) * np.cos(TWO_PI * x) * np.cos(TWO_PI * y)

    def velocity(x, y, t):
        s = math.sin(TWO_PI * t)
        return (s * np.sin(TWO_PI * x) * np.cos(TWO_PI * y), s * np.cos(TWO_PI * x) * np.sin(TWO_PI * y))

    def velocity_primitive(x, y, t):
        s = math.sin(TWO_PI * t) / TWO_PI
        return (-s * np.cos(TWO_PI * x) * np.cos(TWO_PI * y), -s * np.cos(TWO_PI * x) * np.cos(TWO_PI * y))

    def source_p(x, y, t):
        c = np.cos(TWO_PI * x) * np.cos(TWO_PI * y)
        return TWO_PI * (4 * b * math.pi * math.cos(TWO_PI * t) + math.sin(TWO_PI * t)
                         + k * c * math.sin(2 * TWO_PI * t)) * c

    def source_p_primitive(x, y, t):
        c = np.cos(TWO_PI * x) * np.cos(TWO_PI * y)
        return (2 * TWO_PI * b * math.sin(TWO_PI * t)) * c - math.cos(TWO_PI * t) * c \
            - 0.5 * k * math.cos(2 * TWO_PI * t) * c ** 2

    return ManufacturedSolution(2, k, b, pressure, velocity, velocity_primitive, source_p, source_p_primitive)


@dataclass(frozen=True)
class InitialData:
    """Initial pressure ``p0(*x)`` and velocity given via per-axis primitives."""

    dim: int
    pressure: Callable
    velocity_primitive: Optional[Callable] = None

    def coefficients(self, grid: TensorGrid):
        p = reduce_0form(grid, self.pressure)
        if self.velocity_primitive is None:
            v = np.zeros(grid.n_dofs(1))
        else:
            v = reduce_1form(grid, None, antiderivative=_split(self.velocity_primitive, self.dim))
        return p, v


def gaussian_1d_initial(mu: float = 0.2, L: float = 10.0, sigma: float = 0.05) -> InitialData:
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma!r}")

    def pressure(x):
        return np.exp(-0.5 * ((x / L - mu) / sigma) ** 2)

    return InitialData(1, pressure)


def medium_sound_speed_sq(x, y):
    s = np.sin
    pi = math.pi
    return (1.0 - 0.75 * s(pi * x) ** 2 * s(pi * y) ** 2
            - 0.5 * s(2 * pi * x) ** 2 * s(2 * pi * y) ** 2
            - 0.25 * s(4 * pi * x) ** 2 * s(4 * pi * y) ** 2)


def medium_initial() -> InitialData:
    def pressure(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def velocity_primitive(x, y):
        # primitives of cos(2pi x)cos(2pi y) in x and sin(2pi x)sin(2pi y) in y
        return (np.sin(TWO_PI * x) * np.cos(TWO_PI * y) / TWO_PI,
                -np.sin(TWO_PI * x) * np.cos(TWO_PI * y) / TWO_PI)

    return InitialData(2, pressure, velocity_primitive)


def medium_2d_scenario(**overrides):
    config = default_config("medium-2d", **overrides)
    params = WesterveltParams(config.k, config.b, medium_sound_speed_sq)
    return config, params, medium_initial()


def _custom_initial(config: ScenarioConfig) -> InitialData:
    if config.profile == "gaussian":
        def pressure(*x):
            r2 = sum(((xa / La - config.mu) / config.sigma) ** 2 for xa, La in zip(x, config.domain))
            return np.exp(-0.5 * r2)
    elif config.profile == "cosine":
        def pressure(*x):
            return np.prod([np.cos(TWO_PI * xa / La) for xa, La in zip(x, config.domain)], axis=0)
    else:
        def pressure(*x):
            return np.zeros(np.broadcast(*x).shape)
    return InitialData(config.dim, pressure)


# -- problem assembly ----------------------------------------------------------

@dataclass
class Problem:
    config: ScenarioConfig
    grid: TensorGrid
    params: WesterveltParams
    weights: object
    state: SolverState
    forcing: ForcingSpec = NO_FORCING
    exact: Optional[Callable] = None
    dt: float = 0.0


def build_problem(config: ScenarioConfig, n: int) -> Problem:
    config.validate()
    grid = make_grid(config, n)
    exact = None
    forcing = NO_FORCING
    c2 = None
    if config.scenario in ("converge-1d", "converge-2d"):
        sol = (manufactured_1d if config.dim == 1 else manufactured_2d)(config.k, config.b)
        p, v = sol.coefficients(grid)
        forcing, exact = sol.forcing, sol.pressure
    elif config.scenario == "gaussian-1d":
        p, v = gaussian_1d_initial(config.mu, config.length_scale, config.sigma).coefficients(grid)
    elif config.scenario == "medium-2d":
        c2 = medium_sound_speed_sq
        p, v = medium_initial().coefficients(grid)
    else:
        if config.medium:
            if config.dim != 2:
                raise ConfigError("the variable-sound-speed medium is defined in 2D only")
            c2 = medium_sound_speed_sq
        p, v = _custom_initial(config).coefficients(grid)
    params = WesterveltParams(config.k, config.b, c2)
    weights = build_sound_speed_weights(grid, params, integrated=config.integrated_sound_speed)
    state = make_state(0.0, p, v, params, grid.cell_volume)
    dt = resolve_dt(config, grid, params, weights)
    return Problem(config, grid, params, weights, state, forcing, exact, dt)


# -- running -------------------------------------------------------------------

@dataclass
class RunResult:
    n: int
    dt: float
    n_steps: int
    state: SolverState
    series: object
    error: Optional[ErrorReport] = None
    output_dir: Optional[str] = None
    nonlinear_solves: int = 0


def simulate(problem: Problem, out_dir: Optional[Path] = None) -> RunResult:
    """Integrate one problem, recording diagnostics and optional snapshots."""
    cfg, grid = problem.config, problem.grid
    cplx = build_complex(grid)
    stepper = SplitStepper(cplx, problem.params, problem.forcing, problem.weights)
    plan = StepPlan(problem.dt, cfg.t_end, cfg.scheme, cfg.cfl_safety)
    recorder = Recorder(cplx, problem.params, problem.weights)
    acc = SpaceTimeError(grid.cell_volume) if problem.exact is not None else None
    coords = grid.node_coords()
    snap_dir = None
    if out_dir is not None:
        snap_dir = out_dir / "snapshots"
        _mkdir(snap_dir)

    def observe(step, state):
        recorder.record(state, stepper.nonlinear_solves)
        if acc is not None:
            acc.add(state.t, state.p, np.broadcast_to(problem.exact(*coords, state.t), (grid.n_nodes,)))
        if snap_dir is not None:
            last = step == plan.n_steps
            if step == 0 or last or (cfg.snapshot_stride and step % cfg.snapshot_stride == 0):
                write_state_snapshot(snap_dir / f"state_{step:06d}.csv", grid, state)
                if grid.dim == 2:
                    write_vorticity_snapshot(snap_dir / f"vorticity_{step:06d}.csv", grid, vorticity(state.v, cplx))

    observe(0, problem.state)
    done = [0]

    def on_step(step, state):
        done[0] = step
        observe(step, state)

    try:
        final = stepper.run(problem.state, plan, on_step)
    except (DiscriminantNegative, FloatingPointError) as exc:
        raise NumericalFailure(done[0] + 1, exc) from exc
    error = acc.report() if acc is not None else None
    result = RunResult(grid.shape[0], problem.dt, plan.n_steps, final, recorder.series, error,
                       str(out_dir) if out_dir is not None else None, stepper.nonlinear_solves)
    if out_dir is not None:
        write_timeseries(out_dir / "timeseries.csv", recorder.series)
        if error is not None:
            _write_text(out_dir / "errors.json", json.dumps(asdict(error), indent=2) + "\n")
    return result


def run_scenario(config: ScenarioConfig, n: Optional[int] = None) -> RunResult:
    """Run one resolution (the first listed by default) and write its artifacts."""
    config.validate()
    n = config.resolutions[0] if n is None else n
    problem = build_problem(config, n)
    out = Path(config.output_dir) if config.output_dir else None
    if out is not None:
        _mkdir(out)
        write_manifest(out / "run_manifest.json", problem)
    return simulate(problem, out)


def _run_one(config: ScenarioConfig, n: int) -> RunResult:
    sub = replace(config, output_dir=str(Path(config.output_dir) / f"n{n:04d}") if config.output_dir else None)
    result = run_scenario(sub, n)
    # keep the payload small when returned from a worker process
    result.series = None
    result.state = None
    return result


@dataclass
class ConvergenceTable:
    resolutions: list
    dts: list
    errors: list
    orders_l2: list = field(default_factory=list)
    orders_linf: list = field(default_factory=list)
    complete: bool = True

    def rows(self):
        for i, (n, dt, e) in enumerate(zip(self.resolutions, self.dts, self.errors)):
            o2 = self.orders_l2[i - 1] if i > 0 and i - 1 < len(self.orders_l2) else None
            oi = self.orders_linf[i - 1] if i > 0 and i - 1 < len(self.orders_linf) else None
            yield n, dt, e.rel_l2, o2, e.rel_linf, oi

    def as_text(self, dim: int = 1) -> str:
        head = ("N", "dt", "L2 error", "order", "Linf error", "order")
        lines = [head]
        for n, dt, l2, o2, li, oi in self.rows():
            label = "x".join([str(n)] * dim)
            lines.append((label, f"{dt:.6g}", f"{l2:.4g}", "" if o2 is None else f"{o2:.3f}",
                          f"{li:.4g}", "" if oi is None else f"{oi:.3f}"))
        widths = [max(len(r[c]) for r in lines) for c in range(len(head))]
        out = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in lines]
        if not self.complete:
            out.append("(incomplete: a run failed)")
        return "\n".join(out) + "\n"


def run_convergence_study(config: ScenarioConfig) -> ConvergenceTable:
    """Run every resolution, then tabulate errors and observed orders.

    Resolutions run in parallel when ``config.jobs > 1``. If a run fails the
    table of the runs that finished is still written before re-raising.
    """
    config.validate()
    if not config.scenario.startswith("converge"):
        raise ConfigError(f"{config.scenario} has no exact solution to converge against")
    ns = list(config.resolutions)
    results, failure = {}, None
    if config.jobs > 1 and len(ns) > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(ns))) as pool:
            futures = {n: pool.submit(_run_one, config, n) for n in ns}
            for n, fut in futures.items():
                try:
                    results[n] = fut.result()
                except Exception as exc:  # keep the finished rows
                    failure = failure or exc
    else:
        for n in ns:
            try:
                results[n] = _run_one(config, n)
            except Exception as exc:
                failure = exc
                break
    done = [n for n in ns if n in results]
    # the table stays contiguous from the coarsest grid
    contiguous = []
    for n in ns:
        if n not in results:
            break
        contiguous.append(n)
    errs = [results[n].error for n in contiguous]
    table = ConvergenceTable(contiguous, [results[n].dt for n in contiguous], errs,
                             complete=failure is None and len(done) == len(ns))
    if len(errs) >= 2:
        table.orders_l2 = convergence_orders([e.rel_l2 for e in errs])
        table.orders_linf = convergence_orders([e.rel_linf for e in errs])
    if config.output_dir:
        out = Path(config.output_dir)
        _mkdir(out)
        write_convergence(out, table, config)
    if failure is not None:
        raise failure
    return table


# -- serialization -------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def _mkdir(path: Path):
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create directory {path}: {exc.strerror or exc}") from exc


def _open(path: Path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_text(path: Path, text: str):
    with _open(path) as fh:
        fh.write(text)


def write_timeseries(path: Path, series) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t",) + COLUMNS)
        for row in series.rows():
            *vals, solves = row
            w.writerow([_fmt(v) for v in vals] + [int(solves)])


def read_timeseries(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(head)}


def _index_columns(grid: TensorGrid):
    idx = np.indices(grid.shape).reshape(grid.dim, -1)
    coords = grid.node_coords()
    names = ["i_x", "i_y", "i_z"][: grid.dim] + ["x", "y", "z"][: grid.dim]
    return names, list(idx) + list(coords)


def write_state_snapshot(path: Path, grid: TensorGrid, state: SolverState) -> None:
    """Nodal p and rho plus one column per velocity component (edge starting at the node)."""
    names, cols = _index_columns(grid)
    comps = np.split(state.v, grid.dim)
    labels = ["v_x", "v_y", "v_z"][: grid.dim]
    with _open(path) as fh:
        fh.write(f"# t={_fmt(state.t)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["p", "rho"] + labels)
        for r in range(grid.n_nodes):
            ints = [int(c[r]) for c in cols[: grid.dim]]
            reals = [_fmt(c[r]) for c in cols[grid.dim:]]
            w.writerow(ints + reals + [_fmt(state.p[r]), _fmt(state.rho[r])] + [_fmt(c[r]) for c in comps])


def write_vorticity_snapshot(path: Path, grid: TensorGrid, omega) -> None:
    """Face coefficients of ``C v``; coordinates are the lower-left node of each cell."""
    names, cols = _index_columns(grid)
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["value"])
        for r in range(grid.n_nodes):
            w.writerow([int(c[r]) for c in cols[: grid.dim]] + [_fmt(c[r]) for c in cols[grid.dim:]] + [_fmt(omega[r])])


def read_snapshot(path) -> dict:
    """Columns of a snapshot file keyed by header name; ``t`` when recorded."""
    out = {}
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith("# t="):
            out["t"] = float(first[4:])
        else:
            fh.seek(0)
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    for i, name in enumerate(head):
        dtype = np.int64 if name.startswith("i_") else np.float64
        out[name] = np.array([r[i] for r in body], dtype=dtype)
    return out


def version_string() -> str:
    from . import __version__

    here = Path(__file__).resolve().parent
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+g{desc}" if desc else __version__


def config_echo(config: ScenarioConfig) -> dict:
    d = asdict(config)
    d["resolutions"] = list(config.resolutions)
    d["domain"] = list(config.domain)
    return d


def write_manifest(path: Path, problem: Problem) -> None:
    grid = problem.grid
    plan = StepPlan(problem.dt, problem.config.t_end, problem.config.scheme, problem.config.cfl_safety)
    bounds = stability_bounds(grid, problem.params, problem.weights)
    manifest = {
        "config": config_echo(problem.config),
        "resolved": {
            "shape": list(grid.shape),
            "spacings": list(grid.spacings),
            "dt": problem.dt,
            "n_steps": plan.n_steps,
            "dt_over_bound": problem.dt / bounds["bound"],
            "stability": bounds,
        },
        "version": version_string(),
        "kernels": kernels.BACKEND,
    }
    _write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_convergence(out: Path, table: ConvergenceTable, config: ScenarioConfig) -> None:
    with _open(out / "convergence.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n", "dt", "rel_l2", "order_l2", "rel_linf", "order_linf"))
        for n, dt, l2, o2, li, oi in table.rows():
            w.writerow((n, _fmt(dt), _fmt(l2), "" if o2 is None else _fmt(o2), _fmt(li), "" if oi is None else _fmt(oi)))
    _write_text(out / "convergence.txt", table.as_text(config.dim))


def stable_dt_report(config: ScenarioConfig, n: Optional[int] = None) -> dict:
    config.validate()
    n = config.resolutions[0] if n is None else n
    grid = make_grid(config, n)
    c2 = medium_sound_speed_sq if (config.scenario == "medium-2d" or config.medium) else None
    params = WesterveltParams(config.k, config.b, c2)
    weights = build_sound_speed_weights(grid, params, integrated=config.integrated_sound_speed)
    report = dict(stability_bounds(grid, params, weights))
    report["cfl_safety"] = config.cfl_safety
    report["stable_dt"] = config.cfl_safety * report["bound"]
    if config.b > 0:
        report["paper_dt"] = 1.0 / (config.b * report["laplacian_norm_bound"])
    report["n"] = n
    return report

