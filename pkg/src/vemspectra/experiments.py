"""Experiment configurations and the two convergence studies.

``run_test1`` computes the lowest frequencies of the clamped-bottom unit
square on a sequence of uniform meshes and fits a power law per mode.
``run_test2`` runs the solve/estimate/mark/refine loop on the vessel with
one or more refinement strategies and fits error-vs-DOF slopes.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mesh as meshes
from .adapt import AdaptiveStep, adaptive_loop
from .eig import solve_smallest
from .fitting import ConvergenceFit, FitError, fit_convergence, loglog_slope
from .vem import STABILIZATIONS, Material, assemble

DOMAINS = ("square", "vessel")
FAMILIES = ("trapezoid", "hexagon", "triangle")
REFINEMENTS = ("uniform", "adaptive-vem", "adaptive-fem")
# refinement name -> adaptive-loop strategy
_STRATEGY = {"uniform": "uniform", "adaptive-vem": "vem", "adaptive-fem": "fem"}

THREADS_ENV = "VEM_SPECTRA_THREADS"


class ConfigError(ValueError):
    pass


def max_workers(jobs: int) -> int:
    """Worker count for ``jobs`` independent runs, capped by ``VEM_SPECTRA_THREADS``."""
    cap = os.environ.get(THREADS_ENV)
    if cap is None:
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(cap)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from exc
        if limit < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return max(1, min(jobs, limit))


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    domain: str = "square"
    family: str = "trapezoid"
    refinement: list[str] = field(default_factory=lambda: ["uniform"])
    rho: float = 7.7e3
    young: float = 1.44e11
    poisson: float = 0.35
    num_modes: int = 6
    sizes: list[int] = field(default_factory=lambda: [16, 32, 64, 128])
    max_dofs: int = 25_000
    mark_fraction: float = 0.5
    eta_floor: float = 0.0
    omega_ref: list[float] | None = None
    output_dir: str = "results"
    stabilization: str = "mean"
    dirichlet: str = "bottom"  # vessel only: "bottom" or "outer"
    eig_tol: float = 1e-8
    hex_jitter: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.refinement, str):
            self.refinement = [self.refinement]
        self.refinement = list(self.refinement)
        self.sizes = [int(n) for n in self.sizes]
        if self.omega_ref is not None:
            if isinstance(self.omega_ref, (int, float)):
                self.omega_ref = [self.omega_ref]
            self.omega_ref = [float(v) for v in self.omega_ref]
        self.validate()

    def validate(self) -> None:
        if self.domain not in DOMAINS:
            raise ConfigError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        bad = [r for r in self.refinement if r not in REFINEMENTS]
        if bad or not self.refinement:
            raise ConfigError(f"refinement entries must be in {REFINEMENTS}, got {self.refinement}")
        if self.stabilization not in STABILIZATIONS:
            raise ConfigError(f"stabilization must be one of {STABILIZATIONS}")
        if self.dirichlet not in ("bottom", "outer"):
            raise ConfigError("dirichlet must be 'bottom' or 'outer'")
        if self.num_modes < 1:
            raise ConfigError("num_modes must be positive")
        if not 0 < self.mark_fraction <= 1:
            raise ConfigError("mark_fraction must lie in (0, 1]")
        if self.domain == "square" and not self.sizes:
            raise ConfigError("uniform runs need a nonempty list of mesh sizes")
        if any(n < 1 for n in self.sizes):
            raise ConfigError("mesh sizes must be positive")
        try:
            self.material
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def material(self) -> Material:
        return Material(self.rho, self.young, self.poisson)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        data = dict(data)
        mat = data.pop("material", None)
        if mat is not None:
            data.update({k: mat[k] for k in ("rho", "young", "poisson") if k in mat})
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


def preset(name: str) -> ExperimentConfig:
    """Built-in configurations of the two studies."""
    if name == "test1-trapezoid":
        return ExperimentConfig(name=name, family="trapezoid", stabilization="trace")
    if name == "test1-hexagon":
        return ExperimentConfig(name=name, family="hexagon", stabilization="trace")
    if name == "test2-vessel":
        return ExperimentConfig(
            name=name,
            domain="vessel",
            family="triangle",
            refinement=list(REFINEMENTS),
            rho=1.0,
            young=1.0,
            poisson=0.35,
            num_modes=1,
            sizes=[],
            omega_ref=[0.1538],
            # strongly graded meshes put the residual floor near 1e-8
            eig_tol=1e-7,
        )
    raise ConfigError(f"unknown preset {name!r}")


PRESETS = ("test1-trapezoid", "test1-hexagon", "test2-vessel")


def build_mesh(family: str, n: int, jitter: float = 0.1, seed: int = 0) -> meshes.PolyMesh:
    if family == "trapezoid":
        return meshes.generate_trapezoidal_mesh(n)
    if family == "hexagon":
        return meshes.generate_hexagonal_mesh(n, jitter=jitter, seed=seed)
    if family == "triangle":
        return meshes.generate_triangle_mesh(n)
    raise ConfigError(f"unknown mesh family {family!r}")


# --- Test 1: uniform families on the square ----------------------------


@dataclass
class Test1Result:
    config: ExperimentConfig
    sizes: list[int]
    num_dofs: list[int]
    frequencies: np.ndarray  # (len(sizes), num_modes)
    fits: list[ConvergenceFit | None]

    @property
    def orders(self) -> np.ndarray:
        return np.array([f.order if f else np.nan for f in self.fits])

    @property
    def extrapolated(self) -> np.ndarray:
        return np.array([f.limit if f else np.nan for f in self.fits])


def solve_square(config: ExperimentConfig, n: int):
    """``(num_free_dofs, frequencies)`` on the ``n``-mesh of the configured family."""
    mesh = build_mesh(config.family, n, config.hex_jitter, config.seed)
    system = assemble(mesh, config.material, config.stabilization)
    sol = solve_smallest(
        system.stiffness, system.mass, config.num_modes, tol=config.eig_tol, scale=config.material.rho
    )
    return system.num_free, sol.frequencies


def run_test1(config: ExperimentConfig) -> Test1Result:
    if config.domain != "square":
        raise ConfigError("run_test1 needs the square domain")
    sizes = sorted(set(config.sizes))
    with ThreadPoolExecutor(max_workers(len(sizes))) as pool:
        results = list(pool.map(lambda n: solve_square(config, n), sizes))
    dofs = [r[0] for r in results]
    freqs = np.array([r[1] for r in results])
    fits: list[ConvergenceFit | None] = []
    h = 1.0 / np.array(sizes, dtype=float)
    for i in range(config.num_modes):
        try:
            fits.append(fit_convergence(h, freqs[:, i]))
        except FitError:
            fits.append(None)
    return Test1Result(config, sizes, dofs, freqs, fits)


# --- Test 2: adaptive loops on the vessel -----------------------------


@dataclass
class Test2Run:
    refinement: str
    steps: list[AdaptiveStep]
    slope: float | None
    intercept: float | None

    def rows(self) -> list[dict]:
        return [s.row() for s in self.steps]


@dataclass
class Test2Result:
    config: ExperimentConfig
    runs: list[Test2Run]

    def run(self, refinement: str) -> Test2Run:
        for r in self.runs:
            if r.refinement == refinement:
                return r
        raise KeyError(refinement)


def run_adaptive(config: ExperimentConfig, refinement: str, callback=None) -> Test2Run:
    mesh = meshes.generate_vessel_mesh(config.dirichlet)
    ref = config.omega_ref[0] if config.omega_ref else None
    steps = adaptive_loop(
        mesh,
        config.material,
        strategy=_STRATEGY[refinement],
        max_dofs=config.max_dofs,
        mark_fraction=config.mark_fraction,
        omega_ref=ref,
        eta_floor=config.eta_floor,
        stabilization=config.stabilization,
        eig_tol=config.eig_tol,
        callback=callback,
    )
    slope = icpt = None
    if ref is not None and len(steps) >= 2:
        n = [s.num_dofs for s in steps]
        err = [s.report.error for s in steps]
        if all(e > 0 for e in err):
            slope, icpt = loglog_slope(n, err)
    return Test2Run(refinement, steps, slope, icpt)


def run_test2(config: ExperimentConfig) -> Test2Result:
    if config.domain != "vessel":
        raise ConfigError("run_test2 needs the vessel domain")
    with ThreadPoolExecutor(max_workers(len(config.refinement))) as pool:
        runs = list(pool.map(lambda r: run_adaptive(config, r), config.refinement))
    return Test2Result(config, runs)


def run(config: ExperimentConfig):
    return run_test1(config) if config.domain == "square" else run_test2(config)
