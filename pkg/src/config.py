"""Run configuration: JSON in, frozen dataclasses out.

Every block is checked before anything is computed. Unknown keys, wrong types
and out-of-range values raise ConfigError naming the offending field.
"""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import dataclasses
import json
import logging
import math
import os
import pathlib
import typing

import numpy as np
import numpy.typing as npt

import src.solver as solver
import src.torus as torus
import src.verify as verify
from src.errors import ConfigError

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

Mode = typing.Literal["verify", "cone-check", "solve"]
MODES: tuple[str, ...] = typing.get_args(Mode)
HessianKind = typing.Literal["discrete", "analytic"]
HESSIAN_KINDS: tuple[str, ...] = typing.get_args(HessianKind)

DEFAULT_SEED = 20260101
DEFAULT_TRIALS = 100_000
MAX_TRIALS = 10_000_000
MAX_DIMENSION = 4
MAX_NODES = 1 << 20
MAX_SUITE_DIMENSION = 10
HERMITIAN_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class ManufacturedConfig:
    """Manufactured solution u* and how alpha_{k-1} is built from it."""

    u_star: torus.FourierSpec
    hessian: str = "discrete"


@dataclasses.dataclass(frozen=True)
class ProblemConfig:
    """The equation on the torus."""

    n: int
    k: int
    N: int  # noqa: N815 grid resolution keeps its usual name
    chi0_matrix: npt.NDArray[np.complex128]
    chi0_potential: torus.FourierSpec
    alpha: tuple[torus.FourierSpec, ...]
    floors: tuple[float, ...] | None = None
    manufactured: ManufacturedConfig | None = None


@dataclasses.dataclass(frozen=True)
class SuiteConfig:
    """Dimension pairs of the verify run and the forced failure hook."""

    dimensions: tuple[tuple[int, int], ...] = verify.DEFAULT_DIMENSIONS
    inject_failure: str | None = None


@dataclasses.dataclass(frozen=True)
class OutputConfig:
    """Where artifacts go: a directory or s3://bucket/prefix."""

    directory: str = "out"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """A complete run."""

    mode: str
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS
    problem: ProblemConfig | None = None
    homotopy: solver.HomotopyPlan = dataclasses.field(default_factory=solver.HomotopyPlan)
    suites: SuiteConfig = dataclasses.field(default_factory=SuiteConfig)
    output: OutputConfig = dataclasses.field(default_factory=OutputConfig)


def _block(data: object, where: str, allowed: typing.Collection[str], required: typing.Collection[str] = ()) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"Unknown keys in {where}: {', '.join(unknown)}")
    missing = sorted(set(required) - set(data))
    if missing:
        raise ConfigError(f"Missing keys in {where}: {', '.join(missing)}")
    return data


def _integer(value: object, where: str, low: int, high: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    if value < low or (high is not None and value > high):
        bound = f"{low}..{high}" if high is not None else f">= {low}"
        raise ConfigError(f"{where}={value} outside {bound}")
    return value


def _number(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ConfigError(f"{where} must be a number")
    result = float(value)
    if not math.isfinite(result):
        raise ConfigError(f"{where} must be finite")
    return result


def _fourier(data: object, where: str) -> torus.FourierSpec:
    if isinstance(data, int | float) and not isinstance(data, bool):
        return torus.FourierSpec(constant=_number(data, where))
    block = _block(data, where, ("constant", "modes"))
    modes_data = block.get("modes", [])
    if not isinstance(modes_data, list):
        raise ConfigError(f"{where}.modes must be a list")
    modes = []
    for index, entry in enumerate(modes_data):
        label = f"{where}.modes[{index}]"
        mode = _block(entry, label, ("wave", "amplitude", "phase"), ("wave", "amplitude"))
        wave = mode["wave"]
        if not isinstance(wave, list) or not wave:
            raise ConfigError(f"{label}.wave must be a non-empty list of integers")
        modes.append(
            torus.FourierMode(
                wave=tuple(_integer(m, f"{label}.wave", -1_000, 1_000) for m in wave),
                amplitude=_number(mode["amplitude"], f"{label}.amplitude"),
                phase=_number(mode.get("phase", 0.0), f"{label}.phase"),
            )
        )
    return torus.FourierSpec(constant=_number(block.get("constant", 0.0), f"{where}.constant"), modes=tuple(modes))


def _real_matrix(data: object, n: int, where: str) -> npt.NDArray[np.float64]:
    if not isinstance(data, list) or len(data) != n:
        raise ConfigError(f"{where} must be an {n}x{n} list of rows")
    rows = []
    for i, row in enumerate(data):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"{where}[{i}] must have {n} entries")
        rows.append([_number(x, f"{where}[{i}]") for x in row])
    return np.array(rows, dtype=np.float64)


def _chi0_matrix(data: object, n: int) -> npt.NDArray[np.complex128]:
    block = _block(data, "problem.chi0.matrix", ("re", "im"), ("re",))
    real = _real_matrix(block["re"], n, "problem.chi0.matrix.re")
    imag = _real_matrix(block["im"], n, "problem.chi0.matrix.im") if "im" in block else np.zeros((n, n))
    matrix = real + 1j * imag
    if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOLERANCE * (1.0 + np.max(np.abs(matrix))):
        raise ConfigError("problem.chi0.matrix is not Hermitian")
    return matrix


def _check_grid(spec: torus.FourierSpec, grid: torus.TorusGrid, where: str) -> None:
    try:
        spec.check(grid)
    except ValueError as error:
        raise ConfigError(f"{where}: {error}") from error


def parse_problem(data: object) -> ProblemConfig:
    """
    Validate the problem block.

    Args:
    ----
        data: The decoded JSON object.

    Returns:
    -------
        The ProblemConfig.

    """
    block = _block(
        data,
        "problem",
        ("n", "k", "N", "chi0", "alpha", "floors", "manufactured"),
        ("n", "k", "N", "chi0", "alpha"),
    )
    n = _integer(block["n"], "problem.n", 2, MAX_DIMENSION)
    k = _integer(block["k"], "problem.k", 2, n)
    points = _integer(block["N"], "problem.N", torus.MIN_POINTS)
    if points % 2:
        raise ConfigError(f"problem.N={points} must be even")
    if points ** (2 * n) > MAX_NODES:
        raise ConfigError(f"problem.N={points} gives more than {MAX_NODES} nodes for n={n}")
    grid = torus.TorusGrid(n, points)

    chi0 = _block(block["chi0"], "problem.chi0", ("matrix", "potential"), ("matrix",))
    matrix = _chi0_matrix(chi0["matrix"], n)
    potential = _fourier(chi0.get("potential", 0.0), "problem.chi0.potential")
    _check_grid(potential, grid, "problem.chi0.potential")

    manufactured = None
    if block.get("manufactured") is not None:
        entry = _block(block["manufactured"], "problem.manufactured", ("u_star", "hessian"), ("u_star",))
        kind = entry.get("hessian", "discrete")
        if kind not in HESSIAN_KINDS:
            raise ConfigError(f"problem.manufactured.hessian must be one of {', '.join(HESSIAN_KINDS)}")
        u_star = _fourier(entry["u_star"], "problem.manufactured.u_star")
        _check_grid(u_star, grid, "problem.manufactured.u_star")
        manufactured = ManufacturedConfig(u_star=u_star, hessian=kind)

    expected = k - 1 if manufactured is not None else k
    raw_alpha = block["alpha"]
    if not isinstance(raw_alpha, list) or len(raw_alpha) != expected:
        raise ConfigError(f"problem.alpha must list {expected} coefficient specs")
    alpha = tuple(_fourier(entry, f"problem.alpha[{l}]") for l, entry in enumerate(raw_alpha))
    for l, spec in enumerate(alpha):  # noqa: E741
        _check_grid(spec, grid, f"problem.alpha[{l}]")

    floors = None
    if block.get("floors") is not None:
        raw_floors = block["floors"]
        if not isinstance(raw_floors, list) or len(raw_floors) != k:
            raise ConfigError(f"problem.floors must list {k} constants")
        floors = tuple(_number(x, f"problem.floors[{l}]") for l, x in enumerate(raw_floors))
        if any(x < 0.0 for x in floors):
            raise ConfigError("problem.floors must be non-negative")

    return ProblemConfig(
        n=n,
        k=k,
        N=points,
        chi0_matrix=matrix,
        chi0_potential=potential,
        alpha=alpha,
        floors=floors,
        manufactured=manufactured,
    )


def _homotopy(data: object) -> solver.HomotopyPlan:
    names = tuple(field.name for field in dataclasses.fields(solver.HomotopyPlan))
    block = _block(data, "homotopy", names)
    values: dict[str, int | float] = {}
    for name, value in block.items():
        default = getattr(solver.HomotopyPlan, name)
        values[name] = _integer(value, f"homotopy.{name}", 0) if isinstance(default, int) else _number(value, f"homotopy.{name}")
    try:
        return solver.HomotopyPlan(**values)
    except ValueError as error:
        raise ConfigError(f"homotopy: {error}") from error


def _suites(data: object) -> SuiteConfig:
    block = _block(data, "suites", ("dimensions", "inject_failure"))
    dimensions = verify.DEFAULT_DIMENSIONS
    if "dimensions" in block:
        raw = block["dimensions"]
        if not isinstance(raw, list):
            raise ConfigError("suites.dimensions must be a list of [n, k] pairs")
        pairs = []
        for index, pair in enumerate(raw):
            if not isinstance(pair, list) or len(pair) != 2:  # noqa: PLR2004
                raise ConfigError(f"suites.dimensions[{index}] must be an [n, k] pair")
            n = _integer(pair[0], f"suites.dimensions[{index}].n", 2, MAX_SUITE_DIMENSION)
            pairs.append((n, _integer(pair[1], f"suites.dimensions[{index}].k", 2, n)))
        dimensions = tuple(pairs)
    inject = block.get("inject_failure")
    if inject is not None and inject not in verify.SUITE_NAMES:
        raise ConfigError(f"suites.inject_failure names no suite: {inject!r}")
    return SuiteConfig(dimensions=dimensions, inject_failure=inject)


def parse_config(data: object) -> RunConfig:
    """
    Validate a decoded configuration document.

    Args:
    ----
        data: The decoded JSON document.

    Returns:
    -------
        The RunConfig.

    Raises:
    ------
        ConfigError: on any schema or range violation.

    """
    block = _block(data, "config", ("mode", "seed", "trials", "problem", "homotopy", "suites", "output"), ("mode",))
    mode = block["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    problem = parse_problem(block["problem"]) if block.get("problem") is not None else None
    if mode != "verify" and problem is None:
        raise ConfigError(f"mode {mode} needs a problem block")
    output = _block(block.get("output", {}), "output", ("directory",))
    directory = output.get("directory", OutputConfig.directory)
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory must be a non-empty string")
    return RunConfig(
        mode=mode,
        seed=_integer(block.get("seed", DEFAULT_SEED), "seed", 0),
        trials=_integer(block.get("trials", DEFAULT_TRIALS), "trials", 0, MAX_TRIALS),
        problem=problem,
        homotopy=_homotopy(block.get("homotopy", {})),
        suites=_suites(block.get("suites", {})),
        output=OutputConfig(directory=directory),
    )


def load_config(path: str | pathlib.Path) -> RunConfig:
    """Read and validate a JSON configuration file."""
    try:
        data = json.loads(pathlib.Path(path).read_text(encoding="utf-8"))
    except OSError as error:
        raise ConfigError(f"Cannot read config {path}: {error}") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"Config {path} is not valid JSON: {error}") from error
    config = parse_config(data)
    LOGGER.debug("Loaded %s config from %s", config.mode, path)
    return config


def with_overrides(
    config: RunConfig,
    seed: int | None = None,
    trials: int | None = None,
    out: str | None = None,
) -> RunConfig:
    """Apply command-line overrides, validated like the file values."""
    changes: dict[str, typing.Any] = {}
    if seed is not None:
        changes["seed"] = _integer(seed, "--seed", 0)
    if trials is not None:
        changes["trials"] = _integer(trials, "--trials", 0, MAX_TRIALS)
    if out is not None:
        if not out:
            raise ConfigError("--out must not be empty")
        changes["output"] = OutputConfig(directory=out)
    return dataclasses.replace(config, **changes)
