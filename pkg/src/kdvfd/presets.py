"""Named experiment set-ups, config-file parsing and parallel resolution sweeps."""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .diagnostics import relative_error
from .exact import TwoSolitonParams, l2_singular_init, one_soliton, two_soliton
from .grid import GridFunction
from .scheme import SchemeConfig, Trajectory, run


def _zero(x, t=0.0):
    return np.zeros_like(np.asarray(x, dtype=float))


def _two(x, t):
    return two_soliton(x, t, TwoSolitonParams(0.5, 1.0))


def _l2(x, t=0.0):
    return l2_singular_init(x)


# selector -> f(x, t)
PROFILES: dict = {
    "soliton1": one_soliton,
    "soliton2": _two,
    "l2data": _l2,
    "zero": _zero,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    config: SchemeConfig
    initial: str
    exact: Optional[str] = None
    t0: float = 0.0

    def initial_data(self) -> GridFunction:
        f = PROFILES[self.initial]
        return self.config.sample(lambda x: f(x, self.t0))

    def exact_function(self) -> Optional[Callable]:
        return PROFILES[self.exact] if self.exact else None

    @property
    def t_exact(self) -> float:
        """Physical time of the exact solution matching the end of the run."""
        return self.t0 + self.config.t_end

    def with_config(self, **changes) -> "ExperimentPreset":
        return dataclasses.replace(self, config=dataclasses.replace(self.config, **changes))


_BASE = {
    # initial data w1(., -1); after T = 2 the run is compared with w1(., 1)
    "soliton1": ExperimentPreset(
        "soliton1",
        SchemeConfig(window=(-10.0, 10.0), n_cells=1000, boundary="line", t_end=2.0, dt_rule="courant"),
        initial="soliton1",
        exact="soliton1",
        t0=-1.0,
    ),
    # initial data w2(., -10); after T = 20 the run is compared with w2(., 10)
    "soliton2": ExperimentPreset(
        "soliton2",
        SchemeConfig(window=(-40.0, 60.0), n_cells=4000, boundary="line", t_end=20.0, dt_rule="courant"),
        initial="soliton2",
        exact="soliton2",
        t0=-10.0,
    ),
    "l2data": ExperimentPreset(
        "l2data",
        SchemeConfig(window=(-5.0, 5.0), n_cells=3750, boundary="periodic", t_end=0.5, dt_rule="cfl"),
        initial="l2data",
    ),
}

PRESET_NAMES = tuple(_BASE) + ("custom",)


def preset(name: str, n_cells: Optional[int] = None, **overrides) -> ExperimentPreset:
    if name not in _BASE:
        raise ConfigError(f"preset: unknown preset {name!r}; choose from {sorted(_BASE)} or use a config file")
    p = _BASE[name]
    if n_cells is not None:
        overrides["n_cells"] = n_cells
    return p.with_config(**overrides) if overrides else p


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(SchemeConfig)}
_PRESET_FIELDS = {"preset", "initial_data", "exact", "t0"}


def preset_from_dict(data: dict) -> ExperimentPreset:
    unknown = set(data) - _CONFIG_FIELDS - _PRESET_FIELDS
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
    name = data.get("preset", "custom")
    overrides = {k: data[k] for k in _CONFIG_FIELDS if k in data}
    if "window" in overrides:
        w = overrides["window"]
        if not (isinstance(w, (list, tuple)) and len(w) == 2):
            raise ConfigError(f"window: expected [x_left, x_right], got {w!r}")
    try:
        if name == "custom":
            for key in ("window", "n_cells", "t_end"):
                if key not in overrides:
                    raise ConfigError(f"{key}: required for a custom experiment")
            if "initial_data" not in data:
                raise ConfigError("initial_data: required for a custom experiment")
            base = ExperimentPreset("custom", SchemeConfig(**overrides), initial="zero")
        else:
            base = preset(name, **overrides)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    changes = {}
    if "initial_data" in data:
        if data["initial_data"] not in PROFILES:
            raise ConfigError(f"initial_data: unknown profile {data['initial_data']!r}")
        changes["initial"] = data["initial_data"]
    if "exact" in data:
        if data["exact"] is not None and data["exact"] not in PROFILES:
            raise ConfigError(f"exact: unknown profile {data['exact']!r}")
        changes["exact"] = data["exact"]
    if "t0" in data:
        changes["t0"] = float(data["t0"])
    return dataclasses.replace(base, **changes) if changes else base


def parse_config(path) -> ExperimentPreset:
    """Read a flat JSON object (SchemeConfig field names plus preset selectors)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return preset_from_dict(data)


@dataclass
class RunResult:
    preset: ExperimentPreset
    trajectory: Trajectory
    diagnostics: list
    error_E: Optional[float]


def run_preset(p: ExperimentPreset, oracle: bool = False, observers=()) -> RunResult:
    """Run one experiment; with ``oracle=True`` the numerics are replaced by exact samples."""
    u0 = p.initial_data()
    if oracle:
        f = p.exact_function()
        if f is None:
            raise ValueError(f"preset {p.name!r} has no exact solution for oracle mode")
        traj = Trajectory(times=[0.0, p.config.t_end], snapshots=[u0, p.config.sample(lambda x: f(x, p.t_exact))])
        diags = []
    else:
        traj, diags = run(p.config, u0, observers=observers)
    exact = p.exact_function()
    err = relative_error(traj.final, exact, p.t_exact) if exact is not None else None
    return RunResult(p, traj, diags, err)


def _sweep_one(args):
    p, oracle = args
    res = run_preset(p, oracle=oracle)
    return res.error_E


def max_workers_from_env(default: Optional[int] = None) -> int:
    env = os.environ.get("KDVFD_THREADS")
    if env:
        return max(1, int(env))
    return default or os.cpu_count() or 1


def sweep_errors(p: ExperimentPreset, n_list: Sequence[int], oracle: bool = False, max_workers: Optional[int] = None) -> list:
    """Relative errors of ``p`` at each resolution, runs spread over worker processes."""
    jobs = [(p.with_config(n_cells=int(n), record_every=10**9, check=False), oracle) for n in n_list]
    workers = min(len(jobs), max_workers or max_workers_from_env())
    if workers <= 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_one, jobs))
