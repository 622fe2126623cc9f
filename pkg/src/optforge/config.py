"""Harness configuration: one JSON file plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .calibrate import GridParams
from .seed_tasks import SEED_BUNDLE_DIR
from .timing import RunLimits

MiB = 1024 * 1024


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HarnessConfig:
    bundle: str = str(SEED_BUNDLE_DIR)
    tasks: tuple[str, ...] = ()
    out: str = "optforge_out"
    sizes: str | None = None
    # calibration
    target_time: float = 0.1
    log_sweep: int = 16
    refine: int = 8
    calib_instances: int = 10
    calib_seed: int = 1
    calib_runs: int = 5
    calib_warmups: int = 3
    n_max: int = 10**7
    calib_mem_limit_mb: int = 8192
    # evaluation
    repeats: int = 10
    timing_runs: int = 3
    dev_count: int = 100
    test_count: int = 100
    dev_seed_base: int = 0
    test_seed_base: int = 1000
    speedup_mode: str = "ratio_of_sums"
    timeout_multiplier: float = 10.0
    compile_budget: float = 120.0
    mem_limit_mb: int | None = 14 * 1024
    cpu_pinning: tuple[int, ...] | None = None
    # quality checks
    qa_instances: int = 5
    qa_solver_seeds: tuple[int, ...] = (0, 1, 2)
    # agent
    budget: float = 1.0
    backend: str = "scripted"
    backend_params: dict = field(default_factory=dict)
    token_limit: int = 128_000

    def __post_init__(self):
        for name in ("repeats", "timing_runs", "dev_count", "test_count", "calib_instances", "calib_runs",
                     "qa_instances", "log_sweep"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.target_time <= 0:
            raise ConfigError(f"target_time must be positive, got {self.target_time}")
        if self.budget <= 0:
            raise ConfigError(f"budget must be positive, got {self.budget}")
        if self.speedup_mode not in ("ratio_of_sums", "mean_of_ratios"):
            raise ConfigError(f"unknown speedup_mode {self.speedup_mode!r}")
        if self.backend not in ("scripted", "http"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.dev_seed_base + self.dev_count > self.test_seed_base and self.test_seed_base + self.test_count > self.dev_seed_base:
            raise ConfigError("dev and test seed ranges overlap")

    @classmethod
    def load(cls, path: Path | str | None = None, overrides: dict | None = None) -> "HarnessConfig":
        data = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"config {path} must be a JSON object")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in ("tasks", "qa_solver_seeds", "cpu_pinning"):
            if isinstance(data.get(key), list):
                data[key] = tuple(data[key])
        if isinstance(data.get("tasks"), str):
            data["tasks"] = tuple(t for t in data["tasks"].split(",") if t)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **overrides) -> "HarnessConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def limits(self) -> RunLimits:
        return RunLimits(
            per_instance_timeout_multiplier=self.timeout_multiplier,
            compile_budget=self.compile_budget,
            mem_limit=self.mem_limit_mb * MiB if self.mem_limit_mb else None,
            cpu_pinning=self.cpu_pinning,
        )

    def grid_params(self) -> GridParams:
        return GridParams(n_max=self.n_max, log_sweep=self.log_sweep, refine=self.refine,
                          m=self.calib_instances, seed=self.calib_seed, runs=self.calib_runs,
                          warmups=self.calib_warmups, mem_limit=self.calib_mem_limit_mb * MiB)

    def load_sizes(self) -> dict[str, int]:
        if not self.sizes:
            return {}
        try:
            data = json.loads(Path(self.sizes).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read sizes manifest {self.sizes}: {exc}") from exc
        sizes = data.get("sizes", data)
        return {k: int(v) for k, v in sizes.items() if v is not None}
