"""Experiment manifests and the three reproducible demo runs.

A manifest is a JSON object with ``schema_version`` 1; see
``manifests/README.md`` for the field reference and the calibration notes.
Each run writes ``report.json`` (deterministic), ``summary.txt``,
``timings.json`` and, for per-frequency experiments, ``curves.csv``.
"""

from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .distances import (
    GapCache,
    comparison_check,
    freq_distance,
    perturbed_frequency_ensemble,
    time_distance,
)
from .errors import InvalidArgument
from .lti_core import FrequencyGrid, sample_ensemble

__all__ = [
    "SCHEMA_VERSION",
    "EXPERIMENTS",
    "GridSpec",
    "ExperimentManifest",
    "load_manifest",
    "default_manifest",
    "parse_grid",
    "unit_norm_directions",
    "run_experiment",
    "run_freq_demo",
    "run_time_demo",
    "run_compare_demo",
]

SCHEMA_VERSION = 1
EXPERIMENTS = ("freq-demo", "time-demo", "compare-demo")
CURVE_HEADER = ("omega", "wqq", "c_omega", "lb_omega")


@dataclass(frozen=True)
class GridSpec:
    w_min: float
    w_max: float
    M: int
    spacing: str = "log"

    def __post_init__(self):
        if not (self.w_min > 0 and self.w_max > self.w_min):
            raise InvalidArgument("grid needs 0 < min < max")
        if self.M < 2:
            raise InvalidArgument("grid needs M >= 2")
        if self.spacing not in ("log", "linear"):
            raise InvalidArgument(f"grid spacing must be 'log' or 'linear', got {self.spacing!r}")

    def build(self) -> FrequencyGrid:
        make = FrequencyGrid.log if self.spacing == "log" else FrequencyGrid.linear
        return make(self.w_min, self.w_max, self.M)

    def to_dict(self) -> dict:
        return {"min": self.w_min, "max": self.w_max, "M": self.M, "spacing": self.spacing}

    @classmethod
    def from_dict(cls, d) -> "GridSpec":
        try:
            return cls(float(d["min"]), float(d["max"]), int(d["M"]), str(d.get("spacing", "log")))
        except (KeyError, TypeError, ValueError):
            raise InvalidArgument("grid must be an object with numeric 'min', 'max' and 'M'") from None


def parse_grid(text: str) -> GridSpec:
    """Parse ``min:max:M[:log|linear]``."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise InvalidArgument(f"grid spec {text!r} is not min:max:M[:log|linear]")
    try:
        return GridSpec(float(parts[0]), float(parts[1]), int(parts[2]), parts[3] if len(parts) == 4 else "log")
    except ValueError:
        raise InvalidArgument(f"grid spec {text!r} has non-numeric fields") from None


@dataclass
class ExperimentManifest:
    experiment: str
    seed: int
    q: float
    N: int
    systems: list
    grid: GridSpec | None = None
    perturbation: dict = field(default_factory=dict)
    lipschitz: object = None
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS + ("custom",):
            raise InvalidArgument(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidArgument("seed must be a nonnegative integer")
        if not self.q >= 1:
            raise InvalidArgument("q must be at least 1")
        if not isinstance(self.N, int) or self.N < 1:
            raise InvalidArgument("N must be a positive integer")
        if len(self.systems) != 2:
            raise InvalidArgument("a manifest describes exactly two systems")
        rho = self.perturbation.get("rho")
        if rho is not None and not rho >= 0:
            raise InvalidArgument("perturbation rho must be nonnegative")

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "experiment": self.experiment, "seed": self.seed, "q": self.q, "N": self.N}
        if self.grid is not None:
            out["grid"] = self.grid.to_dict()
        if self.perturbation:
            out["perturbation"] = self.perturbation
        if self.lipschitz is not None:
            out["lipschitz"] = self.lipschitz
        out["systems"] = self.systems
        return out

    @classmethod
    def from_dict(cls, d) -> "ExperimentManifest":
        if not isinstance(d, dict):
            raise InvalidArgument("manifest must be a JSON object")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise InvalidArgument(f"unsupported manifest schema_version {version!r} (expected {SCHEMA_VERSION})")
        try:
            return cls(
                experiment=str(d["experiment"]),
                seed=d["seed"],
                q=float(d.get("q", 1.0)),
                N=d["N"],
                systems=list(d["systems"]),
                grid=GridSpec.from_dict(d["grid"]) if "grid" in d else None,
                perturbation=dict(d.get("perturbation", {})),
                lipschitz=d.get("lipschitz"),
                output=d.get("output"),
            )
        except KeyError as exc:
            raise InvalidArgument(f"manifest is missing field {exc.args[0]!r}") from None

    def with_overrides(self, seed=None, q=None, grid=None, N=None) -> "ExperimentManifest":
        d = copy.deepcopy(self.to_dict())
        if seed is not None:
            d["seed"] = seed
        if q is not None:
            d["q"] = q
        if grid is not None:
            d["grid"] = grid.to_dict()
        if N is not None:
            d["N"] = N
        out = ExperimentManifest.from_dict(d)
        out.output = self.output
        return out


def load_manifest(path) -> ExperimentManifest:
    return ExperimentManifest.from_dict(io.read_json(path))


def default_manifest(experiment: str) -> ExperimentManifest:
    if experiment not in EXPERIMENTS:
        raise InvalidArgument(f"no default manifest for {experiment!r}")
    text = resources.files("sysdist").joinpath("manifests", f"{experiment}.json").read_text(encoding="utf-8")
    return ExperimentManifest.from_dict(json.loads(text))


def unit_norm_directions(seed: int, n: int, d: int, m: int = 1, p: int = 1) -> list:
    """``d`` standard-normal (A, B, C) triples, each matrix scaled to unit spectral norm.

    Draw order per direction: A (n x n), B (n x m), C (p x n), from one
    PCG64 stream.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for _ in range(d):
        triple = (rng.standard_normal((n, n)), rng.standard_normal((n, m)), rng.standard_normal((p, n)))
        out.append(tuple(x / np.linalg.norm(x, 2) for x in triple))
    return out


# ---------------------------------------------------------------------------
# runs


def _fmt(x) -> str:
    return "nan" if x is None or x != x else f"{x:.4f}"


def _finish(out_dir, report: dict, summary: str, timings: dict, curves=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "report.json", report)
    if curves is not None:
        io.write_csv(out / "curves.csv", CURVE_HEADER, curves)
    (out / "summary.txt").write_text(summary + "\n", encoding="utf-8", newline="\n")
    io.write_json(out / "timings.json", timings)


def _ensembles(manifest: ExperimentManifest):
    out = []
    for l, spec in enumerate(manifest.systems):
        ctx = f"systems[{l}]"
        family = io.family_from_dict(spec.get("family"), ctx + ".family")
        param = io.param_from_dict(spec.get("param"), ctx + ".param")
        out.append(sample_ensemble(family, param, manifest.N, manifest.seed + l))
    return out


def run_freq_demo(manifest: ExperimentManifest, out_dir=None) -> dict:
    """Perturbed frequency responses of two nominal plants, distance and bounds."""
    t0 = time.perf_counter()
    if manifest.grid is None:
        raise InvalidArgument("freq-demo manifest needs a grid")
    grid = manifest.grid.build()
    rho = float(manifest.perturbation.get("rho", 0.0))
    plants = [io.model_from_dict(s.get("model"), f"systems[{l}].model") for l, s in enumerate(manifest.systems)]
    fes = [perturbed_frequency_ensemble(p, grid, manifest.N, rho, manifest.seed + l) for l, p in enumerate(plants)]
    t1 = time.perf_counter()
    rep = freq_distance(fes[0], fes[1], manifest.q, manifest.seed)
    t2 = time.perf_counter()
    result = {
        "distance": rep.value,
        "lower_bound": rep.lower_bound,
        "upper_bound": rep.upper_bound,
        "argmax_omega": rep.argmax_omega,
        "bound_details": rep.bound_details,
    }
    report = {"manifest": manifest.to_dict(), "result": result}
    summary = f"d={_fmt(rep.value)} lb={_fmt(rep.lower_bound)} ub={_fmt(rep.upper_bound)}"
    if out_dir is not None:
        _finish(out_dir, report, summary, {"sampling_s": t1 - t0, "distance_s": t2 - t1}, rep.per_frequency)
    return {"report": report, "summary": summary, "distance_report": rep}


def run_time_demo(manifest: ExperimentManifest, out_dir=None, workers=None) -> dict:
    """Sampled plant ensembles, gap-metric distance, nominal gap and bounds."""
    t0 = time.perf_counter()
    e1, e2 = _ensembles(manifest)
    cache = GapCache(e1, e2, workers)
    rep = time_distance(e1, e2, manifest.q, cache, lipschitz=manifest.lipschitz)
    t1 = time.perf_counter()
    mb = rep.bound_details.get("moment_bound")
    result = {
        "nominal_gap": cache.nominal_gap,
        "distance": rep.value,
        "lower_bound": rep.lower_bound,
        "upper_bound": rep.upper_bound,
        "bound_details": rep.bound_details,
    }
    report = {"manifest": manifest.to_dict(), "result": result}
    summary = (
        f"nominal={_fmt(cache.nominal_gap)} dist={_fmt(rep.value)} lb={_fmt(rep.lower_bound)} ub={_fmt(rep.upper_bound)}"
    )
    if mb is not None:
        summary += f" ub_moment={_fmt(mb['raw'])}"
    if out_dir is not None:
        _finish(out_dir, report, summary, {"total_s": t1 - t0})
    return {"report": report, "summary": summary, "distance_report": rep}


def run_compare_demo(manifest: ExperimentManifest, out_dir=None, workers=None) -> dict:
    """Frequency- versus time-domain distance of the same two sampled families."""
    t0 = time.perf_counter()
    if manifest.grid is None:
        raise InvalidArgument("compare-demo manifest needs a grid")
    e1, e2 = _ensembles(manifest)
    cache = GapCache(e1, e2, workers)
    cmp = comparison_check(e1, e2, manifest.grid.build(), manifest.q, cache=cache)
    t1 = time.perf_counter()
    fr, tr = cmp.freq_report, cmp.time_report
    result = {
        "d_freq": cmp.d_freq,
        "d_time": cmp.d_time,
        "nominal_gap": cache.nominal_gap,
        "holds": cmp.holds,
        "tolerance": cmp.tol,
        "freq": {"lower_bound": fr.lower_bound, "upper_bound": fr.upper_bound, "argmax_omega": fr.argmax_omega},
        "time": {"lower_bound": tr.lower_bound, "upper_bound": tr.upper_bound, "bound_details": tr.bound_details},
    }
    report = {"manifest": manifest.to_dict(), "result": result}
    summary = (
        f"d_freq={_fmt(cmp.d_freq)} d_time={_fmt(cmp.d_time)} nominal={_fmt(cache.nominal_gap)} "
        f"holds={'true' if cmp.holds else 'false'}"
    )
    if out_dir is not None:
        _finish(out_dir, report, summary, {"total_s": t1 - t0}, fr.per_frequency)
    return {"report": report, "summary": summary, "comparison": cmp}


_RUNNERS = {"freq-demo": run_freq_demo, "time-demo": run_time_demo, "compare-demo": run_compare_demo}


def run_experiment(manifest: ExperimentManifest, out_dir=None) -> dict:
    try:
        runner = _RUNNERS[manifest.experiment]
    except KeyError:
        raise InvalidArgument(f"experiment {manifest.experiment!r} has no runner") from None
    return runner(manifest, out_dir)
