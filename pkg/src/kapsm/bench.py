"""Detection-latency benchmark harness for the engine's optimization ladder.

For every (dictionary size, batch size) cell the harness builds one synthetic
detection problem, computes a reference output with the baseline stage, and
then times each requested (stage, workers) combination over ``repeats`` runs
of :func:`kapsm.engine.batch_detect` (training and data generation are not
timed).  Median and 95th-percentile latencies are reported, along with a
throughput in realified kernel evaluations per second (each complex detection
is two evaluations).

Correctness gates speed: a configuration's outputs must match the baseline
reference within the engine tolerance (1e-9 relative in 64-bit mode, 1e-4 in
32-bit mode) before any timing is reported.  Matching rows share the
reference output digest as their checksum — floating-point reorderings make
byte-level digests of raw outputs meaningless across stages, so the digest
names the value class, and the tolerance gate is the equality test.  A row
that fails the gate keeps the digest of its own bytes, has its timings
suppressed, and marks the report as failed.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import STAGES, EngineConfig, batch_detect
from .kernels import FilterState, KernelParams

__all__ = ["BenchRow", "BenchReport", "bench_detection", "report_to_csv", "report_to_json"]

CSV_COLUMNS = (
    "stage",
    "dict_size",
    "batch_size",
    "workers",
    "median_us",
    "p95_us",
    "throughput_evals_per_s",
    "checksum",
    "ok",
)


@dataclass(frozen=True)
class BenchRow:
    """Timing for one (stage, dict_size, batch_size, workers) configuration.

    ``median_us``, ``p95_us`` and ``throughput_evals_per_s`` are NaN when the
    checksum gate failed (``ok`` False).
    """

    stage: str
    dict_size: int
    batch_size: int
    workers: int
    median_us: float
    p95_us: float
    throughput_evals_per_s: float
    checksum: str
    ok: bool


@dataclass(frozen=True)
class BenchReport:
    rows: tuple

    @property
    def has_failures(self) -> bool:
        return any(not row.ok for row in self.rows)


def _digest(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()


def _synthetic_problem(dict_size: int, batch_size: int, antennas: int, params: KernelParams,
                       rng: np.random.Generator):
    """A well-conditioned random filter and input batch.

    Vector entries are scaled so typical squared distances sit near
    ``2 sigma_sq`` and the Gaussian terms stay numerically alive.
    """
    dim = 2 * antennas
    scale = np.sqrt(params.sigma_sq / dim)
    atoms = scale * rng.standard_normal((dict_size, dim))
    coeffs = rng.standard_normal(dict_size) / np.sqrt(dict_size)
    theta = rng.standard_normal(dim)
    f = FilterState(theta, atoms, coeffs)
    inputs = scale * (
        rng.standard_normal((batch_size, antennas))
        + 1j * rng.standard_normal((batch_size, antennas))
    )
    return f, inputs


def _max_rel_deviation(out: np.ndarray, ref: np.ndarray) -> float:
    denom = float(np.max(np.abs(ref)))
    if denom == 0.0:
        return float(np.max(np.abs(out - ref), initial=0.0))
    return float(np.max(np.abs(out - ref)) / denom)


def bench_detection(
    dict_sizes: Sequence[int],
    batch_sizes: Sequence[int],
    stages: Sequence[str] = STAGES,
    workers: Sequence[int] = (1,),
    repeats: int = 5,
    seed: int = 0,
    antennas: int = 16,
    params: Optional[KernelParams] = None,
    engine_template: Optional[EngineConfig] = None,
    corrupt_stage: Optional[str] = None,
) -> BenchReport:
    """Time the detection ladder over the given configuration grid.

    ``engine_template`` supplies tile sizes, reduction mode and precision;
    ``corrupt_stage`` is a testing hook that perturbs that stage's outputs
    before the checksum gate, to exercise the correctness-failure path.
    """
    if repeats < 5:
        raise ValueError(f"repeats must be >= 5 for stable medians, got {repeats}")
    for stage in stages:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    if params is None:
        params = KernelParams()
    if engine_template is None:
        engine_template = EngineConfig()
    tol = 1e-4 if engine_template.precision == "f32" else 1e-9

    rows = []
    for dict_size in dict_sizes:
        for batch_size in batch_sizes:
            rng = np.random.default_rng([seed, dict_size, batch_size])
            f, inputs = _synthetic_problem(dict_size, batch_size, antennas, params, rng)
            base_cfg = EngineConfig(
                stage="baseline",
                tile_atoms=engine_template.tile_atoms,
                tile_inputs=engine_template.tile_inputs,
                chunk_dim=engine_template.chunk_dim,
                workers=1,
                deterministic_reduction=True,
                precision=engine_template.precision,
            )
            ref = batch_detect(f, inputs, params, base_cfg)
            ref_digest = _digest(ref)
            for stage in stages:
                for n_workers in workers:
                    cfg = EngineConfig(
                        stage=stage,
                        tile_atoms=engine_template.tile_atoms,
                        tile_inputs=engine_template.tile_inputs,
                        chunk_dim=engine_template.chunk_dim,
                        workers=n_workers,
                        deterministic_reduction=engine_template.deterministic_reduction,
                        precision=engine_template.precision,
                    )
                    out = batch_detect(f, inputs, params, cfg)  # warm-up
                    times = []
                    for _ in range(repeats):
                        t0 = time.perf_counter()
                        out = batch_detect(f, inputs, params, cfg)
                        times.append(time.perf_counter() - t0)
                    if stage == corrupt_stage:
                        out = out + (1.0 + 1.0j)
                    if _max_rel_deviation(out, ref) <= tol:
                        median = float(np.median(times))
                        rows.append(
                            BenchRow(
                                stage,
                                dict_size,
                                batch_size,
                                n_workers,
                                median * 1e6,
                                float(np.percentile(times, 95)) * 1e6,
                                2.0 * batch_size / median,
                                ref_digest,
                                True,
                            )
                        )
                    else:
                        rows.append(
                            BenchRow(
                                stage,
                                dict_size,
                                batch_size,
                                n_workers,
                                float("nan"),
                                float("nan"),
                                float("nan"),
                                _digest(out),
                                False,
                            )
                        )
    return BenchReport(tuple(rows))


def _cell(value):
    if isinstance(value, float):
        return "" if np.isnan(value) else repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def report_to_csv(report: BenchReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        d = asdict(row)
        lines.append(",".join(_cell(d[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def report_to_json(report: BenchReport) -> str:
    rows = []
    for row in report.rows:
        d = asdict(row)
        for key in ("median_us", "p95_us", "throughput_evals_per_s"):
            if np.isnan(d[key]):
                d[key] = None
        rows.append(d)
    return json.dumps({"rows": rows}, indent=2) + "\n"
