"""Benchmark execution and result records.

Timing protocol: one untimed warm-up run (which also feeds the optional
oracle verification and, for the compiled variant, absorbs JIT cost), then
``reps`` timed runs reported as median/min/max.  The rhs checksum pair (sum
of entries, sum of absolute entries) is a cheap determinism witness.
"""

from __future__ import annotations

import dataclasses
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .kernel import PhysParams
from .mesh import Mesh
from .variants import (
    AssemblyResult,
    CounterLedger,
    RunConfig,
    VariantCheck,
    VariantId,
    assemble,
    oracle_compare,
)

SCHEMA = "tet-assembly-lab/bench-v1"


@dataclass(frozen=True)
class BenchRecord:
    variant: str
    mesh_dims: Optional[tuple[int, int, int]]
    extents: Optional[tuple[float, float, float]]
    n_nodes: int
    n_elems: int
    init: str
    seed: int
    n_threads: int
    vector_dim: int
    scatter: str
    reps: int
    median_time: float
    min_time: float
    max_time: float
    melems_per_s: float
    checksum_sum: float
    checksum_abs: float
    ledger: CounterLedger

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mesh_dims"] = list(self.mesh_dims) if self.mesh_dims else None
        d["extents"] = list(self.extents) if self.extents else None
        return d

    @staticmethod
    def from_dict(d: dict) -> "BenchRecord":
        ledger = CounterLedger(**d["ledger"])
        dims = tuple(d["mesh_dims"]) if d.get("mesh_dims") else None
        ext = tuple(d["extents"]) if d.get("extents") else None
        fields = {
            f.name: d[f.name]
            for f in dataclasses.fields(BenchRecord)
            if f.name not in ("ledger", "mesh_dims", "extents")
        }
        return BenchRecord(mesh_dims=dims, extents=ext, ledger=ledger, **fields)


def run_bench(
    mesh: Mesh,
    u: np.ndarray,
    variant: VariantId,
    params: PhysParams,
    cfg: RunConfig,
    verify: bool = True,
    stable_output: bool = False,
    mesh_dims: Optional[tuple[int, int, int]] = None,
    extents: Optional[tuple[float, float, float]] = None,
    init: str = "",
    seed: int = 0,
) -> tuple[BenchRecord, Optional[VariantCheck]]:
    """Benchmark one variant; returns the record and the oracle check (if run).

    ``stable_output`` zeroes the timing fields so identical inputs rewrite
    output files bit-identically (golden-file testing).
    """
    warm = assemble(variant, mesh, u, params, cfg)
    check = oracle_compare(mesh, u, params, warm.rhs, variant) if verify else None

    times = []
    last: AssemblyResult = warm
    for _ in range(cfg.reps):
        last = assemble(variant, mesh, u, params, cfg)
        times.append(last.wall_time)
    median = statistics.median(times)
    rhs = last.rhs
    melems = mesh.n_elems / median / 1e6 if median > 0.0 else 0.0
    if stable_output:
        median = 0.0
        times = [0.0]
        melems = 0.0
    record = BenchRecord(
        variant=variant.value,
        mesh_dims=mesh_dims,
        extents=extents,
        n_nodes=mesh.n_nodes,
        n_elems=mesh.n_elems,
        init=init,
        seed=seed,
        n_threads=cfg.n_threads,
        vector_dim=cfg.vector_dim,
        scatter=cfg.scatter,
        reps=cfg.reps,
        median_time=median,
        min_time=min(times),
        max_time=max(times),
        melems_per_s=melems,
        checksum_sum=float(rhs.sum()),
        checksum_abs=float(np.abs(rhs).sum()),
        ledger=last.ledger,
    )
    return record, check


def run_sweep(
    mesh: Mesh,
    u: np.ndarray,
    variants: Sequence[VariantId],
    threads: Sequence[int],
    params: PhysParams,
    base_cfg: RunConfig,
    stable_output: bool = False,
    mesh_dims: Optional[tuple[int, int, int]] = None,
    init: str = "",
) -> list[BenchRecord]:
    """One bench record per (variant, thread count); oracle check skipped."""
    if not variants or not threads:
        raise ValueError("sweep needs at least one variant and one thread count")
    records = []
    for variant in variants:
        for t in threads:
            cfg = dataclasses.replace(base_cfg, n_threads=int(t))
            rec, _ = run_bench(
                mesh, u, variant, params, cfg,
                verify=False, stable_output=stable_output,
                mesh_dims=mesh_dims, init=init,
            )
            records.append(rec)
    return records


SWEEP_COLUMNS = (
    "variant", "threads", "n_elems", "reps",
    "median_s", "min_s", "max_s", "melems_per_s", "perfect_melems_per_s",
)


def sweep_csv(records: Sequence[BenchRecord]) -> str:
    """Fixed 9-column CSV; the perfect-scaling reference extrapolates each
    variant's smallest-thread-count rate linearly."""
    base_rate: dict[str, tuple[int, float]] = {}
    for r in records:
        cur = base_rate.get(r.variant)
        if cur is None or r.n_threads < cur[0]:
            base_rate[r.variant] = (r.n_threads, r.melems_per_s)
    lines = [",".join(SWEEP_COLUMNS)]
    for r in records:
        t0, m0 = base_rate[r.variant]
        perfect = m0 * r.n_threads / t0
        lines.append(
            f"{r.variant},{r.n_threads},{r.n_elems},{r.reps},"
            f"{r.median_time:.9g},{r.min_time:.9g},{r.max_time:.9g},"
            f"{r.melems_per_s:.9g},{perfect:.9g}"
        )
    return "\n".join(lines) + "\n"


def save_records(records: Sequence[BenchRecord], path) -> None:
    doc = {"schema": SCHEMA, "records": [r.to_dict() for r in records]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_records(path) -> list[BenchRecord]:
    """Raises ValueError (with the path) on anything that is not a bench file."""
    try:
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
            raise ValueError("missing or unknown schema marker")
        return [BenchRecord.from_dict(d) for d in doc["records"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise ValueError(f"{path}: not a valid bench record file ({err})") from None
