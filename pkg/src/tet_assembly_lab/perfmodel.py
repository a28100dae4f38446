"""Roofline arithmetic, boundedness classification, and energy estimation.

Everything here is analytic: machine characteristics come from bandwidth and
peak numbers, code characteristics from per-element flop and byte counts
(either our own ledgers or the bundled reference datasets), so the whole
analysis pipeline runs with zero measurement.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class MachineSpec:
    """name, memory bandwidth (GB/s), peak FP64 rate (GFlop/s), power (W, optional)."""

    name: str
    mem_bandwidth: float
    fp_peak: float
    power: Optional[float] = None

    def __post_init__(self):
        if not self.mem_bandwidth > 0.0:
            raise ValueError(f"mem_bandwidth must be positive, got {self.mem_bandwidth}")
        if not self.fp_peak > 0.0:
            raise ValueError(f"fp_peak must be positive, got {self.fp_peak}")


@dataclass(frozen=True)
class CodePoint:
    """One kernel variant: flops and bytes per element at a chosen memory level."""

    label: str
    flops_per_elem: float
    bytes_per_elem: float
    measured_gflops: Optional[float] = None

    def __post_init__(self):
        if not self.flops_per_elem > 0.0:
            raise ValueError(f"flops_per_elem must be positive, got {self.flops_per_elem}")
        if not self.bytes_per_elem > 0.0:
            raise ValueError(f"bytes_per_elem must be positive, got {self.bytes_per_elem}")


@dataclass(frozen=True)
class RooflineReport:
    machine_balance: float
    code_ai: float
    bound: str  # 'memory' or 'compute'
    attainable_gflops: float
    utilization: Optional[float] = None


def machine_balance(spec: MachineSpec) -> float:
    """Machine arithmetic intensity (Flop/B): peak rate over bandwidth."""
    return spec.fp_peak / spec.mem_bandwidth


def code_intensity(point: CodePoint) -> float:
    """Code arithmetic intensity (Flop/B)."""
    return point.flops_per_elem / point.bytes_per_elem


def classify(spec: MachineSpec, point: CodePoint) -> RooflineReport:
    """Roofline classification; a point exactly on the knee counts as compute bound."""
    balance = machine_balance(spec)
    ai = code_intensity(point)
    attainable = min(spec.fp_peak, ai * spec.mem_bandwidth)
    utilization = None
    if point.measured_gflops is not None:
        utilization = point.measured_gflops / attainable
    return RooflineReport(
        machine_balance=balance,
        code_ai=ai,
        bound="compute" if ai >= balance else "memory",
        attainable_gflops=attainable,
        utilization=utilization,
    )


def energy_estimate(power: float, time: float) -> float:
    """Energy in joules from average power (W) and duration (s)."""
    if power < 0.0 or time < 0.0:
        raise ValueError("power and time must be non-negative")
    return power * time


@dataclass(frozen=True)
class RooflineRow:
    label: str
    ai: float
    gflops: float
    kind: str  # 'measured', 'attainable', or 'roof'


def roofline_dataset(
    spec: MachineSpec,
    points: Sequence[CodePoint],
    extra_roofs: Iterable[float] = (),
    roof_samples: int = 33,
) -> list[RooflineRow]:
    """Plot-ready rows: one per code point plus roof polylines.

    Code points carry their measured rate when available, the attainable
    rate otherwise.  The machine roof is sampled log-uniformly around the
    point intensities and always includes the knee at the machine balance.
    ``extra_roofs`` adds flat ceilings (e.g. an instruction-mix limit), each
    with its own knee.
    """
    if not points:
        raise ValueError("at least one code point is required")
    rows = []
    ais = []
    for p in points:
        ai = code_intensity(p)
        ais.append(ai)
        if p.measured_gflops is not None:
            rows.append(RooflineRow(p.label, ai, p.measured_gflops, "measured"))
        else:
            rows.append(
                RooflineRow(p.label, ai, min(spec.fp_peak, ai * spec.mem_bandwidth), "attainable")
            )
    balance = machine_balance(spec)
    lo = min(min(ais), balance) / 4.0
    hi = max(max(ais), balance) * 4.0
    grid = set(np.geomspace(lo, hi, roof_samples).tolist())
    grid.add(balance)
    for extra in extra_roofs:
        grid.add(extra / spec.mem_bandwidth)  # that roof's knee
    for ai in sorted(grid):
        rows.append(
            RooflineRow("roof", ai, min(spec.fp_peak, ai * spec.mem_bandwidth), "roof")
        )
        for extra in sorted(extra_roofs):
            rows.append(
                RooflineRow(
                    f"roof-{extra:g}", ai, min(extra, ai * spec.mem_bandwidth), "roof"
                )
            )
    return rows


def roofline_csv(rows: Sequence[RooflineRow]) -> str:
    """CSV encoding: header label,ai_flop_per_byte,gflops,kind."""
    out = io.StringIO()
    out.write("label,ai_flop_per_byte,gflops,kind\n")
    for r in rows:
        out.write(f"{r.label},{r.ai:.6g},{r.gflops:.6g},{r.kind}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# bundled reference datasets (machines and per-element counter tables from
# published single-socket CPU and single-GPU measurements of this kernel
# family), so the analysis pipeline runs with zero measurement
# ---------------------------------------------------------------------------

MACHINE_PRESETS: dict[str, MachineSpec] = {
    "icelake-8360y-socket": MachineSpec(
        name="icelake-8360y-socket", mem_bandwidth=179.0, fp_peak=2705.0
    ),
    "a100-sxm4-40g": MachineSpec(
        name="a100-sxm4-40g", mem_bandwidth=1381.0, fp_peak=9700.0, power=421.0
    ),
}

COUNTER_PRESETS: dict[str, tuple[CodePoint, ...]] = {
    # single-core CPU counters: flops/elem, DRAM bytes/elem, measured GFlop/s
    "cpu-table1": (
        CodePoint("B", 6316.0, 261.0, 13.8),
        CodePoint("RS", 1760.0, 218.0, 11.9),
        CodePoint("RSP", 1249.0, 241.0, 14.2),
    ),
    # GPU counters for five variants, same fields
    "gpu-table2": (
        CodePoint("B", 6293.0, 23331.0, 163.0),
        CodePoint("P", 6148.0, 18721.0, 393.0),
        CodePoint("RS", 1663.0, 1170.0, 829.0),
        CodePoint("RSP", 1391.0, 442.0, 2020.0),
        CodePoint("RSPR", 1333.0, 150.0, 2575.0),
    ),
}
