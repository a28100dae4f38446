"""Command-line front-end: verify, bench, sweep, roofline, report.

Exit codes: 0 ok, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .harness import BenchRecord, load_records, run_bench, run_sweep, save_records, sweep_csv
from .kernel import PhysParams, make_velocity
from .mesh import Mesh, generate_box_mesh, load_mesh
from .perfmodel import (
    COUNTER_PRESETS,
    CodePoint,
    MACHINE_PRESETS,
    classify,
    code_intensity,
    machine_balance,
    roofline_csv,
    roofline_dataset,
)
from .variants import RunConfig, VariantId, verify_variants

_VARIANT_BY_VALUE = {v.value: v for v in VariantId}


def _add_mesh_args(p: argparse.ArgumentParser, default_box: tuple[int, int, int]) -> None:
    p.add_argument(
        "--box", nargs=3, type=int, metavar=("NX", "NY", "NZ"), default=None,
        help=f"generate a structured box mesh (default {default_box})",
    )
    p.add_argument(
        "--extents", nargs=3, type=float, metavar=("X", "Y", "Z"),
        default=(1.0, 1.0, 1.0), help="box extents in meters (default 1 1 1)",
    )
    p.add_argument("--mesh", metavar="FILE", default=None, help="load a mesh file instead")
    p.add_argument(
        "--init", default="taylor-green", metavar="NAME[:ARGS]",
        help="velocity initializer: zero | constant:vx,vy,vz | shear[:gamma] "
        "| taylor-green | random[:seed] (default taylor-green)",
    )
    p.add_argument("--seed", type=int, default=0, help="seed for --init random (default 0)")
    p.set_defaults(default_box=default_box)


def _add_phys_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=1.0, help="density (default 1.0)")
    p.add_argument("--mu", type=float, default=1e-3, help="molecular viscosity (default 1e-3)")
    p.add_argument(
        "--c-vreman", type=float, default=0.07, dest="c_vreman",
        help="eddy-viscosity constant (default 0.07)",
    )


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--vector-dim", type=int, default=16, help="chunk length (default 16)")
    p.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: TAL_THREADS env var, else 1)",
    )
    p.add_argument("--reps", type=int, default=5, help="timed repetitions (default 5)")
    p.add_argument(
        "--scatter", choices=("private", "colored"), default="private",
        help="race-free scatter strategy of the privatized variant",
    )


def _resolve_threads(value) -> int:
    if value is not None:
        return int(value)
    return int(os.environ.get("TAL_THREADS", "1"))


def _build_mesh(ns) -> tuple[Mesh, tuple[int, int, int] | None, tuple[float, float, float] | None]:
    if ns.mesh is not None and ns.box is not None:
        raise ValueError("--box and --mesh are mutually exclusive")
    if ns.mesh is not None:
        return load_mesh(ns.mesh), None, None
    box = tuple(ns.box) if ns.box is not None else tuple(ns.default_box)
    extents = tuple(ns.extents)
    return generate_box_mesh(*box, extents), box, extents


def _build_cfg(ns) -> RunConfig:
    return RunConfig(
        vector_dim=ns.vector_dim,
        n_threads=_resolve_threads(ns.threads),
        reps=ns.reps,
        scatter=ns.scatter,
    )


def _params(ns) -> PhysParams:
    return PhysParams(rho=ns.rho, mu=ns.mu, c_vreman=ns.c_vreman)


def cmd_verify(ns) -> int:
    mesh, _, _ = _build_mesh(ns)
    u = make_velocity(mesh, ns.init, seed=ns.seed)
    report = verify_variants(mesh, u, _params(ns), _build_cfg(ns), fault_inject=ns.inject_fault)
    print(f"oracle comparison on {mesh.n_elems} elements, tolerance {report.tolerance:g} "
          f"relative (denominator {report.denominator:.6g})")
    print(f"{'variant':<10} {'max abs diff':>14} {'rel diff':>12} {'worst node':>11}  status")
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        note = f"  [{c.note}]" if c.note else ""
        print(f"{c.variant.value:<10} {c.max_abs_diff:>14.6e} {c.rel_diff:>12.3e} "
              f"{c.worst_node:>11d}  {status}{note}")
    if not report.passed:
        print("verification FAILED", file=sys.stderr)
        return 1
    return 0


def cmd_bench(ns) -> int:
    if ns.reps < 3:
        print(f"warning: reps={ns.reps} < 3, median is unreliable", file=sys.stderr)
    mesh, dims, extents = _build_mesh(ns)
    u = make_velocity(mesh, ns.init, seed=ns.seed)
    variant = _VARIANT_BY_VALUE[ns.variant]
    record, check = run_bench(
        mesh, u, variant, _params(ns), _build_cfg(ns),
        verify=not ns.no_verify, stable_output=ns.stable_output,
        mesh_dims=dims, extents=extents, init=ns.init, seed=ns.seed,
    )
    _print_record(record, check)
    if ns.json:
        save_records([record], ns.json)
        print(f"wrote {ns.json}")
    if check is not None and not check.passed:
        print("verification FAILED", file=sys.stderr)
        return 1
    return 0


def _print_record(r: BenchRecord, check) -> None:
    where = "x".join(map(str, r.mesh_dims)) if r.mesh_dims else "file mesh"
    print(f"variant {r.variant}  mesh {where}  elems {r.n_elems}  nodes {r.n_nodes}")
    print(f"threads {r.n_threads}  vector_dim {r.vector_dim}  scatter {r.scatter}  reps {r.reps}")
    print(f"median {r.median_time:.6g} s  min {r.min_time:.6g}  max {r.max_time:.6g}  "
          f"melems/s {r.melems_per_s:.6g}")
    print(f"checksum sum {r.checksum_sum:.17g}  abs {r.checksum_abs:.17g}")
    led = r.ledger
    print(f"ledger: flops/elem {led.flops_per_elem}  loadstore/elem {led.loadstore_per_elem}  "
          f"doubles/elem {led.intermediate_doubles_per_elem}  arrays {led.intermediate_arrays}  "
          f"dram est {led.bytes_dram_est:g} B/elem")
    if check is not None:
        status = "PASS" if check.passed else "FAIL"
        print(f"verify vs oracle: {status} (rel diff {check.rel_diff:.3e})")


def cmd_sweep(ns) -> int:
    mesh, dims, _ = _build_mesh(ns)
    u = make_velocity(mesh, ns.init, seed=ns.seed)
    threads = [int(t) for t in ns.threads_list.split(",") if t]
    variants = [_VARIANT_BY_VALUE[v.strip()] for v in ns.variants.split(",") if v.strip()]
    base = RunConfig(
        vector_dim=ns.vector_dim, n_threads=1, reps=ns.reps, scatter=ns.scatter
    )
    records = run_sweep(
        mesh, u, variants, threads, _params(ns), base,
        stable_output=ns.stable_output, mesh_dims=dims, init=ns.init,
    )
    text = sweep_csv(records)
    if ns.csv:
        Path(ns.csv).write_text(text)
        print(f"wrote {ns.csv}")
    else:
        print(text, end="")
    return 0


def _bench_point(record: BenchRecord) -> CodePoint:
    measured = None
    if record.melems_per_s > 0.0:
        measured = record.ledger.flops_per_elem * record.melems_per_s / 1e3
    return CodePoint(
        label=record.variant,
        flops_per_elem=float(record.ledger.flops_per_elem),
        bytes_per_elem=record.ledger.bytes_dram_est,
        measured_gflops=measured,
    )


def cmd_roofline(ns) -> int:
    spec = MACHINE_PRESETS[ns.machine]
    if (ns.paper_preset is None) == (not ns.from_bench):
        raise ValueError("choose exactly one of --paper-preset or --from-bench")
    if ns.paper_preset is not None:
        points = list(COUNTER_PRESETS[ns.paper_preset])
    else:
        points = []
        for path in ns.from_bench:
            points.extend(_bench_point(r) for r in load_records(path))
    rows = roofline_dataset(spec, points, extra_roofs=ns.extra_roof)
    text = roofline_csv(rows)
    if ns.csv:
        Path(ns.csv).write_text(text)
        print(f"wrote {ns.csv}")
    else:
        print(text, end="")
    print(f"# machine {spec.name}: balance {machine_balance(spec):.3g} Flop/B "
          f"(bw {spec.mem_bandwidth:g} GB/s, peak {spec.fp_peak:g} GFlop/s)")
    for p in points:
        rep = classify(spec, p)
        util = f"  utilization {rep.utilization:.0%}" if rep.utilization is not None else ""
        print(f"# {p.label}: AI {rep.code_ai:.3g} Flop/B -> {rep.bound} bound, "
              f"attainable {rep.attainable_gflops:.4g} GFlop/s{util}")
    return 0


def cmd_report(ns) -> int:
    records: dict[str, BenchRecord] = {}
    for path in ns.inputs:
        for r in load_records(path):
            records[r.variant] = r
    lines = ["# tet-assembly-lab report", ""]
    base = records.get("b")

    lines.append("## Speedup vs baseline")
    lines.append("")
    lines.append("| variant | median s | melems/s | speedup vs b |")
    lines.append("|---|---|---|---|")
    for v in ("b", "rs", "rsp"):
        r = records.get(v)
        if r is None:
            lines.append(f"| {v} | — | — | — |")
            continue
        if base is not None and base.median_time > 0.0 and r.median_time > 0.0:
            speedup = f"{base.median_time / r.median_time:.2f}x"
        else:
            speedup = "—"
        lines.append(
            f"| {v} | {r.median_time:.6g} | {r.melems_per_s:.6g} | {speedup} |"
        )
    lines.append("")

    lines.append("## Ledger comparison")
    lines.append("")
    lines.append("| variant | flops/elem | flops reduction vs b | loadstore/elem "
                 "| intermediate doubles/elem | chunk arrays | est. DRAM B/elem |")
    lines.append("|---|---|---|---|---|---|---|")
    for v in ("b", "rs", "rsp"):
        r = records.get(v)
        if r is None:
            lines.append(f"| {v} | — | — | — | — | — | — |")
            continue
        led = r.ledger
        if base is not None:
            ratio = f"{base.ledger.flops_per_elem / led.flops_per_elem:.2f}x"
        else:
            ratio = "—"
        lines.append(
            f"| {v} | {led.flops_per_elem} | {ratio} | {led.loadstore_per_elem} "
            f"| {led.intermediate_doubles_per_elem} | {led.intermediate_arrays} "
            f"| {led.bytes_dram_est:g} |"
        )
    lines.append("")

    spec = MACHINE_PRESETS[ns.machine]
    lines.append(f"## Roofline summary ({spec.name})")
    lines.append("")
    lines.append(f"Machine balance: {machine_balance(spec):.3g} Flop/B")
    lines.append("")
    lines.append("| variant | AI Flop/B | bound | attainable GFlop/s | measured GFlop/s |")
    lines.append("|---|---|---|---|---|")
    for v in ("b", "rs", "rsp"):
        r = records.get(v)
        if r is None:
            lines.append(f"| {v} | — | — | — | — |")
            continue
        rep = classify(spec, _bench_point(r))
        measured = f"{r.ledger.flops_per_elem * r.melems_per_s / 1e3:.4g}" \
            if r.melems_per_s > 0.0 else "—"
        lines.append(
            f"| {v} | {rep.code_ai:.3g} | {rep.bound} | {rep.attainable_gflops:.4g} "
            f"| {measured} |"
        )
    text = "\n".join(lines) + "\n"
    if ns.out:
        Path(ns.out).write_text(text)
        print(f"wrote {ns.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tet-assembly-lab",
        description="RHS assembly code-structure lab: verify, benchmark, and analyze",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check every variant against the scalar oracle")
    _add_mesh_args(p, (8, 8, 8))
    _add_phys_args(p)
    _add_run_args(p)
    p.add_argument("--inject-fault", choices=("b", "rs", "rsp"), help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="time one variant (median of reps after a warm-up)")
    _add_mesh_args(p, (32, 32, 32))
    _add_phys_args(p)
    _add_run_args(p)
    p.add_argument("--variant", choices=("b", "rs", "rsp"), required=True)
    p.add_argument("--no-verify", action="store_true", help="skip the oracle comparison")
    p.add_argument("--json", metavar="PATH", help="write the bench record as JSON")
    p.add_argument(
        "--stable-output", action="store_true",
        help="zero timing fields so outputs are bit-reproducible",
    )
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("sweep", help="bench a (variant, threads) grid, emit CSV")
    _add_mesh_args(p, (16, 16, 16))
    _add_phys_args(p)
    _add_run_args(p)
    p.add_argument("--threads-list", default="1,2,4", metavar="T1,T2,...",
                   help="thread counts to sweep (default 1,2,4)")
    p.add_argument("--variants", default="b,rs,rsp", metavar="V1,V2,...",
                   help="variants to sweep (default b,rs,rsp)")
    p.add_argument("--csv", metavar="PATH", help="write CSV here instead of stdout")
    p.add_argument("--stable-output", action="store_true",
                   help="zero timing fields so outputs are bit-reproducible")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("roofline", help="emit roofline CSV from presets or bench records")
    p.add_argument("--machine", choices=sorted(MACHINE_PRESETS), required=True)
    p.add_argument("--paper-preset", choices=sorted(COUNTER_PRESETS),
                   help="bundled reference counter dataset")
    p.add_argument("--from-bench", nargs="+", metavar="JSON", default=[],
                   help="bench record files; one point per benched variant")
    p.add_argument("--extra-roof", type=float, action="append", default=[],
                   metavar="GFLOPS", help="additional flat performance ceiling")
    p.add_argument("--csv", metavar="PATH", help="write CSV here instead of stdout")
    p.set_defaults(fn=cmd_roofline)

    p = sub.add_parser("report", help="markdown summary from bench record files")
    p.add_argument("inputs", nargs="+", metavar="JSON")
    p.add_argument("--machine", choices=sorted(MACHINE_PRESETS),
                   default="icelake-8360y-socket")
    p.add_argument("--out", metavar="PATH", help="write markdown here instead of stdout")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.fn(ns)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
