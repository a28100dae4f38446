"""Momentum RHS finite-element assembly on tet meshes, three code shapes deep.

A desk-scale study artifact: the same assembly implemented as a chunked
baseline, a restructured+specialized form, and a privatized scalar loop,
verified against a sequential oracle and analyzed with a roofline and energy
model.
"""

from .mesh import (
    DegenerateElementError,
    ElementGeometry,
    Mesh,
    MeshFormatError,
    MeshStats,
    color_elements,
    element_geometry,
    generate_box_mesh,
    load_mesh,
    mesh_stats,
    save_mesh,
    signed_volumes,
)
from .kernel import (
    PhysParams,
    QuadratureRule,
    assemble_reference,
    element_rhs,
    filter_width,
    make_velocity,
    quadrature_tet4,
    velocity_gradient,
    vreman_viscosity,
)
from .variants import (
    AssemblyResult,
    CounterLedger,
    RunConfig,
    VariantId,
    VariantInfo,
    VARIANT_INFO,
    assemble,
    assemble_baseline,
    assemble_rs,
    assemble_rsp,
    make_ledger,
    verify_variants,
)
from .perfmodel import (
    COUNTER_PRESETS,
    CodePoint,
    MACHINE_PRESETS,
    MachineSpec,
    RooflineReport,
    classify,
    code_intensity,
    energy_estimate,
    machine_balance,
    roofline_csv,
    roofline_dataset,
)

__version__ = "0.1.0"
