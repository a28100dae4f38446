"""Mathematical core: quadrature, eddy viscosity, per-element RHS, scalar oracle.

All functions here are pure and single-threaded.  ``assemble_reference`` is the
correctness oracle for the optimized assembly variants: a plain sequential
element loop with no chunking, no reuse tricks, no parallelism.

The assembled operator is Galerkin convection plus diffusion with an effective
viscosity (molecular + eddy); stabilization and pressure terms are out of
scope.  Eddy viscosity follows the algebraic Vreman closure, which vanishes
for quiescent flow and pure shear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import Mesh, ElementGeometry, tet_gradients

# guards the 0/0 in quiescent regions without affecting physical values
DENOM_EPSILON = 1e-30


@dataclass(frozen=True)
class PhysParams:
    """Constant-coefficient physical parameters.

    rho: density (kg/m3), mu: molecular dynamic viscosity (Pa s),
    c_vreman: dimensionless eddy-viscosity constant,
    filter_width_rule: only 'cbrt_volume', the tet edge-scale (6V)^(1/3).
    """

    rho: float = 1.0
    mu: float = 1e-3
    c_vreman: float = 0.07
    filter_width_rule: str = "cbrt_volume"

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.mu < 0.0:
            raise ValueError(f"mu must be non-negative, got {self.mu}")
        if self.c_vreman < 0.0:
            raise ValueError(f"c_vreman must be non-negative, got {self.c_vreman}")
        if self.filter_width_rule != "cbrt_volume":
            raise ValueError(f"unknown filter_width_rule {self.filter_width_rule!r}")


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric 4-point tetrahedron rule in barycentric coordinates.

    points: (4, 4) barycentric coordinates, the permutations of (a, b, b, b);
    weights: (4,) summing to 1.  Volume integrals are
    ``volume * sum_g w_g f(x_g)``.  For linear shape functions the value of
    N_a at a quadrature point is simply the point's a-th barycentric
    coordinate, so ``points`` doubles as the (gauss, node) interpolation table.
    """

    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]


def quadrature_tet4() -> QuadratureRule:
    """The degree-2 rule: a = (5+3*sqrt(5))/20, b = (5-sqrt(5))/20, weights 1/4."""
    a = (5.0 + 3.0 * math.sqrt(5.0)) / 20.0
    b = (5.0 - math.sqrt(5.0)) / 20.0
    points = np.array(
        [
            [a, b, b, b],
            [b, a, b, b],
            [b, b, a, b],
            [b, b, b, a],
        ]
    )
    weights = np.full(4, 0.25)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points=points, weights=weights)


def filter_width(volume: float) -> float:
    """LES filter width of a tet: the edge scale (6 * volume)^(1/3)."""
    return float(np.cbrt(6.0 * volume))


def velocity_gradient(geom: ElementGeometry, u_elem: np.ndarray) -> np.ndarray:
    """Constant velocity gradient G[i][j] = d u_j / d x_i on one element."""
    return geom.grad_n.T @ u_elem


def vreman_viscosity(G: np.ndarray, delta: float, c: float) -> float:
    """Eddy viscosity (m2/s) from the velocity gradient tensor.

    Mathematically: with alpha = G, beta = delta^2 alpha^T alpha and B_beta
    the sum of the three 2x2 principal minors of beta, returns
    c * sqrt(B_beta / (alpha:alpha)), clamped to 0 for quiescent flow
    (alpha:alpha below DENOM_EPSILON) or negative B_beta.

    B_beta is evaluated as delta^4 times the sum of squared 2x2 minors of
    alpha itself (Cauchy-Binet expansion).  The two forms are algebraically
    identical, but the minor form returns exactly 0.0 for every rank-1
    gradient, which the direct beta products cannot guarantee under floating
    point cancellation.
    """
    g = np.asarray(G, dtype=np.float64)
    a00, a01, a02 = g[0, 0], g[0, 1], g[0, 2]
    a10, a11, a12 = g[1, 0], g[1, 1], g[1, 2]
    a20, a21, a22 = g[2, 0], g[2, 1], g[2, 2]
    aa = (
        a00 * a00 + a01 * a01 + a02 * a02
        + a10 * a10 + a11 * a11 + a12 * a12
        + a20 * a20 + a21 * a21 + a22 * a22
    )
    if aa <= DENOM_EPSILON:
        return 0.0
    # squared 2x2 minors of alpha, rows (m,n) x columns (i,j)
    d0 = a00 * a11 - a01 * a10
    d1 = a00 * a21 - a01 * a20
    d2 = a10 * a21 - a11 * a20
    d3 = a00 * a12 - a02 * a10
    d4 = a00 * a22 - a02 * a20
    d5 = a10 * a22 - a12 * a20
    d6 = a01 * a12 - a02 * a11
    d7 = a01 * a22 - a02 * a21
    d8 = a11 * a22 - a12 * a21
    ssq = (
        d0 * d0 + d1 * d1 + d2 * d2
        + d3 * d3 + d4 * d4 + d5 * d5
        + d6 * d6 + d7 * d7 + d8 * d8
    )
    d2_ = delta * delta
    bbeta = d2_ * d2_ * ssq
    if bbeta < 0.0:
        return 0.0
    return c * math.sqrt(bbeta / aa)


def element_rhs(
    geom: ElementGeometry,
    u_elem: np.ndarray,
    params: PhysParams,
    quad: QuadratureRule,
) -> np.ndarray:
    """Local momentum RHS (4, 3) of one element.

    rhs[a][i] = -rho * int N_a (u . grad) u_i dV
                - (mu + rho nu_t) * int grad N_a . grad u_i dV

    The convective velocity is interpolated at each quadrature point; the
    velocity gradient and the eddy viscosity are constant over the element.
    """
    G = velocity_gradient(geom, u_elem)
    nut = vreman_viscosity(G, filter_width(geom.volume), params.c_vreman)
    visc_eff = params.mu + params.rho * nut
    vol = geom.volume

    u_gp = quad.points @ u_elem          # (gauss, 3) interpolated velocity
    conv_gp = u_gp @ G                   # (gauss, i): (u . grad) u_i per point
    wn = quad.points * quad.weights[:, None]
    conv = wn.T @ conv_gp                # (node, i): sum_g w_g N_a(g) conv_i(g)
    diff = geom.grad_n @ G               # (node, i): grad N_a . grad u_i
    return -(params.rho * vol) * conv - (visc_eff * vol) * diff


def assemble_reference(
    mesh: Mesh,
    u: np.ndarray,
    params: PhysParams,
    quad: Optional[QuadratureRule] = None,
) -> np.ndarray:
    """Sequential oracle assembly: gather, element_rhs, scatter-add, in element order."""
    u = validate_velocity(mesh, u)
    if quad is None:
        quad = quadrature_tet4()
    rhs = np.zeros((mesh.n_nodes, 3))
    coords = mesh.coords
    conn = mesh.connectivity
    for e in range(mesh.n_elems):
        n = conn[e]
        grad, volume = tet_gradients(coords[n[0]], coords[n[1]], coords[n[2]], coords[n[3]])
        geom = ElementGeometry(grad_n=grad, volume=volume)
        rhs[n] += element_rhs(geom, u[n], params, quad)
    return rhs


def validate_velocity(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.shape != (mesh.n_nodes, 3):
        raise ValueError(f"velocity must have shape ({mesh.n_nodes}, 3), got {u.shape}")
    if not np.isfinite(u).all():
        raise ValueError("velocity contains non-finite entries")
    return u


# ---------------------------------------------------------------------------
# velocity field initializers (CLI: --init NAME[:ARGS])
# ---------------------------------------------------------------------------

def velocity_zero(mesh: Mesh) -> np.ndarray:
    return np.zeros((mesh.n_nodes, 3))

def velocity_constant(mesh: Mesh, vx: float, vy: float, vz: float) -> np.ndarray:
    return np.tile(np.array([vx, vy, vz], dtype=np.float64), (mesh.n_nodes, 1))

def velocity_shear(mesh: Mesh, gamma: float = 1.0) -> np.ndarray:
    """u = (gamma * y, 0, 0)."""
    u = np.zeros((mesh.n_nodes, 3))
    u[:, 0] = gamma * mesh.coords[:, 1]
    return u

def velocity_taylor_green(mesh: Mesh) -> np.ndarray:
    """Taylor-Green-style vortex; one vortex cell [0, pi]^3 spans the box."""
    lo = mesh.coords.min(axis=0)
    hi = mesh.coords.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    s = np.pi * (mesh.coords - lo) / span
    u = np.zeros((mesh.n_nodes, 3))
    u[:, 0] = np.sin(s[:, 0]) * np.cos(s[:, 1]) * np.cos(s[:, 2])
    u[:, 1] = -np.cos(s[:, 0]) * np.sin(s[:, 1]) * np.cos(s[:, 2])
    return u

def velocity_random(mesh: Mesh, seed: int = 0) -> np.ndarray:
    """Reproducible uniform field in [-1, 1)."""
    rng = np.random.default_rng(int(seed))
    return rng.uniform(-1.0, 1.0, size=(mesh.n_nodes, 3))


INITIALIZERS: dict[str, Callable] = {
    "zero": velocity_zero,
    "constant": velocity_constant,
    "shear": velocity_shear,
    "taylor-green": velocity_taylor_green,
    "random": velocity_random,
}


def make_velocity(mesh: Mesh, spec: str, seed: Optional[int] = None) -> np.ndarray:
    """Build a nodal velocity field from a 'name[:arg,arg,...]' spec string.

    ``random`` takes its seed from the spec argument if present, else from
    ``seed``, else 0.
    """
    name, _, argstr = spec.partition(":")
    name = name.strip()
    if name not in INITIALIZERS:
        known = ", ".join(sorted(INITIALIZERS))
        raise ValueError(f"unknown initializer {name!r} (known: {known})")
    args = [s for s in argstr.replace(",", " ").split()] if argstr else []
    if name == "zero":
        if args:
            raise ValueError("zero takes no arguments")
        return velocity_zero(mesh)
    if name == "constant":
        if len(args) != 3:
            raise ValueError("constant requires vx,vy,vz")
        return velocity_constant(mesh, *(float(a) for a in args))
    if name == "shear":
        if len(args) > 1:
            raise ValueError("shear takes a single gamma")
        return velocity_shear(mesh, float(args[0]) if args else 1.0)
    if name == "taylor-green":
        if args:
            raise ValueError("taylor-green takes no arguments")
        return velocity_taylor_green(mesh)
    # random
    if len(args) > 1:
        raise ValueError("random takes a single seed")
    if args:
        return velocity_random(mesh, int(args[0]))
    return velocity_random(mesh, seed if seed is not None else 0)
