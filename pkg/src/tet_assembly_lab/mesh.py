"""Tetrahedral meshes: box generation, per-element geometry, coloring, text IO.

Meshes are immutable value objects. All elements must have positive signed
volume under their stored node ordering; the loader re-orients inverted
elements, the generator produces positive elements by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

# Reject only true degeneracies; generated meshes are well-shaped and strict
# shape quality is out of scope.
VOLUME_EPSILON = 1e-300


class MeshFormatError(ValueError):
    """Unparseable mesh file; ``line`` is the 1-based offending line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateElementError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """A linear-tetrahedron mesh.

    coords: (n_nodes, 3) float64 node positions in meters.
    connectivity: (n_elems, 4) int64 node indices, positively oriented.
    colors: optional (n_elems,) int64; elements sharing a node never share
        a color (enables race-free parallel scatter).
    """

    coords: np.ndarray
    connectivity: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        conn = np.ascontiguousarray(self.connectivity, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ValueError(f"coords must have shape (n_nodes, 3), got {coords.shape}")
        if conn.ndim != 2 or conn.shape[1] != 4:
            raise ValueError(f"connectivity must have shape (n_elems, 4), got {conn.shape}")
        if conn.size and (conn.min() < 0 or conn.max() >= coords.shape[0]):
            raise ValueError("connectivity index out of range [0, n_nodes)")
        vols = signed_volumes(coords, conn)
        if vols.size and vols.min() <= 0.0:
            bad = int(np.argmin(vols))
            raise ValueError(
                f"element {bad} has non-positive signed volume {vols[bad]:g}"
            )
        colors = self.colors
        if colors is not None:
            colors = np.ascontiguousarray(colors, dtype=np.int64)
            if colors.shape != (conn.shape[0],):
                raise ValueError("colors must be one index per element")
            _check_coloring(conn, colors)
            colors.setflags(write=False)
        for name, arr in (("coords", coords), ("connectivity", conn), ("colors", colors)):
            if arr is not None:
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_elems(self) -> int:
        return self.connectivity.shape[0]

    @property
    def n_colors(self) -> Optional[int]:
        if self.colors is None:
            return None
        return int(self.colors.max()) + 1 if self.colors.size else 0


@dataclass(frozen=True)
class ElementGeometry:
    """Constant shape-function gradients (4, 3) in 1/m and element volume in m3."""

    grad_n: np.ndarray
    volume: float


@dataclass(frozen=True)
class MeshStats:
    n_nodes: int
    n_elems: int
    total_volume: float
    min_volume: float
    max_volume: float
    n_colors: Optional[int]


def signed_volumes(coords: np.ndarray, connectivity: np.ndarray) -> np.ndarray:
    """Signed volume of every element: det(edge matrix) / 6."""
    if connectivity.shape[0] == 0:
        return np.zeros(0)
    x = coords[connectivity]
    e1 = x[:, 1] - x[:, 0]
    e2 = x[:, 2] - x[:, 0]
    e3 = x[:, 3] - x[:, 0]
    det = (
        e1[:, 0] * (e2[:, 1] * e3[:, 2] - e2[:, 2] * e3[:, 1])
        + e1[:, 1] * (e2[:, 2] * e3[:, 0] - e2[:, 0] * e3[:, 2])
        + e1[:, 2] * (e2[:, 0] * e3[:, 1] - e2[:, 1] * e3[:, 0])
    )
    return det / 6.0


# The six tetrahedra of one hexahedral cell, as axis-permutation paths from
# the cell corner (i,j,k) to the opposite corner (i+1,j+1,k+1).  All six share
# the cell's main diagonal, and the same pattern in every cell keeps faces
# between neighbouring cells conforming.
_KUHN_PERMS: Sequence[tuple[int, int, int]] = (
    (0, 1, 2),
    (0, 2, 1),
    (1, 0, 2),
    (1, 2, 0),
    (2, 0, 1),
    (2, 1, 0),
)


def _perm_parity(p: tuple[int, int, int]) -> int:
    inv = sum(1 for i in range(3) for j in range(i + 1, 3) if p[i] > p[j])
    return inv % 2


def generate_box_mesh(nx: int, ny: int, nz: int, extents=(1.0, 1.0, 1.0)) -> Mesh:
    """Structured box of nx*ny*nz hex cells, each split into 6 tetrahedra.

    Nodes are numbered x-fastest; cell c = i + nx*(j + ny*k) produces elements
    6c..6c+5 following the fixed diagonal split pattern, so connectivity (and
    therefore every downstream counter or timing comparison) is reproducible.
    """
    for name, v in (("nx", nx), ("ny", ny), ("nz", nz)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    nx, ny, nz = int(nx), int(ny), int(nz)
    extents = np.asarray(extents, dtype=np.float64)
    if extents.shape != (3,) or not np.all(extents > 0.0):
        raise ValueError(f"extents must be 3 positive lengths, got {extents!r}")

    xs = np.linspace(0.0, extents[0], nx + 1)
    ys = np.linspace(0.0, extents[1], ny + 1)
    zs = np.linspace(0.0, extents[2], nz + 1)
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    coords = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    # node-index strides per axis
    step = (1, nx + 1, (nx + 1) * (ny + 1))
    kk, jj, ii = np.meshgrid(
        np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij"
    )
    corner = (ii * step[0] + jj * step[1] + kk * step[2]).ravel()

    tets = np.empty((corner.size, 6, 4), dtype=np.int64)
    for t, perm in enumerate(_KUHN_PERMS):
        p1 = corner + step[perm[0]]
        p2 = p1 + step[perm[1]]
        p3 = p2 + step[perm[2]]
        if _perm_parity(perm) == 0:
            tets[:, t, 0], tets[:, t, 1], tets[:, t, 2], tets[:, t, 3] = corner, p1, p2, p3
        else:
            # odd permutation: swap the last two nodes to keep volume positive
            tets[:, t, 0], tets[:, t, 1], tets[:, t, 2], tets[:, t, 3] = corner, p1, p3, p2
    connectivity = tets.reshape(-1, 4)
    return Mesh(coords=coords, connectivity=connectivity)


def tet_gradients(x0, x1, x2, x3) -> tuple[np.ndarray, float]:
    """Shape-function gradients and volume of one tetrahedron.

    With edge vectors e_b = x_b - x0 (columns of E), the gradients of the
    linear shape functions are the rows of E^-1 (reciprocal edge vectors) and
    the corner gradient closes the partition of unity: grad N_0 = -sum(rest).
    """
    e1 = (x1[0] - x0[0], x1[1] - x0[1], x1[2] - x0[2])
    e2 = (x2[0] - x0[0], x2[1] - x0[1], x2[2] - x0[2])
    e3 = (x3[0] - x0[0], x3[1] - x0[1], x3[2] - x0[2])
    c23 = (
        e2[1] * e3[2] - e2[2] * e3[1],
        e2[2] * e3[0] - e2[0] * e3[2],
        e2[0] * e3[1] - e2[1] * e3[0],
    )
    c31 = (
        e3[1] * e1[2] - e3[2] * e1[1],
        e3[2] * e1[0] - e3[0] * e1[2],
        e3[0] * e1[1] - e3[1] * e1[0],
    )
    c12 = (
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    )
    det = e1[0] * c23[0] + e1[1] * c23[1] + e1[2] * c23[2]
    grad = np.empty((4, 3))
    grad[1] = (c23[0] / det, c23[1] / det, c23[2] / det)
    grad[2] = (c31[0] / det, c31[1] / det, c31[2] / det)
    grad[3] = (c12[0] / det, c12[1] / det, c12[2] / det)
    grad[0] = -(grad[1] + grad[2] + grad[3])
    return grad, abs(det) / 6.0


def element_geometry(mesh: Mesh, elem: int) -> ElementGeometry:
    """Geometry of element ``elem``; raises DegenerateElementError on zero volume."""
    if not 0 <= elem < mesh.n_elems:
        raise IndexError(f"element index {elem} out of range [0, {mesh.n_elems})")
    n = mesh.connectivity[elem]
    x = mesh.coords
    grad, volume = tet_gradients(x[n[0]], x[n[1]], x[n[2]], x[n[3]])
    if not volume > VOLUME_EPSILON:
        raise DegenerateElementError(
            f"element {elem} is degenerate (volume {volume:g})"
        )
    return ElementGeometry(grad_n=grad, volume=volume)


def color_elements(mesh: Mesh) -> Mesh:
    """Greedy node-sharing coloring, in element-index order.

    Elements in one color class touch disjoint node sets, so a color class
    can be scattered in parallel without races.  Color count is whatever the
    greedy pass yields; only validity matters.
    """
    n_elems = mesh.n_elems
    colors = np.zeros(n_elems, dtype=np.int64)
    # per-node bitmask of colors already taken by incident elements
    node_used = [0] * mesh.n_nodes
    conn = mesh.connectivity.tolist()
    for e in range(n_elems):
        a, b, c, d = conn[e]
        used = node_used[a] | node_used[b] | node_used[c] | node_used[d]
        free = ~used & (used + 1)  # lowest zero bit
        color = free.bit_length() - 1
        colors[e] = color
        node_used[a] |= free
        node_used[b] |= free
        node_used[c] |= free
        node_used[d] |= free
    return replace(mesh, colors=colors)


def _check_coloring(conn: np.ndarray, colors: np.ndarray) -> None:
    if conn.shape[0] == 0:
        return
    # two elements sharing a node and a color produce a duplicate (node, color)
    # pair; node indices within one element are distinct on any valid mesh
    pairs = conn * (colors.max() + 1) + colors[:, None]
    if np.unique(pairs).size != pairs.size:
        raise ValueError("coloring invalid: elements sharing a node share a color")


def mesh_stats(mesh: Mesh) -> MeshStats:
    vols = signed_volumes(mesh.coords, mesh.connectivity)
    return MeshStats(
        n_nodes=mesh.n_nodes,
        n_elems=mesh.n_elems,
        total_volume=float(vols.sum()),
        min_volume=float(vols.min()) if vols.size else 0.0,
        max_volume=float(vols.max()) if vols.size else 0.0,
        n_colors=mesh.n_colors,
    )


def save_mesh(mesh: Mesh, path) -> None:
    """Write the text format: ``nodes <n>``, n ``x y z`` lines, ``elems <m>``,
    m lines of 4 zero-based node indices.  %.17g preserves float64 exactly."""
    path = Path(path)
    with path.open("w") as f:
        f.write(f"nodes {mesh.n_nodes}\n")
        for x, y, z in mesh.coords:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        f.write(f"elems {mesh.n_elems}\n")
        for a, b, c, d in mesh.connectivity:
            f.write(f"{a} {b} {c} {d}\n")


def load_mesh(path) -> Mesh:
    """Parse the text format; ``#`` starts a comment, blank lines are skipped.

    Inverted elements are re-oriented (last two nodes swapped) with a warning
    so externally authored files satisfy the positive-volume invariant.
    """
    path = Path(path)
    tokens: list[tuple[int, list[str]]] = []
    with path.open() as f:
        for lineno, raw in enumerate(f, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                tokens.append((lineno, text.split()))
    pos = 0

    def take(what: str) -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1][0] if tokens else 1
            raise MeshFormatError(f"unexpected end of file, expected {what}", last)
        item = tokens[pos]
        pos += 1
        return item

    lineno, parts = take("'nodes <n>'")
    if len(parts) != 2 or parts[0] != "nodes":
        raise MeshFormatError(f"expected 'nodes <n>', got {' '.join(parts)!r}", lineno)
    try:
        n_nodes = int(parts[1])
    except ValueError:
        raise MeshFormatError(f"bad node count {parts[1]!r}", lineno) from None

    coords = np.empty((n_nodes, 3))
    for i in range(n_nodes):
        lineno, parts = take("a coordinate line")
        if len(parts) != 3:
            raise MeshFormatError(f"expected 3 coordinates, got {len(parts)}", lineno)
        try:
            coords[i] = [float(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"bad coordinate in {' '.join(parts)!r}", lineno) from None

    lineno, parts = take("'elems <m>'")
    if len(parts) != 2 or parts[0] != "elems":
        raise MeshFormatError(f"expected 'elems <m>', got {' '.join(parts)!r}", lineno)
    try:
        n_elems = int(parts[1])
    except ValueError:
        raise MeshFormatError(f"bad element count {parts[1]!r}", lineno) from None

    conn = np.empty((n_elems, 4), dtype=np.int64)
    for i in range(n_elems):
        lineno, parts = take("an element line")
        if len(parts) != 4:
            raise MeshFormatError(f"expected 4 node indices, got {len(parts)}", lineno)
        try:
            conn[i] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"bad node index in {' '.join(parts)!r}", lineno) from None

    if pos != len(tokens):
        raise MeshFormatError("trailing content after element section", tokens[pos][0])

    if n_elems and (conn.min() < 0 or conn.max() >= n_nodes):
        raise ValueError("connectivity index out of range [0, n_nodes)")
    vols = signed_volumes(coords, conn)
    inverted = vols < 0.0
    if inverted.any():
        warnings.warn(
            f"{path.name}: re-oriented {int(inverted.sum())} inverted element(s)",
            stacklevel=2,
        )
        conn[inverted, 2], conn[inverted, 3] = (
            conn[inverted, 3].copy(),
            conn[inverted, 2].copy(),
        )
    return Mesh(coords=coords, connectivity=conn)
