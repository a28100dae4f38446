import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

import tet_assembly_lab as tal
from tet_assembly_lab.mesh import MeshFormatError, DegenerateElementError

from conftest import reference_tet_mesh


def oracle_signed_volume(x0, x1, x2, x3):
    """Independent signed-volume oracle: det of edge matrix / 6."""
    e = np.column_stack([x1 - x0, x2 - x0, x3 - x0])
    return np.linalg.det(e) / 6.0


def oracle_total_volume(mesh):
    x = mesh.coords
    return sum(
        oracle_signed_volume(x[a], x[b], x[c], x[d]) for a, b, c, d in mesh.connectivity
    )


# ---------------------------------------------------------------------------
# box generation
# ---------------------------------------------------------------------------

def test_unit_cube_split():
    mesh = tal.generate_box_mesh(1, 1, 1, (1.0, 1.0, 1.0))
    assert mesh.n_nodes == 8
    assert mesh.n_elems == 6
    assert oracle_total_volume(mesh) == pytest.approx(1.0, rel=1e-14)


def test_two_unit_cubes():
    mesh = tal.generate_box_mesh(2, 1, 1, (2.0, 1.0, 1.0))
    assert mesh.n_nodes == 12
    assert mesh.n_elems == 12
    assert oracle_total_volume(mesh) == pytest.approx(2.0, rel=1e-14)


def test_box_10_cubed():
    mesh = tal.generate_box_mesh(10, 10, 10, (1.0, 1.0, 1.0))
    assert mesh.n_nodes == 1331
    assert mesh.n_elems == 6000
    assert abs(oracle_total_volume(mesh) - 1.0) <= 1e-12
    stats = tal.mesh_stats(mesh)
    assert stats.total_volume == pytest.approx(1.0, rel=1e-12)
    assert stats.min_volume > 0.0


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, 0, 1), (1, 1, -2)])
def test_generate_rejects_bad_dims(bad):
    with pytest.raises(ValueError):
        tal.generate_box_mesh(*bad)


def test_generate_rejects_bad_extents():
    with pytest.raises(ValueError):
        tal.generate_box_mesh(2, 2, 2, (1.0, -1.0, 1.0))
    with pytest.raises(ValueError):
        tal.generate_box_mesh(2, 2, 2, (0.0, 1.0, 1.0))


def test_all_volumes_positive_and_counts():
    mesh = tal.generate_box_mesh(3, 4, 5, (2.0, 0.5, 1.5))
    vols = tal.signed_volumes(mesh.coords, mesh.connectivity)
    assert mesh.n_elems == 6 * 3 * 4 * 5
    assert mesh.n_nodes == 4 * 5 * 6
    assert vols.min() > 0.0


def test_total_volume_matches_extents_all_small_boxes():
    # every (nx, ny, nz) <= (8, 8, 8), checked against the oracle volume sum
    for nx, ny, nz in itertools.product(range(1, 9), repeat=3):
        ext = (1.0, 0.7, 1.3)
        mesh = tal.generate_box_mesh(nx, ny, nz, ext)
        total = tal.signed_volumes(mesh.coords, mesh.connectivity).sum()
        expected = ext[0] * ext[1] * ext[2]
        assert abs(total - expected) <= 1e-12 * expected


# ---------------------------------------------------------------------------
# element geometry
# ---------------------------------------------------------------------------

def test_reference_tet_gradients():
    geom = tal.element_geometry(reference_tet_mesh(), 0)
    expected = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_array_equal(geom.grad_n, expected)
    assert geom.volume == pytest.approx(1.0 / 6.0, rel=1e-15)


def test_scaled_tet_gradients():
    base = reference_tet_mesh()
    mesh = tal.Mesh(coords=2.0 * base.coords, connectivity=base.connectivity)
    geom = tal.element_geometry(mesh, 0)
    ref = tal.element_geometry(base, 0)
    np.testing.assert_allclose(geom.grad_n, 0.5 * ref.grad_n, rtol=1e-15)
    assert geom.volume == pytest.approx(8.0 / 6.0, rel=1e-15)


def test_gradient_rows_sum_zero_random_affine():
    rng = np.random.default_rng(42)
    base = reference_tet_mesh().coords
    for _ in range(1000):
        amat = np.eye(3) + 0.5 * rng.uniform(-1.0, 1.0, (3, 3))
        if abs(np.linalg.det(amat)) < 0.2:
            continue
        shift = rng.uniform(-5.0, 5.0, 3)
        coords = base @ amat.T + shift
        vol = oracle_signed_volume(*coords)
        if vol < 0.0:
            coords = coords[[0, 1, 3, 2]]
            vol = -vol
        mesh = tal.Mesh(coords=coords, connectivity=np.array([[0, 1, 2, 3]]))
        geom = tal.element_geometry(mesh, 0)
        gscale = np.abs(geom.grad_n).max()
        assert np.abs(geom.grad_n.sum(axis=0)).max() <= 1e-13 * max(gscale, 1.0)
        assert geom.volume == pytest.approx(vol, rel=1e-12)


def test_element_geometry_bad_index():
    with pytest.raises(IndexError):
        tal.element_geometry(reference_tet_mesh(), 1)


def test_degenerate_element_error():
    # positive but sub-epsilon volume slips past mesh validation and must be
    # rejected by the geometry routine
    coords = 1e-102 * reference_tet_mesh().coords
    mesh = tal.Mesh(coords=coords, connectivity=np.array([[0, 1, 2, 3]]))
    with pytest.raises(DegenerateElementError):
        tal.element_geometry(mesh, 0)


# ---------------------------------------------------------------------------
# coloring
# ---------------------------------------------------------------------------

def elements_conflict(conn, i, j):
    return bool(set(conn[i]) & set(conn[j]))


def test_single_element_one_color():
    mesh = tal.color_elements(reference_tet_mesh())
    assert mesh.n_colors == 1


def test_unit_cube_coloring_needs_six():
    mesh = tal.generate_box_mesh(1, 1, 1)
    # brute-force conflict graph: the fixed split makes all six tets share
    # the main diagonal, so they are pairwise conflicting
    conn = mesh.connectivity
    for i, j in itertools.combinations(range(6), 2):
        assert elements_conflict(conn, i, j)
    colored = tal.color_elements(mesh)
    assert colored.n_colors == 6


def test_box_coloring_classes_conflict_free():
    mesh = tal.color_elements(tal.generate_box_mesh(4, 4, 4))
    conn = mesh.connectivity
    by_color = {}
    for e, c in enumerate(mesh.colors):
        by_color.setdefault(int(c), []).append(e)
    for members in by_color.values():
        for i, j in itertools.combinations(members, 2):
            assert not elements_conflict(conn, i, j)


def test_coloring_is_deterministic():
    a = tal.color_elements(tal.generate_box_mesh(3, 3, 3))
    b = tal.color_elements(tal.generate_box_mesh(3, 3, 3))
    np.testing.assert_array_equal(a.colors, b.colors)


def test_invalid_coloring_rejected():
    mesh = tal.generate_box_mesh(1, 1, 1)
    with pytest.raises(ValueError):
        tal.Mesh(
            coords=mesh.coords,
            connectivity=mesh.connectivity,
            colors=np.zeros(mesh.n_elems, dtype=np.int64),
        )


# ---------------------------------------------------------------------------
# mesh validation
# ---------------------------------------------------------------------------

def test_mesh_rejects_out_of_range_index():
    coords = reference_tet_mesh().coords
    with pytest.raises(ValueError):
        tal.Mesh(coords=coords, connectivity=np.array([[0, 1, 2, 4]]))


def test_mesh_rejects_inverted_element():
    coords = reference_tet_mesh().coords
    with pytest.raises(ValueError):
        tal.Mesh(coords=coords, connectivity=np.array([[0, 2, 1, 3]]))


def test_mesh_is_immutable():
    mesh = tal.generate_box_mesh(2, 2, 2)
    with pytest.raises(ValueError):
        mesh.coords[0, 0] = 99.0
    with pytest.raises(ValueError):
        mesh.connectivity[0, 0] = 1


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    mesh = tal.generate_box_mesh(3, 2, 4, (np.pi, 1.0, 0.125))
    path = tmp_path / "mesh.txt"
    tal.save_mesh(mesh, path)
    loaded = tal.load_mesh(path)
    np.testing.assert_array_equal(loaded.coords, mesh.coords)
    np.testing.assert_array_equal(loaded.connectivity, mesh.connectivity)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_17g_format_roundtrips_floats(x):
    # the writer relies on %.17g being lossless for float64
    assert float(f"{x:.17g}") == x


def test_load_comments_and_blanks(tmp_path):
    path = tmp_path / "mesh.txt"
    path.write_text(
        "# a comment\n"
        "nodes 4\n"
        "0 0 0\n"
        "1 0 0  # inline comment\n"
        "\n"
        "0 1 0\n"
        "0 0 1\n"
        "elems 1\n"
        "0 1 2 3\n"
    )
    mesh = tal.load_mesh(path)
    assert mesh.n_nodes == 4
    assert mesh.n_elems == 1


def test_load_rejects_out_of_range_index(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelems 1\n0 1 2 4\n")
    with pytest.raises(ValueError):
        tal.load_mesh(path)


def test_load_empty_element_section(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("nodes 2\n0 0 0\n1 0 0\nelems 0\n")
    mesh = tal.load_mesh(path)
    assert mesh.n_elems == 0
    assert mesh.n_nodes == 2


def test_load_malformed_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nodes 2\n0 0 0\n1 0 oops\nelems 0\n")
    with pytest.raises(MeshFormatError) as err:
        tal.load_mesh(path)
    assert err.value.line == 3
    assert "line 3" in str(err.value)


def test_load_truncated_reports_line(tmp_path):
    path = tmp_path / "short.txt"
    path.write_text("nodes 3\n0 0 0\n1 0 0\n")
    with pytest.raises(MeshFormatError):
        tal.load_mesh(path)


def test_load_reorients_inverted_elements(tmp_path):
    path = tmp_path / "inv.txt"
    path.write_text("nodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelems 1\n0 2 1 3\n")
    with pytest.warns(UserWarning, match="re-oriented"):
        mesh = tal.load_mesh(path)
    assert tal.signed_volumes(mesh.coords, mesh.connectivity)[0] > 0.0


def test_stats_on_colored_mesh():
    mesh = tal.color_elements(tal.generate_box_mesh(2, 2, 2))
    stats = tal.mesh_stats(mesh)
    assert stats.n_colors == mesh.n_colors
    assert stats.n_elems == 48
    assert stats.total_volume == pytest.approx(1.0, rel=1e-12)
