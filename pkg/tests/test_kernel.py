import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import tet_assembly_lab as tal
from tet_assembly_lab.kernel import validate_velocity, velocity_random

from conftest import reference_tet_mesh


def analytic_barycentric_integral(powers, volume):
    """Independent oracle: int_T prod_i lambda_i^p_i dV for a tetrahedron.

    Classic closed form: 6 V * (prod p_i!) / (sum p_i + 3)!
    """
    num = 1
    for p in powers:
        num *= math.factorial(p)
    return 6.0 * volume * num / math.factorial(sum(powers) + 3)


def quadrature_integral(rule, powers, volume):
    vals = np.prod(rule.points ** np.asarray(powers), axis=1)
    return volume * float(rule.weights @ vals)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def test_weights_sum_to_one():
    rule = tal.quadrature_tet4()
    assert rule.weights.sum() == 1.0
    a = (5.0 + 3.0 * math.sqrt(5.0)) / 20.0
    b = (5.0 - math.sqrt(5.0)) / 20.0
    np.testing.assert_allclose(np.sort(rule.points, axis=1)[:, -1], a)
    np.testing.assert_allclose(np.sort(rule.points, axis=1)[:, :3], b)
    # each point is a barycentric combination
    np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)


def test_constant_integrand_on_reference_tet():
    rule = tal.quadrature_tet4()
    assert quadrature_integral(rule, (0, 0, 0, 0), 1.0 / 6.0) == pytest.approx(
        1.0 / 6.0, rel=1e-15
    )


def test_xy_integrand_on_reference_tet():
    # x = lambda_1, y = lambda_2 on the reference tet; oracle value 1/120
    rule = tal.quadrature_tet4()
    expected = analytic_barycentric_integral((0, 1, 1, 0), 1.0 / 6.0)
    assert expected == pytest.approx(1.0 / 120.0, rel=1e-15)
    assert quadrature_integral(rule, (0, 1, 1, 0), 1.0 / 6.0) == pytest.approx(
        expected, rel=1e-14
    )


def test_rule_exact_for_all_monomials_up_to_degree_two():
    rule = tal.quadrature_tet4()
    vol = 0.37
    for total in range(3):
        for powers in itertools.product(range(total + 1), repeat=4):
            if sum(powers) != total:
                continue
            exact = analytic_barycentric_integral(powers, vol)
            assert quadrature_integral(rule, powers, vol) == pytest.approx(
                exact, rel=1e-13
            ), powers


# ---------------------------------------------------------------------------
# velocity gradient
# ---------------------------------------------------------------------------

def test_constant_field_zero_gradient():
    geom = tal.element_geometry(reference_tet_mesh(), 0)
    u = np.tile([1.3, -0.2, 4.0], (4, 1))
    np.testing.assert_array_equal(tal.velocity_gradient(geom, u), np.zeros((3, 3)))


def test_linear_x_field():
    mesh = reference_tet_mesh()
    geom = tal.element_geometry(mesh, 0)
    u = np.zeros((4, 3))
    u[:, 0] = mesh.coords[:, 0]
    g = tal.velocity_gradient(geom, u)
    expected = np.zeros((3, 3))
    expected[0, 0] = 1.0
    np.testing.assert_array_equal(g, expected)


def test_shear_field_gradient():
    mesh = reference_tet_mesh()
    geom = tal.element_geometry(mesh, 0)
    gamma = 2.0
    u = np.zeros((4, 3))
    u[:, 0] = gamma * mesh.coords[:, 1]
    g = tal.velocity_gradient(geom, u)
    expected = np.zeros((3, 3))
    expected[1, 0] = gamma
    np.testing.assert_array_equal(g, expected)


def test_affine_reproduction_random_tets():
    rng = np.random.default_rng(7)
    base = reference_tet_mesh().coords
    for _ in range(1000):
        amat = np.eye(3) + 0.4 * rng.uniform(-1.0, 1.0, (3, 3))
        coords = base @ amat.T + rng.uniform(-2.0, 2.0, 3)
        conn = np.array([[0, 1, 2, 3]])
        if tal.signed_volumes(coords, conn)[0] <= 0.0:
            coords = coords[[0, 1, 3, 2]]
        mesh = tal.Mesh(coords=coords, connectivity=conn)
        geom = tal.element_geometry(mesh, 0)
        grad_field = rng.uniform(-3.0, 3.0, (3, 3))  # u_j = sum_k grad[k][j] x_k
        u = mesh.coords @ grad_field
        g = tal.velocity_gradient(geom, u)
        err = np.abs(g - grad_field).max()
        assert err <= 1e-13 * max(1.0, np.abs(grad_field).max())


# ---------------------------------------------------------------------------
# eddy viscosity
# ---------------------------------------------------------------------------

def test_quiescent_flow():
    assert tal.vreman_viscosity(np.zeros((3, 3)), 0.1, 0.07) == 0.0


def test_pure_shear_is_exactly_zero():
    g = np.zeros((3, 3))
    g[1, 0] = 3.7
    # analytic beta minors: beta has a single nonzero diagonal entry, so all
    # three 2x2 principal minors vanish identically
    assert tal.vreman_viscosity(g, 0.25, 0.07) == 0.0


def test_identity_gradient():
    # beta = delta^2 I -> B_beta = 3 delta^4, alpha:alpha = 3 -> nu_t = c
    assert tal.vreman_viscosity(np.eye(3), 1.0, 0.07) == 0.07


int_vec = st.tuples(*([st.integers(min_value=-1024, max_value=1024)] * 3))


@given(
    a=int_vec,
    pattern=st.integers(min_value=0, max_value=2),
    scale_exp=st.integers(min_value=-8, max_value=8),
    delta=st.floats(min_value=1e-3, max_value=1e3),
    c=st.floats(min_value=0.0, max_value=1.0),
)
def test_rank_one_orthogonal_gradients_clamp_to_zero(a, pattern, scale_exp, delta, c):
    # exact integer entries keep the outer product and its minors exact in
    # floating point; a.b = 0 exactly by construction
    a = np.array(a, dtype=float)
    if pattern == 0:
        b = np.array([a[1], -a[0], 0.0])
    elif pattern == 1:
        b = np.array([a[2], 0.0, -a[0]])
    else:
        b = np.array([0.0, a[2], -a[1]])
    g = np.outer(a, b) * 2.0 ** scale_exp
    assert float(a @ b) == 0.0
    assert tal.vreman_viscosity(g, delta, c) == 0.0


@given(
    st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=9, max_size=9),
    st.floats(min_value=1e-6, max_value=1e3),
)
def test_viscosity_nonnegative_and_finite(entries, delta):
    g = np.array(entries).reshape(3, 3)
    nut = tal.vreman_viscosity(g, delta, 0.07)
    assert nut >= 0.0
    assert math.isfinite(nut)


def test_filter_width():
    assert tal.filter_width(1.0 / 6.0) == 1.0
    assert tal.filter_width(6.0 ** 2) == pytest.approx(6.0, rel=1e-15)


# ---------------------------------------------------------------------------
# element RHS
# ---------------------------------------------------------------------------

def test_zero_velocity_zero_rhs():
    geom = tal.element_geometry(reference_tet_mesh(), 0)
    rhs = tal.element_rhs(geom, np.zeros((4, 3)), tal.PhysParams(), tal.quadrature_tet4())
    np.testing.assert_array_equal(rhs, np.zeros((4, 3)))


def test_constant_velocity_zero_rhs():
    geom = tal.element_geometry(reference_tet_mesh(), 0)
    u = np.tile([0.4, -1.0, 2.5], (4, 1))
    rhs = tal.element_rhs(geom, u, tal.PhysParams(), tal.quadrature_tet4())
    np.testing.assert_array_equal(rhs, np.zeros((4, 3)))


def test_linear_x_field_against_analytic_oracle():
    # u = (x, 0, 0), mu = 1, rho = 1, no eddy viscosity, reference tet:
    # convective row a is -int N_a x dV in component 0, diffusive row is
    # -volume * grad_n[a][0]; both evaluated with the analytic integral oracle
    mesh = reference_tet_mesh()
    geom = tal.element_geometry(mesh, 0)
    params = tal.PhysParams(rho=1.0, mu=1.0, c_vreman=0.0)
    u = np.zeros((4, 3))
    u[:, 0] = mesh.coords[:, 0]
    rhs = tal.element_rhs(geom, u, params, tal.quadrature_tet4())

    vol = 1.0 / 6.0
    expected = np.zeros((4, 3))
    for a in range(4):
        powers = [0, 1, 0, 0]  # x = lambda_1
        powers[a] += 1
        conv = analytic_barycentric_integral(tuple(powers), vol)
        expected[a, 0] = -conv - vol * geom.grad_n[a, 0]
    np.testing.assert_allclose(rhs, expected, rtol=1e-13, atol=1e-18)


# ---------------------------------------------------------------------------
# reference assembly
# ---------------------------------------------------------------------------

def test_zero_velocity_global(box222, params):
    rhs = tal.assemble_reference(box222, np.zeros((box222.n_nodes, 3)), params)
    np.testing.assert_array_equal(rhs, np.zeros_like(rhs))


def test_single_element_mesh_placement(params):
    mesh = reference_tet_mesh()
    u = velocity_random(mesh, 3)
    rhs = tal.assemble_reference(mesh, u, params)
    local = tal.element_rhs(
        tal.element_geometry(mesh, 0), u, params, tal.quadrature_tet4()
    )
    np.testing.assert_array_equal(rhs, local)


def test_two_face_sharing_elements_constant_field(params):
    cube = tal.generate_box_mesh(1, 1, 1)
    shared = set(cube.connectivity[0]) & set(cube.connectivity[1])
    assert len(shared) == 3  # the two tets share a face
    mesh = tal.Mesh(coords=cube.coords, connectivity=cube.connectivity[:2])
    u = np.tile([0.9, 0.1, -0.4], (mesh.n_nodes, 1))
    rhs = tal.assemble_reference(mesh, u, params)
    np.testing.assert_array_equal(rhs, np.zeros_like(rhs))


def test_translation_invariance(params):
    mesh = tal.generate_box_mesh(3, 3, 3)
    u = tal.make_velocity(mesh, "random:5")
    rhs = tal.assemble_reference(mesh, u, params)
    shifted = tal.Mesh(
        coords=mesh.coords + np.array([10.0, -20.0, 5.0]), connectivity=mesh.connectivity
    )
    rhs2 = tal.assemble_reference(shifted, u, params)
    scale = np.abs(rhs).max()
    assert np.abs(rhs2 - rhs).max() <= 1e-12 * scale


def test_rejects_nonfinite_velocity(box222, params):
    u = np.zeros((box222.n_nodes, 3))
    u[3, 1] = np.nan
    with pytest.raises(ValueError):
        tal.assemble_reference(box222, u, params)


def test_rejects_wrong_shape(box222, params):
    with pytest.raises(ValueError):
        tal.assemble_reference(box222, np.zeros((3, box222.n_nodes)), params)


# ---------------------------------------------------------------------------
# initializers
# ---------------------------------------------------------------------------

def test_make_velocity_constant(box222):
    u = tal.make_velocity(box222, "constant:1,2,-3")
    np.testing.assert_array_equal(u, np.tile([1.0, 2.0, -3.0], (box222.n_nodes, 1)))


def test_make_velocity_shear(box222):
    u = tal.make_velocity(box222, "shear:2.5")
    np.testing.assert_array_equal(u[:, 0], 2.5 * box222.coords[:, 1])
    assert np.all(u[:, 1:] == 0.0)


def test_make_velocity_taylor_green(box222):
    u = tal.make_velocity(box222, "taylor-green")
    assert np.all(u[:, 2] == 0.0)
    assert np.abs(u).max() <= 1.0 + 1e-12
    assert np.abs(u).max() > 0.1


def test_make_velocity_random_reproducible(box222):
    u1 = tal.make_velocity(box222, "random", seed=9)
    u2 = tal.make_velocity(box222, "random:9")
    u3 = tal.make_velocity(box222, "random:10")
    np.testing.assert_array_equal(u1, u2)
    assert not np.array_equal(u1, u3)
    assert np.abs(u1).max() < 1.0


@pytest.mark.parametrize(
    "spec",
    ["nosuch", "constant:1,2", "shear:1:2", "zero:5", "taylor-green:3", "random:1,2"],
)
def test_make_velocity_rejects_bad_specs(box222, spec):
    with pytest.raises(ValueError):
        tal.make_velocity(box222, spec)


def test_physparams_validation():
    with pytest.raises(ValueError):
        tal.PhysParams(rho=0.0)
    with pytest.raises(ValueError):
        tal.PhysParams(mu=-1.0)
    with pytest.raises(ValueError):
        tal.PhysParams(c_vreman=-0.1)
    with pytest.raises(ValueError):
        tal.PhysParams(filter_width_rule="other")


def test_validate_velocity_casts(box222):
    u = validate_velocity(box222, np.zeros((box222.n_nodes, 3), dtype=np.float32))
    assert u.dtype == np.float64
