import numpy as np
import pytest

import tet_assembly_lab as tal


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile the scalar kernel once so timing-sensitive tests see steady state."""
    mesh = tal.generate_box_mesh(1, 1, 1)
    tal.assemble_rsp(mesh, tal.make_velocity(mesh, "zero"), tal.PhysParams())


@pytest.fixture(scope="session")
def params():
    return tal.PhysParams()


@pytest.fixture(scope="session")
def box222():
    return tal.generate_box_mesh(2, 2, 2)


@pytest.fixture(scope="session")
def box444():
    return tal.generate_box_mesh(4, 4, 4)


def reference_tet_mesh():
    """Single canonical reference tetrahedron as a mesh."""
    coords = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    conn = np.array([[0, 1, 2, 3]])
    return tal.Mesh(coords=coords, connectivity=conn)
