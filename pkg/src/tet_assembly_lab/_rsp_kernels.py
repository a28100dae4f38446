"""Compiled scalar element kernel backing the privatized assembly variant.

The whole per-element computation lives in one loop body made of plain
scalars, so the JIT can keep every intermediate in registers: no chunk
arrays exist at all.  The scatter is the plain scalar add at the end of the
loop body; race freedom is the caller's job (private accumulators per
thread, or a colored element list).

``nogil=True`` lets plain Python threads run this kernel concurrently.
"""

import math

import numpy as np
from numba import njit

from .kernel import DENOM_EPSILON


@njit(cache=True, nogil=True)
def assemble_elements(coords, conn, u, rho, mu, cvre, pmat, ids, rhs):
    """Assemble the elements listed in ``ids`` (ascending), adding into ``rhs``.

    pmat[a][b] = sum_g N_a(x_g) N_b(x_g) folds the quadrature interpolation
    into one constant table, so the convective nodal sums need the velocity
    moments m_ak = sum_b pmat[a][b] u[b][k] instead of per-point values.
    """
    p00 = pmat[0, 0]; p01 = pmat[0, 1]; p02 = pmat[0, 2]; p03 = pmat[0, 3]
    p10 = pmat[1, 0]; p11 = pmat[1, 1]; p12 = pmat[1, 2]; p13 = pmat[1, 3]
    p20 = pmat[2, 0]; p21 = pmat[2, 1]; p22 = pmat[2, 2]; p23 = pmat[2, 3]
    p30 = pmat[3, 0]; p31 = pmat[3, 1]; p32 = pmat[3, 2]; p33 = pmat[3, 3]

    for t in range(ids.shape[0]):
        e = ids[t]
        n0 = conn[e, 0]
        n1 = conn[e, 1]
        n2 = conn[e, 2]
        n3 = conn[e, 3]

        x0 = coords[n0, 0]; y0 = coords[n0, 1]; z0 = coords[n0, 2]
        x1 = coords[n1, 0]; y1 = coords[n1, 1]; z1 = coords[n1, 2]
        x2 = coords[n2, 0]; y2 = coords[n2, 1]; z2 = coords[n2, 2]
        x3 = coords[n3, 0]; y3 = coords[n3, 1]; z3 = coords[n3, 2]

        e1x = x1 - x0; e1y = y1 - y0; e1z = z1 - z0
        e2x = x2 - x0; e2y = y2 - y0; e2z = z2 - z0
        e3x = x3 - x0; e3y = y3 - y0; e3z = z3 - z0

        # cofactors: e2 x e3, e3 x e1, e1 x e2
        c1x = e2y * e3z - e2z * e3y
        c1y = e2z * e3x - e2x * e3z
        c1z = e2x * e3y - e2y * e3x
        c2x = e3y * e1z - e3z * e1y
        c2y = e3z * e1x - e3x * e1z
        c2z = e3x * e1y - e3y * e1x
        c3x = e1y * e2z - e1z * e2y
        c3y = e1z * e2x - e1x * e2z
        c3z = e1x * e2y - e1y * e2x

        det = e1x * c1x + e1y * c1y + e1z * c1z
        vol = abs(det) / 6.0
        dlt = np.cbrt(6.0 * vol)

        b1x = c1x / det; b1y = c1y / det; b1z = c1z / det
        b2x = c2x / det; b2y = c2y / det; b2z = c2z / det
        b3x = c3x / det; b3y = c3y / det; b3z = c3z / det
        b0x = -(b1x + b2x + b3x)
        b0y = -(b1y + b2y + b3y)
        b0z = -(b1z + b2z + b3z)

        u0x = u[n0, 0]; u0y = u[n0, 1]; u0z = u[n0, 2]
        u1x = u[n1, 0]; u1y = u[n1, 1]; u1z = u[n1, 2]
        u2x = u[n2, 0]; u2y = u[n2, 1]; u2z = u[n2, 2]
        u3x = u[n3, 0]; u3y = u[n3, 1]; u3z = u[n3, 2]

        # velocity gradient g_ki = d u_i / d x_k, constant over the element
        g00 = b0x * u0x + b1x * u1x + b2x * u2x + b3x * u3x
        g01 = b0x * u0y + b1x * u1y + b2x * u2y + b3x * u3y
        g02 = b0x * u0z + b1x * u1z + b2x * u2z + b3x * u3z
        g10 = b0y * u0x + b1y * u1x + b2y * u2x + b3y * u3x
        g11 = b0y * u0y + b1y * u1y + b2y * u2y + b3y * u3y
        g12 = b0y * u0z + b1y * u1z + b2y * u2z + b3y * u3z
        g20 = b0z * u0x + b1z * u1x + b2z * u2x + b3z * u3x
        g21 = b0z * u0y + b1z * u1y + b2z * u2y + b3z * u3y
        g22 = b0z * u0z + b1z * u1z + b2z * u2z + b3z * u3z

        aa = (
            g00 * g00 + g01 * g01 + g02 * g02
            + g10 * g10 + g11 * g11 + g12 * g12
            + g20 * g20 + g21 * g21 + g22 * g22
        )
        if aa <= DENOM_EPSILON:
            nut = 0.0
        else:
            # squared 2x2 minors of the gradient tensor (same order as the
            # scalar oracle so the two agree bitwise on rank-1 inputs)
            dd = g00 * g11 - g01 * g10
            ssq = dd * dd
            dd = g00 * g21 - g01 * g20
            ssq = ssq + dd * dd
            dd = g10 * g21 - g11 * g20
            ssq = ssq + dd * dd
            dd = g00 * g12 - g02 * g10
            ssq = ssq + dd * dd
            dd = g00 * g22 - g02 * g20
            ssq = ssq + dd * dd
            dd = g10 * g22 - g12 * g20
            ssq = ssq + dd * dd
            dd = g01 * g12 - g02 * g11
            ssq = ssq + dd * dd
            dd = g01 * g22 - g02 * g21
            ssq = ssq + dd * dd
            dd = g11 * g22 - g12 * g21
            ssq = ssq + dd * dd
            d2 = dlt * dlt
            bb = d2 * d2 * ssq
            if bb < 0.0:
                nut = 0.0
            else:
                nut = cvre * math.sqrt(bb / aa)

        vis = mu + rho * nut
        nrv = -(rho * vol * 0.25)
        nvv = -(vis * vol)

        m0 = p00 * u0x + p01 * u1x + p02 * u2x + p03 * u3x
        m1 = p00 * u0y + p01 * u1y + p02 * u2y + p03 * u3y
        m2 = p00 * u0z + p01 * u1z + p02 * u2z + p03 * u3z
        r = nrv * (m0 * g00 + m1 * g10 + m2 * g20) + nvv * (b0x * g00 + b0y * g10 + b0z * g20)
        rhs[n0, 0] += r
        r = nrv * (m0 * g01 + m1 * g11 + m2 * g21) + nvv * (b0x * g01 + b0y * g11 + b0z * g21)
        rhs[n0, 1] += r
        r = nrv * (m0 * g02 + m1 * g12 + m2 * g22) + nvv * (b0x * g02 + b0y * g12 + b0z * g22)
        rhs[n0, 2] += r

        m0 = p10 * u0x + p11 * u1x + p12 * u2x + p13 * u3x
        m1 = p10 * u0y + p11 * u1y + p12 * u2y + p13 * u3y
        m2 = p10 * u0z + p11 * u1z + p12 * u2z + p13 * u3z
        r = nrv * (m0 * g00 + m1 * g10 + m2 * g20) + nvv * (b1x * g00 + b1y * g10 + b1z * g20)
        rhs[n1, 0] += r
        r = nrv * (m0 * g01 + m1 * g11 + m2 * g21) + nvv * (b1x * g01 + b1y * g11 + b1z * g21)
        rhs[n1, 1] += r
        r = nrv * (m0 * g02 + m1 * g12 + m2 * g22) + nvv * (b1x * g02 + b1y * g12 + b1z * g22)
        rhs[n1, 2] += r

        m0 = p20 * u0x + p21 * u1x + p22 * u2x + p23 * u3x
        m1 = p20 * u0y + p21 * u1y + p22 * u2y + p23 * u3y
        m2 = p20 * u0z + p21 * u1z + p22 * u2z + p23 * u3z
        r = nrv * (m0 * g00 + m1 * g10 + m2 * g20) + nvv * (b2x * g00 + b2y * g10 + b2z * g20)
        rhs[n2, 0] += r
        r = nrv * (m0 * g01 + m1 * g11 + m2 * g21) + nvv * (b2x * g01 + b2y * g11 + b2z * g21)
        rhs[n2, 1] += r
        r = nrv * (m0 * g02 + m1 * g12 + m2 * g22) + nvv * (b2x * g02 + b2y * g12 + b2z * g22)
        rhs[n2, 2] += r

        m0 = p30 * u0x + p31 * u1x + p32 * u2x + p33 * u3x
        m1 = p30 * u0y + p31 * u1y + p32 * u2y + p33 * u3y
        m2 = p30 * u0z + p31 * u1z + p32 * u2z + p33 * u3z
        r = nrv * (m0 * g00 + m1 * g10 + m2 * g20) + nvv * (b3x * g00 + b3y * g10 + b3z * g20)
        rhs[n3, 0] += r
        r = nrv * (m0 * g01 + m1 * g11 + m2 * g21) + nvv * (b3x * g01 + b3y * g11 + b3z * g21)
        rhs[n3, 1] += r
        r = nrv * (m0 * g02 + m1 * g12 + m2 * g22) + nvv * (b3x * g02 + b3y * g12 + b3z * g22)
        rhs[n3, 2] += r
