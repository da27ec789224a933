"""Independent reference computations shared by the tests.

These are assembled from textbook formulas, element by element, and never
call the package's own operators.
"""

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import spsolve


def linear_fem_oracle(mesh, f=1.0):
    """Direct P1 solve with stiffness assembled element by element (area formula)."""
    rows, cols, vals = [], [], []
    for tri in mesh.simplices:
        P = mesh.points[tri]
        b = np.array([P[1, 1] - P[2, 1], P[2, 1] - P[0, 1], P[0, 1] - P[1, 1]])
        c = np.array([P[2, 0] - P[1, 0], P[0, 0] - P[2, 0], P[1, 0] - P[0, 0]])
        area = 0.5 * abs(b[0] * c[1] - b[1] * c[0])
        Ke = (np.outer(b, b) + np.outer(c, c)) / (4 * area)
        rows += list(np.repeat(tri, 3))
        cols += list(np.tile(tri, 3))
        vals += list(Ke.ravel())
    K = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.num_nodes,) * 2)
    # lumped load: a third of the triangle area to each vertex
    load = np.zeros(mesh.num_nodes)
    for tri in mesh.simplices:
        (a, b), (c, d) = mesh.points[tri[1]] - mesh.points[tri[0]], \
            mesh.points[tri[2]] - mesh.points[tri[0]]
        load[tri] += f * 0.5 * abs(a * d - b * c) / 3
    free = np.flatnonzero(~mesh.dirichlet)
    u = np.zeros(mesh.num_nodes)
    u[free] = spsolve(K[free][:, free].tocsc(), load[free])
    return u


def tridiagonal_eigen_oracle(n_intervals):
    """Smallest eigenvalue of the 1D P1 stiffness / lumped mass pair on (0, 1)."""
    h = 1 / n_intervals
    n = n_intervals - 1
    d = np.full(n, 2 / h) / h
    e = np.full(n - 1, -1 / h) / h
    return eigh_tridiagonal(d, e, select="i", select_range=(0, 0))[0][0]
