import numpy as np
import pytest
import scipy.linalg as sla

from support import triangle_meshes
from vemspectra import fem_oracle
from vemspectra.vem import Material, assemble, local_operators

RIGHT = np.array([[0, 0], [1, 0], [0, 1.0]])


def rigid(tri):
    x, y = tri[:, 0], tri[:, 1]
    modes = []
    for ux, uy in ((np.ones(3), np.zeros(3)), (np.zeros(3), np.ones(3)), (-y, x)):
        v = np.empty(6)
        v[0::2], v[1::2] = ux, uy
        modes.append(v)
    return modes


def test_rigid_modes_in_kernel():
    tri = np.array([[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]])
    k = fem_oracle.tri_stiffness(tri, 2.0, 0.3)
    for r in rigid(tri):
        assert np.linalg.norm(k @ r) < 1e-13 * np.abs(k).max()


def test_right_triangle_against_symbolic_integration():
    sympy = pytest.importorskip("sympy")
    x, y = sympy.symbols("x y")
    phis = [1 - x - y, x, y]
    mu, lam = sympy.Integer(1), sympy.Integer(0)
    fields = []
    for p in phis:
        fields += [(p, sympy.Integer(0)), (sympy.Integer(0), p)]

    def energy(u, v):
        eu = [sympy.diff(u[0], x), sympy.diff(u[1], y), sympy.diff(u[0], y) + sympy.diff(u[1], x)]
        ev = [sympy.diff(v[0], x), sympy.diff(v[1], y), sympy.diff(v[0], y) + sympy.diff(v[1], x)]
        integrand = (lam + 2 * mu) * (eu[0] * ev[0] + eu[1] * ev[1]) + lam * (eu[0] * ev[1] + eu[1] * ev[0]) + mu * eu[2] * ev[2]
        return sympy.integrate(sympy.integrate(integrand, (y, 0, 1 - x)), (x, 0, 1))

    ref = np.array([[float(energy(u, v)) for v in fields] for u in fields])
    # lambda = 0, mu = 1  <=>  E = 2, nu = 0
    k = fem_oracle.tri_stiffness(RIGHT, 2.0, 0.0)
    assert np.allclose(k, ref, atol=1e-14)
    assert k[0, 0] == pytest.approx(1.5)


def test_mass_row_sums_and_constant_energy():
    tri = np.array([[0.0, 0.0], [2.0, 0.5], [0.3, 1.7]])
    area = 0.5 * abs(np.cross(np.r_[tri[1] - tri[0], 0], np.r_[tri[2] - tri[0], 0])[2])
    m = fem_oracle.tri_mass(tri, 3.0)
    assert np.allclose(m[0::2, 0::2].sum(axis=1), 3.0 * area / 3)
    assert np.allclose(m[1::2, 1::2].sum(axis=1), 3.0 * area / 3)
    one = np.ones(6)
    assert one @ m @ one == pytest.approx(2 * 3.0 * area)


def test_degenerate_triangle_rejected():
    with pytest.raises(ValueError):
        fem_oracle.tri_stiffness(np.array([[0, 0], [1, 1], [2, 2.0]]), 1.0, 0.3)


def test_local_agreement_with_vem():
    rng = np.random.default_rng(5)
    mat = Material(7.7e3, 1.44e11, 0.35)
    for _ in range(20):
        tri = rng.normal(size=(3, 2))
        d1, d2 = tri[1] - tri[0], tri[2] - tri[0]
        if d1[0] * d2[1] - d1[1] * d2[0] < 0:
            tri = tri[[0, 2, 1]]
        ops = local_operators(tri, mat)
        kf = fem_oracle.tri_stiffness(tri, mat.young, mat.poisson)
        assert np.abs(ops.stiffness[0] - kf).max() <= 1e-12 * np.abs(kf).max()
        mf = fem_oracle.tri_mass(tri, mat.rho)
        assert np.abs(ops.m_cons[0] - mf).max() <= 1e-12 * np.abs(mf).max()


@pytest.mark.parametrize("name", sorted(triangle_meshes()))
def test_global_matrices_agree(name):
    mesh = triangle_meshes()[name]
    mat = Material(1.0, 1.0, 0.35)
    vem = assemble(mesh, mat)
    k, m = fem_oracle.assemble(mesh.vertices, mesh.elements, mesh.dirichlet_vertices, mat.rho, mat.young, mat.poisson)
    assert abs(vem.stiffness - k).max() <= 1e-12 * abs(k).max()
    assert abs(vem.mass - m).max() <= 1e-12 * abs(m).max()
    if k.shape[0] <= 400:
        ev = sla.eigh(k.toarray(), m.toarray(), eigvals_only=True, subset_by_index=[0, 5])
        ev2 = sla.eigh(vem.stiffness.toarray(), vem.mass.toarray(), eigvals_only=True, subset_by_index=[0, 5])
        assert np.allclose(ev2, ev, rtol=1e-10)
