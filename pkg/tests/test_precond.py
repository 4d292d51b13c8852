"""Neumann-Neumann and the edge preconditioner built on top of it."""

import numpy as np
import pytest
import scipy.linalg as sla

from schurhx.assemble import Coefficients, assemble_edge, assemble_scalar
from schurhx.discrete_ops import build_gradient, build_nodal_interp
from schurhx.errors import SingularOperatorError
from schurhx.krylov import pcg
from schurhx.oracle import pseudoinverse_injective
from schurhx.precond import (
    HiptmairXu,
    NeumannNeumann,
    estimate_condition,
    materialize,
    setup_maxwell,
)


def test_nn_symmetric(scalar444_j8, rng):
    q = scalar444_j8.qnn
    for _ in range(20):
        f = rng.uniform(-1, 1, q.dim)
        g = rng.uniform(-1, 1, q.dim)
        left, right = g @ q(f), f @ q(g)
        assert abs(left - right) <= 1e-12 * max(abs(left), 1.0)


def test_nn_exact_for_single_subdomain(scalar222_j1, rng):
    q, s = scalar222_j1.qnn, scalar222_j1.schur
    u = rng.uniform(-1, 1, q.dim)
    assert np.abs(q(s.apply(u)) - u).max() <= 1e-10
    report = pcg(s.apply, q, s.apply(u), tol=1e-9)
    assert report.history.converged and report.history.iterations <= 2


def test_nn_rejects_edge_system(maxwell222_j8, scalar222_j8):
    with pytest.raises(ValueError, match="scalar"):
        NeumannNeumann(maxwell222_j8.schur, scalar222_j8.multiplicity)


def test_nn_dimension_checked(scalar222_j8):
    with pytest.raises(ValueError):
        scalar222_j8.qnn(np.zeros(scalar222_j8.qnn.dim + 1))


def test_ideal_weighted_average_is_exact_inverse(scalar222_j8):
    """Swapping the counting weights for the energy-weighted pseudo-inverse
    of the skeleton split turns the average into the exact inverse."""
    prob = scalar222_j8
    split = prob.transfer.skeleton_split.matrix.toarray()
    t_dense = materialize(prob.schur.apply_dtn, prob.schur.tuple_dim)
    pinj = pseudoinverse_injective(split, t_dense)
    q_ideal = pinj @ sla.solve(t_dense, pinj.T, assume_a="pos")
    s_dense = materialize(prob.schur.apply, prob.schur.dim)
    residual = np.abs(q_ideal @ s_dense - np.eye(prob.schur.dim)).max()
    assert residual <= 1e-9


def test_nn_spd_dense(scalar222_j8):
    q = materialize(scalar222_j8.qnn, scalar222_j8.qnn.dim)
    assert sla.eigvalsh((q + q.T) / 2.0)[0] > 0


def test_hx_symmetric(maxwell444_j8, rng):
    q = maxwell444_j8.qhx
    for _ in range(20):
        f = rng.uniform(-1, 1, q.dim)
        g = rng.uniform(-1, 1, q.dim)
        left, right = g @ q(f), f @ q(g)
        assert abs(left - right) <= 1e-12 * max(abs(left), 1.0)


def test_hx_spd_dense(maxwell222_j8):
    q = materialize(maxwell222_j8.qhx, maxwell222_j8.qhx.dim)
    assert sla.eigvalsh((q + q.T) / 2.0)[0] > 0


def test_hx_costs_four_scalar_applies(maxwell444_j8, rng):
    q = maxwell444_j8.qhx
    before = q.nn.n_applies
    q(rng.uniform(-1, 1, q.dim))
    assert q.nn.n_applies - before == 4


@pytest.mark.parametrize("which", ["nn", "hx"])
def test_preconditioners_linear(maxwell444_j8, rng, which):
    q = maxwell444_j8.scalar.qnn if which == "nn" else maxwell444_j8.qhx
    f = rng.uniform(-1, 1, q.dim)
    g = rng.uniform(-1, 1, q.dim)
    a, b = 2.3, -0.7
    combined = q(a * f + b * g)
    separate = a * q(f) + b * q(g)
    scale = np.abs(separate).max()
    assert np.abs(combined - separate).max() <= 1e-13 * max(scale, 1.0)


def test_hx_validates_inputs(maxwell222_j8, scalar222_j8):
    mesh = maxwell222_j8.mesh
    skel = maxwell222_j8.skeleton
    vol_grad = build_gradient(mesh, "volume")
    skel_grad = build_gradient(mesh, "skeleton", skel)
    interps = [build_nodal_interp(mesh, d, "skeleton", skel) for d in range(3)]
    jac = maxwell222_j8.jacobi_skeleton
    with pytest.raises(ValueError, match="skeleton"):
        HiptmairXu(jac, vol_grad, interps, scalar222_j8.qnn)
    with pytest.raises(ValueError, match="direction"):
        HiptmairXu(jac, skel_grad, interps[:2], scalar222_j8.qnn)
    q = HiptmairXu(jac, skel_grad, interps, scalar222_j8.qnn)
    with pytest.raises(ValueError):
        q(np.zeros(q.dim + 1))


def test_hx_with_exact_scalar_inverse_is_pushed_down_volume_form(maxwell222_j8):
    """Replacing the scalar average by the exact interface inverse makes the
    edge preconditioner equal the skeleton push-down of

        diag(M)^{-1} + G L^{-1} G^T + sum_d P_d L^{-1} P_d^T

    assembled on the volume, which is the identity the whole construction
    rests on."""
    mw = maxwell222_j8
    mesh, spaces, coeffs = mw.mesh, mw.spaces, mw.coeffs

    s_scalar = materialize(mw.scalar.schur.apply, mw.scalar.schur.dim)
    exact_inv = sla.inv(s_scalar)

    class ExactScalar:
        def __call__(self, f):
            return exact_inv @ f

    q_exact = HiptmairXu(
        mw.jacobi_skeleton, mw.gradient, mw.interps, ExactScalar()
    )
    lhs = materialize(q_exact, q_exact.dim)

    l_dense = assemble_scalar(mesh, spaces, coeffs).matrix.toarray()
    m_dense = assemble_edge(mesh, spaces, coeffs).matrix.toarray()
    aux = np.diag(1.0 / np.diag(m_dense))
    g = build_gradient(mesh).matrix.toarray()
    aux = aux + g @ sla.solve(l_dense, g.T, assume_a="pos")
    for d in range(3):
        p = build_nodal_interp(mesh, d).matrix.toarray()
        aux = aux + p @ sla.solve(l_dense, p.T, assume_a="pos")
    tr = mw.transfer.skeleton_trace.matrix.toarray()
    rhs = tr @ aux @ tr.T

    assert np.abs(lhs - rhs).max() <= 1e-9


def test_hx_summands_positive_semidefinite(maxwell222_j8):
    mw = maxwell222_j8
    n = mw.qhx.dim
    assert np.all(mw.qhx.jacobi_inv > 0)

    q_nn = materialize(mw.scalar.qnn, mw.scalar.qnn.dim)
    g = mw.gradient.matrix.toarray()
    sandwiches = [g @ q_nn @ g.T]
    sandwiches += [
        p.toarray() @ q_nn @ p.toarray().T
        for p in (m.matrix for m in mw.interps)
    ]
    for s in sandwiches:
        evs = sla.eigvalsh((s + s.T) / 2.0)
        assert evs[0] >= -1e-10
    # The gradient sandwich inherits the rank of the gradient itself: its
    # kernel is the orthogonal complement of Range(G).
    rank_g = np.linalg.matrix_rank(g)
    evs = sla.eigvalsh(sandwiches[0])
    assert np.sum(evs > 1e-10) == rank_g


def test_estimate_condition_identity():
    est = estimate_condition(lambda u: u, lambda u: u, 7, method="dense")
    assert abs(est.cond - 1.0) <= 1e-10
    est = estimate_condition(lambda u: 2.0 * u, lambda u: 0.5 * u, 7, method="lanczos")
    assert abs(est.cond - 1.0) <= 1e-10


def test_estimate_condition_dense_vs_lanczos(scalar222_j8):
    prob = scalar222_j8
    dense = estimate_condition(prob.schur.apply, prob.qnn, prob.schur.dim, "dense")
    lanczos = estimate_condition(
        prob.schur.apply, prob.qnn, prob.schur.dim, "lanczos"
    )
    assert dense.cond >= 1.0
    # Lanczos bounds the spectrum from inside.
    assert lanczos.cond <= dense.cond * (1 + 1e-9)
    assert lanczos.cond >= 0.5 * dense.cond


def test_estimate_condition_validation(scalar222_j8):
    with pytest.raises(ValueError):
        estimate_condition(lambda u: u, lambda u: u, 4, method="power")
    with pytest.raises(SingularOperatorError):
        estimate_condition(lambda u: -u, lambda u: u, 4, method="dense")


def test_setup_dimensions(maxwell444_j8, mesh444_j8):
    mw = maxwell444_j8
    assert mw.dim_skeleton == mw.skeleton.n_skeleton_edges
    assert mw.dim_volume == mesh444_j8.n_edges
    assert mw.scalar.dim_skeleton == mw.skeleton.n_skeleton_vertices
    assert mw.scalar.dim_volume == mesh444_j8.n_vertices
    assert mw.jacobi_skeleton.shape == (mw.dim_skeleton,)


def test_maxwell_solve_end_to_end(mesh222_j2, rng):
    mw = setup_maxwell(mesh222_j2, Coefficients())
    u_ex = rng.uniform(-1, 1, mw.dim_skeleton)
    report = pcg(mw.schur.apply, mw.qhx, mw.schur.apply(u_ex), tol=1e-9)
    assert report.history.converged
    err = np.linalg.norm(report.solution - u_ex) / np.linalg.norm(u_ex)
    assert err <= 1e-7
