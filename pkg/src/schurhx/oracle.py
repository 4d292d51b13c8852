"""Dense ground-truth checks for every structural identity the solvers rely on.

Two weighted Moore-Penrose pseudo-inverses drive most of the algebra.  For an
SPD weight A:

  surjective Theta (onto):   pinv_A(Theta) = A^{-1} Theta^T (Theta A^{-1} Theta^T)^{-1}
      with  (Theta A^{-1} Theta^T)^{-1} = pinv^T A pinv          (inverse transport)
  injective Phi (one-to-one): pinv_A(Phi) = (Phi^T A Phi)^{-1} Phi^T A
      with  (Phi^T A Phi)^{-1} = pinv A^{-1} pinv^T

Everything here is dense and deliberately independent of the sparse solver
paths: the identities are checked by materializing operators column by column
and comparing against closed forms, not by reusing the code under test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assemble import Coefficients, assemble_edge, assemble_scalar
from .dofspaces import build_spaces
from .discrete_ops import build_gradient, build_nodal_interp
from .errors import ConfigurationError, SingularOperatorError
from .mesh import BoxMesh, extract_skeleton
from .precond import estimate_condition, materialize, setup_maxwell, setup_scalar

__all__ = [
    "DenseOp",
    "pseudoinverse_surjective",
    "pseudoinverse_injective",
    "IdentityCheck",
    "IdentityReport",
    "verify_dense_lemmas",
    "verify_identities",
]

#: Refuse dense verification on meshes bigger than this many edge dofs.
DENSE_DOF_LIMIT = 1500


@dataclass(frozen=True)
class DenseOp:
    """A dense matrix wrapper that can assert SPD-ness on construction."""

    array: np.ndarray
    spd: bool = False

    def __post_init__(self):
        a = np.asarray(self.array, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"expected a matrix, got ndim={a.ndim}")
        object.__setattr__(self, "array", a)
        if self.spd:
            if a.shape[0] != a.shape[1]:
                raise ValueError("SPD operator must be square")
            scale = max(1.0, float(np.abs(a).max()))
            if float(np.abs(a - a.T).max()) > 1e-12 * scale:
                raise SingularOperatorError("operator tagged SPD is not symmetric")
            try:
                sla.cholesky(a, lower=True)
            except sla.LinAlgError as err:
                raise SingularOperatorError("operator tagged SPD is not PD") from err

    @property
    def shape(self):
        return self.array.shape


def _as_array(op) -> np.ndarray:
    return op.array if isinstance(op, DenseOp) else np.asarray(op, dtype=float)


def pseudoinverse_surjective(theta, weight) -> np.ndarray:
    """A-weighted pseudo-inverse of a surjective map (right inverse, min norm).

    Raises :class:`SingularOperatorError` when ``theta`` lacks full row rank.
    """
    th = _as_array(theta)
    a = _as_array(weight)
    lifted = sla.solve(a, th.T, assume_a="pos")
    try:
        chol = sla.cho_factor(th @ lifted)
    except sla.LinAlgError as err:
        raise SingularOperatorError("map is not surjective (row-rank deficient)") from err
    return lifted @ sla.cho_solve(chol, np.eye(th.shape[0]))


def pseudoinverse_injective(phi, weight) -> np.ndarray:
    """A-weighted pseudo-inverse of an injective map (left inverse).

    Raises :class:`SingularOperatorError` when ``phi`` has dependent columns.
    """
    ph = _as_array(phi)
    a = _as_array(weight)
    gram = ph.T @ a @ ph
    try:
        chol = sla.cho_factor(gram)
    except sla.LinAlgError as err:
        raise SingularOperatorError("map is not injective (column-rank deficient)") from err
    return sla.cho_solve(chol, ph.T @ a)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    context: str
    value: float  # residual, or the left side of an inequality
    bound: float  # allowed threshold / right side
    passed: bool


@dataclass
class IdentityReport:
    checks: list[IdentityCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add_residual(self, name: str, context: str, value: float, bound: float):
        self.checks.append(
            IdentityCheck(name, context, float(value), float(bound), value <= bound)
        )

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            out.append(
                f"[{status}] {c.name} ({c.context}): value={c.value:.3e} bound={c.bound:.3e}"
            )
        return out

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("name,context,value,bound,passed\n")
            for c in self.checks:
                fh.write(f"{c.name},{c.context},{c.value!r},{c.bound!r},{int(c.passed)}\n")


def _random_spd(rng, n: int) -> np.ndarray:
    w = rng.uniform(-1.0, 1.0, (n, n))
    return w @ w.T + n * np.eye(n)


def _rel_max(diff: np.ndarray, reference: np.ndarray) -> float:
    """Max-abs of ``diff`` relative to the magnitude of ``reference`` (>= 1)."""
    return float(np.abs(diff).max() / max(1.0, np.abs(reference).max()))


def verify_dense_lemmas(seed: int = 0, draws: int = 20) -> IdentityReport:
    """Random-instance checks of the pseudo-inverse algebra (dims up to 12x8)."""
    rng = np.random.default_rng(seed)
    report = IdentityReport()
    for k in range(draws):
        n = int(rng.integers(2, 13))
        m = int(rng.integers(1, min(8, n) + 1))
        a = _random_spd(rng, n)
        theta = rng.uniform(-1.0, 1.0, (m, n))
        ctx = f"draw {k}: dims {m}x{n}"

        pinv = pseudoinverse_surjective(theta, a)
        gram_inv = sla.inv(theta @ sla.solve(a, theta.T, assume_a="pos"))
        report.add_residual(
            "surjective-right-inverse",
            ctx,
            float(np.abs(theta @ pinv - np.eye(m)).max()),
            1e-9,
        )
        # Transported inverses are compared relative to their own magnitude:
        # a nearly singular draw makes the inverse large without carrying any
        # meaning for the identity itself.
        report.add_residual(
            "surjective-inverse-transport",
            ctx,
            _rel_max(gram_inv - pinv.T @ a @ pinv, gram_inv),
            1e-9,
        )
        proj = pinv @ theta
        report.add_residual(
            "projector-idempotent", ctx, float(np.abs(proj @ proj - proj).max()), 1e-9
        )
        report.add_residual(
            "projector-self-adjoint-in-A",
            ctx,
            float(np.abs(a @ proj - proj.T @ a).max()),
            1e-9,
        )
        # Minimal-norm property, checked against the KKT system of
        #   min <A v, v>  subject to  Theta v = u.
        u = rng.uniform(-1.0, 1.0, m)
        kkt = np.block([[a, theta.T], [theta, np.zeros((m, m))]])
        v = sla.solve(kkt, np.concatenate([np.zeros(n), u]))[:n]
        report.add_residual(
            "surjective-minimal-norm", ctx, _rel_max(pinv @ u - v, v), 1e-9
        )

        phi = theta.T
        pinj = pseudoinverse_injective(phi, a)
        report.add_residual(
            "injective-left-inverse",
            ctx,
            float(np.abs(pinj @ phi - np.eye(m)).max()),
            1e-9,
        )
        gram2_inv = sla.inv(phi.T @ a @ phi)
        report.add_residual(
            "injective-inverse-transport",
            ctx,
            _rel_max(gram2_inv - pinj @ sla.inv(a) @ pinj.T, gram2_inv),
            1e-9,
        )
    return report


def _max_abs(matrix) -> float:
    data = matrix.data if hasattr(matrix, "data") else np.asarray(matrix)
    return float(np.abs(data).max()) if data.size else 0.0


def verify_identities(
    mesh: BoxMesh,
    coeffs: Coefficients | None = None,
    seed: int = 0,
    include_spectra: bool = True,
    corrupt_gradient_sign: bool = False,
) -> IdentityReport:
    """Check every structural identity on one (small) partitioned mesh.

    ``corrupt_gradient_sign`` flips one entry of the skeleton gradient before
    checking; it exists so the failure path of the verifier is testable.
    """
    if mesh.n_edges > DENSE_DOF_LIMIT:
        raise ConfigurationError(
            f"dense verification is limited to {DENSE_DOF_LIMIT} edge dofs, "
            f"this mesh has {mesh.n_edges}; use fewer cells"
        )
    coeffs = coeffs or Coefficients()
    ctx = f"cells={mesh.cells} subdomains={mesh.subdomains}"
    report = IdentityReport()

    skeleton = extract_skeleton(mesh)
    spaces = build_spaces(mesh, skeleton)
    scalar = setup_scalar(mesh, coeffs, skeleton, spaces)
    maxwell = setup_maxwell(mesh, coeffs, skeleton, spaces)

    grad_vol = build_gradient(mesh, "volume").matrix
    grad_skel = build_gradient(mesh, "skeleton", skeleton).matrix
    if corrupt_gradient_sign:
        grad_skel = grad_skel.copy()
        grad_skel.data[0] = -grad_skel.data[0]

    # Commutation lattice: trace/split squares and the differential maps,
    # all exact in floating point (index maps and identical coordinate
    # arithmetic on both paths).
    for field_name, ops in (("scalar", scalar.transfer), ("edge", maxwell.transfer)):
        lhs = ops.boundary_trace.matrix @ ops.volume_split.matrix
        rhs = ops.skeleton_split.matrix @ ops.skeleton_trace.matrix
        report.add_residual(
            f"trace-split-commutation-{field_name}", ctx, _max_abs(lhs - rhs), 0.0
        )

    trace_v = scalar.transfer.skeleton_trace.matrix
    trace_e = maxwell.transfer.skeleton_trace.matrix
    report.add_residual(
        "gradient-trace-commutation",
        ctx,
        _max_abs(trace_e @ grad_vol - grad_skel @ trace_v),
        0.0,
    )
    for d in range(3):
        pv = build_nodal_interp(mesh, d, "volume").matrix
        ps = build_nodal_interp(mesh, d, "skeleton", skeleton).matrix
        report.add_residual(
            f"interp-trace-commutation-dir{d}",
            ctx,
            _max_abs(trace_e @ pv - ps @ trace_v),
            0.0,
        )

    # Interface inverse identity: (assembled Schur) . (trace volinv trace^T) = Id,
    # for both fields.
    l_dense = assemble_scalar(mesh, spaces, coeffs, scope="global").matrix.toarray()
    m_dense = assemble_edge(mesh, spaces, coeffs, scope="global").matrix.toarray()
    for field_name, problem, vol in (
        ("scalar", scalar, l_dense),
        ("edge", maxwell, m_dense),
    ):
        tr = problem.transfer.skeleton_trace.matrix.toarray()
        pushed = tr @ sla.solve(vol, tr.T, assume_a="pos")
        s_mat = materialize(problem.schur.apply, problem.schur.dim)
        report.add_residual(
            f"interface-inverse-identity-{field_name}",
            ctx,
            float(np.abs(s_mat @ pushed - np.eye(s_mat.shape[0])).max()),
            1e-9,
        )

    # Pseudo-inverse commutation: splitting the volume lift of skeleton data
    # equals lifting blockwise.
    l_blocks = scalar.blocks.matrix.toarray()
    lift_vol = pseudoinverse_surjective(trace_v.toarray(), l_dense)
    lift_blk = pseudoinverse_surjective(
        scalar.transfer.boundary_trace.matrix.toarray(), l_blocks
    )
    report.add_residual(
        "pseudoinverse-commutation",
        ctx,
        float(
            np.abs(
                scalar.transfer.volume_split.matrix.toarray() @ lift_vol
                - lift_blk @ scalar.transfer.skeleton_split.matrix.toarray()
            ).max()
        ),
        1e-9,
    )

    # Weighted average as a pseudo-inverse: the degree-scaled transpose of the
    # skeleton split is its pseudo-inverse for identity weights.
    split = scalar.transfer.skeleton_split.matrix.toarray()
    weights = np.diag(scalar.multiplicity.tuple_weights)
    closed = (split.T * scalar.multiplicity.tuple_weights) / scalar.multiplicity.skeleton_degree[:, None]
    report.add_residual(
        "degree-average-pseudoinverse",
        ctx,
        float(np.abs(pseudoinverse_injective(split, weights) - closed).max()),
        1e-12,
    )

    if mesh.n_subdomains == 1:
        q_mat = materialize(scalar.qnn, scalar.schur.dim)
        s_mat = materialize(scalar.schur.apply, scalar.schur.dim)
        report.add_residual(
            "single-subdomain-exactness",
            ctx,
            float(np.abs(q_mat @ s_mat - np.eye(s_mat.shape[0])).max()),
            1e-9,
        )

    if include_spectra:
        _spectral_checks(report, ctx, scalar, maxwell, l_dense, m_dense, mesh, skeleton)
    return report


def _spectral_checks(report, ctx, scalar, maxwell, l_dense, m_dense, mesh, skeleton):
    """Dense spectral inequalities tying the preconditioners to volume bounds."""
    slack = 1.0 + 1e-9
    tr = scalar.transfer.skeleton_trace.matrix.toarray()

    # Jacobi pushed through the skeleton: cond of the preconditioned interface
    # operator is bounded by the volume Jacobi condition number.
    s_mat = materialize(scalar.schur.apply, scalar.schur.dim)
    jac_inv = 1.0 / np.diag(l_dense)
    pushed = (tr * jac_inv) @ tr.T
    lhs = estimate_condition(
        lambda u: s_mat @ u, lambda u: pushed @ u, s_mat.shape[0]
    ).cond
    rhs = estimate_condition(
        lambda u: l_dense @ u, lambda u: jac_inv * u, l_dense.shape[0]
    ).cond
    report.add_residual("jacobi-pushdown-cond-bound", ctx, lhs, rhs * slack)

    # The same mechanism for the Neumann-Neumann average, using its volume
    # pullback X = lift Q lift^T + (I - P) Linv (I - P)^T, whose push-down is
    # exactly Q.
    q_mat = materialize(scalar.qnn, scalar.schur.dim)
    lift = pseudoinverse_surjective(tr, l_dense)
    proj = lift @ tr
    l_inv = sla.inv(l_dense)
    comp = np.eye(l_dense.shape[0]) - proj
    pullback = lift @ q_mat @ lift.T + comp @ l_inv @ comp.T
    report.add_residual(
        "volume-pullback-pushdown",
        ctx,
        float(np.abs(tr @ pullback @ tr.T - q_mat).max()),
        1e-9,
    )
    lhs = estimate_condition(
        lambda u: s_mat @ u, lambda u: q_mat @ u, s_mat.shape[0]
    ).cond
    rhs = estimate_condition(
        lambda u: l_dense @ u, lambda u: pullback @ u, l_dense.shape[0]
    ).cond
    report.add_residual("average-pushdown-cond-bound", ctx, lhs, rhs * slack)
    cond_nn = lhs

    # Final estimate: the edge preconditioner's condition number is bounded by
    # the scalar one times the volume auxiliary-space condition number.
    se_mat = materialize(maxwell.schur.apply, maxwell.schur.dim)
    qhx_mat = materialize(maxwell.qhx, maxwell.qhx.dim)
    cond_hx = estimate_condition(
        lambda u: se_mat @ u, lambda u: qhx_mat @ u, se_mat.shape[0]
    ).cond

    grad_vol = build_gradient(mesh, "volume").matrix.toarray()
    jac_edge_inv = np.diag(1.0 / np.diag(m_dense))
    aux = jac_edge_inv + grad_vol @ sla.solve(l_dense, grad_vol.T, assume_a="pos")
    for d in range(3):
        pv = build_nodal_interp(mesh, d, "volume").matrix.toarray()
        aux = aux + pv @ sla.solve(l_dense, pv.T, assume_a="pos")
    cond_aux = estimate_condition(
        lambda u: m_dense @ u, lambda u: aux @ u, m_dense.shape[0]
    ).cond
    report.add_residual(
        "edge-final-cond-estimate", ctx, cond_hx, cond_nn * cond_aux * slack
    )
