"""Skeleton preconditioners: Neumann-Neumann and the substructured Hiptmair-Xu.

The Neumann-Neumann preconditioner composes five factors around the blockwise
inverse DtN:

    Q f = degree^{-1} . glue . weights . DtN^{-1} . weights . split . degree^{-1} f

with unit counting weights on the boundary tuple and the subdomain-boundary
degree as the skeleton diagonal.  With one subdomain it is the exact inverse
of the interface operator.

The edge-space preconditioner sums a skeleton Jacobi term with one gradient
and three nodal-interpolation pullbacks of the scalar Neumann-Neumann:

    Q_hx f = f / jac + grad . Q(grad^T f) + sum_d interp_d . Q(interp_d^T f)

so one application costs exactly four scalar Neumann-Neumann applies (one per
auxiliary-space channel); an ``n_applies`` counter on Q makes that checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .assemble import (
    Coefficients,
    SparseSymOp,
    assemble_edge,
    assemble_scalar,
    jacobi_diagonal,
)
from .dofspaces import (
    Multiplicity,
    Spaces,
    TransferOps,
    build_multiplicity,
    build_spaces,
    build_transfer,
)
from .discrete_ops import GradientMap, NodalInterpMap, build_gradient, build_nodal_interp
from .errors import SingularOperatorError
from .krylov import pcg
from .mesh import BoxMesh, SkeletonIndex, extract_skeleton
from .schur import SchurSystem, build_schur_system

__all__ = [
    "NeumannNeumann",
    "HiptmairXu",
    "ScalarProblem",
    "MaxwellProblem",
    "setup_scalar",
    "setup_maxwell",
    "CondEstimate",
    "estimate_condition",
    "materialize",
]


class NeumannNeumann:
    """Degree-weighted average of subdomain Neumann solves on the skeleton."""

    def __init__(self, schur: SchurSystem, multiplicity: Multiplicity):
        if schur.kind != "scalar-blocks":
            raise ValueError(f"expected a scalar interface system, got {schur.kind}")
        self.schur = schur
        self.split = schur.transfer.skeleton_split.matrix
        self.degree = multiplicity.skeleton_degree
        self.weights = multiplicity.tuple_weights
        self.dim = schur.dim
        self.n_applies = 0

    def __call__(self, f: np.ndarray) -> np.ndarray:
        if f.shape != (self.dim,):
            raise ValueError(f"expected skeleton vector of length {self.dim}")
        self.n_applies += 1
        v = self.split @ (f / self.degree)
        w = self.weights * self.schur.apply_dtn_inv(self.weights * v)
        return (self.split.T @ w) / self.degree


class HiptmairXu:
    """Skeleton Jacobi plus gradient/interpolation pullbacks of Neumann-Neumann."""

    def __init__(
        self,
        jacobi_skeleton: np.ndarray,
        skeleton_gradient: GradientMap,
        skeleton_interps: list[NodalInterpMap],
        nn: NeumannNeumann,
    ):
        if skeleton_gradient.variant != "skeleton":
            raise ValueError("gradient map must be the skeleton variant")
        if len(skeleton_interps) != 3:
            raise ValueError("need one interpolation map per Cartesian direction")
        self.jacobi_inv = 1.0 / jacobi_skeleton
        self.gradient = skeleton_gradient.matrix
        self.interps = [m.matrix for m in skeleton_interps]
        self.nn = nn
        self.dim = self.gradient.shape[0]

    def __call__(self, f: np.ndarray) -> np.ndarray:
        if f.shape != (self.dim,):
            raise ValueError(f"expected skeleton edge vector of length {self.dim}")
        out = self.jacobi_inv * f
        out = out + self.gradient @ self.nn(self.gradient.T @ f)
        for interp in self.interps:
            out = out + interp @ self.nn(interp.T @ f)
        return out


@dataclass
class ScalarProblem:
    """Everything needed to run the scalar interface solve."""

    mesh: BoxMesh
    skeleton: SkeletonIndex
    spaces: Spaces
    coeffs: Coefficients
    transfer: TransferOps
    multiplicity: Multiplicity
    blocks: SparseSymOp
    schur: SchurSystem
    qnn: NeumannNeumann

    @property
    def dim_skeleton(self) -> int:
        return self.schur.dim

    @property
    def dim_volume(self) -> int:
        return self.mesh.n_vertices


@dataclass
class MaxwellProblem:
    """The edge interface solve plus its auxiliary scalar machinery."""

    mesh: BoxMesh
    skeleton: SkeletonIndex
    spaces: Spaces
    coeffs: Coefficients
    transfer: TransferOps
    blocks: SparseSymOp
    schur: SchurSystem
    scalar: ScalarProblem
    jacobi_skeleton: np.ndarray
    gradient: GradientMap
    interps: list[NodalInterpMap]
    qhx: HiptmairXu

    @property
    def dim_skeleton(self) -> int:
        return self.schur.dim

    @property
    def dim_volume(self) -> int:
        return self.mesh.n_edges


def setup_scalar(
    mesh: BoxMesh,
    coeffs: Coefficients,
    skeleton: SkeletonIndex | None = None,
    spaces: Spaces | None = None,
) -> ScalarProblem:
    if skeleton is None:
        skeleton = extract_skeleton(mesh)
    if spaces is None:
        spaces = build_spaces(mesh, skeleton)
    transfer = build_transfer(mesh, skeleton, spaces, "scalar")
    multiplicity = build_multiplicity(skeleton, spaces)
    blocks = assemble_scalar(mesh, spaces, coeffs, scope="blocks")
    schur = build_schur_system(
        blocks, transfer, skeleton.boundary_vertices, spaces.subdomain_vertices
    )
    qnn = NeumannNeumann(schur, multiplicity)
    return ScalarProblem(
        mesh, skeleton, spaces, coeffs, transfer, multiplicity, blocks, schur, qnn
    )


def setup_maxwell(
    mesh: BoxMesh,
    coeffs: Coefficients,
    skeleton: SkeletonIndex | None = None,
    spaces: Spaces | None = None,
) -> MaxwellProblem:
    if skeleton is None:
        skeleton = extract_skeleton(mesh)
    if spaces is None:
        spaces = build_spaces(mesh, skeleton)
    scalar = setup_scalar(mesh, coeffs, skeleton, spaces)

    transfer = build_transfer(mesh, skeleton, spaces, "edge")
    blocks = assemble_edge(mesh, spaces, coeffs, scope="blocks")
    schur = build_schur_system(
        blocks, transfer, skeleton.boundary_edges, spaces.subdomain_edges
    )

    volume_op = assemble_edge(mesh, spaces, coeffs, scope="global")
    jac = jacobi_diagonal(volume_op)[skeleton.skeleton_edges]
    gradient = build_gradient(mesh, "skeleton", skeleton)
    interps = [build_nodal_interp(mesh, d, "skeleton", skeleton) for d in range(3)]
    qhx = HiptmairXu(jac, gradient, interps, scalar.qnn)
    return MaxwellProblem(
        mesh,
        skeleton,
        spaces,
        coeffs,
        transfer,
        blocks,
        schur,
        scalar,
        jac,
        gradient,
        interps,
        qhx,
    )


def materialize(apply_op, dim: int) -> np.ndarray:
    """Dense matrix of a linear callable, one identity column at a time."""
    cols = np.empty((dim, dim))
    e = np.zeros(dim)
    for i in range(dim):
        e[i] = 1.0
        cols[:, i] = apply_op(e)
        e[i] = 0.0
    return cols


@dataclass(frozen=True)
class CondEstimate:
    lmin: float
    lmax: float
    cond: float
    method: str


def estimate_condition(
    apply_op, apply_prec, dim: int, method: str = "dense", seed: int = 0
) -> CondEstimate:
    """Spectral bounds of prec . op for SPD op and prec.

    "dense" materializes both operators and solves the symmetric-definite
    eigenproblem exactly (prec.op is similar to C^T prec C with op = C C^T),
    so lmin/lmax are the true extremes.  "lanczos" runs preconditioned CG on
    a seeded random right-hand side and takes the extreme eigenvalues of the
    CG-Lanczos tridiagonal, which bound the spectrum from inside: the reported
    condition number is a lower bound on the true one.
    """
    if method == "dense":
        op = materialize(apply_op, dim)
        prec = materialize(apply_prec, dim)
        op = (op + op.T) / 2.0
        prec = (prec + prec.T) / 2.0
        try:
            chol = sla.cholesky(op, lower=True)
        except sla.LinAlgError as err:
            raise SingularOperatorError("operator is not SPD") from err
        w = chol.T @ prec @ chol
        evs = sla.eigvalsh((w + w.T) / 2.0)
        lmin, lmax = float(evs[0]), float(evs[-1])
    elif method == "lanczos":
        rng = np.random.default_rng(seed)
        rhs = rng.uniform(-1.0, 1.0, dim)
        report = pcg(
            apply_op, apply_prec, rhs, tol=1e-14, max_iter=min(dim, 200)
        )
        alphas = report.history.alphas
        betas = report.history.betas
        m = alphas.size
        if m == 0:
            raise SingularOperatorError("no CG steps taken; cannot estimate spectrum")
        diag = 1.0 / alphas
        diag[1:] += betas[: m - 1] / alphas[: m - 1]
        off = np.sqrt(betas[: m - 1]) / alphas[: m - 1]
        evs = sla.eigvalsh_tridiagonal(diag, off) if m > 1 else diag
        lmin, lmax = float(np.min(evs)), float(np.max(evs))
    else:
        raise ValueError(f"unknown method {method!r}")
    if lmin <= 0:
        raise SingularOperatorError(f"nonpositive eigenvalue estimate {lmin}")
    return CondEstimate(lmin, lmax, lmax / lmin, method)
