"""Degrees of freedom for nodal (P1) and edge (lowest-order Nedelec) spaces.

Four flavours exist per element family: the volume space on the whole mesh,
the broken product space over subdomains, the skeleton space, and the
boundary-tuple product space over subdomain boundaries.  The transfer
operators between them are pure index maps with signs in {+1}: because every
edge is globally oriented from its low vertex to its high vertex, subdomain
and skeleton copies of a dof agree with the volume dof without sign flips.

The square of maps (volume -> broken -> boundary tuple) and (volume ->
skeleton -> boundary tuple) commutes entry for entry in exact arithmetic;
tests assert a literally zero residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import BoxMesh, SkeletonIndex

__all__ = [
    "DofSpace",
    "IndexMap",
    "TransferOps",
    "Multiplicity",
    "Spaces",
    "build_spaces",
    "build_transfer",
    "build_multiplicity",
]


@dataclass(frozen=True)
class DofSpace:
    """A finite-dimensional dof set; product spaces carry block offsets."""

    kind: str  # e.g. "scalar-volume", "edge-boundary"
    dim: int
    block_offsets: np.ndarray | None = None  # len n_blocks+1 for product spaces

    def block_slice(self, j: int) -> slice:
        if self.block_offsets is None:
            raise ValueError(f"{self.kind} space has no blocks")
        return slice(int(self.block_offsets[j]), int(self.block_offsets[j + 1]))


@dataclass
class IndexMap:
    """Sparse 0/+1 map between dof spaces, stored as explicit index triples."""

    source: DofSpace
    target: DofSpace
    rows: np.ndarray
    cols: np.ndarray
    signs: np.ndarray
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.rows.shape == self.cols.shape == self.signs.shape):
            raise ValueError("index triple arrays must share a shape")
        if np.any(self.signs != 1.0):
            raise ValueError("transfer maps must carry +1 signs only")

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            m = sp.csr_matrix(
                (self.signs, (self.rows, self.cols)),
                shape=(self.target.dim, self.source.dim),
            )
            m.sort_indices()
            self._matrix = m
        return self._matrix

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def transpose_apply(self, w: np.ndarray) -> np.ndarray:
        return self.matrix.T @ w


@dataclass(frozen=True)
class TransferOps:
    """The four transfer maps of one element family (scalar or edge).

    skeleton_trace : volume -> skeleton (select skeleton dofs)
    volume_split   : volume -> broken   (copy into every subdomain)
    boundary_trace : broken -> boundary tuple (block-diagonal trace)
    skeleton_split : skeleton -> boundary tuple (copy onto every boundary)
    """

    field: str
    skeleton_trace: IndexMap
    volume_split: IndexMap
    boundary_trace: IndexMap
    skeleton_split: IndexMap


@dataclass(frozen=True)
class Multiplicity:
    """Counting weights for the Neumann-Neumann average.

    ``tuple_weights`` is the (identity) weight on the boundary-tuple space;
    ``skeleton_degree`` is its push-down onto the skeleton: the number of
    subdomain boundaries through each skeleton vertex.
    """

    tuple_weights: np.ndarray
    skeleton_degree: np.ndarray


@dataclass(frozen=True)
class Spaces:
    """All eight dof spaces of a partitioned mesh plus the subdomain dof lists."""

    scalar_volume: DofSpace
    scalar_broken: DofSpace
    scalar_skeleton: DofSpace
    scalar_boundary: DofSpace
    edge_volume: DofSpace
    edge_broken: DofSpace
    edge_skeleton: DofSpace
    edge_boundary: DofSpace
    subdomain_vertices: list[np.ndarray]
    subdomain_edges: list[np.ndarray]


def _offsets(sizes: list[int]) -> np.ndarray:
    out = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=out[1:])
    return out


def build_spaces(mesh: BoxMesh, skeleton: SkeletonIndex) -> Spaces:
    subdomain_vertices = []
    subdomain_edges = []
    for j in range(mesh.n_subdomains):
        mask = mesh.tet_subdomain == j
        subdomain_vertices.append(np.unique(mesh.tets[mask]))
        subdomain_edges.append(np.unique(mesh.tet_edges[mask]))

    sv = DofSpace("scalar-volume", mesh.n_vertices)
    sb = DofSpace(
        "scalar-broken",
        int(sum(v.size for v in subdomain_vertices)),
        _offsets([v.size for v in subdomain_vertices]),
    )
    ss = DofSpace("scalar-skeleton", skeleton.n_skeleton_vertices)
    st = DofSpace(
        "scalar-boundary",
        int(sum(v.size for v in skeleton.boundary_vertices)),
        _offsets([v.size for v in skeleton.boundary_vertices]),
    )
    ev = DofSpace("edge-volume", mesh.n_edges)
    eb = DofSpace(
        "edge-broken",
        int(sum(e.size for e in subdomain_edges)),
        _offsets([e.size for e in subdomain_edges]),
    )
    es = DofSpace("edge-skeleton", skeleton.n_skeleton_edges)
    et = DofSpace(
        "edge-boundary",
        int(sum(e.size for e in skeleton.boundary_edges)),
        _offsets([e.size for e in skeleton.boundary_edges]),
    )
    return Spaces(sv, sb, ss, st, ev, eb, es, et, subdomain_vertices, subdomain_edges)


def _selection(source: DofSpace, target: DofSpace, cols: np.ndarray) -> IndexMap:
    rows = np.arange(cols.size, dtype=np.int64)
    return IndexMap(source, target, rows, cols.astype(np.int64), np.ones(cols.size))


def _stacked_selection(
    source: DofSpace, target: DofSpace, cols_per_block: list[np.ndarray]
) -> IndexMap:
    rows = np.arange(int(target.dim), dtype=np.int64)
    cols = np.concatenate(cols_per_block) if cols_per_block else np.empty(0, np.int64)
    return IndexMap(source, target, rows, cols.astype(np.int64), np.ones(cols.size))


def build_transfer(
    mesh: BoxMesh, skeleton: SkeletonIndex, spaces: Spaces, field: str
) -> TransferOps:
    """Build the four transfer maps for ``field`` in {"scalar", "edge"}."""
    if field == "scalar":
        volume, broken, skel, tup = (
            spaces.scalar_volume,
            spaces.scalar_broken,
            spaces.scalar_skeleton,
            spaces.scalar_boundary,
        )
        sub_dofs = spaces.subdomain_vertices
        bnd_dofs = skeleton.boundary_vertices
        skel_dofs = skeleton.skeleton_vertices
    elif field == "edge":
        volume, broken, skel, tup = (
            spaces.edge_volume,
            spaces.edge_broken,
            spaces.edge_skeleton,
            spaces.edge_boundary,
        )
        sub_dofs = spaces.subdomain_edges
        bnd_dofs = skeleton.boundary_edges
        skel_dofs = skeleton.skeleton_edges
    else:
        raise ValueError(f"unknown field {field!r}")

    skeleton_trace = _selection(volume, skel, skel_dofs)
    volume_split = _stacked_selection(volume, broken, list(sub_dofs))

    # Boundary dofs expressed in each subdomain's local numbering: both lists
    # are sorted by global id, so searchsorted gives the local positions.
    local_boundary = []
    skeleton_position = []
    for j in range(mesh.n_subdomains):
        loc = np.searchsorted(sub_dofs[j], bnd_dofs[j])
        if np.any(sub_dofs[j][loc] != bnd_dofs[j]):
            raise AssertionError(f"boundary dof of subdomain {j} not in subdomain")
        local_boundary.append(int(broken.block_offsets[j]) + loc)
        pos = np.searchsorted(skel_dofs, bnd_dofs[j])
        if np.any(skel_dofs[pos] != bnd_dofs[j]):
            raise AssertionError(f"boundary dof of subdomain {j} not on skeleton")
        skeleton_position.append(pos)

    boundary_trace = _stacked_selection(broken, tup, local_boundary)
    skeleton_split = _stacked_selection(skel, tup, skeleton_position)

    # Every skeleton dof must appear on at least one subdomain boundary,
    # otherwise the split map would have a kernel.
    covered = np.zeros(skel.dim, dtype=bool)
    covered[skeleton_split.cols] = True
    if not covered.all():
        raise AssertionError("skeleton dof missing from every subdomain boundary")

    return TransferOps(field, skeleton_trace, volume_split, boundary_trace, skeleton_split)


def build_multiplicity(skeleton: SkeletonIndex, spaces: Spaces) -> Multiplicity:
    degree = skeleton.vertex_degree[skeleton.skeleton_vertices].astype(float)
    return Multiplicity(
        tuple_weights=np.ones(spaces.scalar_boundary.dim),
        skeleton_degree=degree,
    )
