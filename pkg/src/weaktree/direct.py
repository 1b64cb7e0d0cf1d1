"""Direct discretization of the Schrodinger operator on a truncated tree.

Every edge is discretized separately with linear finite elements; the
unknown at a vertex is shared by all incident edges, which makes the
solution continuous, and the flux balance at the vertex is then the natural
condition of the assembled form.  The root carries the natural (Neumann)
condition; the far ends of the cut edges are Dirichlet (or Neumann).

Unknowns are numbered in depth-first pre-order, so every unknown's parent
has a smaller index.  Eliminating from the highest index down therefore
produces no fill, which gives exact inertia counts in linear time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, sparse
from scipy.io import mmwrite
from scipy.sparse.linalg import eigsh

from .errors import SizeCapError, UnconvergedError
from .halfline import EigResult, Grid, make_grid
from .tree import RegularTree

__all__ = [
    "TreeGraphMatrix",
    "build_graph_matrix",
    "direct_negative_spectrum",
    "direct_count",
    "dump_coo",
    "kirchhoff_residual",
]


@dataclass(eq=False)
class TreeGraphMatrix:
    """Assembled pencil ``(A, M)`` of a truncated tree.

    ``A`` and ``mass`` are restricted to free unknowns (Dirichlet leaves
    removed).  ``parent[i]`` is the free index of the neighbor of ``i`` toward
    the root (``-1`` for the root) and ``parent_off[i]`` the matrix entry
    coupling them.  ``stiffness`` is the kinetic part on all unknowns before
    the Dirichlet rows are removed.
    """

    A: sparse.csr_matrix
    mass: np.ndarray
    diag: np.ndarray
    parent: np.ndarray
    parent_off: np.ndarray
    radius: np.ndarray
    vertex_index: dict
    edges: list
    stiffness: sparse.csr_matrix
    free: np.ndarray
    leaf_boundary: str
    radial_grid: Grid = field(repr=False, default=None)

    @property
    def dimension(self) -> int:
        return len(self.mass)


def _edge_nodes(x, a, b):
    tol = 1e-12 * max(1.0, b)
    i = int(np.searchsorted(x, a - tol))
    j = int(np.searchsorted(x, b + tol))
    seg = x[i:j]
    if abs(seg[0] - a) > tol or abs(seg[-1] - b) > tol:
        raise ValueError("radial grid is not aligned with the tree vertices")
    return seg


def build_graph_matrix(
    tree: RegularTree,
    V,
    lam: float,
    generations: int,
    h: float,
    L: Optional[float] = None,
    *,
    leaf_boundary: str = "dirichlet",
    cap: int = 200_000,
    grid: Optional[Grid] = None,
) -> TreeGraphMatrix:
    """Assemble the truncated tree with vertices of generations ``1..generations``.

    Edges of the last kept generation are cut at radius ``L``.  When a
    radial ``grid`` is given its nodes are used on every edge; otherwise a
    uniform breakpoint-aligned grid of step ``h`` is built.
    """
    if leaf_boundary not in ("dirichlet", "neumann"):
        raise ValueError("leaf_boundary must be 'dirichlet' or 'neumann'")
    G = generations
    if G > tree.generations and tree.geometric_ratio is None:
        G = tree.generations
    if L is None:
        L = grid.L if grid is not None else 2.0 * tree.distance(G) if G else 1.0
    if G and not tree.distance(G) < L:
        raise ValueError("the cut radius L must exceed the last kept vertex")
    vert = [tree.distance(j) for j in range(1, G + 1)]
    if grid is None:
        bps = vert + list(V.breakpoints(0.0, L))
        grid = make_grid(0.0, L, h, bps)
    x = grid.nodes
    cuts = [0.0] + vert + [L]
    per_edge = [len(_edge_nodes(x, a, b)) - 1 for a, b in zip(cuts[:-1], cuts[1:])]
    total = 1 + sum(int(tree.product(j)) * per_edge[j] for j in range(len(per_edge)))
    if total > cap:
        raise SizeCapError(f"{total} unknowns exceed the cap of {cap}")

    rows, cols, vals = [], [], []
    n_dof = 0
    radius = []
    parent = []
    mass = []
    pot = []
    edges = []
    vertex_index = {}

    def new_dof(r, par):
        nonlocal n_dof
        radius.append(r)
        parent.append(par)
        mass.append(0.0)
        pot.append(0.0)
        n_dof += 1
        return n_dof - 1

    root = new_dof(0.0, -1)
    vertex_index[(0, 0)] = root
    leaves = []
    counter = [0] * (G + 1)
    # depth-first traversal: stack of (generation of edge, start dof)
    stack = [(0, root)]
    while stack:
        j, start = stack.pop()
        a, b = cuts[j], cuts[j + 1]
        seg = _edge_nodes(x, a, b)
        prev = start
        dofs = [start]
        for r in seg[1:]:
            dofs.append(new_dof(float(r), prev))
            prev = dofs[-1]
        edges.append((j, start, dofs[-1], a, b))
        hc = np.diff(seg)
        tl = seg[:-1] + 0.25 * hc
        tr = seg[1:] - 0.25 * hc
        vl = lam * V(tl) if lam else np.zeros_like(tl)
        vr = lam * V(tr) if lam else np.zeros_like(tr)
        for c in range(len(hc)):
            p, q = dofs[c], dofs[c + 1]
            s = 1.0 / hc[c]
            rows += [p, q, p, q]
            cols += [p, q, q, p]
            vals += [s, s, -s, -s]
            mass[p] += 0.5 * hc[c]
            mass[q] += 0.5 * hc[c]
            pot[p] += vl[c] * 0.5 * hc[c]
            pot[q] += vr[c] * 0.5 * hc[c]
        end = dofs[-1]
        if j + 1 <= G:
            counter[j + 1] += 1
            vertex_index[(j + 1, counter[j + 1] - 1)] = end
            for _ in range(tree.branching(j + 1)):
                stack.append((j + 1, end))
        else:
            leaves.append(end)

    n = n_dof
    K = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mass = np.asarray(mass)
    pot = np.asarray(pot)
    A_full = K + sparse.diags(pot)
    free = np.ones(n, dtype=bool)
    if leaf_boundary == "dirichlet":
        free[leaves] = False
    idx = np.flatnonzero(free)
    remap = -np.ones(n, dtype=np.int64)
    remap[idx] = np.arange(len(idx))
    A = A_full[idx][:, idx].tocsr()
    par_full = np.asarray(parent)
    par = np.where(par_full[idx] >= 0, remap[np.maximum(par_full[idx], 0)], -1)
    par_off = np.zeros(len(idx))
    has = par >= 0
    par_off[has] = np.asarray(A[np.flatnonzero(has), par[has]]).ravel()
    return TreeGraphMatrix(
        A=A,
        mass=mass[idx],
        diag=A.diagonal(),
        parent=par,
        parent_off=par_off,
        radius=np.asarray(radius)[idx],
        vertex_index=vertex_index,
        edges=edges,
        stiffness=K,
        free=idx,
        leaf_boundary=leaf_boundary,
        radial_grid=grid,
    )


def direct_count(M: TreeGraphMatrix, s: float = 0.0) -> int:
    """Eigenvalues of the tree pencil below ``s`` by fill-free elimination."""
    d = (M.diag - s * M.mass).tolist()
    par = M.parent.tolist()
    o2 = (M.parent_off**2).tolist()
    count = 0
    for i in range(len(d) - 1, -1, -1):
        q = d[i]
        if q == 0.0:
            q = -1e-300
        if q < 0.0:
            count += 1
        p = par[i]
        if p >= 0:
            d[p] -= o2[i] / q
    return count


def _lower_bound(M: TreeGraphMatrix) -> float:
    inv = 1.0 / np.sqrt(M.mass)
    B = sparse.diags(inv) @ M.A @ sparse.diags(inv)
    radius = np.asarray(abs(B).sum(axis=1)).ravel() - np.abs(B.diagonal())
    return float(np.min(B.diagonal() - radius))


def direct_negative_spectrum(M: TreeGraphMatrix, m: int, dense_limit: int = 3000) -> EigResult:
    """The lowest ``m`` eigenvalues of the tree pencil, negatives retained."""
    n_neg = direct_count(M, 0.0)
    k = min(m, n_neg, M.dimension - 1)
    if k <= 0:
        return EigResult((), n_neg, M.radial_grid)
    inv = 1.0 / np.sqrt(M.mass)
    if M.dimension <= dense_limit:
        B = (M.A.toarray() * inv[:, None]) * inv[None, :]
        vals, vecs = linalg.eigh(B, subset_by_index=[0, k - 1])
        vecs = vecs * inv[:, None]
    else:
        sigma = _lower_bound(M) - 1.0
        vals, vecs = eigsh(M.A.tocsc(), k=k, M=sparse.diags(M.mass).tocsc(), sigma=sigma, which="LM")
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    for e, v in zip(vals, vecs.T):
        r = M.A @ v - e * (M.mass * v)
        if np.linalg.norm(r) > 1e-8 * np.linalg.norm(v) * max(1.0, abs(e)):
            raise UnconvergedError(f"eigenpair residual {np.linalg.norm(r):.3e} too large")
    neg = tuple(float(v) for v in vals if v < 0)
    return EigResult(neg, n_neg, M.radial_grid, values=tuple(float(v) for v in vals))


def dump_coo(M: TreeGraphMatrix, path_prefix: str) -> tuple:
    """Write ``A`` and the diagonal mass as Matrix Market coordinate files."""
    a_path = f"{path_prefix}_A.mtx"
    m_path = f"{path_prefix}_M.mtx"
    mmwrite(a_path, M.A.tocoo(), comment="stiffness plus potential, free unknowns")
    mmwrite(m_path, sparse.diags(M.mass).tocoo(), comment="lumped mass")
    return a_path, m_path


def kirchhoff_residual(M: TreeGraphMatrix, u: np.ndarray) -> float:
    """Largest flux imbalance ``|sum_out u' - u'_in|`` over internal vertices.

    ``u`` is indexed by free unknowns; derivatives are difference quotients
    on the cells adjacent to each vertex.
    """
    full = np.zeros(M.stiffness.shape[0])
    full[M.free] = u
    K = M.stiffness.tolil()
    worst = 0.0
    for (gen, _), v in M.vertex_index.items():
        if gen == 0:
            continue
        inward = outward = 0.0
        for w in K.rows[v]:
            if w == v:
                continue
            slope = (full[w] - full[v]) * -K[v, w]
            # pre-order numbering: the neighbor toward the root has the smaller index
            if w < v:
                inward -= slope
            else:
                outward += slope
        worst = max(worst, abs(outward - inward))
    return worst
