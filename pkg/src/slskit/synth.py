"""H2 synthesis of structured FIR system responses.

The synthesis problems here are equality-constrained least squares:
the achievability recursions (see :mod:`slskit.response`) are affine in
the response coefficients, support masks simply remove variables, and
the H2 norm is the Euclidean norm of a linear map of the remaining
coefficients.

For state feedback the problem separates across columns of
``(Phi_xx, Phi_ux)``: column ``j`` is the closed-loop response to a
disturbance at node ``j`` and couples to no other column.  Columns are
therefore assembled and solved independently (and optionally in
parallel).  Output feedback couples rows and columns through the dual
recursions, so it is solved as a single stacked program within a
configurable size budget.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .plant import PlantModel
from .response import Fir, SystemResponse
from .slc import SlcSet

__all__ = [
    "EqLsSolution",
    "solve_eq_ls",
    "h2_cost",
    "SynthesisProblem",
    "ColumnStatus",
    "SynthesisResult",
    "synthesize_sf_h2",
    "synthesize_of_h2",
    "centralized_baseline",
]


# ---------------------------------------------------------------------------
# equality-constrained least-squares kernel
# ---------------------------------------------------------------------------


@dataclass
class EqLsSolution:
    """Solution record of :func:`solve_eq_ls`.

    ``eq_residual`` is the largest absolute violation of ``E x = f`` at
    the returned point -- the infeasibility certificate.  ``degenerate``
    flags a rank-deficient reduced objective (non-unique minimizer; the
    minimum-norm one is returned).
    """

    x: np.ndarray
    eq_residual: float
    degenerate: bool = False


def _eq_residual(E, x, f) -> float:
    if E.shape[0] == 0:
        return 0.0
    r = E @ x - f
    return float(np.max(np.abs(r)))


def _solve_dense(G, h, E, f) -> EqLsSolution:
    G = G.toarray() if sp.issparse(G) else np.asarray(G, dtype=float)
    E = E.toarray() if sp.issparse(E) else np.asarray(E, dtype=float)
    nvar = G.shape[1]

    if E.shape[0] == 0:
        if G.shape[0] == 0:
            return EqLsSolution(np.zeros(nvar), 0.0, degenerate=nvar > 0)
        x, _, rank, _ = np.linalg.lstsq(G, h, rcond=None)
        return EqLsSolution(x, 0.0, degenerate=rank < nvar)

    U, s, Vt = np.linalg.svd(E)
    cutoff = max(E.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int(np.sum(s > cutoff))
    Uf = U.T @ f
    x0 = Vt[:r].T @ (Uf[:r] / s[:r]) if r else np.zeros(E.shape[1])
    eq_res = _eq_residual(E, x0, f)

    Z = Vt[r:].T  # orthonormal basis of null(E)
    degenerate = False
    x = x0
    if Z.shape[1]:
        if G.shape[0]:
            GZ = G @ Z
            y, _, rank, _ = np.linalg.lstsq(GZ, h - G @ x0, rcond=None)
            degenerate = rank < Z.shape[1]
            x = x0 + Z @ y
        # no objective: the minimum-norm feasible point x0 stands
    return EqLsSolution(x, eq_res, degenerate)


def _solve_sparse(G, h, E, f) -> EqLsSolution:
    G = sp.csr_matrix(G)
    E = sp.csr_matrix(E)
    nvar = G.shape[1]
    m = E.shape[0]
    GtG = (G.T @ G).tocsc()
    gth = G.T @ h
    if m == 0:
        K = GtG
        rhs = gth
    else:
        K = sp.bmat([[GtG, E.T], [E, None]], format="csc")
        rhs = np.concatenate([gth, f])
    degenerate = False
    try:
        sol = splu(K).solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise RuntimeError("non-finite solve")
    except RuntimeError:
        # pivoted factorization failed: fall back to a tiny Tikhonov
        # regularization of the saddle system and flag the degeneracy
        scale = max(abs(K).max(), 1.0)
        mu = 1e-10 * scale
        reg = sp.diags(
            np.concatenate([np.full(nvar, mu), np.full(m, -mu)]), format="csc"
        )
        sol = splu((K + reg).tocsc()).solve(rhs)
        degenerate = True
    x = sol[:nvar]
    return EqLsSolution(x, _eq_residual(E, x, f), degenerate)


def solve_eq_ls(G, h, E, f, *, dense_limit: int = 800) -> EqLsSolution:
    """Minimize ``||G x - h||`` subject to ``E x = f``.

    Inconsistent constraints are not an error: the returned point
    minimizes the constraint violation and ``eq_residual`` reports its
    infinity norm, leaving the feasibility decision to the caller.
    Among optimal points the minimum-norm one is returned.

    Small systems (variables plus constraint rows at most
    ``dense_limit``) use an SVD null-space method, which is robust to
    rank deficiency on either side.  Larger systems are solved through
    a sparse factorization of the stationarity system
    ``[[G'G, E'], [E, 0]]``; this requires the usual second-order
    regularity (objective positive definite on the null space of ``E``
    and full-row-rank ``E``) and falls back to a regularized
    factorization otherwise.
    """
    h = np.asarray(h, dtype=float).ravel()
    f = np.asarray(f, dtype=float).ravel()
    if G.shape[0] != h.size:
        raise ValueError("G and h row mismatch")
    if E.shape[0] != f.size:
        raise ValueError("E and f row mismatch")
    if G.shape[1] != E.shape[1]:
        raise ValueError("G and E column mismatch")
    if G.shape[1] + E.shape[0] <= dense_limit:
        return _solve_dense(G, h, E, f)
    return _solve_sparse(G, h, E, f)


# ---------------------------------------------------------------------------
# H2 cost
# ---------------------------------------------------------------------------


def h2_cost(plant: PlantModel, resp: SystemResponse) -> float:
    """H2 norm of the closed-loop map from ``w`` to ``zbar``.

    Evaluates ``sqrt(sum_{t>=1} ||C1 Phi_xx[t] B1 + C1 Phi_xy[t] D21 +
    D12 Phi_ux[t] B1 + D12 Phi_uy[t] D21||_F^2 + ||D12 Phi_uy[0] D21 +
    D11||_F^2)`` with the measurement terms absent for state-feedback
    responses.
    """
    C1, D12, B1, D21, D11 = plant.C1, plant.D12, plant.B1, plant.D21, plant.D11
    of = resp.is_output_feedback
    static = D11.copy()
    if of:
        static = static + D12 @ resp.Phi_uy[0] @ D21
    total = float(np.sum(static**2))
    for t in range(1, resp.horizon + 1):
        comp = C1 @ resp.Phi_xx[t] @ B1 + D12 @ resp.Phi_ux[t] @ B1
        if of:
            comp = comp + C1 @ resp.Phi_xy[t] @ D21 + D12 @ resp.Phi_uy[t] @ D21
        total += float(np.sum(comp**2))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# problem and result records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthesisProblem:
    """A plant, a constraint set, and an information structure."""

    plant: PlantModel
    slc: SlcSet
    mode: str = "state-feedback"

    def __post_init__(self):
        if self.mode not in ("state-feedback", "output-feedback"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.slc.horizon < 1:
            raise ValueError("constraint horizon must be at least 1")
        p = self.plant
        if self.mode == "state-feedback":
            if not p.is_state_feedback:
                raise ValueError("state-feedback mode needs C2 = I, D21 = 0, D22 = 0")
            if self.slc.is_output_feedback:
                raise ValueError("state-feedback mode with output-feedback masks")
        else:
            if not self.slc.is_output_feedback:
                raise ValueError("output-feedback mode needs xy and uy masks")
        shapes = {
            "xx": (p.nx, p.nx),
            "ux": (p.nu, p.nx),
        }
        if self.slc.is_output_feedback:
            shapes["xy"] = (p.nx, p.ny)
            shapes["uy"] = (p.nu, p.ny)
        for name, (r, c) in shapes.items():
            mask = getattr(self.slc, name)
            if (mask.rows, mask.cols) != (r, c):
                raise ValueError(
                    f"mask {name!r} is {mask.rows}x{mask.cols}, plant needs {r}x{c}"
                )


@dataclass
class ColumnStatus:
    """Feasibility certificate of one column (or one stacked solve)."""

    feasible: bool
    residual: float
    degenerate: bool = False


@dataclass
class SynthesisResult:
    response: SystemResponse
    cost: float
    per_column: List[ColumnStatus]
    wall_time: float
    workers_used: int = 1

    @property
    def feasible(self) -> bool:
        return all(c.feasible for c in self.per_column)

    @property
    def columns_infeasible(self) -> int:
        return sum(not c.feasible for c in self.per_column)

    @property
    def residual(self) -> float:
        """Largest equality residual over all solves."""
        return max((c.residual for c in self.per_column), default=0.0)


# ---------------------------------------------------------------------------
# state feedback: per-column assembly and solve
# ---------------------------------------------------------------------------


def _sf_column_solve(plant, slc, j, feas_tol, dense_limit):
    """Assemble and solve the response column for a disturbance at node j.

    Returns ``(supports, x, status, cost_sq)`` where ``supports`` holds
    the per-step allowed index sets used to scatter ``x`` back into the
    coefficient stacks.
    """
    A, B2, C1, D12 = plant.A, plant.B2, plant.C1, plant.D12
    n = plant.nx
    T = slc.horizon
    Sx = [np.nonzero(slc.xx.allowed[t][:, j])[0] for t in range(T + 1)]
    Su = [np.nonzero(slc.ux.allowed[t][:, j])[0] for t in range(T + 1)]

    if j not in Sx[1]:
        # the identity at t = 1 needs the diagonal entry; nothing to solve
        return (Sx, Su, None), ColumnStatus(False, 1.0), 0.0

    xoff = np.zeros(T + 1, dtype=int)
    uoff = np.zeros(T + 1, dtype=int)
    nv = 0
    for t in range(1, T + 1):
        xoff[t] = nv
        nv += len(Sx[t])
        uoff[t] = nv
        nv += len(Su[t])

    er, ec, ev, frhs = [], [], [], []
    nrows = 0

    # t = 1: Phi_xx[1] restricted to its support equals e_j there
    k1 = len(Sx[1])
    er.append(np.arange(k1))
    ec.append(xoff[1] + np.arange(k1))
    ev.append(np.ones(k1))
    rhs1 = np.zeros(k1)
    rhs1[np.searchsorted(Sx[1], j)] = 1.0
    frhs.append(rhs1)
    nrows += k1

    for t in range(1, T + 1):
        Asub = A[:, Sx[t]]
        Bsub = B2[:, Su[t]]
        ar, ac = np.nonzero(Asub)
        br, bc = np.nonzero(Bsub)
        nxt = Sx[t + 1] if t < T else np.empty(0, dtype=int)
        rel = np.union1d(np.union1d(np.unique(ar), np.unique(br)), nxt).astype(int)
        if rel.size == 0:
            continue
        rowmap = np.full(n, -1, dtype=int)
        rowmap[rel] = nrows + np.arange(rel.size)
        sign = -1.0 if t < T else 1.0
        if ar.size:
            er.append(rowmap[ar])
            ec.append(xoff[t] + ac)
            ev.append(sign * Asub[ar, ac])
        if br.size:
            er.append(rowmap[br])
            ec.append(uoff[t] + bc)
            ev.append(sign * Bsub[br, bc])
        if t < T and nxt.size:
            er.append(rowmap[nxt])
            ec.append(xoff[t + 1] + np.arange(nxt.size))
            ev.append(np.ones(nxt.size))
        frhs.append(np.zeros(rel.size))
        nrows += rel.size

    E = sp.csr_matrix(
        (np.concatenate(ev), (np.concatenate(er), np.concatenate(ec))),
        shape=(nrows, nv),
    )
    f = np.concatenate(frhs)

    gr, gc, gv = [], [], []
    grows = 0
    for t in range(1, T + 1):
        Csub = C1[:, Sx[t]]
        Dsub = D12[:, Su[t]]
        cr, cc = np.nonzero(Csub)
        dr, dc = np.nonzero(Dsub)
        relp = np.union1d(np.unique(cr), np.unique(dr)).astype(int)
        if relp.size == 0:
            continue
        pmap = np.full(plant.nz, -1, dtype=int)
        pmap[relp] = grows + np.arange(relp.size)
        if cr.size:
            gr.append(pmap[cr])
            gc.append(xoff[t] + cc)
            gv.append(Csub[cr, cc])
        if dr.size:
            gr.append(pmap[dr])
            gc.append(uoff[t] + dc)
            gv.append(Dsub[dr, dc])
        grows += relp.size
    if gr:
        G = sp.csr_matrix(
            (np.concatenate(gv), (np.concatenate(gr), np.concatenate(gc))),
            shape=(grows, nv),
        )
    else:
        G = sp.csr_matrix((0, nv))

    sol = solve_eq_ls(G, np.zeros(G.shape[0]), E, f, dense_limit=dense_limit)
    status = ColumnStatus(
        feasible=sol.eq_residual <= feas_tol,
        residual=sol.eq_residual,
        degenerate=sol.degenerate,
    )
    cost_sq = float(np.sum((G @ sol.x) ** 2)) if G.shape[0] else 0.0
    return (Sx, Su, (xoff, uoff, sol.x)), status, cost_sq


def synthesize_sf_h2(
    problem: SynthesisProblem,
    *,
    workers: Optional[int] = None,
    feas_tol: float = 1e-8,
    dense_limit: int = 800,
) -> SynthesisResult:
    """Structured H2 state-feedback synthesis by column decomposition.

    Each column ``j`` of ``(Phi_xx, Phi_ux)`` solves an independent
    equality-constrained least-squares problem over its mask-allowed
    coefficients: the achievability recursion restricted to the column
    (recursion terms that land outside the mask become homogeneous
    constraints) with objective ``sum_t ||C1 Phi_xx[t] e_j +
    D12 Phi_ux[t] e_j||^2``.  Column costs combine as ``sum_j
    (B1 B1')_{jj} cost_j^2``, which requires the rows of ``B1`` to be
    orthogonal (diagonal ``B1 B1'``); anything else couples columns and
    is rejected.

    A column whose equality system is inconsistent (residual above
    ``feas_tol``) is reported infeasible and left zero; the overall
    cost is then NaN.  Columns are independent, so solving them in any
    order -- or in parallel with ``workers`` threads -- produces the
    same coefficients.
    """
    if problem.mode != "state-feedback":
        raise ValueError("problem is not in state-feedback mode")
    plant, slc = problem.plant, problem.slc
    n, nu = plant.nx, plant.nu
    T = slc.horizon

    BBt = plant.B1 @ plant.B1.T
    offdiag = BBt - np.diag(np.diag(BBt))
    if offdiag.size and np.max(np.abs(offdiag)) > 1e-12 * max(np.max(np.abs(BBt)), 1.0):
        raise ValueError(
            "column decomposition needs mutually orthogonal disturbance rows "
            "(B1 B1' diagonal)"
        )
    weights = np.diag(BBt)

    t0 = time.perf_counter()
    R = np.zeros((T + 1, n, n))
    M = np.zeros((T + 1, nu, n))
    statuses: List[Optional[ColumnStatus]] = [None] * n
    costs = np.zeros(n)

    def run(j: int):
        (Sx, Su, packed), status, cost_sq = _sf_column_solve(
            plant, slc, j, feas_tol, dense_limit
        )
        if packed is not None:
            xoff, uoff, x = packed
            for t in range(1, T + 1):
                if len(Sx[t]):
                    R[t][Sx[t], j] = x[xoff[t] : xoff[t] + len(Sx[t])]
                if len(Su[t]):
                    M[t][Su[t], j] = x[uoff[t] : uoff[t] + len(Su[t])]
        statuses[j] = status
        costs[j] = cost_sq

    nworkers = workers if workers is not None else min(8, os.cpu_count() or 1)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            list(pool.map(run, range(n)))
    else:
        for j in range(n):
            run(j)

    resp = SystemResponse(Phi_xx=Fir(R), Phi_ux=Fir(M))
    feasible = all(s.feasible for s in statuses)
    if feasible:
        cost = float(np.sqrt(np.dot(weights, costs) + np.sum(plant.D11**2)))
    else:
        cost = float("nan")
    return SynthesisResult(
        response=resp,
        cost=cost,
        per_column=list(statuses),
        wall_time=time.perf_counter() - t0,
        workers_used=nworkers,
    )


# ---------------------------------------------------------------------------
# output feedback: one stacked solve
# ---------------------------------------------------------------------------


class _Stacker:
    """Accumulates sparse blocks of a row-stacked linear system."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.blocks = []
        self.rhs_parts = []
        self.nrows = 0

    def add_group(self, mats_at_offsets, rhs):
        for col_off, mat in mats_at_offsets:
            mat = sp.coo_matrix(mat)
            self.blocks.append((self.nrows, col_off, mat))
        self.rhs_parts.append(np.asarray(rhs, dtype=float).ravel())
        self.nrows += len(self.rhs_parts[-1])

    def build(self):
        rows, cols, vals = [], [], []
        for roff, coff, mat in self.blocks:
            rows.append(mat.row + roff)
            cols.append(mat.col + coff)
            vals.append(mat.data)
        if rows:
            mat = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.nrows, self.ncols),
            )
        else:
            mat = sp.csr_matrix((self.nrows, self.ncols))
        rhs = (
            np.concatenate(self.rhs_parts) if self.rhs_parts else np.zeros(0)
        )
        return mat, rhs


def synthesize_of_h2(
    problem: SynthesisProblem,
    *,
    feas_tol: float = 1e-8,
    var_budget: int = 6000,
    dense_limit: int = 800,
) -> SynthesisResult:
    """Structured H2 output-feedback synthesis as one stacked solve.

    Rows and columns of the quadruple couple through the dual
    achievability recursions, so no column decomposition is attempted;
    all mask-allowed coefficients of ``(Phi_xx, Phi_ux, Phi_xy,
    Phi_uy)`` enter a single equality-constrained least-squares program.
    The unmasked variable count must stay within ``var_budget``.
    """
    if problem.mode != "output-feedback":
        raise ValueError("problem is not in output-feedback mode")
    plant, slc = problem.plant, problem.slc
    A, B2, C2 = plant.A, plant.B2, plant.C2
    C1, D12, B1, D21, D11 = plant.C1, plant.D12, plant.B1, plant.D21, plant.D11
    n, nu, ny = plant.nx, plant.nu, plant.ny
    T = slc.horizon

    sizes = {"xx": n * n, "ux": nu * n, "xy": n * ny, "uy": nu * ny}
    full = T * (sizes["xx"] + sizes["ux"] + sizes["xy"]) + (T + 1) * sizes["uy"]
    if full > var_budget:
        raise ValueError(
            f"{full} stacked variables exceed the dense-solve budget ({var_budget})"
        )

    # layout: R[1..T], M[1..T], N[1..T], L[0..T], each block row-major
    offs = {}
    pos = 0
    for name, first in (("xx", 1), ("ux", 1), ("xy", 1), ("uy", 0)):
        offs[name] = {}
        for t in range(first, T + 1):
            offs[name][t] = pos
            pos += sizes[name]

    allowed = np.zeros(full, dtype=bool)
    for name, first in (("xx", 1), ("ux", 1), ("xy", 1), ("uy", 0)):
        mask = getattr(slc, name)
        for t in range(first, T + 1):
            allowed[offs[name][t] : offs[name][t] + sizes[name]] = mask.allowed[
                t
            ].ravel()

    In, Iny, Inu = sp.eye(n), sp.eye(ny), sp.eye(nu)
    kron = sp.kron
    A_l = kron(A, In)          # X -> A X   for n x n X
    B2_l = kron(B2, In)        # M -> B2 M
    A_ln = kron(A, Iny)        # N -> A N
    B2_ln = kron(B2, Iny)      # L -> B2 L
    A_r = kron(In, A.T)        # X -> X A
    C2_r = kron(In, C2.T)      # N -> N C2
    A_rm = kron(Inu, A.T)      # M -> M A
    C2_rm = kron(Inu, C2.T)    # L -> L C2

    eq = _Stacker(full)
    eye_xx = sp.eye(sizes["xx"])
    eye_xy = sp.eye(sizes["xy"])
    eye_ux = sp.eye(sizes["ux"])
    # column recursions, driven by (A, B2)
    eq.add_group([(offs["xx"][1], eye_xx)], np.eye(n).ravel())
    for t in range(1, T):
        eq.add_group(
            [
                (offs["xx"][t + 1], eye_xx),
                (offs["xx"][t], -A_l),
                (offs["ux"][t], -B2_l),
            ],
            np.zeros(sizes["xx"]),
        )
    eq.add_group(
        [(offs["xx"][T], A_l), (offs["ux"][T], B2_l)], np.zeros(sizes["xx"])
    )
    eq.add_group(
        [(offs["xy"][1], eye_xy), (offs["uy"][0], -B2_ln)], np.zeros(sizes["xy"])
    )
    for t in range(1, T):
        eq.add_group(
            [
                (offs["xy"][t + 1], eye_xy),
                (offs["xy"][t], -A_ln),
                (offs["uy"][t], -B2_ln),
            ],
            np.zeros(sizes["xy"]),
        )
    eq.add_group(
        [(offs["xy"][T], A_ln), (offs["uy"][T], B2_ln)], np.zeros(sizes["xy"])
    )
    # row recursions, driven by (A, C2)
    for t in range(1, T):
        eq.add_group(
            [
                (offs["xx"][t + 1], eye_xx),
                (offs["xx"][t], -A_r),
                (offs["xy"][t], -C2_r),
            ],
            np.zeros(sizes["xx"]),
        )
    eq.add_group(
        [(offs["xx"][T], A_r), (offs["xy"][T], C2_r)], np.zeros(sizes["xx"])
    )
    eq.add_group(
        [(offs["ux"][1], eye_ux), (offs["uy"][0], -C2_rm)], np.zeros(sizes["ux"])
    )
    for t in range(1, T):
        eq.add_group(
            [
                (offs["ux"][t + 1], eye_ux),
                (offs["ux"][t], -A_rm),
                (offs["uy"][t], -C2_rm),
            ],
            np.zeros(sizes["ux"]),
        )
    eq.add_group(
        [(offs["ux"][T], A_rm), (offs["uy"][T], C2_rm)], np.zeros(sizes["ux"])
    )
    E_full, f = eq.build()

    obj = _Stacker(full)
    W_xx = kron(C1, B1.T)
    W_xy = kron(C1, D21.T)
    W_ux = kron(D12, B1.T)
    W_uy = kron(D12, D21.T)
    obj.add_group([(offs["uy"][0], W_uy)], -D11.ravel())
    for t in range(1, T + 1):
        obj.add_group(
            [
                (offs["xx"][t], W_xx),
                (offs["xy"][t], W_xy),
                (offs["ux"][t], W_ux),
                (offs["uy"][t], W_uy),
            ],
            np.zeros(plant.nz * plant.nw),
        )
    G_full, h = obj.build()

    t0 = time.perf_counter()
    idx = np.nonzero(allowed)[0]
    E = E_full.tocsc()[:, idx]
    G = G_full.tocsc()[:, idx]
    sol = solve_eq_ls(G, h, E, f, dense_limit=max(dense_limit, len(idx) + E.shape[0]))
    status = ColumnStatus(
        feasible=sol.eq_residual <= feas_tol,
        residual=sol.eq_residual,
        degenerate=sol.degenerate,
    )

    xfull = np.zeros(full)
    xfull[idx] = sol.x
    stacks = {
        "xx": np.zeros((T + 1, n, n)),
        "ux": np.zeros((T + 1, nu, n)),
        "xy": np.zeros((T + 1, n, ny)),
        "uy": np.zeros((T + 1, nu, ny)),
    }
    shapes = {"xx": (n, n), "ux": (nu, n), "xy": (n, ny), "uy": (nu, ny)}
    for name, first in (("xx", 1), ("ux", 1), ("xy", 1), ("uy", 0)):
        for t in range(first, T + 1):
            stacks[name][t] = xfull[
                offs[name][t] : offs[name][t] + sizes[name]
            ].reshape(shapes[name])
    resp = SystemResponse(
        Phi_xx=Fir(stacks["xx"]),
        Phi_ux=Fir(stacks["ux"]),
        Phi_xy=Fir(stacks["xy"]),
        Phi_uy=Fir(stacks["uy"]),
    )
    cost = h2_cost(plant, resp) if status.feasible else float("nan")
    return SynthesisResult(
        response=resp,
        cost=cost,
        per_column=[status],
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# centralized baseline
# ---------------------------------------------------------------------------


def centralized_baseline(
    plant: PlantModel, *, tol: float = 1e-10, max_iter: int = 100_000
) -> float:
    """Unconstrained centralized H2 optimum for a state-feedback plant.

    Iterates the discrete Riccati recursion to a fixed point ``P`` and
    returns ``sqrt(trace(B1' P B1) + ||D11||_F^2)``, the cost convention
    of :func:`h2_cost`.  Raises when the recursion does not converge
    (plant not stabilizable, or control penalty singular where needed).
    """
    if not plant.is_state_feedback:
        raise ValueError("centralized baseline is defined for state-feedback plants")
    A, B2, C1, D12 = plant.A, plant.B2, plant.C1, plant.D12
    Q = C1.T @ C1
    Ru = D12.T @ D12
    S = C1.T @ D12
    P = Q.copy()
    for _ in range(max_iter):
        PB = P @ B2
        gain_denom = Ru + B2.T @ PB
        try:
            K = np.linalg.solve(gain_denom, PB.T @ A + S.T)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Riccati step singular: control penalty too weak") from exc
        Pn = Q + A.T @ P @ A - (A.T @ PB + S) @ K
        Pn = 0.5 * (Pn + Pn.T)
        delta = float(np.max(np.abs(Pn - P)))
        P = Pn
        if delta <= tol:
            break
        if not np.isfinite(delta) or np.max(np.abs(P)) > 1e12:
            raise ValueError("Riccati recursion diverged: plant not stabilizable")
    else:
        raise ValueError("Riccati recursion did not converge")
    return float(np.sqrt(np.trace(plant.B1.T @ P @ plant.B1) + np.sum(plant.D11**2)))
