"""Cone-program data model, complex->real embeddings, and the solver adapter.

A ConicProgram is: minimize c^T x subject to A_j x + b_j in K_j for an ordered
list of cone blocks (zero / nonnegative / second-order / PSD). PSD blocks hold
the scaled lower-triangular vectorization of a real symmetric matrix
(off-diagonals multiplied by sqrt(2)), so a side-s block has s(s+1)/2 rows.

The solve() adapter delegates to an external interior-point backend (Clarabel);
no backend types leak past this module.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

ZERO = "zero"
NONNEG = "nonnegative"
SOC = "second_order"
PSD = "psd"

_KINDS = (ZERO, NONNEG, SOC, PSD)

_SQRT2 = math.sqrt(2.0)


class SolverBackendUnavailable(RuntimeError):
    """The external conic backend cannot be imported."""


def backend_available() -> bool:
    try:
        import clarabel  # noqa: F401
    except Exception:
        return False
    return True


# --- complex <-> real plumbing ----------------------------------------------

def hermitian_to_real(H: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Embed a Hermitian s x s matrix as [[Re H, -Im H], [Im H, Re H]].

    The embedding is PSD iff H is, and carries each eigenvalue of H twice.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.abs(H).max()))
    if np.abs(H - H.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def psd_side(rows: int) -> int:
    s = int((math.isqrt(8 * rows + 1) - 1) // 2)
    if s * (s + 1) // 2 != rows:
        raise ValueError(f"{rows} is not a triangular number")
    return s


def svec(S: np.ndarray) -> np.ndarray:
    """Scaled lower-triangular (row-major) vectorization of a symmetric matrix."""
    s = S.shape[0]
    rows, cols = np.tril_indices(s)
    scale = np.where(rows == cols, 1.0, _SQRT2)
    return S[rows, cols] * scale


def smat(v: np.ndarray) -> np.ndarray:
    s = psd_side(len(v))
    rows, cols = np.tril_indices(s)
    out = np.zeros((s, s))
    vals = np.asarray(v) / np.where(rows == cols, 1.0, _SQRT2)
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out


# --- program data model -------------------------------------------------------

@dataclass
class ConeBlock:
    """One cone membership constraint: A x + b in cone(kind)."""

    kind: str
    A: sp.csr_matrix
    b: np.ndarray

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        self.A = sp.csr_matrix(self.A)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("cone block A and b row counts differ")
        if self.kind == PSD:
            psd_side(self.rows)  # raises if not triangular

    @property
    def rows(self) -> int:
        return self.A.shape[0]


@dataclass
class ConicProgram:
    num_vars: int
    objective: np.ndarray
    blocks: list

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise ValueError("objective length does not match num_vars")
        for blk in self.blocks:
            if blk.A.shape[1] != self.num_vars:
                raise ValueError("cone block column count does not match num_vars")


@dataclass
class SolveResult:
    status: str                       # optimal | infeasible | unbounded | numerical_limit
    primal: np.ndarray
    objective_value: float
    dual: list
    residuals: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


_STATUS_MAP = {
    "Solved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}

_CANONICAL_ORDER = {ZERO: 0, NONNEG: 1, SOC: 2, PSD: 3}


def solve(program: ConicProgram, tol: float = 1e-8, max_iter: int = 200) -> SolveResult:
    """Solve through the interior-point backend.

    Returns status "optimal" only when the backend certifies residuals and the
    duality gap at the requested tolerance; backend failures surface as
    status "numerical_limit", never as an exception.
    """
    try:
        import clarabel
    except Exception as e:  # pragma: no cover - environment dependent
        raise SolverBackendUnavailable(str(e)) from e

    order = sorted(range(len(program.blocks)),
                   key=lambda j: (_CANONICAL_ORDER[program.blocks[j].kind], j))
    blocks = [program.blocks[j] for j in order]

    cones = []
    for blk in blocks:
        if blk.kind == ZERO:
            cones.append(clarabel.ZeroConeT(blk.rows))
        elif blk.kind == NONNEG:
            cones.append(clarabel.NonnegativeConeT(blk.rows))
        elif blk.kind == SOC:
            cones.append(clarabel.SecondOrderConeT(blk.rows))
        else:
            cones.append(clarabel.PSDTriangleConeT(psd_side(blk.rows)))

    A = sp.vstack([-blk.A for blk in blocks], format="csc") if blocks \
        else sp.csc_matrix((0, program.num_vars))
    b = np.concatenate([blk.b for blk in blocks]) if blocks else np.zeros(0)
    P = sp.csc_matrix((program.num_vars, program.num_vars))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol

    try:
        solver = clarabel.DefaultSolver(P, program.objective, A, b, cones, settings)
        sol = solver.solve()
    except BaseException as e:
        return SolveResult(status="numerical_limit",
                           primal=np.full(program.num_vars, np.nan),
                           objective_value=math.nan, dual=[],
                           residuals={"error": str(e)})

    status = _STATUS_MAP.get(str(sol.status), "numerical_limit")
    if str(sol.status) == "AlmostSolved":
        # accept a stalled iterate only if it already certifies the requested tol
        gap_ok = abs(sol.obj_val - sol.obj_val_dual) <= tol * (1.0 + abs(sol.obj_val))
        if sol.r_prim <= tol and sol.r_dual <= tol and gap_ok:
            status = "optimal"
    x = np.asarray(sol.x, dtype=float)
    z = np.asarray(sol.z, dtype=float)

    duals_sorted = []
    off = 0
    for blk in blocks:
        duals_sorted.append(z[off:off + blk.rows].copy())
        off += blk.rows
    dual = [None] * len(blocks)
    for pos, j in enumerate(order):
        dual[j] = duals_sorted[pos]

    gap = abs(sol.obj_val - sol.obj_val_dual)
    residuals = {"primal_res": float(sol.r_prim), "dual_res": float(sol.r_dual),
                 "gap": float(gap), "iterations": int(sol.iterations)}
    obj = float(sol.obj_val) if status == "optimal" else (
        math.inf if status == "infeasible" else
        -math.inf if status == "unbounded" else math.nan)
    if status == "optimal":
        obj = float(program.objective @ x)
    return SolveResult(status=status, primal=x, objective_value=obj,
                       dual=dual, residuals=residuals)


# --- builder convenience ------------------------------------------------------

class ProgramBuilder:
    """Assembles a ConicProgram. Declare all variables before adding blocks."""

    def __init__(self):
        self.num_vars = 0
        self._c = []
        self._blocks = []

    def add_vars(self, n: int) -> np.ndarray:
        idx = np.arange(self.num_vars, self.num_vars + n)
        self.num_vars += n
        self._c.extend([0.0] * n)
        return idx

    def add_objective(self, idx, coeffs):
        idx = np.atleast_1d(idx)
        coeffs = np.broadcast_to(coeffs, idx.shape)
        for i, c in zip(idx, coeffs):
            self._c[int(i)] += float(c)

    def add_block(self, kind: str, A, b):
        A = sp.csr_matrix(A) if sp.issparse(A) else sp.csr_matrix(np.atleast_2d(A))
        self._blocks.append(ConeBlock(kind, A, b))

    def build(self) -> ConicProgram:
        blocks = []
        for blk in self._blocks:
            A = blk.A
            if A.shape[1] != self.num_vars:
                # blocks added before later variable declarations: pad empty columns
                A = sp.csr_matrix((A.data, A.indices, A.indptr),
                                  shape=(A.shape[0], self.num_vars))
            blocks.append(ConeBlock(blk.kind, A, blk.b))
        return ConicProgram(self.num_vars, np.array(self._c), blocks)


def quadratic_objective_to_soc(num_vars: int, w_indices, t_index: int) -> ConeBlock:
    """Epigraph cone for sum ||w||^2 <= t: the SOC ||(2w; t-1)|| <= t+1.

    Replaces a squared-norm objective by the linear objective t.
    """
    w_indices = np.atleast_1d(w_indices)
    m = len(w_indices)
    A = sp.lil_matrix((m + 2, num_vars))
    b = np.zeros(m + 2)
    A[0, t_index] = 1.0
    b[0] = 1.0                       # head: t + 1
    for r, j in enumerate(w_indices):
        A[1 + r, int(j)] = 2.0       # tail: 2 w
    A[m + 1, t_index] = 1.0
    b[m + 1] = -1.0                  # tail: t - 1
    return ConeBlock(SOC, A.tocsr(), b)


# --- debug dump ----------------------------------------------------------------

def dump_program(program: ConicProgram) -> str:
    """Plain-text standard-form export (objective + cone blocks as sparse triplets)."""
    out = io.StringIO()
    out.write(f"conicprogram v1\nvars {program.num_vars}\n")
    out.write("objective\n")
    for i, c in enumerate(program.objective):
        if c != 0.0:
            out.write(f"{i} {c!r}\n")
    for blk in program.blocks:
        out.write(f"block {blk.kind} {blk.rows}\n")
        coo = blk.A.tocoo()
        out.write("A\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            out.write(f"{r} {c} {v!r}\n")
        out.write("b\n")
        for r, v in enumerate(blk.b):
            if v != 0.0:
                out.write(f"{r} {v!r}\n")
        out.write("end\n")
    return out.getvalue()


def parse_program(text: str) -> ConicProgram:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "conicprogram v1":
        raise ValueError("not a conicprogram v1 document")
    if not lines[1].startswith("vars "):
        raise ValueError("missing vars header")
    num_vars = int(lines[1].split()[1])
    c = np.zeros(num_vars)
    blocks = []
    i = 2
    if i < len(lines) and lines[i] == "objective":
        i += 1
        while i < len(lines) and not lines[i].startswith("block "):
            ix, val = lines[i].split()
            c[int(ix)] = float(val)
            i += 1
    while i < len(lines):
        if not lines[i].startswith("block "):
            raise ValueError(f"unexpected line {lines[i]!r}")
        _, kind, rows = lines[i].split()
        rows = int(rows)
        i += 1
        if lines[i] != "A":
            raise ValueError("block missing A section")
        i += 1
        trip = []
        while lines[i] != "b":
            r, cix, v = lines[i].split()
            trip.append((int(r), int(cix), float(v)))
            i += 1
        i += 1
        b = np.zeros(rows)
        while lines[i] != "end":
            r, v = lines[i].split()
            b[int(r)] = float(v)
            i += 1
        i += 1
        if trip:
            rr, cc, vv = zip(*trip)
            A = sp.csr_matrix((vv, (rr, cc)), shape=(rows, num_vars))
        else:
            A = sp.csr_matrix((rows, num_vars))
        blocks.append(ConeBlock(kind, A, b))
    return ConicProgram(num_vars, c, blocks)
