"""Semidefinite-relaxation lower bounds with S-procedure robustness.

Beamformer outer products W = w w^H are relaxed to Hermitian PSD matrices, so
the optimum of these programs lower-bounds the true minimum sum power. Under
bounded CSI errors every worst-case SINR constraint becomes one linear matrix
inequality with a multiplier lambda >= 0; the LMIs are emitted in whitened
error coordinates (congruence by diag(Q^{-1/2}, 1)), which keeps multipliers
bounded and degenerates exactly to the nominal constraint set as the
uncertainty radius goes to zero. Perfect-CSI campaigns use a direct builder
with plain scalar quadratic constraints instead of LMIs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import conic
from .instance import ProblemInstance, build_instance
from .scenario import QosTargets

BROADCAST = "B"


def hermitian_param_count(side: int) -> int:
    return side * side


def hermitian_from_params(theta: np.ndarray, side: int) -> np.ndarray:
    """Inverse of the (diag, Re lower, Im lower) parametrization."""
    W = np.zeros((side, side), dtype=complex)
    W[np.diag_indices(side)] = theta[:side]
    rows, cols = np.tril_indices(side, k=-1)
    noff = len(rows)
    re = theta[side:side + noff]
    im = theta[side + noff:side + 2 * noff]
    W[rows, cols] = re + 1j * im
    W[cols, rows] = re - 1j * im
    return W


def _hermitian_basis(side: int):
    """Canonical Hermitian basis in parameter order (diag, Re lower, Im lower)."""
    for p in range(side):
        E = np.zeros((side, side), dtype=complex)
        E[p, p] = 1.0
        yield E
    rows, cols = np.tril_indices(side, k=-1)
    for p, q in zip(rows, cols):
        E = np.zeros((side, side), dtype=complex)
        E[p, q] = 1.0
        E[q, p] = 1.0
        yield E
    for p, q in zip(rows, cols):
        E = np.zeros((side, side), dtype=complex)
        E[p, q] = 1.0j
        E[q, p] = -1.0j
        yield E


def _embed_svec(S: np.ndarray) -> np.ndarray:
    S = (S + S.conj().T) / 2.0
    return conic.svec(conic.hermitian_to_real(S, tol=1e-8))


@dataclass
class SdrVariables:
    """Variable layout of one SDR program over a ProblemInstance."""

    inst: ProblemInstance
    targets: QosTargets
    robust: bool
    builder: conic.ProgramBuilder = field(default_factory=conic.ProgramBuilder)
    w_vars: dict = field(default_factory=dict)    # key -> (indices, side)
    lam_unicast: dict = field(default_factory=dict)
    lam_broadcast: dict = field(default_factory=dict)

    def __post_init__(self):
        inst, tg = self.inst, self.targets
        self.unicast_users = [u for u in inst.users if tg.gamma_unicast[u] > 0]
        self.broadcast_on = tg.gamma_broadcast > 0
        if self.broadcast_on:
            self._add_w(BROADCAST, inst.nm)
        for u in self.unicast_users:
            self._add_w(u, inst.cluster_size(u))
        if self.robust:
            lam_idx = self.builder.add_vars(
                len(self.unicast_users) + (len(inst.users) if self.broadcast_on else 0))
            pos = 0
            for u in self.unicast_users:
                self.lam_unicast[u] = int(lam_idx[pos]); pos += 1
            if self.broadcast_on:
                for u in inst.users:
                    self.lam_broadcast[u] = int(lam_idx[pos]); pos += 1
            if len(lam_idx):
                A = sp.identity(self.builder.num_vars, format="csr")[lam_idx, :]
                self.builder.add_block(conic.NONNEG, A, np.zeros(len(lam_idx)))

    def _add_w(self, key, side):
        idx = self.builder.add_vars(hermitian_param_count(side))
        self.w_vars[key] = (idx, side)
        self.builder.add_objective(idx[:side], 1.0)          # trace
        cols = [_embed_svec(E) for E in _hermitian_basis(side)]
        rows = len(cols[0])
        A = sp.lil_matrix((rows, self.builder.num_vars))
        for j, col in zip(idx, cols):
            A[:, int(j)] = col.reshape(-1, 1)
        self.builder.add_block(conic.PSD, A.tocsr(), np.zeros(rows))

    def matrices_from(self, x: np.ndarray) -> dict:
        return {key: hermitian_from_params(x[idx], side)
                for key, (idx, side) in self.w_vars.items()}


def _vspec_columns(layout: SdrVariables, user, vspec):
    """LMI columns for V = sum coeff * T_key^T W_key T_key at this user.

    Whitened S-procedure LMI, complex side NM+1:
        [[R V R + lam I, R V hhat], [hhat^H V R, hhat^H V hhat - rhs - lam]]
    Returns (column map var_index -> svec contribution, lam column, plumbing).
    """
    inst = layout.inst
    nm = inst.nm
    cols = {}
    for key, coeff in vspec:
        idx, side = layout.w_vars[key]
        if key == BROADCAST:
            C = inst.r_agg[user]
            a = inst.hhat[user]
        else:
            C = inst.r_cols(user, key)
            a = inst.hhat_from(user, key)
        for j, E in zip(idx, _hermitian_basis(side)):
            S = np.zeros((nm + 1, nm + 1), dtype=complex)
            Ea = E @ a
            S[:nm, :nm] = C @ E @ C.conj().T
            S[:nm, nm] = C @ Ea
            S[nm, :nm] = (C @ Ea).conj()
            S[nm, nm] = np.real(np.vdot(a, Ea))
            col = coeff * _embed_svec(S)
            if int(j) in cols:
                cols[int(j)] = cols[int(j)] + col
            else:
                cols[int(j)] = col
    lam_mat = np.zeros((nm + 1, nm + 1), dtype=complex)
    lam_mat[:nm, :nm] = np.eye(nm)
    lam_mat[nm, nm] = -1.0
    return cols, _embed_svec(lam_mat)


def _add_lmi(layout: SdrVariables, user, vspec, lam_index, rhs=1.0) -> None:
    inst = layout.inst
    nm = inst.nm
    cols, lam_col = _vspec_columns(layout, user, vspec)
    const = np.zeros((nm + 1, nm + 1), dtype=complex)
    const[nm, nm] = -rhs
    b = _embed_svec(const)
    A = sp.lil_matrix((len(b), layout.builder.num_vars))
    for j, col in cols.items():
        A[:, j] = col.reshape(-1, 1)
    A[:, lam_index] = lam_col.reshape(-1, 1)
    layout.builder.add_block(conic.PSD, A.tocsr(), b)


def _direct_rows(layout: SdrVariables, user, vspec, rhs=1.0):
    """Nominal constraint hhat^H V hhat >= rhs as one nonnegative-cone row."""
    inst = layout.inst
    row = np.zeros(layout.builder.num_vars)
    for key, coeff in vspec:
        idx, side = layout.w_vars[key]
        a = inst.hhat[user] if key == BROADCAST else inst.hhat_from(user, key)
        for j, E in zip(idx, _hermitian_basis(side)):
            row[int(j)] += coeff * np.real(np.vdot(a, E @ a))
    return row, -rhs


def _unicast_vspec(layout: SdrVariables, user):
    gamma = layout.targets.gamma_unicast[user]
    vspec = [(user, 1.0 / gamma)]
    vspec += [(v, -1.0) for v in layout.unicast_users if v != user]
    return vspec


def _broadcast_vspec(layout: SdrVariables):
    gamma_b = layout.targets.gamma_broadcast
    vspec = [(BROADCAST, 1.0 / gamma_b)]
    if layout.targets.scheme == "ldm":
        vspec += [(v, -1.0) for v in layout.unicast_users]
    return vspec


def build_lmi_unicast(layout: SdrVariables, user) -> None:
    """Worst-case unicast SINR constraint for `user` as one whitened LMI."""
    _add_lmi(layout, user, _unicast_vspec(layout, user), layout.lam_unicast[user])


def build_lmi_broadcast_tdm(layout: SdrVariables, user) -> None:
    """Worst-case dedicated-slot broadcast constraint ((1/gamma_B) W^B block form)."""
    _add_lmi(layout, user, [(BROADCAST, 1.0 / layout.targets.gamma_broadcast)],
             layout.lam_broadcast[user])


def build_lmi_broadcast_ldm(layout: SdrVariables, user) -> None:
    """LDM broadcast constraint: every unicast stream (own included) interferes."""
    _add_lmi(layout, user, _broadcast_vspec(layout), layout.lam_broadcast[user])


@dataclass
class SdrSolution:
    status: str
    W_broadcast: np.ndarray = None
    W_unicast: dict = field(default_factory=dict)
    lambda_broadcast: dict = field(default_factory=dict)
    lambda_unicast: dict = field(default_factory=dict)
    objective_w: float = math.inf
    rank_ratios: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


DIRECT_TOL = 1e-7
ROBUST_TOL = 1e-6


def solve_sdr(scheme: str, csi, targets: QosTargets, clusters, noise_w: float,
              mode: str = "auto", tol: float = None) -> SdrSolution:
    """Assemble and solve the rank-relaxed power minimization for one realization.

    mode: "auto" picks "direct" under perfect CSI and "s_procedure" otherwise;
    forcing "s_procedure" at zero error radius exercises the degenerate LMIs
    (used by the perfect-CSI equivalence check). The returned objective is a
    lower bound on the true minimum sum power. Default certified tolerance is
    1e-7 for the direct builder and 1e-6 for the S-procedure LMIs (the
    interior-point dual residual stalls near 1e-7 on the robust SDPs).
    """
    if scheme != targets.scheme:
        raise ValueError(f"targets are for scheme {targets.scheme!r}, not {scheme!r}")
    inst = build_instance(csi, clusters, noise_w)
    return solve_sdr_instance(inst, targets, mode=mode, tol=tol)


def solve_sdr_instance(inst: ProblemInstance, targets: QosTargets,
                       mode: str = "auto", tol: float = None) -> SdrSolution:
    if mode not in ("auto", "direct", "s_procedure"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "auto":
        mode = "direct" if inst.perfect else "s_procedure"
    if mode == "direct" and not inst.perfect:
        raise ValueError("direct SDR requires perfect CSI; use the S-procedure mode")
    robust = mode == "s_procedure"
    if tol is None:
        tol = ROBUST_TOL if robust else DIRECT_TOL

    layout = SdrVariables(inst=inst, targets=targets, robust=robust)
    if robust:
        for u in layout.unicast_users:
            build_lmi_unicast(layout, u)
        if layout.broadcast_on:
            for u in inst.users:
                if targets.scheme == "tdm":
                    build_lmi_broadcast_tdm(layout, u)
                else:
                    build_lmi_broadcast_ldm(layout, u)
    else:
        rows, rhs = [], []
        for u in layout.unicast_users:
            row, b = _direct_rows(layout, u, _unicast_vspec(layout, u))
            rows.append(row); rhs.append(b)
        if layout.broadcast_on:
            for u in inst.users:
                row, b = _direct_rows(layout, u, _broadcast_vspec(layout))
                rows.append(row); rhs.append(b)
        if rows:
            layout.builder.add_block(conic.NONNEG, np.vstack(rows), np.array(rhs))

    if layout.builder.num_vars == 0:
        return SdrSolution(status="optimal", objective_w=0.0)

    program = layout.builder.build()
    res = conic.solve(program, tol=tol)
    if res.status == "numerical_limit" and tol < 1e-5:
        # interior-point stall short of the certificate; retry once, looser
        res = conic.solve(program, tol=min(10.0 * tol, 1e-5))
    if res.status != "optimal":
        return SdrSolution(status=res.status, residuals=res.residuals)

    mats = layout.matrices_from(res.primal)
    ratios = {}
    for key, W in mats.items():
        _, ratio = principal_component(W)
        ratios["broadcast" if key == BROADCAST else key] = ratio
    wb = mats.get(BROADCAST)
    wu = {k: v for k, v in mats.items() if k != BROADCAST}
    obj = (np.real(np.trace(wb)) if wb is not None else 0.0) \
        + sum(np.real(np.trace(W)) for W in wu.values())
    lam_u = {u: float(res.primal[j]) for u, j in layout.lam_unicast.items()}
    lam_b = {u: float(res.primal[j]) for u, j in layout.lam_broadcast.items()}
    return SdrSolution(status="optimal", W_broadcast=wb, W_unicast=wu,
                       lambda_broadcast=lam_b, lambda_unicast=lam_u,
                       objective_w=float(obj), rank_ratios=ratios,
                       residuals=res.residuals)


def principal_component(W: np.ndarray):
    """Dominant rank-1 factor sqrt(l1) v1 with the largest entry rotated real.

    Returns (vector, l2/l1); the ratio is 0 when l1 <= 0.
    """
    W = np.asarray(W)
    vals, vecs = np.linalg.eigh((W + W.conj().T) / 2.0)
    l1 = float(vals[-1])
    if l1 <= 0:
        return np.zeros(W.shape[0], dtype=complex), 0.0
    l2 = float(max(vals[-2], 0.0)) if len(vals) > 1 else 0.0
    v = math.sqrt(l1) * vecs[:, -1]
    pivot = int(np.argmax(np.abs(v)))
    phase = v[pivot] / abs(v[pivot]) if abs(v[pivot]) > 0 else 1.0
    return v * np.conj(phase), l2 / l1
