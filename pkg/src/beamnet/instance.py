"""Normalized per-trial problem data shared by the SDR/SCA/distributed solvers.

Channels are divided by the noise standard deviation so every SINR constraint
reads against unit noise power; beamformer entries stay in sqrt-watts, so
squared norms are transmit powers in watts. Uncertainty matrices are rescaled
consistently (errors in the same normalized units).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import CsiEstimate, cluster_indices
from .scenario import ClusterMap


@dataclass
class ProblemInstance:
    users: list
    n_cells: int
    antennas_per_bs: int
    noise_w: float
    clusters: ClusterMap
    hhat: dict          # user -> normalized aggregated estimate, length NM
    r_agg: dict         # user -> normalized Q^{-1/2} (NM x NM); zero matrix if perfect
    idx: dict           # user -> cluster coordinate indices into the NM layout
    perfect: bool

    @property
    def nm(self) -> int:
        return self.n_cells * self.antennas_per_bs

    def cluster_size(self, user) -> int:
        return len(self.idx[user])

    def hhat_from(self, victim, source) -> np.ndarray:
        """Normalized estimated channel T_source * hhat_victim (cluster view)."""
        return self.hhat[victim][self.idx[source]]

    def r_cols(self, victim, source) -> np.ndarray:
        """R_victim restricted to source-cluster columns: R T_source^T (NM x m)."""
        return self.r_agg[victim][:, self.idx[source]]


def build_instance(csi: CsiEstimate, clusters: ClusterMap, noise_w: float) -> ProblemInstance:
    if noise_w <= 0:
        raise ValueError("noise power must be positive")
    scale = 1.0 / math.sqrt(noise_w)
    users = csi.users()
    M = csi.antennas_per_bs
    hhat = {u: csi.aggregate_estimated(u) * scale for u in users}
    r_agg = {u: csi.inv_sqrt_aggregated(u) * scale for u in users}
    idx = {u: cluster_indices(clusters, u, M) for u in users}
    return ProblemInstance(users=users, n_cells=csi.n_cells, antennas_per_bs=M,
                           noise_w=noise_w, clusters=clusters, hhat=hhat,
                           r_agg=r_agg, idx=idx, perfect=csi.perfect)


# --- tightened-constraint ingredients (normalized units, unit noise) -----------

def interference_upper(inst: ProblemInstance, victim, source, w_source) -> float:
    """Worst-case |h_victim^(source)H w_source| over the victim's ellipsoid."""
    nominal = abs(np.vdot(inst.hhat_from(victim, source), w_source))
    if inst.perfect:
        return nominal
    return nominal + np.linalg.norm(inst.r_cols(victim, source) @ w_source)


def signal_lower(inst: ProblemInstance, user, w_user) -> float:
    """Tightened lower bound on the serving-cluster gain |h^(u)H w_u|."""
    nominal = abs(np.vdot(inst.hhat_from(user, user), w_user))
    if inst.perfect:
        return nominal
    return max(nominal - np.linalg.norm(inst.r_cols(user, user) @ w_user), 0.0)


def broadcast_signal_lower(inst: ProblemInstance, user, w_broadcast) -> float:
    """Tightened lower bound on the SFN broadcast gain |h^H w_B| at this user."""
    nominal = abs(np.vdot(inst.hhat[user], w_broadcast))
    if inst.perfect:
        return nominal
    return max(nominal - np.linalg.norm(inst.r_agg[user] @ w_broadcast), 0.0)
