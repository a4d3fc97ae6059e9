"""Network geometry, Rayleigh channel sampling, bounded CSI uncertainty.

Channels h_{i,n,k} in C^M are kept in linear amplitude units; every SINR
expression downstream consumes the aggregation/selection operators defined
here. Sampling is pure given (config.rng_seed, trial_seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import ClusterMap, NetworkConfig


def derive_seed(base_seed: int, trial_index: int) -> int:
    """Disjoint per-trial stream: splitmix64 of (base XOR trial)."""
    z = (base_seed ^ trial_index) & 0xFFFFFFFFFFFFFFFF
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def path_loss_gain(distance_km: float) -> float:
    """Linear power gain for PL = 148.1 + 37.6 log10(d), d in kilometers."""
    if distance_km <= 0:
        raise ValueError(f"distance must be positive, got {distance_km} km")
    pl_db = 148.1 + 37.6 * math.log10(distance_km)
    return 10.0 ** (-pl_db / 10.0)


def bs_positions(n_cells: int, cell_radius_m: float) -> np.ndarray:
    """Hexagonal lattice positions (meters), center cell first, then ring by ring.

    Inter-site distance is 2 R cos(30 deg) = sqrt(3) R. Lattice points are
    sorted by (distance from origin, angle) so N <= 7 gives center + first ring.
    """
    isd = math.sqrt(3.0) * cell_radius_m
    u = np.array([isd, 0.0])
    v = np.array([isd / 2.0, isd * math.sqrt(3.0) / 2.0])
    span = 1
    while 3 * span * (span + 1) + 1 < n_cells:
        span += 1
    pts = []
    for a in range(-span, span + 1):
        for b in range(-span, span + 1):
            if abs(a + b) > span:
                continue
            pts.append(a * u + b * v)
    pts = np.array(pts)
    r = np.hypot(pts[:, 0], pts[:, 1])
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
    order = np.lexsort((ang, np.round(r, 6)))
    return pts[order][:n_cells]


@dataclass
class ChannelSet:
    """True channels: links[(i, n, k)] is the M-vector from BS i to user (n, k)."""

    links: dict
    n_cells: int
    users_per_cell: int
    antennas_per_bs: int

    def users(self):
        return [(n, k) for n in range(1, self.n_cells + 1)
                for k in range(1, self.users_per_cell + 1)]

    def aggregate(self, user) -> np.ndarray:
        return aggregate_channel(self.links, user, self.n_cells)


@dataclass
class CsiEstimate:
    """Estimated channels with per-link ellipsoidal uncertainty.

    shape[(i,n,k)] is the per-link Q (Hermitian PD); aggregated_shape[(n,k)]
    is the relaxed block-diagonal Q_{n,k} = (1/N) blockdiag(Q_{1,n,k}, ...).
    Both maps are empty under perfect CSI (error_variance == 0), where
    estimated == true and every worst-case term degenerates to nominal.
    """

    estimated: dict
    shape: dict
    aggregated_shape: dict
    error_variance: float
    n_cells: int
    users_per_cell: int
    antennas_per_bs: int
    _inv_sqrt_cache: dict = field(default_factory=dict, repr=False)

    @property
    def perfect(self) -> bool:
        return self.error_variance == 0.0

    def users(self):
        return [(n, k) for n in range(1, self.n_cells + 1)
                for k in range(1, self.users_per_cell + 1)]

    def aggregate_estimated(self, user) -> np.ndarray:
        return aggregate_channel(self.estimated, user, self.n_cells)

    def inv_sqrt_aggregated(self, user) -> np.ndarray:
        """Q_{n,k}^{-1/2} for the aggregated ellipsoid; zero matrix if perfect CSI."""
        nm = self.n_cells * self.antennas_per_bs
        if self.perfect:
            return np.zeros((nm, nm))
        if user not in self._inv_sqrt_cache:
            self._inv_sqrt_cache[user] = _inv_sqrt(self.aggregated_shape[user])
        return self._inv_sqrt_cache[user]


def _inv_sqrt(Q: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(Q)
    if w.min() <= 0:
        raise ValueError("uncertainty shape matrix must be positive definite")
    return (v * (1.0 / np.sqrt(w))) @ v.conj().T


def aggregate_channel(links: dict, user, n_cells: int) -> np.ndarray:
    """Stack h_{1,n,k} ... h_{N,n,k} in BS order into one NM-vector."""
    n, k = user
    blocks = []
    for i in range(1, n_cells + 1):
        key = (i, n, k)
        if key not in links:
            raise KeyError(f"missing channel block {key}")
        blocks.append(np.asarray(links[key]))
    return np.concatenate(blocks)


def selection_matrix(clusters: ClusterMap, user, M: int, N: int) -> np.ndarray:
    """0/1 block matrix T_{p,q} with h^(p,q) = T_{p,q} h (cluster-ordered identity blocks)."""
    bss = clusters.cluster(user)
    T = np.zeros((len(bss) * M, N * M))
    for row, i in enumerate(bss):
        T[row * M:(row + 1) * M, (i - 1) * M:i * M] = np.eye(M)
    return T


def cluster_indices(clusters: ClusterMap, user, M: int) -> np.ndarray:
    """Index-array form of selection_matrix: h[idx] == T_{p,q} h."""
    bss = clusters.cluster(user)
    return np.concatenate([np.arange((i - 1) * M, i * M) for i in bss])


def sample_channels(config: NetworkConfig, trial_seed: int):
    """Draw one network realization: (ChannelSet, CsiEstimate).

    Geometry: BSs on the hexagonal lattice, K users per cell uniform on the
    circle of radius user_distance_m around their BS. Fading: i.i.d. unit-power
    circularly-symmetric complex Gaussian, scaled by sqrt(path gain) over true
    geometric distances for every (i, n, k) pair. CSI errors (if eps^2 > 0) are
    drawn uniformly inside the per-link ellipsoid e^H Q e <= 1, Q = I/eps^2.
    """
    N, K, M = config.n_cells, config.users_per_cell, config.antennas_per_bs
    rng = np.random.default_rng(derive_seed(config.rng_seed, trial_seed))
    bs = bs_positions(N, config.cell_radius_m)

    angles = rng.uniform(0.0, 2.0 * np.pi, size=(N, K))
    users_xy = bs[:, None, :] + config.user_distance_m * np.stack(
        [np.cos(angles), np.sin(angles)], axis=-1)

    links = {}
    for n in range(1, N + 1):
        for k in range(1, K + 1):
            pos = users_xy[n - 1, k - 1]
            for i in range(1, N + 1):
                d_km = np.hypot(*(pos - bs[i - 1])) / 1000.0
                gain = path_loss_gain(d_km)
                tilde = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2.0)
                links[(i, n, k)] = np.sqrt(gain) * tilde

    chans = ChannelSet(links=links, n_cells=N, users_per_cell=K, antennas_per_bs=M)

    eps2 = config.csi_error_variance
    if eps2 == 0.0:
        est = {key: vec.copy() for key, vec in links.items()}
        csi = CsiEstimate(estimated=est, shape={}, aggregated_shape={},
                          error_variance=0.0, n_cells=N, users_per_cell=K,
                          antennas_per_bs=M)
        return chans, csi

    q_link = np.eye(M) / eps2
    estimated = {}
    shape = {}
    for key, h in links.items():
        e = sample_error_on_ellipsoid(q_link, "interior", rng)
        estimated[key] = h - e
        shape[key] = q_link.copy()
    agg = {}
    q_agg = np.eye(N * M) / (N * eps2)
    for u in chans.users():
        agg[u] = q_agg.copy()
    csi = CsiEstimate(estimated=estimated, shape=shape, aggregated_shape=agg,
                      error_variance=eps2, n_cells=N, users_per_cell=K,
                      antennas_per_bs=M)
    return chans, csi


def sample_error_on_ellipsoid(Q: np.ndarray, mode: str, rng) -> np.ndarray:
    """Draw e with e^H Q e = 1 (boundary) or <= 1 (interior).

    Direction uniform on the complex unit sphere mapped through Q^{-1/2};
    interior draws scale the radius by U^(1/(2m)) (uniform in the 2m-real ball).
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    if mode not in ("boundary", "interior"):
        raise ValueError(f"unknown mode {mode!r}")
    m = Q.shape[0]
    u = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    u /= np.linalg.norm(u)
    if mode == "interior":
        u *= rng.uniform() ** (1.0 / (2 * m))
    return _inv_sqrt(Q) @ u


def sample_boundary_errors(q_inv_sqrt: np.ndarray, n_samples: int, rng) -> np.ndarray:
    """Batched boundary draws: rows e_j with e^H Q e = 1, given Q^{-1/2}."""
    m = q_inv_sqrt.shape[0]
    u = rng.standard_normal((n_samples, m)) + 1j * rng.standard_normal((n_samples, m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u @ q_inv_sqrt.T


def worst_case_gain(est: np.ndarray, Q, w: np.ndarray,
                    q_inv_sqrt: np.ndarray = None) -> float:
    """Tightened lower bound on |h^H w| over the ellipsoid around est.

    Returns max(|est^H w| - ||Q^{-1/2} w||, 0); pass Q=None (or a zero
    q_inv_sqrt) for perfect CSI, where the bound is the nominal gain.
    """
    nominal = abs(np.vdot(est, w))
    if q_inv_sqrt is None:
        if Q is None:
            return nominal
        q_inv_sqrt = _inv_sqrt(np.asarray(Q))
    return max(nominal - np.linalg.norm(q_inv_sqrt @ w), 0.0)
