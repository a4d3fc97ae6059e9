"""Experiment configuration, QoS target derivation, and cooperation clusters.

All internal math runs in linear watts; dBW/dB conversions live here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

NON_COOPERATIVE = "non_cooperative"
FULL_COOPERATIVE = "full_cooperative"

DEFAULT_TDM_FRACTION_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


class ConfigError(ValueError):
    """Raised when a configuration document is malformed or violates an invariant."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError(f"cannot convert nonpositive value {x} to dB")
    return 10.0 * math.log10(x)


def dbw_to_watts(p_dbw: float) -> float:
    return db_to_linear(p_dbw)


def watts_to_dbw(p_w: float) -> float:
    return linear_to_db(p_w)


@dataclass(frozen=True)
class NetworkConfig:
    """Single source of truth for one experiment setup.

    Users are identified by 1-based pairs (n, k): user k in cell n.
    ``cluster_mode`` is "non_cooperative", "full_cooperative", or a map
    (n, k) -> tuple of cooperating BS indices (must contain n).
    """

    n_cells: int
    users_per_cell: int
    antennas_per_bs: int
    cell_radius_m: float
    user_distance_m: float
    noise_power_dbw: float
    broadcast_rate: float
    unicast_rates: dict = field(default_factory=dict)
    cluster_mode: object = NON_COOPERATIVE
    tdm_fraction_grid: tuple = DEFAULT_TDM_FRACTION_GRID
    csi_error_variance: float = 0.0
    snr_gap_broadcast_db: float = 0.0
    snr_gap_unicast_db: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_cells", "users_per_cell", "antennas_per_bs"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.cell_radius_m <= 0:
            raise ConfigError(f"cell_radius_m must be positive, got {self.cell_radius_m}")
        if not 0 < self.user_distance_m <= self.cell_radius_m:
            raise ConfigError(
                f"user_distance_m must lie in (0, cell_radius_m], got "
                f"{self.user_distance_m} with radius {self.cell_radius_m}"
            )
        if self.broadcast_rate < 0:
            raise ConfigError(f"broadcast_rate must be >= 0, got {self.broadcast_rate}")
        rates = dict(self.unicast_rates)
        missing = [u for u in self.users() if u not in rates]
        if missing:
            raise ConfigError(f"unicast_rates missing users {missing}")
        extra = [u for u in rates if u not in set(self.users())]
        if extra:
            raise ConfigError(f"unicast_rates has unknown users {extra}")
        for u, r in rates.items():
            if r < 0:
                raise ConfigError(f"unicast_rates[{u}] must be >= 0, got {r}")
        for f in self.tdm_fraction_grid:
            if not 0.0 < f < 1.0:
                raise ConfigError(f"tdm fraction {f} outside the open interval (0, 1)")
        if len(self.tdm_fraction_grid) == 0:
            raise ConfigError("tdm_fraction_grid must be nonempty")
        if self.csi_error_variance < 0:
            raise ConfigError(f"csi_error_variance must be >= 0, got {self.csi_error_variance}")
        if isinstance(self.cluster_mode, str):
            if self.cluster_mode not in (NON_COOPERATIVE, FULL_COOPERATIVE):
                raise ConfigError(f"unknown cluster_mode {self.cluster_mode!r}")
        else:
            _validate_custom_clusters(self.cluster_mode, self.users(), self.n_cells)

    def users(self) -> list:
        return [(n, k) for n in range(1, self.n_cells + 1)
                for k in range(1, self.users_per_cell + 1)]

    @property
    def noise_power_w(self) -> float:
        return dbw_to_watts(self.noise_power_dbw)

    def with_overrides(self, **kwargs) -> "NetworkConfig":
        if "unicast_rate" in kwargs:
            r = kwargs.pop("unicast_rate")
            kwargs["unicast_rates"] = {u: float(r) for u in self.users()}
        cfg = replace(self, **kwargs)
        structural = {"n_cells", "users_per_cell"} & set(kwargs)
        if structural and "unicast_rates" not in kwargs:
            # user set changed: re-spread a common rate if the old map was uniform
            old = set(self.unicast_rates.values())
            if len(old) != 1:
                raise ConfigError("cannot resize a config with per-user unicast rates")
            cfg = replace(cfg, unicast_rates={u: old.pop() for u in cfg.users()})
        return cfg


def _validate_custom_clusters(mapping, users, n_cells):
    users = set(users)
    for u in users:
        if u not in mapping:
            raise ConfigError(f"custom cluster map missing user {u}")
    for u, bss in mapping.items():
        if u not in users:
            raise ConfigError(f"custom cluster map has unknown user {u}")
        bss = list(bss)
        if len(bss) == 0:
            raise ConfigError(f"cluster for user {u} is empty")
        if len(set(bss)) != len(bss):
            raise ConfigError(f"cluster for user {u} has duplicate BS indices")
        n, _k = u
        if n not in bss:
            raise ConfigError(f"cluster for user {u} must contain its own BS {n}")
        for i in bss:
            if not 1 <= i <= n_cells:
                raise ConfigError(f"cluster for user {u} references BS {i} outside 1..{n_cells}")


def load_config(path) -> NetworkConfig:
    """Load and validate the documented JSON configuration schema."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> NetworkConfig:
    required = ["n_cells", "users_per_cell", "antennas_per_bs", "cell_radius_m",
                "user_distance_m", "noise_power_dbw", "broadcast_rate", "rng_seed"]
    for key in required:
        if key not in doc:
            raise ConfigError(f"config is missing required key '{key}'")

    n_cells = _as_int(doc, "n_cells")
    users_per_cell = _as_int(doc, "users_per_cell")
    users = [(n, k) for n in range(1, n_cells + 1) for k in range(1, users_per_cell + 1)]

    if "unicast_rates" in doc and "unicast_rate" in doc:
        raise ConfigError("give either 'unicast_rate' or 'unicast_rates', not both")
    if "unicast_rates" in doc:
        raw = doc["unicast_rates"]
        if not isinstance(raw, dict):
            raise ConfigError("'unicast_rates' must be an object keyed \"n:k\"")
        rates = {_parse_user_key(k): float(v) for k, v in raw.items()}
    elif "unicast_rate" in doc:
        rates = {u: float(doc["unicast_rate"]) for u in users}
    else:
        raise ConfigError("config is missing required key 'unicast_rate' (or 'unicast_rates')")

    cluster_mode = doc.get("cluster_mode", NON_COOPERATIVE)
    if isinstance(cluster_mode, dict):
        cluster_mode = {_parse_user_key(k): tuple(int(i) for i in v)
                        for k, v in cluster_mode.items()}
    elif not isinstance(cluster_mode, str):
        raise ConfigError("'cluster_mode' must be a string or an object")

    grid = doc.get("tdm_fraction_grid")
    if grid is None:
        grid = DEFAULT_TDM_FRACTION_GRID
    else:
        if not isinstance(grid, list) or not grid:
            raise ConfigError("'tdm_fraction_grid' must be a nonempty array")
        grid = tuple(float(f) for f in grid)

    known = set(required) | {"unicast_rate", "unicast_rates", "cluster_mode",
                             "tdm_fraction_grid", "csi_error_variance",
                             "snr_gap_broadcast_db", "snr_gap_unicast_db"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"config has unknown keys {sorted(unknown)}")

    return NetworkConfig(
        n_cells=n_cells,
        users_per_cell=users_per_cell,
        antennas_per_bs=_as_int(doc, "antennas_per_bs"),
        cell_radius_m=float(doc["cell_radius_m"]),
        user_distance_m=float(doc["user_distance_m"]),
        noise_power_dbw=float(doc["noise_power_dbw"]),
        broadcast_rate=float(doc["broadcast_rate"]),
        unicast_rates=rates,
        cluster_mode=cluster_mode,
        tdm_fraction_grid=grid,
        csi_error_variance=float(doc.get("csi_error_variance", 0.0)),
        snr_gap_broadcast_db=float(doc.get("snr_gap_broadcast_db", 0.0)),
        snr_gap_unicast_db=float(doc.get("snr_gap_unicast_db", 0.0)),
        rng_seed=int(doc["rng_seed"]),
    )


def _as_int(doc, key):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"'{key}' must be an integer, got {v!r}")
    return v


def _parse_user_key(key: str):
    try:
        n, k = key.split(":")
        return (int(n), int(k))
    except Exception as e:
        raise ConfigError(f"user key {key!r} is not of the form \"n:k\"") from e


# --- QoS targets ------------------------------------------------------------

@dataclass(frozen=True)
class QosTargets:
    """Linear SINR thresholds. gamma == 0 means the corresponding layer is off."""

    gamma_broadcast: float
    gamma_unicast: dict
    scheme: str                      # "tdm" | "ldm"
    tdm_fraction: float = None

    def __post_init__(self):
        if self.scheme not in ("tdm", "ldm"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "tdm":
            if self.tdm_fraction is None or not 0.0 < self.tdm_fraction < 1.0:
                raise ValueError(f"TDM fraction must lie in (0, 1), got {self.tdm_fraction}")
        if self.gamma_broadcast < 0:
            raise ValueError("gamma_broadcast must be >= 0")
        for u, g in self.gamma_unicast.items():
            if g < 0:
                raise ValueError(f"gamma_unicast[{u}] must be >= 0")


def rate_to_sinr_tdm(rate: float, fraction: float) -> float:
    """SINR threshold for a rate served over a time fraction: 2^(rate/fraction) - 1."""
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in the open interval (0, 1), got {fraction}")
    return 2.0 ** (rate / fraction) - 1.0


def rate_to_sinr_ldm(rate: float) -> float:
    """Full-slot SINR threshold: 2^rate - 1."""
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    return 2.0 ** rate - 1.0


def targets_for(config: NetworkConfig, scheme: str, fraction: float = None) -> QosTargets:
    """Derive QoS targets from the configured rates (coding gaps not applied here)."""
    if scheme == "tdm":
        if fraction is None:
            raise ValueError("TDM targets need a unicast time fraction")
        gb = rate_to_sinr_tdm(config.broadcast_rate, 1.0 - fraction) \
            if config.broadcast_rate > 0 else 0.0
        gu = {u: rate_to_sinr_tdm(r, fraction) if r > 0 else 0.0
              for u, r in config.unicast_rates.items()}
        return QosTargets(gb, gu, "tdm", fraction)
    if scheme == "ldm":
        gb = rate_to_sinr_ldm(config.broadcast_rate)
        gu = {u: rate_to_sinr_ldm(r) for u, r in config.unicast_rates.items()}
        return QosTargets(gb, gu, "ldm")
    raise ValueError(f"unknown scheme {scheme!r}")


def apply_coding_gap(targets: QosTargets, gap_broadcast_db: float,
                     gap_unicast_db: float) -> QosTargets:
    """Rescale targets by the SNR gap to capacity: gamma -> gamma / 10^(gap_db/10).

    Equivalent to multiplying the achieved SINR by the gap factor; keeping the
    rescaling on the targets leaves every problem builder gap-agnostic.
    """
    lam_b = db_to_linear(gap_broadcast_db)
    lam_u = db_to_linear(gap_unicast_db)
    return QosTargets(
        gamma_broadcast=targets.gamma_broadcast / lam_b,
        gamma_unicast={u: g / lam_u for u, g in targets.gamma_unicast.items()},
        scheme=targets.scheme,
        tdm_fraction=targets.tdm_fraction,
    )


def effective_targets(config: NetworkConfig, scheme: str, fraction: float = None) -> QosTargets:
    """Rate-derived targets with the configured coding gaps applied."""
    return apply_coding_gap(targets_for(config, scheme, fraction),
                            config.snr_gap_broadcast_db, config.snr_gap_unicast_db)


# --- cooperation clusters ---------------------------------------------------

@dataclass(frozen=True)
class ClusterMap:
    """clusters: user -> ordered BS tuple; served_by: BS -> user tuple (exact inverse)."""

    clusters: dict
    served_by: dict

    def cluster(self, user):
        return self.clusters[user]


def build_clusters(config: NetworkConfig) -> ClusterMap:
    users = config.users()
    mode = config.cluster_mode
    if mode == NON_COOPERATIVE:
        clusters = {(n, k): (n,) for (n, k) in users}
    elif mode == FULL_COOPERATIVE:
        full = tuple(range(1, config.n_cells + 1))
        clusters = {u: full for u in users}
    else:
        _validate_custom_clusters(mode, users, config.n_cells)
        clusters = {u: tuple(sorted(set(mode[u]))) for u in users}
    served_by = {i: tuple(u for u in users if i in clusters[u])
                 for i in range(1, config.n_cells + 1)}
    return ClusterMap(clusters=clusters, served_by=served_by)


def injection_level(power_broadcast: float, power_unicast: float) -> float:
    """Broadcast-to-unicast power ratio in dB: 10 log10(P_B / P_U)."""
    if power_broadcast <= 0 or power_unicast <= 0:
        raise ValueError("injection level needs strictly positive powers")
    return 10.0 * math.log10(power_broadcast / power_unicast)
