"""beamnet: joint unicast/broadcast beamforming optimization and simulation."""

__version__ = "0.1.0"

from .scenario import (  # noqa: F401
    ClusterMap,
    ConfigError,
    NetworkConfig,
    QosTargets,
    apply_coding_gap,
    build_clusters,
    effective_targets,
    injection_level,
    load_config,
    rate_to_sinr_ldm,
    rate_to_sinr_tdm,
    targets_for,
)
