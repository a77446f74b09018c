"""Named experiment configurations, one per deployment setting.

Each preset stresses the federation the way its setting does. The numbers are
simulator choices, not measurements of real deployments.

==========  =======  =========  ===========  =========  =====================
preset      clients  compute s  link s       dropout    other
==========  =======  =========  ===========  =========  =====================
edge_vision 8        0.5 - 2.0  0.1 - 1.0    0.05-0.15
blockchain  5        0.5 - 2.0  1.0 - 10.0   0.00-0.05
mobile      20       0.5 - 3.0  0.2 - 1.5    0.30-0.50  n=4000
iot         12       0.2 - 1.0  0.1 - 0.8    0.10-0.30  n=1200, bursty (0.7)
healthcare  4        1.0 - 3.0  0.1 - 0.5    0.00-0.02  n=4000, 1:4 imbalance
==========  =======  =========  ===========  =========  =====================
"""

from __future__ import annotations

from typing import Any, Dict, List

from .exceptions import ConfigError
from .models.config_model import ExperimentConfig
from .utils.config_loader import validate_config
from .utils.logger import log_and_raise_error

PRESETS: Dict[str, Dict[str, Any]] = {
    # moderate latency, moderate dropout
    "edge_vision": {
        "partition": {"clients": 8},
        "heterogeneity": {"compute_time": (0.5, 2.0), "link_latency": (0.1, 1.0), "dropout": (0.05, 0.15)},
    },
    # link latency ten times edge_vision
    "blockchain": {
        "partition": {"clients": 5},
        "heterogeneity": {"compute_time": (0.5, 2.0), "link_latency": (1.0, 10.0), "dropout": (0.0, 0.05)},
    },
    # many unreliable clients
    "mobile": {
        "dataset": {"n": 4000},
        "partition": {"clients": 20},
        "heterogeneity": {"compute_time": (0.5, 3.0), "link_latency": (0.2, 1.5), "dropout": (0.3, 0.5)},
    },
    # small shards, intermittent participation
    "iot": {
        "dataset": {"n": 1200},
        "partition": {"clients": 12},
        "heterogeneity": {
            "compute_time": (0.2, 1.0),
            "link_latency": (0.1, 0.8),
            "dropout": (0.1, 0.3),
            "burst_persistence": 0.7,
        },
    },
    # few large, reliable, label-imbalanced sites
    "healthcare": {
        "dataset": {"n": 4000, "imbalance_ratio": 4.0},
        "partition": {"clients": 4, "concentration": 1.0},
        "heterogeneity": {"compute_time": (1.0, 3.0), "link_latency": (0.1, 0.5), "dropout": (0.0, 0.02)},
    },
}


def preset_names() -> List[str]:
    return list(PRESETS)


def preset(name: str) -> ExperimentConfig:
    """
    Build the config of a named preset.

    Args:
        name: one of preset_names().

    Returns:
        The validated config; every key a preset does not set keeps its default.

    Raises:
        ConfigError: Unknown preset name.
    """
    if name not in PRESETS:
        log_and_raise_error(f"Unknown preset {name!r}; valid presets: {', '.join(PRESETS)}.", ConfigError)
    return validate_config({"name": name, **PRESETS[name]}, source=f"preset {name}")
