"""Python access to the ermlab simulation core."""

import json

from ._ermlab import (
    ArgumentError,
    ConfigError,
    ConvergenceError,
    ConvexBody,
    DimensionError,
    FixedPointResult,
    NumericalError,
    UnsupportedError,
    WidthEstimate,
    accuracy_confidence_lower,
    derive_seed,
    erm,
    excess_risk,
    fit_rate,
    gauge,
    gaussian_shift_bound,
    gaussian_width_mc,
    kernel_section_diameter,
    maxnorm_atom_width,
    normal_quantile,
    num_threads,
    predicted_rate,
    preset_config,
    preset_names,
    project,
    project_intersection,
    sample_dataset,
    set_num_threads,
    solve_fixed_point,
    support,
    support_intersection,
)
from ._ermlab import run_experiment as _run_experiment


def run_experiment(config=None, preset=None, constants=""):
    """Run an experiment from flat ``key: value`` pairs and/or a preset name.

    Returns a dict with ``csv``, ``summary`` (parsed JSON), ``config_echo``,
    ``failures`` and ``exit_code``.
    """
    flat = {k: str(v) for k, v in (config or {}).items()}
    if preset is not None:
        flat["preset"] = preset
    out = _run_experiment(flat, constants)
    out["summary"] = json.loads(out.pop("summary_json"))
    return out


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
