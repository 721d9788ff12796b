"""Flat ``key = value`` run configuration.

Every pipeline setting has one key. ``dump_config`` writes all of them with a
short comment on what each controls; ``load_config`` reads such a file back,
so a dumped default config is a valid starting point for edits. Blank lines
and ``#`` comments are ignored.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .association import AssociationConfig
from .bbd import BbdParams
from .kalman import KalmanModel
from .tracker import PipelineConfig
from .visual_tracking import VtParams


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(p) for p in s.split(",") if p.strip())


# key -> (section, field, parser, comment); section None means PipelineConfig itself
FIELDS = {
    "t_live": (None, "t_live", float, "seconds a tracklet survives without a matched detection"),
    "ema_lambda": (None, "ema_lambda", float, "weight of the old appearance in the running embedding average"),
    "init_confidence": (None, "init_confidence", float, "minimum detection confidence to start a tracklet"),
    "gate": (None, "gate", str, "stage-1 spatial gate: bbd or mahalanobis"),
    "theta_mahalanobis": (None, "theta_mahalanobis", float, "Mahalanobis gate radius (sqrt of the 95% chi-square, 2 dof)"),
    "emit_coasted": (None, "emit_coasted", _bool, "report unmatched live tracklets at their predicted box"),
    "threads": (None, "threads", int, "worker threads for visual tracking"),
    "theta_bbd": ("association", "theta_bbd", float, "stage-1 gate on the Bbox-Based Distance"),
    "theta_iou": ("association", "theta_iou", float, "stage-2 gate on IoU at the association frame"),
    "theta_reid_high": ("association", "theta_reid_high", float, "stage-1 minimum appearance similarity"),
    "theta_reid_low": ("association", "theta_reid_low", float, "stage-2 minimum appearance similarity"),
    "two_stage": ("association", "two_stage", _bool, "false runs a single appearance-only matching"),
    "bbd_alpha": ("bbd", "alpha", float, "lower clip of staleness (seconds) in the BBD covariance"),
    "bbd_beta": ("bbd", "beta", float, "upper clip of staleness (seconds) in the BBD covariance"),
    "bbd_c": ("bbd", "c", float, "box-size multiplier in the BBD covariance"),
    "vt_bins": ("vt", "bins", int, "color histogram bins per channel"),
    "vt_max_iter": ("vt", "max_iter", int, "mean-shift iteration cap"),
    "vt_min_shift": ("vt", "min_shift", float, "convergence threshold on the center shift (px)"),
    "vt_scales": ("vt", "scales", _floats, "candidate relative scales tried once the center settles"),
    "vt_scale_smoothing": ("vt", "scale_smoothing", float, "weight of the current size when blending in the chosen scale"),
    "vt_scale_penalty": ("vt", "scale_penalty", float, "penalty per unit log size change"),
    "vt_scale_bounds": ("vt", "scale_bounds", _floats, "min,max size relative to the model box"),
    "vt_failure_threshold": ("vt", "failure_threshold", float, "Bhattacharyya similarity below which tracking fails"),
    "kf_std_position": ("kalman", "std_position", float, "process noise std of position and size, per unit box height"),
    "kf_std_velocity": ("kalman", "std_velocity", float, "process noise std of velocities, per unit box height"),
    "kf_std_obs_position": ("kalman", "std_obs_position", float, "measurement noise std of the box, per unit box height"),
    "kf_std_obs_velocity": ("kalman", "std_obs_velocity", float, "measurement noise std of the visual displacement, per unit box height"),
    "kf_init_velocity_scale": ("kalman", "init_velocity_scale", float, "initial velocity variance relative to the box variance"),
}

_SECTIONS = {"association": AssociationConfig, "bbd": BbdParams, "vt": VtParams, "kalman": KalmanModel}


def _get(config: PipelineConfig, key: str):
    section, name, _, _ = FIELDS[key]
    obj = config if section is None else getattr(config, section)
    return getattr(obj, name)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_items(config: PipelineConfig = PipelineConfig()) -> dict[str, str]:
    """Every key with its formatted value."""
    return {key: _fmt(_get(config, key)) for key in FIELDS}


def dump_config(config: PipelineConfig = PipelineConfig()) -> str:
    values = config_items(config)
    return "".join(f"# {FIELDS[key][3]}\n{key} = {v}\n" for key, v in values.items())


def parse_config(text: str, base: PipelineConfig = PipelineConfig(), name: str = "<config>") -> PipelineConfig:
    """Apply ``key = value`` lines on top of ``base``."""
    top: dict = {}
    sections: dict[str, dict] = {s: {} for s in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{name}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError(f"{name}:{lineno}: unknown key {key!r}")
        section, field_name, parse, _ = FIELDS[key]
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{name}:{lineno}: {exc}") from exc
        (top if section is None else sections[section])[field_name] = parsed
    try:
        for section, values in sections.items():
            if values:
                top[section] = replace(getattr(base, section), **values)
        return replace(base, **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_config(path, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    return parse_config(Path(path).read_text(), base, str(path))
