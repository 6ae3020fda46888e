"""``key = value`` run configuration files.

Lines starting with ``#`` are comments. Scene items may repeat::

    period_px = 70
    n_periods = 16
    noise_sigma = 0.02
    band = 100, 300, 30        # start px, end px, height mm
    band = 300, 500, 60
    sphere = 560, 456, 40, 30  # cx px, cy px, radius mm, apex mm
    velocity = 0.5             # px/frame drift of the whole scene

Without any ``plane``, ``band`` or ``sphere`` item the scene is the h=0 plane.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

from .calibration import DEFAULT_HEIGHTS
from .patterns import PatternSpec
from .simulator import Composite, OpticalModel, Plane, SphereCap, Steps

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "METHODS", "POLICIES"]

METHODS = ("tripu", "traditional", "two_frequency", "two_wavelength")
POLICIES = ("causal", "centered")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


_SPEC_KEYS = {"period_px": float, "n_periods": int, "n_gray_bits": int, "phase_axis": str,
              "phi0": float, "proj_width": int, "proj_height": int}
_MODEL_KEYS = {"K": float, "L": float, "defocus_sigma": float, "noise_sigma": float, "seed": int,
               "quadratic": float, "defocus_slope": float, "mm_per_px": float, "shadows": "bool"}
_RUN_KEYS = {"method": str, "policy": str, "n_groups": int, "edge_radius": int, "b_threshold": float,
             "dither": "bool", "calib_heights": "floats", "rate_hz": float, "velocity": float,
             "correct": "bool"}
_REPEATED = {"band": 3, "sphere": 4, "plane": 1}


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulated or recorded run needs."""

    spec: PatternSpec = field(default_factory=lambda: PatternSpec(70, 16, 4, proj_height=64))
    model: OpticalModel = field(default_factory=OpticalModel)
    scene: object = field(default_factory=Plane)
    method: str = "tripu"
    policy: str = "causal"
    n_groups: int = 4
    edge_radius: int = 2
    b_threshold: float = 0.02
    dither: bool = True
    correct: bool = True
    calib_heights: tuple = DEFAULT_HEIGHTS
    rate_hz: float = 2170.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICIES)}")
        if self.n_groups < 1:
            raise ConfigError(f"n_groups must be >= 1, got {self.n_groups}")
        if self.edge_radius < 0:
            raise ConfigError(f"edge_radius must be >= 0, got {self.edge_radius}")

    @property
    def mm_per_px(self):
        return self.model.mm_per_px


def _convert(key, kind, raw, where):
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return low in ("1", "true", "yes")
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: bad value for {key}: {raw!r}") from None


def parse_config(text, source="<config>"):
    """Parse config text into a :class:`RunConfig`."""
    spec_kw, model_kw, run_kw = {}, {}, {}
    items = {"band": [], "sphere": [], "plane": []}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f"{source}:{n}"
        if not sep or not key:
            raise ConfigError(f"{where}: expected 'key = value', got {raw!r}")
        if key in _REPEATED:
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != _REPEATED[key]:
                raise ConfigError(f"{where}: {key} needs {_REPEATED[key]} comma-separated values")
            items[key].append(tuple(_convert(key, float, p, where) for p in parts))
        elif key in _SPEC_KEYS:
            spec_kw[key] = _convert(key, _SPEC_KEYS[key], value, where)
        elif key in _MODEL_KEYS:
            model_kw[key] = _convert(key, _MODEL_KEYS[key], value, where)
        elif key in _RUN_KEYS:
            run_kw[key] = _convert(key, _RUN_KEYS[key], value, where)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")

    try:
        spec_kw.setdefault("period_px", 70.0)
        spec_kw.setdefault("n_periods", 16)
        spec_kw.setdefault("n_gray_bits", 4)
        if spec_kw.get("phase_axis", "x") == "x":
            spec_kw.setdefault("proj_height", 64)
        else:
            spec_kw.setdefault("proj_width", 64)
        spec = PatternSpec(**spec_kw)
        model = OpticalModel(**model_kw)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    velocity = run_kw.pop("velocity", 0.0)
    try:
        scene = _build_scene(items, velocity)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for h in run_kw.get("calib_heights", ()):
        if not h > 0:
            raise ConfigError(f"{source}: calibration heights must be > 0, got {h}")
    return RunConfig(spec=spec, model=model, scene=scene, **run_kw)


def _build_scene(items, velocity):
    parts = []
    if items["band"]:
        parts.append(Steps(bands=tuple(items["band"])))
    parts.extend(SphereCap(cx=c[0], cy=c[1], radius_mm=c[2], apex_mm=c[3]) for c in items["sphere"])
    parts.extend(Plane(h=p[0]) for p in items["plane"])
    if not parts:
        return Plane(h=0.0, velocity=velocity)
    if len(parts) == 1:
        return replace(parts[0], velocity=velocity)
    return Composite(parts=tuple(parts), velocity=velocity)


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=str(path))
