"""Telemetry labelling, map I/O, manifests and synthetic data."""

from .manifest import Manifest, ManifestEntry, read_manifest, write_manifest
from .maps import load_gray_map, load_rgb_image, normalize_map, write_gray_map, write_rgb_image
from .synth import SynthConfig, gen_synthetic
from .telemetry import (
    BrakeLabel,
    BrakeLabelConfig,
    TelemetrySeries,
    label_brakes,
    parse_telemetry,
    speed_at,
)

__all__ = [
    "BrakeLabel",
    "BrakeLabelConfig",
    "Manifest",
    "ManifestEntry",
    "SynthConfig",
    "TelemetrySeries",
    "gen_synthetic",
    "label_brakes",
    "load_gray_map",
    "load_rgb_image",
    "normalize_map",
    "parse_telemetry",
    "read_manifest",
    "speed_at",
    "write_gray_map",
    "write_manifest",
    "write_rgb_image",
]
