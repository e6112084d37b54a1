"""JSON-lines dataset manifests.

One object per line. Paths are stored as written and resolved against the
manifest's directory when relative.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import FormatError

FIELDS = ("sequence_id", "frame_paths", "saliency_map_path", "fixation_map_path", "brake_label", "frame_timestamp")


@dataclass
class ManifestEntry:
    sequence_id: str
    frame_paths: list
    saliency_map_path: str
    fixation_map_path: str = None
    brake_label: bool = None
    frame_timestamp: float = None


@dataclass
class Manifest:
    entries: list = field(default_factory=list)
    root: Path = field(default=Path("."), compare=False)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.root / p

    @property
    def has_fixations(self):
        return bool(self.entries) and all(e.fixation_map_path for e in self.entries)

    @property
    def has_labels(self):
        return bool(self.entries) and all(e.brake_label is not None for e in self.entries)


def _entry_from_obj(obj, lineno, path):
    unknown = set(obj) - set(FIELDS)
    if unknown:
        raise FormatError(f"{path}:{lineno}: unknown manifest fields {sorted(unknown)}")
    for key in ("sequence_id", "frame_paths", "saliency_map_path"):
        if key not in obj:
            raise FormatError(f"{path}:{lineno}: missing field {key!r}")
    if not isinstance(obj["frame_paths"], list) or not obj["frame_paths"]:
        raise FormatError(f"{path}:{lineno}: frame_paths must be a non-empty list")
    return ManifestEntry(**obj)


def read_manifest(path, check_files=True):
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc.msg}") from None
            entries.append(_entry_from_obj(obj, lineno, path))
    manifest = Manifest(entries, path.parent)
    if check_files:
        for e in entries:
            for p in [*e.frame_paths, e.saliency_map_path, e.fixation_map_path]:
                if p and not manifest.resolve(p).exists():
                    raise FormatError(f"{path}: entry {e.sequence_id} references missing file {p}")
    return manifest


def write_manifest(manifest, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in manifest.entries:
            fh.write(json.dumps(asdict(e), sort_keys=True) + "\n")
