"""On-disk formats: raw float32 epoch files with JSON sidecars, dataset
manifests, and result files.

Epochs are stored as little-endian 32-bit floats, C-order
[n_epochs, n_channels, n_times], next to a sidecar
``{n_epochs, n_channels, n_times, sfreq, labels, channels}``. A dataset
directory holds one ``manifest.json`` plus one epoch file per run.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .montage import Montage
from .preprocessing import EpochSet


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def config_hash(config: dict) -> str:
    """Stable 16-hex digest of a resolved configuration."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def write_epochs(base_path, epochs: EpochSet) -> tuple[Path, Path]:
    """Write one run: ``<base>.f32`` plus ``<base>.json`` sidecar."""
    base = Path(base_path)
    f32_path = base.with_suffix(".f32")
    epochs.data.astype("<f4").tofile(f32_path)
    sidecar = {
        "n_epochs": epochs.n_epochs,
        "n_channels": epochs.n_channels,
        "n_times": epochs.n_times,
        "sfreq": epochs.sfreq,
        "labels": [int(v) for v in epochs.labels] if epochs.labels is not None else None,
        "channels": list(epochs.channel_names),
    }
    json_path = write_json(base.with_suffix(".json"), sidecar)
    return f32_path, json_path


def read_epochs(base_path, with_labels: bool = True) -> EpochSet:
    """Load one run; ``with_labels=False`` withholds the label array so the
    caller cannot accidentally consult target labels."""
    base = Path(base_path)
    if base.suffix in (".f32", ".json"):
        base = base.with_suffix("")
    sidecar = read_json(base.with_suffix(".json"))
    shape = (sidecar["n_epochs"], sidecar["n_channels"], sidecar["n_times"])
    data = np.fromfile(base.with_suffix(".f32"), dtype="<f4").reshape(shape)
    labels = None
    if with_labels and sidecar.get("labels") is not None:
        labels = np.array(sidecar["labels"], dtype=np.int64)
    return EpochSet(
        data.astype(np.float64),
        tuple(sidecar["channels"]),
        float(sidecar["sfreq"]),
        labels,
    )


def read_run_labels(base_path) -> np.ndarray:
    """Scoring-step access to a run's labels."""
    base = Path(base_path)
    if base.suffix in (".f32", ".json"):
        base = base.with_suffix("")
    sidecar = read_json(base.with_suffix(".json"))
    if sidecar.get("labels") is None:
        raise ValueError(f"{base} has no labels")
    return np.array(sidecar["labels"], dtype=np.int64)


def write_manifest(dataset_dir, manifest: dict) -> Path:
    return write_json(Path(dataset_dir) / "manifest.json", manifest)


def read_manifest(dataset_dir) -> dict:
    return read_json(Path(dataset_dir) / "manifest.json")


def manifest_montage(manifest: dict) -> Montage:
    return Montage.from_json(json.dumps(manifest["montage"]))


def dataset_dirs(root) -> list[Path]:
    """Dataset directories under a data root, sorted by name."""
    root = Path(root)
    return sorted(
        (d for d in root.iterdir() if (d / "manifest.json").is_file()),
        key=lambda d: d.name,
    )


def iter_runs(dataset_dir, manifest: dict):
    """Yield (subject_id, session_id, run_id, base_path) in manifest order."""
    dataset_dir = Path(dataset_dir)
    for subject in manifest["subjects"]:
        for session in subject["sessions"]:
            for run in session["runs"]:
                yield (
                    subject["id"],
                    session["id"],
                    run["id"],
                    dataset_dir / run["base"],
                )
