"""Seeded generator of heterogeneous synthetic motor-imagery datasets.

Every trial mixes three ingredients through the spherical forward model:

* two motor-cortex dipoles (radial, at 0.7 R under the canonical C3 and C4
  positions) emitting band-limited 8-30 Hz oscillations. Class "left_hand"
  scales the right-hemisphere source amplitude by ``erd_factor``, class
  "right_hand" the left one (contralateral event-related desynchronization);
* 20 background dipoles per trial at random positions on the 0.7 R shell
  with 1/f-shaped activity;
* white sensor noise.

Dataset shift is a per-dataset gain plus a per-subject SPD congruence
W = exp(shift_std * S) applied to the whole trial, X = gain * W (G s + n),
so each subject's covariances are a pure congruence away from the clean
geometry and re-centering can undo the shift exactly.

Determinism: every random quantity comes from the pinned splitmix64 /
xoshiro256++ streams in :mod:`eegharmonize.rng`. Stream keys are
``(seed, "shift", dataset, subject)`` for the subject congruence,
``(seed, "bgpos", dataset, subject, session, run)`` for background dipole
geometry, and ``(seed, "ts", dataset, subject, session, run)`` for all time
series of a run. Time-series lanes are laid out trial-major as
[2 motor, 20 background, n_channels noise]; labels alternate 0, 1 within a
run. Identical spec + seed therefore reproduce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng
from .dataio import write_epochs, write_manifest
from .errors import InvalidSpecError
from .geometry import sym_exp
from .headmodel import dipole_potentials
from .montage import Montage, montage_from_names, standard_positions
from .preprocessing import EpochSet

N_BACKGROUND = 20
SOURCE_DEPTH = 0.7
OSC_BAND = (8.0, 30.0)
MOTOR_MOMENT = 1.5e-8   # A*m
BACKGROUND_MOMENT = 5e-9
PINK_FLOOR_HZ = 1.0
CLASS_MAP = {0: "left_hand", 1: "right_hand"}


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    channels: tuple[str, ...]
    n_subjects: int
    n_sessions: int
    n_runs: int
    trials_per_run: int
    sfreq: float
    trial_sec: float
    gain: float
    noise_std: float
    subject_shift_std: float


@dataclass(frozen=True)
class SimSpec:
    datasets: tuple[DatasetSpec, ...]
    erd_factor: float = 0.5
    seed: int = 727
    head_radius: float = 0.095

    def validate(self) -> None:
        if not self.datasets:
            raise InvalidSpecError("spec contains no datasets")
        if not 0.0 < self.erd_factor <= 1.0:
            raise InvalidSpecError(
                f"erd_factor must be in (0, 1], got {self.erd_factor}"
            )
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise InvalidSpecError(f"duplicate dataset names: {names}")
        table = standard_positions()
        for d in self.datasets:
            for count_field in ("n_subjects", "n_sessions", "n_runs",
                                "trials_per_run"):
                if getattr(d, count_field) < 1:
                    raise InvalidSpecError(f"{d.name}: {count_field} must be >= 1")
            if d.sfreq <= 2 * OSC_BAND[1]:
                raise InvalidSpecError(
                    f"{d.name}: sfreq {d.sfreq} too low for the {OSC_BAND} Hz band"
                )
            if d.trial_sec <= 0 or d.gain <= 0 or d.noise_std < 0:
                raise InvalidSpecError(f"{d.name}: bad trial_sec/gain/noise_std")
            from .montage import normalize_name

            unknown = [c for c in d.channels if normalize_name(c) not in table]
            if unknown:
                raise InvalidSpecError(f"{d.name}: unknown channels {unknown}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SimSpec":
        doc = json.loads(text)
        try:
            datasets = tuple(
                DatasetSpec(**{**d, "channels": tuple(d["channels"])})
                for d in doc["datasets"]
            )
            spec = cls(
                datasets=datasets,
                erd_factor=float(doc.get("erd_factor", 0.5)),
                seed=int(doc.get("seed", 727)),
                head_radius=float(doc.get("head_radius", 0.095)),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidSpecError(f"malformed simulation spec: {exc}") from None
        spec.validate()
        return spec


# ---------------------------------------------------------------------------
# benchmark montages: six 10-10/10-5 subsets sized {22, 3, 64, 30, 60, 14}
# whose full intersection is exactly {Cz} and whose union covers 84 channels

BENCH_B1_22 = (
    "Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2",
    "C4", "C6", "CP3", "CP1", "CPz", "CP2", "CP4", "P1", "Pz", "P2", "POz",
)
BENCH_B4_3 = ("C3", "Cz", "C4")
BENCH_P_64 = (
    "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7", "F5", "F3",
    "F1", "Fz", "F2", "F4", "F6", "F8", "FT7", "FC5", "FC3", "FC1", "FCz",
    "FC2", "FC4", "FC6", "FT8", "T7", "C5", "C3", "C1", "Cz", "C2", "C4",
    "C6", "T8", "T9", "T10", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4",
    "CP6", "TP8", "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8",
    "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2", "Iz",
)
BENCH_S_30 = (
    "Fp1", "Fpz", "Fp2", "AF7", "AF5", "AF3", "AF1", "AF2", "AF4", "AF6",
    "AF8", "F9", "F10", "FT9", "FT10", "TP9", "TP10", "P9", "P10", "PO9",
    "PO1", "PO2", "PO10", "O9", "O1", "Oz", "O2", "O10", "POz", "Cz",
)
BENCH_W_60 = (
    "Fp1", "Fpz", "Fp2", "AF3", "AF4", "F7", "F5", "F3", "F1", "Fz", "F2",
    "F4", "F6", "F8", "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6",
    "FT8", "T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8", "TP7",
    "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "P7", "P5", "P3",
    "P1", "Pz", "P2", "P4", "P6", "P8", "PO7", "PO5", "PO3", "POz", "PO4",
    "PO6", "PO8", "O1", "Oz", "O2",
)
BENCH_Z_14 = (
    "Fp1", "Fp2", "FC3", "FCz", "FC4", "C3", "Cz", "C4", "CP3", "CPz",
    "CP4", "O1", "Oz", "O2",
)


def bench6_spec(seed: int = 727, erd_factor: float = 0.5) -> SimSpec:
    """The six-dataset benchmark used by the acceptance suite."""
    datasets = (
        DatasetSpec("b1", BENCH_B1_22, 3, 2, 3, 8, 250.0, 2.0, 1.0, 1.2e-6, 0.15),
        DatasetSpec("b4", BENCH_B4_3, 3, 3, 1, 16, 250.0, 2.0, 2.2, 1.8e-6, 0.15),
        DatasetSpec("p", BENCH_P_64, 4, 1, 1, 48, 160.0, 2.0, 0.6, 1.0e-6, 0.12),
        DatasetSpec("s", BENCH_S_30, 3, 3, 1, 16, 200.0, 2.0, 1.6, 1.2e-6, 0.12),
        DatasetSpec("w", BENCH_W_60, 3, 1, 1, 48, 200.0, 2.0, 0.8, 1.5e-6, 0.15),
        DatasetSpec("z", BENCH_Z_14, 3, 2, 2, 12, 250.0, 2.0, 1.3, 1.0e-6, 0.18),
    )
    spec = SimSpec(datasets=datasets, erd_factor=erd_factor, seed=seed)
    spec.validate()
    return spec


def null6_spec(seed: int = 728) -> SimSpec:
    """Three small datasets with erd_factor 1.0: no class signal at all."""
    datasets = (
        DatasetSpec("n1", BENCH_Z_14, 3, 1, 2, 24, 128.0, 2.0, 1.0, 1.2e-6, 0.15),
        DatasetSpec("n2", BENCH_B4_3, 3, 1, 2, 24, 128.0, 2.0, 1.8, 1.5e-6, 0.15),
        DatasetSpec("n3", BENCH_B1_22[:10], 3, 1, 2, 24, 128.0, 2.0, 0.7, 1.0e-6, 0.12),
    )
    return SimSpec(datasets=datasets, erd_factor=1.0, seed=seed)


def mini_spec(seed: int = 1001, erd_factor: float = 0.4) -> SimSpec:
    """Tiny two-dataset spec for fast tests and determinism checks."""
    datasets = (
        DatasetSpec("m1", BENCH_Z_14, 2, 1, 1, 24, 128.0, 2.0, 1.0, 0.8e-6, 0.10),
        DatasetSpec("m2", ("FC3", "C3", "Cz", "C4", "FC4", "Pz"), 2, 1, 1, 24,
                    128.0, 2.0, 1.5, 0.8e-6, 0.10),
    )
    return SimSpec(datasets=datasets, erd_factor=erd_factor, seed=seed)


PRESETS = {
    "bench6": bench6_spec,
    "null6": null6_spec,
    "mini": mini_spec,
}


def resolve_spec(source: str) -> SimSpec:
    """Load a SimSpec from a JSON file path or a preset name."""
    path = Path(source)
    if path.is_file():
        return SimSpec.from_json(path.read_text())
    if source in PRESETS:
        return PRESETS[source]()
    raise InvalidSpecError(f"{source!r} is neither a spec file nor one of "
                           f"{sorted(PRESETS)}")


# ---------------------------------------------------------------------------
# generation

def _band_mask_scale(n_times: int, sfreq: float, low: float, high: float):
    freqs = np.fft.rfftfreq(n_times, 1.0 / sfreq)
    mask = ((freqs >= low) & (freqs <= high)).astype(np.float64)
    # white noise in, unit variance out: compensate the removed bins
    weight = np.full_like(freqs, 0.5)
    weight[0] = 1.0
    if n_times % 2 == 0:
        weight[-1] = 1.0
    scale = np.sqrt(np.sum(weight * mask**2) / np.sum(weight))
    return mask, scale


def _pink_mask_scale(n_times: int, sfreq: float):
    freqs = np.fft.rfftfreq(n_times, 1.0 / sfreq)
    mask = np.zeros_like(freqs)
    mask[1:] = 1.0 / np.sqrt(np.maximum(freqs[1:], PINK_FLOOR_HZ))
    weight = np.full_like(freqs, 0.5)
    weight[0] = 1.0
    if n_times % 2 == 0:
        weight[-1] = 1.0
    scale = np.sqrt(np.sum(weight * mask**2) / np.sum(weight))
    return mask, scale


def _shape_spectrum(lanes: np.ndarray, mask: np.ndarray, scale: float):
    spec = np.fft.rfft(lanes, axis=-1)
    shaped = np.fft.irfft(spec * mask, n=lanes.shape[-1], axis=-1)
    return shaped / scale


def _subject_shift(spec: SimSpec, d: DatasetSpec, subject: int) -> np.ndarray:
    n = len(d.channels)
    key = rng.derive_key(spec.seed, "shift", d.name, subject)
    z = rng.gaussian_matrix(key, n, n)
    sym = 0.5 * (z + z.T)
    return sym_exp(d.subject_shift_std * sym)


def _motor_leadfield(montage: Montage, head_radius: float) -> np.ndarray:
    table = standard_positions(head_radius)
    positions = np.stack([
        SOURCE_DEPTH * table["C3"],
        SOURCE_DEPTH * table["C4"],
    ])
    moments = positions / np.linalg.norm(positions, axis=1, keepdims=True)
    g = dipole_potentials(montage, positions, moments)
    return g - g.mean(axis=0, keepdims=True)


def simulate_run(
    spec: SimSpec, d: DatasetSpec, subject: int, session: int, run: int
) -> EpochSet:
    """Generate one run; reproducible from (spec, ids) alone."""
    montage = montage_from_names(d.channels, spec.head_radius)
    n_ch = len(d.channels)
    n_trials = d.trials_per_run
    n_times = int(round(d.trial_sec * d.sfreq))
    labels = np.arange(n_trials, dtype=np.int64) % 2

    lanes = rng.gaussian_matrix(
        rng.derive_key(spec.seed, "ts", d.name, subject, session, run),
        n_trials * (2 + N_BACKGROUND + n_ch),
        n_times,
    ).reshape(n_trials, 2 + N_BACKGROUND + n_ch, n_times)

    band_mask, band_scale = _band_mask_scale(n_times, d.sfreq, *OSC_BAND)
    pink_mask, pink_scale = _pink_mask_scale(n_times, d.sfreq)
    motor = _shape_spectrum(lanes[:, :2, :], band_mask, band_scale) * MOTOR_MOMENT
    background = (
        _shape_spectrum(lanes[:, 2:2 + N_BACKGROUND, :], pink_mask, pink_scale)
        * BACKGROUND_MOMENT
    )
    noise = lanes[:, 2 + N_BACKGROUND:, :] * d.noise_std

    # contralateral desynchronization: left-hand trials damp the C4 source,
    # right-hand trials the C3 source
    amp = np.ones((n_trials, 2))
    amp[labels == 0, 1] = spec.erd_factor
    amp[labels == 1, 0] = spec.erd_factor
    motor = motor * amp[:, :, None]

    bg_draw = rng.gaussian_matrix(
        rng.derive_key(spec.seed, "bgpos", d.name, subject, session, run),
        n_trials * N_BACKGROUND,
        6,
    )
    directions = bg_draw[:, :3]
    directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True),
                             1e-12)
    orientations = bg_draw[:, 3:]
    orientations /= np.maximum(
        np.linalg.norm(orientations, axis=1, keepdims=True), 1e-12
    )
    bg_positions = directions * SOURCE_DEPTH * spec.head_radius
    g_bg = dipole_potentials(montage, bg_positions, orientations)
    g_bg = g_bg - g_bg.mean(axis=0, keepdims=True)
    g_bg = g_bg.reshape(n_ch, n_trials, N_BACKGROUND)

    g_motor = _motor_leadfield(montage, spec.head_radius)
    data = (
        np.einsum("cm,nmt->nct", g_motor, motor)
        + np.einsum("cnb,nbt->nct", g_bg, background)
        + noise
    )
    shift = _subject_shift(spec, d, subject)
    data = d.gain * np.einsum("cd,ndt->nct", shift, data)
    return EpochSet(data, d.channels, d.sfreq, labels)


def generate(spec: SimSpec, out_root) -> list[Path]:
    """Write every dataset of the spec under ``out_root``; returns the
    dataset directories."""
    spec.validate()
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    written = []
    for d in spec.datasets:
        dataset_dir = out_root / d.name
        dataset_dir.mkdir(parents=True, exist_ok=True)
        montage = montage_from_names(d.channels, spec.head_radius)
        subjects = []
        for subject in range(1, d.n_subjects + 1):
            sessions = []
            for session in range(1, d.n_sessions + 1):
                runs = []
                for run in range(1, d.n_runs + 1):
                    epochs = simulate_run(spec, d, subject, session, run)
                    base = f"sub{subject:02d}_ses{session:02d}_run{run:02d}"
                    write_epochs(dataset_dir / base, epochs)
                    runs.append({"id": f"run{run:02d}", "base": base,
                                 "n_trials": epochs.n_epochs})
                sessions.append({"id": f"ses{session:02d}", "runs": runs})
            subjects.append({"id": f"sub{subject:02d}", "sessions": sessions})
        manifest = {
            "name": d.name,
            "sfreq": d.sfreq,
            "trial_sec": d.trial_sec,
            "class_map": {str(k): v for k, v in CLASS_MAP.items()},
            "montage": json.loads(montage.to_json()),
            "gain": d.gain,
            "noise_std": d.noise_std,
            "subject_shift_std": d.subject_shift_std,
            "erd_factor": spec.erd_factor,
            "seed": spec.seed,
            "subjects": subjects,
        }
        write_manifest(dataset_dir, manifest)
        written.append(dataset_dir)
    return written
