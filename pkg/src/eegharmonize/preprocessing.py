"""Epoch container and the standard preprocessing chain.

Band-pass filter (4th-order Butterworth, forward-backward, zero phase),
polyphase resampling with a Kaiser-windowed anti-alias filter, fixed-length
segmentation, and per-epoch shrunk covariance extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import scipy.signal

from .errors import (
    DimMismatchError,
    InvalidBandError,
    NonFiniteError,
    UpsamplingError,
)
from .geometry import SpdMatrix, shrink_covariance

FILTER_ORDER = 4


@dataclass(frozen=True)
class EpochSet:
    """Trials as a [n_epochs x n_channels x n_times] array in volts.

    ``labels`` holds one class id per epoch; it may be None for data whose
    labels are withheld (unlabeled target datasets).
    """

    data: np.ndarray
    channel_names: tuple[str, ...]
    sfreq: float
    labels: np.ndarray | None = None

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise DimMismatchError(f"epochs must be 3-d, got shape {arr.shape}")
        if arr.shape[1] != len(self.channel_names):
            raise DimMismatchError(
                f"{arr.shape[1]} channels in data vs "
                f"{len(self.channel_names)} channel names"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("epoch data contains NaN or inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.int64)
            if lab.shape != (arr.shape[0],):
                raise DimMismatchError(
                    f"{lab.shape[0] if lab.ndim else 0} labels for "
                    f"{arr.shape[0]} epochs"
                )
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n_epochs(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_times(self) -> int:
        return self.data.shape[2]

    def with_data(self, data, channel_names=None, sfreq=None) -> "EpochSet":
        return EpochSet(
            data,
            tuple(channel_names) if channel_names is not None else self.channel_names,
            float(sfreq) if sfreq is not None else self.sfreq,
            self.labels,
        )

    def without_labels(self) -> "EpochSet":
        return replace(self, labels=None)


def bandpass_filtfilt(x: EpochSet, low: float, high: float) -> EpochSet:
    """Zero-phase band-pass: Butterworth biquads run forward then backward.

    Uses odd-reflection padding of three filter lengths at both ends so the
    epoch edges do not ring.
    """
    if not 0.0 < low < high < x.sfreq / 2.0:
        raise InvalidBandError(
            f"need 0 < low < high < nyquist, got ({low}, {high}) at {x.sfreq} Hz"
        )
    sos = scipy.signal.butter(
        FILTER_ORDER, [low, high], btype="bandpass", fs=x.sfreq, output="sos"
    )
    ntaps = 2 * FILTER_ORDER + 1
    padlen = min(3 * ntaps, x.n_times - 1)
    filtered = scipy.signal.sosfiltfilt(
        sos, x.data, axis=-1, padtype="odd", padlen=padlen
    )
    return x.with_data(filtered)


def resample(x: EpochSet, target: float) -> EpochSet:
    """Polyphase downsampling to ``target`` Hz (Kaiser anti-alias window)."""
    if target > x.sfreq:
        raise UpsamplingError(f"cannot resample {x.sfreq} Hz up to {target} Hz")
    if target == x.sfreq:
        return x
    ratio = Fraction(target).limit_denominator(10**6) / Fraction(
        x.sfreq
    ).limit_denominator(10**6)
    out = scipy.signal.resample_poly(
        x.data, ratio.numerator, ratio.denominator, axis=-1, window=("kaiser", 5.0)
    )
    n_keep = math.floor(x.n_times * target / x.sfreq)
    return x.with_data(out[..., :n_keep], sfreq=target)


def segment_fixed_length(
    data: np.ndarray, channel_names, sfreq: float, win_sec: float
) -> EpochSet:
    """Cut a continuous [channels x times] record into non-overlapping
    fixed-length epochs (trailing partial window dropped)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimMismatchError(f"continuous data must be 2-d, got {arr.shape}")
    win = int(round(win_sec * sfreq))
    if win < 1:
        raise ValueError(f"window of {win_sec} s is empty at {sfreq} Hz")
    n_epochs = arr.shape[1] // win
    segmented = arr[:, : n_epochs * win].reshape(arr.shape[0], n_epochs, win)
    return EpochSet(np.moveaxis(segmented, 0, 1), tuple(channel_names), sfreq)


def epochs_to_covs(x: EpochSet) -> list[SpdMatrix]:
    """One shrunk spatial covariance per epoch, in epoch order."""
    return [shrink_covariance(epoch) for epoch in x.data]
