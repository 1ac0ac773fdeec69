"""Spectral and temporal features of 1-s multichannel epochs.

The feature vector for an epoch restricted to ``M`` channels is the
concatenation of four blocks, always in this order:

``freq_power``  (M * 47)
    log10 FFT magnitude in 1 Hz bins, 1-47 Hz, channel-major.
``freq_eigs``  (M)
    descending eigenvalues of the channel cross matrix of the z-scored
    spectra.
``time_corr``  (M * (M - 1) / 2)
    upper triangle (row-major, diagonal excluded) of the channel
    correlation matrix after resampling to 400 Hz.
``time_eigs``  (M)
    descending eigenvalues of that correlation matrix.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_channels, check_epochs, check_fs
from .exceptions import DataError
from .linalg import sym_eigenvalues

EPS = 1e-12
TARGET_FS = 400
FREQ_BAND = (1, 47)


@dataclass(frozen=True)
class Spectrum:
    bins: np.ndarray
    band: tuple

    @property
    def freqs(self):
        return np.arange(self.band[0], self.band[1] + 1)


@dataclass(frozen=True)
class FeatureLayout:
    n_channels: int
    n_bins: int = FREQ_BAND[1] - FREQ_BAND[0] + 1

    @property
    def sizes(self):
        m = self.n_channels
        return {
            "freq_power": m * self.n_bins,
            "freq_eigs": m,
            "time_corr": m * (m - 1) // 2,
            "time_eigs": m,
        }

    @property
    def slices(self):
        out, start = {}, 0
        for name, size in self.sizes.items():
            out[name] = slice(start, start + size)
            start += size
        return out

    @property
    def length(self):
        return sum(self.sizes.values())

    def names(self, channels=None):
        """Column names, e.g. ``ch03_pow_17hz``, ``corr_03_07``.

        ``channels`` gives the original channel indexes used in the names;
        defaults to ``0..M-1``.
        """
        m = self.n_channels
        channels = list(range(m)) if channels is None else list(channels)
        lo = FREQ_BAND[0]
        names = [f"ch{c:02d}_pow_{lo + k}hz" for c in channels for k in range(self.n_bins)]
        names += [f"freq_eig_{i:02d}" for i in range(m)]
        iu = np.triu_indices(m, k=1)
        names += [f"corr_{channels[i]:02d}_{channels[j]:02d}" for i, j in zip(*iu)]
        names += [f"time_eig_{i:02d}" for i in range(m)]
        return names


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: FeatureLayout

    def block(self, name):
        return self.values[self.layout.slices[name]]


def feature_length(n_channels):
    return FeatureLayout(n_channels).length


def resample_to_400(samples, fs):
    """Resample a 1-s epoch (channels x samples) to 400 Hz.

    FFT-domain truncation or zero-padding: coefficients below the lower of
    the two Nyquist frequencies are kept, everything else is dropped.
    Returns the input unchanged when ``fs`` is already 400 Hz.
    """
    x = np.asarray(samples, dtype=np.float64)
    n_in = x.shape[-1]
    check_fs(fs, n_in)
    if n_in == TARGET_FS:
        return x
    spec = np.fft.rfft(x, axis=-1)
    keep = min((n_in + 1) // 2, TARGET_FS // 2)
    out = np.zeros(x.shape[:-1] + (TARGET_FS // 2 + 1,), dtype=complex)
    out[..., :keep] = spec[..., :keep]
    return np.fft.irfft(out, n=TARGET_FS, axis=-1) * (TARGET_FS / n_in)


def log_power_bins(x, fs, lo, hi):
    """log10 FFT magnitude in 1 Hz bins ``lo..hi`` inclusive.

    Works on a single channel or on the last axis of a stack of channels.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    check_fs(fs, n)
    if not (1 <= lo < hi) or hi >= fs / 2:
        raise DataError(f"band ({lo}, {hi}) Hz must satisfy 1 <= lo < hi < fs/2 = {fs / 2}")
    mag = np.abs(np.fft.rfft(x, axis=-1)[..., lo:hi + 1])
    return np.log10(np.maximum(mag, EPS))


def zscore_rows(m):
    """Z-score each row with population statistics; constant rows become zeros."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-1] < 2:
        raise DataError("z-scoring needs at least two columns")
    mu = m.mean(axis=-1, keepdims=True)
    centered = m - mu
    sd = np.sqrt(np.mean(centered**2, axis=-1, keepdims=True))
    scale = np.max(np.abs(m), axis=-1, keepdims=True)
    constant = sd <= 1e-12 * np.maximum(scale, 1e-300)
    return np.where(constant, 0.0, centered / np.where(constant, 1.0, sd))


def cross_matrix(z):
    """Channel cross matrix ``(1/K) Z Z^T`` of z-scored rows.

    Equals the Pearson correlation for non-constant rows. The diagonal is
    pinned to 1 (0 for constant rows) and the result is exactly symmetric.
    """
    z = np.asarray(z, dtype=np.float64)
    k = z.shape[-1]
    c = z @ z.T / k
    c = 0.5 * (c + c.T)
    live = np.any(z != 0.0, axis=-1)
    np.clip(c, -1.0, 1.0, out=c)
    c[np.diag_indices_from(c)] = live.astype(np.float64)
    c[~live, :] = 0.0
    c[:, ~live] = 0.0
    return c


def _epoch_features(samples, fs):
    m = samples.shape[0]
    power = log_power_bins(samples, fs, *FREQ_BAND)
    freq_eigs = sym_eigenvalues(cross_matrix(zscore_rows(power)))
    corr = cross_matrix(zscore_rows(resample_to_400(samples, fs)))
    time_corr = corr[np.triu_indices(m, k=1)]
    time_eigs = sym_eigenvalues(corr)
    return np.concatenate([power.ravel(), freq_eigs, time_corr, time_eigs])


def extract_features(samples, fs, channels=None):
    """Feature vector of one epoch restricted to ``channels`` (in that order)."""
    samples = check_epochs(samples)[0]
    check_fs(fs, samples.shape[1])
    if channels is not None:
        channels = check_channels(channels, samples.shape[0])
        samples = samples[channels]
    values = _epoch_features(samples, fs)
    return FeatureVector(values, FeatureLayout(samples.shape[0]))


def write_feature_csv(path, rows, names, labels=None):
    """Dump feature rows to CSV with one named column per block element."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != len(names):
        raise DataError(f"{rows.shape[1]} feature columns but {len(names)} names")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join((["label"] if labels is not None else []) + list(names)) + "\n")
        for i, row in enumerate(rows):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.insert(0, str(labels[i]))
            fh.write(",".join(cells) + "\n")


class EpochFeatures(TransformerMixin, BaseEstimator):
    """Turn stacked 1-s epochs into flat feature rows.

    Parameters
    ----------
    fs : float
        Sampling rate of the incoming epochs in Hz.
    channels : sequence of int, optional
        Channels to keep, in order. ``None`` keeps all of them.
    """

    def __init__(self, fs=400.0, channels=None):
        self.fs = fs
        self.channels = channels

    def fit(self, X, y=None):
        X = check_epochs(X)
        check_fs(self.fs, X.shape[2])
        self.n_channels_in_ = X.shape[1]
        self.channels_ = (
            list(range(X.shape[1])) if self.channels is None else check_channels(self.channels, X.shape[1])
        )
        self.layout_ = FeatureLayout(len(self.channels_))
        self.n_features_out_ = self.layout_.length
        return self

    def transform(self, X):
        if not hasattr(self, "channels_"):
            self.fit(X)
        X = check_epochs(X)
        check_fs(self.fs, X.shape[2])
        if X.shape[1] != self.n_channels_in_:
            raise DataError(f"fitted on {self.n_channels_in_} channels, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.n_features_out_))
        for i, epoch in enumerate(X):
            out[i] = _epoch_features(epoch[self.channels_], self.fs)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.layout_.names(self.channels_), dtype=object)
