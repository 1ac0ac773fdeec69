"""Input checks shared by the estimators."""

import numpy as np

from .exceptions import DataError


def check_epochs(X):
    """Validate a stack of epochs shaped ``(n_epochs, n_channels, n_samples)``.

    A single 2-D epoch is promoted to a stack of one. float32 input is kept
    as is to spare memory on long recordings.
    """
    X = np.asarray(X)
    if X.dtype not in (np.float32, np.float64):
        X = X.astype(np.float64)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3:
        raise DataError(f"expected epochs of shape (n_epochs, n_channels, n_samples), got {X.shape}")
    if X.shape[1] < 1 or X.shape[2] < 2:
        raise DataError(f"degenerate epoch shape {X.shape[1:]}")
    if not np.all(np.isfinite(X)):
        raise DataError("epochs contain non-finite samples")
    return X


def check_fs(fs, n_samples):
    """Epochs are exactly one second long, so the sample count must equal round(fs)."""
    if fs is None or fs <= 0:
        raise DataError(f"sampling rate must be positive, got {fs}")
    if int(round(fs)) != n_samples:
        raise DataError(f"1-s epoch at fs={fs} Hz needs {int(round(fs))} samples, got {n_samples}")


def check_features(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis]
    if X.ndim != 2:
        raise DataError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    return X


def check_channels(channels, n_channels):
    channels = [int(c) for c in channels]
    if not channels:
        raise DataError("channel selection is empty")
    if len(set(channels)) != len(channels):
        raise DataError(f"channel selection has duplicates: {channels}")
    bad = [c for c in channels if c < 0 or c >= n_channels]
    if bad:
        raise DataError(f"channel indexes {bad} out of range for {n_channels} channels")
    return channels
