"""Automatic channel selection.

Every epoch is reduced to an ``N x 30`` matrix of log10 FFT magnitudes in
1 Hz bins (1-30 Hz) on the raw signal. Each of the ``N * 30`` bins is a
scalar feature for one or more tree-ensemble providers trained to tell
seizure from non-seizure epochs; a channel's importance is the sum of its
30 bin importances, summed again over providers. Channel correlations are
deliberately left out at this stage.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone

from ._validation import check_epochs, check_fs
from .exceptions import DataError
from .features import log_power_bins
from .forest import RandomForest, to_binary_labels

ACS_BAND = (1, 30)
ACS_TREES = 300


def acs_matrix(samples, fs, band=ACS_BAND):
    """``N x 30`` log-power matrix of one epoch (or ``n x N x 30`` for a stack)."""
    return log_power_bins(np.asarray(samples, dtype=np.float64), fs, *band)


def binary_targets(y):
    """Seizure (1) / non-seizure (0) targets from 3-class, raw or 0/1 labels."""
    y = np.asarray(y)
    if y.dtype.kind in ("U", "S", "O"):
        return to_binary_labels(y.astype(str))
    y = y.astype(int)
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise DataError("numeric labels must be 0 (non-seizure) or 1 (seizure)")
    return y


@dataclass
class ChannelRanking:
    importance: np.ndarray
    order: np.ndarray
    providers: list = field(default_factory=list)
    subject_id: str = None
    seed: int = None

    @classmethod
    def from_importance(cls, importance, **kw):
        importance = np.asarray(importance, dtype=np.float64)
        idx = np.arange(importance.size)
        order = np.lexsort((idx, -importance))
        return cls(importance, order, **kw)

    @property
    def n_channels(self):
        return self.importance.size

    def to_dict(self):
        return {
            "subject_id": self.subject_id,
            "importance": self.importance.tolist(),
            "order": [int(i) for i in self.order],
            "providers": self.providers,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            importance=np.asarray(d["importance"], dtype=np.float64),
            order=np.asarray(d["order"], dtype=np.intp),
            providers=list(d.get("providers", [])),
            subject_id=d.get("subject_id"),
            seed=d.get("seed"),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_providers(n_estimators=ACS_TREES):
    return [RandomForest(n_estimators=n_estimators)]


def _describe(provider):
    params = {k: v for k, v in provider.get_params().items() if k not in ("random_state", "n_jobs")}
    return {"name": type(provider).__name__, "params": params}


def rank_channels(X, y, fs, providers=None, random_state=0, band=ACS_BAND, n_jobs=None, subject_id=None):
    """Rank channels of the training epochs ``X`` by summed bin importance.

    Only pass training data here: the ranking must never see validation
    or test epochs.

    Parameters
    ----------
    X : array, shape (n_epochs, n_channels, n_samples)
        Raw epochs at their native sampling rate.
    y : array, shape (n_epochs,)
        3-class, raw (ictal/interictal) or 0/1 labels; reduced to seizure
        vs non-seizure.
    providers : list of estimators, optional
        Unfitted classifiers exposing ``feature_importances_``. Defaults to
        one 300-tree :class:`RandomForest`. Provider ``i`` is seeded with
        ``random_state + i``.
    """
    X = check_epochs(X)
    check_fs(fs, X.shape[2])
    target = binary_targets(y)
    if np.unique(target).size < 2:
        raise DataError("channel ranking needs both seizure and non-seizure epochs")
    n, n_ch = X.shape[:2]
    n_bins = band[1] - band[0] + 1
    feats = acs_matrix(X, fs, band).reshape(n, n_ch * n_bins)
    providers = default_providers() if providers is None else providers
    if not providers:
        raise ValueError("at least one importance provider is required")
    importance = np.zeros(n_ch)
    used = []
    for i, proto in enumerate(providers):
        est = clone(proto)
        params = {}
        if "random_state" in est.get_params():
            params["random_state"] = int(random_state) + i
        if n_jobs is not None and "n_jobs" in est.get_params():
            params["n_jobs"] = n_jobs
        est.set_params(**params)
        est.fit(feats, target)
        importance += np.asarray(est.feature_importances_).reshape(n_ch, n_bins).sum(axis=1)
        used.append(_describe(est))
    return ChannelRanking.from_importance(importance, providers=used, subject_id=subject_id, seed=int(random_state))


def select_top(ranking, n_channels):
    """First ``n_channels`` entries of the ranking order."""
    m = int(n_channels)
    if not 1 <= m <= ranking.n_channels:
        raise DataError(f"M={m} outside [1, {ranking.n_channels}]")
    return [int(c) for c in ranking.order[:m]]


def save_channels(path, channels, subject_id=None, sweep=None, requested=None):
    """Store the selected channel indexes; ``requested`` records "auto" runs."""
    doc = {"subject_id": subject_id, "M": len(channels), "channels": [int(c) for c in channels]}
    if requested is not None:
        doc["requested"] = requested
    if sweep is not None:
        doc["sweep"] = [{"M": int(m), "auc": float(a)} for m, a in sorted(sweep.items())]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_channels(path):
    with open(path, encoding="utf-8") as fh:
        return [int(c) for c in json.load(fh)["channels"]]


def m_grid(n_channels, full=False):
    """Candidate channel counts: 1, 2, 4, 8, 12, 16, 24, 32, 40, ... N.

    ``full=True`` gives every integer 1..N.
    """
    n = int(n_channels)
    if full:
        return list(range(1, n + 1))
    grid = {1, 2, 4, 8, 12, 16, *range(24, n, 8), n}
    return sorted(m for m in grid if m <= n)


def smallest_within_tolerance(auc_by_m, tol=0.01):
    """Smallest M whose AUC is at most ``tol`` (absolute) below the best one."""
    if not auc_by_m:
        raise ValueError("empty AUC sweep")
    best = max(auc_by_m.values())
    return min(m for m, auc in auc_by_m.items() if auc >= best - tol - 1e-12)


def optimize_m(dataset, ranking, config, grid=None, tol=0.01):
    """Pick M by 2-fold CV combined AUC over the top-M channels of ``ranking``.

    ``dataset`` must be the training data only. Returns ``(M, {M: auc})``.
    """
    from .evaluation import cv_auc

    grid = m_grid(ranking.n_channels, full=getattr(config, "full_m_grid", False)) if grid is None else grid
    sweep = {m: cv_auc(dataset, select_top(ranking, m), config) for m in grid}
    return smallest_within_tolerance(sweep, tol), sweep


class ChannelSelector(TransformerMixin, BaseEstimator):
    """Keep the ``n_channels`` most seizure-relevant channels of each epoch.

    ``fit`` ranks channels on labeled epochs; ``transform`` slices
    ``(n_epochs, N, T)`` down to ``(n_epochs, M, T)`` in ranking order.

    Parameters
    ----------
    fs : float
        Sampling rate of the epochs in Hz.
    n_channels : int or None
        M. ``None`` keeps every channel, reordered by importance.
    providers : list of estimators, optional
    random_state : int
    """

    def __init__(self, fs=400.0, n_channels=16, providers=None, random_state=0, n_jobs=None):
        self.fs = fs
        self.n_channels = n_channels
        self.providers = providers
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        self.ranking_ = rank_channels(
            X, y, self.fs, providers=self.providers, random_state=self.random_state, n_jobs=self.n_jobs
        )
        m = self.ranking_.n_channels if self.n_channels is None else self.n_channels
        self.channels_ = select_top(self.ranking_, m)
        self.n_channels_in_ = self.ranking_.n_channels
        return self

    def transform(self, X):
        if not hasattr(self, "channels_"):
            raise RuntimeError("ChannelSelector is not fitted yet")
        X = check_epochs(X)
        if X.shape[1] != self.n_channels_in_:
            raise DataError(f"fitted on {self.n_channels_in_} channels, got {X.shape[1]}")
        return X[:, self.channels_, :]
