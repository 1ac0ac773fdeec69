"""Brute-force reference implementations used by the tests."""

import numpy as np


def mann_whitney_auc(scores, positives):
    """Fraction of (positive, negative) pairs ranked correctly; ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    pos = scores[positives][:, None]
    neg = scores[~positives][None, :]
    wins = np.count_nonzero(pos > neg) + 0.5 * np.count_nonzero(pos == neg)
    return wins / (pos.size * neg.size)


def sen_spe_at(scores, positives, t):
    pred = np.asarray(scores) >= t
    positives = np.asarray(positives, dtype=bool)
    return pred[positives].mean(), (~pred[~positives]).mean()


def exhaustive_balance(scores, positives):
    """Every distinct (SEN, SPE) pair reachable by some threshold."""
    cuts = np.r_[np.unique(scores), np.inf]
    return [sen_spe_at(scores, positives, t) for t in cuts]
