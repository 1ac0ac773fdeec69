"""Metrics, the 2-fold cross-validation protocol and the timing benchmark."""

import hashlib
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .acs import ACS_TREES, default_providers, optimize_m, rank_channels, select_top
from .exceptions import DataError
from .features import EpochFeatures
from .forest import RandomForest, to_binary_labels

# ---------------------------------------------------------------- metrics


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("threshold,fpr,tpr\n")
            for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
                fh.write(f"{t!r},{f!r},{p!r}\n")


def _check_binary(scores, positives):
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape or scores.ndim != 1:
        raise DataError(f"scores {scores.shape} and labels {positives.shape} must be matching vectors")
    n_pos = int(positives.sum())
    if n_pos == 0 or n_pos == positives.size:
        raise DataError("need at least one positive and one negative example")
    return scores, positives


def roc_auc(scores, positives):
    """ROC curve and trapezoidal AUC; tied scores form a single step."""
    scores, positives = _check_binary(scores, positives)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = positives[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(p)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / tps[-1]]
    fpr = np.r_[0.0, fps / fps[-1]]
    thresholds = np.r_[np.inf, s[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1])) / 2.0)
    return RocCurve(fpr, tpr, thresholds, auc)


def combined_auc(proba, labels3, classes=("early_ictal", "ictal", "interictal")):
    """``(auc_s, auc_e, auc)`` from 3-class posteriors.

    The seizure score is P(early) + P(ictal) against all ictal epochs; the
    early score is P(early) against early epochs only. ``auc`` is the mean
    of the two.
    """
    proba = np.asarray(proba, dtype=np.float64)
    labels3 = np.asarray(labels3)
    classes = list(classes)
    for c in ("early_ictal", "ictal", "interictal"):
        if c not in classes:
            raise DataError(f"posteriors lack class {c!r}")
    early = proba[:, classes.index("early_ictal")]
    seizure = seizure_score(proba, classes)
    auc_s = roc_auc(seizure, labels3 != "interictal").auc
    auc_e = roc_auc(early, labels3 == "early_ictal").auc
    return auc_s, auc_e, (auc_s + auc_e) / 2


def seizure_score(proba, classes):
    """P(early_ictal) + P(ictal) from 3-class posteriors."""
    classes = list(classes)
    return proba[:, classes.index("early_ictal")] + proba[:, classes.index("ictal")]


def sen_spe(scores, positives, threshold):
    """Sensitivity and specificity with the rule ``score >= threshold`` -> seizure."""
    scores, positives = _check_binary(scores, positives)
    pred = scores >= threshold
    sen = np.count_nonzero(pred & positives) / np.count_nonzero(positives)
    spe = np.count_nonzero(~pred & ~positives) / np.count_nonzero(~positives)
    return float(sen), float(spe)


def _sweep(scores, positives):
    """Candidate thresholds with their true-positive and true-negative counts."""
    u = np.unique(scores)
    cand = np.r_[-np.inf, (u[:-1] + u[1:]) / 2, np.inf]
    pos = np.sort(scores[positives])
    neg = np.sort(scores[~positives])
    # count of scores >= t for each candidate
    tp = pos.size - np.searchsorted(pos, cand, side="left")
    tn = np.searchsorted(neg, cand, side="left")
    return cand, tp, tn


def select_threshold(scores, positives):
    """Threshold balancing sensitivity and specificity.

    Candidates are midpoints between consecutive unique scores plus
    -inf/+inf. Minimises ``|SEN - SPE|``; ties go to higher SEN, then the
    lower threshold.
    """
    scores, positives = _check_binary(scores, positives)
    cand, tp, tn = _sweep(scores, positives)
    n_pos, n_neg = np.count_nonzero(positives), np.count_nonzero(~positives)
    # |SEN - SPE| scaled by n_pos * n_neg, compared exactly in integers
    gap = np.abs(tp * n_neg - tn * n_pos)
    best = np.lexsort((cand, -tp, gap))[0]
    return float(cand[best])


def detection_delay(seizures, threshold):
    """Per-seizure onset detection delay in seconds.

    ``seizures`` is a sequence of ``(latencies, scores)`` pairs, one per
    seizure, each ordered by latency. Delay is the latency of the first
    epoch scoring ``>= threshold`` plus one second. Seizures never
    detected are counted in ``missed`` and get no delay.
    """
    delays, missed = [], 0
    for latencies, scores in seizures:
        latencies = np.asarray(latencies)
        scores = np.asarray(scores, dtype=np.float64)
        if latencies.size == 0:
            raise DataError("seizure without epochs")
        hit = np.flatnonzero(scores >= threshold)
        if hit.size == 0:
            missed += 1
        else:
            delays.append(int(latencies[hit[0]]) + 1)
    return delays, missed


# ------------------------------------------------------------ CV protocol


@dataclass
class PipelineConfig:
    """Stage parameters of the detection pipeline.

    ``n_channels`` is M: an int, ``"auto"`` (optimised per training set)
    or ``None`` (all channels).
    """

    n_channels: object = 16
    trees: int = 300
    acs_trees: int = ACS_TREES
    max_features: object = "sqrt"
    seed: int = 0
    n_jobs: int = 1
    full_m_grid: bool = False

    def to_dict(self):
        # n_jobs never changes results, so it stays out of persisted configs
        d = asdict(self)
        d.pop("n_jobs")
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def stage_seed(seed, *path):
    """Seed for one pipeline stage, derived from the master seed and a path."""
    # the path goes in spawn_key: entropy lists are zero-padded, so (s, 1) and (s, 1, 0) would collide
    key = tuple(int(p) for p in path)
    return int(np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1)[0])


# stage ids for stage_seed
_SPLIT, _ACS, _FOREST3, _FOREST2, _MSWEEP = 1, 2, 3, 4, 9


@dataclass
class FoldResult:
    train_seizures: list
    val_seizures: list
    channels: list
    auc_s: float
    auc_e: float
    auc: float
    sensitivity: float
    specificity: float
    threshold: float
    delays: dict
    missed: int
    mean_delay_s: float
    m_sweep: dict = None


@dataclass
class EvalReport:
    subject_id: str
    auc_s: float
    auc_e: float
    auc: float
    sensitivity: float
    specificity: float
    threshold: float
    per_seizure_delays_s: dict
    missed_seizures: int
    mean_delay_s: float
    folds: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    config_hash: str = ""
    seed: int = 0

    def to_dict(self):
        d = asdict(self)
        d["per_seizure_delays_s"] = {str(k): v for k, v in self.per_seizure_delays_s.items()}
        for f in d["folds"]:
            f["delays"] = {str(k): v for k, v in f["delays"].items()}
            if f["m_sweep"] is not None:
                f["m_sweep"] = {str(k): v for k, v in f["m_sweep"].items()}
        return d

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def fold_split(dataset, seed=0):
    """The two (train, validation) index splits of the protocol.

    Seizures are halved by sorted id (first ceil(S/2) seizures in split A);
    interictal epochs by a seeded shuffle. Fold 1 trains on A, fold 2 on B.
    """
    seizures = dataset.seizures()
    if len(seizures) < 2:
        raise DataError(f"2-fold CV needs at least 2 seizures, found {len(seizures)}")
    inter = np.asarray(dataset.interictal_indexes())
    if inter.size < 2:
        raise DataError("2-fold CV needs interictal epochs in both halves")
    sids = list(seizures)
    half = math.ceil(len(sids) / 2)
    rng = np.random.default_rng(stage_seed(seed, _SPLIT))
    inter = inter[rng.permutation(inter.size)]
    cut = math.ceil(inter.size / 2)
    a = [i for s in sids[:half] for i in seizures[s]] + sorted(inter[:cut].tolist())
    b = [i for s in sids[half:] for i in seizures[s]] + sorted(inter[cut:].tolist())
    return [(a, b), (b, a)]


def _features(dataset, channels):
    return EpochFeatures(fs=dataset.fs, channels=channels).fit_transform(dataset.X)


def _forest(config, seed_path, **kw):
    return RandomForest(
        n_estimators=config.trees,
        max_features=config.max_features,
        random_state=stage_seed(config.seed, *seed_path),
        n_jobs=config.n_jobs,
        **kw,
    )


def cv_auc(dataset, channels, config):
    """Mean combined AUC of the 3-class forest over the two folds, fixed channels."""
    feats = _features(dataset, channels)
    labels3 = dataset.labels3
    aucs = []
    for k, (train, val) in enumerate(fold_split(dataset, config.seed)):
        model = _forest(config, (_FOREST3, 100 + k, len(channels))).fit(feats[train], labels3[train])
        aucs.append(combined_auc(model.predict_proba(feats[val]), labels3[val], model.classes_.tolist())[2])
    return float(np.mean(aucs))


def rank_subject(dataset, seed=0, acs_trees=ACS_TREES, n_jobs=None):
    """Channel ranking over a whole (training) dataset, seeded from ``seed``."""
    return rank_channels(
        dataset.X,
        dataset.labels3,
        dataset.fs,
        providers=default_providers(acs_trees),
        random_state=stage_seed(seed, _ACS),
        n_jobs=n_jobs,
        subject_id=dataset.subject_id,
    )


def _rank(dataset, config, fold):
    providers = default_providers(config.acs_trees)
    return rank_channels(
        dataset.X,
        dataset.labels3,
        dataset.fs,
        providers=providers,
        random_state=stage_seed(config.seed, _ACS, fold),
        n_jobs=config.n_jobs,
        subject_id=dataset.subject_id,
    )


def run_fold(dataset, train, val, config, fold):
    train_ds, val_ds = dataset.subset(train), dataset.subset(val)
    ranking = _rank(train_ds, config, fold)
    sweep = None
    if config.n_channels == "auto":
        inner = PipelineConfig(**config.to_dict())
        inner.n_channels, inner.n_jobs = None, config.n_jobs
        inner.seed = stage_seed(config.seed, _MSWEEP, fold)
        m, sweep = optimize_m(train_ds, ranking, inner)
    elif config.n_channels is None:
        m = ranking.n_channels
    else:
        m = int(config.n_channels)
    channels = select_top(ranking, m)

    f_train, f_val = _features(train_ds, channels), _features(val_ds, channels)
    y3_train, y3_val = train_ds.labels3, val_ds.labels3
    model3 = _forest(config, (_FOREST3, fold)).fit(f_train, y3_train)
    auc_s, auc_e, auc = combined_auc(model3.predict_proba(f_val), y3_val, model3.classes_.tolist())

    y2_train = to_binary_labels(y3_train)
    model2 = _forest(config, (_FOREST2, fold), oob_score=True).fit(f_train, y2_train)
    pos_col = model2.classes_.tolist().index(1)
    train_scores = model2.oob_decision_function_[:, pos_col]
    unseen = np.isnan(train_scores)
    if np.any(unseen):
        train_scores[unseen] = model2.predict_proba(f_train[unseen])[:, pos_col]
    threshold = select_threshold(train_scores, y2_train == 1)
    val_scores = model2.predict_proba(f_val)[:, pos_col]
    sen, spe = sen_spe(val_scores, to_binary_labels(y3_val) == 1, threshold)

    seizures = val_ds.seizures()
    lat = val_ds.latencies
    delays, missed = {}, 0
    for sid, idx in seizures.items():
        d, miss = detection_delay([(lat[idx], val_scores[idx])], threshold)
        if d:
            delays[sid] = d[0]
        missed += miss
    result = FoldResult(
        train_seizures=list(train_ds.seizures()),
        val_seizures=list(seizures),
        channels=channels,
        auc_s=auc_s,
        auc_e=auc_e,
        auc=auc,
        sensitivity=sen,
        specificity=spe,
        threshold=threshold,
        delays=delays,
        missed=missed,
        mean_delay_s=float(np.mean(list(delays.values()))) if delays else float("nan"),
        m_sweep=sweep,
    )
    details = {
        "ranking": ranking,
        "model3": model3,
        "model2": model2,
        "roc_s": roc_auc(seizure_score(model3.predict_proba(f_val), model3.classes_), y3_val != "interictal"),
    }
    return result, details


def report_from_folds(subject_id, folds, config):
    """Average fold metrics; the combined AUC is recomputed from the averaged parts."""

    def mean(name):
        vals = [getattr(f, name) for f in folds]
        vals = [v for v in vals if not math.isnan(v)]
        return float(sum(vals) / len(vals)) if vals else float("nan")

    auc_s, auc_e = mean("auc_s"), mean("auc_e")
    delays = {}
    for f in folds:
        delays.update(f.delays)
    return EvalReport(
        subject_id=subject_id,
        auc_s=auc_s,
        auc_e=auc_e,
        auc=(auc_s + auc_e) / 2,
        sensitivity=mean("sensitivity"),
        specificity=mean("specificity"),
        threshold=mean("threshold"),
        per_seizure_delays_s=delays,
        missed_seizures=sum(f.missed for f in folds),
        mean_delay_s=mean("mean_delay_s"),
        folds=list(folds),
        config=config.to_dict(),
        config_hash=config.digest(),
        seed=config.seed,
    )


def two_fold_cv(dataset, config=None, return_details=False):
    """Run the 2-fold protocol and return the averaged :class:`EvalReport`.

    With ``return_details`` also returns, per fold, the ranking, both
    fitted forests and the validation ROC curve of the seizure score.
    """
    config = PipelineConfig() if config is None else config
    folds, details = [], []
    for k, (train, val) in enumerate(fold_split(dataset, config.seed)):
        result, extra = run_fold(dataset, train, val, config, k)
        folds.append(result)
        details.append(extra)
    report = report_from_folds(dataset.subject_id, folds, config)
    return (report, details) if return_details else report


# -------------------------------------------------------------- benchmark


@dataclass
class TimingReport:
    acs_time_s: float
    feature_time_s: float
    training_time_s: float
    baseline_feature_time_s: float
    baseline_training_time_s: float
    n_channels: int = 0
    n_selected: int = 0
    threads: int = 1
    repeats: int = 3
    trees: int = 0

    @property
    def improvement(self):
        return improvement(
            self.baseline_feature_time_s, self.baseline_training_time_s, self.feature_time_s, self.training_time_s
        )

    def to_dict(self):
        d = asdict(self)
        d["improvement"] = self.improvement
        return d

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def improvement(baseline_feature_s, baseline_training_s, feature_s, training_s):
    """Fractional processing-time saving; one-time channel selection excluded."""
    return 1.0 - (feature_s + training_s) / (baseline_feature_s + baseline_training_s)


def _interleaved_medians(fns, repeats):
    """Median wall time of each callable over ``repeats`` rounds.

    Every callable runs once as a discarded warm-up; the timed rounds then
    alternate between them so slow drift of the host hits all of them alike.
    """
    for fn in fns:
        fn()
    runs = [[] for _ in fns]
    for _ in range(repeats):
        for fn, out in zip(fns, runs):
            t0 = time.perf_counter()
            fn()
            out.append(time.perf_counter() - t0)
    return [statistics.median(r) for r in runs]


def _arm(X, labels3, fs, channels, trees, seed):
    """Feature-extraction and training jobs for one channel subset."""
    extractor = EpochFeatures(fs=fs, channels=channels)
    feats = {}

    def extract():
        feats["F"] = extractor.fit_transform(X)

    def train():
        RandomForest(n_estimators=trees, random_state=seed, n_jobs=1).fit(feats["F"], labels3)

    return extract, train


def benchmark(dataset, n_selected, seed=0, trees=100, repeats=3, ranking=None, acs_trees=ACS_TREES):
    """Time feature extraction + 3-class training on all channels vs the top M.

    Runs single-threaded for both arms. ACS is timed once and reported
    separately; pass a precomputed ``ranking`` to skip it (``acs_time_s``
    is then 0).
    """
    X, labels3, fs = dataset.X, dataset.labels3, dataset.fs
    n_ch = X.shape[1]
    if not 1 <= n_selected <= n_ch:
        raise DataError(f"M={n_selected} outside [1, {n_ch}]")
    with threadpool_limits(limits=1):
        acs_time = 0.0
        if ranking is None:
            t0 = time.perf_counter()
            ranking = rank_subject(dataset, seed, acs_trees=acs_trees, n_jobs=1)
            acs_time = time.perf_counter() - t0
        channels = select_top(ranking, n_selected)
        forest_seed = stage_seed(seed, _FOREST3)

        extract_base, train_base = _arm(X, labels3, fs, list(range(n_ch)), trees, forest_seed)
        extract_sel, train_sel = _arm(X, labels3, fs, channels, trees, forest_seed)
        # training reads the features of the extraction just before it
        base_feat, feat, base_train, train = _interleaved_medians(
            [extract_base, extract_sel, train_base, train_sel], repeats
        )
    return TimingReport(
        acs_time_s=acs_time,
        feature_time_s=feat,
        training_time_s=train,
        baseline_feature_time_s=base_feat,
        baseline_training_time_s=base_train,
        n_channels=n_ch,
        n_selected=len(channels),
        threads=1,
        repeats=repeats,
        trees=trees,
    )
