"""Labeled 1-s iEEG epochs: file formats, manifests and a synthetic generator.

Binary epoch files (``.ieeg``) are little-endian::

    b"IEEG1" | u32 n_channels | u32 n_samples | f64 fs | f32[n_channels * n_samples]

with samples stored row-major (channel by channel). CSV epochs hold one
channel per row and take their sampling rate from the manifest.

A manifest is one JSON document per subject::

    {"subject_id": "...", "fs": 400, "n_channels": 16,
     "segments": [{"file": "...", "label": "ictal", "latency_s": 0, "seizure_id": 1}, ...]}

Segment paths are resolved relative to the manifest's directory.
"""

import json
import os
import struct
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataError

MAGIC = b"IEEG1"
_HEADER = struct.Struct("<5sIId")

LABELS = ("interictal", "ictal", "unlabeled")
CLASSES3 = ("early_ictal", "ictal", "interictal")
EARLY_LATENCY_S = 15


@dataclass(frozen=True)
class Epoch:
    samples: np.ndarray
    fs: float
    label: str
    latency_s: int = None
    seizure_id: object = None

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def class3(self):
        return class_label3(self.label, self.latency_s)


def class_label3(label, latency_s):
    """Three-way class: ictal epochs with latency below 15 s are early."""
    if label == "interictal":
        return "interictal"
    if label == "ictal":
        return "early_ictal" if latency_s < EARLY_LATENCY_S else "ictal"
    raise DataError(f"epoch label {label!r} has no training class")


def _validate_epoch(samples, fs, label, latency_s, seizure_id, path=None):
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise DataError(f"epoch must be a non-empty channels x samples matrix, got {samples.shape}", path)
    if samples.shape[1] != int(round(fs)):
        raise DataError(f"epoch has {samples.shape[1]} samples, 1 s at {fs} Hz needs {int(round(fs))}", path)
    if not np.all(np.isfinite(samples)):
        raise DataError("non-finite sample value", path)
    if label not in LABELS:
        raise DataError(f"unknown label {label!r}", path)
    if label == "ictal":
        if latency_s is None or seizure_id is None:
            raise DataError("ictal segment needs latency_s and seizure_id", path)
        if int(latency_s) != latency_s or latency_s < 0:
            raise DataError(f"latency_s must be a non-negative integer, got {latency_s}", path)
    elif latency_s is not None or seizure_id is not None:
        raise DataError(f"{label} segment must not carry latency_s / seizure_id", path)


def write_epoch(path, samples, fs):
    samples = np.ascontiguousarray(samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, samples.shape[0], samples.shape[1], float(fs)))
        fh.write(samples.tobytes())


def read_epoch(path):
    """Read a binary epoch file; returns ``(samples float32, fs)``."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read epoch file ({exc.strerror})", path) from None
    if len(raw) < _HEADER.size:
        raise DataError("truncated header", path)
    magic, n_ch, n_s, fs = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r}", path)
    body = raw[_HEADER.size:]
    if len(body) != 4 * n_ch * n_s:
        raise DataError(f"payload holds {len(body)} bytes, header promises {4 * n_ch * n_s}", path)
    samples = np.frombuffer(body, dtype="<f4").reshape(n_ch, n_s).astype(np.float32)
    return samples, fs


def write_epoch_csv(path, samples):
    np.savetxt(path, np.asarray(samples, dtype=np.float64), delimiter=",", fmt="%.9g")


def read_epoch_csv(path):
    path = Path(path)
    try:
        samples = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise DataError(f"cannot read epoch file ({exc})", path) from None
    except ValueError as exc:
        raise DataError(f"malformed CSV ({exc})", path) from None
    return samples


@dataclass
class Segment:
    file: str
    label: str
    latency_s: int = None
    seizure_id: object = None


@dataclass
class DatasetManifest:
    subject_id: str
    fs: float
    n_channels: int
    segments: list = field(default_factory=list)

    def to_dict(self):
        return {
            "subject_id": self.subject_id,
            "fs": self.fs,
            "n_channels": self.n_channels,
            "segments": [asdict(s) for s in self.segments],
        }

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def _seizure_key(sid):
    return (0, sid, "") if isinstance(sid, (int, np.integer)) else (1, 0, str(sid))


@dataclass
class Dataset:
    manifest: DatasetManifest
    epochs: list

    @property
    def subject_id(self):
        return self.manifest.subject_id

    @property
    def fs(self):
        return self.manifest.fs

    @property
    def n_channels(self):
        return self.manifest.n_channels

    def __len__(self):
        return len(self.epochs)

    @property
    def X(self):
        """Epochs stacked as ``(n_epochs, n_channels, n_samples)`` float32."""
        return np.stack([e.samples for e in self.epochs]).astype(np.float32, copy=False)

    @property
    def labels(self):
        return np.array([e.label for e in self.epochs])

    @property
    def labels3(self):
        return np.array([e.class3 for e in self.epochs])

    @property
    def latencies(self):
        return np.array([-1 if e.latency_s is None else e.latency_s for e in self.epochs])

    @property
    def seizure_ids(self):
        return [e.seizure_id for e in self.epochs]

    def seizures(self):
        """Seizure ids in sorted order, mapped to their epoch indexes by latency."""
        groups = defaultdict(list)
        for i, e in enumerate(self.epochs):
            if e.label == "ictal":
                groups[e.seizure_id].append(i)
        return {
            sid: sorted(groups[sid], key=lambda i: self.epochs[i].latency_s)
            for sid in sorted(groups, key=_seizure_key)
        }

    def interictal_indexes(self):
        return [i for i, e in enumerate(self.epochs) if e.label == "interictal"]

    def subset(self, indexes):
        return Dataset(self.manifest, [self.epochs[i] for i in indexes])


def _parse_manifest(doc, path):
    try:
        segments = [
            Segment(
                file=s["file"],
                label=s["label"],
                latency_s=s.get("latency_s"),
                seizure_id=s.get("seizure_id"),
            )
            for s in doc["segments"]
        ]
        return DatasetManifest(
            subject_id=str(doc["subject_id"]),
            fs=float(doc["fs"]),
            n_channels=int(doc["n_channels"]),
            segments=segments,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed manifest ({exc!r})", path) from None


def load_dataset(manifest_path):
    """Load and validate every epoch a manifest references."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open manifest ({exc.strerror})", manifest_path) from None
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", manifest_path) from None
    manifest = _parse_manifest(doc, manifest_path)
    root = manifest_path.parent
    epochs = []
    for seg in manifest.segments:
        path = root / seg.file
        if path.suffix.lower() == ".csv":
            samples, fs = read_epoch_csv(path), manifest.fs
        else:
            samples, fs = read_epoch(path)
            if fs != manifest.fs:
                raise DataError(f"file fs {fs} Hz disagrees with manifest fs {manifest.fs} Hz", path)
        if samples.shape[0] != manifest.n_channels:
            raise DataError(
                f"channel-count mismatch: file has {samples.shape[0]} channels, manifest says {manifest.n_channels}",
                path,
            )
        _validate_epoch(samples, fs, seg.label, seg.latency_s, seg.seizure_id, path)
        latency = None if seg.latency_s is None else int(seg.latency_s)
        epochs.append(Epoch(samples, fs, seg.label, latency, seg.seizure_id))
    _check_latency_runs(manifest, root)
    present = {seg.label for seg in manifest.segments}
    if "unlabeled" not in present and present != {"ictal", "interictal"}:
        raise DataError(
            f"a labeled dataset needs ictal and interictal segments, found only {sorted(present)}", manifest_path
        )
    return Dataset(manifest, epochs)


def _check_latency_runs(manifest, root):
    runs = defaultdict(list)
    for seg in manifest.segments:
        if seg.label == "ictal":
            runs[seg.seizure_id].append((int(seg.latency_s), seg.file))
    for sid, items in runs.items():
        items.sort()
        latencies = [lat for lat, _ in items]
        if latencies != list(range(len(latencies))):
            first_bad = next(f for k, (lat, f) in enumerate(items) if lat != k)
            raise DataError(
                f"seizure {sid!r} latencies {latencies} are not a contiguous run 0,1,2,...",
                root / first_bad,
            )


@dataclass
class SynthConfig:
    """Parameters of the synthetic subject generator.

    Ictal epochs carry a band-limited oscillation on ``planted_channels``
    and a broadband component shared by all channels. The shared
    component is weighted by ``shared_component_gain`` (times
    ``early_shared_fraction`` in the first 15 s of a seizure) and mixed so
    that each channel's total variance is unchanged.
    """

    n_channels: int = 16
    fs: float = 400.0
    n_seizures: int = 4
    seizure_len_s: int = 30
    interictal_len_s: int = 240
    planted_channels: list = field(default_factory=lambda: [2, 5])
    seizure_band_hz: tuple = (4, 8)
    seizure_amplitude: float = 3.0
    shared_component_gain: float = 1.5
    early_shared_fraction: float = 0.25
    noise_gain: float = 1.0
    noise_knee_hz: float = 10.0
    rng_seed: int = 0
    subject_id: str = "synth"

    def validate(self):
        def fail(name, reason):
            raise ConfigError(name, reason)

        if int(self.n_channels) < 1:
            fail("n_channels", "must be >= 1")
        if self.fs <= 0:
            fail("fs", "must be positive")
        if int(self.n_seizures) < 0:
            fail("n_seizures", "must be >= 0")
        if int(self.seizure_len_s) < 1 and self.n_seizures:
            fail("seizure_len_s", "must be >= 1")
        if int(self.interictal_len_s) < 0:
            fail("interictal_len_s", "must be >= 0")
        bad = [c for c in self.planted_channels if not 0 <= int(c) < int(self.n_channels)]
        if bad:
            fail("planted_channels", f"indexes {bad} outside [0, {self.n_channels})")
        if len(self.seizure_band_hz) != 2:
            fail("seizure_band_hz", "must be a (lo, hi) pair")
        lo, hi = self.seizure_band_hz
        if not 1 <= lo < hi <= 47:
            fail("seizure_band_hz", f"need 1 <= lo < hi <= 47, got ({lo}, {hi})")
        if hi >= self.fs / 2:
            fail("seizure_band_hz", f"upper edge {hi} Hz not below Nyquist {self.fs / 2} Hz")
        for name in ("shared_component_gain", "noise_gain", "seizure_amplitude"):
            if getattr(self, name) < 0:
                fail(name, "must be >= 0")
        if not 0 <= self.early_shared_fraction <= 1:
            fail("early_shared_fraction", "must lie in [0, 1]")
        return self

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        kw = dict(d)
        if "seizure_band_hz" in kw:
            kw["seizure_band_hz"] = tuple(kw["seizure_band_hz"])
        if "planted_channels" in kw:
            kw["planted_channels"] = sorted(set(int(c) for c in kw["planted_channels"]))
        return cls(**kw).validate()

    def to_dict(self):
        d = asdict(self)
        d["seizure_band_hz"] = list(self.seizure_band_hz)
        return d


def _colored_noise(rng, n_channels, n, fs, knee_hz):
    # white noise shaped to 1/f power above the knee, flat below it; no DC
    spec = rng.standard_normal((n_channels, n // 2 + 1)) + 1j * rng.standard_normal((n_channels, n // 2 + 1))
    f = np.fft.rfftfreq(n, d=1.0 / fs)
    shape = 1.0 / np.sqrt(1.0 + f / knee_hz)
    shape[0] = 0.0
    x = np.fft.irfft(spec * shape, n=n, axis=-1)
    return x / x.std(axis=-1, keepdims=True)


def _oscillation(rng, n_channels, n, fs, band):
    lo, hi = band
    t = np.arange(n) / fs
    freqs = rng.uniform(lo, hi, size=(n_channels, 3))
    phases = rng.uniform(0, 2 * np.pi, size=(n_channels, 3))
    x = np.sin(2 * np.pi * freqs[..., None] * t + phases[..., None]).sum(axis=1)
    return x / np.sqrt(1.5)  # unit variance for three unit sinusoids


def synthesize(config):
    """Generate a synthetic subject in memory; returns ``(manifest, epochs)``.

    Ictal seizures come first (ids 1..n_seizures, latency 0..len-1), then
    interictal epochs. File names in the manifest are those
    :func:`generate_synthetic` writes.
    """
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    fs = float(config.fs)
    n = int(round(fs))
    n_ch = int(config.n_channels)
    planted = np.asarray(sorted(config.planted_channels), dtype=int)
    manifest = DatasetManifest(config.subject_id, fs, n_ch)
    epochs = []

    def background():
        return config.noise_gain * _colored_noise(rng, n_ch, n, fs, config.noise_knee_hz)

    for sid in range(1, int(config.n_seizures) + 1):
        for lat in range(int(config.seizure_len_s)):
            x = background()
            g = config.shared_component_gain
            if lat < EARLY_LATENCY_S:
                g *= config.early_shared_fraction
            shared = config.noise_gain * _colored_noise(rng, 1, n, fs, config.noise_knee_hz)
            x = (x + g * shared) / np.sqrt(1.0 + g * g)
            if planted.size:
                osc = _oscillation(rng, planted.size, n, fs, config.seizure_band_hz)
                x[planted] += config.seizure_amplitude * config.noise_gain * osc
            name = f"{config.subject_id}_ictal_s{sid:03d}_{lat:04d}.ieeg"
            manifest.segments.append(Segment(name, "ictal", lat, sid))
            epochs.append(Epoch(x.astype(np.float32), fs, "ictal", lat, sid))
    for i in range(int(config.interictal_len_s)):
        name = f"{config.subject_id}_interictal_{i:05d}.ieeg"
        manifest.segments.append(Segment(name, "interictal"))
        epochs.append(Epoch(background().astype(np.float32), fs, "interictal"))
    return manifest, epochs


def generate_synthetic(config, out_dir):
    """Write a synthetic subject to ``out_dir``; returns ``(manifest_path, Dataset)``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise PermissionError(f"{out_dir} is not writable")
        manifest, epochs = synthesize(config)
        for seg, epoch in zip(manifest.segments, epochs):
            write_epoch(out_dir / seg.file, epoch.samples, epoch.fs)
        manifest_path = out_dir / f"{config.subject_id}.manifest.json"
        manifest.write(manifest_path)
    except OSError as exc:
        raise DataError(f"cannot write synthetic dataset ({exc})", out_dir) from None
    return manifest_path, Dataset(manifest, epochs)
