import json

import numpy as np
import pytest

from seizure_acs.dataset import (
    SynthConfig,
    class_label3,
    generate_synthetic,
    load_dataset,
    read_epoch,
    read_epoch_csv,
    synthesize,
    write_epoch,
    write_epoch_csv,
)
from seizure_acs.exceptions import ConfigError, DataError
from seizure_acs.features import cross_matrix, log_power_bins, zscore_rows


def _write_manifest(tmp_path, segments, n_channels=4, fs=100.0):
    doc = {"subject_id": "t", "fs": fs, "n_channels": n_channels, "segments": segments}
    path = tmp_path / "t.manifest.json"
    path.write_text(json.dumps(doc))
    return path


def _epoch(rng, n_channels=4, fs=100):
    return rng.standard_normal((n_channels, fs)).astype(np.float32)


def test_manifest_with_three_files_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    data = [_epoch(rng) for _ in range(3)]
    for i, x in enumerate(data):
        write_epoch(tmp_path / f"e{i}.ieeg", x, 100.0)
    path = _write_manifest(
        tmp_path,
        [
            {"file": "e0.ieeg", "label": "ictal", "latency_s": 0, "seizure_id": 1},
            {"file": "e1.ieeg", "label": "ictal", "latency_s": 1, "seizure_id": 1},
            {"file": "e2.ieeg", "label": "interictal"},
        ],
    )
    ds = load_dataset(path)
    assert len(ds) == 3
    for epoch, x in zip(ds.epochs, data):
        assert np.array_equal(epoch.samples, x)
    assert list(ds.labels3) == ["early_ictal", "early_ictal", "interictal"]
    assert ds.seizures() == {1: [0, 1]}


def test_channel_count_mismatch_names_file(tmp_path):
    rng = np.random.default_rng(1)
    write_epoch(tmp_path / "bad.ieeg", _epoch(rng, n_channels=15), 100.0)
    path = _write_manifest(tmp_path, [{"file": "bad.ieeg", "label": "interictal"}], n_channels=16)
    with pytest.raises(DataError, match="channel-count mismatch") as err:
        load_dataset(path)
    assert err.value.path.endswith("bad.ieeg")


def test_non_contiguous_latencies_rejected(tmp_path):
    rng = np.random.default_rng(2)
    segs = []
    for lat in (0, 1, 3):
        write_epoch(tmp_path / f"s{lat}.ieeg", _epoch(rng), 100.0)
        segs.append({"file": f"s{lat}.ieeg", "label": "ictal", "latency_s": lat, "seizure_id": "a"})
    with pytest.raises(DataError, match="contiguous"):
        load_dataset(_write_manifest(tmp_path, segs))


def test_missing_file_and_non_finite(tmp_path):
    path = _write_manifest(tmp_path, [{"file": "nope.ieeg", "label": "interictal"}])
    with pytest.raises(DataError, match="cannot read") as err:
        load_dataset(path)
    assert "nope.ieeg" in str(err.value)

    x = _epoch(np.random.default_rng(3))
    x[2, 7] = np.nan
    write_epoch(tmp_path / "nan.ieeg", x, 100.0)
    with pytest.raises(DataError, match="non-finite"):
        load_dataset(_write_manifest(tmp_path, [{"file": "nan.ieeg", "label": "interictal"}]))


def test_wrong_epoch_length_and_bad_magic(tmp_path):
    rng = np.random.default_rng(4)
    write_epoch(tmp_path / "short.ieeg", rng.standard_normal((4, 90)), 100.0)
    with pytest.raises(DataError, match="samples"):
        load_dataset(_write_manifest(tmp_path, [{"file": "short.ieeg", "label": "interictal"}]))
    (tmp_path / "junk.ieeg").write_bytes(b"NOPE!" + b"\0" * 40)
    with pytest.raises(DataError, match="magic"):
        read_epoch(tmp_path / "junk.ieeg")


def test_ictal_segment_needs_seizure_id(tmp_path):
    write_epoch(tmp_path / "e.ieeg", _epoch(np.random.default_rng(5)), 100.0)
    path = _write_manifest(tmp_path, [{"file": "e.ieeg", "label": "ictal", "latency_s": 0}])
    with pytest.raises(DataError, match="seizure_id"):
        load_dataset(path)


def test_binary_round_trip_is_bit_exact(tmp_path):
    x = np.random.default_rng(6).standard_normal((5, 400)).astype(np.float32) * 1e3
    write_epoch(tmp_path / "x.ieeg", x, 400.0)
    y, fs = read_epoch(tmp_path / "x.ieeg")
    assert fs == 400.0
    assert y.tobytes() == x.tobytes()
    raw = (tmp_path / "x.ieeg").read_bytes()
    assert raw[:5] == b"IEEG1"
    assert int.from_bytes(raw[5:9], "little") == 5


def test_csv_round_trip_and_csv_ingest(tmp_path):
    x = np.random.default_rng(7).standard_normal((4, 100)) * 50
    write_epoch_csv(tmp_path / "x.csv", x)
    np.testing.assert_allclose(read_epoch_csv(tmp_path / "x.csv"), x, rtol=1e-6)
    ds = load_dataset(_write_manifest(tmp_path, [{"file": "x.csv", "label": "unlabeled"}]))
    np.testing.assert_allclose(ds.epochs[0].samples, x, rtol=1e-6)


def test_labeled_dataset_needs_both_classes(tmp_path):
    write_epoch(tmp_path / "e.ieeg", _epoch(np.random.default_rng(8)), 100.0)
    with pytest.raises(DataError, match="ictal and interictal"):
        load_dataset(_write_manifest(tmp_path, [{"file": "e.ieeg", "label": "interictal"}]))


def test_malformed_manifest(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"subject_id": "x",\n "fs": }')
    with pytest.raises(DataError, match="line 2"):
        load_dataset(path)
    path.write_text('{"subject_id": "x"}')
    with pytest.raises(DataError, match="malformed"):
        load_dataset(path)


@pytest.mark.parametrize(
    "label, latency, expected",
    [
        ("ictal", 0, "early_ictal"),
        ("ictal", 14, "early_ictal"),
        ("ictal", 15, "ictal"),
        ("interictal", None, "interictal"),
    ],
)
def test_class_label3_boundary(label, latency, expected):
    assert class_label3(label, latency) == expected


def test_class_partition(small_dataset):
    labels = small_dataset.labels3
    counts = {c: int(np.sum(labels == c)) for c in ("early_ictal", "ictal", "interictal")}
    assert sum(counts.values()) == len(small_dataset)
    assert counts == {"early_ictal": 4 * 15, "ictal": 4 * 5, "interictal": 80}


def test_synth_config_validation():
    with pytest.raises(ConfigError) as err:
        SynthConfig(n_channels=4, planted_channels=[4]).validate()
    assert err.value.field == "planted_channels"
    with pytest.raises(ConfigError) as err:
        SynthConfig(seizure_band_hz=(8, 4)).validate()
    assert err.value.field == "seizure_band_hz"
    with pytest.raises(ConfigError) as err:
        SynthConfig.from_dict({"n_chanels": 3})
    assert err.value.field == "n_chanels"


def test_synthetic_uncorrelated_without_shared_component():
    cfg = SynthConfig(shared_component_gain=0.0, rng_seed=11)
    _, epochs = synthesize(cfg)
    iu = np.triu_indices(cfg.n_channels, k=1)
    per_epoch = [
        np.abs(cross_matrix(zscore_rows(e.samples))[iu]).mean() for e in epochs if e.label == "ictal"
    ]
    assert np.mean(per_epoch) < 0.1


def test_synthetic_planted_band_power():
    cfg = SynthConfig(planted_channels=[2, 5], seizure_band_hz=(4, 8), rng_seed=12)
    _, epochs = synthesize(cfg)
    for ch in (2, 5):
        ictal = [log_power_bins(e.samples[ch], cfg.fs, 4, 8).mean() for e in epochs if e.label == "ictal"]
        inter = [log_power_bins(e.samples[ch], cfg.fs, 4, 8).mean() for e in epochs if e.label == "interictal"]
        assert np.mean(ictal) - np.mean(inter) > 3 * np.std(inter, ddof=1)


def test_generate_synthetic_is_deterministic(tmp_path):
    cfg = SynthConfig(n_channels=4, n_seizures=2, seizure_len_s=3, interictal_len_s=4, planted_channels=[1], rng_seed=5)
    m1, _ = generate_synthetic(cfg, tmp_path / "a")
    m2, _ = generate_synthetic(cfg, tmp_path / "b")
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files_a == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    loaded = load_dataset(m1)
    assert len(loaded) == 2 * 3 + 4


def test_generate_synthetic_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(DataError):
        generate_synthetic(SynthConfig(n_channels=2, planted_channels=[0]), blocker / "sub")
