import json
from pathlib import Path

import pytest

from seizure_acs.dataset import Dataset, SynthConfig, synthesize

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

_acceptance = {}


def load_config(name, **overrides):
    doc = json.loads((CONFIGS / name).read_text())
    doc.update(overrides)
    return SynthConfig.from_dict(doc)


def make_dataset(config):
    manifest, epochs = synthesize(config)
    return Dataset(manifest, epochs)


@pytest.fixture(scope="session")
def small_dataset():
    """8 channels, 4 seizures of 20 s, 80 s interictal, planted on 1 and 6."""
    cfg = SynthConfig(
        subject_id="small",
        n_channels=8,
        fs=400,
        n_seizures=4,
        seizure_len_s=20,
        interictal_len_s=80,
        planted_channels=[1, 6],
        rng_seed=3,
    )
    return make_dataset(cfg)


@pytest.fixture(scope="session")
def synth32():
    return make_dataset(load_config("synth32.json"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    cid, text = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        measured = dict(report.user_properties).get("measured", "")
        _acceptance[cid] = (text, report.outcome, report.duration, measured)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_acceptance, key=lambda c: int(c[1:])):
        text, outcome, duration, measured = _acceptance[cid]
        mark = "PASS" if outcome == "passed" else "FAIL"
        detail = f"  [{measured}]" if measured else ""
        terminalreporter.write_line(f"[{mark}] {cid:>3}  {text}{detail}  ({duration:.1f}s)")
