import json
from pathlib import Path

import jsonschema
import pytest

import rwacert

SCHEMA = Path(__file__).resolve().parents[2] / "docs" / "sweep.schema.json"


def run(*args):
    code, out, err = rwacert.cli(*args)
    assert code == 0, err
    return out


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("micro")
    common = ["--seed", "3", "--data", d / "data", "--bundle", d / "model", "--reports", d / "reports"]
    run(*common, "gen", "--scale", "0.023", "--samples", "2000")
    run(*common, "process")
    run(*common, "train")
    run(*common, "sweep", "--per-class", "2", "--no-c-per-class", "1", "--no-d-per-class", "1", "--clamp",
        "--n-iters", "3", "--max-rungs", "4")
    return d


def test_micro_dataset_has_60_series(workdir):
    manifest = json.loads((workdir / "data" / "manifest.json").read_text())
    assert len(manifest["series"]) == 60
    summaries = json.loads((workdir / "reports" / "summaries.json").read_text())
    assert len(summaries["series"]) == 60


def test_sweep_report_matches_schema(workdir):
    report = json.loads((workdir / "reports" / "sweep.json").read_text())
    jsonschema.validate(report, json.loads(SCHEMA.read_text()))
    assert len(report["ladders"]) == 6
    for cell in report["cells"]:
        assert cell["n_robust"] <= cell["n_binary_robust"] <= cell["n_correct"]
        if cell["rate"] is not None:
            assert cell["binary_rate"] >= cell["rate"]


def test_sweep_outputs_have_csv_and_svg(workdir):
    reports = workdir / "reports"
    assert (reports / "sweep.csv").read_text().startswith("group,kind,epsilon,")
    svgs = sorted(p.name for p in reports.glob("sweep_*.svg"))
    assert "sweep_gaussian_C.svg" in svgs
    assert (reports / "sweep_gaussian_C.svg").read_text().lstrip().startswith("<svg")


def test_bundle_loads_and_classifies(workdir):
    bundle = rwacert.ClassifierBundle.load(workdir / "model")
    omega, friction, _ = rwacert.generate_series("N", seed=99, n_samples=2000)
    assert bundle.classify(omega, friction) in {"N", "A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3", "D1",
                                                 "D2", "D3"}


def test_usage_and_domain_exit_codes(tmp_path):
    assert rwacert.cli("frobnicate")[0] == 2
    code, _, err = rwacert.cli("--data", tmp_path / "nowhere", "eval")
    assert code == 1 and err.startswith("error[io]:")
