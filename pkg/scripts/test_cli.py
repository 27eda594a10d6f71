"""命令行端到端测试：simulate → fit → replicate → report，以及退出码映射。"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import pandas as pd

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from app import main as cli_main  # noqa: E402

SHORT_FIT = {
    "truncation": "fixed",
    "report_grid_size": 21,
    "chain": {"n_components": 2, "n_knots": 5, "grid_size": 30, "n_iter": 40, "n_burn": 20, "thin": 2},
}


def _config(tmp_path: Path, payload: dict, name: str = "run.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_simulate_then_fit(tmp_path) -> None:
    cfg = _config(tmp_path, {"seed": 5, "sim": {"n_subjects": 30, "mean_obs": 8}, "fit": SHORT_FIT,
                             "io": {"write_trajectories": True}})
    sim_dir = tmp_path / "sim"
    assert cli_main(["simulate", "-c", cfg, "-o", str(sim_dir)], environ={}) == 0
    for name in ("dataset.csv", "truth.json", "truth_curves.csv", "manifest.json"):
        assert (sim_dir / name).exists()
    manifest = json.loads((sim_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "simulate" and manifest["seed"] == 5
    assert manifest["config"]["io"]["schema"]["id"] == "id"
    truth = json.loads((sim_dir / "truth.json").read_text(encoding="utf-8"))
    assert abs(truth["acme_integral"] - 1.2) < 1e-12

    fit_dir = tmp_path / "fit"
    assert cli_main(["fit", "-c", cfg, "-d", str(sim_dir / "dataset.csv"), "-o", str(fit_dir)], environ={}) == 0
    te = pd.read_csv(fit_dir / "te.csv")
    assert list(te.columns) == ["t", "mean", "lower", "upper"]
    assert len(te) == 21
    effects = json.loads((fit_dir / "effects.json").read_text(encoding="utf-8"))
    assert set(effects["integrated"]) == {"te", "acme", "ande", "mediator_effect"}
    assert effects["basis"]["n_knots"] == 5 and effects["basis"]["grid_size"] == 30
    knots = effects["basis"]["knots"]
    assert len(knots) == 5 and 0.0 < knots[0] < knots[-1] < 1.0
    for model in ("mediator", "outcome"):
        rates = effects["mh_acceptance"][model]
        assert set(rates) == {"a1", "a2", "a_chi1", "a_chi2"}
        assert all(0.0 <= v <= 1.0 for v in rates.values())
    fit_manifest = json.loads((fit_dir / "manifest.json").read_text(encoding="utf-8"))
    assert fit_manifest["basis"] == effects["basis"]
    assert fit_manifest["mh_acceptance"] == effects["mh_acceptance"]
    diag = json.loads((fit_dir / "diagnostics.json").read_text(encoding="utf-8"))
    assert set(diag) == {"mediator", "outcome"}
    draws = pd.read_csv(fit_dir / "draws_outcome.csv")
    assert "beta_mediator" in draws.columns and len(draws) == 10
    assert (fit_dir / "trajectories.csv").exists()


def test_invalid_config_exit_code(tmp_path) -> None:
    cfg = _config(tmp_path, {"sim": {"sigma_m": -1.0}})
    assert cli_main(["simulate", "-c", cfg, "-o", str(tmp_path / "out")], environ={}) == 2
    unknown = _config(tmp_path, {"sim": {"n_subject": 10}}, "unknown.json")
    assert cli_main(["simulate", "-c", unknown, "-o", str(tmp_path / "out")], environ={}) == 2
    assert cli_main(["simulate", "-o", str(tmp_path / "out")], environ={"MEDFPCA_THREADS": "many"}) == 2


def test_negative_times_exit_code(tmp_path) -> None:
    data = tmp_path / "neg.csv"
    data.write_text("id,z,time,mediator,outcome,x1,x2,x3\n"
                    "a,0,-2,1,2,0,0,0\na,0,4,1,2,0,0,0\nb,1,1,1,2,0,0,0\nb,1,3,1,2,0,0,0\n", encoding="utf-8")
    assert cli_main(["fit", "-d", str(data), "-o", str(tmp_path / "out")], environ={}) == 2


def test_missing_files_exit_code(tmp_path) -> None:
    out = tmp_path / "out"
    assert cli_main(["fit", "-d", str(tmp_path / "nope.csv"), "-o", str(out)], environ={}) == 3
    logs = list((out / "logs").glob("exceptions_*.log"))
    record = json.loads(logs[0].read_text(encoding="utf-8").split("-" * 80)[0])
    assert record["exception_type"] == "DataIOError"
    assert record["exit_code"] == 3 and record["context"]["command"] == "fit"
    assert cli_main(["simulate", "-c", str(tmp_path / "missing.json"), "-o", str(out)], environ={}) == 3
    assert cli_main(["report", "-i", str(tmp_path / "missing.csv")], environ={}) == 3


def test_replicate_and_report(tmp_path) -> None:
    cfg = _config(tmp_path, {
        "seed": 1,
        "sim": {"n_subjects": 30},
        "study": {"n_reps": 2, "sparsity_levels": [6], "methods": ["gee"]},
    })
    out = tmp_path / "rep"
    assert cli_main(["replicate", "-c", cfg, "-o", str(out)], environ={}) == 0
    report = pd.read_csv(out / "report.csv")
    assert report["estimand"].tolist() == ["te", "acme"]
    assert "GEE" in (out / "report.txt").read_text(encoding="utf-8")
    replicates = pd.read_csv(out / "replicates.csv")
    assert len(replicates) == 4
    assert cli_main(["report", "-i", str(out / "report.csv")], environ={}) == 0


def main() -> int:
    import tempfile

    for test in (test_simulate_then_fit, test_invalid_config_exit_code, test_negative_times_exit_code,
                 test_missing_files_exit_code, test_replicate_and_report):
        with tempfile.TemporaryDirectory() as tmp:
            test(Path(tmp))
    print("cli: OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
