import os
from datetime import timedelta, timezone

import pytest

from icuvis import cli
from icuvis.config import ConfigError, RunConfig, apply_analysis_keys, parse_kv, parse_tz, synth_config_from_kv
from icuvis.domain import EventKind, PostureClass

SMALL = """
# tiny cohort for fast tests
seed = 5
patients = 4
frames_per_window = 90
acuity.stable.count = 10
acuity.stable.target = 1.2
acuity.unstable.count = 8
acuity.unstable.target = 1.8
pain.no_mild.count = 6
pain.no_mild.target = 1.5
pain.moderate_severe.count = 6
pain.moderate_severe.target = 1.5
delirium.non_delirious.count = 4
delirium.delirious.count = 4
delirium.delirious.target = 1.3
delirium.non_delirious.target = 1.3
"""


@pytest.fixture
def cohort_dir(tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "cohort"
    assert cli.main(["synth", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == 0
    return out


def test_parse_kv_and_errors():
    kv = parse_kv("a = 1  # note\n\nB.c=x\n")
    assert kv == {"a": "1", "b.c": "x"}
    with pytest.raises(ConfigError, match=":2:"):
        parse_kv("a=1\nnonsense\n")


def test_parse_tz():
    assert parse_tz("-04:00") == timezone(timedelta(hours=-4))
    assert parse_tz("UTC") is timezone.utc
    assert parse_tz("America/New_York").key == "America/New_York"


def test_analysis_keys():
    rc = apply_analysis_keys(RunConfig(), parse_kv(
        "window.pain = -45m,-20m\nwindow.min_frames = 10\nmetrics.counting_classes = standing\nanalysis.adjust = bh\n"))
    assert rc.policy.pain == (timedelta(minutes=-45), timedelta(minutes=-20))
    assert rc.policy.min_frames == 10
    assert rc.counting.classes == frozenset({PostureClass.STANDING})
    assert rc.adjust == "bh"


def test_synth_config_from_kv():
    cfg = synth_config_from_kv(parse_kv(SMALL), seed=11)
    assert cfg.seed == 11 and cfg.patients == 4
    st = cfg.outcomes[EventKind.ACUITY].group("unstable")
    assert st.count == 8 and 0.9 + st.expected_visitors == pytest.approx(1.8)
    with pytest.raises(ConfigError):
        synth_config_from_kv({"acuity.bogus.count": "3"})
    defaults = synth_config_from_kv({})
    assert defaults.outcomes[EventKind.PAIN].group("no_mild").count == 60


def test_validate_ok(cohort_dir, capsys):
    assert cli.main(["validate", "--input-dir", str(cohort_dir)]) == 0
    assert "accepted" in capsys.readouterr().out


def test_validate_rejects_exit_1(tmp_path):
    det = tmp_path / "d.tsv"
    det.write_text("P01\t2023-05-02T14:00:00-04:00\tstanding,0.8,10,20,641,300\n")
    assert cli.main(["validate", "--detections", str(det)]) == 1


def test_missing_file_exit_2(tmp_path, capsys):
    assert cli.main(["validate", "--detections", str(tmp_path / "nope.tsv")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path):
    assert cli.main([]) == 2
    assert cli.main(["analyze", "--input-dir", str(tmp_path)]) == 2  # --out missing
    assert cli.main(["validate"]) == 2  # no inputs
    assert cli.main(["analyze", "--input-dir", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 2


def test_analyze_artifacts(cohort_dir, tmp_path, capsys):
    out = tmp_path / "report"
    rc = cli.main(["analyze", "--input-dir", str(cohort_dir), "--out", str(out), "--threads", "1"])
    assert rc == 0
    assert sorted(os.listdir(out)) == ["associations.csv", "associations.txt", "exclusions.csv", "histogram_bins.csv"]
    stdout = capsys.readouterr().out
    assert "Patient Acuity Associations with Model Metrics" in stdout
    assert "Pain four-group Kruskal-Wallis" in stdout
    csv_text = (out / "associations.csv").read_text()
    assert csv_text.startswith("outcome,metric,stratum,group,n,")


def test_analyze_csv_to_stdout(cohort_dir, tmp_path, capsys):
    assert cli.main(["analyze", "--input-dir", str(cohort_dir), "--out", str(tmp_path / "r"), "--format", "csv"]) == 0
    assert capsys.readouterr().out == (tmp_path / "r" / "associations.csv").read_text()


def test_analyze_no_windows_exit_1(cohort_dir, tmp_path):
    assert cli.main(["analyze", "--input-dir", str(cohort_dir), "--out", str(tmp_path / "r"), "--min-frames", "100000"]) == 1


def test_byte_identical_across_threads(tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text(SMALL)
    outs = []
    for n, threads in enumerate(("1", "4", "4")):
        c, r = tmp_path / f"c{n}", tmp_path / f"r{n}"
        assert cli.main(["synth", "--config", str(cfg), "--out", str(c), "--threads", threads]) == 0
        assert cli.main(["analyze", "--input-dir", str(c), "--out", str(r), "--threads", threads]) == 0
        outs.append({p: (d / p).read_bytes() for d in (c, r) for p in sorted(os.listdir(d))})
    assert outs[0] == outs[1] == outs[2]


def _det_files(tmp_path, leak=False):
    gt, pred = [], []
    for i in range(6):
        pid = f"P{i}"
        for s in range(3):
            t = f"2023-05-02T10:00:0{s}-04:00"
            gt.append(f"{pid}\t{t}\tlying_in_bed,1.0,100,100,300,300;standing,1.0,10,10,60,200")
            pred.append(f"{pid}\t{t}\tlying_in_bed,0.9,100,100,300,300;standing,0.8,400,10,460,200")
    (tmp_path / "gt.tsv").write_text("\n".join(gt) + "\n")
    (tmp_path / "pred.tsv").write_text("\n".join(pred) + "\n")
    folds = "fold,patient_id\n0,P0\n0,P1\n0,P2\n1,P3\n1,P4\n1,P5\n" + ("1,P0\n" if leak else "")
    (tmp_path / "folds.csv").write_text(folds)


def test_deteval_kfold(tmp_path, capsys):
    _det_files(tmp_path)
    rc = cli.main(["deteval", "--gt", str(tmp_path / "gt.tsv"), "--pred", str(tmp_path / "pred.tsv"),
                   "--kfold", "3", "--out", str(tmp_path / "ev")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "Lying in bed" in out or "lying" in out.lower()
    csv_text = (tmp_path / "ev" / "deteval.csv").read_text()
    assert "lying_in_bed,mean,1.000000,1.000000,1.000000,1.000000" in csv_text
    assert "standing,mean,0.000000,0.000000,0.000000,0.000000" in csv_text


def test_deteval_leakage_exit_1(tmp_path, capsys):
    _det_files(tmp_path, leak=True)
    rc = cli.main(["deteval", "--gt", str(tmp_path / "gt.tsv"), "--pred", str(tmp_path / "pred.tsv"),
                   "--folds", str(tmp_path / "folds.csv")])
    assert rc == 1
    assert "leakage detected" in capsys.readouterr().err
