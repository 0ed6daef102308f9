"""End-to-end tests for the necode command line interface.

Fast configurations only: a small gaussian-blobs zoo exercises the full
train -> recode -> verify -> eval -> report pipeline, and a shrunken
mini-digits run covers the image-only code paths (preprocessing ops and
the denoiser attack).
"""

import json
import os

import numpy as np
import pytest

from necode import __version__, cli
from necode.harness import CSV_COLUMNS, read_rows
from necode.recoder import load_batch, psnr_db

BLOBS_INI = """\
[run]
seed = 11

[nn]
dataset = gaussian-blobs
n_classes = 3
n_features = 16
train = 192
eval = 96
probe = 48
families = dense-front
reseed = dense-front
dense-front.hidden = 6
dense-front.epochs = 8
dense-front.lr = 0.1

[recoder]
target_psnr_db = 22

[bounds]
trials = 2000
samples = 24

[harness]
psnr_grid = inf, 25
attacks = projection-back
projection_rank = 8
"""


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """One trained + recoded + verified + evaluated blobs workspace."""
    root = tmp_path_factory.mktemp("cli-blobs")
    ini = root / "blobs.ini"
    ini.write_text(BLOBS_INI)
    out = root / "out"
    base = ("--config", str(ini), "--out", str(out))
    assert run_cli("train", *base) == 0
    assert run_cli("recode", *base) == 0
    assert run_cli("verify", *base) == 0
    assert run_cli("eval", *base) == 0
    return {"root": root, "ini": ini, "out": out}


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# configuration parsing.

def test_defaults_without_config():
    cfg = cli.load_config(None)
    assert cfg["recoder"]["target_psnr_db"] == 20.0
    assert cfg["nn"]["families"] == ("dense-front", "conv-front",
                                     "attention-front")
    assert cfg["nn_models"] == {}
    assert cfg["bounds"]["tau"] == 1e-4


def test_config_values_parse(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[nn]\ndataset = gaussian-blobs\n"
                   "dense-front.hidden = 6\ndense-front.lr = 0.25\n"
                   "[harness]\nmatrix = off\npsnr_grid = inf, 20\n")
    cfg = cli.load_config(str(ini))
    assert cfg["nn_models"]["dense-front"] == {"hidden": 6, "lr": 0.25}
    assert cfg["harness"]["matrix"] is False
    assert cfg["harness"]["psnr_grid"] == (float("inf"), 20.0)


@pytest.mark.parametrize("body", [
    "[plots]\nkind = matrix\n",
    "[run]\nspeed = 9\n",
    "[nn]\ndense-front.widht = 3\n",
    "[bounds]\ntrials = many\n",
    "[harness]\nmatrix = maybe\n",
])
def test_bad_config_rejected(tmp_path, body):
    ini = tmp_path / "bad.ini"
    ini.write_text(body)
    with pytest.raises(cli.ConfigError):
        cli.load_config(str(ini))


def test_missing_config_file_exits_2(tmp_path):
    rc = run_cli("train", "--config", str(tmp_path / "absent.ini"),
                 "--out", str(tmp_path / "o"))
    assert rc == cli.EXIT_CONFIG


def test_flag_overrides_config(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nseed = 5\n[recoder]\ntau = 1e-3\n")
    args = cli.build_parser().parse_args(
        ["train", "--config", str(ini), "--seed", "9", "--tau", "1e-5"])
    cfg = cli.apply_flags(cli.load_config(args.config), args)
    assert cfg["run"]["seed"] == 9
    assert cfg["recoder"]["tau"] == 1e-5
    assert cfg["bounds"]["tau"] == 1e-5


def test_version_flag():
    with pytest.raises(SystemExit) as err:
        run_cli("--version")
    assert err.value.code == 0


def test_substream_seeds_are_labeled_and_stable():
    seeds = {label: cli.substream_seed(3, label)
             for label in ("train", "recode", "eval", "attack")}
    assert len(set(seeds.values())) == 4
    assert cli.substream_seed(3, "train") == seeds["train"]
    assert cli.substream_seed(3, "train", 1) != seeds["train"]
    assert cli.substream_seed(4, "train") != seeds["train"]


# ---------------------------------------------------------------------------
# train.

def test_train_manifest(ws):
    manifest = read_json(ws["out"] / "models" / "manifest.json")
    names = [entry["name"] for entry in manifest["models"]]
    assert names == ["dense-front", "dense-front-r1"]
    assert manifest["ta_pairs"] == [["dense-front", "dense-front-r1"]]
    for entry in manifest["models"]:
        assert set(entry) == {"name", "family", "seed", "file", "checksum",
                              "eval_accuracy"}
        assert (ws["out"] / "models" / entry["file"]).exists()
        assert entry["eval_accuracy"] > 0.8
    seeds = {entry["seed"] for entry in manifest["models"]}
    assert len(seeds) == 2


def test_train_is_deterministic(ws, tmp_path):
    out2 = tmp_path / "again"
    assert run_cli("train", "--config", str(ws["ini"]),
                   "--out", str(out2)) == 0
    first = read_json(ws["out"] / "models" / "manifest.json")
    second = read_json(out2 / "models" / "manifest.json")
    assert [e["checksum"] for e in first["models"]] == \
        [e["checksum"] for e in second["models"]]


def test_train_rejects_unknown_reseed_family(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[nn]\ndataset = gaussian-blobs\n"
                   "families = dense-front\nreseed = conv-front\n")
    rc = run_cli("train", "--config", str(ini), "--out", str(tmp_path / "o"))
    assert rc == cli.EXIT_CONFIG


def test_resolved_config_echo(ws):
    echo = read_json(ws["out"] / "resolved_config.json")
    assert echo["tool_version"] == __version__
    assert echo["backend"] in ("numba", "pure-numpy")
    assert echo["root_seed"] == 11
    assert set(echo["substream_seeds"]) == {"train", "recode", "eval",
                                            "attack"}
    checksum = echo["input_checksums"]["dataset"]
    assert len(checksum) == 16 and int(checksum, 16) >= 0
    assert echo["config"]["recoder"]["target_psnr_db"] == 22.0


# ---------------------------------------------------------------------------
# recode.

def test_recode_artifact_hits_target_psnr(ws):
    batch = load_batch(ws["out"] / "ne_dense-front_eval.neb")
    assert batch.originals.shape == (96, 16)
    levels = [psnr_db(x, y)
              for x, y in zip(batch.originals, batch.recoded)]
    assert abs(float(np.mean(levels)) - 22.0) <= 0.25


def test_recode_is_deterministic(ws, tmp_path):
    base = ("--config", str(ws["ini"]),
            "--models-dir", str(ws["out"] / "models"))
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert run_cli("recode", *base, "--out", str(out)) == 0
        outs.append(out / "ne_dense-front_eval.neb")
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_recode_flags(ws, tmp_path):
    out = tmp_path / "o"
    rc = run_cli("recode", "--config", str(ws["ini"]),
                 "--models-dir", str(ws["out"] / "models"),
                 "--out", str(out), "--model", "dense-front-r1",
                 "--split", "probe", "--limit", "7")
    assert rc == 0
    batch = load_batch(out / "ne_dense-front-r1_probe.neb")
    assert batch.recoded.shape[0] == 7


def test_recode_unknown_model_exits_2(ws, tmp_path):
    rc = run_cli("recode", "--config", str(ws["ini"]),
                 "--models-dir", str(ws["out"] / "models"),
                 "--out", str(tmp_path / "o"), "--model", "mystery")
    assert rc == cli.EXIT_CONFIG


def test_recode_without_manifest_exits_4(ws, tmp_path):
    rc = run_cli("recode", "--config", str(ws["ini"]),
                 "--out", str(tmp_path / "empty"))
    assert rc == cli.EXIT_IO


def test_recode_corrupt_manifest_exits_4(ws, tmp_path):
    models = tmp_path / "models"
    models.mkdir()
    (models / "manifest.json").write_text("{broken")
    rc = run_cli("recode", "--config", str(ws["ini"]),
                 "--models-dir", str(models), "--out", str(tmp_path / "o"))
    assert rc == cli.EXIT_IO


def test_recode_empty_subspace_exits_3(tmp_path):
    # hidden width above the feature count leaves no insensitive
    # directions, which is a verification failure, not an I/O error
    ini = tmp_path / "tall.ini"
    ini.write_text("[nn]\ndataset = gaussian-blobs\nn_features = 8\n"
                   "train = 32\neval = 16\nprobe = 8\n"
                   "families = dense-front\nreseed =\n"
                   "dense-front.hidden = 24\ndense-front.epochs = 2\n")
    out = tmp_path / "o"
    assert run_cli("train", "--config", str(ini), "--out", str(out)) == 0
    rc = run_cli("recode", "--config", str(ini), "--out", str(out))
    assert rc == cli.EXIT_VERIFY


# ---------------------------------------------------------------------------
# verify.

def test_verify_report_structure(ws):
    report = read_json(ws["out"] / "bound_reports.json")
    assert report["failures"] == []
    # 2 models x 3 sigma x 2 t retention cells
    assert len(report["retention"]) == 12
    for entry in report["retention"]:
        assert entry["passes"] in (True, None)
        assert isinstance(entry["vacuous"], bool)
    # both ordered pairs of the same-shape pair
    pairs = {(e["target"], e["other"]) for e in report["degradation"]}
    assert pairs == {("dense-front", "dense-front-r1"),
                     ("dense-front-r1", "dense-front")}
    subjects = {e["subject"] for e in report["flatness"]}
    assert subjects == {"train-data", "dense-front", "dense-front-r1"}
    assert {e["model"] for e in report["alignment"]} == \
        {"dense-front", "dense-front-r1"}


# ---------------------------------------------------------------------------
# eval and report.

def test_eval_grid_contents(ws):
    rows = read_rows(ws["out"] / "eval_grid.csv")
    # matrix (4) + projection-back public/random (8) + 2x2x2 sweeps (8)
    assert len(rows) == 20
    attacks = {row.attack for row in rows}
    assert attacks == {"none", "projection-back:public-pca",
                       "projection-back:random"}
    # the psnr column records the realized level, near the 22 dB target
    matrix = [r for r in rows if r.attack == "none"
              and abs(r.psnr_db - 22.0) <= 0.25]
    assert len(matrix) == 4
    sweep_inf = [r for r in rows if np.isinf(r.psnr_db)]
    for row in sweep_inf:
        assert row.recoded_acc == row.clean_acc
    summary = read_json(ws["out"] / "eval_summary.json")
    assert summary["columns"] == list(CSV_COLUMNS)


def test_eval_is_byte_identical_on_rerun(ws, tmp_path):
    out2 = tmp_path / "re"
    rc = run_cli("eval", "--config", str(ws["ini"]),
                 "--models-dir", str(ws["out"] / "models"),
                 "--out", str(out2))
    assert rc == 0
    first = (ws["out"] / "eval_grid.csv").read_bytes()
    assert first == (out2 / "eval_grid.csv").read_bytes()


def test_eval_unknown_attack_exits_2(ws, tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text(BLOBS_INI + "\n")
    text = ini.read_text().replace("attacks = projection-back",
                                   "attacks = gradient-descent")
    ini.write_text(text)
    rc = run_cli("eval", "--config", str(ini),
                 "--models-dir", str(ws["out"] / "models"),
                 "--out", str(tmp_path / "o"))
    assert rc == cli.EXIT_CONFIG


def test_report_merges_sources(ws, tmp_path):
    src = ws["out"] / "eval_grid.csv"
    copy = tmp_path / "copy.csv"
    copy.write_bytes(src.read_bytes())
    out = tmp_path / "merged"
    rc = run_cli("report", "--config", str(ws["ini"]), "--out", str(out),
                 str(src), str(copy))
    assert rc == 0
    merged = read_rows(out / "report.csv")
    assert len(merged) == 2 * len(read_rows(src))
    summary = read_json(out / "report_summary.json")
    assert set(summary["sources"]) == {str(src), str(copy)}
    assert summary["rows"] == len(merged)


def test_report_missing_source_exits_4(ws, tmp_path):
    rc = run_cli("report", "--config", str(ws["ini"]),
                 "--out", str(tmp_path / "o"), str(tmp_path / "nope.csv"))
    assert rc == cli.EXIT_IO


def test_report_malformed_source_exits_4(ws, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("who,what\n1,2\n")
    rc = run_cli("report", "--config", str(ws["ini"]),
                 "--out", str(tmp_path / "o"), str(bad))
    assert rc == cli.EXIT_IO


# ---------------------------------------------------------------------------
# image-layout paths: preprocessing ops and the denoiser attack.

def test_eval_preprocess_and_denoiser_on_images(tmp_path):
    ini = tmp_path / "digits.ini"
    ini.write_text(
        "[run]\nseed = 2\n"
        "[nn]\ndataset = mini-digits\ntrain = 160\neval = 48\nprobe = 24\n"
        "families = dense-front\nreseed =\n"
        "dense-front.hidden = 6\ndense-front.epochs = 2\n"
        "[recoder]\ntarget_psnr_db = 20\n"
        "[harness]\npreprocess = center-crop size=12 ; gaussian-blur "
        "sigma=0.4\nattacks = denoiser:noise2noise\ndenoiser_epochs = 2\n"
        "denoiser_train_limit = 48\n")
    out = tmp_path / "o"
    assert run_cli("train", "--config", str(ini), "--out", str(out)) == 0
    assert run_cli("eval", "--config", str(ini), "--out", str(out)) == 0
    rows = read_rows(out / "eval_grid.csv")
    labels = {(row.preprocess, row.attack) for row in rows}
    assert labels == {("none", "none"), ("center-crop(size=12)", "none"),
                      ("gaussian-blur(sigma=0.4)", "none"),
                      ("none", "denoiser:noise2noise")}


def test_parse_preprocess_strings():
    ops = cli._parse_preprocess("center-crop size=14; gaussian-blur "
                                "sigma=0.5")
    assert [op.kind for op in ops] == ["center-crop", "gaussian-blur"]
    assert ops[0].params == {"size": 14}
    assert ops[1].params == {"sigma": 0.5}
    assert cli._parse_preprocess("") == []
    with pytest.raises(cli.ConfigError):
        cli._parse_preprocess("center-crop size:14")
    with pytest.raises(cli.ConfigError):
        cli._parse_preprocess("shear angle=3")


# ---------------------------------------------------------------------------
# thread cap.

def test_thread_cap_applies_minimum(ws, tmp_path, monkeypatch):
    monkeypatch.setenv("NECODE_THREADS", "2")
    out = tmp_path / "o"
    src = ws["out"] / "eval_grid.csv"
    rc = run_cli("report", "--config", str(ws["ini"]), "--out", str(out),
                 str(src))
    assert rc == 0
    echo = read_json(out / "resolved_config.json")
    from necode import active_backend
    expected = 2
    if active_backend() == "numba":
        import numba

        expected = min(2, numba.config.NUMBA_NUM_THREADS)
    assert echo["threads"] == expected


def test_thread_cap_rejects_nonpositive(ws, tmp_path, monkeypatch):
    monkeypatch.setenv("NECODE_THREADS", "0")
    rc = run_cli("report", "--config", str(ws["ini"]),
                 "--out", str(tmp_path / "o"),
                 str(ws["out"] / "eval_grid.csv"))
    assert rc == cli.EXIT_CONFIG
