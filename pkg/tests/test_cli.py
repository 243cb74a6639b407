import json

import numpy as np
import pytest

from hybridmf import kernels
from hybridmf.cli import main
from hybridmf.data import SyntheticScale, generate_synthetic, save_dataset
from hybridmf.factorization import FactorModel, Hyperparams, save_model

SMALL = SyntheticScale(n_users=30, n_posts=40, direct_events=200, direct_users=25,
                       social_events=120, social_users=20, reading_events=60, reading_users=15,
                       n_topics=4)
FAST = ["--d", "3", "--epochs", "15"]


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    return save_dataset(generate_synthetic(1, SMALL), root)


def data_args(paths):
    return ["--events", str(paths["events"]), "--posts", str(paths["posts"])]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestIngest:
    def test_full_scale_summary(self, tmp_path, capsys):
        code, out, _ = run(capsys, "synth", "--seed", 42, "--out", tmp_path)
        assert code == 0
        code, out, _ = run(capsys, "ingest", "--events", tmp_path / "events.csv",
                           "--posts", tmp_path / "posts.csv")
        assert code == 0
        lines = dict(line.split("\t", 1) for line in out.splitlines())
        assert lines["users"] == "250" and lines["posts"] == "6900"
        assert lines["direct"] == "20868\t150"
        assert lines["social"] == "28363\t165"
        assert lines["reading"] == "10985\t134"

    def test_missing_posts_file(self, small, tmp_path, capsys):
        missing = tmp_path / "no_posts.csv"
        code, _, err = run(capsys, "ingest", "--events", small["events"], "--posts", missing)
        assert code == 2 and "no_posts.csv" in err

    def test_empty_events(self, small, tmp_path, capsys):
        empty = tmp_path / "events.csv"
        empty.write_text("user_id,post_id,interaction_type,value,timestamp\n")
        code, _, err = run(capsys, "ingest", "--events", empty, "--posts", small["posts"])
        assert code == 2 and "error" in err

    def test_unknown_type(self, small, tmp_path, capsys):
        bad = tmp_path / "events.csv"
        bad.write_text("user_id,post_id,interaction_type,value,timestamp\nu0,p0,poke,1,\n")
        code, _, err = run(capsys, "ingest", "--events", bad, "--posts", small["posts"])
        assert code == 2 and "poke" in err


class TestTrain:
    def test_basic_echoes_alpha(self, small, tmp_path, capsys):
        model = tmp_path / "m.json"
        code, out, _ = run(capsys, "train", *data_args(small), *FAST, "--alpha", 0, "--out", model)
        assert code == 0 and "alpha=0.0" in out
        saved = json.loads(model.read_text())
        assert saved["hyperparams"]["alpha"] == 0.0
        assert (tmp_path / "m.json.loss.csv").read_text().startswith("epoch,L\n")

    def test_hybrid_loss_header_and_determinism(self, small, tmp_path, capsys):
        for name in ("a", "b"):
            code, _, _ = run(capsys, "train", *data_args(small), *FAST, "--alpha", 0.2,
                             "--out", tmp_path / f"{name}.json", "--loss-out", tmp_path / f"{name}.csv")
            assert code == 0
        assert (tmp_path / "a.csv").read_text().startswith("epoch,L^\n")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_from_profile_and_similarity_files(self, small, tmp_path, capsys):
        assert run(capsys, "profiles", *data_args(small), "--out", tmp_path / "r.csv")[0] == 0
        assert (tmp_path / "r.csv.meta.json").exists()
        assert run(capsys, "similarity", "--posts", small["posts"], "--out", tmp_path / "s.csv")[0] == 0
        code, out, _ = run(capsys, "train", "--ratings", tmp_path / "r.csv", "--similarity",
                           tmp_path / "s.csv", *FAST, "--out", tmp_path / "m.json")
        assert code == 0 and "L^" in out

    def test_hybrid_without_similarity_source(self, small, tmp_path, capsys):
        run(capsys, "profiles", *data_args(small), "--out", tmp_path / "r.csv")
        code, _, err = run(capsys, "train", "--ratings", tmp_path / "r.csv", "--out", tmp_path / "m.json")
        assert code == 2 and "similarity" in err

    def test_bad_config_value(self, small, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs = many\n")
        code, _, err = run(capsys, "train", "--config", cfg, *data_args(small), "--out", tmp_path / "m.json")
        assert code == 2 and "epochs" in err


@pytest.fixture(scope="module")
def model(small, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "m.json"
    assert main([*map(str, ["train", *data_args(small), *FAST, "--out", out])]) == 0
    return out


class TestRecommend:
    def test_truncates_and_excludes_seen(self, model, capsys):
        saved = json.loads(model.read_text())
        user = saved["users"][0]
        seen = {saved["items"][c] for r, c in zip(*saved["seen"]) if r == 0}
        code, out, _ = run(capsys, "recommend", "--model", model, "--user", user, "--k", 5)
        lines = out.splitlines()
        assert code == 0 and lines[0] == "rank,post_id,score" and len(lines) == 6
        posts = [line.split(",")[1] for line in lines[1:]]
        assert not seen & set(posts)
        scores = [float(line.split(",")[2]) for line in lines[1:]]
        assert scores == sorted(scores, reverse=True)

    def test_deterministic(self, model, capsys):
        user = json.loads(model.read_text())["users"][1]
        a = run(capsys, "recommend", "--model", model, "--user", user)
        b = run(capsys, "recommend", "--model", model, "--user", user)
        assert a == b

    def test_unknown_user(self, model, capsys):
        code, _, err = run(capsys, "recommend", "--model", model, "--user", "nobody")
        assert code == 2 and "nobody" in err

    def test_cold_user_warns(self, tmp_path, capsys):
        # user "b" has no training ratings
        model = FactorModel(np.ones((2, 1)), np.ones((3, 1)), Hyperparams(d=1), ("a", "b"),
                            ("x", "y", "z"), np.array([0]), np.array([1]))
        save_model(model, tmp_path / "m.json")
        code, out, err = run(capsys, "recommend", "--model", tmp_path / "m.json", "--user", "b")
        assert code == 0 and "warning" in err and len(out.splitlines()) == 4


class TestExperiment:
    def test_eight_rows_byte_identical(self, small, tmp_path, capsys):
        for name in ("a", "b"):
            code, _, _ = run(capsys, "experiment", *data_args(small), *FAST,
                             "--out", tmp_path / f"{name}.csv")
            assert code == 0
        text = (tmp_path / "a.csv").read_text()
        assert len(text.splitlines()) == 9
        assert text == (tmp_path / "b.csv").read_text()
        meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
        assert meta["config"]["epochs"] == 15

    def test_selector_subset(self, small, tmp_path, capsys):
        code, _, _ = run(capsys, "experiment", *data_args(small), *FAST, "--selectors", "social",
                         "--output-dir", tmp_path)
        rows = (tmp_path / "report.csv").read_text().splitlines()[1:]
        assert code == 0 and [r.split(",")[:2] for r in rows] == [["social", "basic"], ["social", "hybrid"]]

    def test_evaluate_to_stdout(self, small, capsys):
        code, out, _ = run(capsys, "evaluate", *data_args(small), *FAST, "--model-kind", "hybrid")
        assert code == 0 and out.splitlines()[1].startswith("all,hybrid,3,")


def test_python_backend_flag(small, tmp_path, capsys):
    previous = kernels.backend()
    try:
        code, _, _ = run(capsys, "--backend", "python", "train", *data_args(small), *FAST,
                         "--out", tmp_path / "m.json")
    finally:
        kernels.use(previous)
    assert code == 0
