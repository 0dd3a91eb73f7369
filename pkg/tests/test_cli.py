import json
import subprocess
import sys

import pytest

from phenotag.cli import main
from phenotag.corpus import load_corpus
from phenotag.tokenizer import load_vocab


def run(*argv):
    return main(list(argv))


class TestSynth:
    def test_deterministic_byte_identical(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        assert run("synth", "--seed", "1", "--docs", "30", "--out", str(a)) == 0
        assert run("synth", "--seed", "1", "--docs", "30", "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_split_files_written(self, tmp_path):
        out = tmp_path / "corpus.jsonl"
        run("synth", "--seed", "2", "--docs", "10", "--out", str(out))
        train = load_corpus(tmp_path / "corpus.train.jsonl")
        test = load_corpus(tmp_path / "corpus.test.jsonl")
        assert len(train) == 8 and len(test) == 2

    def test_config_echoed(self, tmp_path):
        out = tmp_path / "corpus.jsonl"
        run("synth", "--seed", "1", "--docs", "5", "--out", str(out))
        echo = json.loads((tmp_path / "corpus.jsonl.config.json").read_text())
        assert echo["command"] == "synth"
        assert echo["seed"] == "1"


class TestBuildVocabAndCoverage:
    def test_base_freq_curated(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run("synth", "--seed", "1", "--docs", "40", "--test-fraction", "0",
            "--out", str(corpus))
        base = tmp_path / "base.txt"
        freq = tmp_path / "freq.txt"
        cur = tmp_path / "cur.txt"
        assert run("build-vocab", "--mode", "base", "--out", str(base)) == 0
        assert run("build-vocab", "--mode", "freq", "--corpus", str(corpus),
                   "--base", str(base), "--min-count", "2", "--out", str(freq)) == 0
        assert run("build-vocab", "--mode", "curated", "--base", str(base),
                   "--out", str(cur)) == 0
        vb, vf, vc = load_vocab(base), load_vocab(freq), load_vocab(cur)
        assert len(vb) == len(vf) == len(vc)
        assert "her2" not in vb and "her2" in vc
        assert run("coverage", "--corpus", str(corpus),
                   "--vocab", f"orig={base}", "--vocab", f"freq={freq}",
                   "--vocab", f"cur={cur}", "--out", str(tmp_path / "cov.tsv")) == 0
        table = (tmp_path / "cov.tsv").read_text()
        assert table.splitlines()[0].startswith("entity_type")
        assert "Total" in table

    def test_inputs_not_mutated(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run("synth", "--seed", "3", "--docs", "10", "--test-fraction", "0",
            "--out", str(corpus))
        before = corpus.read_bytes()
        run("build-vocab", "--mode", "freq", "--corpus", str(corpus),
            "--min-count", "2", "--out", str(tmp_path / "v.txt"))
        assert corpus.read_bytes() == before


class TestEvaluateAndErrors:
    def test_self_evaluation_perfect(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        run("synth", "--seed", "4", "--docs", "10", "--test-fraction", "0",
            "--out", str(corpus))
        out = tmp_path / "report.tsv"
        assert run("evaluate", "--gold", str(corpus), "--pred", str(corpus),
                   "--out", str(out)) == 0
        text = out.read_text()
        assert "1.000 (1.000)" in text
        payload = json.loads(out.with_suffix(".json").read_text())
        assert "exact" in payload and "lenient" in payload
        table = capsys.readouterr().out
        assert "Micro average" in table

    def test_errors_command(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run("synth", "--seed", "4", "--docs", "6", "--test-fraction", "0",
            "--out", str(corpus))
        out = tmp_path / "errors.tsv"
        assert run("errors", "--gold", str(corpus), "--pred", str(corpus),
                   "--out", str(out)) == 0
        assert "boundary_mismatch\t0" in out.read_text()


class TestKappa:
    def test_identical_corpora(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        run("synth", "--seed", "5", "--docs", "6", "--test-fraction", "0",
            "--out", str(corpus))
        assert run("kappa", "--a", str(corpus), "--b", str(corpus)) == 0
        assert "kappa\t1.0000" in capsys.readouterr().out

    def test_label_files(self, tmp_path, capsys):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        a.write_text("X\nX\nY\nY\n")
        b.write_text("X\nY\nY\nY\n")
        assert run("kappa", "--a", str(a), "--b", str(b)) == 0
        assert "kappa\t0.5000" in capsys.readouterr().out


class TestExitCodes:
    def test_unknown_command_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "phenotag", "frobnicate"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert "usage" in proc.stderr.lower()

    def test_validation_failure_exits_1(self, tmp_path, capsys):
        missing = tmp_path / "nope.jsonl"
        assert run("stats", "--corpus", str(missing)) == 1
        assert "error:" in capsys.readouterr().err

    def test_capacity_error_single_line(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        run("synth", "--seed", "1", "--docs", "5", "--test-fraction", "0",
            "--out", str(corpus))
        code = run("build-vocab", "--mode", "freq", "--corpus", str(corpus),
                   "--k", "1200", "--out", str(tmp_path / "v.txt"))
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:") and "997" in err


class TestOutputRoot:
    def test_env_var_anchors_relative_outputs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHENOTAG_OUT_ROOT", str(tmp_path))
        run("synth", "--seed", "1", "--docs", "3", "--test-fraction", "0",
            "--out", "nested/c.jsonl")
        assert (tmp_path / "nested" / "c.jsonl").exists()


class TestConfigFile:
    def test_flags_win_over_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed=9\ndocs=4\n")
        out = tmp_path / "c.jsonl"
        run("synth", "--config", str(cfg), "--seed", "1", "--out", str(out),
            "--test-fraction", "0")
        echo = json.loads((tmp_path / "c.jsonl.config.json").read_text())
        assert echo["seed"] == "1"      # explicit flag wins
        assert echo["docs"] == "4"      # config file fills the rest
        assert len(load_corpus(out)) == 4


class TestTokenizeCommand:
    def test_pieces_printed(self, capsys):
        assert run("tokenize", "--text", "HER2 positive") == 0
        out = capsys.readouterr().out
        assert "her\t0\t3" in out
        assert "##2\t3\t4" in out


class TestModelCommandsRoundTrip:
    def test_tiny_pipeline(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run("synth", "--seed", "6", "--docs", "12", "--out", str(corpus))
        train = str(tmp_path / "c.train.jsonl")
        test = str(tmp_path / "c.test.jsonl")
        base = tmp_path / "base.txt"
        freq = tmp_path / "freq.txt"
        run("build-vocab", "--mode", "base", "--out", str(base))
        run("build-vocab", "--mode", "freq", "--corpus", train, "--base", str(base),
            "--min-count", "2", "--out", str(freq))
        ck0 = tmp_path / "m0.ckpt"
        assert run("pretrain", "--corpus", train, "--vocab", str(base),
                   "--steps", "4", "--layers", "1", "--d-model", "16",
                   "--n-heads", "2", "--d-ff", "32", "--max-positions", "64",
                   "--trace", str(tmp_path / "trace.csv"), "--out", str(ck0)) == 0
        assert (tmp_path / "trace.csv").read_text().startswith("step,loss,accuracy")
        ck1 = tmp_path / "m1.ckpt"
        assert run("resize", "--ckpt", str(ck0), "--old-vocab", str(base),
                   "--new-vocab", str(freq), "--out", str(ck1)) == 0
        ck2 = tmp_path / "m2.ckpt"
        assert run("finetune", "--ckpt", str(ck1), "--corpus", train,
                   "--vocab", str(freq), "--epochs", "1", "--out", str(ck2)) == 0
        pred = tmp_path / "pred.jsonl"
        assert run("predict", "--ckpt", str(ck2), "--vocab", str(freq),
                   "--corpus", test, "--out", str(pred)) == 0
        report = tmp_path / "report.tsv"
        assert run("evaluate", "--gold", test, "--pred", str(pred),
                   "--out", str(report)) == 0
        agg = tmp_path / "agg.tsv"
        rj = str(report.with_suffix(".json"))
        assert run("aggregate", "--group", f"tiny={rj},{rj}", "--out", str(agg)) == 0
        assert "Macro average" in agg.read_text()
        coords = tmp_path / "coords.csv"
        assert run("tsne", "--ckpt", str(ck2), "--vocab", str(freq),
                   "--corpus", train, "--perplexity", "5", "--iterations", "40",
                   "--out", str(coords)) == 0
        header, first = coords.read_text().splitlines()[:2]
        assert header == "token,label,x,y"
        assert len(first.split(",")) == 4


class TestGradcheckCommand:
    def test_zero_layer_fast_pass(self, capsys):
        code = run("gradcheck", "--layers", "0", "--d-model", "8", "--n-heads", "1",
                   "--d-ff", "8", "--vocab-size", "24", "--max-positions", "8",
                   "--coords", "16")
        assert code == 0
        assert "max_rel_error" in capsys.readouterr().out
