import csv

import numpy as np
import pytest

from snnvad import checkpoint as ck
from snnvad.audio import Normalizer, read_features, write_features, write_wav
from snnvad.cli import main
from snnvad.network import build_network


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    assert main(["synth", str(root / "wav"), "--snr", "0", "--snr", "10", "--duration", "1.5",
                 "--seed", "3"]) == 0
    assert main(["features", str(root / "wav"), str(root / "feat")]) == 0
    return root


@pytest.fixture(scope="module")
def trained_h1(corpus):
    out = corpus / "h1.svck"
    assert main(["train", "--data", str(corpus / "feat"), "--arch", "h1", "--epochs", "1",
                 "--batch-size", "32", "--seed", "5", "--out", str(out),
                 "--history", str(corpus / "hist.csv")]) == 0
    return out


def test_synth_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["synth", str(tmp_path / d), "--duration", "10", "--snr", "0", "--seed", "1"]) == 0
    for name in ("synth_snr+0dB_000.wav", "synth_snr+0dB_000.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = (tmp_path / "a" / "synth_snr+0dB_000.csv").read_text().splitlines()[1:]
    labels = np.array([int(r.split(",")[1]) for r in rows])
    assert abs(labels.sum() - 0.5 * labels.size) <= 1


def test_features_one_second(tmp_path):
    (tmp_path / "wav").mkdir()
    write_wav(tmp_path / "wav" / "x.wav", np.zeros(16000))
    assert main(["features", str(tmp_path / "wav"), str(tmp_path / "out")]) == 0
    assert read_features(tmp_path / "out" / "x.svfe").shape == (59, 128)


def test_features_empty_dir(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["features", str(tmp_path / "empty"), str(tmp_path / "out")]) == 0
    assert not (tmp_path / "out").exists()


def test_features_wrong_rate(tmp_path):
    (tmp_path / "wav").mkdir()
    write_wav(tmp_path / "wav" / "x.wav", np.zeros(44100), sample_rate=44100)
    assert main(["features", str(tmp_path / "wav"), str(tmp_path / "out")]) == 2


def test_train_h1_checkpoint(trained_h1, corpus):
    c = ck.load(trained_h1)
    assert c.model.n_weights == 26_000
    assert c.init_weights is not None and c.normalizer is not None
    assert (corpus / "hist.csv").read_text().startswith("epoch,")


def test_train_same_seed_identical(corpus, trained_h1, tmp_path):
    out = tmp_path / "again.svck"
    assert main(["train", "--data", str(corpus / "feat"), "--arch", "h1", "--epochs", "1",
                 "--batch-size", "32", "--seed", "5", "--out", str(out)]) == 0
    assert out.read_bytes() == trained_h1.read_bytes()


def test_train_h2(corpus, tmp_path):
    out = tmp_path / "h2.svck"
    assert main(["train", "--data", str(corpus / "feat"), "--arch", "h2", "--epochs", "1",
                 "--max-steps", "1", "--out", str(out)]) == 0
    c = ck.load(out)
    assert c.model.n_weights == 14_330 and c.model.T_total == 500


def test_train_config_file(corpus, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f'data = "{corpus / "feat"}"\nout = "{tmp_path / "c.svck"}"\nepochs = 0\n')
    assert main(["train", "--config", str(cfg)]) == 0
    assert (tmp_path / "c.svck").exists()
    assert main(["train", "--config", str(cfg), "--arch", "h1", "--loss", "dcf"]) == 0


def test_train_without_data():
    assert main(["train", "--out", "x.svck"]) == 1


def test_prune_default_schedule(trained_h1, corpus, tmp_path):
    assert main(["prune", str(trained_h1), "--data", str(corpus / "feat"), "--epochs", "1",
                 "--out-dir", str(tmp_path)]) == 0
    for frac in (70, 40, 20, 15):
        c = ck.load(tmp_path / f"h1_keep{frac:03d}.svck")
        mask = c.model.layers[0].mask
        assert int(mask.sum()) == round(frac / 100 * 25_600)
        assert not c.model.layers[0].weights[mask == 0].any()
        assert c.model.layers[1].mask is None


def test_prune_empty_and_bad_schedule(trained_h1, corpus, tmp_path):
    assert main(["prune", str(trained_h1), "--data", str(corpus / "feat"), "--schedule", "",
                 "--out-dir", str(tmp_path / "p")]) == 0
    assert not (tmp_path / "p").exists()
    assert main(["prune", str(trained_h1), "--data", str(corpus / "feat"), "--schedule", "0.4,0.7",
                 "--out-dir", str(tmp_path / "p")]) == 1


def _oracle_checkpoint(path):
    # every input excites every hidden neuron; only the speech readout listens
    w_out = np.zeros((200, 2))
    w_out[:, 1] = 1.0
    m = build_network([128, 200, 2], 10.0, 5.0, 100, weights=[np.full((128, 200), 0.1), w_out], name="h1")
    ck.save(ck.Checkpoint(m, None, Normalizer(0.0, 1.0)), path)


def _oracle_data(root, labels):
    root.mkdir()
    feats = np.where(np.asarray(labels)[:, None] == 1, 1.0, 0.0) * np.ones((1, 128))
    write_features(root / "u.svfe", feats)
    with open(root / "u.csv", "w") as fh:
        fh.write("frame_index,label\n" + "".join(f"{i},{y}\n" for i, y in enumerate(labels)))


def test_eval_oracle_is_perfect(tmp_path, capsys):
    labels = [0] * 20 + [1] * 30 + [0] * 15 + [1] * 12
    _oracle_data(tmp_path / "d", labels)
    _oracle_checkpoint(tmp_path / "o.svck")
    assert main(["eval", str(tmp_path / "o.svck"), "--data", str(tmp_path / "d"),
                 "--out-dir", str(tmp_path / "r"), "--sweep"]) == 0
    rows = {r[1]: float(r[2]) for r in csv.reader(open(tmp_path / "r" / "report.csv")) if r[0] != "metric"}
    assert rows["dcf"] == 0.0 and rows["hter"] == 0.0
    assert "DCF 0.0000" in capsys.readouterr().out
    roc = list(csv.DictReader(open(tmp_path / "r" / "roc.csv")))
    hits = [float(r["hit_rate"]) for r in roc]
    assert all(b <= a for a, b in zip(hits, hits[1:]))


def test_roc_command(tmp_path):
    _oracle_data(tmp_path / "d", [0] * 20 + [1] * 20)
    _oracle_checkpoint(tmp_path / "o.svck")
    assert main(["roc", str(tmp_path / "o.svck"), "--data", str(tmp_path / "d"),
                 "--out", str(tmp_path / "roc.csv"), "--points", "11"]) == 0
    assert len((tmp_path / "roc.csv").read_text().splitlines()) == 12


def test_eval_missing_labels(tmp_path):
    (tmp_path / "d").mkdir()
    write_features(tmp_path / "d" / "u.svfe", np.zeros((20, 128)))
    _oracle_checkpoint(tmp_path / "o.svck")
    assert main(["eval", str(tmp_path / "o.svck"), "--data", str(tmp_path / "d"),
                 "--out-dir", str(tmp_path / "r")]) == 2


@pytest.mark.parametrize("preset,uw", [("truenorth-dense", 33.045), ("truenorth-sparse", 25.177)])
def test_energy_presets(trained_h1, corpus, capsys, preset, uw):
    assert main(["energy", str(trained_h1), "--data", str(corpus / "feat"), "--preset", preset,
                 "--max-frames", "20"]) == 0
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if l.startswith("estimated power:"))
    assert float(line.split()[2]) == pytest.approx(uw, abs=0.006)
    assert out.startswith("rates per layer: 1.000 ")


def test_energy_zero_weights(tmp_path, corpus):
    m = build_network([128, 200, 2], 10.0, 5.0, 100, weights=[np.zeros((128, 200)), np.zeros((200, 2))],
                      name="h1")
    ck.save(ck.Checkpoint(m, None, Normalizer(-30.0, 10.0)), tmp_path / "z.svck")
    assert main(["energy", str(tmp_path / "z.svck"), "--data", str(corpus / "feat"),
                 "--out", str(tmp_path / "e.csv")]) == 0
    rows = list(csv.reader(open(tmp_path / "e.csv")))
    assert rows[0] == ["layer", "rate", "active_synapses", "sops"]
    assert float(rows[1][1]) == 1.0
    assert float(rows[2][1]) == 0.0
    assert rows[-1][0] == "power_w"


def test_energy_unknown_preset(trained_h1, corpus):
    assert main(["energy", str(trained_h1), "--data", str(corpus / "feat"), "--preset", "x"]) == 1


def test_inspect(trained_h1, capsys):
    assert main(["inspect", str(trained_h1)]) == 0
    out = capsys.readouterr().out
    assert "weights: 26000" in out and "init vector stored: True" in out
