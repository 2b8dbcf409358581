import itertools
import xml.etree.ElementTree as ET

import numpy as np
import pytest

import fcprobe


def test_covariance_and_tangent_embedding():
    rng = np.random.default_rng(0)
    series = rng.normal(size=(200, 6))
    cov = fcprobe.estimate_covariance(series, 0.05)
    assert cov.shape == (6, 6)
    assert np.allclose(cov, cov.T)
    assert np.allclose(fcprobe.sym_expm(fcprobe.spd_logm(cov)), cov, atol=1e-10)
    feats = fcprobe.tangent_embed(cov, cov)
    assert feats.shape == (21,)
    assert np.abs(feats).max() < 1e-10
    assert fcprobe.upper_triangle_pairs(3) == [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def test_auroc_matches_pair_count():
    rng = np.random.default_rng(1)
    y = [0, 1] + list(rng.integers(0, 2, 60))
    s = list(rng.integers(0, 4, 62).astype(float))
    wins = sum(
        (1.0 if a > b else 0.5 if a == b else 0.0)
        for (ya, a), (yb, b) in itertools.product(zip(y, s), repeat=2)
        if ya == 1 and yb == 0
    )
    pairs = sum(1 for ya, yb in itertools.product(y, repeat=2) if ya == 1 and yb == 0)
    assert fcprobe.auroc(y, s) == wins / pairs


def test_split_sizes_and_errors():
    y = [0] * 497 + [1] * 418
    train, test = fcprobe.stratified_split(y, 0.2, 1)
    assert len(test) == 183
    assert sorted(train + test) == list(range(915))
    with pytest.raises(fcprobe.FcprobeError) as err:
        fcprobe.auroc([1, 1, 1], [0.1, 0.2, 0.3])
    assert err.value.kind == "Undefined"
    folds = fcprobe.kfold_indices([0] * 5 + [1] * 4, 3, 2)
    assert [len(v) for _, v in folds] == [3, 3, 3]


def test_train_predict_and_importance(tmp_path):
    rng = np.random.default_rng(2)
    n = 300
    y = np.arange(n) % 2
    x = rng.normal(size=(n, 10))
    x[:, 0] = np.where(y == 1, 1.0, -1.0) + 0.5 * rng.normal(size=n)
    cfg = fcprobe.ModelConfig()
    cfg.n_hidden_layers = 1
    cfg.neurons_per_layer = 16
    cfg.learning_rate = 1e-2
    cfg.max_epochs = 40
    model = fcprobe.train(cfg, x[:200], list(y[:200]), x[200:], list(y[200:]))
    p = model.predict_proba(x[200:])
    assert p.shape == (100,)
    assert fcprobe.auroc(list(y[200:]), list(p)) > 0.9

    imp = fcprobe.pfi(model, x[200:], list(y[200:]), repeats=3, seed=4)
    assert int(np.argmax(imp)) == 0
    assert np.array_equal(imp, fcprobe.pfi(model, x[200:], list(y[200:]), repeats=3, seed=4, workers=2))

    model.save(tmp_path / "model.json")
    again = fcprobe.load_model(tmp_path / "model.json")
    assert np.array_equal(again.predict_proba(x), model.predict_proba(x))


def test_zscores():
    raw = np.zeros(101)
    raw[0] = 1.0
    z = fcprobe.zscores(raw)
    assert z[0] == pytest.approx(10.0)
    assert abs(z.sum()) < 1e-9
    top = fcprobe.zscore_rank(np.arange(30, dtype=float), 15)
    assert len(top) == 15
    assert [r["feature_index"] for r in top[:3]] == [29, 28, 27]
    with pytest.raises(fcprobe.FcprobeError):
        fcprobe.zscores(np.ones(5))


def test_kde_peaks():
    trials = [(3, 16, 0.9)] * 8 + [(4, 16, 0.9), (3, 32, 0.9)]
    trials += [(2, 256, 0.5)] * 8 + [(1, 256, 0.5), (2, 128, 0.5)]
    trials += [(l, n, 0.7) for l, n in itertools.product([1, 2, 4, 5, 6], [8, 32, 64, 512])][:30]
    report = fcprobe.kde_peaks(trials, 0.2)
    assert (report["peaks"]["top"]["layers"], report["peaks"]["top"]["neurons"]) == (3, 16)
    assert (report["peaks"]["bottom"]["layers"], report["peaks"]["bottom"]["neurons"]) == (2, 256)


def test_pipeline_commands(tmp_path):
    settings = {
        "out_dir": str(tmp_path),
        "seed": 3,
        "regions": 6,
        "n_control": 24,
        "n_case": 24,
        "timepoints": 50,
        "n_effects": 2,
        "effect_delta": 0.25,
        "n_trials": 10,
        "k": 2,
        "layers_choices": [1],
        "neurons_choices": [8, 16],
        "max_epochs": 10,
        "repeats": 2,
        "top_k": 5,
    }
    assert fcprobe.default_settings()["n_trials"] == 50
    manifest = fcprobe.run("generate", settings)
    assert manifest.exists()
    assert fcprobe.run("features", settings) == 21
    assert fcprobe.run("search", settings) == 10
    assert 0.0 <= fcprobe.run("train", settings) <= 1.0
    records = fcprobe.run("pfi", settings)
    assert len(records) == 5
    assert all(r["ba_pair"] is not None for r in records)

    for name in ("kde.svg", "importance.svg"):
        root = ET.parse(tmp_path / name).getroot()
        assert root.tag.endswith("svg")
    bars = [e for e in ET.parse(tmp_path / "importance.svg").iter() if e.get("class") == "bar"]
    assert len(bars) == 5
    peaks = [e for e in ET.parse(tmp_path / "kde.svg").iter() if e.get("class") == "peak"]
    assert len(peaks) == 2

    table = str(tmp_path / "importance.csv")
    report = fcprobe.run("compare", {"out_dir": str(tmp_path / "cmp"), "compare_inputs": [table, table]})
    assert report["common_pairs"] == report["per_ranking"][0]

    with pytest.raises(fcprobe.FcprobeError, match="pipeline.k"):
        fcprobe.run("search", dict(settings, k=1))
    with pytest.raises(fcprobe.FcprobeError, match="unknown field"):
        fcprobe.run("search", dict(settings, bogus=1))
