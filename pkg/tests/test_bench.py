import numpy as np
import pytest

from rbds import bench
from rbds.bench import (ExperimentConfig, ExperimentReport, RunRecord, derive_seed,
                        read_report_csv, report_csv_text, run_experiment, splitmix64, sweep)
from rbds.solver import ConfigError

SMALL = {
    "repetitions": "2",
    "methods": "rbds, lrrs",
    "data.classes": "3",
    "data.dim": "20",
    "data.rank": "2",
    "data.samples_per_class": "12",
    "solver.lambda": "1.0",
    "solver.atoms_per_class": "3",
    "solver.max_iters": "200",
}


def test_splitmix64_reference_values():
    # first outputs of the reference generator seeded with 0
    state, out = 0, []
    for _ in range(3):
        out.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_derive_seed_distinct_streams():
    seeds = {derive_seed(0, r, s) for r in range(10) for s in range(5)}
    assert len(seeds) == 50
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert all(0 <= s < 2**64 for s in seeds)


def test_config_parsing_and_hash():
    text = "seed = 3  # comment\nmethods = rbds\nrbds.alpha = 2.5\nsolver.lambda = 0.4\n"
    cfg = ExperimentConfig.from_text(text)
    assert cfg.seed == 3 and cfg.methods == ("rbds",)
    assert cfg.solvers["rbds"].alpha == 2.5 and cfg.solvers["rbds"].lam == 0.4
    assert len(cfg.config_hash()) == 16
    assert ExperimentConfig.from_text(text).config_hash() == cfg.config_hash()
    assert cfg.with_overrides(seed=4).config_hash() != cfg.config_hash()


@pytest.mark.parametrize("bad", [{"methods": ""}, {"methods": "foo"}, {"nope": "1"},
                                 {"repetitions": "0"}, {"split": "1.0"}, {"eta": "0"},
                                 {"train.kind": "blur"}, {"seed": "x"}])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(bad)


def test_line_without_equals():
    with pytest.raises(ConfigError, match="line 2"):
        ExperimentConfig.from_text("seed = 1\nbogus\n")


def test_split_keeps_classes(small_dataset):
    tr, te = bench.split_dataset(small_dataset, 0.5, 1)
    assert tr.n_samples + te.n_samples == small_dataset.n_samples
    assert set(tr.labels) == set(te.labels) == {1, 2, 3}


@pytest.fixture(scope="module")
def small_report():
    cfg = ExperimentConfig.from_mapping(SMALL)
    return cfg, run_experiment(cfg, figures=False)


def test_report_structure(small_report):
    cfg, rep = small_report
    assert len(rep.runs) == 4
    rows = rep.summary()
    assert [r["method"] for r in rows] == ["rbds", "lrrs"]
    for r in rows:
        assert r["config_hash"] == cfg.config_hash()
        assert 0 <= r["mean_accuracy"] <= 1
        accs = [x.accuracy for x in rep.runs if x.method == r["method"]]
        assert r["mean_accuracy"] == pytest.approx(np.mean(accs), abs=1e-15)


def test_report_deterministic(small_report):
    cfg, rep = small_report
    again = run_experiment(cfg, figures=False)
    assert report_csv_text(again) == report_csv_text(rep)


def test_clean_easy_regime_accuracy():
    # offset 2 puts every class mean well away from the origin, so the
    # classes are linearly separable
    cfg = ExperimentConfig.from_mapping({"methods": "rbds", "data.rank": "2", "repetitions": "3",
                                         "data.coef_offset": "2.0", "solver.lambda": "1.0"})
    assert run_experiment(cfg, figures=False).mean_accuracy("rbds") >= 0.95


def test_report_csv_round_trip(tmp_path, small_report):
    _, rep = small_report
    p = tmp_path / "report.csv"
    p.write_text(report_csv_text(rep))
    back = read_report_csv(p)
    for a, b in zip(rep.summary(), back):
        for k, v in a.items():
            if isinstance(v, float):
                assert abs(v - b[k]) <= 1e-12
            else:
                assert v == b[k]


def test_single_row_and_order():
    rec = RunRecord("lrrs", 0, 1, 0.5, 10, True, True, 0.1, 0.0)
    rep = ExperimentReport("h", ("rbds", "lrrs"), [rec])
    assert len(rep.summary()) == 1
    rep.runs.append(RunRecord("rbds", 0, 1, 0.7, 10, True, True, 0.1, 0.0))
    assert [r["method"] for r in rep.summary()] == ["rbds", "lrrs"]
    assert report_csv_text(rep).splitlines()[0] == ",".join(bench.REPORT_COLUMNS)


def test_divergence_recorded_not_fatal(monkeypatch):
    from rbds.solver import DivergenceError

    def boom(*a, **k):
        raise DivergenceError(3, (np.inf,) * 3)
    monkeypatch.setattr(bench, "fit_rbds", boom)
    cfg = ExperimentConfig.from_mapping({**SMALL, "repetitions": "1"})
    rep = run_experiment(cfg, figures=False)
    bad = [r for r in rep.runs if r.method == "rbds"][0]
    assert bad.status == "diverged" and not bad.converged
    assert [r for r in rep.runs if r.method == "lrrs"][0].status == "ok"


def test_sweep_order_and_errors(tmp_path):
    cfg = ExperimentConfig.from_mapping({**SMALL, "repetitions": "1", "methods": "lrrs"})
    reps = sweep(cfg, "train.fraction", ["0", "0.1", "0.2"], tmp_path, figures=False)
    assert len(reps) == 3
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert [ln.split(",")[1] for ln in lines[1:]] == ["0", "0.1", "0.2"]
    with pytest.raises(ConfigError):
        sweep(cfg, "train.fraction", [])
    with pytest.raises(ConfigError):
        sweep(cfg, "methods", ["rbds"])


@pytest.mark.slow
def test_sweep_pixel_fraction_trend():
    cfg = ExperimentConfig.from_file("configs/pixel20.cfg", {"methods": "rbds"})
    fractions = ["0.0", "0.1", "0.2", "0.3", "0.4", "0.5"]
    overrides = [{"train.fraction": f, "test.fraction": f} for f in fractions]
    accs = [run_experiment(cfg.with_overrides(**o), figures=False).mean_accuracy("rbds")
            for o in overrides]
    for a, b in zip(accs, accs[1:]):
        assert b <= a + 0.05


def test_kernel_threads(monkeypatch):
    monkeypatch.setenv("RBDS_THREADS", "1")
    with bench.kernel_threads():
        pass
    monkeypatch.setenv("RBDS_THREADS", "0")
    with bench.kernel_threads():
        pass
