import csv
import filecmp
import subprocess
import sys

import pytest
import yaml

from cilm.cli import load_config, load_fmd, main


def _write(path, obj):
    path.write_text(yaml.safe_dump(obj))
    return str(path)


def _tree(d):
    return {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    sim = _write(root / "sim.yaml", {"simulate": {"scenarios": ["low3"], "n_populations": 1,
                                                  "n": 60, "t_max": 20}})
    assert main(["simulate", "--config", sim, "--seed", "11", "--out", str(root / "sim")]) == 0
    models = [{"name": "silm"},
              {"name": "m2", "spark": "m2", "composite": True,
               "assignment": "clu/assignment.csv", "centroids": "clu/centroids.csv"}]
    cfg = _write(root / "run.yaml", {
        "data": {"population": "sim/low3_00_population.csv", "events": "sim/low3_00_events.csv",
                 "t_max": 20},
        "cluster": {"method": "dpmm", "iters": 300},
        "models": models, "mcmc": {"iters": 300}, "assess": {"n_sims": 30},
        "forecast": {"from_t": 5, "n_sims": 30}})
    for cmd, out in (("cluster", "clu"), ("fit", "fit"), ("assess", "fit"), ("forecast", "fc")):
        assert main([cmd, "--config", cfg, "--seed", "3", "--out", str(root / out)]) == 0
    return root, cfg


def test_simulate_outputs(pipeline):
    root, _ = pipeline
    sim = root / "sim"
    assert (sim / "low3_00_population.csv").read_text().startswith("id,x,y\n")
    assert (sim / "low3_00_events.csv").read_text().startswith("id,infection_time,removal_time\n")
    assert len(_rows(sim / "simulations.csv")) == 1


def test_pipeline_outputs(pipeline):
    root, _ = pipeline
    assert _rows(root / "clu" / "assignment.csv")[0].keys() == {"id", "cluster"}
    assert list(_rows(root / "clu" / "centroids.csv")[0]) == ["cluster", "x", "y"]
    head = (root / "fit" / "trace_m2.csv").read_text().splitlines()[0]
    assert head == "iter,alpha,beta,beta_tilde,log_post"
    assert len(_rows(root / "fit" / "trace_silm.csv")) == 300
    report = _rows(root / "fit" / "assessment.csv")
    assert [r["model"] for r in report] == ["silm", "m2"]
    assert {"waic", "lppd", "p_waic"} <= set(report[0])
    assert list(_rows(root / "fit" / "curves_m2.csv")[0])[:4] == ["t", "lower", "median", "upper"]
    fc = _rows(root / "fc" / "forecast_silm.csv")
    assert fc[0]["t"] == "6" and fc[-1]["t"] == "20"


def test_rerun_is_byte_identical(pipeline, tmp_path):
    root, cfg = pipeline
    for cmd, out in (("cluster", "clu"), ("fit", "fit"), ("assess", "fit"), ("forecast", "fc")):
        assert main([cmd, "--config", cfg, "--seed", "3", "--out", str(tmp_path / out)]) == 0
    for out in ("clu", "fit", "fc"):
        assert _tree(root / out) == _tree(tmp_path / out)


def test_seed_changes_output(pipeline, tmp_path):
    root, cfg = pipeline
    assert main(["fit", "--config", cfg, "--seed", "4", "--out", str(tmp_path / "f")]) == 0
    assert not filecmp.cmp(root / "fit" / "trace_silm.csv", tmp_path / "f" / "trace_silm.csv",
                           shallow=False)


def test_bench_records_workers(tmp_path):
    cfg = _write(tmp_path / "b.yaml", {"bench": {"n": 200, "k_values": [1, 4], "reps": 2,
                                                 "warmup": 1}})
    assert main(["bench", "--config", cfg, "--workers", "2", "--out", str(tmp_path / "b")]) == 0
    rows = _rows(tmp_path / "b" / "bench.csv")
    assert [r["K"] for r in rows] == ["1", "4"] and all(r["workers"] == "2" for r in rows)


def test_replicate_study_is_deterministic(tmp_path):
    cfg = _write(tmp_path / "s.yaml", {"study": {
        "scenarios": ["csr"], "n_replicates": 2, "n": 40, "t_max": 15, "iters": 100,
        "models": ["silm", "m2"], "clusterings": ["kmeans3"], "n_sims": 20}})
    for out, workers in (("a", "1"), ("b", "2")):
        assert main(["replicate-study", "--config", cfg, "--workers", workers,
                     "--out", str(tmp_path / out)]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    assert len(_rows(tmp_path / "a" / "study.csv")) == 4


@pytest.mark.parametrize("content, message", [
    ({"bogus": 1}, "unknown keys"),
    ({"mcmc": {"iterations": 5}}, "unknown keys"),
    ({"assess": {"n_sims": 5}}, "n_sims"),
    ({"data": {"population": "missing.csv", "events": "missing.csv", "t_max": 5}}, "not found"),
    ({"models": [{"name": "a", "spark": "m2", "composite": True}],
      "data": {"population": "p.csv", "events": "e.csv", "t_max": 5}}, "needs an assignment"),
])
def test_validation_errors(tmp_path, capsys, content, message):
    (tmp_path / "p.csv").write_text("id,x,y\n0,0,0\n1,1,1\n")
    (tmp_path / "e.csv").write_text("id,infection_time,removal_time\n0,0,\n1,,\n")
    cfg = _write(tmp_path / "c.yaml", content)
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) != 0
    err = capsys.readouterr().err.strip()
    assert message in err and len(err.splitlines()) == 1


def test_malformed_csv_is_a_diagnostic(tmp_path, capsys):
    (tmp_path / "p.csv").write_text("id,x,y\n0,0,zero\n1,1,1\n")
    (tmp_path / "e.csv").write_text("id,infection_time,removal_time\n0,0,\n1,,\n")
    cfg = _write(tmp_path / "c.yaml", {"data": {"population": "p.csv", "events": "e.csv",
                                                "t_max": 5}})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "malformed value" in capsys.readouterr().err


def test_bad_flags(tmp_path, capsys):
    assert main(["simulate", "--seed", "-1", "--out", str(tmp_path)]) != 0
    assert main(["simulate", "--workers", "0", "--out", str(tmp_path)]) != 0
    assert main(["fit", "--config", str(tmp_path / "none.yaml")]) != 0


def test_console_script_exit_code(tmp_path):
    bad = _write(tmp_path / "c.yaml", {"nope": 1})
    proc = subprocess.run([sys.executable, "-m", "cilm.cli", "fit", "--config", bad],
                          capture_output=True, text=True)
    assert proc.returncode != 0 and "unknown keys" in proc.stderr


def test_default_config():
    cfg = load_config(None)
    assert len(cfg.simulate.scenarios) == 7 and cfg.simulate.n_populations == 10
    assert cfg.mcmc.iters == 2000


def test_fmd_window(tmp_path):
    path = tmp_path / "fmd.csv"
    path.write_text("id,x,y,infection_day,removal_day\n"
                    "0,0,0,3,8\n"       # removed before the window: dropped
                    "1,1,0,9,14\n"      # exposed before the window: clipped to day 0
                    "2,2,0,12,40\n"     # removal after the window: unobserved
                    "3,3,0,,\n"
                    "4,4,0,35,38\n")    # infection after the window: unobserved
    pop, rec, kept = load_fmd(path, (10, 30))
    assert kept == [1, 2, 3, 4]
    assert rec.t_max == 20
    assert rec.infection_time == (0, 2, None, None)
    assert rec.removal_time == (4, None, None, None)
    assert pop.n == 4


def test_fmd_seir_pipeline(tmp_path):
    import numpy as np

    from cilm.core import SEIR, ModelParams, Population
    from cilm.simulate import SimConfig, simulate_seir

    rng = np.random.default_rng(0)
    pop = Population(rng.uniform(0, 15, (60, 2)))
    rec = simulate_seir(pop, SimConfig(ModelParams(1.2, 1.5), n=60, t_max=40, seed=2,
                                       frame=SEIR, latent_period=5, infectious_period=4,
                                       initial_count=2))
    lines = ["id,x,y,infection_day,removal_day"]
    for i, (x, y) in enumerate(pop.coords):
        a, b = rec.infection_time[i], rec.removal_time[i]
        b = None if a is None else a + 9
        lines.append(f"{i},{float(x)!r},{float(y)!r},{'' if a is None else a},{'' if b is None else b}")
    (tmp_path / "fmd.csv").write_text("\n".join(lines) + "\n")
    data = {"format": "fmd", "events": "fmd.csv", "window": [0, 30], "frame": "SEIR",
            "latent_period": 5, "infectious_period": 4}
    cfg = _write(tmp_path / "c.yaml", {
        "data": data, "cluster": {"method": "kmeans", "k": 3},
        "models": [{"name": "m2", "spark": "m2", "composite": True,
                    "assignment": "clu/assignment.csv", "centroids": "clu/centroids.csv"}],
        "mcmc": {"iters": 100}})
    assert main(["cluster", "--config", cfg, "--out", str(tmp_path / "clu")]) == 0
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "fit")]) == 0
    assert len(_rows(tmp_path / "fit" / "trace_m2.csv")) == 100
