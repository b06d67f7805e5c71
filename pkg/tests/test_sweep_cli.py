import csv
import math

import numpy as np
import pytest

from hbtc import fileio
from hbtc.cli import (
    build_gen_config,
    build_solver_config,
    main,
    parse_config,
)
from hbtc.model import BlockStructure
from hbtc.solver import ConfigError, SolverConfig
from hbtc.sweep import (
    AGG_FIELDS,
    ROW_FIELDS,
    SweepSpec,
    _configs_for_point,
    _method_setup,
    run_sweep,
    write_aggregates_csv,
    write_rows_csv,
)
from hbtc.synth import GenConfig


def small_spec(**overrides):
    kwargs = dict(
        swept="snr_db",
        values=(10.0, 20.0),
        trials=2,
        base_gen=GenConfig(dims=(8, 8, 8), structure=BlockStructure((2,)),
                           sample_ratio=0.5, seed=100),
        base_solver=SolverConfig(max_iterations=5, tol_rel_change=0.0),
        methods=("btd_als",),
    )
    kwargs.update(overrides)
    return SweepSpec(**kwargs)


class TestSweepSpec:
    def test_valid(self):
        spec = small_spec()
        assert spec.values == (10.0, 20.0)

    def test_bad_swept_variable(self):
        with pytest.raises(ConfigError, match="swept"):
            small_spec(swept="noise_floor")

    def test_values_must_increase(self):
        with pytest.raises(ConfigError, match="increasing"):
            small_spec(values=(20.0, 10.0))
        with pytest.raises(ConfigError, match="nonempty"):
            small_spec(values=())

    def test_trials_positive(self):
        with pytest.raises(ConfigError, match="trials"):
            small_spec(trials=0)

    def test_methods_validated(self):
        with pytest.raises(ConfigError, match="methods"):
            small_spec(methods=("btd_als", "gradient_descent"))


class TestPointConfig:
    def test_seed_discipline(self):
        spec = small_spec()
        gen, sol = _configs_for_point(spec, 10.0, trial=3)
        assert gen.seed == 103
        assert sol.seed == 103
        assert gen.snr_db == 10.0

    def test_swept_sample_ratio(self):
        spec = small_spec(swept="sample_ratio", values=(0.1, 0.2))
        gen, _ = _configs_for_point(spec, 0.2, trial=0)
        assert gen.sample_ratio == 0.2

    def test_swept_lambda(self):
        spec = small_spec(swept="lambda", values=(0.1, 1.0))
        _, sol = _configs_for_point(spec, 0.1, trial=0)
        assert sol.lam == 0.1

    def test_method_setup(self):
        s = BlockStructure((3, 2))
        sol = SolverConfig()
        s2, cfg = _method_setup("cpd_nls", s, sol)
        assert s2.L == (1,) * 5
        assert cfg.backend == "gn"
        s3, cfg2 = _method_setup("btd_als", s, sol)
        assert s3 is s
        assert cfg2.backend == "als"


class TestRunSweep:
    def test_rows_and_aggregates(self):
        spec = small_spec(methods=("btd_als", "cpd_als"))
        rows, aggs = run_sweep(spec, threads=1)
        assert len(rows) == 2 * 2 * 2  # methods x values x trials
        keys = [(r["method"], r["swept_value"], r["trial"]) for r in rows]
        assert keys == sorted(keys)
        for r in rows:
            assert set(r) == set(ROW_FIELDS)
            assert 0.0 <= r["rlne"] <= 1.0
            assert r["seed"] == 100 + r["trial"]
        for a in aggs:
            errs = [r["rlne"] for r in rows
                    if r["method"] == a["method"]
                    and r["swept_value"] == a["swept_value"]]
            assert a["mean_rlne"] == pytest.approx(np.mean(errs))

    def test_deterministic_across_thread_counts(self):
        spec = small_spec()
        rows1, _ = run_sweep(spec, threads=1)
        rows2, _ = run_sweep(spec, threads=2)
        for r1, r2 in zip(rows1, rows2):
            assert r1["rlne"] == r2["rlne"]
            assert r1["seed"] == r2["seed"]

    def test_solver_failure_becomes_row(self):
        # F exceeds J*K, so every solve raises and is recorded, not raised
        spec = small_spec(
            base_gen=GenConfig(dims=(2, 2, 2), structure=BlockStructure((5,)),
                               sample_ratio=1.0, seed=0),
            values=(10.0,), trials=1)
        rows, _ = run_sweep(spec, threads=1)
        assert len(rows) == 1
        assert rows[0]["rlne"] == 1.0
        assert rows[0]["note"] != ""

    def test_csv_writers(self, tmp_path):
        spec = small_spec(values=(10.0,), trials=1)
        rows, aggs = run_sweep(spec, threads=1)
        write_rows_csv(tmp_path / "rows.csv", rows)
        write_aggregates_csv(tmp_path / "aggs.csv", aggs)
        with open(tmp_path / "rows.csv") as fh:
            got = list(csv.DictReader(fh))
        assert tuple(got[0].keys()) == ROW_FIELDS
        assert float(got[0]["rlne"]) == pytest.approx(rows[0]["rlne"])
        with open(tmp_path / "aggs.csv") as fh:
            got = list(csv.DictReader(fh))
        assert tuple(got[0].keys()) == AGG_FIELDS


class TestConfigParsing:
    def test_basic_file(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("I = 8\nJ=8\nK = 8  # comment\n\n# full line comment\n"
                     "L = 2,2\nsnr_db = inf\nlambda = 0.5\n")
        cfg = parse_config(p)
        assert cfg["I"] == "8" and cfg["L"] == "2,2"
        gen = build_gen_config(cfg)
        assert gen.dims == (8, 8, 8)
        assert math.isinf(gen.snr_db)
        sol = build_solver_config(cfg)
        assert sol.lam == 0.5

    def test_unknown_key_named(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("wavelength = 3\n")
        with pytest.raises(ConfigError, match="wavelength"):
            parse_config(p)

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("just some words\n")
        with pytest.raises(ConfigError, match="line 1"):
            parse_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            parse_config(tmp_path / "nope.cfg")

    def test_defaults(self):
        sol = build_solver_config({})
        assert sol.lam == 10.0
        assert sol.backend == "als"
        gen = build_gen_config({})
        assert gen.dims == (20, 20, 20)


class TestCliEndToEnd:
    @pytest.fixture
    def workdir(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("I = 10\nJ = 10\nK = 10\nL = 2,2\nsample_ratio = 0.4\n"
                       "seed = 3\nmax_iterations = 60\n")
        return tmp_path, cfg

    def test_gen_complete_eval(self, workdir, capsys):
        tmp_path, cfg = workdir
        assert main(["gen", "--config", str(cfg),
                     "--out", str(tmp_path / "gt")]) == 0
        for name in ("clean.ct3", "noisy.ct3", "mask.cm3", "factors.btd1"):
            assert (tmp_path / "gt" / name).exists()

        assert main(["complete", "--config", str(cfg),
                     "--tensor", str(tmp_path / "gt" / "noisy.ct3"),
                     "--mask", str(tmp_path / "gt" / "mask.cm3"),
                     "--out", str(tmp_path / "run")]) == 0
        assert (tmp_path / "run" / "completed.ct3").exists()
        with open(tmp_path / "run" / "trace.csv") as fh:
            trace = list(csv.reader(fh))
        assert trace[0] == ["iter", "f1", "f2", "f_lag", "beta", "rel_change"]
        assert len(trace) > 1

        capsys.readouterr()
        assert main(["eval",
                     "--estimate", str(tmp_path / "run" / "completed.ct3"),
                     "--clean", str(tmp_path / "gt" / "clean.ct3")]) == 0
        out = capsys.readouterr().out.strip()
        assert 0.0 <= float(out) < 0.1

    def test_solver_flags_override(self, workdir, capsys):
        tmp_path, cfg = workdir
        main(["gen", "--config", str(cfg), "--out", str(tmp_path / "gt")])
        assert main(["complete", "--config", str(cfg),
                     "--tensor", str(tmp_path / "gt" / "noisy.ct3"),
                     "--mask", str(tmp_path / "gt" / "mask.cm3"),
                     "--out", str(tmp_path / "run2"),
                     "--iters", "2", "--lambda", "0.5"]) == 0
        with open(tmp_path / "run2" / "trace.csv") as fh:
            trace = list(csv.reader(fh))
        assert len(trace) == 3  # header + 2 iterations

    def test_config_errors_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("unknown_field = 1\n")
        assert main(["gen", "--config", str(bad), "--out", str(tmp_path)]) == 2
        assert "unknown_field" in capsys.readouterr().err

        no_l = tmp_path / "no_l.cfg"
        no_l.write_text("I = 4\n")
        assert main(["complete", "--config", str(no_l),
                     "--tensor", "x", "--mask", "y",
                     "--out", str(tmp_path)]) == 2

    def test_eval_shape_mismatch_exit_2(self, tmp_path):
        fileio.write_ct3(tmp_path / "a.ct3", np.ones((2, 2, 2), dtype=complex))
        fileio.write_ct3(tmp_path / "b.ct3", np.ones((3, 3, 3), dtype=complex))
        assert main(["eval", "--estimate", str(tmp_path / "a.ct3"),
                     "--clean", str(tmp_path / "b.ct3")]) == 2

    def test_sweep_command(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text("I = 8\nJ = 8\nK = 8\nL = 2\nsample_ratio = 0.5\n"
                       "seed = 0\nmax_iterations = 5\nswept = snr_db\n"
                       "values = 10,20\ntrials = 1\nmethods = btd_als\n")
        assert main(["sweep", "--config", str(cfg),
                     "--out", str(tmp_path / "sw"), "--threads", "1"]) == 0
        with open(tmp_path / "sw" / "rows.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert (tmp_path / "sw" / "aggregates.csv").exists()
