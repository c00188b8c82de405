import csv

import numpy as np
import pytest

from adisplit import experiments, linsolve, oracle, steppers
from adisplit.cli import main
from adisplit.experiments import (
    ConvergenceReport,
    ExperimentConfig,
    ReferenceSpec,
    RowResult,
    coefficient_pair,
    measure_error,
    observed_order,
    prepare_initial_data,
    run_convergence,
    steps_for,
    verify_assumptions,
    worker_count,
)
from adisplit.grid import Field, Grid, discrete_inner_product, discrete_norm, \
    interpolate, max_norm, prolong_to, write_field
from adisplit.operators import TridiagonalMatrix, assemble_split_operator
from adisplit.steppers import SchemeKind


def constant_operator(m):
    lam, mu = coefficient_pair("constant")
    return assemble_split_operator(lam, mu, Grid(m))


def paper_operator(m):
    lam, mu = coefficient_pair("paper")
    return assemble_split_operator(lam, mu, Grid(m))


class TestHelpers:
    def test_coefficient_pair_paper(self):
        lam, mu = coefficient_pair("paper")
        assert lam(0.0) == pytest.approx(0.1)
        assert mu(0.0) == pytest.approx(2.1)
        assert mu(0.5) == pytest.approx(0.1)

    def test_coefficient_pair_constant(self):
        lam, mu = coefficient_pair("constant")
        assert lam(0.3) == 1.0 and mu(0.7) == 1.0

    def test_coefficient_pair_unknown(self):
        with pytest.raises(ValueError):
            coefficient_pair("quadratic")

    def test_steps_for_exact_divisors(self):
        assert steps_for(0.5, 1.0 / 16) == 8
        assert steps_for(0.5, 2.0 ** -13) == 4096
        assert steps_for(1.0, 0.125) == 8

    @pytest.mark.parametrize("k", [0.3, 0.7, 1.1])
    def test_steps_for_nondivisor(self, k):
        with pytest.raises(ValueError):
            steps_for(0.5, k)

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("THREADS", "3")
        assert worker_count() == 3

    def test_worker_count_invalid(self, monkeypatch):
        monkeypatch.setenv("THREADS", "0")
        with pytest.raises(ValueError):
            worker_count()

    def test_worker_count_default(self, monkeypatch):
        monkeypatch.delenv("THREADS", raising=False)
        assert worker_count() >= 1


class TestObservedOrder:
    def test_exact_halving(self):
        assert observed_order([4.0, 1.0]) == [2.0]
        assert observed_order([8.0, 4.0, 2.0]) == [1.0, 1.0]

    def test_published_pr_errors(self):
        orders = observed_order(experiments.PR_REFERENCE_ERRORS)
        assert all(1.5 <= p <= 2.3 for p in orders)

    def test_too_short(self):
        with pytest.raises(ValueError):
            observed_order([1.0])

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            observed_order([1.0, 0.0])


class TestInitialData:
    def test_nodal_max_is_one(self):
        u = prepare_initial_data(paper_operator(16))
        assert max_norm(u) == 1.0

    def test_eigenfunction_is_fixed_point(self):
        # for constant coefficients sin(pi x) sin(pi y) is a discrete
        # eigenvector, so smoothing + renormalization returns the interpolant
        op = constant_operator(8)
        g = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
        u = prepare_initial_data(op, eta0=g)
        want = interpolate(g, op.grid)
        assert np.allclose(u.values, want.values, atol=1e-9)

    def test_matches_dense_fourfold_solve(self):
        op = paper_operator(8)
        _, _, l = oracle.dense_assemble(op)
        v = interpolate(experiments.ETA0, op.grid)
        for _ in range(4):
            v = oracle.dense_solve(l, v)
        want = v.values / np.max(np.abs(v.values))
        got = prepare_initial_data(op, linsolve.LinearSolverHandle("cg"))
        assert np.allclose(got.values, want, atol=1e-9)

    def test_smoothing_reduces_oscillation(self):
        op = paper_operator(32)
        raw = interpolate(experiments.ETA0, op.grid)
        smooth = prepare_initial_data(op)
        # relative energy of the operator applied to the data drops sharply
        rough = lambda u: discrete_norm(op.apply_l(u)) / discrete_norm(u)
        assert rough(smooth) < 0.1 * rough(raw)


class TestMeasureError:
    def test_identical_fields(self):
        u = interpolate(experiments.ETA0, Grid(16))
        assert measure_error(u, u) == 0.0

    def test_against_finer_grid(self):
        g = lambda x, y: x * (1 - x) * y * (1 - y)
        coarse = interpolate(g, Grid(8))
        fine = interpolate(g, Grid(16))
        # bilinear interpolants of a biquadratic differ at new midpoints
        err = measure_error(coarse, fine)
        assert 0.0 < err < 0.1

    def test_scales_with_perturbation(self):
        u = interpolate(experiments.ETA0, Grid(8))
        bump = Field(u.grid, np.ones_like(u.values))
        assert measure_error(u + bump, prolong_to(u, u.grid)) == pytest.approx(
            discrete_norm(bump), rel=1e-12
        )


class TestConfigValidation:
    def test_bad_row_step(self):
        with pytest.raises(ValueError):
            ExperimentConfig(
                scheme=SchemeKind.PEACEMAN_RACHFORD,
                rows=[(0.3, 8)],
                reference=ReferenceSpec(m=16, k=1.0 / 64),
            )

    def test_bad_reference_step(self):
        with pytest.raises(ValueError):
            ExperimentConfig(
                scheme=SchemeKind.PEACEMAN_RACHFORD,
                rows=[(0.25, 8)],
                reference=ReferenceSpec(m=16, k=0.3),
            )


def small_config(coeff="constant"):
    return ExperimentConfig(
        scheme=SchemeKind.PEACEMAN_RACHFORD,
        rows=[(1.0 / 8, 8), (1.0 / 16, 16)],
        reference=ReferenceSpec(m=32, k=1.0 / 128),
        coeff=coeff,
    )


class TestRunConvergence:
    def test_report_shape_and_monotonicity(self):
        config = ExperimentConfig(
            scheme=SchemeKind.PEACEMAN_RACHFORD,
            rows=[(1.0 / 8, 8), (1.0 / 16, 16), (1.0 / 32, 32)],
            reference=ReferenceSpec(m=64, k=1.0 / 256),
            coeff="paper",
        )
        report = run_convergence(config)
        errs = report.errors()
        assert len(errs) == 3
        assert errs[0] > errs[1] > errs[2] > 0.0
        assert report.rows[-1].order is None
        assert report.rows[0].order == pytest.approx(
            np.log2(errs[0] / errs[1]), rel=1e-12
        )

    def test_deterministic(self):
        a = run_convergence(small_config())
        b = run_convergence(small_config())
        assert a.errors() == b.errors()

    def test_shared_reference_data(self):
        config = small_config()
        ref = experiments.compute_reference(config.reference, config.t_end,
                                            config.coeff)
        a = run_convergence(config, reference_data=ref)
        b = run_convergence(config)
        assert a.errors() == b.errors()

    def test_render_and_csv(self, tmp_path):
        report = ConvergenceReport(
            scheme=SchemeKind.DOUGLAS_RACHFORD,
            reference=ReferenceSpec(m=8, k=0.125),
            t_end=0.5,
            coeff="paper",
            rows=[
                RowResult(k=0.25, h=0.25, m=4, error=4e-3, order=2.0),
                RowResult(k=0.125, h=0.125, m=8, error=1e-3, order=None),
            ],
        )
        text = report.render()
        assert "scheme=dr" in text and "4.000000e-03" in text
        path = tmp_path / "table.csv"
        report.write_csv(path)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert [float(r["error"]) for r in rows] == [4e-3, 1e-3]
        assert rows[0]["order"] == "2" and rows[1]["order"] == ""


class TestVerifyAssumptions:
    def test_constant_coefficients_pass(self):
        report = verify_assumptions(m_list=[8, 16], coeff="constant")
        assert report.all_passed, report.render()
        names = [c.name for c in report.checks]
        assert "dissipativity" in names
        assert "stability norm bound" in names

    def test_render_marks_status(self):
        report = verify_assumptions(m_list=[8], coeff="constant")
        text = report.render()
        assert "[PASS]" in text and text.endswith("overall: PASS")

    def test_sign_flip_breaks_dissipativity(self):
        # negating the 1D stiffness makes the operator accretive, which the
        # dissipativity quadratic form detects immediately
        op = paper_operator(8)
        op.k_lambda = TridiagonalMatrix(-op.k_lambda.diag, -op.k_lambda.off)
        rng = np.random.default_rng(0)
        worst = max(
            discrete_inner_product(op.apply_a(u), u) / discrete_norm(u) ** 2
            for u in (Field(op.grid, rng.standard_normal((7, 7)))
                      for _ in range(10))
        )
        assert worst > 1e-12


class TestCli:
    def test_run_writes_field(self, tmp_path, capsys):
        out = tmp_path / "final.txt"
        code = main(["run", "--scheme", "pr", "--m", "8", "--k", "1/16",
                     "--coeff", "constant", "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert "final discrete norm:" in capsys.readouterr().out

    def test_run_from_file_initial(self, tmp_path, capsys):
        path = tmp_path / "init.txt"
        u = interpolate(experiments.ETA0, Grid(8))
        write_field(path, u)
        code = main(["run", "--scheme", "dr", "--m", "8", "--k", "0.125",
                     "--t-end", "0.5", "--initial", "file", str(path)])
        assert code == 0
        norm_line = capsys.readouterr().out
        got = float(norm_line.split(":")[1].split()[0])
        op = paper_operator(8)
        want = steppers.evolve(op, SchemeKind.DOUGLAS_RACHFORD, 0.125, 4, u)
        assert got == pytest.approx(discrete_norm(want), rel=1e-12)

    def test_run_grid_mismatch(self, tmp_path, capsys):
        path = tmp_path / "init.txt"
        write_field(path, interpolate(experiments.ETA0, Grid(4)))
        code = main(["run", "--scheme", "pr", "--m", "8", "--k", "0.125",
                     "--initial", "file", str(path)])
        assert code == 2
        assert "m=4" in capsys.readouterr().err

    def test_run_bad_initial_kind(self, capsys):
        code = main(["run", "--scheme", "pr", "--m", "8", "--k", "0.125",
                     "--initial", "random"])
        assert code == 2

    def test_convergence_rows_and_csv(self, tmp_path, capsys):
        path = tmp_path / "table.csv"
        code = main([
            "convergence", "--scheme", "pr",
            "--row", "1/8,8", "--row", "1/16,16",
            "--ref-m", "32", "--ref-k", "1/128",
            "--coeff", "constant", "--csv", str(path),
        ])
        assert code == 0
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 2
        assert float(rows[0]["error"]) > float(rows[1]["error"]) > 0.0
        assert "order" in capsys.readouterr().out

    def test_convergence_requires_rows(self, capsys):
        code = main(["convergence", "--scheme", "pr",
                     "--ref-m", "16", "--ref-k", "1/64"])
        assert code == 2

    def test_verify_exit_zero(self, capsys):
        code = main(["verify", "--m", "8", "--coeff", "constant"])
        assert code == 0
        assert "overall: PASS" in capsys.readouterr().out
