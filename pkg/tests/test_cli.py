import csv
import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from rarelogit import Dataset, substream
from rarelogit.cli import load_covariates, load_dataset, main, save_dataset


def run_cli(args):
    return main([str(a) for a in args])


def read_result(path):
    """Parse a result CSV into (comment, header, rows-as-strings)."""
    lines = path.read_text().splitlines()
    comment = lines[0]
    rows = list(csv.reader(lines[1:]))
    return comment, rows[0], rows[1:]


def fields(path):
    _, header, rows = read_result(path)
    assert header == ["field", "value"]
    return dict(rows)


@pytest.fixture()
def balanced_csv(tmp_path):
    path = tmp_path / "balanced.csv"
    data = Dataset(x=np.zeros((10, 1)), y=[1] * 4 + [0] * 6)
    save_dataset(str(path), data)
    return path


@pytest.fixture()
def mixed_csv(tmp_path):
    rng = substream(2024)
    x = rng.standard_normal((120, 1))
    y = (rng.random(120) < 0.3).astype(int)
    y[:2] = [1, 0]
    path = tmp_path / "mixed.csv"
    save_dataset(str(path), Dataset(x=x, y=y))
    return path


class TestDatasetIO:
    def test_round_trip_bitwise(self, tmp_path):
        rng = substream(1)
        data = Dataset(x=rng.standard_normal((37, 3)), y=(rng.random(37) < 0.4).astype(int))
        path = tmp_path / "d.csv"
        save_dataset(str(path), data)
        back = load_dataset(str(path))
        assert_array_equal(back.x, data.x)
        assert_array_equal(back.y, data.y)

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            load_dataset(str(path))

    def test_covariate_loader(self, tmp_path):
        path = tmp_path / "xs.csv"
        path.write_text("x1\n1.5\n-2.25\n")
        assert_array_equal(load_covariates(str(path)), [[1.5], [-2.25]])


class TestFitCommand:
    def test_full_on_balanced_data(self, balanced_csv, tmp_path):
        out = tmp_path / "fit.csv"
        code = run_cli(["fit", "--data", balanced_csv, "--estimator", "full", "--out", out])
        assert code == 0
        got = fields(out)
        assert float(got["alpha"]) == pytest.approx(math.log(4 / 6), abs=1e-9)
        assert float(got["beta1"]) == 0.0
        assert got["converged"] == "1"

    def test_under_bc_at_pi0_one_matches_full(self, mixed_csv, tmp_path):
        out_full = tmp_path / "full.csv"
        out_bc = tmp_path / "bc.csv"
        run_cli(["fit", "--data", mixed_csv, "--estimator", "full", "--seed", 5, "--out", out_full])
        run_cli(["fit", "--data", mixed_csv, "--estimator", "under-bc", "--pi0", 1.0, "--seed", 5, "--out", out_bc])
        full, bc = fields(out_full), fields(out_bc)
        for key in ("alpha", "beta1", "iterations", "grad_max_norm", "converged", "effective_n"):
            assert full[key] == bc[key]

    def test_seeded_fit_is_byte_identical(self, mixed_csv, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        args = ["fit", "--data", mixed_csv, "--estimator", "under-w", "--pi0", 0.1, "--seed", 7]
        run_cli(args + ["--out", out1])
        run_cli(args + ["--out", out2])
        assert out1.read_bytes() == out2.read_bytes()

    def test_variance_block_with_alpha_t(self, mixed_csv, tmp_path):
        out = tmp_path / "fit.csv"
        code = run_cli([
            "fit", "--data", mixed_csv, "--estimator", "under-w", "--pi0", 0.5,
            "--seed", 3, "--alpha-t", -1.0, "--out", out,
        ])
        assert code == 0
        got = fields(out)
        assert float(got["c"]) == pytest.approx(math.exp(-1.0) / 0.5, rel=1e-14)
        assert "v_1_1" in got and "v_2_2" in got

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code = run_cli(["fit", "--data", tmp_path / "nope.csv", "--estimator", "full", "--out", tmp_path / "o.csv"])
        assert code == 2

    def test_missing_rate_exits_2(self, mixed_csv, tmp_path):
        code = run_cli(["fit", "--data", mixed_csv, "--estimator", "under-w", "--out", tmp_path / "o.csv"])
        assert code == 2

    def test_separated_data_exits_3(self, tmp_path, capsys):
        x = 0.5 * np.array([-2.0, -1.5, -1.0, 1.0, 1.5, 2.0])
        data = Dataset(x=x[:, None], y=(x > 0).astype(int))
        path = tmp_path / "sep.csv"
        save_dataset(str(path), data)
        code = run_cli(["fit", "--data", path, "--estimator", "full", "--out", tmp_path / "o.csv"])
        assert code == 3
        assert "Separation" in capsys.readouterr().err

    def test_stdout_carries_only_result_path(self, balanced_csv, tmp_path, capsys):
        out = tmp_path / "fit.csv"
        run_cli(["fit", "--data", balanced_csv, "--estimator", "full", "--out", out])
        assert capsys.readouterr().out.strip() == str(out)

    def test_provenance_comment(self, balanced_csv, tmp_path):
        out = tmp_path / "fit.csv"
        run_cli(["fit", "--data", balanced_csv, "--estimator", "full", "--seed", 9, "--out", out])
        comment, _, _ = read_result(out)
        assert comment == "# seed=9 version=0.1.0"


class TestTable1Command:
    def test_small_run_is_well_formed(self, tmp_path):
        out = tmp_path / "t1.csv"
        code = run_cli([
            "table1", "--n", "1000", "--rate", "0.02", "--reps", 3,
            "--seed", 4, "--threads", 1, "--out", out,
        ])
        assert code == 0
        _, header, rows = read_result(out)
        assert header == [
            "n", "rate", "expected_n1", "en1_emse_alpha", "en1_emse_beta",
            "n_emse_alpha", "n_emse_beta", "failed",
        ]
        row = dict(zip(header, rows[0]))
        assert float(row["expected_n1"]) == pytest.approx(20.0)
        # scaled columns are consistent: n column = (n / E n1) * en1 column
        assert float(row["n_emse_alpha"]) == pytest.approx(
            float(row["en1_emse_alpha"]) * 1000 / 20.0, rel=1e-12
        )

    def test_mismatched_lists_exit_2(self, tmp_path):
        code = run_cli([
            "table1", "--n", "1000,2000", "--rate", "0.02", "--reps", 2,
            "--out", tmp_path / "t.csv",
        ])
        assert code == 2


class TestSweepCommand:
    def test_pi0_one_rows_equal_baseline(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli([
            "sweep", "--pi0-grid", "0.5,1.0", "--n", 800, "--theta-t=-2,1",
            "--reps", 4, "--seed", 12, "--threads", 1, "--out", out,
        ])
        assert code == 0
        _, header, rows = read_result(out)
        table = {(r[0], r[1]): r[2:] for r in rows}
        base = table[("full", "")]
        assert table[("under-w", "1")] == base
        assert table[("under-bc", "1")] == base

    def test_lambda_zero_rows_equal_baseline(self, tmp_path):
        out = tmp_path / "sweep.csv"
        run_cli([
            "sweep", "--lambda-grid", "0", "--n", 800, "--theta-t=-2,1",
            "--reps", 4, "--seed", 12, "--threads", 1, "--out", out,
        ])
        _, _, rows = read_result(out)
        table = {(r[0], r[1]): r[2:] for r in rows}
        assert table[("over-w", "0")] == table[("full", "")]
        assert table[("over-bc", "0")] == table[("full", "")]

    def test_threads_do_not_change_bytes(self, tmp_path):
        out1 = tmp_path / "s1.csv"
        out2 = tmp_path / "s2.csv"
        args = ["sweep", "--pi0-grid", "0.5", "--n", 600, "--theta-t=-2,1", "--reps", 6, "--seed", 3]
        run_cli(args + ["--threads", 1, "--out", out1])
        run_cli(args + ["--threads", 2, "--out", out2])
        assert out1.read_bytes() == out2.read_bytes()

    def test_requires_exactly_one_grid(self, tmp_path):
        code = run_cli([
            "sweep", "--pi0-grid", "0.5", "--lambda-grid", "1", "--n", 100,
            "--theta-t=-2,1", "--reps", 1, "--out", tmp_path / "s.csv",
        ])
        assert code == 2


class TestVarianceCommand:
    def test_over_weighted_factor(self, tmp_path):
        out = tmp_path / "v.csv"
        code = run_cli([
            "variance", "--kind", "ow", "--beta", "1", "--lambda", 1,
            "--m", 1000, "--seed", 2, "--out", out,
        ])
        assert code == 0
        got = fields(out)
        assert float(got["factor"]) == 1.25

    def test_full_gaussian_analytic(self, tmp_path):
        out = tmp_path / "v.csv"
        run_cli([
            "variance", "--kind", "full", "--beta", "1", "--m", 1000000,
            "--seed", 6, "--out", out,
        ])
        got = fields(out)
        v = np.array([
            [float(got["v_1_1"]), float(got["v_1_2"])],
            [float(got["v_2_1"]), float(got["v_2_2"])],
        ])
        np.testing.assert_allclose(v, [[2.0, -1.0], [-1.0, 1.0]], rtol=0.01)

    def test_c_zero_matches_full(self, tmp_path):
        out_w = tmp_path / "w.csv"
        out_f = tmp_path / "f.csv"
        common = ["--beta", "1", "--m", 20000, "--seed", 8]
        run_cli(["variance", "--kind", "under-w", "--c", 0] + common + ["--out", out_w])
        run_cli(["variance", "--kind", "full"] + common + ["--out", out_f])
        w, f = fields(out_w), fields(out_f)
        for key in ("v_1_1", "v_1_2", "v_2_1", "v_2_2"):
            assert w[key] == f[key]

    def test_covariate_sample_input(self, tmp_path):
        xs_path = tmp_path / "xs.csv"
        xs = substream(10).standard_normal(5000)
        with open(xs_path, "w") as fh:
            fh.write("x1\n")
            fh.writelines(f"{float(v)!r}\n" for v in xs)
        out = tmp_path / "v.csv"
        code = run_cli(["variance", "--kind", "full", "--beta", "1", "--xs", xs_path, "--out", out])
        assert code == 0
        assert float(fields(out)["m"]) == 5000

    def test_singular_sample_exits_3(self, tmp_path, capsys):
        xs_path = tmp_path / "xs.csv"
        xs_path.write_text("x1\n1.0\n1.0\n1.0\n")
        code = run_cli(["variance", "--kind", "full", "--beta", "1", "--xs", xs_path, "--out", tmp_path / "v.csv"])
        assert code == 3
        assert "Singular" in capsys.readouterr().err
