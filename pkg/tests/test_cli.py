import csv
import subprocess
import sys

import numpy as np
import pytest

from qcomplexity.cli import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    RunConfig,
    CLIError,
    fmt,
    main,
    parse_n_list,
    read_sweep_csv,
)
from qcomplexity.densities import gaussian_pair, write_density_table
from qcomplexity.measures import EUR_BOUND, SWEEP_COLUMNS
from qcomplexity.podi import gamma_curve

HO_N = "8,20,40,70,112,168"


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def read_kv(path):
    return dict(line.split("=", 1) for line in path.read_text(encoding="utf-8").splitlines())


def write_synthetic_sweep(path, deltas, c, system="synthetic"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for n, (d, ci) in enumerate(zip(deltas, c), start=1):
            s = 7.0
            row = [system, n, 3.5, 3.5, s, 1, ci / s, ci / s, 1, 1, 6.0, s / d, d, 1 - d, ci]
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


@pytest.fixture(scope="module")
def ho_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("ho")
    assert main(["sweep", "--model", "ho", "--n", HO_N, "--out", str(out), "--threads", "2"]) == 0
    return out / "sweep.csv"


@pytest.fixture(scope="module")
def atom_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("atoms")
    assert main(["sweep", "--model", "atom", "--n", "1-54", "--out", str(out)]) == 0
    return out / "sweep.csv"


# ---- helpers ---------------------------------------------------------------


def test_parse_n_list():
    assert parse_n_list("2,8, 20") == [2, 8, 20]
    assert parse_n_list("1-4,10") == [1, 2, 3, 4, 10]
    assert parse_n_list("") == []
    with pytest.raises(ValueError):
        parse_n_list("a,b")


def test_fmt_ten_digits():
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(12) == "12"
    assert fmt(6.434189657547) == "6.434189658"


@pytest.mark.parametrize("kwargs,match", [
    ({"n_values": []}, "empty"),
    ({"n_values": [8, 2]}, "increasing"),
    ({"n_values": [2], "mesh": 0.0}, "mesh"),
    ({"n_values": [2], "alpha_max": -1.0}, "nonnegative"),
    ({"n_values": [2], "model": "file"}, "position-file"),
    ({"n_values": [2], "model": "skyrme"}, "unknown model"),
])
def test_config_validation(kwargs, match):
    with pytest.raises(CLIError, match=match):
        RunConfig(**kwargs).validate()


# ---- sweep -----------------------------------------------------------------


class TestSweep:
    def test_oscillator_rows(self, tmp_path):
        assert main(["sweep", "--model", "ho", "--n", "2,8,20,40,70,112", "--out", str(tmp_path)]) == EXIT_OK
        rows = read_rows(tmp_path / "sweep.csv")
        assert [int(r["N"]) for r in rows] == [2, 8, 20, 40, 70, 112]
        assert all(float(r["S"]) >= EUR_BOUND - 1e-6 for r in rows)
        header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
        assert header == "system,N,S_r,S_k,S,D_r,D_k,D,msr,T,S_min,S_max,delta,omega,C"
        for name in ("S", "S_max", "C", "D"):
            lines = (tmp_path / f"{name}.dat").read_text().splitlines()
            assert lines[0] == f"# N {name}"
            assert len(lines) == 7
        fit = read_kv(tmp_path / "logfit.txt")
        assert float(fit["S_r"]) >= 0.99

    def test_ten_significant_digits(self, ho_sweep):
        row = ho_sweep.read_text().splitlines()[1].split(",")
        mantissa = row[4].replace(".", "").lstrip("0")
        assert len(mantissa) <= 10

    def test_gaussian_single_row(self, tmp_path):
        assert main(["sweep", "--model", "gaussian", "--n", "1", "--out", str(tmp_path)]) == EXIT_OK
        (row,) = read_rows(tmp_path / "sweep.csv")
        assert float(row["delta"]) == pytest.approx(1.0, abs=1e-6)
        assert not (tmp_path / "logfit.txt").exists()

    def test_closed_shell_atoms(self, tmp_path):
        assert main(["sweep", "--model", "atom", "--n", "2,10,18,36,54", "--out", str(tmp_path)]) == EXIT_OK
        assert len(read_rows(tmp_path / "sweep.csv")) == 5

    def test_invalid_n_aborts(self, tmp_path, capsys):
        assert main(["sweep", "--model", "ho", "--n", "2,10", "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "N=10" in capsys.readouterr().err
        assert not (tmp_path / "sweep.csv").exists()

    def test_skip_invalid(self, tmp_path, capsys):
        code = main(["sweep", "--model", "ho", "--n", "2,10,20", "--skip-invalid", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert [int(r["N"]) for r in read_rows(tmp_path / "sweep.csv")] == [2, 20]
        assert "skipping" in capsys.readouterr().err

    def test_unsorted_n(self, tmp_path):
        assert main(["sweep", "--n", "8,2", "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_file_model(self, tmp_path):
        pair = gaussian_pair(1.0)
        r = np.linspace(0, 6, 300)
        for n in (1, 2, 3):
            dens = pair.orbitals.density(np.maximum(r, 1e-12))
            write_density_table(tmp_path / f"rho_{n}.csv", r, dens)
            write_density_table(tmp_path / f"nk_{n}.csv", r, dens)
        code = main(["sweep", "--model", "file", "--n", "1-3", "--out", str(tmp_path / "o"),
                     "--position-file", str(tmp_path / "rho_{N}.csv"),
                     "--momentum-file", str(tmp_path / "nk_{N}.csv")])
        assert code == EXIT_OK
        rows = read_rows(tmp_path / "o" / "sweep.csv")
        assert all(float(r["S"]) == pytest.approx(EUR_BOUND, abs=1e-3) for r in rows)

    def test_missing_table(self, tmp_path):
        code = main(["sweep", "--model", "file", "--n", "1", "--out", str(tmp_path),
                     "--position-file", str(tmp_path / "none.csv"),
                     "--momentum-file", str(tmp_path / "none.csv")])
        assert code == EXIT_VALIDATION

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "qcomplexity", "sweep", "--model", "gaussian",
                               "--n", "1", "--out", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "sweep.csv").exists()


# ---- regions ---------------------------------------------------------------


class TestRegions:
    def test_three_regions(self, ho_sweep, tmp_path, capsys):
        code = main(["regions", str(ho_sweep), "--alpha-max", "200", "--beta-max", "20",
                     "--mesh", "0.1", "--out", str(tmp_path)])
        assert code == EXIT_OK
        summary = read_kv(tmp_path / "regions_summary.txt")
        for key in ("decreasing", "convex", "increasing"):
            assert int(summary[key]) > 0
        assert float(summary["decreasing_correlation"]) >= 0.9
        assert float(summary["increasing_correlation"]) >= 0.9
        assert summary["decreasing_region"].startswith("α ≥ ")
        lines = (tmp_path / "regions.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "alpha,beta,trend"
        assert len(lines) == 1 + 2001 * 201
        assert "wall time" not in lines[1] and "s (" in capsys.readouterr().err

    def test_constant_delta(self, tmp_path, capsys):
        path = tmp_path / "flat.csv"
        write_synthetic_sweep(path, [0.5] * 4, [0.1] * 4)
        assert main(["regions", str(path), "--mesh", "0.5", "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "degenerate trend everywhere" in capsys.readouterr().err

    def test_delta_outside_unit_interval(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        write_synthetic_sweep(path, [1.0, 0.9, 0.8], [0.1, 0.2, 0.3])
        assert main(["regions", str(path), "--mesh", "0.5", "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "offending N: 1" in capsys.readouterr().err

    def test_missing_columns(self, tmp_path, capsys):
        path = tmp_path / "short.csv"
        path.write_text("system,N,S\nx,1,7\n", encoding="utf-8")
        assert main(["regions", str(path), "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "missing columns" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["regions", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == EXIT_VALIDATION


# ---- fit -------------------------------------------------------------------


class TestFit:
    def test_synthetic_recovery(self, tmp_path):
        deltas = np.linspace(0.3, 0.8, 6)
        path = tmp_path / "syn.csv"
        write_synthetic_sweep(path, deltas, gamma_curve(deltas, 2.0, 0.5))
        assert main(["fit", str(path), "--alpha-max", "5", "--beta-max", "5", "--out", str(tmp_path)]) == 0
        rec = read_kv(tmp_path / "podi.txt")
        assert float(rec["alpha"]) == pytest.approx(2.0, abs=0.01)
        assert float(rec["beta"]) == pytest.approx(0.5, abs=0.01)
        assert rec["character"] == "Disorder"
        assert list(rec) == ["alpha", "beta", "norm", "c_trend", "character"]
        curve = (tmp_path / "gamma_fit.dat").read_text().splitlines()
        assert curve[0] == "# N C Gamma" and len(curve) == 7

    def test_atoms_need_shells(self, atom_sweep, tmp_path, capsys):
        assert main(["fit", str(atom_sweep), "--mesh", "0.1", "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "irregular" in capsys.readouterr().err

    def test_atoms_closed_shells(self, atom_sweep, tmp_path):
        code = main(["fit", str(atom_sweep), "--shells", "2,10,18,36,54", "--mesh", "0.1",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        rec = read_kv(tmp_path / "podi.txt")
        assert rec["c_trend"] == "Increasing"
        assert rec["character"] == "Order"

    def test_missing_shell(self, atom_sweep, tmp_path, capsys):
        code = main(["fit", str(atom_sweep), "--shells", "2,10,55", "--out", str(tmp_path)])
        assert code == EXIT_VALIDATION
        assert "55" in capsys.readouterr().err

    def test_too_few_points(self, tmp_path, capsys):
        path = tmp_path / "two.csv"
        write_synthetic_sweep(path, [0.5, 0.6], [0.1, 0.2])
        assert main(["fit", str(path), "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "too few points" in capsys.readouterr().err

    def test_boundary_warning(self, ho_sweep, tmp_path, capsys):
        assert main(["fit", str(ho_sweep), "--mesh", "0.1", "--out", str(tmp_path)]) == EXIT_OK
        err = capsys.readouterr().err
        assert any(line.startswith("WARN:") for line in err.splitlines())


# ---- determinism and check -------------------------------------------------


def test_outputs_identical_across_threads(ho_sweep, tmp_path):
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / threads
        for cmd in ("regions", "fit"):
            assert main([cmd, str(ho_sweep), "--mesh", "0.05", "--threads", threads, "--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0].keys() == {"regions.csv", "regions_summary.txt", "podi.txt", "gamma_fit.dat"}
    assert outputs[0] == outputs[1]


def test_sweep_identical_across_threads(tmp_path):
    data = []
    for threads in ("1", "3"):
        out = tmp_path / threads
        assert main(["sweep", "--model", "atom", "--n", "1-12", "--threads", threads, "--out", str(out)]) == 0
        data.append((out / "sweep.csv").read_bytes())
    assert data[0] == data[1]


class TestCheck:
    def test_passes(self, ho_sweep, capsys):
        assert main(["check", str(ho_sweep)]) == EXIT_OK
        assert capsys.readouterr().out.count(": ok") == 6

    def test_detects_violation(self, ho_sweep, tmp_path, capsys):
        rows = ho_sweep.read_text().splitlines()
        cells = rows[2].split(",")
        cells[4] = fmt(float(cells[11]) + 1.0)  # S above S_max
        cells[2] = fmt(float(cells[4]) - float(cells[3]))
        rows[2] = ",".join(cells)
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(rows) + "\n")
        assert main(["check", str(bad)]) == EXIT_NUMERICAL
        assert "FAIL" in capsys.readouterr().out

    def test_roundtrip_reader(self, ho_sweep):
        sweep = read_sweep_csv(ho_sweep)
        assert sweep.system == "ho"
        assert sweep.n_values == [8, 20, 40, 70, 112, 168]
