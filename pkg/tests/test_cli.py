import json
from pathlib import Path

import numpy as np
import pytest

from csumsim.cavity import CavityParams
from csumsim.circuits import build_protocol2, run
from csumsim.cli import figure_files, main, read_csv

GOLDEN = Path(__file__).parent / "golden"


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_truth_table_csv(capsys):
    code, out, _ = _run(["truth-table"], capsys)
    meta, header, rows = read_csv(out)
    assert code == 0 and meta == {"d": "4"}
    assert header == ["c", "t", "c_out", "t_out"]
    assert ["1", "1", "1", "2"] in rows and ["3", "2", "3", "1"] in rows


def test_truth_table_small_d(capsys):
    code, out, _ = _run(["truth-table", "--d", "2", "--format", "json"], capsys)
    rows = json.loads(out)["rows"]
    assert [(r["c"], r["t"], r["t_out"]) for r in rows] == [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]
    assert _run(["truth-table", "--d", "1"], capsys)[0] == 2


def test_simulate_basis_input(capsys):
    code, out, _ = _run(["simulate", "--protocol", "1", "--control", "1", "--target", "1"], capsys)
    meta, header, rows = read_csv(out)
    assert code == 0 and header == ["quantity", "out", "in", "re", "im"]
    values = {r[0]: float(r[3]) for r in rows if r[1] == r[2] == ""}
    assert values["postselection_probability"] == pytest.approx(1 / 9, abs=1e-12)
    assert values["input_fidelity"] == pytest.approx(1, abs=1e-12)


def test_simulate_csv_round_trip_is_bit_exact(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, _, _ = _run(["simulate", "--protocol", "2", "--g-over-kappa", "1.7",
                       "--kappas-over-kappa", "0.03", "--out", str(out)], capsys)
    assert code == 0
    _, _, rows = read_csv(out.read_text())
    rep = run(build_protocol2(CavityParams(g=1.7, kappa_s=0.03)))
    pm = np.zeros((16, 16), dtype=complex)
    for r in rows:
        if r[0] == "process_matrix":
            pm[int(r[1]), int(r[2])] = complex(float(r[3]), float(r[4]))
        if r[0] == "input_fidelity":
            assert float(r[3]) == rep.input_fidelity
    assert np.array_equal(pm, rep.process_matrix)


def test_simulate_json(capsys):
    code, out, _ = _run(["simulate", "--protocol", "3", "--format", "json",
                         "--amps-control", "1,0,0,0", "--amps-target", "0.5,0.5,0.5,0.5"], capsys)
    data = json.loads(out)
    assert code == 0
    assert data["report"]["input_fidelity"] == pytest.approx(1, abs=1e-10)
    assert data["report"]["efficiency_amp"] == pytest.approx(float(data["meta"]["A_cubed_abs"]), abs=1e-12)


def test_seeded_random_input_is_reproducible(capsys):
    a = _run(["simulate", "--protocol", "2", "--seed", "7"], capsys)[1]
    b = _run(["simulate", "--protocol", "2", "--seed", "7"], capsys)[1]
    c = _run(["simulate", "--protocol", "2", "--seed", "8"], capsys)[1]
    assert a == b and a != c


@pytest.mark.parametrize("argv", [
    ["simulate", "--protocol", "2", "--amps-control", "1,1,0,0", "--amps-target", "1,0,0,0"],
    ["simulate", "--protocol", "1", "--control", "5", "--target", "0"],
    ["simulate", "--protocol", "2", "--g-over-kappa", "-1"],
    ["simulate", "--protocol", "1", "--p", "-0.1"],
    ["sweep", "--metric", "F9", "--axis", "g:0.5:3:5"],
    ["sweep", "--metric", "F2", "--axis", "g:0.5:3"],
    ["sweep", "--metric", "F2", "--axis", "g:0.5:3:1"],
    ["netlist", "check"],
])
def test_configuration_errors_exit_2(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == 2
    assert err.startswith("error:")


def test_singular_parameters_exit_3(capsys):
    code, _, err = _run(["simulate", "--protocol", "2", "--g-over-kappa", "0",
                         "--gamma-over-kappa", "0"], capsys)
    assert code == 3 and "singular" in err


def test_unwritable_output_path(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, _ = _run(["truth-table", "--out", str(blocker / "sub" / "t.csv")], capsys)
    assert code != 0
    code, _, _ = _run(["figure", "5", "--out", str(blocker)], capsys)
    assert code != 0


def test_sweep_csv(capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    argv = ["sweep", "--metric", "F2", "--metric", "eta3", "--axis", "g:0.5:3:4",
            "--axis", "kappa_s:0:0.1:3", "--set", "gamma=0.1"]
    code, out, _ = _run(argv, capsys)
    meta, header, rows = read_csv(out)
    assert code == 0
    assert meta["timestamp"] == "1970-01-01T00:00:00Z"
    assert header == ["g", "kappa_s", "F2", "eta3", "eta3_amp"]
    assert len(rows) == 12
    assert _run(argv, capsys)[1] == out


def test_sweep_single_point(capsys):
    code, out, _ = _run(["sweep", "--metric", "eta2_amp", "--axis", "g:2.4:2.4:1"], capsys)
    _, header, rows = read_csv(out)
    assert code == 0 and header == ["g", "eta2", "eta2_amp"] and len(rows) == 1


def test_netlist_dump_and_simulate(capsys, tmp_path):
    path = tmp_path / "p2.net"
    assert main(["netlist", "dump", "--protocol", "2", "--g-over-kappa", "1.5", "--out", str(path)]) == 0
    capsys.readouterr()
    code, out, _ = _run(["netlist", "check", str(path)], capsys)
    assert code == 0 and out.startswith("protocol2:")
    direct = _run(["simulate", "--protocol", "2", "--g-over-kappa", "1.5", "--format", "json"], capsys)[1]
    via = _run(["simulate", "--netlist", str(path), "--format", "json"], capsys)[1]
    assert json.loads(direct)["report"] == json.loads(via)["report"]


def test_bad_netlist_file(capsys, tmp_path):
    path = tmp_path / "bad.net"
    path.write_text("REGISTRY a b\nBS a b reflectivity=0.5 colour=3\n")
    code, _, err = _run(["netlist", "check", str(path)], capsys)
    assert code == 2 and "line 2" in err


# --- figures --------------------------------------------------------------------

@pytest.mark.parametrize("fig", [5, 7])
def test_full_figures_match_golden(fig):
    for name, text in figure_files(fig).items():
        assert text == (GOLDEN / name).read_text(), name


@pytest.mark.parametrize("fig", [4, 6])
def test_reduced_sweep_figures_match_golden(fig):
    files = figure_files(fig, points=11)
    assert len(files) == {4: 5, 6: 4}[fig]
    for name, text in files.items():
        assert text == (GOLDEN / name).read_text(), name


def test_figure_command_is_byte_identical_across_runs(capsys, tmp_path):
    for run_dir in ("a", "b"):
        assert main(["figure", "6", "--points", "7", "--out", str(tmp_path / run_dir)]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["fig6a_F2.csv", "fig6b_F3.csv", "fig6c_eta2.csv", "fig6d_eta3.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_figure7_values_are_protocol2_fidelities():
    _, header, rows = read_csv(figure_files(7)["fig7.csv"])
    assert header == ["c", "t", "fidelity"]
    assert min(float(r[2]) for r in rows) > 0.9999


def test_figure_custom_range_json():
    files = figure_files(6, points=3, ranges={"g": (1.0, 2.0)}, fmt_="json")
    data = json.loads(files["fig6a_F2.json"])
    assert [row[0] for row in data["rows"]][::3] == [1.0, 1.5, 2.0]
