import math
import os

import numpy as np
import pytest

from plotgen import (FigureSpec, FormatError, read_dump, read_records_csv,
                     render_convergence, render_lattice)

DATA = os.path.join(os.path.dirname(__file__), "data")
DIVACANCY_CSV = os.path.join(DATA, "divacancy_n30.csv")
MESH_DUMP = os.path.join(DATA, "microcrack_mesh.txt")


def _write_synthetic_csv(path, slope=-0.5, method="bqce-smooth"):
    dofs = [100, 400, 1600, 6400, 25600]
    with open(path, "w") as fh:
        fh.write("method,K0,K1,dof,err_w12,err_w1inf,err_energy_abs,"
                 "err_energy_signed,energy,wall_time_s\n")
        for k, dof in enumerate(dofs):
            err = dof ** slope
            fh.write(f"{method},{k},{k},{dof},{err:.17g},{err:.17g},"
                     f"{err:.17g},{err:.17g},-1.0,0.1\n")
    return dofs


def test_divacancy_csv_three_panels(tmp_path):
    out = tmp_path / "divacancy.png"
    spec = FigureSpec(csv_paths=[DIVACANCY_CSV], out_path=str(out))
    plotted = render_convergence(spec)
    assert out.exists() and out.stat().st_size > 5000
    # three panels, each with the three methods from the file
    methods = {m for (_, m) in plotted}
    assert methods == {"bqce-smooth", "qce", "atm"}
    panels = {c for (c, _) in plotted}
    assert panels == {"err_w12", "err_w1inf", "err_energy_abs"}


def test_round_trip_no_resampling(tmp_path):
    rows = read_records_csv(DIVACANCY_CSV)
    out = tmp_path / "fig.png"
    plotted = render_convergence(
        FigureSpec(csv_paths=[DIVACANCY_CSV], out_path=str(out)))
    smooth = [r for r in rows if r["method"] == "bqce-smooth"]
    dof, vals = plotted[("err_w12", "bqce-smooth")]
    assert sorted(dof) == sorted(r["dof"] for r in smooth)
    assert sorted(vals) == sorted(r["err_w12"] for r in smooth)


def test_synthetic_slope_parallels_guide(tmp_path):
    path = tmp_path / "synthetic.csv"
    _write_synthetic_csv(path, slope=-0.5)
    out = tmp_path / "synthetic.png"
    plotted = render_convergence(
        FigureSpec(csv_paths=[str(path)], out_path=str(out)))
    dof, err = plotted[("err_w12", "bqce-smooth")]
    coef = np.polyfit(np.log10(dof), np.log10(err), 1)
    assert abs(coef[0] - (-0.5)) < 1e-9
    assert out.exists()


def test_empty_series_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    with open(path, "w") as fh:
        fh.write("method,K0,K1,dof,err_w12,err_w1inf,err_energy_abs,"
                 "err_energy_signed,energy,wall_time_s\n")
    with pytest.raises(FormatError):
        render_convergence(FigureSpec(csv_paths=[str(path)],
                                      out_path=str(tmp_path / "x.png")))


def test_malformed_csv_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("method,K0,K1,dof,err_w12,err_w1inf,err_energy_abs,"
                 "err_energy_signed,energy,wall_time_s\n")
        fh.write("qce,1,0,100,0.1,0.1,0.1,0.1,-1.0,0.1\n")
        fh.write("qce,2,0,oops,0.1,0.1,0.1,0.1,-1.0,0.1\n")
    with pytest.raises(FormatError, match=":3"):
        read_records_csv(str(path))


def test_render_lattice_from_mesh_dump(tmp_path):
    out = tmp_path / "lattice.png"
    xy, beta = render_lattice(MESH_DUMP, str(out))
    assert out.exists() and out.stat().st_size > 5000
    assert beta.min() == 0.0 and beta.max() == 1.0
    # the crack void: no plotted atom sits on the removed segment
    on_crack = (np.abs(xy[:, 1]) < 0.3) & (np.abs(xy[:, 0]) < 5.2)
    assert not on_crack.any()


def test_render_lattice_single_color(tmp_path):
    dump = tmp_path / "flat.txt"
    with open(dump, "w") as fh:
        fh.write("sites 3\n0 0 0\n1 1 0\n2 0.5 0.866\n")
        fh.write("elements 1\n0 0 1 2\n")
        fh.write("beta 3\n0 1\n1 1\n2 1\n")
    out = tmp_path / "flat.png"
    _, beta = render_lattice(str(dump), str(out))
    assert np.unique(beta).size == 1


def test_missing_beta_rejected(tmp_path):
    dump = tmp_path / "nobeta.txt"
    with open(dump, "w") as fh:
        fh.write("sites 1\n0 0 0\nelements 0\n")
    with pytest.raises(FormatError, match="beta"):
        render_lattice(str(dump), str(tmp_path / "x.png"))


def test_rendering_is_deterministic(tmp_path):
    path = tmp_path / "synthetic.csv"
    _write_synthetic_csv(path)
    out1 = tmp_path / "a.png"
    out2 = tmp_path / "b.png"
    render_convergence(FigureSpec(csv_paths=[str(path)], out_path=str(out1)))
    render_convergence(FigureSpec(csv_paths=[str(path)], out_path=str(out2)))
    assert out1.read_bytes() == out2.read_bytes()


def test_cli(tmp_path):
    from plotgen.cli import main

    out = tmp_path / "cli.png"
    rc = main(["--in", DIVACANCY_CSV, "--out", str(out),
               "--kind", "convergence"])
    assert rc == 0 and out.exists()
    out2 = tmp_path / "cli_lattice.png"
    rc = main(["--in", MESH_DUMP, "--out", str(out2), "--kind", "lattice"])
    assert rc == 0 and out2.exists()
