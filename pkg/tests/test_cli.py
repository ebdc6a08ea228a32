import json

import numpy as np
import pytest

from bqce.bench import RunConfig, read_records
from bqce.cli import main


def test_bench_subcommand(tmp_path):
    out = tmp_path / "run.csv"
    rc = main(["bench", "--problem", "divacancy", "--method", "qce",
               "--N", "22", "--K0", "2", "3", "--out", str(out)])
    assert rc == 0
    records = read_records(out)
    assert len(records) == 2
    assert all(r.method == "qce" and r.K1 == 0 for r in records)


def test_solve_and_dump_mesh(tmp_path):
    cfg = RunConfig(problem="divacancy", N=22, method="bqce-smooth",
                    K0_list=(3,))
    cfg_path = tmp_path / "cfg.json"
    cfg.to_json(cfg_path)

    state = tmp_path / "state.txt"
    assert main(["solve", "--config", str(cfg_path), "--out", str(state)]) == 0
    lines = state.read_text().splitlines()
    assert len(lines) > 1000
    i, ux, uy = lines[0].split()
    float(ux), float(uy)

    dump = tmp_path / "mesh.txt"
    assert main(["dump-mesh", "--config", str(cfg_path),
                 "--out", str(dump)]) == 0
    text = dump.read_text().splitlines()
    assert text[0].startswith("sites ")
    n_sites = int(text[0].split()[1])
    elem_line = text[1 + n_sites]
    assert elem_line.startswith("elements ")
    n_elem = int(elem_line.split()[1])
    # mesh dump carries the per-element effective volume column
    first_elem = text[2 + n_sites].split()
    assert len(first_elem) == 5
    beta_line = text[2 + n_sites + n_elem]
    assert beta_line.startswith("beta ")


def test_check_suite_invariants(capsys):
    rc = main(["check", "--suite", "invariants"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "PASS" in out and "FAIL" not in out
