"""Parsers for the benchmark CSV and lattice/mesh dump text formats.

These read the plain-text interfaces the simulation engine writes; no
in-process coupling to it.
"""

from dataclasses import dataclass

import numpy as np

CSV_HEADER = ("method,K0,K1,dof,err_w12,err_w1inf,err_energy_abs,"
              "err_energy_signed,energy,wall_time_s")
CSV_COLUMNS = CSV_HEADER.split(",")


class FormatError(ValueError):
    """Malformed input file; the message names the offending line."""


@dataclass
class Series:
    method: str
    dof: np.ndarray
    values: dict  # column -> array


def read_records_csv(path):
    """Rows of a benchmark CSV grouped by method, in file order."""
    rows = []
    with open(path) as fh:
        header_seen = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != CSV_HEADER:
                    raise FormatError(
                        f"{path}:{lineno}: expected the benchmark CSV "
                        f"header, got {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != len(CSV_COLUMNS):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, "
                    f"got {len(parts)}")
            try:
                row = {"method": parts[0],
                       "K0": int(parts[1]), "K1": int(parts[2]),
                       "dof": int(parts[3])}
                for name, val in zip(CSV_COLUMNS[4:], parts[4:]):
                    row[name] = float(val)
            except ValueError as err:
                raise FormatError(f"{path}:{lineno}: {err}") from err
            rows.append(row)
    if not header_seen:
        raise FormatError(f"{path}: no header line found")
    return rows


def group_series(rows, value_columns):
    """Group CSV rows into per-method series sorted by DoF."""
    series = []
    for method in dict.fromkeys(r["method"] for r in rows):
        sub = [r for r in rows if r["method"] == method]
        order = np.argsort([r["dof"] for r in sub])
        dof = np.array([sub[i]["dof"] for i in order], float)
        vals = {c: np.array([sub[i][c] for i in order]) for c in value_columns}
        series.append(Series(method, dof, vals))
    if not series:
        raise FormatError("CSV contains no data rows")
    return series


@dataclass
class LatticeDump:
    ids: np.ndarray
    xy: np.ndarray
    elements: np.ndarray
    v_eff: np.ndarray   # empty when the dump has no volume column
    beta: np.ndarray    # empty when the dump has no beta section
    beta_ids: np.ndarray


def read_dump(path):
    """Parse the `sites / elements [/ beta]` dump format."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0

    def expect_section(name, optional=False):
        nonlocal i
        if i >= len(lines):
            if optional:
                return None
            raise FormatError(f"{path}:{i + 1}: missing {name!r} section")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] != name:
            if optional:
                return None
            raise FormatError(
                f"{path}:{i + 1}: expected {name!r} header, got "
                f"{lines[i]!r}")
        i += 1
        try:
            return int(parts[1])
        except ValueError as err:
            raise FormatError(f"{path}:{i}: {err}") from err

    n_sites = expect_section("sites")
    ids = np.empty(n_sites, np.int64)
    xy = np.empty((n_sites, 2))
    for k in range(n_sites):
        parts = lines[i].split()
        if len(parts) != 3:
            raise FormatError(f"{path}:{i + 1}: bad site line {lines[i]!r}")
        ids[k] = int(parts[0])
        xy[k] = (float(parts[1]), float(parts[2]))
        i += 1
    n_elem = expect_section("elements")
    elements = np.empty((n_elem, 3), np.int64)
    v_eff = np.empty(n_elem)
    has_v = None
    for k in range(n_elem):
        parts = lines[i].split()
        if len(parts) not in (4, 5):
            raise FormatError(f"{path}:{i + 1}: bad element line "
                              f"{lines[i]!r}")
        if has_v is None:
            has_v = len(parts) == 5
        elements[k] = [int(p) for p in parts[1:4]]
        v_eff[k] = float(parts[4]) if len(parts) == 5 else np.nan
        i += 1
    beta = np.empty(0)
    beta_ids = np.empty(0, np.int64)
    n_beta = expect_section("beta", optional=True)
    if n_beta is not None:
        beta = np.empty(n_beta)
        beta_ids = np.empty(n_beta, np.int64)
        for k in range(n_beta):
            parts = lines[i].split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{i + 1}: bad beta line "
                                  f"{lines[i]!r}")
            beta_ids[k] = int(parts[0])
            beta[k] = float(parts[1])
            i += 1
    if not (has_v or n_elem == 0):
        v_eff = np.empty(0)
    return LatticeDump(ids, xy, elements, v_eff, beta, beta_ids)
