"""CSV/JSON artifact serialization.

All numeric text uses repr-precision (%.17g) so that identical arrays always
serialize to identical bytes; angles are radians, distances meters,
frequencies Hz.
"""

import json
from pathlib import Path

import numpy as np

from .grids import SpectrumGrid

_FMT = "%.17g"


def _f(x) -> str:
    return _FMT % float(x)


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_spectrum_csv(path, spectrum: SpectrumGrid, extra_meta: dict | None = None) -> None:
    """Spectrum as theta_rad,r_m,value rows plus a .meta.json sidecar."""
    path = Path(path)
    grid = spectrum.grid
    lines = ["theta_rad,r_m,value"]
    for i, th in enumerate(grid.thetas):
        for j, r in enumerate(grid.rs):
            lines.append(f"{_f(th)},{_f(r)},{_f(spectrum.values[i, j])}")
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "theta_min": float(np.min(grid.thetas)),
        "theta_max": float(np.max(grid.thetas)),
        "n_theta": int(grid.thetas.size),
        "r_min": float(np.min(grid.rs)) if np.all(np.isfinite(grid.rs)) else None,
        "r_max": float(np.max(grid.rs)) if np.all(np.isfinite(grid.rs)) else None,
        "n_r": int(grid.rs.size),
        "theta_spacing": grid.theta_spacing,
        "r_spacing": grid.r_spacing,
        "units": {"theta": "rad", "r": "m"},
    }
    meta.update(spectrum.meta)
    if extra_meta:
        meta.update(extra_meta)
    write_json(path.with_suffix(path.suffix + ".meta.json"), meta)


def read_spectrum_csv(path):
    rows = Path(path).read_text().strip().splitlines()
    assert rows[0] == "theta_rad,r_m,value"
    data = np.array([[float(v) for v in line.split(",")] for line in rows[1:]])
    return data


_COV_COLS = [f"cov_{i}{j}" for i in range(4) for j in range(i, 4)]


def write_trajectory_csv(path, states) -> None:
    """Filtered trajectory with the 10 upper-triangle covariance entries."""
    path = Path(path)
    header = "cpi_index,r_m,theta_rad,vr_mps,vtheta_mps," + ",".join(_COV_COLS)
    lines = [header]
    for st in states:
        cov = [st.cov[i, j] for i in range(4) for j in range(i, 4)]
        vals = [st.r, st.theta, st.vr, st.vtheta] + cov
        lines.append(str(st.cpi) + "," + ",".join(_f(v) for v in vals))
    path.write_text("\n".join(lines) + "\n")


def write_snapshots_csv(path, snap) -> None:
    path = Path(path)
    lines = ["antenna,sample,re,im"]
    y = snap.y
    for n in range(y.shape[0]):
        for l in range(y.shape[1]):
            lines.append(f"{n},{l + 1},{_f(y[n, l].real)},{_f(y[n, l].imag)}")
    path.write_text("\n".join(lines) + "\n")


def write_table_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [str(c) if isinstance(c, (int, str)) else _f(c) for c in row]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
