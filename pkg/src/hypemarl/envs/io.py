"""Field snapshot export: flat CSV plus a JSON sidecar."""

import json

import numpy as np


def write_field_snapshot(csv_path, grid, y, t, mu):
    """Write ``node_index,x1,x2,y`` rows and a ``<csv_path>.json`` sidecar
    carrying (t, mu, grid dims)."""
    xy = grid.coords()
    y = np.asarray(y, dtype=np.float64).ravel()
    with open(csv_path, "w") as f:
        f.write("node_index,x1,x2,y\n")
        for k in range(grid.n):
            f.write(f"{k},{xy[k, 0]:.17g},{xy[k, 1]:.17g},{y[k]:.17g}\n")
    sidecar = {
        "t": int(t),
        "mu": [float(v) for v in np.atleast_1d(mu)],
        "rows": grid.rows,
        "cols": grid.cols,
    }
    with open(str(csv_path) + ".json", "w") as f:
        json.dump(sidecar, f, sort_keys=True, indent=2)
        f.write("\n")


def read_field_snapshot(csv_path):
    """Load a snapshot CSV back as (node_index, x1, x2, y) arrays."""
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    data = np.atleast_2d(data)
    return data[:, 0].astype(int), data[:, 1], data[:, 2], data[:, 3]
