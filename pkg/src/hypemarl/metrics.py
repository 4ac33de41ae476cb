"""Per-episode CSV metric logs and cross-seed aggregation.

One row per episode with a mode tag (real / surrogate / eval). Numbers
are written with shortest round-trip float formatting, so two runs with
the same seed produce byte-identical logs except for the wall_time
column, which is excluded from any determinism comparison.
"""

import csv
import os

import numpy as np

from .errors import ConfigurationError, UsageError

METRIC_COLUMNS = ("episode", "mode", "mean_return", "critic_loss",
                  "actor_loss", "surrogate_loss", "wall_time", "real_episodes")
MODES = ("real", "surrogate", "eval")


def _fmt(x):
    return repr(float(x))


class MetricWriter:
    """Append-only CSV log; one call to ``log`` per episode row."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.write(",".join(METRIC_COLUMNS) + "\n")

    def log(self, episode, mode, mean_return, critic_loss, actor_loss,
            surrogate_loss, wall_time, real_episodes):
        if mode not in MODES:
            raise UsageError(f"unknown metric mode {mode!r}; expected {MODES}")
        row = (str(int(episode)), mode, _fmt(mean_return), _fmt(critic_loss),
               _fmt(actor_loss), _fmt(surrogate_loss), _fmt(wall_time),
               str(int(real_episodes)))
        self._fh.write(",".join(row) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_metrics(path):
    """Load a metric log into column arrays (mode stays a string list)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != METRIC_COLUMNS:
            raise ConfigurationError(
                f"unexpected metric header {header}; expected {METRIC_COLUMNS}")
        rows = list(reader)
    out = {
        "episode": np.array([int(r[0]) for r in rows], dtype=np.int64),
        "mode": [r[1] for r in rows],
        "real_episodes": np.array([int(r[7]) for r in rows], dtype=np.int64),
    }
    for k, name in ((2, "mean_return"), (3, "critic_loss"),
                    (4, "actor_loss"), (5, "surrogate_loss"), (6, "wall_time")):
        out[name] = np.array([float(r[k]) for r in rows])
    return out


def determinism_view(path):
    """Log bytes with the wall_time column blanked, for equality checks."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    wall = METRIC_COLUMNS.index("wall_time")
    out = []
    for line in lines:
        parts = line.split(",")
        parts[wall] = ""
        out.append(",".join(parts))
    return "\n".join(out)


def eval_curve(path):
    """(episodes, mean returns) of the eval rows of one log."""
    m = read_metrics(path)
    keep = np.array([mode == "eval" for mode in m["mode"]])
    return m["episode"][keep], m["mean_return"][keep]


def export_aggregate(run_dir, out_path=None):
    """Aggregate eval returns across seed-*/metrics.csv into quartile bands.

    Writes ``eval_aggregate.csv`` with columns episode,p25,p50,p75 and
    returns its path.
    """
    run_dir = os.fspath(run_dir)
    if not os.path.isdir(run_dir):
        raise UsageError(f"run directory {run_dir} does not exist")
    seed_logs = sorted(
        os.path.join(run_dir, d, "metrics.csv")
        for d in os.listdir(run_dir)
        if d.startswith("seed-")
        and os.path.isfile(os.path.join(run_dir, d, "metrics.csv")))
    if not seed_logs:
        raise UsageError(f"no seed-*/metrics.csv logs under {run_dir}")

    curves = [eval_curve(p) for p in seed_logs]
    episodes = curves[0][0]
    for p, (eps, _) in zip(seed_logs, curves):
        if not np.array_equal(eps, episodes):
            raise ConfigurationError(
                f"eval episodes in {p} do not match {seed_logs[0]}")
    returns = np.stack([ret for _, ret in curves])  # (seeds, evals)
    p25, p50, p75 = np.percentile(returns, [25, 50, 75], axis=0)

    out_path = out_path or os.path.join(run_dir, "eval_aggregate.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("episode,p25,p50,p75\n")
        for k in range(episodes.shape[0]):
            fh.write(f"{int(episodes[k])},{_fmt(p25[k])},"
                     f"{_fmt(p50[k])},{_fmt(p75[k])}\n")
    return out_path
