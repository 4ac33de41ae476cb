"""Sinusoidal positional encoding of scalar agent positions.

Each agent's position index p is embedded as interleaved pairs
[sin(p/w_j), cos(p/w_j)], j = 1..d/2, with geometric frequencies
w_j = n**(2j/d). The embedding is fixed (never trained) and is
precomputed once per agent layout.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class EncodingConfig:
    dim: int = 2048
    base: float = 1000.0

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2 != 0:
            raise ConfigurationError(f"encoding dim must be even and >= 2, got {self.dim}")
        if not self.base > 1.0:
            raise ConfigurationError(f"encoding base must be > 1, got {self.base}")


def positional_encoding(p, cfg):
    """Encode one scalar position as a length-``cfg.dim`` vector.

    Entry 2(j-1) is sin(p/w_j) and entry 2j-1 is cos(p/w_j).
    """
    half = cfg.dim // 2
    j = np.arange(1, half + 1, dtype=np.float64)
    omega = cfg.base ** (2.0 * j / cfg.dim)
    ang = float(p) / omega
    out = np.empty(cfg.dim)
    out[0::2] = np.sin(ang)
    out[1::2] = np.cos(ang)
    return out


@dataclass(frozen=True)
class AgentLayout:
    """Agent placement on a grid: scalar positions plus grid coordinates."""

    positions: np.ndarray   # (N,) scalar position per agent
    grid_rc: np.ndarray     # (N, 2) row/col of each agent's node
    rows: int
    cols: int

    @property
    def n_agents(self):
        return self.positions.shape[0]

    @property
    def node_index(self):
        return np.arange(self.n_agents)


def layout_positions(rows, cols, scheme="row_major"):
    """Assign scalar positions to grid nodes; default is the row-major index."""
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"grid must be non-empty, got {rows}x{cols}")
    if scheme != "row_major":
        raise ConfigurationError(f"unknown layout scheme {scheme!r}")
    n = rows * cols
    idx = np.arange(n)
    rc = np.stack([idx // cols, idx % cols], axis=1)
    return AgentLayout(positions=idx.astype(np.float64), grid_rc=rc,
                       rows=rows, cols=cols)


def encode_layout(layout, cfg):
    """Positional-encoding table for every agent, shape (N, dim)."""
    table = np.empty((layout.n_agents, cfg.dim))
    for i, p in enumerate(layout.positions):
        table[i] = positional_encoding(p, cfg)
    return table
