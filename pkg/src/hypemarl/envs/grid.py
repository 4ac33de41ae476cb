"""Cell-centered square grid on the domain (-1, 1) x (-1, 1).

Nodes sit at cell centers, row-major indexed: node k = r*cols + c lives
at (x1[c], x2[r]). Cell-centering makes the zero-flux (Neumann) Laplacian
symmetric with zero row and column sums, which is what gives the solver
its exact discrete mass identity.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class Grid2D:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows != self.cols:
            raise ConfigurationError(
                f"PDE grid must be square, got {self.rows}x{self.cols}")
        if self.rows < 2:
            raise ConfigurationError(f"grid must be at least 2x2, got {self.rows}")

    @property
    def n(self):
        return self.rows * self.cols

    @property
    def h(self):
        return 2.0 / self.rows

    @property
    def x1(self):
        """Cell-center coordinates along the first (column) axis."""
        return -1.0 + (np.arange(self.cols) + 0.5) * self.h

    @property
    def x2(self):
        """Cell-center coordinates along the second (row) axis."""
        return -1.0 + (np.arange(self.rows) + 0.5) * self.h

    def coords(self):
        """(N, 2) array of node coordinates in row-major order."""
        c1, c2 = np.meshgrid(self.x1, self.x2)
        return np.stack([c1.ravel(), c2.ravel()], axis=1)

    def mass(self, y):
        """Discrete integral of a nodal field (midpoint rule)."""
        return self.h * self.h * float(np.sum(y))

    def to_2d(self, y):
        return np.asarray(y, dtype=np.float64).reshape(self.rows, self.cols)
