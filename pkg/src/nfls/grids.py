"""Search grids and sampled spectrum surfaces."""

from dataclasses import dataclass, field

import numpy as np


def cos_spaced_thetas(theta_min: float, theta_max: float, n: int) -> np.ndarray:
    """Directions uniform in cos(theta); gives uniform mainlobe coverage per cell."""
    if not (0.0 < theta_min < theta_max < np.pi):
        raise ValueError("need 0 < theta_min < theta_max < pi")
    v = np.linspace(np.cos(theta_max), np.cos(theta_min), n)
    return np.arccos(v)[::-1].copy()  # ascending in theta


def inverse_spaced_rs(r_min: float, r_max: float, n: int) -> np.ndarray:
    """Distances uniform in 1/r; matches the natural distance-resolution variable."""
    if not (0.0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    u = np.linspace(1.0 / r_max, 1.0 / r_min, n)
    return (1.0 / u)[::-1].copy()  # ascending in r


@dataclass(frozen=True)
class LocationGrid:
    """Cartesian product of direction and distance samples."""

    thetas: np.ndarray
    rs: np.ndarray
    theta_spacing: str = "cos"
    r_spacing: str = "inverse"

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        r = np.asarray(self.rs, dtype=float)
        if t.size < 1 or r.size < 1:
            raise ValueError("grid must be non-empty")
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "rs", r)

    @classmethod
    def regular(cls, theta_span, r_span, n_theta: int, n_r: int,
                theta_spacing: str = "cos", r_spacing: str = "inverse") -> "LocationGrid":
        if theta_spacing == "cos":
            thetas = cos_spaced_thetas(theta_span[0], theta_span[1], n_theta)
        elif theta_spacing == "linear":
            thetas = np.linspace(theta_span[0], theta_span[1], n_theta)
        else:
            raise ValueError("theta_spacing must be 'cos' or 'linear'")
        if r_spacing == "inverse":
            rs = inverse_spaced_rs(r_span[0], r_span[1], n_r)
        elif r_spacing == "linear":
            rs = np.linspace(r_span[0], r_span[1], n_r)
        else:
            raise ValueError("r_spacing must be 'inverse' or 'linear'")
        return cls(thetas=thetas, rs=rs, theta_spacing=theta_spacing, r_spacing=r_spacing)

    def refined(self) -> "LocationGrid":
        """Same spans with the step halved (node set is a superset)."""
        return LocationGrid.regular(
            (self.thetas[0], self.thetas[-1]), (self.rs[0], self.rs[-1]),
            2 * self.thetas.size - 1, 2 * self.rs.size - 1,
            self.theta_spacing, self.r_spacing)

    @property
    def n_cells(self) -> int:
        return self.thetas.size * self.rs.size


@dataclass(frozen=True)
class SpectrumGrid:
    """Sampled non-negative objective surface over a LocationGrid.

    1-D spectra (direction-only or distance-only slices) are represented with
    a singleton axis on the fixed dimension.
    """

    grid: LocationGrid
    values: np.ndarray
    flags: np.ndarray | None = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.thetas.size, self.grid.rs.size):
            raise ValueError("values shape must be (n_theta, n_r)")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum values must be finite")
        object.__setattr__(self, "values", v)

    def argmax_cell(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(i), int(j)
