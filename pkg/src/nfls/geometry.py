"""Array geometry and waveform descriptions.

All geometries are planar (2-D), with antenna coordinates in meters. The
coordinate origin is the reference point for target direction and distance;
an array with no antenna at the origin only shifts the common phase of the
array response.
"""

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s, exact
FREE_SPACE_IMPEDANCE = 376.730313668  # ohm


@dataclass(frozen=True)
class Waveform:
    """Narrowband carrier description."""

    carrier_hz: float

    def __post_init__(self):
        if self.carrier_hz <= 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna coordinates of an N-element planar array."""

    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be an (N, 2) array with N >= 1")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def aperture(self) -> float:
        """Maximum pairwise antenna distance (0 for a single antenna)."""
        if self.n == 1:
            return 0.0
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())


@dataclass(frozen=True)
class SymmetricULA(ArrayGeometry):
    """Uniform linear array of N = 2M+1 antennas on the x-axis.

    Antenna n (1-based) sits at ((n - M - 1) d, 0), so the array is symmetric
    about the origin with the center antenna exactly at it.
    """

    half_size: int = 0
    spacing: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if self.half_size < 1:
            raise ValueError("half_size must be >= 1")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def offsets(self) -> np.ndarray:
        """Integer antenna offsets delta_n = n - M - 1 in [-M, M]."""
        return np.arange(-self.half_size, self.half_size + 1)

    @classmethod
    def from_geometry(cls, geometry: ArrayGeometry) -> "SymmetricULA":
        """Validate that ``geometry`` is a symmetric ULA and convert it.

        Raises ValueError naming the violated condition (odd count, on-axis,
        symmetry, or uniform spacing).
        """
        if isinstance(geometry, cls):
            return geometry
        pos = geometry.positions
        n = pos.shape[0]
        if n % 2 == 0 or n < 3:
            raise ValueError("symmetry: need an odd antenna count N = 2M+1 >= 3")
        if not np.allclose(pos[:, 1], 0.0, atol=1e-12):
            raise ValueError("symmetry: antennas must lie on the x-axis")
        x = pos[:, 0]
        if not np.all(np.diff(x) > 0):
            order = np.argsort(x)
            x = x[order]
        m = (n - 1) // 2
        d = x[m + 1] - x[m] if n > 1 else 0.0
        expected = (np.arange(n) - m) * d
        if d <= 0 or not np.allclose(x, expected, atol=1e-9 * max(d, 1.0)):
            raise ValueError("symmetry: antennas must be uniformly spaced about the origin")
        return cls(positions=np.column_stack([expected, np.zeros(n)]),
                   half_size=m, spacing=float(d))


def symmetric_ula(half_size: int, spacing: float) -> SymmetricULA:
    """Symmetric ULA with N = 2*half_size + 1 antennas."""
    offsets = np.arange(-half_size, half_size + 1, dtype=float)
    pos = np.column_stack([offsets * spacing, np.zeros_like(offsets)])
    return SymmetricULA(positions=pos, half_size=half_size, spacing=spacing)


def ula(n: int, spacing: float, reference: str = "end") -> ArrayGeometry:
    """N-element ULA on the x-axis.

    reference="end" puts antenna 0 at the origin (positions n*d); this is the
    indexing under which the closed-form accuracy bounds are stated.
    reference="center" centers the array on the origin.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    idx = np.arange(n, dtype=float)
    if reference == "center":
        idx = idx - (n - 1) / 2.0
    elif reference != "end":
        raise ValueError("reference must be 'end' or 'center'")
    return ArrayGeometry(positions=np.column_stack([idx * spacing, np.zeros(n)]))
