"""Single-sphere EEG forward model.

Potentials of a current dipole inside a homogeneous conducting sphere with
an insulating boundary, expanded in Legendre series. For a dipole at radius
b = f*R with radial moment p_r and tangential moment vector p_t, the surface
potential at an electrode in direction e is

    V = 1/(4 pi sigma R^2) * sum_n f^(n-1) [ (2n+1) p_r P_n(c)
                                             + (2n+1)/n (p_t . e) P_n'(c) ]

with c the cosine of the dipole-electrode angle. The series is truncated at
degree 60 by default; leadfield columns are average-referenced because scalp
potentials are defined only up to a constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, DipoleOutsideSphereError
from .montage import Montage, project_unit_sphere

DEFAULT_N_TERMS = 60
DEFAULT_SIGMA = 0.33  # S/m, only fixes the overall potential scale


@dataclass(frozen=True)
class SourceSpace:
    """Oriented dipoles strictly inside the electrode sphere."""

    positions: np.ndarray   # (n_components, 3) meters
    orientations: np.ndarray  # (n_components, 3) unit vectors
    radius_fraction: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        ori = np.array(self.orientations, dtype=np.float64)
        if pos.shape != ori.shape or pos.ndim != 2 or pos.shape[1] != 3:
            raise DimMismatchError("positions and orientations must be (n, 3)")
        norms = np.linalg.norm(ori, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("orientations must be unit vectors (within 1e-12)")
        if not 0.0 < self.radius_fraction < 1.0:
            raise ValueError("radius_fraction must lie in (0, 1)")
        pos.setflags(write=False)
        ori.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "orientations", ori)

    @property
    def n_components(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Leadfield:
    """Electrode potentials per unit dipole moment, average-referenced."""

    matrix: np.ndarray  # (n_electrodes, n_components)
    montage: Montage
    source: SourceSpace

    def __post_init__(self):
        arr = np.array(self.matrix, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)


def fibonacci_source_grid(
    n: int, radius_fraction: float = 0.7, head_radius: float = 0.095
) -> SourceSpace:
    """Quasi-uniform dipole grid: n golden-angle spiral locations at
    radius_fraction * head_radius, three orthogonal unit orientations each."""
    if n < 4:
        raise ValueError(f"need at least 4 grid locations, got {n}")
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + 0.5) / n
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    dirs = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)

    # local orthonormal frame: radial, azimuthal, polar
    e1 = dirs
    ref = np.where(np.abs(dirs[:, 2:3]) > 0.9, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    e2 = np.cross(ref, e1)
    e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
    e3 = np.cross(e1, e2)

    positions = np.repeat(dirs * radius_fraction * head_radius, 3, axis=0)
    orientations = np.empty((3 * n, 3))
    orientations[0::3] = e1
    orientations[1::3] = e2
    orientations[2::3] = e3
    return SourceSpace(positions, orientations, radius_fraction)


def _legendre_and_derivative(x: np.ndarray, n_terms: int):
    """P_n(x) and P_n'(x) for n = 1..n_terms via stable recurrences."""
    p_prev = np.ones_like(x)   # P_0
    p_cur = x.copy()           # P_1
    d_prev = np.zeros_like(x)  # P_0'
    d_cur = np.ones_like(x)    # P_1'
    ps = [p_cur]
    ds = [d_cur]
    for n in range(1, n_terms):
        p_next = ((2 * n + 1) * x * p_cur - n * p_prev) / (n + 1)
        d_next = d_prev + (2 * n + 1) * p_cur  # P'_{n+1} = P'_{n-1} + (2n+1) P_n
        p_prev, p_cur = p_cur, p_next
        d_prev, d_cur = d_cur, d_next
        ps.append(p_cur)
        ds.append(d_cur)
    return np.stack(ps), np.stack(ds)


def dipole_potentials(
    montage: Montage,
    dip_positions: np.ndarray,
    dip_moments: np.ndarray,
    n_terms: int = DEFAULT_N_TERMS,
    sigma: float = DEFAULT_SIGMA,
) -> np.ndarray:
    """Surface potentials (n_electrodes x n_dipoles), no referencing applied.

    Electrodes are projected onto the sphere surface; dipoles must be
    strictly inside it.
    """
    radius = montage.head_radius
    elec = project_unit_sphere(montage)
    pos = np.atleast_2d(np.asarray(dip_positions, dtype=np.float64))
    mom = np.atleast_2d(np.asarray(dip_moments, dtype=np.float64))
    if pos.shape != mom.shape:
        raise DimMismatchError("dipole positions and moments must align")

    b = np.linalg.norm(pos, axis=1)
    if np.any(b >= radius * (1.0 - 1e-9)):
        raise DipoleOutsideSphereError(
            f"dipole radius up to {b.max():.4g} m not strictly inside "
            f"sphere of radius {radius:.4g} m"
        )
    f = b / radius
    # radial direction; arbitrary for a central dipole (only n=1 survives
    # there and the result is direction-independent)
    safe_b = np.where(b > 0, b, 1.0)
    r0 = np.where(b[:, None] > 0, pos / safe_b[:, None], [0.0, 0.0, 1.0])

    p_r = np.einsum("dk,dk->d", mom, r0)
    p_t = mom - p_r[:, None] * r0

    cosg = np.clip(elec @ r0.T, -1.0, 1.0)     # (E, D)
    w_t = elec @ p_t.T                         # (E, D) tangential projection
    pn, dpn = _legendre_and_derivative(cosg, n_terms)

    n = np.arange(1, n_terms + 1, dtype=np.float64)
    f_pow = f[None, :] ** (n[:, None] - 1.0)   # (N, D)
    radial = np.einsum("nd,ned->ed", f_pow * (2 * n[:, None] + 1), pn) * p_r
    tangential = np.einsum(
        "nd,ned->ed", f_pow * ((2 * n[:, None] + 1) / n[:, None]), dpn
    ) * w_t
    return (radial + tangential) / (4.0 * np.pi * sigma * radius**2)


def leadfield(
    src: SourceSpace,
    montage: Montage,
    n_terms: int = DEFAULT_N_TERMS,
    sigma: float = DEFAULT_SIGMA,
) -> Leadfield:
    """Average-referenced leadfield for every source component."""
    g = dipole_potentials(montage, src.positions, src.orientations, n_terms, sigma)
    g = g - g.mean(axis=0, keepdims=True)
    return Leadfield(g, montage, src)
