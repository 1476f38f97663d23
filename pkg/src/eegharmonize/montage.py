"""Electrode naming, canonical 10-20/10-10 coordinates, and channel matching.

Positions are generated analytically on a sphere: vertex (Cz) at +z, nasion
direction +y, left ear -x. The nasion-inion and ear-to-ear arcs are divided
in 10% steps (18 degrees); the outer ring sits at 72 degrees colatitude with
electrodes every 18 degrees of azimuth, a lower ring sits at 90 degrees, and
intermediate rows (F3, CP5, ...) are placed at equal fractions along the
circle through their two ring endpoints and their midline electrode. Old
nomenclature (T3/T4/T5/T6) is aliased onto the modern names before matching.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatchError, UnknownChannelError, ZeroPositionError

HEAD_RADIUS = 0.095  # meters

ALIASES = {"T3": "T7", "T4": "T8", "T5": "P7", "T6": "P8"}
_ALIASES_UPPER = {k.upper(): v for k, v in ALIASES.items()}


def normalize_name(name: str) -> str:
    """Canonical channel name: modern nomenclature, standard casing."""
    upper = name.strip().upper()
    upper = _ALIASES_UPPER.get(upper, upper)
    if upper.endswith("Z"):
        upper = upper[:-1] + "z"
    if upper.startswith("FP"):
        upper = "Fp" + upper[2:]
    if upper == "IZ":
        upper = "Iz"
    return upper


def _sph(colat_deg: float, azim_deg: float) -> np.ndarray:
    """Unit vector at given colatitude and azimuth (from +y toward -x)."""
    th = math.radians(colat_deg)
    ps = math.radians(azim_deg)
    return np.array(
        [-math.sin(th) * math.sin(ps), math.sin(th) * math.cos(ps), math.cos(th)]
    )


def _arc_points(p_left, p_mid, p_right, fracs):
    """Points at arc fractions from p_left toward p_mid on the circle
    through the three given points (all on the unit sphere)."""
    plane_points = np.stack([p_left, p_mid, p_right])
    normal = np.cross(p_left - p_mid, p_right - p_mid)
    normal = normal / np.linalg.norm(normal)
    center = float(normal @ plane_points.mean(axis=0)) * normal
    u = p_left - center
    radius = np.linalg.norm(u)
    u = u / radius
    w = np.cross(normal, u)
    rel = p_mid - center
    t_mid = math.atan2(float(rel @ w), float(rel @ u))
    return [
        center + radius * (math.cos(f * t_mid) * u + math.sin(f * t_mid) * w)
        for f in fracs
    ]


def _mirror_name(name: str) -> str:
    """Left electrode name -> right (odd digits + 1), e.g. FC5 -> FC6."""
    head = name.rstrip("0123456789")
    num = int(name[len(head):])
    return f"{head}{num + 1}"


def _build_unit_positions() -> dict[str, np.ndarray]:
    pos: dict[str, np.ndarray] = {}

    ring = [("Fpz", 0), ("Fp1", 18), ("AF7", 36), ("F7", 54), ("FT7", 72),
            ("T7", 90), ("TP7", 108), ("P7", 126), ("PO7", 144), ("O1", 162),
            ("Oz", 180)]
    for name, azim in ring:
        pos[name] = _sph(72.0, azim)
        if 0 < azim < 180:
            pos[_mirror_name(name) if name[-1].isdigit() else name] = _sph(72.0, -azim)

    lower = [("F9", 54), ("FT9", 72), ("T9", 90), ("TP9", 108), ("P9", 126),
             ("PO9", 144), ("O9", 162)]
    for name, azim in lower:
        pos[name] = _sph(90.0, azim)
        pos[_mirror_name(name)] = _sph(90.0, -azim)
    pos["Iz"] = _sph(90.0, 180.0)

    midline = [("AFz", 54.0, 0.0), ("Fz", 36.0, 0.0), ("FCz", 18.0, 0.0),
               ("Cz", 0.0, 0.0), ("CPz", 18.0, 180.0), ("Pz", 36.0, 180.0),
               ("POz", 54.0, 180.0)]
    for name, colat, azim in midline:
        pos[name] = _sph(colat, azim)

    rows = [("AF7", "AFz", ["AF5", "AF3", "AF1"]),
            ("F7", "Fz", ["F5", "F3", "F1"]),
            ("FT7", "FCz", ["FC5", "FC3", "FC1"]),
            ("T7", "Cz", ["C5", "C3", "C1"]),
            ("TP7", "CPz", ["CP5", "CP3", "CP1"]),
            ("P7", "Pz", ["P5", "P3", "P1"]),
            ("PO7", "POz", ["PO5", "PO3", "PO1"])]
    for left_end, mid, inner in rows:
        p_left, p_mid = pos[left_end], pos[mid]
        p_right = p_left * np.array([-1.0, 1.0, 1.0])
        points = _arc_points(p_left, p_mid, p_right, [0.25, 0.5, 0.75])
        for name, point in zip(inner, points):
            pos[name] = point
            pos[_mirror_name(name)] = point * np.array([-1.0, 1.0, 1.0])

    return pos


_UNIT_POSITIONS = _build_unit_positions()
STANDARD_CHANNELS = tuple(sorted(_UNIT_POSITIONS))


def standard_positions(head_radius: float = HEAD_RADIUS) -> dict[str, np.ndarray]:
    """All canonical electrode positions, scaled to the given head radius."""
    return {name: head_radius * vec for name, vec in _UNIT_POSITIONS.items()}


@dataclass(frozen=True)
class Montage:
    """Ordered named electrodes with 3-D head-frame positions in meters."""

    names: tuple[str, ...]
    positions: np.ndarray
    head_radius: float = HEAD_RADIUS

    def __post_init__(self):
        arr = np.array(self.positions, dtype=np.float64)
        if arr.shape != (len(self.names), 3):
            raise DimMismatchError(
                f"positions shape {arr.shape} does not match {len(self.names)} names"
            )
        normalized = [normalize_name(n) for n in self.names]
        if len(set(normalized)) != len(normalized):
            dupes = sorted({n for n in normalized if normalized.count(n) > 1})
            raise ValueError(f"duplicate channels after normalization: {dupes}")
        radii = np.linalg.norm(arr, axis=1)
        if np.any(radii > 1.25 * self.head_radius):
            raise ValueError("electrode positions exceed 1.25 x head radius")
        arr.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "positions", arr)

    def __len__(self):
        return len(self.names)

    @property
    def normalized_names(self) -> tuple[str, ...]:
        return tuple(normalize_name(n) for n in self.names)

    def to_json(self) -> str:
        return json.dumps(
            {
                "head_radius_m": self.head_radius,
                "channels": [
                    {"name": n, "pos_m": [float(v) for v in p]}
                    for n, p in zip(self.names, self.positions)
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Montage":
        doc = json.loads(text)
        names = [ch["name"] for ch in doc["channels"]]
        positions = np.array([ch["pos_m"] for ch in doc["channels"]], dtype=float)
        return cls(tuple(names), positions, float(doc["head_radius_m"]))


@dataclass(frozen=True)
class ChannelMatch:
    pairs: tuple[tuple[int, int], ...]
    unmatched_source: tuple[int, ...] = field(default=())
    unmatched_target: tuple[int, ...] = field(default=())


def montage_from_names(names, head_radius: float = HEAD_RADIUS) -> Montage:
    """Montage with canonical positions for the given channel names."""
    table = standard_positions(head_radius)
    positions = []
    for name in names:
        key = normalize_name(name)
        if key not in table:
            raise UnknownChannelError(f"no canonical position for channel {name!r}")
        positions.append(table[key])
    return Montage(tuple(names), np.array(positions), head_radius)


TEMPLATE_17_NAMES = (
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "C3", "Cz", "C4",
    "P3", "Pz", "P4", "T3", "T4", "T5", "T6",
)


def template_17(head_radius: float = HEAD_RADIUS) -> Montage:
    """The fixed 17-channel interpolation target template."""
    return montage_from_names(TEMPLATE_17_NAMES, head_radius)


def project_unit_sphere(m: Montage) -> np.ndarray:
    """Project electrode positions onto the unit sphere (directions kept)."""
    norms = np.linalg.norm(m.positions, axis=1)
    if np.any(norms < 1e-12):
        bad = [m.names[i] for i in np.nonzero(norms < 1e-12)[0]]
        raise ZeroPositionError(f"channels at origin cannot be projected: {bad}")
    return m.positions / norms[:, None]


def match_channels(a: Montage, b: Montage) -> ChannelMatch:
    """Pair channels by normalized name; deterministic source order."""
    b_index = {name: i for i, name in enumerate(b.normalized_names)}
    pairs = []
    matched_b = set()
    for i, name in enumerate(a.normalized_names):
        j = b_index.get(name)
        if j is not None:
            pairs.append((i, j))
            matched_b.add(j)
    unmatched_a = tuple(i for i in range(len(a)) if i not in {p[0] for p in pairs})
    unmatched_b = tuple(j for j in range(len(b)) if j not in matched_b)
    return ChannelMatch(tuple(pairs), unmatched_a, unmatched_b)
