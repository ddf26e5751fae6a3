"""Procedural object catalog: 8 tabletop primitives with surface samplers.

Each object lives in a local frame with the bounding-box center at the
origin and the resting face at z = -hz. Shapes that afford an "up" are
z-asymmetric and shapes with a "front" put their distinguishing part on +x,
so the affordances are recoverable from the visible point cloud.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ObbExtents

# --------------------------------------------------------------------------
# Primitive surface patches. Each component is (area, sampler) where sampler
# maps (n, rng) -> (n, 3) local-frame points.
# --------------------------------------------------------------------------


def _box_components(center, half):
    center = np.asarray(center, dtype=np.float64)
    hx, hy, hz = half
    comps = []
    for axis, (ha, hb, hc) in ((0, (hy, hz, hx)), (1, (hx, hz, hy)), (2, (hx, hy, hz))):
        for sign in (-1.0, 1.0):
            area = 4.0 * ha * hb

            def sampler(n, rng, axis=axis, ha=ha, hb=hb, hc=hc, sign=sign):
                a = rng.uniform(-ha, ha, n)
                b = rng.uniform(-hb, hb, n)
                pts = np.empty((n, 3))
                other = [i for i in range(3) if i != axis]
                pts[:, other[0]] = a
                pts[:, other[1]] = b
                pts[:, axis] = sign * hc
                return pts + center

            comps.append((area, sampler))
    return comps


def _cylinder_lateral(center_xy, radius, z0, z1):
    cx, cy = center_xy
    area = 2.0 * np.pi * radius * (z1 - z0)

    def sampler(n, rng):
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        z = rng.uniform(z0, z1, n)
        return np.stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta), z], axis=1)

    return [(area, sampler)]


def _disk(center_xy, r_inner, r_outer, z):
    cx, cy = center_xy
    area = np.pi * (r_outer**2 - r_inner**2)

    def sampler(n, rng):
        r = np.sqrt(rng.uniform(r_inner**2, r_outer**2, n))
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        return np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta), np.full(n, z)], axis=1)

    return [(area, sampler)]


def _lower_hemisphere(center, radius):
    """Downward-opening shell (a bowl's outside)."""
    center = np.asarray(center, dtype=np.float64)
    area = 2.0 * np.pi * radius**2

    def sampler(n, rng):
        z = rng.uniform(-1.0, 0.0, n)
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        s = np.sqrt(1.0 - z**2)
        return center + radius * np.stack([s * np.cos(theta), s * np.sin(theta), z], axis=1)

    return [(area, sampler)]


@dataclass(frozen=True)
class ObjectSpec:
    """A catalog object: extents, affordance flags, and a surface sampler."""

    shape_id: str
    half_extents: ObbExtents
    has_up: bool = False
    has_front: bool = False
    horizontally_alignable: bool = False
    vertically_alignable: bool = False
    components: tuple = field(default=(), repr=False)

    def sample_surface(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw `count` points on the surface, area-weighted over components."""
        areas = np.array([a for a, _ in self.components])
        counts = rng.multinomial(count, areas / areas.sum())
        parts = [sampler(n, rng) for (_, sampler), n in zip(self.components, counts) if n > 0]
        return np.concatenate(parts, axis=0)

    @property
    def resting_height(self) -> float:
        """Center height when the object sits on a surface."""
        return float(self.half_extents.half_extents[2])


def _spec(shape_id, half, components, **flags) -> ObjectSpec:
    return ObjectSpec(
        shape_id=shape_id,
        half_extents=ObbExtents(np.asarray(half, dtype=np.float64)),
        components=tuple(components),
        **flags,
    )


def default_catalog() -> list[ObjectSpec]:
    specs = []

    # Plain box: no evident up or front, stackable upright against other boxes.
    specs.append(
        _spec(
            "box",
            (0.05, 0.04, 0.055),
            _box_components((0, 0, 0), (0.05, 0.04, 0.055)),
            vertically_alignable=True,
        )
    )

    # Flat slab (calculator-like): clearly elongated in x, lies flat.
    specs.append(
        _spec(
            "flat_box",
            (0.08, 0.05, 0.015),
            _box_components((0, 0, 0), (0.08, 0.05, 0.015)),
            horizontally_alignable=True,
        )
    )

    # Bottle: wide body, long narrow neck; the taper makes up visible.
    specs.append(
        _spec(
            "bottle",
            (0.042, 0.042, 0.085),
            _cylinder_lateral((0, 0), 0.042, -0.085, 0.005)
            + _disk((0, 0), 0.0, 0.042, -0.085)
            + _disk((0, 0), 0.017, 0.042, 0.005)
            + _cylinder_lateral((0, 0), 0.017, 0.005, 0.085)
            + _disk((0, 0), 0.0, 0.017, 0.085),
            has_up=True,
            vertically_alignable=True,
        )
    )

    # Mug: open-top cylinder, closed bottom, and a chunky handle on +x.
    specs.append(
        _spec(
            "mug",
            (0.058, 0.04, 0.05),
            _cylinder_lateral((-0.018, 0), 0.04, -0.05, 0.05)
            + _disk((-0.018, 0), 0.0, 0.04, -0.05)
            + _box_components((0.04, 0, 0.005), (0.018, 0.012, 0.042)),
            has_up=True,
            has_front=True,
            vertically_alignable=True,
        )
    )

    # Bowl: downward shell with a flat rim ring marking the opening.
    specs.append(
        _spec(
            "bowl",
            (0.05, 0.05, 0.025),
            _lower_hemisphere((0, 0, 0.025), 0.05)
            + _disk((0, 0), 0.038, 0.05, 0.025),
            has_up=True,
        )
    )

    # Hammer: long handle with a dominant crossbar head at +x.
    specs.append(
        _spec(
            "hammer",
            (0.1, 0.05, 0.018),
            _box_components((-0.035, 0, 0), (0.065, 0.01, 0.01))
            + _box_components((0.082, 0, 0), (0.018, 0.05, 0.018)),
            has_front=True,
            horizontally_alignable=True,
        )
    )

    # Pan: shallow open cylinder, handle on +x at rim height.
    specs.append(
        _spec(
            "pan",
            (0.085, 0.055, 0.02),
            _disk((-0.03, 0), 0.0, 0.055, -0.014)
            + _cylinder_lateral((-0.03, 0), 0.055, -0.02, 0.02)
            + _box_components((0.053, 0, 0.012), (0.032, 0.01, 0.008)),
            has_up=True,
            has_front=True,
            horizontally_alignable=True,
        )
    )

    # Carton: tall box with a gable ridge on top.
    specs.append(
        _spec(
            "carton",
            (0.035, 0.035, 0.07),
            _box_components((0, 0, -0.01), (0.035, 0.035, 0.06))
            + _box_components((0, 0, 0.06), (0.035, 0.01, 0.01)),
            has_up=True,
            vertically_alignable=True,
        )
    )

    return specs


DEFAULT_CATALOG = default_catalog()
