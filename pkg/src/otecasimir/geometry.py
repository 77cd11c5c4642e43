"""Geometry of a 1D lamellar grating body.

A body is a four-zone stack read away from the vacuum gap: zone 1 is the gap
itself, zone 2 the corrugation region of depth h (ridge material over a
fraction f of the period, groove material elsewhere), zone 3 the backing of
thickness delta, zone 4 the far side.  ``thickness=None`` marks a
semi-infinite backing, which forces zone 4 to equal zone 3 and removes the
far-side interface.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .materials import VACUUM, MaterialError


class GeometryError(ValueError):
    """Inconsistent grating geometry."""


@dataclass(frozen=True)
class GratingGeometry:
    """One lamellar grating body.

    Parameters
    ----------
    period : float
        Grating period D (m), > 0.
    depth : float
        Corrugation depth h (m), >= 0.
    thickness : float or None
        Backing thickness delta (m), >= 0, or None for a semi-infinite body.
    filling : float
        Ridge filling fraction f in [0, 1].
    shift : float
        Lateral offset x0 of the ridge centre (m).
    ridge, groove : material
        Zone-2 materials.
    backing : material
        Zone-3 material.
    beyond : material
        Zone-4 material; ignored (forced to ``backing``) when semi-infinite.
    """

    period: float
    depth: float
    thickness: float | None
    filling: float
    ridge: object
    shift: float = 0.0
    groove: object = VACUUM
    backing: object | None = None
    beyond: object = VACUUM

    def __post_init__(self):
        if self.period <= 0:
            raise GeometryError(f"period must be > 0, got {self.period}")
        if self.depth < 0:
            raise GeometryError(f"depth must be >= 0, got {self.depth}")
        if self.thickness is not None and self.thickness < 0:
            raise GeometryError(f"thickness must be >= 0 or None, got {self.thickness}")
        if not 0.0 <= self.filling <= 1.0:
            raise GeometryError(f"filling must be in [0, 1], got {self.filling}")
        if self.backing is None:
            object.__setattr__(self, "backing", self.ridge)
        if self.semi_infinite:
            # no far-side interface: zone 4 is the same medium as zone 3
            object.__setattr__(self, "beyond", self.backing)

    @property
    def semi_infinite(self):
        return self.thickness is None

    def filled_thickness(self):
        """Total stack thickness h + delta of the filled (f=1) body."""
        if self.semi_infinite:
            return None
        return self.depth + self.thickness

    def with_gap_side_vacuum_checked(self):
        """The force formulas assume the gap medium is vacuum; zone 1 always is."""
        return self

    def cache_token(self):
        def tok(m):
            try:
                return m.cache_token()
            except AttributeError:
                raise MaterialError(f"material {m!r} lacks cache_token()") from None

        return (
            self.period,
            self.depth,
            self.thickness,
            self.filling,
            self.shift,
            tok(self.ridge),
            tok(self.groove),
            tok(self.backing),
            tok(self.beyond),
        )

    def scaled(self, **kwargs):
        """Copy with selected fields replaced (sweep helper)."""
        return replace(self, **kwargs)
