"""Square-lattice geometry with periodic boundary conditions.

Sites are indexed row-major: site(i, j) = i * lx + j with row i in [0, ly)
and column j in [0, lx).  Bit position s of a packed spin configuration
refers to site s under this indexing, so configurations are reproducible
across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooSmall, OddDimension


@dataclass(frozen=True)
class LatticeGeometry:
    """Torus geometry with first- and second-neighbor bond lists.

    Bonds are stored once per unordered pair, sorted lexicographically.
    ``sublattice_a_checkerboard`` / ``sublattice_a_stripe`` are bitmasks
    over sites; every j1 bond crosses the checkerboard partition and every
    j2 bond crosses the (column) stripe partition.
    """

    lx: int
    ly: int
    n_sites: int
    j1_bonds: tuple[tuple[int, int], ...]
    j2_bonds: tuple[tuple[int, int], ...]
    sublattice_a_checkerboard: int
    sublattice_a_stripe: int
    _site_coords: np.ndarray = field(repr=False, compare=False, default=None)

    def site(self, i: int, j: int) -> int:
        return (i % self.ly) * self.lx + (j % self.lx)

    def coords(self, s: int) -> tuple[int, int]:
        return divmod(s, self.lx)

    def bonds(self, coupling: str) -> tuple[tuple[int, int], ...]:
        if coupling == "j1":
            return self.j1_bonds
        if coupling == "j2":
            return self.j2_bonds
        raise ValueError(f"unknown coupling class {coupling!r}")


def _neighbor_pairs(lx: int, ly: int, offsets) -> tuple[tuple[int, int], ...]:
    # On small tori (lx or ly == 2) the same unordered pair arises through
    # two different wraps; a set keeps each bond once so Hamiltonian matrix
    # elements are not double-counted.
    pairs = set()
    for i in range(ly):
        for j in range(lx):
            s = i * lx + j
            for di, dj in offsets:
                t = ((i + di) % ly) * lx + (j + dj) % lx
                if s != t:
                    pairs.add((min(s, t), max(s, t)))
    return tuple(sorted(pairs))


def build_square_lattice(lx: int, ly: int) -> LatticeGeometry:
    """Build the lx x ly torus with j1 (nearest) and j2 (diagonal) bonds.

    Both dimensions must be even so the checkerboard and stripe partitions
    close around the torus.
    """
    if lx < 2 or ly < 2:
        raise DimensionTooSmall(f"lattice must be at least 2x2, got {lx}x{ly}")
    if lx % 2 or ly % 2:
        raise OddDimension(
            f"lattice dimensions must be even for consistent sublattices, got {lx}x{ly}"
        )
    n_sites = lx * ly
    j1 = _neighbor_pairs(lx, ly, [(0, 1), (1, 0)])
    j2 = _neighbor_pairs(lx, ly, [(1, 1), (1, -1)])
    checker = 0
    stripe = 0
    for i in range(ly):
        for j in range(lx):
            s = i * lx + j
            if (i + j) % 2 == 0:
                checker |= 1 << s
            if j % 2 == 0:
                stripe |= 1 << s
    coords = np.array([(s // lx, s % lx) for s in range(n_sites)], dtype=np.int64)
    return LatticeGeometry(
        lx=lx,
        ly=ly,
        n_sites=n_sites,
        j1_bonds=j1,
        j2_bonds=j2,
        sublattice_a_checkerboard=checker,
        sublattice_a_stripe=stripe,
        _site_coords=coords,
    )
