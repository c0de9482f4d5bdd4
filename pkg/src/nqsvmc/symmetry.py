"""Space-group machinery for the periodic square lattice.

Operations are stored as site permutations: applying op g to a
configuration moves the spin at site s to site ``perm[s]``.  Point
operations act on lattice coordinates (i, j) about the origin cell:

    E     (i, j) -> (i, j)
    C4    (i, j) -> (j, L-1-i)
    C4^2  (i, j) -> (L-1-i, L-1-j)
    C4^3  (i, j) -> (L-1-j, i)
    sx    (i, j) -> (L-1-i, j)
    sy    (i, j) -> (i, L-1-j)
    sd    (i, j) -> (j, i)
    sdp   (i, j) -> (L-1-j, L-1-i)

Composed with all torus translations these generate the full symmorphic
space group.  Only one-dimensional irreps are supported: characters are
unit complex scalars chi(g) = exp(-i k.t) * chi_point(R).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .configs import spins_from_configs
from .errors import NotSquare, UnsupportedIrrep
from .lattice import LatticeGeometry

POINT_OP_NAMES = ("E", "C4", "C4^2", "C4^3", "sx", "sy", "sd", "sdp")

# Characters of the one-dimensional C4v irreps, in POINT_OP_NAMES order.
_POINT_CHARACTERS = {
    "A1": (1, 1, 1, 1, 1, 1, 1, 1),
    "A2": (1, 1, 1, 1, -1, -1, -1, -1),
    "B1": (1, -1, 1, -1, 1, 1, -1, -1),
    "B2": (1, -1, 1, -1, -1, -1, 1, 1),
}

# Linear part of each point op as a 2x2 integer matrix acting on (i, j).
_POINT_MATRICES = {
    "E": np.array([[1, 0], [0, 1]]),
    "C4": np.array([[0, 1], [-1, 0]]),
    "C4^2": np.array([[-1, 0], [0, -1]]),
    "C4^3": np.array([[0, -1], [1, 0]]),
    "sx": np.array([[-1, 0], [0, 1]]),
    "sy": np.array([[1, 0], [0, -1]]),
    "sd": np.array([[0, 1], [1, 0]]),
    "sdp": np.array([[0, -1], [-1, 0]]),
}


@dataclass(frozen=True)
class SymmetryOp:
    """One space-group element as a site permutation with its label."""

    perm: np.ndarray
    point: str
    translation: tuple[int, int]
    inv_perm: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.inv_perm is None:
            inv = np.empty_like(self.perm)
            inv[self.perm] = np.arange(len(self.perm))
            object.__setattr__(self, "inv_perm", inv)

    @property
    def n_sites(self) -> int:
        return len(self.perm)


@dataclass(frozen=True)
class SymmetryGroup:
    """A list of operations with aligned unit characters for a 1-D irrep."""

    ops: tuple[SymmetryOp, ...]
    characters: np.ndarray
    irrep_label: tuple

    def __len__(self) -> int:
        return len(self.ops)

    def character(self, index: int) -> complex:
        return self.characters[index]

    def find(self, perm: np.ndarray) -> int:
        """Index of the first op with the given permutation, or -1."""
        key = perm.tobytes()
        for i, op in enumerate(self.ops):
            if op.perm.tobytes() == key:
                return i
        return -1


@dataclass(frozen=True)
class Orbit:
    """Symmetry equivalence class of a configuration.

    ``members`` is sorted ascending, so ``members[0]`` is the canonical
    representative.  ``op_to_member[m]`` is the index in the group of one
    element g with g(canonical) = members[m].  ``stabilizer_char_sum`` is
    sum of chi(s) over the stabilizer of the canonical representative; its
    square root is the norm of the projected symmetrized state.
    """

    members: tuple[int, ...]
    canonical: int
    op_to_member: tuple[int, ...]
    stabilizer_char_sum: complex

    def __len__(self) -> int:
        return len(self.members)


def _point_coordinate_map(name: str, lx: int, ly: int):
    mat = _POINT_MATRICES[name]

    def cmap(i: int, j: int) -> tuple[int, int]:
        ii = mat[0, 0] * i + mat[0, 1] * j
        jj = mat[1, 0] * i + mat[1, 1] * j
        # Each -1 row of the matrix carries the affine offset L-1 so the
        # map stays on the torus about the origin cell.
        if mat[0, 0] + mat[0, 1] < 0:
            ii += ly - 1
        if mat[1, 0] + mat[1, 1] < 0:
            jj += lx - 1
        return ii % ly, jj % lx

    return cmap


def _perm_from_map(cmap, lx: int, ly: int) -> np.ndarray:
    perm = np.empty(lx * ly, dtype=np.int64)
    for i in range(ly):
        for j in range(lx):
            ii, jj = cmap(i, j)
            perm[i * lx + j] = ii * lx + jj
    return perm


def _point_op(name: str, lx: int, ly: int, translation=(0, 0)) -> SymmetryOp:
    cmap = _point_coordinate_map(name, lx, ly)
    ti, tj = translation

    def full(i, j):
        ii, jj = cmap(i, j)
        return (ii + ti) % ly, (jj + tj) % lx

    return SymmetryOp(
        perm=_perm_from_map(full, lx, ly), point=name, translation=(ti, tj)
    )


def build_c4v(geometry: LatticeGeometry) -> SymmetryGroup:
    """The 8 point operations about the origin, with A1 characters."""
    if geometry.lx != geometry.ly:
        raise NotSquare(f"C4v requires a square torus, got {geometry.lx}x{geometry.ly}")
    ops = tuple(
        _point_op(name, geometry.lx, geometry.ly) for name in POINT_OP_NAMES
    )
    chars = np.ones(len(ops), dtype=np.complex128)
    return SymmetryGroup(ops=ops, characters=chars, irrep_label=((0.0, 0.0), "A1"))


def trivial_group(geometry: LatticeGeometry) -> SymmetryGroup:
    """The group containing only the identity."""
    op = SymmetryOp(
        perm=np.arange(geometry.n_sites, dtype=np.int64),
        point="E",
        translation=(0, 0),
    )
    return SymmetryGroup(
        ops=(op,), characters=np.ones(1, dtype=np.complex128), irrep_label=((0.0, 0.0), "A1")
    )


def _validate_k(geometry: LatticeGeometry, k) -> tuple[float, float]:
    ki, kj = float(k[0]), float(k[1])
    ni = ki * geometry.ly / (2 * np.pi)
    nj = kj * geometry.lx / (2 * np.pi)
    if abs(ni - round(ni)) > 1e-9 or abs(nj - round(nj)) > 1e-9:
        raise ValueError(
            f"k={k} is not on the reciprocal grid of the {geometry.lx}x{geometry.ly} torus"
        )
    return ki, kj


def _k_equivalent(ka, kb, tol=1e-9) -> bool:
    return (
        abs((ka[0] - kb[0]) / (2 * np.pi) - round((ka[0] - kb[0]) / (2 * np.pi))) < tol
        and abs((ka[1] - kb[1]) / (2 * np.pi) - round((ka[1] - kb[1]) / (2 * np.pi))) < tol
    )


def build_space_group(
    geometry: LatticeGeometry, k=(0.0, 0.0), point_irrep: str = "A1"
) -> SymmetryGroup:
    """Little group of wave vector k with a 1-D point irrep.

    Contains every {R|t} whose point part leaves k invariant modulo a
    reciprocal lattice vector, with characters exp(-i k.t) * chi_point(R).
    """
    if geometry.lx != geometry.ly:
        raise NotSquare(
            f"space group with C4v point part requires a square torus, got "
            f"{geometry.lx}x{geometry.ly}"
        )
    if point_irrep not in _POINT_CHARACTERS:
        raise UnsupportedIrrep(
            f"point irrep {point_irrep!r} is not a supported one-dimensional "
            f"C4v irrep (choose from {sorted(_POINT_CHARACTERS)})"
        )
    ki, kj = _validate_k(geometry, k)
    kvec = np.array([ki, kj])
    ops = []
    chars = []
    point_chars = dict(zip(POINT_OP_NAMES, _POINT_CHARACTERS[point_irrep]))
    for name in POINT_OP_NAMES:
        # Point op acts on k through its (orthogonal) linear part.
        rk = _POINT_MATRICES[name] @ kvec
        if not _k_equivalent(rk, kvec):
            continue
        for ti in range(geometry.ly):
            for tj in range(geometry.lx):
                ops.append(_point_op(name, geometry.lx, geometry.ly, (ti, tj)))
                chars.append(
                    np.exp(-1j * (ki * ti + kj * tj)) * point_chars[name]
                )
    return SymmetryGroup(
        ops=tuple(ops),
        characters=np.asarray(chars, dtype=np.complex128),
        irrep_label=((ki, kj), point_irrep),
    )


def build_translation_group(geometry: LatticeGeometry, k=(0.0, 0.0)) -> SymmetryGroup:
    """Pure translation group with Bloch characters exp(-i k.t).

    Works on any torus, including ly = 1 chains, and is the building block
    for translation-sector diagnostics.
    """
    ki, kj = _validate_k(geometry, k)
    ops = []
    chars = []
    for ti in range(geometry.ly):
        for tj in range(geometry.lx):
            def cmap(i, j, ti=ti, tj=tj):
                return (i + ti) % geometry.ly, (j + tj) % geometry.lx

            ops.append(
                SymmetryOp(
                    perm=_perm_from_map(cmap, geometry.lx, geometry.ly),
                    point="E",
                    translation=(ti, tj),
                )
            )
            chars.append(np.exp(-1j * (ki * ti + kj * tj)))
    return SymmetryGroup(
        ops=tuple(ops),
        characters=np.asarray(chars, dtype=np.complex128),
        irrep_label=((ki, kj), "T"),
    )


def compose(a: SymmetryOp, b: SymmetryOp) -> SymmetryOp:
    """The operation 'apply b, then a'."""
    return SymmetryOp(perm=a.perm[b.perm], point=f"{a.point}*{b.point}", translation=(0, 0))


def apply(op: SymmetryOp, config: int) -> int:
    """Move the spin at each site s to site perm[s]."""
    out = 0
    c = int(config)
    perm = op.perm
    for s in range(len(perm)):
        if (c >> s) & 1:
            out |= 1 << int(perm[s])
    return out


def apply_batch(op: SymmetryOp, configs: np.ndarray, n_sites: int) -> np.ndarray:
    """Vectorized apply over an int64 config array."""
    spins = spins_from_configs(configs, n_sites) > 0
    permuted = spins[:, op.inv_perm]
    weights = (np.int64(1) << np.arange(n_sites, dtype=np.int64))
    return permuted @ weights


def orbit(group: SymmetryGroup, config: int) -> Orbit:
    """Orbit of a configuration with canonical representative and gauge ops.

    The canonical representative is the lexicographic (integer) minimum of
    the bit-packed members.
    """
    images = [apply(op, config) for op in group.ops]
    canonical = min(images)
    canon_images = (
        images if canonical == config else [apply(op, canonical) for op in group.ops]
    )
    seen: dict[int, int] = {}
    stab_sum = 0.0 + 0.0j
    for gi, img in enumerate(canon_images):
        if img not in seen:
            seen[img] = gi
        if img == canonical:
            stab_sum += group.characters[gi]
    members = tuple(sorted(seen))
    return Orbit(
        members=members,
        canonical=canonical,
        op_to_member=tuple(seen[m] for m in members),
        stabilizer_char_sum=complex(stab_sum),
    )
