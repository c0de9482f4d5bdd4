"""Representative-configuration symmetrized basis.

Each orbit of the space group contributes at most one normalized basis
state per one-dimensional irrep: orbits whose stabilizer character sum
vanishes have zero projection and are excluded.  With

    N(x_E)^2 = sum over the stabilizer of x_E of chi(s)

the normalized symmetrized states are orthonormal, and the Hamiltonian is
block diagonal with elements

    H(x_E, y_E) = (1 / (N_x N_y)) sum_y <x_E|H|y> sum_{h: h y_E = y} chi(h)*

where y runs over the connections of x_E (diagonal included).  Block
eigenvalues are then exactly the sector eigenvalues belonging to the
irrep, which is what the tests pin down.

The network is only ever evaluated at canonical representatives; the
coefficient in the symmetrized basis follows by scalar inversion of
M(g') = sqrt(1/|G|) chi(g')*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularM, ZeroAmplitude
from .hamiltonian import HamiltonianSpec, connections, diagonal_energy
from .lattice import LatticeGeometry
from .nqs import ParameterVector, log_derivatives_batch, log_psi_batch
from .sampler import enumerate_sector
from .symmetry import Orbit, SymmetryGroup, SymmetryOp, apply, orbit

PROJECTION_TOL = 0.5


@dataclass(frozen=True)
class SymmetrizedBasisState:
    canonical: int
    irrep: tuple
    column: int
    norm: float


@dataclass(frozen=True)
class BlockHamiltonian:
    irrep: tuple
    states: tuple[SymmetrizedBasisState, ...]
    elements: dict

    def dense(self) -> np.ndarray:
        n = len(self.states)
        h = np.zeros((n, n), dtype=np.complex128)
        for (r, c), v in self.elements.items():
            h[r, c] = v
        return h


def orbit_norm(orb: Orbit) -> float:
    """Norm of the projected orbit state; 0.0 marks zero projection."""
    s = orb.stabilizer_char_sum
    if abs(s) < PROJECTION_TOL:
        return 0.0
    return float(np.sqrt(s.real))


def build_symmetrized_basis(
    group: SymmetryGroup, geometry: LatticeGeometry
) -> list[SymmetrizedBasisState]:
    """One basis state per orbit with nonzero projection, ordered by canonical."""
    sector = enumerate_sector(geometry)
    visited: set[int] = set()
    out = []
    for config in sector:
        c = int(config)
        if c in visited:
            continue
        orb = orbit(group, c)
        visited.update(orb.members)
        norm = orbit_norm(orb)
        if norm > 0.0:
            out.append(
                SymmetrizedBasisState(
                    canonical=orb.canonical,
                    irrep=group.irrep_label,
                    column=1,
                    norm=norm,
                )
            )
    return out


def psi_coefficient(
    theta: ParameterVector,
    canonical: int,
    group: SymmetryGroup,
    subset: tuple[int, ...] = (0,),
) -> complex:
    """Symmetrized-basis coefficient from raw network outputs.

    ``subset`` holds group-element indices; for a one-dimensional irrep it
    must contain exactly one element and the inversion is scalar:
    coefficient = psi_net(g' x_E) * sqrt(|G|) * chi(g').
    """
    if len(subset) != 1:
        raise SingularM(
            f"one-dimensional irreps need a single inversion element, got {len(subset)}"
        )
    orb = orbit(group, canonical)
    if orbit_norm(orb) == 0.0:
        raise ZeroAmplitude(
            f"orbit of configuration {canonical:#x} has zero projection in this irrep"
        )
    gi = subset[0]
    chi = group.characters[gi]
    m = np.sqrt(1.0 / len(group)) * np.conj(chi)
    if abs(m) < 1e-300:
        raise SingularM("inversion matrix is singular for the chosen subset")
    image = apply(group.ops[gi], canonical)
    la, ph, iz = log_psi_batch(theta, np.array([image]), _identity_group(group))
    if iz[0]:
        raise ZeroAmplitude(f"network amplitude vanishes at configuration {image:#x}")
    return complex(np.exp(la[0] + 1j * ph[0]) / m)


def _identity_group(group: SymmetryGroup) -> SymmetryGroup:
    """Identity-only group on the same number of sites."""
    n = len(group.ops[0].perm)
    op = SymmetryOp(perm=np.arange(n, dtype=np.int64), point="E", translation=(0, 0))
    return SymmetryGroup(
        ops=(op,), characters=np.ones(1, dtype=np.complex128), irrep_label=group.irrep_label
    )


def symmetrized_hamiltonian(
    spec: HamiltonianSpec,
    group: SymmetryGroup,
    canonical: int,
    column: int = 1,
):
    """Row of the block Hamiltonian at one canonical state.

    Returns (targets, elements): canonical representatives y_E with the
    accumulated complex elements H(x_E, y_E).  Connections whose orbit has
    zero projection are dropped (those symmetrized states do not exist).
    """
    orb_x = orbit(group, canonical)
    if orb_x.canonical != canonical:
        raise ValueError(
            f"{canonical:#x} is not the canonical representative of its orbit "
            f"({orb_x.canonical:#x})"
        )
    n_x = orbit_norm(orb_x)
    if n_x == 0.0:
        raise ZeroAmplitude(f"orbit of {canonical:#x} has zero projection in this irrep")
    acc: dict[int, complex] = {}
    entries = [(canonical, diagonal_energy(spec, canonical))]
    entries += [(c.target, c.element) for c in connections(spec, canonical)]
    orb_cache: dict[int, Orbit] = {orb_x.canonical: orb_x}
    for y, element in entries:
        orb_y = orbit(group, y)
        orb_y = orb_cache.setdefault(orb_y.canonical, orb_y)
        n_y = orbit_norm(orb_y)
        if n_y == 0.0:
            continue
        pos = orb_y.members.index(y)
        h0 = orb_y.op_to_member[pos]
        chi0 = group.characters[h0]
        acc[orb_y.canonical] = acc.get(orb_y.canonical, 0.0) + (
            element * np.conj(chi0) * n_y / n_x
        )
    targets = sorted(acc)
    return targets, [acc[t] for t in targets]


def block_hamiltonian(
    spec: HamiltonianSpec,
    group: SymmetryGroup,
    basis: list[SymmetrizedBasisState],
) -> BlockHamiltonian:
    """Dense assembly of one irrep block over the symmetrized basis."""
    index = {st.canonical: i for i, st in enumerate(basis)}
    elements = {}
    for st in basis:
        targets, vals = symmetrized_hamiltonian(spec, group, st.canonical, st.column)
        r = index[st.canonical]
        for t, v in zip(targets, vals):
            elements[(r, index[t])] = elements.get((r, index[t]), 0.0) + v
    return BlockHamiltonian(irrep=group.irrep_label, states=tuple(basis), elements=elements)


def symmetrized_energy_and_gradient(
    theta: ParameterVector,
    basis: list[SymmetrizedBasisState],
    spec: HamiltonianSpec,
    group: SymmetryGroup,
):
    """Exact-summation energy and parameter gradient in the symmetrized basis.

    The coefficient at each basis state is proportional to the raw network
    value at the canonical configuration, so weights, local energies and
    log-derivatives all reduce to network quantities at canonicals.
    Returns (energy, gradient, weights, local_energies).
    """
    canonicals = np.array([st.canonical for st in basis], dtype=np.int64)
    tg = _identity_group(group)
    la, ph, iz = log_psi_batch(theta, canonicals, tg)
    if iz.any():
        raise ZeroAmplitude(
            f"network amplitude vanishes at canonical configuration "
            f"{int(canonicals[iz][0]):#x}"
        )
    logc = la + 1j * ph
    index = {int(st.canonical): i for i, st in enumerate(basis)}
    e_loc = np.zeros(len(basis), dtype=np.complex128)
    for i, st in enumerate(basis):
        targets, vals = symmetrized_hamiltonian(spec, group, st.canonical, st.column)
        for t, v in zip(targets, vals):
            e_loc[i] += v * np.exp(logc[index[t]] - logc[i])
    logw = 2.0 * la
    w = np.exp(logw - logw.max())
    w /= w.sum()
    energy = complex(np.sum(w * e_loc))
    o = log_derivatives_batch(theta, canonicals, tg)
    grad = 2.0 * np.real(((w * (e_loc - energy))[:, None] * np.conj(o)).sum(axis=0))
    return energy, grad, w, e_loc
