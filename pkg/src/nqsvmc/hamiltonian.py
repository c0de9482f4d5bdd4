"""J1-J2 Heisenberg operator on the lattice torus.

Spin convention: s^z = +-1/2, so a diagonal bond term contributes
J * (+-1/4) and an antiparallel bond exchanges with matrix element J/2.
Connections are returned in deterministic bond order (j1 bonds first,
then j2 bonds, each in the lattice's sorted order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .configs import popcount
from .errors import ZeroAmplitudeReference
from .lattice import LatticeGeometry


@dataclass(frozen=True)
class HamiltonianSpec:
    j1: float
    j2: float
    geometry: LatticeGeometry

    def __post_init__(self):
        if not np.isfinite(self.j1) or not np.isfinite(self.j2):
            raise ValueError("couplings must be finite")

    def coupled_bonds(self):
        """(site_a, site_b, coupling) triples in deterministic order."""
        for a, b in self.geometry.j1_bonds:
            yield a, b, self.j1
        for a, b in self.geometry.j2_bonds:
            yield a, b, self.j2


@dataclass(frozen=True)
class Connection:
    """One off-diagonal matrix element H_{sigma sigma'} reachable from sigma."""

    target: int
    element: float


def diagonal_energy(spec: HamiltonianSpec, config: int) -> float:
    """Sum over bonds of J * s^z_a s^z_b."""
    total = 0.0
    c = int(config)
    for a, b, j in spec.coupled_bonds():
        same = ((c >> a) & 1) == ((c >> b) & 1)
        total += 0.25 * j if same else -0.25 * j
    return total


def connections(spec: HamiltonianSpec, config: int) -> list[Connection]:
    """Spin-exchange connections: one per antiparallel bond, element J/2."""
    out = []
    c = int(config)
    for a, b, j in spec.coupled_bonds():
        if ((c >> a) & 1) != ((c >> b) & 1):
            out.append(Connection(target=c ^ ((1 << a) | (1 << b)), element=0.5 * j))
    return out


def local_energy(spec: HamiltonianSpec, config: int, logpsi) -> complex:
    """E_loc(sigma) = H_diag + sum_c element_c * psi(target_c) / psi(sigma).

    ``logpsi`` maps a configuration to complex log psi.
    """
    ref = complex(logpsi(config))
    if not np.isfinite(ref.real):
        raise ZeroAmplitudeReference(
            f"local energy requested at configuration {config:#x} with zero amplitude"
        )
    total = complex(diagonal_energy(spec, config))
    for conn in connections(spec, config):
        total += conn.element * np.exp(complex(logpsi(conn.target)) - ref)
    return total


def marshall_sign(
    geometry: LatticeGeometry, config: int, sublattice: str = "checkerboard"
) -> int:
    """(-1)**(number of up spins on sublattice A)."""
    if sublattice == "checkerboard":
        mask = geometry.sublattice_a_checkerboard
    elif sublattice == "stripe":
        mask = geometry.sublattice_a_stripe
    else:
        raise ValueError(f"unknown sublattice {sublattice!r}")
    return -1 if popcount(int(config) & mask) % 2 else 1


# ---------------------------------------------------------------------------
# Batch versions used by the sampler/optimizer hot paths.
# ---------------------------------------------------------------------------

def _bond_arrays(spec: HamiltonianSpec):
    bonds = list(spec.coupled_bonds())
    a = np.array([b[0] for b in bonds], dtype=np.int64)
    b_ = np.array([b[1] for b in bonds], dtype=np.int64)
    j = np.array([b[2] for b in bonds], dtype=np.float64)
    return a, b_, j


def diagonal_energy_batch(spec: HamiltonianSpec, configs: np.ndarray) -> np.ndarray:
    configs = np.asarray(configs, dtype=np.int64)
    a, b, j = _bond_arrays(spec)
    bits_a = (configs[:, None] >> a) & 1
    bits_b = (configs[:, None] >> b) & 1
    same = bits_a == bits_b
    return np.where(same, 0.25, -0.25) @ j


def connections_batch(spec: HamiltonianSpec, configs: np.ndarray):
    """All exchange connections of a batch.

    Returns (targets, source_index, elements) flat arrays, ordered by bond
    then by source, matching the per-config deterministic order up to a
    stable permutation.
    """
    configs = np.asarray(configs, dtype=np.int64)
    a, b, j = _bond_arrays(spec)
    targets = []
    sources = []
    elements = []
    for bi in range(len(a)):
        flip = (np.int64(1) << a[bi]) | (np.int64(1) << b[bi])
        anti = ((configs >> a[bi]) & 1) != ((configs >> b[bi]) & 1)
        idx = np.nonzero(anti)[0]
        if len(idx):
            targets.append(configs[idx] ^ flip)
            sources.append(idx)
            elements.append(np.full(len(idx), 0.5 * j[bi]))
    if not targets:
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
        )
    return (
        np.concatenate(targets),
        np.concatenate(sources),
        np.concatenate(elements),
    )


def local_energy_batch(spec: HamiltonianSpec, configs: np.ndarray, logpsi_batch) -> np.ndarray:
    """Vectorized local energies.

    ``logpsi_batch`` maps an int64 config array to complex log psi values
    (with -inf real part where the amplitude vanishes).  Evaluations are
    deduplicated across the union of sources and targets.
    """
    configs = np.asarray(configs, dtype=np.int64)
    diag = diagonal_energy_batch(spec, configs)
    targets, src, elem = connections_batch(spec, configs)
    all_cfg = np.concatenate([configs, targets])
    uniq, inv = np.unique(all_cfg, return_inverse=True)
    logpsi = np.asarray(logpsi_batch(uniq), dtype=np.complex128)
    lp_src = logpsi[inv[: len(configs)]]
    lp_tgt = logpsi[inv[len(configs):]]
    finite_src = np.isfinite(lp_src.real)
    if not finite_src.all():
        bad = configs[~finite_src][0]
        raise ZeroAmplitudeReference(
            f"local energy requested at configuration {int(bad):#x} with zero amplitude"
        )
    ratios = np.exp(lp_tgt - lp_src[src])
    # Targets with vanishing amplitude contribute zero (ratio underflows).
    ratios = np.where(np.isfinite(lp_tgt.real), ratios, 0.0)
    e = diag.astype(np.complex128)
    if len(src):
        contrib = elem * ratios
        np.add.at(e, src, contrib)
    return e
