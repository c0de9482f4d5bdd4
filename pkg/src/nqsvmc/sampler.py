"""Markov-chain Monte Carlo in the Sz=0 sector, plus exact enumeration.

Chains carry their own RNG streams (split from one master seed) and are
advanced in lockstep so batches are bitwise reproducible regardless of
how the amplitude evaluations are batched.

Proposals preserve magnetization: with probability ``p_nn`` a j1 bond is
drawn uniformly, otherwise an arbitrary site pair; if the drawn pair is
parallel the move is a no-op.  Pair selection probabilities do not depend
on the spin values, so the proposal density is exactly symmetric and the
Metropolis rule needs only the amplitude ratio.  Acceptance counts moves
that changed the configuration.

Sampling uses the phase-free symmetrized amplitude, so phase-parameter
changes leave fixed-seed batches bitwise unchanged.  Batches carry
self-normalized weights |psi_sym|^2 / p_sampling restoring unbiased
estimates under the full symmetrized wave function.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .configs import random_sz0_config
from .errors import NonErgodicWarning, SectorTooLarge
from .lattice import LatticeGeometry
from .nqs import ParameterVector, log_psi_batch, sampling_log_amplitude_batch
from .symmetry import SymmetryGroup

ACCEPTANCE_COLLAPSE_THRESHOLD = 1e-3
SECTOR_SITE_CAP = 20


@dataclass
class ChainState:
    config: int
    log_amp: float
    rng: np.random.Generator
    accepted: int = 0
    proposed: int = 0


@dataclass(frozen=True)
class SampleBatch:
    """Sampled configurations with the data needed for SR statistics.

    ``weights`` always sum to one: importance weights in MC mode, exact
    |psi_sym|^2 weights in enumeration mode.
    """

    configs: np.ndarray
    log_psis: np.ndarray  # complex log psi_sym, -inf real part if zero
    weights: np.ndarray
    acceptance: float
    is_zero: np.ndarray = field(default=None)


def init_chains(geometry: LatticeGeometry, n_chains: int, seed: int) -> list[ChainState]:
    """Independent chains with RNG streams split from one master seed."""
    streams = np.random.SeedSequence(seed).spawn(n_chains)
    chains = []
    for ss in streams:
        rng = np.random.Generator(np.random.PCG64(ss))
        chains.append(
            ChainState(
                config=random_sz0_config(geometry.n_sites, rng),
                log_amp=np.nan,
                rng=rng,
            )
        )
    return chains


def _draw_pair(rng: np.random.Generator, geometry: LatticeGeometry, p_nn: float):
    if rng.random() < p_nn:
        bond = geometry.j1_bonds[int(rng.integers(len(geometry.j1_bonds)))]
        return bond
    n = geometry.n_sites
    a = int(rng.integers(n))
    b = int(rng.integers(n - 1))
    if b >= a:
        b += 1
    return a, b


def propose_exchange(
    state: ChainState, geometry: LatticeGeometry, p_nn: float = 0.5
) -> int:
    """Candidate configuration from one pair-exchange draw.

    Returns the unchanged configuration when the drawn pair is parallel
    (the no-op keeps the proposal density symmetric).
    """
    a, b = _draw_pair(state.rng, geometry, p_nn)
    c = state.config
    if ((c >> a) & 1) != ((c >> b) & 1):
        return c ^ ((1 << a) | (1 << b))
    return c


def _advance_chains(chains, evaluator, geometry, p_nn):
    """One proposal round for every chain, candidate amplitudes batched."""
    candidates = []
    genuine = []
    for ci, ch in enumerate(chains):
        cand = propose_exchange(ch, geometry, p_nn)
        ch.proposed += 1
        candidates.append(cand)
        if cand != ch.config:
            genuine.append(ci)
    if not genuine:
        return
    cand_la = evaluator(np.array([candidates[ci] for ci in genuine], dtype=np.int64))
    for k, ci in enumerate(genuine):
        ch = chains[ci]
        la = float(cand_la[k])
        log_ratio = 2.0 * (la - ch.log_amp)
        u = ch.rng.random()
        if u < np.exp(min(log_ratio, 0.0)):
            ch.config = candidates[ci]
            ch.log_amp = la
            ch.accepted += 1


def metropolis_step(
    state: ChainState, evaluator, geometry: LatticeGeometry, p_nn: float = 0.5
) -> ChainState:
    """Single Metropolis update; accept with min(1, exp(2 dA))."""
    _advance_chains([state], evaluator, geometry, p_nn)
    return state


def run_sweeps(chains, evaluator, geometry, n_sweeps: int, p_nn: float = 0.5):
    """One sweep = n_sites proposal rounds per chain."""
    for _ in range(n_sweeps * geometry.n_sites):
        _advance_chains(chains, evaluator, geometry, p_nn)


def refresh_log_amps(chains, evaluator):
    la = evaluator(np.array([ch.config for ch in chains], dtype=np.int64))
    for ch, v in zip(chains, la):
        ch.log_amp = float(v)


def sample_configs(
    chains,
    evaluator,
    geometry: LatticeGeometry,
    n_samples: int,
    n_sweeps_between: int = 1,
    n_thermalize: int = 0,
    p_nn: float = 0.5,
):
    """Advance the chains and collect configurations.

    Returns (configs, sampling_log_amps, acceptance).  Samples are stored
    chain-major; each chain contributes every ``n_sweeps_between``-th state
    after ``n_thermalize`` sweeps.
    """
    if n_samples % len(chains):
        raise ValueError(
            f"n_samples={n_samples} must be divisible by n_chains={len(chains)}"
        )
    refresh_log_amps(chains, evaluator)
    acc0 = sum(ch.accepted for ch in chains)
    prop0 = sum(ch.proposed for ch in chains)
    run_sweeps(chains, evaluator, geometry, n_thermalize, p_nn)
    per_chain = n_samples // len(chains)
    configs = np.empty((len(chains), per_chain), dtype=np.int64)
    samp_la = np.empty((len(chains), per_chain))
    for k in range(per_chain):
        run_sweeps(chains, evaluator, geometry, n_sweeps_between, p_nn)
        for ci, ch in enumerate(chains):
            configs[ci, k] = ch.config
            samp_la[ci, k] = ch.log_amp
    proposed = sum(ch.proposed for ch in chains) - prop0
    accepted = sum(ch.accepted for ch in chains) - acc0
    acceptance = accepted / proposed if proposed else 0.0
    if acceptance < ACCEPTANCE_COLLAPSE_THRESHOLD:
        warnings.warn(
            f"batch acceptance {acceptance:.2e} below "
            f"{ACCEPTANCE_COLLAPSE_THRESHOLD}; Monte Carlo sampling has collapsed",
            NonErgodicWarning,
        )
    return configs.ravel(), samp_la.ravel(), acceptance


def sample_batch(
    chains,
    theta: ParameterVector,
    group: SymmetryGroup,
    n_samples: int,
    n_sweeps_between: int = 1,
    n_thermalize: int = 0,
    p_nn: float = 0.5,
) -> SampleBatch:
    """MC batch under the neural quantum state at fixed parameters."""
    geometry = _geometry_of(theta)

    def evaluator(cfgs):
        return sampling_log_amplitude_batch(theta, cfgs, group)

    configs, samp_la, acceptance = sample_configs(
        chains, evaluator, geometry, n_samples, n_sweeps_between, n_thermalize, p_nn
    )
    la, ph, iz = log_psi_batch(theta, configs, group)
    logw = np.where(iz, -np.inf, 2.0 * (la - samp_la))
    shift = logw.max()
    w = np.exp(logw - shift) if np.isfinite(shift) else np.zeros_like(logw)
    total = w.sum()
    weights = w / total if total > 0 else w
    return SampleBatch(
        configs=configs,
        log_psis=np.where(iz, -np.inf, la) + 1j * ph,
        weights=weights,
        acceptance=acceptance,
        is_zero=iz,
    )


@lru_cache(maxsize=8)
def _sector_cached(n_sites: int) -> np.ndarray:
    out = np.fromiter(
        (
            sum(1 << s for s in combo)
            for combo in itertools.combinations(range(n_sites), n_sites // 2)
        ),
        dtype=np.int64,
    )
    out.sort()
    return out


def enumerate_sector(geometry: LatticeGeometry) -> np.ndarray:
    """All Sz=0 configurations in ascending integer order."""
    n = geometry.n_sites
    if n > SECTOR_SITE_CAP:
        raise SectorTooLarge(
            f"Sz=0 sector of {n} sites has C({n},{n // 2}) states, beyond the "
            f"{SECTOR_SITE_CAP}-site enumeration cap"
        )
    if n % 2:
        raise ValueError("Sz=0 sector requires an even number of sites")
    return _sector_cached(n).copy()


def exact_sector_batch(
    theta: ParameterVector, group: SymmetryGroup, geometry: LatticeGeometry
) -> SampleBatch:
    """Full-sector batch with exact |psi_sym|^2 weights."""
    sector = enumerate_sector(geometry)
    la, ph, iz = log_psi_batch(theta, sector, group)
    finite = ~iz
    if not finite.any():
        raise ValueError("symmetrized wave function vanishes on the whole sector")
    logw = np.where(iz, -np.inf, 2.0 * la)
    shift = logw[finite].max()
    w = np.where(iz, 0.0, np.exp(np.where(iz, 0.0, logw - shift)))
    weights = w / w.sum()
    return SampleBatch(
        configs=sector,
        log_psis=np.where(iz, -np.inf, la) + 1j * ph,
        weights=weights,
        acceptance=1.0,
        is_zero=iz,
    )


def _geometry_of(theta: ParameterVector) -> LatticeGeometry:
    from .lattice import build_square_lattice

    return build_square_lattice(theta.lx, theta.ly)
