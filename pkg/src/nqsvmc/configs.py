"""Bit-packed spin configurations.

A configuration is a non-negative integer; bit s set means spin up (+1)
at site s, clear means down (-1).  Batch routines operate on int64 numpy
arrays, which is safe for n_sites <= 62.
"""

from __future__ import annotations

import numpy as np


def spins_from_config(config: int, n_sites: int) -> np.ndarray:
    """Unpack one configuration to a +-1 float vector."""
    bits = (config >> np.arange(n_sites)) & 1
    return 2.0 * bits - 1.0


def spins_from_configs(configs: np.ndarray, n_sites: int) -> np.ndarray:
    """Unpack a batch of configurations to a (B, n_sites) +-1 float matrix."""
    configs = np.asarray(configs, dtype=np.int64)
    bits = (configs[:, None] >> np.arange(n_sites, dtype=np.int64)) & 1
    return 2.0 * bits - 1.0


def config_from_spins(spins) -> int:
    """Pack a +-1 (or 0/1) spin vector into an integer."""
    out = 0
    for s, v in enumerate(spins):
        if v > 0:
            out |= 1 << s
    return out


def popcount(config: int) -> int:
    return bin(config).count("1")


def magnetization(config: int, n_sites: int) -> int:
    """Total Sz in units of 1/2, i.e. n_up - n_down."""
    up = popcount(config)
    return 2 * up - n_sites


def all_up_config(n_sites: int) -> int:
    return (1 << n_sites) - 1


def neel_config(geometry) -> int:
    """Checkerboard state with up spins on sublattice A."""
    return geometry.sublattice_a_checkerboard


def random_sz0_config(n_sites: int, rng: np.random.Generator) -> int:
    """Uniformly random configuration with zero total magnetization."""
    if n_sites % 2:
        raise ValueError("Sz=0 sector requires an even number of sites")
    sites = rng.permutation(n_sites)[: n_sites // 2]
    out = 0
    for s in sites:
        out |= 1 << int(s)
    return out
