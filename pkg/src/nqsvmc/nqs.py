"""Neural quantum state: amplitude net, phase net, symmetrized log psi.

The wave function is log psi(sigma) = A(sigma) + i phi(sigma) built from
two independent real-valued networks, group-symmetrized by averaging
character-weighted network values over group images of sigma:

    psi_sym(sigma) = (1/|G|) sum_g chi(g) exp(A(g sigma) + i phi(g sigma))

Amplitude net: one circular convolution layer whose kernels span the whole
torus (n_channels kernels of lattice size), followed by elementwise
absolute value, a channel-wise maximum per site, and a sum over sites.
Phase net: three fully connected layers (hidden width 8) with ReLU after
the first two.

All parameters live in one flat real vector; analytic log-derivatives are
computed by hand-rolled backpropagation through the group sum.

Subgradient conventions (deterministic): d|x|/dx = 0 at x = 0, channel
ties in the max resolve to the lowest channel index, dReLU(0) = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .configs import spins_from_config, spins_from_configs
from .errors import CheckpointMismatch, ZeroAmplitude
from .lattice import LatticeGeometry, build_square_lattice
from .symmetry import SymmetryGroup

N_CHANNELS = 64
N_HIDDEN = 8

# Relative symmetrized magnitude below which psi_sym counts as exactly zero.
ZERO_FLOOR = float(np.exp(-700.0))


@dataclass(frozen=True)
class AmplitudeNetParams:
    kernels: np.ndarray  # (n_channels, n_sites), rows are full-lattice kernels
    biases: np.ndarray  # (n_channels,)


@dataclass(frozen=True)
class PhaseNetParams:
    w1: np.ndarray  # (n_hidden, n_sites)
    b1: np.ndarray  # (n_hidden,)
    w2: np.ndarray  # (n_hidden, n_hidden)
    b2: np.ndarray  # (n_hidden,)
    w3: np.ndarray  # (n_hidden,)
    b3: np.ndarray  # (1,)


def amplitude_param_count(n_sites: int, n_channels: int = N_CHANNELS) -> int:
    return n_channels * (n_sites + 1)


def phase_param_count(n_sites: int, n_hidden: int = N_HIDDEN) -> int:
    return (n_sites * n_hidden + n_hidden) + (n_hidden * n_hidden + n_hidden) + (n_hidden + 1)


@dataclass(frozen=True)
class ParameterVector:
    """Flat real parameter vector with amplitude/phase block partitions."""

    theta: np.ndarray
    lx: int
    ly: int
    n_channels: int = N_CHANNELS
    n_hidden: int = N_HIDDEN

    def __post_init__(self):
        expected = self.n_amplitude + self.n_phase
        if len(self.theta) != expected:
            raise ValueError(
                f"parameter vector length {len(self.theta)} does not match the "
                f"{self.lx}x{self.ly} architecture (expected {expected})"
            )

    @property
    def n_sites(self) -> int:
        return self.lx * self.ly

    @property
    def n_amplitude(self) -> int:
        return amplitude_param_count(self.n_sites, self.n_channels)

    @property
    def n_phase(self) -> int:
        return phase_param_count(self.n_sites, self.n_hidden)

    @property
    def n_params(self) -> int:
        return len(self.theta)

    @property
    def partitions(self) -> dict:
        return {
            "amplitude": (0, self.n_amplitude),
            "phase": (self.n_amplitude, self.n_phase),
        }

    def amplitude_params(self) -> AmplitudeNetParams:
        n, c = self.n_sites, self.n_channels
        block = self.theta[: self.n_amplitude]
        return AmplitudeNetParams(
            kernels=block[: c * n].reshape(c, n), biases=block[c * n :]
        )

    def phase_params(self) -> PhaseNetParams:
        n, h = self.n_sites, self.n_hidden
        block = self.theta[self.n_amplitude :]
        o = 0
        w1 = block[o : o + h * n].reshape(h, n); o += h * n
        b1 = block[o : o + h]; o += h
        w2 = block[o : o + h * h].reshape(h, h); o += h * h
        b2 = block[o : o + h]; o += h
        w3 = block[o : o + h]; o += h
        b3 = block[o : o + 1]
        return PhaseNetParams(w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3)

    def replace_theta(self, theta: np.ndarray) -> "ParameterVector":
        return ParameterVector(
            theta=np.asarray(theta, dtype=np.float64),
            lx=self.lx,
            ly=self.ly,
            n_channels=self.n_channels,
            n_hidden=self.n_hidden,
        )


@dataclass(frozen=True)
class LogPsiValue:
    log_amplitude: float
    phase: float
    is_zero: bool

    def as_complex(self) -> complex:
        if self.is_zero:
            return complex(-np.inf, 0.0)
        return complex(self.log_amplitude, self.phase)


def init_parameters(
    geometry: LatticeGeometry,
    rng: np.random.Generator,
    amp_scale: float = 0.05,
    phase_scale: float = 0.05,
) -> ParameterVector:
    """Small uniform random weights; biases zero except amplitude biases.

    ``amp_scale`` / ``phase_scale`` are the half-widths of the uniform
    draws, so the defaults keep psi near-constant and the chain ergodic.
    """
    n = geometry.n_sites
    c, h = N_CHANNELS, N_HIDDEN
    theta = np.zeros(amplitude_param_count(n) + phase_param_count(n))
    pv = ParameterVector(theta=theta, lx=geometry.lx, ly=geometry.ly)
    ap = pv.amplitude_params()
    ap.kernels[:] = rng.uniform(-amp_scale, amp_scale, size=ap.kernels.shape)
    ap.biases[:] = rng.uniform(-amp_scale, amp_scale, size=ap.biases.shape)
    pp = pv.phase_params()
    pp.w1[:] = rng.uniform(-phase_scale, phase_scale, size=pp.w1.shape)
    pp.w2[:] = rng.uniform(-phase_scale, phase_scale, size=pp.w2.shape)
    pp.w3[:] = rng.uniform(-phase_scale, phase_scale, size=pp.w3.shape)
    return pv


@lru_cache(maxsize=16)
def _conv_gather_index(lx: int, ly: int) -> np.ndarray:
    """idx[site, kernel_pos] = site((i+l) % ly, (j+m) % lx)."""
    n = lx * ly
    idx = np.empty((n, n), dtype=np.int64)
    for i in range(ly):
        for j in range(lx):
            s = i * lx + j
            for l in range(ly):
                for m in range(lx):
                    idx[s, l * lx + m] = ((i + l) % ly) * lx + (j + m) % lx
    return idx


def _amp_forward_batch(pv: ParameterVector, spins: np.ndarray, want_cache: bool = False):
    ap = pv.amplitude_params()
    gathered = spins[:, _conv_gather_index(pv.lx, pv.ly)]  # (B, n_out, n_k)
    pre = gathered @ ap.kernels.T + ap.biases  # (B, n_out, C)
    mag = np.abs(pre)
    win = mag.argmax(axis=2)  # ties resolve to lowest channel
    amax = np.take_along_axis(mag, win[..., None], axis=2)[..., 0]
    a = amax.sum(axis=1)
    if want_cache:
        return a, (gathered, pre, win)
    return a


def _amp_backward_batch(pv: ParameterVector, cache) -> np.ndarray:
    gathered, pre, win = cache
    b, n_out, c = pre.shape
    winners = np.take_along_axis(pre, win[..., None], axis=2)[..., 0]
    sgn = np.sign(winners)  # zero pre-activation contributes no gradient
    mask = np.zeros((b, n_out, c))
    np.put_along_axis(mask, win[..., None], sgn[..., None], axis=2)
    gw = np.einsum("bsc,bsp->bcp", mask, gathered)
    gb = mask.sum(axis=1)
    return np.concatenate([gw.reshape(b, -1), gb], axis=1)


def _phase_forward_batch(pv: ParameterVector, spins: np.ndarray, want_cache: bool = False):
    pp = pv.phase_params()
    z1 = spins @ pp.w1.T + pp.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ pp.w2.T + pp.b2
    a2 = np.maximum(z2, 0.0)
    out = a2 @ pp.w3 + pp.b3[0]
    if want_cache:
        return out, (spins, z1, a1, z2, a2)
    return out


def _phase_backward_batch(pv: ParameterVector, cache) -> np.ndarray:
    pp = pv.phase_params()
    spins, z1, a1, z2, a2 = cache
    b = len(spins)
    dz2 = (z2 > 0) * pp.w3[None, :]
    d2w = np.einsum("bi,bj->bij", dz2, a1)
    da1 = dz2 @ pp.w2
    dz1 = (z1 > 0) * da1
    d1w = np.einsum("bi,bj->bij", dz1, spins)
    return np.concatenate(
        [
            d1w.reshape(b, -1),
            dz1,
            d2w.reshape(b, -1),
            dz2,
            a2,
            np.ones((b, 1)),
        ],
        axis=1,
    )


def amplitude_forward(params: ParameterVector, config: int) -> float:
    """A(sigma): translation-invariant by the circular convolution + site sum."""
    spins = spins_from_config(config, params.n_sites)[None, :]
    return float(_amp_forward_batch(params, spins))


def phase_forward(params: ParameterVector, config: int) -> float:
    spins = spins_from_config(config, params.n_sites)[None, :]
    return float(_phase_forward_batch(params, spins))


def _group_tables(pv: ParameterVector, spins: np.ndarray, group: SymmetryGroup):
    b = len(spins)
    ng = len(group)
    a = np.empty((b, ng))
    phi = np.empty((b, ng))
    for gi, op in enumerate(group.ops):
        sp = spins[:, op.inv_perm]
        a[:, gi] = _amp_forward_batch(pv, sp)
        phi[:, gi] = _phase_forward_batch(pv, sp)
    return a, phi


def log_psi_batch(pv: ParameterVector, configs: np.ndarray, group: SymmetryGroup):
    """Symmetrized log psi for a config batch.

    Returns (log_amplitude, phase, is_zero) arrays.  The complex group sum
    is evaluated with a max-shift so large log-amplitudes cannot overflow.
    """
    configs = np.asarray(configs, dtype=np.int64)
    spins = spins_from_configs(configs, pv.n_sites)
    a, phi = _group_tables(pv, spins, group)
    amax = a.max(axis=1)
    s = (np.exp(a - amax[:, None] + 1j * phi) * group.characters[None, :]).sum(axis=1)
    s /= len(group)
    mag = np.abs(s)
    is_zero = mag < ZERO_FLOOR
    log_amp = np.where(is_zero, -np.inf, amax + np.log(np.where(is_zero, 1.0, mag)))
    return log_amp, np.angle(s), is_zero


def log_psi(pv: ParameterVector, config: int, group: SymmetryGroup) -> LogPsiValue:
    la, ph, iz = log_psi_batch(pv, np.array([config]), group)
    return LogPsiValue(log_amplitude=float(la[0]), phase=float(ph[0]), is_zero=bool(iz[0]))


def log_psi_complex_batch(pv: ParameterVector, configs: np.ndarray, group: SymmetryGroup) -> np.ndarray:
    """Complex log psi with -inf real part where psi_sym vanishes."""
    la, ph, _ = log_psi_batch(pv, configs, group)
    return la + 1j * ph


def sampling_log_amplitude_batch(
    pv: ParameterVector, configs: np.ndarray, group: SymmetryGroup
) -> np.ndarray:
    """Phase-free symmetrized log-amplitude used as the sampling weight.

    log[(1/|G|) sum_g exp(A(g sigma))]: depends only on the amplitude
    network, so phase-parameter changes never touch the Markov chain.
    """
    configs = np.asarray(configs, dtype=np.int64)
    spins = spins_from_configs(configs, pv.n_sites)
    ng = len(group)
    a = np.empty((len(configs), ng))
    for gi, op in enumerate(group.ops):
        a[:, gi] = _amp_forward_batch(pv, spins[:, op.inv_perm])
    amax = a.max(axis=1)
    return amax + np.log(np.exp(a - amax[:, None]).sum(axis=1) / ng)


def log_derivatives_batch(
    pv: ParameterVector, configs: np.ndarray, group: SymmetryGroup
) -> np.ndarray:
    """d(log psi_sym)/d(theta_k), one complex row per configuration.

    Amplitude-block entries are complex-softmax-weighted sums of amplitude
    gradients over group images; phase-block entries carry the factor i.
    """
    configs = np.asarray(configs, dtype=np.int64)
    spins = spins_from_configs(configs, pv.n_sites)
    b = len(configs)
    ng = len(group)
    a, phi = _group_tables(pv, spins, group)
    amax = a.max(axis=1)
    terms = np.exp(a - amax[:, None] + 1j * phi) * group.characters[None, :]
    s = terms.sum(axis=1)
    if np.any(np.abs(s) / ng < ZERO_FLOOR):
        bad = configs[np.abs(s) / ng < ZERO_FLOOR][0]
        raise ZeroAmplitude(
            f"log-derivative requested at configuration {int(bad):#x} where the "
            f"symmetrized amplitude vanishes"
        )
    u = terms / s[:, None]  # complex weights summing to 1 over the group
    out = np.zeros((b, pv.n_params), dtype=np.complex128)
    na = pv.n_amplitude
    for gi, op in enumerate(group.ops):
        sp = spins[:, op.inv_perm]
        _, amp_cache = _amp_forward_batch(pv, sp, want_cache=True)
        _, ph_cache = _phase_forward_batch(pv, sp, want_cache=True)
        ga = _amp_backward_batch(pv, amp_cache)
        gp = _phase_backward_batch(pv, ph_cache)
        out[:, :na] += u[:, gi, None] * ga
        out[:, na:] += (1j * u[:, gi])[:, None] * gp
    return out


def log_derivatives(pv: ParameterVector, config: int, group: SymmetryGroup) -> np.ndarray:
    return log_derivatives_batch(pv, np.array([config]), group)[0]


# ---------------------------------------------------------------------------
# Checkpoint format: versioned JSON with architecture metadata.
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, pv: ParameterVector, group_name: str, extra: dict | None = None):
    payload = {
        "version": CHECKPOINT_VERSION,
        "lx": pv.lx,
        "ly": pv.ly,
        "group": group_name,
        "n_channels": pv.n_channels,
        "n_hidden": pv.n_hidden,
        "partitions": {k: list(v) for k, v in pv.partitions.items()},
        "theta": [float(x) for x in pv.theta],
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    """Returns (ParameterVector, metadata dict)."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(
            f"unsupported checkpoint version {payload.get('version')!r}"
        )
    pv = ParameterVector(
        theta=np.asarray(payload["theta"], dtype=np.float64),
        lx=payload["lx"],
        ly=payload["ly"],
        n_channels=payload.get("n_channels", N_CHANNELS),
        n_hidden=payload.get("n_hidden", N_HIDDEN),
    )
    meta = {k: payload[k] for k in payload if k != "theta"}
    return pv, meta


def geometry_for(pv: ParameterVector) -> LatticeGeometry:
    return build_square_lattice(pv.lx, pv.ly)
