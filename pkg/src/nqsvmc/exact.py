"""Exact diagonalization of the Sz=0 sector and sign-structure diagnostics.

The sparse sector matrix is generated from the same bond lists and matrix
elements the Monte Carlo engine uses, so the oracle and the sampler can
never disagree about the operator.  Systems below dimension 512 are
diagonalized densely; larger sectors use Lanczos with full
reorthogonalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from .errors import NoConvergence, SectorTooLarge
from .hamiltonian import HamiltonianSpec, connections_batch, diagonal_energy_batch
from .nqs import ParameterVector, log_psi_batch
from .sampler import enumerate_sector
from .symmetry import SymmetryGroup

DENSE_CUTOFF = 512
SECTOR_DIM_CAP = 2_000_000
RESIDUAL_TOL = 1e-10
RITZ_TOL = 1e-12


@dataclass(frozen=True)
class SectorSpectrum:
    basis: np.ndarray
    ground_energy: float
    ground_vector: np.ndarray
    n_lanczos_iters: int

    @property
    def sector_dim(self) -> int:
        return len(self.basis)


def sector_matrix(spec: HamiltonianSpec, basis: np.ndarray) -> sparse.csr_matrix:
    """Sparse sector Hamiltonian over an ascending basis array."""
    diag = diagonal_energy_batch(spec, basis)
    targets, src, elem = connections_batch(spec, basis)
    cols = np.searchsorted(basis, targets)
    if len(cols) and (cols >= len(basis)).any():
        raise ValueError("connection target left the sector basis")
    rows = np.concatenate([np.arange(len(basis)), src])
    cols = np.concatenate([np.arange(len(basis)), cols])
    vals = np.concatenate([diag, elem])
    mat = sparse.coo_matrix((vals, (rows, cols)), shape=(len(basis), len(basis)))
    return mat.tocsr()


def _lanczos_ground(h, dim: int, max_iters: int, rng: np.random.Generator):
    """Lowest eigenpair by Lanczos with full reorthogonalization.

    Converged when the Ritz value moves less than RITZ_TOL for three
    consecutive iterations and the residual is below RESIDUAL_TOL.
    """
    max_iters = min(max_iters, dim)
    v_mat = np.empty((max_iters + 1, dim))
    v0 = rng.standard_normal(dim)
    v_mat[0] = v0 / np.linalg.norm(v0)
    alphas: list[float] = []
    betas: list[float] = []
    last_ritz = np.inf
    stable = 0
    for it in range(1, max_iters + 1):
        k = it - 1
        w = h @ v_mat[k]
        alpha = float(v_mat[k] @ w)
        alphas.append(alpha)
        # Full reorthogonalization against the whole Krylov basis.
        active = v_mat[: k + 1]
        w -= active.T @ (active @ w)
        w -= active.T @ (active @ w)
        beta = float(np.linalg.norm(w))
        evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas))
        ritz = float(evals[0])
        if abs(ritz - last_ritz) < RITZ_TOL:
            stable += 1
        else:
            stable = 0
        last_ritz = ritz
        exhausted = beta < 1e-13 or it == dim
        if stable >= 3 or exhausted:
            vec = evecs[:, 0] @ v_mat[:it]
            vec /= np.linalg.norm(vec)
            resid = np.linalg.norm(h @ vec - ritz * vec)
            if resid < RESIDUAL_TOL or exhausted:
                return ritz, vec, it
            stable = 0
        if exhausted:
            break
        betas.append(beta)
        if it < max_iters:
            v_mat[it] = w / beta
    raise NoConvergence(
        f"Lanczos did not converge to residual {RESIDUAL_TOL} in {max_iters} iterations"
    )


def ed_ground_state(
    spec: HamiltonianSpec,
    method: str = "auto",
    max_iters: int = 500,
    seed: int = 7,
) -> SectorSpectrum:
    """Lowest eigenpair of the Sz=0 sector.

    method: 'auto' (dense below 512, else Lanczos), 'dense', or 'lanczos'.
    The ground vector is normalized with its largest-magnitude component
    made positive.
    """
    basis = enumerate_sector(spec.geometry)
    dim = len(basis)
    if dim > SECTOR_DIM_CAP:
        raise SectorTooLarge(f"sector dimension {dim} exceeds the cap {SECTOR_DIM_CAP}")
    h = sector_matrix(spec, basis)
    if method == "auto":
        method = "dense" if dim < DENSE_CUTOFF else "lanczos"
    if method == "dense":
        evals, evecs = np.linalg.eigh(h.toarray())
        energy, vec, iters = float(evals[0]), evecs[:, 0].copy(), 0
    elif method == "lanczos":
        rng = np.random.default_rng(seed)
        energy, vec, iters = _lanczos_ground(h, dim, max_iters, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    pivot = np.argmax(np.abs(vec))
    if vec[pivot] < 0:
        vec = -vec
    return SectorSpectrum(
        basis=basis, ground_energy=energy, ground_vector=vec, n_lanczos_iters=iters
    )


def sector_eigenvalues(spec: HamiltonianSpec) -> np.ndarray:
    """Full dense spectrum of the Sz=0 sector (small systems only)."""
    basis = enumerate_sector(spec.geometry)
    return np.linalg.eigvalsh(sector_matrix(spec, basis).toarray())


def marshall_signs_batch(geometry, configs: np.ndarray, sublattice: str) -> np.ndarray:
    mask = (
        geometry.sublattice_a_checkerboard
        if sublattice == "checkerboard"
        else geometry.sublattice_a_stripe
    )
    masked = np.asarray(configs, dtype=np.int64) & np.int64(mask)
    counts = np.zeros(len(configs), dtype=np.int64)
    rest = masked.copy()
    while rest.any():
        counts += rest & 1
        rest >>= 1
    return np.where(counts % 2 == 0, 1.0, -1.0)


def sign_overlap_D(
    spectrum: SectorSpectrum, geometry, sublattice: str = "checkerboard"
) -> float:
    """Weighted agreement between exact ground-state signs and the sign rule.

    D = | sum |psi0|^2 sign(psi0) M(sigma) |; components below 1e-14 in
    magnitude contribute sign zero.  D = 1 iff the rule holds exactly.
    """
    v = spectrum.ground_vector
    weights = v**2
    signs = np.where(np.abs(v) < 1e-14, 0.0, np.sign(v))
    m = marshall_signs_batch(geometry, spectrum.basis, sublattice)
    return float(abs(np.sum(weights * signs * m)))


def _wrap_angle(x: np.ndarray) -> np.ndarray:
    """Map angles to (-pi, pi]."""
    out = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def phase_deviations(
    theta: ParameterVector,
    group: SymmetryGroup,
    geometry,
    configs: np.ndarray,
    sublattice: str = "checkerboard",
) -> np.ndarray:
    """Network phase minus the sign-rule phase, wrapped to (-pi, pi]."""
    _, phases, _ = log_psi_batch(theta, configs, group)
    m = marshall_signs_batch(geometry, configs, sublattice)
    ref = np.where(m > 0, 0.0, np.pi)
    return _wrap_angle(phases - ref)


def phase_cdf(
    theta: ParameterVector,
    group: SymmetryGroup,
    geometry,
    configs: np.ndarray,
    sublattice: str = "checkerboard",
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Empirical CDF of the phase deviation from the sign rule.

    ``configs`` may be a Monte Carlo batch (implicit uniform weights) or a
    full sector paired with |psi|^2 weights.  Returns a (K, 2) table of
    (x, F(x)) rows, one per distinct deviation value.
    """
    dev = phase_deviations(theta, group, geometry, configs, sublattice)
    if weights is None:
        weights = np.full(len(dev), 1.0 / len(dev))
    else:
        weights = np.asarray(weights, dtype=np.float64)
        weights = weights / weights.sum()
    order = np.argsort(dev, kind="stable")
    x = dev[order]
    f = np.cumsum(weights[order])
    # Collapse duplicate x values to the final (rightmost) cumulative mass.
    keep = np.ones(len(x), dtype=bool)
    keep[:-1] = x[1:] != x[:-1]
    return np.column_stack([x[keep], f[keep]])


def vmc_sign_overlap(
    theta: ParameterVector, group: SymmetryGroup, spectrum: SectorSpectrum
) -> float:
    """Sign agreement between the trained state and the exact ground state.

    sum |psi0|^2 cos(phi_theta - arg psi0 - alpha) maximized over the
    global offset alpha, which gives | sum |psi0|^2 e^{i (phi - arg)} |.
    """
    _, phases, _ = log_psi_batch(theta, spectrum.basis, group)
    ref = np.where(spectrum.ground_vector >= 0, 0.0, np.pi)
    z = np.sum(spectrum.ground_vector**2 * np.exp(1j * (phases - ref)))
    return float(abs(z))
