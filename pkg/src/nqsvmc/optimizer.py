"""Centered log-derivative statistics and the six parameter-update rules.

All parameters are real while network outputs are complex, so the
complex sample matrix is stacked into real form: the first N_s rows hold
real parts, the last N_s rows imaginary parts, each centered and scaled
by sqrt(weight).  In this representation the six solvers are

    base normal-equation form     (R^T R + beta I)^-1 R^T e
    base sample-space form        R^T (R R^T + beta I)^-1 e
    residual-scaled forms         same with e -> e~ (Im block scaled by m)
    preconditioner-scaled forms   R -> R~ (Re block scaled by m) in the
                                  preconditioner only; the right-hand
                                  vector stays the plain energy term R^T e

with m = ratio of the phase step to the amplitude step.  The minus sign
of the descent direction is folded into e, so solver outputs are steps to
ADD to the parameters; the momentum update below follows the opposite
(gradient) convention and the training loop negates accordingly.

Linear systems are solved by Cholesky factorization in double precision,
with a single retry at 10x the regularization before giving up.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import linalg

from .errors import FactorizationFailure, ZeroAmplitude
from .hamiltonian import HamiltonianSpec, local_energy_batch
from .nqs import ParameterVector, log_derivatives_batch, log_psi_complex_batch
from .sampler import SampleBatch
from .symmetry import SymmetryGroup


class UpdateRule(Enum):
    SR = "sr"
    MINSR = "minsr"
    EPS_TILDE_SR = "eps-tilde-sr"
    EPS_TILDE_MINSR = "eps-tilde-minsr"
    O_TILDE_SR = "o-tilde-sr"
    O_TILDE_MINSR = "o-tilde-minsr"


@dataclass(frozen=True)
class OptimizerConfig:
    rule: UpdateRule = UpdateRule.SR
    m: float = 1.0
    beta: float = 0.05
    beta1: float = None
    learning_rate: float = 0.04
    lr_mode: str = "fixed"  # fixed | adaptive
    momentum_mu: float = 0.5
    lr_cap: float = 0.2
    lr_growth: float = 1.2

    def __post_init__(self):
        if self.m < 1.0:
            raise ValueError(f"step-size ratio m must be >= 1, got {self.m}")
        if self.beta <= 0:
            raise ValueError(f"regularization beta must be positive, got {self.beta}")
        if self.beta1 is None:
            object.__setattr__(self, "beta1", self.beta)
        if self.beta1 <= 0:
            raise ValueError(f"beta1 must be positive, got {self.beta1}")
        if self.lr_mode not in ("fixed", "adaptive"):
            raise ValueError(f"lr_mode must be 'fixed' or 'adaptive', got {self.lr_mode!r}")
        if not 0.0 <= self.momentum_mu <= 1.0:
            raise ValueError(f"momentum_mu must lie in [0, 1], got {self.momentum_mu}")


@dataclass
class OptimizerState:
    velocity: np.ndarray
    tau: float
    momentum_mu: float = 0.5
    step: int = 0
    last_grad_dot_dir: float = 0.0


@dataclass(frozen=True)
class SrStatistics:
    """Stacked-real centered statistics of one sample batch.

    obar: (2 N_s, N_p) real matrix, Re rows over Im rows, each row
    sqrt(w) * (O - <O>_w).  epsbar: length 2 N_s, -sqrt(w) * (E_loc - E)
    stacked the same way.  With uniform weights this reduces to the
    1/sqrt(N_s) scaling of the plain Monte Carlo estimator.
    """

    obar: np.ndarray
    epsbar: np.ndarray
    energy_mean: complex
    energy_variance: float
    n_samples: int


def assemble_statistics(
    batch: SampleBatch,
    theta: ParameterVector,
    group: SymmetryGroup,
    hamiltonian: HamiltonianSpec,
) -> SrStatistics:
    """Local energies, centered log-derivatives and the residual vector.

    Zero-weight rows (vanishing symmetrized amplitude) carry no
    information and are dropped; the batch is rejected only if nothing
    remains.
    """
    w = np.asarray(batch.weights, dtype=np.float64)
    active = w > 0.0
    if not active.any():
        raise ZeroAmplitude("every configuration in the batch has zero weight")
    configs = np.asarray(batch.configs, dtype=np.int64)[active]
    w = w[active]
    w = w / w.sum()

    def logpsi(cfgs):
        return log_psi_complex_batch(theta, cfgs, group)

    e_loc = local_energy_batch(hamiltonian, configs, logpsi)
    e_mean = complex(np.sum(w * e_loc))
    e_var = float(np.sum(w * np.abs(e_loc - e_mean) ** 2))
    o = log_derivatives_batch(theta, configs, group)
    o_mean = w @ o
    oc = (o - o_mean) * np.sqrt(w)[:, None]
    eps = -np.sqrt(w) * (e_loc - e_mean)
    obar = np.concatenate([oc.real, oc.imag], axis=0)
    epsbar = np.concatenate([eps.real, eps.imag])
    return SrStatistics(
        obar=obar,
        epsbar=epsbar,
        energy_mean=e_mean,
        energy_variance=e_var,
        n_samples=len(configs),
    )


def energy_gradient(stats: SrStatistics) -> np.ndarray:
    """dE/dtheta = -2 R^T e in the stacked-real representation."""
    return -2.0 * (stats.obar.T @ stats.epsbar)


def _chol_solve(gram: np.ndarray, rhs: np.ndarray, beta: float) -> np.ndarray:
    n = gram.shape[0]
    for attempt, reg in enumerate((beta, 10.0 * beta)):
        m = gram + reg * np.eye(n)
        try:
            factor = linalg.cho_factor(m, lower=True)
        except linalg.LinAlgError:
            if attempt == 0:
                continue
            break
        x = linalg.cho_solve(factor, rhs)
        # One step of iterative refinement recovers the accuracy lost to
        # ill conditioning at small regularization.
        x += linalg.cho_solve(factor, rhs - m @ x)
        return x
    raise FactorizationFailure(
        f"regularized normal matrix is not positive definite at beta={beta} "
        f"(retried at {10 * beta})"
    )


def solve_sr(stats: SrStatistics, config: OptimizerConfig) -> np.ndarray:
    r, e = stats.obar, stats.epsbar
    return _chol_solve(r.T @ r, r.T @ e, config.beta)


def solve_minsr(stats: SrStatistics, config: OptimizerConfig) -> np.ndarray:
    r, e = stats.obar, stats.epsbar
    return r.T @ _chol_solve(r @ r.T, e, config.beta)


def _eps_tilde(stats: SrStatistics, m: float) -> np.ndarray:
    e = stats.epsbar.copy()
    e[stats.n_samples:] *= m
    return e


def _o_tilde(stats: SrStatistics, m: float) -> np.ndarray:
    r = stats.obar.copy()
    r[: stats.n_samples] *= m
    return r


def solve_eps_tilde(
    stats: SrStatistics, config: OptimizerConfig, variant: str = "sr"
) -> np.ndarray:
    """Residual-scaled rules: imaginary residual block multiplied by m."""
    r = stats.obar
    e = _eps_tilde(stats, config.m)
    if variant == "sr":
        return _chol_solve(r.T @ r, r.T @ e, config.beta)
    if variant == "minsr":
        return r.T @ _chol_solve(r @ r.T, e, config.beta)
    raise ValueError(f"variant must be 'sr' or 'minsr', got {variant!r}")


def solve_o_tilde(
    stats: SrStatistics, config: OptimizerConfig, variant: str = "sr"
) -> np.ndarray:
    """Preconditioner-scaled rules: Re block of the matrix multiplied by m.

    The right-hand vector is the unmodified energy term R^T e in both
    variants, keeping the plain gradient direction intact.
    """
    r, e = stats.obar, stats.epsbar
    rt = _o_tilde(stats, config.m)
    grad_rhs = r.T @ e
    if variant == "sr":
        return _chol_solve(rt.T @ rt, grad_rhs, config.beta)
    if variant == "minsr":
        gram = rt @ rt.T
        t1 = _chol_solve(gram, rt @ grad_rhs, config.beta1)
        t2 = _chol_solve(gram, t1, config.beta)
        return rt.T @ t2
    raise ValueError(f"variant must be 'sr' or 'minsr', got {variant!r}")


def solve_update(stats: SrStatistics, config: OptimizerConfig) -> np.ndarray:
    rule = config.rule
    if rule is UpdateRule.SR:
        return solve_sr(stats, config)
    if rule is UpdateRule.MINSR:
        return solve_minsr(stats, config)
    if rule is UpdateRule.EPS_TILDE_SR:
        return solve_eps_tilde(stats, config, "sr")
    if rule is UpdateRule.EPS_TILDE_MINSR:
        return solve_eps_tilde(stats, config, "minsr")
    if rule is UpdateRule.O_TILDE_SR:
        return solve_o_tilde(stats, config, "sr")
    if rule is UpdateRule.O_TILDE_MINSR:
        return solve_o_tilde(stats, config, "minsr")
    raise ValueError(f"unknown update rule {rule!r}")


def nag_step(
    state: OptimizerState, theta: np.ndarray, gradient_at_lookahead: np.ndarray
):
    """Momentum update: v' = mu v - tau g, theta' = theta + v'.

    The gradient must be evaluated at the look-ahead point
    theta + mu * v; the caller samples and solves there.
    """
    v = state.momentum_mu * state.velocity - state.tau * gradient_at_lookahead
    theta_new = theta + v
    new_state = replace(state, velocity=v, step=state.step + 1)
    return theta_new, new_state


def adaptive_lr(
    state: OptimizerState,
    grad_dot_dir_old: float,
    grad_dot_dir_new: float,
    lr_growth: float = 1.2,
    lr_cap: float = 0.2,
) -> float:
    """Interpolated step along the search direction, with guarded fallback.

    tau' = tau * g_old / (g_old - g_new) is accepted iff 0 < tau' < tau;
    otherwise tau' = min(lr_growth * tau, lr_cap).
    """
    tau = state.tau
    denom = grad_dot_dir_old - grad_dot_dir_new
    if denom != 0.0:
        cand = tau * grad_dot_dir_old / denom
        if 0.0 < cand < tau:
            return cand
    return min(lr_growth * tau, lr_cap)
