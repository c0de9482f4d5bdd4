"""Training loop binding sampler, statistics, solvers and momentum updates.

Each step samples (or enumerates) at the momentum look-ahead point,
solves the configured update rule there, applies the Nesterov update, and
optionally retunes the learning rate from the directional derivative
estimated on the retained batch with the updated parameters.

The per-step record is written as CSV with a metadata comment line; a
JSON summary and a final parameter checkpoint complete a run.
"""

from __future__ import annotations

import json
import os
import time
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import RunConfig
from .errors import FactorizationFailure, ZeroAmplitude
from .exact import ed_ground_state
from .hamiltonian import HamiltonianSpec
from .lattice import build_square_lattice
from .nqs import ParameterVector, init_parameters, save_checkpoint
from .optimizer import (
    OptimizerState,
    SrStatistics,
    adaptive_lr,
    assemble_statistics,
    energy_gradient,
    nag_step,
    solve_update,
)
from .sampler import (
    ACCEPTANCE_COLLAPSE_THRESHOLD,
    exact_sector_batch,
    init_chains,
    sample_batch,
)
from .symbasis import build_symmetrized_basis, symmetrized_energy_and_gradient
from .symmetry import build_c4v, build_space_group, trivial_group

COLLAPSE_ABORT_AFTER = 5  # consecutive collapsed batches before aborting


@dataclass
class StepRecord:
    step: int
    energy: float
    energy_per_site: float
    variance: float
    acceptance: float
    tau: float
    dtheta_norm: float
    seconds: float


@dataclass
class RunResult:
    records: list
    theta: ParameterVector
    summary: dict
    aborted: str | None = None
    checkpoint_path: str | None = None
    csv_path: str | None = None


def resolve_group(cfg: RunConfig, geometry):
    name = cfg.symmetry.group
    if name == "c4v":
        return build_c4v(geometry)
    if name == "space_group":
        return build_space_group(geometry, cfg.symmetry.k, cfg.symmetry.irrep)
    return trivial_group(geometry)


@lru_cache(maxsize=8)
def ed_energy_cached(lx: int, ly: int, j1: float, j2: float) -> float:
    geometry = build_square_lattice(lx, ly)
    spec = HamiltonianSpec(j1=j1, j2=j2, geometry=geometry)
    return ed_ground_state(spec).ground_energy


def _csv_float(x) -> str:
    return repr(float(x))


def write_run_csv(path, records, config_hash: str, seed: int):
    header = "step,energy,energy_per_site,variance,acceptance,tau,dtheta_norm,seconds"
    with open(path, "w") as fh:
        fh.write(f"# config_hash={config_hash} seed={seed}\n")
        fh.write(header + "\n")
        for r in records:
            fh.write(
                ",".join(
                    [
                        str(r.step),
                        _csv_float(r.energy),
                        _csv_float(r.energy_per_site),
                        _csv_float(r.variance),
                        _csv_float(r.acceptance),
                        _csv_float(r.tau),
                        _csv_float(r.dtheta_norm),
                        _csv_float(r.seconds),
                    ]
                )
                + "\n"
            )


class _RepresentativeMode:
    """Exact-summation training in the symmetrized basis.

    Statistics rows are raw-network log-derivatives at canonical
    configurations, weighted by the symmetrized-basis probabilities, so
    the same solver pipeline applies unchanged.
    """

    def __init__(self, geometry, group, spec):
        self.group = group
        self.spec = spec
        self.basis = build_symmetrized_basis(group, geometry)

    def statistics(self, theta: ParameterVector) -> SrStatistics:
        energy, _, w, e_loc = symmetrized_energy_and_gradient(
            theta, self.basis, self.spec, self.group
        )
        from .nqs import log_derivatives_batch
        from .symbasis import _identity_group

        canonicals = np.array([st.canonical for st in self.basis], dtype=np.int64)
        o = log_derivatives_batch(theta, canonicals, _identity_group(self.group))
        o_mean = w @ o
        oc = (o - o_mean) * np.sqrt(w)[:, None]
        eps = -np.sqrt(w) * (e_loc - energy)
        return SrStatistics(
            obar=np.concatenate([oc.real, oc.imag], axis=0),
            epsbar=np.concatenate([eps.real, eps.imag]),
            energy_mean=energy,
            energy_variance=float(np.sum(w * np.abs(e_loc - energy) ** 2)),
            n_samples=len(canonicals),
        )


def run_training(cfg: RunConfig, output_dir: str | None = None) -> RunResult:
    t_start = time.perf_counter()
    out_dir = output_dir or cfg.run.output_dir
    os.makedirs(out_dir, exist_ok=True)
    geometry = build_square_lattice(cfg.lattice.lx, cfg.lattice.ly)
    group = resolve_group(cfg, geometry)
    spec = HamiltonianSpec(j1=cfg.hamiltonian.j1, j2=cfg.hamiltonian.j2, geometry=geometry)
    opt_cfg = cfg.optimizer.to_optimizer_config()

    ss = np.random.SeedSequence(cfg.run.seed)
    ss_params, ss_chains = ss.spawn(2)
    theta = init_parameters(
        geometry,
        np.random.Generator(np.random.PCG64(ss_params)),
        amp_scale=cfg.init.amp_scale,
        phase_scale=cfg.init.phase_scale,
    )

    mode = cfg.run.mode
    chains = None
    rep = None
    if mode == "mc":
        chains = init_chains(geometry, cfg.sampler.n_chains, ss_chains)
    elif mode == "exact_sum_rep":
        rep = _RepresentativeMode(geometry, group, spec)

    ed_energy = None
    if geometry.n_sites <= 20 and (
        cfg.run.stop_rel_error is not None or geometry.n_sites <= 16
    ):
        ed_energy = ed_energy_cached(
            cfg.lattice.lx, cfg.lattice.ly, cfg.hamiltonian.j1, cfg.hamiltonian.j2
        )

    state = OptimizerState(
        velocity=np.zeros(theta.n_params),
        tau=opt_cfg.learning_rate,
        momentum_mu=opt_cfg.momentum_mu,
    )
    records: list[StepRecord] = []
    aborted = None
    collapsed_streak = 0
    best_energy = np.inf

    def make_stats(pv: ParameterVector, thermal: int) -> SrStatistics:
        if mode == "mc":
            batch = sample_batch(
                chains,
                pv,
                group,
                cfg.sampler.n_samples,
                n_sweeps_between=cfg.sampler.n_sweeps_between,
                n_thermalize=thermal,
                p_nn=cfg.sampler.p_nn,
            )
            stats = assemble_statistics(batch, pv, group, spec)
            return stats, batch
        if mode == "exact_sum":
            batch = exact_sector_batch(pv, group, geometry)
            return assemble_statistics(batch, pv, group, spec), batch
        return rep.statistics(pv), None

    for step in range(cfg.run.max_steps):
        thermal = cfg.sampler.n_thermalize if step == 0 else cfg.sampler.n_thermalize_update
        look = theta.replace_theta(theta.theta + state.momentum_mu * state.velocity)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                stats, batch = make_stats(look, thermal)
            delta = solve_update(stats, opt_cfg)
        except (FactorizationFailure, ZeroAmplitude) as exc:
            aborted = f"{type(exc).__name__}: {exc}"
            break
        grad = energy_gradient(stats)
        g_old = float(grad @ delta)
        theta_vec, state = nag_step(state, theta.theta, -delta)
        theta = theta.replace_theta(theta_vec)
        tau_used = state.tau
        if opt_cfg.lr_mode == "adaptive":
            try:
                if mode == "mc" or mode == "exact_sum":
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        stats_new = assemble_statistics(batch, theta, group, spec)
                else:
                    stats_new = rep.statistics(theta)
                g_new = float(energy_gradient(stats_new) @ delta)
                state.tau = adaptive_lr(state, g_old, g_new, opt_cfg.lr_growth, opt_cfg.lr_cap)
                state.last_grad_dot_dir = g_new
            except (FactorizationFailure, ZeroAmplitude) as exc:
                aborted = f"{type(exc).__name__}: {exc}"
                break
        acceptance = batch.acceptance if batch is not None else 1.0
        energy = float(stats.energy_mean.real)
        best_energy = min(best_energy, energy)
        records.append(
            StepRecord(
                step=step,
                energy=energy,
                energy_per_site=energy / geometry.n_sites,
                variance=stats.energy_variance,
                acceptance=acceptance,
                tau=tau_used,
                dtheta_norm=float(np.linalg.norm(state.velocity)),
                seconds=time.perf_counter() - t_start,
            )
        )
        if mode == "mc" and acceptance < ACCEPTANCE_COLLAPSE_THRESHOLD:
            collapsed_streak += 1
            if collapsed_streak >= COLLAPSE_ABORT_AFTER:
                aborted = (
                    f"NonErgodicWarning: acceptance below "
                    f"{ACCEPTANCE_COLLAPSE_THRESHOLD} for {collapsed_streak} batches"
                )
                break
        else:
            collapsed_streak = 0
        if cfg.run.checkpoint_every and (step + 1) % cfg.run.checkpoint_every == 0:
            save_checkpoint(
                os.path.join(out_dir, f"checkpoint_{step + 1}.json"),
                theta,
                cfg.symmetry.group,
                extra={"step": step + 1},
            )
        if (
            cfg.run.stop_rel_error is not None
            and ed_energy is not None
            and len(records) >= cfg.run.stop_window
        ):
            window = [r.energy for r in records[-cfg.run.stop_window :]]
            rel = abs(np.mean(window) - ed_energy) / abs(ed_energy)
            if rel <= cfg.run.stop_rel_error:
                break

    config_hash = cfg.config_hash()
    csv_path = os.path.join(out_dir, "learning_curve.csv")
    write_run_csv(csv_path, records, config_hash, cfg.run.seed)
    ckpt_path = os.path.join(out_dir, "checkpoint_final.json")
    save_checkpoint(
        ckpt_path, theta, cfg.symmetry.group, extra={"steps_run": len(records)}
    )
    tail = records[-min(50, len(records)):] if records else []
    final_e = float(np.mean([r.energy for r in tail])) if tail else np.nan
    summary = {
        "config_hash": config_hash,
        "seed": cfg.run.seed,
        "steps_run": len(records),
        "final_energy": final_e,
        "final_energy_per_site": final_e / geometry.n_sites if tail else np.nan,
        "best_energy": best_energy if records else np.nan,
        "best_energy_per_site": best_energy / geometry.n_sites if records else np.nan,
        "aborted": aborted,
    }
    if ed_energy is not None:
        summary["ed_energy"] = ed_energy
        summary["ed_energy_per_site"] = ed_energy / geometry.n_sites
        if tail:
            summary["rel_error_vs_ed"] = abs(final_e - ed_energy) / abs(ed_energy)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return RunResult(
        records=records,
        theta=theta,
        summary=summary,
        aborted=aborted,
        checkpoint_path=ckpt_path,
        csv_path=csv_path,
    )
