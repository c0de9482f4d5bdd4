"""Command-line interface: train, ed, symm-ed, analyze-sign, validate-config.

Heavy imports are deferred into the handlers so the thread cap (set via
``--threads`` or the NQSVMC_THREADS environment variable) takes effect
before the linear-algebra backend initializes its pools.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, NqsVmcError


def _apply_thread_cap(threads: int | None):
    cap = threads
    if cap is None and os.environ.get("NQSVMC_THREADS"):
        cap = int(os.environ["NQSVMC_THREADS"])
    if cap is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(cap)


def _load_config(args):
    from .config import PRESETS, load_config

    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r} (available: {sorted(PRESETS)})"
            )
        import copy

        return copy.deepcopy(PRESETS[args.preset])
    if getattr(args, "config", None):
        return load_config(args.config)
    raise ConfigError("either --config or --preset is required")


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.run.seed = args.seed
    if getattr(args, "max_steps", None) is not None:
        cfg.run.max_steps = args.max_steps
    if getattr(args, "output_dir", None):
        cfg.run.output_dir = args.output_dir
    from .config import validate_config

    validate_config(cfg)
    return cfg


def cmd_train(args) -> int:
    from .training import run_training

    cfg = _apply_overrides(_load_config(args), args)
    result = run_training(cfg)
    print(json.dumps(result.summary, indent=2))
    return 1 if result.aborted else 0


def cmd_ed(args) -> int:
    from .exact import ed_ground_state, sign_overlap_D
    from .hamiltonian import HamiltonianSpec
    from .lattice import build_square_lattice

    cfg = _load_config(args)
    geometry = build_square_lattice(cfg.lattice.lx, cfg.lattice.ly)
    spec = HamiltonianSpec(j1=cfg.hamiltonian.j1, j2=cfg.hamiltonian.j2, geometry=geometry)
    spectrum = ed_ground_state(spec)
    payload = {
        "lattice": f"{cfg.lattice.lx}x{cfg.lattice.ly}",
        "j2_over_j1": cfg.hamiltonian.j2 / cfg.hamiltonian.j1,
        "sector_dim": spectrum.sector_dim,
        "ground_energy": spectrum.ground_energy,
        "ground_energy_per_site": spectrum.ground_energy / geometry.n_sites,
        "D_checkerboard": sign_overlap_D(spectrum, geometry, "checkerboard"),
        "D_stripe": sign_overlap_D(spectrum, geometry, "stripe"),
    }
    print(json.dumps(payload, indent=2))
    return 0


def cmd_symm_ed(args) -> int:
    import numpy as np

    from .hamiltonian import HamiltonianSpec
    from .lattice import build_square_lattice
    from .symbasis import block_hamiltonian, build_symmetrized_basis
    from .symmetry import build_space_group

    cfg = _load_config(args)
    geometry = build_square_lattice(cfg.lattice.lx, cfg.lattice.ly)
    spec = HamiltonianSpec(j1=cfg.hamiltonian.j1, j2=cfg.hamiltonian.j2, geometry=geometry)
    blocks = []
    for irrep in ("A1", "A2", "B1", "B2"):
        group = build_space_group(geometry, cfg.symmetry.k, irrep)
        basis = build_symmetrized_basis(group, geometry)
        entry = {
            "irrep": irrep,
            "k": list(cfg.symmetry.k),
            "dimension": len(basis),
        }
        if basis:
            h = block_hamiltonian(spec, group, basis).dense()
            entry["lowest_eigenvalue"] = float(np.linalg.eigvalsh(h)[0])
        blocks.append(entry)
    print(json.dumps({"lattice": f"{cfg.lattice.lx}x{cfg.lattice.ly}", "blocks": blocks}, indent=2))
    return 0


def cmd_analyze_sign(args) -> int:
    import numpy as np

    from .errors import CheckpointMismatch
    from .exact import ed_ground_state, phase_cdf, vmc_sign_overlap
    from .hamiltonian import HamiltonianSpec
    from .lattice import build_square_lattice
    from .nqs import load_checkpoint
    from .sampler import enumerate_sector
    from .training import resolve_group

    cfg = _load_config(args)
    pv, meta = load_checkpoint(args.checkpoint)
    if (pv.lx, pv.ly) != (cfg.lattice.lx, cfg.lattice.ly):
        raise CheckpointMismatch(
            f"checkpoint lattice {pv.lx}x{pv.ly} does not match config "
            f"{cfg.lattice.lx}x{cfg.lattice.ly}"
        )
    geometry = build_square_lattice(cfg.lattice.lx, cfg.lattice.ly)
    group = resolve_group(cfg, geometry)
    spec = HamiltonianSpec(j1=cfg.hamiltonian.j1, j2=cfg.hamiltonian.j2, geometry=geometry)
    sector = enumerate_sector(geometry)
    from .nqs import log_psi_batch

    la, _, iz = log_psi_batch(pv, sector, group)
    logw = np.where(iz, -np.inf, 2.0 * la)
    w = np.exp(logw - logw[~iz].max()) if (~iz).any() else np.ones(len(sector))
    w = np.where(iz, 0.0, w)
    w /= w.sum()
    table = phase_cdf(pv, group, geometry, sector, args.sublattice, weights=w)
    out_path = args.output or "phase_cdf.csv"
    with open(out_path, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash()} seed={cfg.run.seed}\n")
        fh.write("phase_deviation,cdf\n")
        for x, f in table:
            fh.write(f"{float(x)!r},{float(f)!r}\n")
    spectrum = ed_ground_state(spec)
    payload = {
        "sublattice": args.sublattice,
        "cdf_path": out_path,
        "n_configs": len(sector),
        "sign_overlap": vmc_sign_overlap(pv, group, spectrum),
    }
    print(json.dumps(payload, indent=2))
    return 0


def cmd_validate_config(args) -> int:
    from .config import load_config

    load_config(args.config)
    print("ok")
    return 0


def cmd_presets(args) -> int:
    from .config import PRESETS

    if args.name:
        if args.name not in PRESETS:
            raise ConfigError(f"unknown preset {args.name!r}")
        print(json.dumps(PRESETS[args.name].to_dict(), indent=2))
    else:
        for name in sorted(PRESETS):
            print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nqsvmc",
        description="Variational Monte Carlo for neural quantum states on the "
        "J1-J2 Heisenberg square lattice",
    )
    p.add_argument("--threads", type=int, default=None, help="cap worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_args(sp, preset=True):
        sp.add_argument("--config", help="path to a JSON run configuration")
        if preset:
            sp.add_argument("--preset", help="named built-in configuration")

    t = sub.add_parser("train", help="run a training loop")
    add_config_args(t)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--max-steps", type=int, default=None)
    t.add_argument("--output-dir", default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("ed", help="exact diagonalization and sign-rule overlap")
    add_config_args(e)
    e.set_defaults(func=cmd_ed)

    s = sub.add_parser("symm-ed", help="symmetrized-basis block diagnostics")
    add_config_args(s)
    s.set_defaults(func=cmd_symm_ed)

    a = sub.add_parser("analyze-sign", help="phase CDF and sign overlap of a checkpoint")
    add_config_args(a)
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--sublattice", default="checkerboard", choices=["checkerboard", "stripe"])
    a.add_argument("--output", default=None, help="CDF csv path")
    a.set_defaults(func=cmd_analyze_sign)

    v = sub.add_parser("validate-config", help="validate a configuration file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate_config)

    pr = sub.add_parser("presets", help="list or dump built-in presets")
    pr.add_argument("name", nargs="?", default=None)
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_thread_cap(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NqsVmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
