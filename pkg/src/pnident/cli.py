"""Command-line entry points for simulation, data, training, and evaluation.

Every subcommand resolves its configuration from a preset plus an optional
config file, runs, writes its outputs, and drops a ``<out>.repro.json``
block with the resolved configuration, seed, and versions so the run can
be repeated exactly.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analytic import reconstruct, solve_guidance_params
from .config import resolve_config, write_repro_block
from .dataset import Dataset, ParamBox, generate_dataset
from .engagement import AircraftParams, MissileParams, SimLimits, simulate
from .errors import PnidentError
from .experiments import (
    compare_training,
    drag_sweep_eval,
    grid_eval,
    monte_carlo_eval,
    sample_run,
)
from .nn import AdamState, evaluate_mse, init_model, load_model, save_model, train
from .sensing import build_features, estimate_range_rate, sample_measurements


def _common(parser):
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument("--preset", choices=("desk", "paper"), default="desk")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="output file path")
    parser.add_argument("--noise", choices=("on", "off"), default=None,
                        help="override the preset's noise setting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnident",
        description="PN guidance parameter identification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="propagate one engagement to CSV")
    _common(p)

    p = sub.add_parser("dataset", help="generate a windowed training dataset")
    _common(p)

    p = sub.add_parser("train", help="train a model on a dataset file")
    _common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--head", choices=("regime", "linear"), default=None)

    p = sub.add_parser("eval", help="Monte Carlo evaluation of a checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", help="training dataset, for the overlap check")

    p = sub.add_parser("sample-run", help="replay one scenario tick by tick")
    _common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("grid-sweep", help="per-cell MSE over a label grid")
    _common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("drag-sweep", help="MSE under drag-coefficient scaling")
    _common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("compare", help="train both heads under one protocol")
    _common(p)
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("analytic", help="least-squares identification baseline")
    _common(p)

    return parser


def _scenario(cfg):
    sc = cfg["scenario"]
    missile = MissileParams(
        pn_gain=sc["pn_gain"],
        time_constant=sc["time_constant"],
        initial_speed=sc["missile_mach"] * 340.0,
        drag_scale=sc.get("drag_scale", 1.0),
    )
    aircraft = AircraftParams(speed=sc["aircraft_mach"] * 340.0)
    return missile, aircraft, sc["initial_range"], np.deg2rad(sc["initial_los_deg"])


def _limits(cfg) -> SimLimits:
    return SimLimits(min_range=cfg["sim"]["min_range"],
                     max_time=cfg["sim"]["max_time"])


def _box(cfg) -> ParamBox:
    return ParamBox(**{k: tuple(v) for k, v in cfg["box"].items()})


def _noise_flag(args, default: bool) -> bool:
    if args.noise is None:
        return default
    return args.noise == "on"


def cmd_simulate(args, cfg):
    missile, aircraft, r0, q0 = _scenario(cfg)
    traj = simulate(missile, aircraft, r0, q0, dt=cfg["sim"]["dt"],
                    limits=_limits(cfg), traj_id="cli")
    traj.to_csv(args.out)
    print(f"wrote {len(traj)} states to {args.out} "
          f"(termination: {traj.termination})")


def cmd_dataset(args, cfg):
    d = cfg["dataset"]
    noise_free = not _noise_flag(args, default=not d["noise_free"])
    ds = generate_dataset(
        box=_box(cfg),
        n_traj=d["n_traj"],
        windows_per_traj=d["windows_per_traj"],
        max_steps=d["max_steps"],
        min_steps=d["min_steps"],
        noise_free=noise_free,
        sigma_r=cfg["noise"]["sigma_r"],
        sigma_q=cfg["noise"]["sigma_q"],
        period=d["period"],
        dt=cfg["sim"]["dt"],
        limits=_limits(cfg),
        val_fraction=d["val_fraction"],
        seed=args.seed,
        workers=d.get("workers", 1),
    )
    ds.save(args.out)
    print(f"wrote {len(ds.train)} train / {len(ds.val)} val samples to {args.out}")


def cmd_train(args, cfg):
    t = cfg["train"]
    head = args.head or t["head"]
    ds = Dataset.load(args.dataset)
    model = init_model(
        ds.stats, hidden=t["hidden"], n_layers=t["layers"], head_kind=head,
        max_steps=ds.manifest["max_steps"], seed=args.seed,
    )
    adam = AdamState.for_params(
        model, base_rate=t["learning_rate"], decay=t["decay"],
        decay_every=t["decay_every"],
    )
    train(model, ds.train, iterations=t["iterations"],
          batch_size=t["batch_size"], seed=args.seed, adam=adam,
          shards=t.get("shards", 1), log_every=max(1, t["iterations"] // 10))
    save_model(args.out, model, adam)
    per, combined = evaluate_mse(model, ds.val or ds.train)
    split = "val" if ds.val else "train"
    print(f"wrote checkpoint to {args.out}; {split} MSE "
          f"gain={per[0]:.3e} lag={per[1]:.3e} combined={combined:.3e}")


def cmd_eval(args, cfg):
    model, _ = load_model(args.checkpoint)
    e = cfg["eval"]
    training_ids = None
    if args.dataset:
        ds = Dataset.load(args.dataset)
        training_ids = {s.traj_id for s in ds.train + ds.val}
    report = monte_carlo_eval(
        model, e["runs"], seed=args.seed, box=_box(cfg),
        windows_per_traj=e["windows_per_traj"],
        noise=_noise_flag(args, e["noise"]), dt=cfg["sim"]["dt"],
        limits=_limits(cfg), training_ids=training_ids,
        workers=e.get("workers", 1),
    )
    report.to_csv(args.out)
    print(f"evaluated {report.n_samples} windows from {report.n_traj} runs")
    print(f"normalized MSE: gain={report.mse_norm[0]:.4e} "
          f"lag={report.mse_norm[1]:.4e} combined={report.combined_norm:.4e}")
    print(f"physical MSE:   gain={report.mse_phys[0]:.4e} "
          f"lag={report.mse_phys[1]:.4e}")


def cmd_sample_run(args, cfg):
    model, _ = load_model(args.checkpoint)
    missile, aircraft, r0, q0 = _scenario(cfg)
    run = sample_run(
        model, missile, aircraft, r0, q0,
        noise=_noise_flag(args, default=False), seed=args.seed,
        dt=cfg["sim"]["dt"], limits=_limits(cfg),
    )
    run.to_csv(args.out)
    final = run.estimates[-1]
    print(f"replayed {len(run.t)} ticks; final estimates "
          f"gain={final[0]:.3f} lag={final[1]:.3f} "
          f"(truth {run.truth[0]:.3f}/{run.truth[1]:.3f})")


def cmd_grid_sweep(args, cfg):
    model, _ = load_model(args.checkpoint)
    e = cfg["eval"]
    cells = grid_eval(
        model, e["grid_gains"], e["grid_lags"],
        runs_per_cell=e["runs_per_cell"],
        windows_per_traj=e["windows_per_traj"], seed=args.seed,
        box=_box(cfg), noise=_noise_flag(args, e["noise"]),
        dt=cfg["sim"]["dt"], limits=_limits(cfg), workers=e.get("workers", 1),
    )
    with open(args.out, "w") as fh:
        fh.write("pn_gain,time_constant,mse_norm_gain,mse_norm_lag,combined,n_samples\n")
        for c in cells:
            fh.write(
                f"{c['pn_gain']:.10g},{c['time_constant']:.10g},"
                f"{c['mse_norm_gain']:.10g},{c['mse_norm_lag']:.10g},"
                f"{c['combined']:.10g},{c['n_samples']}\n"
            )
    combined = [c["combined"] for c in cells]
    print(f"evaluated {len(cells)} cells; combined MSE range "
          f"[{min(combined):.4e}, {max(combined):.4e}]")


def cmd_drag_sweep(args, cfg):
    model, _ = load_model(args.checkpoint)
    e = cfg["eval"]
    curve = drag_sweep_eval(
        model, deltas=e["drag_scales"], runs_per_point=e["runs_per_scale"],
        windows_per_traj=e["windows_per_traj"], seed=args.seed,
        box=_box(cfg), noise=_noise_flag(args, e["noise"]),
        dt=cfg["sim"]["dt"], limits=_limits(cfg), workers=e.get("workers", 1),
    )
    curve.to_csv(args.out)
    for v, (a, b) in zip(curve.values, curve.mse_norm):
        print(f"drag x{v:g}: MSE gain={a:.4e} lag={b:.4e}")


def cmd_compare(args, cfg):
    t = cfg["train"]
    ds = Dataset.load(args.dataset)
    result = compare_training(
        ds, hidden=t["hidden"], n_layers=t["layers"],
        iterations=t["iterations"], batch_size=t["batch_size"],
        seed=args.seed, base_rate=t["learning_rate"], decay=t["decay"],
        decay_every=t["decay_every"], shards=t.get("shards", 1),
    )
    result.curves_csv(args.out)
    summary_path = str(args.out) + ".summary.json"
    with open(summary_path, "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"regime head: initial MSE {result.regime_initial:.4f} "
          f"-> final {result.regime_final:.3e}")
    print(f"linear head: initial MSE {result.linear_initial:.4f} "
          f"-> final {result.linear_final:.3e}")


def cmd_analytic(args, cfg):
    missile, aircraft, r0, q0 = _scenario(cfg)
    traj = simulate(missile, aircraft, r0, q0, dt=cfg["sim"]["dt"],
                    limits=_limits(cfg), traj_id="analytic")
    noisy = _noise_flag(args, default=False)
    series = sample_measurements(
        traj,
        sigma_r=cfg["noise"]["sigma_r"] if noisy else 0.0,
        sigma_q=cfg["noise"]["sigma_q"] if noisy else 0.0,
        seed=args.seed,
    )
    feats = build_features(series, traj,
                           rate_mode="smoothed" if noisy else "exact")
    if noisy:
        range_rate = estimate_range_rate(series)
    else:
        rr, _ = traj.relative_rates()
        stride = round(series.period / (traj.t[1] - traj.t[0]))
        range_rate = rr[::stride][:len(series)]
    recon = reconstruct(feats, range_rate)
    solution = solve_guidance_params(recon, -range_rate, feats.q_dot,
                                     period=series.period)
    solution.to_csv(args.out)
    print(f"estimated gain={solution.pn_gain:.4f} "
          f"lag={solution.time_constant:.4f} "
          f"(truth {missile.pn_gain}/{missile.time_constant}) "
          f"residual={solution.residual:.4g} from {solution.count} points")


COMMANDS = {
    "simulate": cmd_simulate,
    "dataset": cmd_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "sample-run": cmd_sample_run,
    "grid-sweep": cmd_grid_sweep,
    "drag-sweep": cmd_drag_sweep,
    "compare": cmd_compare,
    "analytic": cmd_analytic,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = resolve_config(preset=args.preset, path=args.config)
        out = Path(args.out)
        if out.parent and not out.parent.exists():
            out.parent.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg)
        write_repro_block(
            str(args.out) + ".repro.json", cfg, args.seed,
            command=" ".join([args.command] + list(argv or sys.argv[1:])[1:]),
        )
    except PnidentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
