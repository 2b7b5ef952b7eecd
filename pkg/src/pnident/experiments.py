"""Desk-scale training and evaluation studies, shared by the CLI and tests.

The studies mirror a fixed protocol: models train on noise-free windows with
exact LOS rates; evaluations replay fresh scenarios, optionally with radar
noise (rates then come from smoothed finite differences, as a radar would
have to).  Evaluation trajectory ids never collide with training ids and
the disjointness is asserted, not assumed.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import (
    Dataset,
    ParamBox,
    Sample,
    extract_windows,
    scenario_from_vector,
)
from .engagement import SimLimits, simulate
from .errors import ConfigurationError
from .nn import AdamState, evaluate_mse, init_model, pack_batch, train
from .nn.network import ModelParams, batch_forward
from .sensing import build_features, sample_measurements

EVAL_CSV_HEADER = "pn_gain,time_constant,pn_gain_hat,time_constant_hat"
SWEEP_CSV_HEADER = "value,mse_norm_gain,mse_norm_lag,combined"
CURVE_CSV_HEADER = "iteration,regime_loss,linear_loss"


# ---------------------------------------------------------------------------
# report containers


@dataclass
class EvalReport:
    """Per-sample truths and estimates plus aggregate errors."""

    labels: np.ndarray  # (n, 2) physical truth
    estimates: np.ndarray  # (n, 2) physical estimates
    mse_norm: np.ndarray  # (2,) normalized per-output MSE
    mse_phys: np.ndarray  # (2,) physical-unit per-output MSE
    n_traj: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.labels.shape != self.estimates.shape:
            raise ConfigurationError("label/estimate counts disagree")
        if np.any(self.mse_norm < 0) or np.any(self.mse_phys < 0):
            raise ConfigurationError("MSE cannot be negative")

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    @property
    def combined_norm(self) -> float:
        return float(self.mse_norm.mean())

    def to_csv(self, path):
        rows = np.hstack([self.labels, self.estimates])
        header = "\n".join(
            f"# {k} = {v}" for k, v in sorted(self.meta.items())
        )
        with open(path, "w") as fh:
            if header:
                fh.write(header + "\n")
            fh.write(EVAL_CSV_HEADER + "\n")
            for row in rows:
                fh.write(",".join(format(v, ".10g") for v in row) + "\n")


@dataclass
class SweepCurve:
    """Aggregate MSE as a function of one sweep variable."""

    variable: str
    values: np.ndarray  # sorted sweep points
    mse_norm: np.ndarray  # (len(values), 2)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.values) != self.mse_norm.shape[0]:
            raise ConfigurationError("sweep point counts disagree")
        if np.any(np.diff(self.values) <= 0):
            raise ConfigurationError("sweep points must be sorted ascending")

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(f"# variable = {self.variable}\n")
            fh.write(SWEEP_CSV_HEADER + "\n")
            for v, (a, b) in zip(self.values, self.mse_norm):
                fh.write(
                    f"{v:.10g},{a:.10g},{b:.10g},{(a + b) / 2:.10g}\n"
                )


@dataclass
class CompareResult:
    """Two training runs with a shared backbone, seed, and data order.

    The optimizer states ride along so either run can be continued
    (``train(result.regime_model, ..., adam=result.regime_adam)``).
    """

    regime_losses: np.ndarray
    linear_losses: np.ndarray
    regime_initial: float
    linear_initial: float
    regime_final: float
    linear_final: float
    regime_model: ModelParams
    linear_model: ModelParams
    regime_adam: AdamState = None
    linear_adam: AdamState = None
    meta: dict = field(default_factory=dict)

    def curves_csv(self, path):
        with open(path, "w") as fh:
            fh.write(CURVE_CSV_HEADER + "\n")
            for i, (a, b) in enumerate(
                zip(self.regime_losses, self.linear_losses)
            ):
                fh.write(f"{i},{a:.10g},{b:.10g}\n")

    def summary(self) -> dict:
        return {
            "regime_initial_mse": self.regime_initial,
            "linear_initial_mse": self.linear_initial,
            "regime_final_mse": self.regime_final,
            "linear_final_mse": self.linear_final,
            **self.meta,
        }


@dataclass
class SampleRun:
    """Per-tick estimates (and regime weights) over one replayed engagement."""

    t: np.ndarray
    estimates: np.ndarray  # (n, 2) physical
    weights: list  # per group: (n, p_i) arrays, or None for linear heads
    truth: np.ndarray  # (2,) physical
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        cols = [self.t, self.estimates[:, 0], self.estimates[:, 1]]
        names = ["t", "pn_gain_hat", "time_constant_hat"]
        if self.weights is not None:
            for g, w in enumerate(self.weights):
                for j in range(w.shape[1]):
                    cols.append(w[:, j])
                    names.append(f"g{g}_w{j}")
        with open(path, "w") as fh:
            fh.write(f"# pn_gain = {self.truth[0]}\n")
            fh.write(f"# time_constant = {self.truth[1]}\n")
            fh.write(",".join(names) + "\n")
            for row in zip(*cols):
                fh.write(",".join(format(v, ".10g") for v in row) + "\n")


def moving_average(values, width: int) -> np.ndarray:
    """Simple trailing-window mean, shorter windows at the start."""
    values = np.asarray(values, dtype=float)
    if width < 1:
        raise ConfigurationError("width must be >= 1")
    sums = np.cumsum(values)
    out = np.empty_like(values)
    out[:width] = sums[:width] / np.arange(1, min(width, len(values)) + 1)
    if len(values) > width:
        out[width:] = (sums[width:] - sums[:-width]) / width
    return out


# ---------------------------------------------------------------------------
# training comparison


def compare_training(
    dataset: Dataset,
    hidden: int = 64,
    n_layers: int = 3,
    iterations: int = 2000,
    batch_size: int = 64,
    seed: int = 0,
    base_rate: float = 0.002,
    decay: float = 0.99,
    decay_every: int = 100,
    shards: int = 1,
    log_every: int = 0,
) -> CompareResult:
    """Train the grouped-softmax and linear heads under identical conditions.

    Both models share the backbone initialization (same seed draws the same
    input/GRU weights), the Adam schedule, and the minibatch order.  MSEs
    are normalized-space, on the training split, before and after training.
    """
    t0 = time.perf_counter()
    runs = {}
    for kind in ("regime", "linear"):
        model = init_model(
            dataset.stats, hidden=hidden, n_layers=n_layers, head_kind=kind,
            max_steps=dataset.manifest["max_steps"], seed=seed,
        )
        adam = AdamState.for_params(
            model, base_rate=base_rate, decay=decay, decay_every=decay_every
        )
        initial = evaluate_mse(model, dataset.train)[1]
        history = train(
            model, dataset.train, iterations=iterations,
            batch_size=batch_size, seed=seed, adam=adam, shards=shards,
            log_every=log_every,
        )
        final = evaluate_mse(model, dataset.train)[1]
        runs[kind] = (model, initial, final, history.losses, adam)

    return CompareResult(
        regime_losses=runs["regime"][3],
        linear_losses=runs["linear"][3],
        regime_initial=runs["regime"][1],
        linear_initial=runs["linear"][1],
        regime_final=runs["regime"][2],
        linear_final=runs["linear"][2],
        regime_model=runs["regime"][0],
        linear_model=runs["linear"][0],
        regime_adam=runs["regime"][4],
        linear_adam=runs["linear"][4],
        meta={
            "iterations": iterations,
            "batch_size": batch_size,
            "seed": seed,
            "train_samples": len(dataset.train),
            "runtime_s": round(time.perf_counter() - t0, 3),
        },
    )


# ---------------------------------------------------------------------------
# scenario replay


def _window_estimates(model: ModelParams, norm_matrix, ends, chunk=256):
    """Physical estimates for windows given by (start, end) tick pairs."""
    samples = [
        Sample(
            window=norm_matrix[lo:hi + 1],
            label=np.zeros(len(model.stats.label_min)),
            traj_id="window",
            end_tick=hi,
        )
        for lo, hi in ends
    ]
    out = np.empty((len(samples), len(model.stats.label_min)))
    for lo in range(0, len(samples), chunk):
        batch = samples[lo:lo + chunk]
        x, mask, _ = pack_batch(batch, dtype=model.dtype)
        out[lo:lo + len(batch)] = batch_forward(x, mask, model)[0]
    return out


def sample_run(
    model: ModelParams,
    missile,
    aircraft,
    initial_range: float,
    initial_los_angle: float = 0.0,
    noise: bool = False,
    seed: int = 0,
    dt: float = 1e-3,
    period: float = 0.01,
    limits: SimLimits = SimLimits(),
) -> SampleRun:
    """Replay one engagement, estimating at every radar tick.

    Each tick feeds the model the latest window (growing until it reaches
    the model's step limit, then sliding).  Noise-free replays use exact
    LOS rates like the training data; noisy replays difference the rate
    causally, using only measurements up to the current tick.
    """
    traj = simulate(missile, aircraft, initial_range, initial_los_angle,
                    dt=dt, limits=limits, traj_id="sample-run")
    series = sample_measurements(
        traj, period=period,
        sigma_r=5.0 if noise else 0.0,
        sigma_q=1e-3 if noise else 0.0,
        seed=seed,
    )
    feats = build_features(
        series, traj, rate_mode="causal" if noise else "exact"
    )
    matrix = model.stats.norm_features(feats.matrix())
    n = matrix.shape[0]
    # the window at tick k is the latest history, grown up to the step limit
    ends = [(max(0, k - model.max_steps + 1), k) for k in range(n)]

    estimates = np.empty((n, 2))
    weights = None
    if model.head_kind == "regime":
        weights = [np.empty((n, len(lam))) for lam in model.head.regimes]
    for lo in range(0, n, 256):
        batch = [
            Sample(window=matrix[a:b + 1], label=np.zeros(2),
                   traj_id="tick", end_tick=b)
            for a, b in ends[lo:lo + 256]
        ]
        x, mask, _ = pack_batch(batch, dtype=model.dtype)
        phys, _, gs, _ = batch_forward(x, mask, model)
        estimates[lo:lo + len(batch)] = phys
        if weights is not None:
            for g, arr in enumerate(gs):
                weights[g][lo:lo + len(batch)] = arr

    return SampleRun(
        t=feats.t,
        estimates=estimates,
        weights=weights,
        truth=np.array([missile.pn_gain, missile.time_constant]),
        meta={"noise": noise, "seed": seed, "ticks": matrix.shape[0]},
    )


# ---------------------------------------------------------------------------
# Monte Carlo evaluation


def _eval_one_trajectory(
    model, box, vec, windows_per_traj, noise, stream, traj_id,
    drag_scale=1.0, dt=1e-3, period=0.01, limits=SimLimits(),
    min_steps=10, max_retries=10,
):
    """(label, estimates (w, 2), used traj_id) for one evaluation scenario."""
    rng = np.random.default_rng(stream)
    ranges = box.ranges()
    for _ in range(max_retries + 1):
        missile, aircraft, r0, q0 = scenario_from_vector(vec)
        if drag_scale != 1.0:
            missile = replace(missile, drag_scale=drag_scale)
        traj = simulate(missile, aircraft, r0, q0, dt=dt, limits=limits,
                        traj_id=traj_id)
        series = sample_measurements(
            traj, period=period,
            sigma_r=5.0 if noise else 0.0,
            sigma_q=1e-3 if noise else 0.0,
            seed=rng.integers(2**63),
        )
        if traj.termination == "min_range" and len(series) >= min_steps:
            break
        # redraw inside the caller's box; grid cells pass a box whose label
        # dimensions are pinned to the cell, so redraws respect the cell
        vec = ranges[:, 0] + rng.random(len(ranges)) * (
            ranges[:, 1] - ranges[:, 0]
        )
    else:
        raise ConfigurationError(
            f"evaluation scenario {traj_id} failed {max_retries + 1} times"
        )

    feats = build_features(
        series, traj, rate_mode="smoothed" if noise else "exact"
    )
    matrix = model.stats.norm_features(feats.matrix())
    ends = extract_windows(feats, windows_per_traj, model.max_steps,
                           min_steps, rng)
    estimates = _window_estimates(model, matrix, ends)
    label = np.array([missile.pn_gain, missile.time_constant])
    return label, estimates, traj.traj_id


def _aggregate_report(model, labels, estimates, n_traj, meta) -> EvalReport:
    labels = np.asarray(labels, dtype=float).reshape(-1, 2)
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if labels.shape[0] == 0:
        zeros = np.zeros(2)
        return EvalReport(labels=labels, estimates=estimates,
                          mse_norm=zeros, mse_phys=zeros.copy(),
                          n_traj=0, meta=meta)
    err_phys = estimates - labels
    err_norm = model.stats.norm_labels(estimates) - model.stats.norm_labels(labels)
    return EvalReport(
        labels=labels,
        estimates=estimates,
        mse_norm=np.mean(err_norm**2, axis=0),
        mse_phys=np.mean(err_phys**2, axis=0),
        n_traj=n_traj,
        meta=meta,
    )


def monte_carlo_eval(
    model: ModelParams,
    n_runs: int,
    seed: int = 0,
    box: ParamBox = ParamBox(),
    windows_per_traj: int = 10,
    noise: bool = True,
    drag_scale: float = 1.0,
    dt: float = 1e-3,
    period: float = 0.01,
    limits: SimLimits = SimLimits(),
    training_ids=None,
    workers: int = 1,
    id_prefix: str = "eval",
) -> EvalReport:
    """Evaluate the model on freshly simulated scenarios.

    Scenarios draw uniformly from the box with per-run RNG streams; the
    result does not depend on ``workers``.  ``training_ids`` (when given)
    are checked for overlap with the evaluation trajectory ids.
    """
    t0 = time.perf_counter()
    meta = {
        "n_runs": n_runs, "seed": seed, "noise": noise,
        "drag_scale": drag_scale, "windows_per_traj": windows_per_traj,
    }
    if n_runs == 0:
        return _aggregate_report(model, np.zeros((0, 2)), np.zeros((0, 2)),
                                 0, meta)

    root = np.random.SeedSequence(seed)
    ss_draw, ss_runs = root.spawn(2)
    ranges = box.ranges()
    draw_rng = np.random.default_rng(ss_draw)
    vecs = ranges[:, 0] + draw_rng.random((n_runs, len(ranges))) * (
        ranges[:, 1] - ranges[:, 0]
    )
    streams = ss_runs.spawn(n_runs)
    ids = [f"{id_prefix}{seed}-{i:05d}" for i in range(n_runs)]

    if training_ids is not None:
        overlap = set(ids) & set(training_ids)
        if overlap:
            raise ConfigurationError(
                f"evaluation would reuse training trajectories: {sorted(overlap)[:3]}"
            )
        meta["training_overlap"] = 0

    def run_one(i):
        return _eval_one_trajectory(
            model, box, vecs[i], windows_per_traj, noise, streams[i],
            ids[i], drag_scale=drag_scale, dt=dt, period=period,
            limits=limits,
        )

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, range(n_runs)))
    else:
        results = [run_one(i) for i in range(n_runs)]

    labels, estimates = [], []
    for label, ests, _ in results:
        labels.extend([label] * len(ests))
        estimates.extend(ests)
    meta["runtime_s"] = round(time.perf_counter() - t0, 3)
    return _aggregate_report(model, labels, estimates, n_runs, meta)


def grid_eval(
    model: ModelParams,
    gain_grid,
    lag_grid,
    runs_per_cell: int = 20,
    windows_per_traj: int = 10,
    seed: int = 0,
    box: ParamBox = ParamBox(),
    noise: bool = True,
    dt: float = 1e-3,
    period: float = 0.01,
    limits: SimLimits = SimLimits(),
    workers: int = 1,
):
    """Per-cell evaluation over a grid of fixed (gain, lag) labels.

    Returns a list of cell dicts, one per grid point in row-major order,
    each carrying the cell's labels, per-output and combined normalized MSE.
    """
    cells = []
    root = np.random.SeedSequence(seed)
    for gi, gain in enumerate(gain_grid):
        for li, lag in enumerate(lag_grid):
            cell_box = ParamBox(
                initial_range=box.initial_range,
                initial_los_deg=box.initial_los_deg,
                aircraft_mach=box.aircraft_mach,
                missile_mach=box.missile_mach,
                pn_gain=(gain, np.nextafter(gain, np.inf)),
                time_constant=(lag, np.nextafter(lag, np.inf)),
            )
            report = monte_carlo_eval(
                model, runs_per_cell,
                seed=int(root.generate_state(1)[0] >> 33) + gi * 131 + li,
                box=cell_box, windows_per_traj=windows_per_traj,
                noise=noise, dt=dt, period=period, limits=limits,
                workers=workers, id_prefix=f"grid{gi}-{li}-",
            )
            cells.append({
                "pn_gain": float(gain),
                "time_constant": float(lag),
                "mse_norm_gain": float(report.mse_norm[0]),
                "mse_norm_lag": float(report.mse_norm[1]),
                "combined": report.combined_norm,
                "n_samples": report.n_samples,
            })
    return cells


def drag_sweep_eval(
    model: ModelParams,
    deltas=(0.5, 1.0, 2.0),
    runs_per_point: int = 100,
    windows_per_traj: int = 10,
    seed: int = 0,
    box: ParamBox = ParamBox(),
    noise: bool = True,
    dt: float = 1e-3,
    period: float = 0.01,
    limits: SimLimits = SimLimits(),
    workers: int = 1,
) -> SweepCurve:
    """MSE under drag-coefficient scaling; the model saw only scale 1."""
    deltas = sorted(float(d) for d in deltas)
    mses = []
    for k, delta in enumerate(deltas):
        report = monte_carlo_eval(
            model, runs_per_point, seed=seed + k, box=box,
            windows_per_traj=windows_per_traj, noise=noise,
            drag_scale=delta, dt=dt, period=period, limits=limits,
            workers=workers, id_prefix=f"drag{k}-",
        )
        mses.append(report.mse_norm)
    return SweepCurve(
        variable="drag_scale",
        values=np.array(deltas),
        mse_norm=np.array(mses),
        meta={"runs_per_point": runs_per_point, "seed": seed, "noise": noise},
    )
