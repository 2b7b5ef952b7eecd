"""Training-data generation for the guidance-parameter estimator.

A dataset is built in two stratified passes: Latin hypercube sampling picks
engagement scenarios inside a parameter box, each scenario is simulated and
sensed at the radar rate, and a second LHS pass picks sliding-window
end points along every trajectory.  Windows are normalized feature
sequences; labels are the normalized guidance parameters that produced the
trajectory.  Normalization anchors come from the training split only.
"""

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .engagement import SPEED_OF_SOUND, AircraftParams, MissileParams, SimLimits, simulate
from .errors import ConfigurationError, InsufficientDataError
from .sensing import FeatureSeries, build_features, sample_measurements

DATASET_MAGIC = "pnident-dataset 1"

DEFAULT_WINDOW_STEPS = 100  # K: max window length, 1 s at 100 Hz
DEFAULT_MIN_WINDOW = 10  # ticks; shorter windows carry too little transient

LABEL_NAMES = ("pn_gain", "time_constant")

# scenario vector layout used by lhs_sample / scenario_from_vector
SCENARIO_FIELDS = (
    "initial_range",  # m
    "initial_los_deg",  # degrees
    "aircraft_mach",
    "missile_mach",
    "pn_gain",
    "time_constant",  # s
)


@dataclass(frozen=True)
class ParamBox:
    """Scenario parameter ranges, one (lo, hi) pair per dimension."""

    initial_range: tuple = (6000.0, 8000.0)
    initial_los_deg: tuple = (0.0, 5.0)
    aircraft_mach: tuple = (0.8, 1.0)
    missile_mach: tuple = (2.0, 2.5)
    pn_gain: tuple = (2.5, 5.5)
    time_constant: tuple = (0.1, 0.4)

    def __post_init__(self):
        for name in SCENARIO_FIELDS:
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ConfigurationError(f"{name}: range max must exceed min")

    def ranges(self) -> np.ndarray:
        """(6, 2) array of (lo, hi) in the fixed field order."""
        return np.array([getattr(self, name) for name in SCENARIO_FIELDS])


def lhs_unit(n: int, dims: int, rng) -> np.ndarray:
    """Latin hypercube sample of the unit cube: (n, dims) in [0, 1).

    Each dimension is cut into n equal strata and every stratum is hit
    exactly once, at an independently permuted position with uniform jitter.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    out = np.empty((n, dims))
    for d in range(dims):
        perm = rng.permutation(n)
        u = rng.random(n)
        out[:, d] = (perm + u) / n
    return out


def lhs_sample(box: ParamBox, n: int, seed) -> np.ndarray:
    """(n, 6) scenario parameter vectors stratified inside the box."""
    rng = np.random.default_rng(seed)
    ranges = box.ranges()
    unit = lhs_unit(n, len(ranges), rng)
    return ranges[:, 0] + unit * (ranges[:, 1] - ranges[:, 0])


def scenario_from_vector(vec) -> tuple:
    """(missile, aircraft, initial_range, initial_los_rad) for one LHS row."""
    r0, q0_deg, a_mach, m_mach, gain, tau = (float(v) for v in vec)
    missile = MissileParams(
        pn_gain=gain, time_constant=tau, initial_speed=m_mach * SPEED_OF_SOUND
    )
    aircraft = AircraftParams(speed=a_mach * SPEED_OF_SOUND)
    return missile, aircraft, r0, math.radians(q0_deg)


def latest_window(features, max_steps: int = DEFAULT_WINDOW_STEPS) -> tuple:
    """(start, end) of the most recent window: all ticks, capped at max_steps.

    With fewer ticks than ``max_steps`` the whole history is the window;
    afterwards the window slides, always ending at the newest tick.
    """
    m = len(features)
    if m < 1:
        raise InsufficientDataError("empty series has no window")
    return max(0, m - max_steps), m - 1


def extract_windows(
    features: FeatureSeries,
    count: int,
    max_steps: int = DEFAULT_WINDOW_STEPS,
    min_steps: int = DEFAULT_MIN_WINDOW,
    rng=None,
) -> list:
    """Choose window end ticks by a stratified draw; return (start, end) pairs.

    A window ending at tick e uses the most recent ``min(max_steps, e + 1)``
    ticks.  End points are drawn one per stratum from a partition of the
    ticks with enough history into ``count`` contiguous chunks, so the
    windows stratify across the flight instead of clustering and are always
    distinct.  Fewer than ``count`` windows come back when the trajectory
    has fewer eligible ticks than that.
    """

    if min_steps < 1 or max_steps < min_steps:
        raise ConfigurationError("need max_steps >= min_steps >= 1")
    m = len(features)
    if m < min_steps:
        raise InsufficientDataError(
            f"series has {m} ticks, fewer than the {min_steps}-tick minimum"
        )
    rng = np.random.default_rng(rng)
    lo = min_steps - 1  # first end index with enough history
    n_valid = m - lo
    count = min(count, n_valid)
    bounds = (np.arange(count + 1) * n_valid) // count  # disjoint integer strata
    sizes = bounds[1:] - bounds[:-1]
    ends = lo + bounds[:-1] + (rng.random(count) * sizes).astype(int)
    return [(max(0, int(e) - max_steps + 1), int(e)) for e in ends]


# ---------------------------------------------------------------------------
# normalization


def normalize(values, lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ConfigurationError("normalization stats degenerate: max <= min")
    return (np.asarray(values, dtype=float) - lo) / (hi - lo)


def denormalize(values, lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ConfigurationError("normalization stats degenerate: max <= min")
    return lo + np.asarray(values, dtype=float) * (hi - lo)


@dataclass(frozen=True)
class NormStats:
    """Min-max anchors for features and labels, from the training split."""

    feature_min: np.ndarray  # (6,)
    feature_max: np.ndarray
    label_min: np.ndarray  # (2,)
    label_max: np.ndarray

    def __post_init__(self):
        for lo, hi, what in (
            (self.feature_min, self.feature_max, "feature"),
            (self.label_min, self.label_max, "label"),
        ):
            if len(lo) != len(hi):
                raise ConfigurationError(f"{what} stats length mismatch")
            if np.any(np.asarray(hi) <= np.asarray(lo)):
                raise ConfigurationError(f"{what} stats degenerate: max <= min")

    @classmethod
    def from_training_arrays(cls, windows: list, labels: np.ndarray) -> "NormStats":
        stacked = np.concatenate([np.asarray(w) for w in windows], axis=0)
        return cls(
            feature_min=stacked.min(axis=0),
            feature_max=stacked.max(axis=0),
            label_min=np.asarray(labels).min(axis=0),
            label_max=np.asarray(labels).max(axis=0),
        )

    def norm_features(self, x):
        return normalize(x, self.feature_min, self.feature_max)

    def denorm_features(self, x):
        return denormalize(x, self.feature_min, self.feature_max)

    def norm_labels(self, y):
        return normalize(y, self.label_min, self.label_max)

    def denorm_labels(self, y):
        return denormalize(y, self.label_min, self.label_max)

    def to_dict(self) -> dict:
        return {
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "label_min": self.label_min.tolist(),
            "label_max": self.label_max.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            feature_min=np.asarray(d["feature_min"], dtype=float),
            feature_max=np.asarray(d["feature_max"], dtype=float),
            label_min=np.asarray(d["label_min"], dtype=float),
            label_max=np.asarray(d["label_max"], dtype=float),
        )


# ---------------------------------------------------------------------------
# samples and datasets


@dataclass(frozen=True)
class Sample:
    """One training sample: a normalized feature window and its label."""

    window: np.ndarray  # (l, 6), normalized
    label: np.ndarray  # (2,), normalized (pn_gain, time_constant)
    traj_id: str
    end_tick: int

    def __post_init__(self):
        if self.window.ndim != 2 or self.window.shape[1] != 6:
            raise ConfigurationError("window must be (l, 6)")
        if self.window.shape[0] < 1:
            raise ConfigurationError("window must not be empty")
        if self.label.shape != (2,):
            raise ConfigurationError("label must be (2,)")

    @property
    def length(self) -> int:
        return self.window.shape[0]


@dataclass
class Dataset:
    """Normalized train/validation samples plus their normalization anchors."""

    train: list
    val: list
    stats: NormStats
    manifest: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.train) + len(self.val)

    def save(self, path):
        path = Path(path)
        samples = self.train + self.val
        blob = io.BytesIO()
        for s in samples:
            blob.write(np.array([s.length], dtype="<f8").tobytes())  # length prefix
            blob.write(s.window.astype("<f8").tobytes())
            blob.write(s.label.astype("<f8").tobytes())
        payload = blob.getvalue()

        manifest = dict(self.manifest)
        manifest["format"] = DATASET_MAGIC
        manifest["stats"] = self.stats.to_dict()
        manifest["n_train"] = len(self.train)
        manifest["n_val"] = len(self.val)
        manifest["samples"] = [
            {"traj_id": s.traj_id, "end_tick": s.end_tick, "length": s.length}
            for s in samples
        ]
        manifest["sha256"] = hashlib.sha256(payload).hexdigest()
        text = json.dumps(manifest, sort_keys=True, separators=(",", ":"))

        with open(path, "wb") as fh:
            fh.write((DATASET_MAGIC + "\n").encode())
            fh.write(f"{len(text)}\n".encode())
            fh.write(text.encode())
            fh.write(payload)

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(Path(path), "rb") as fh:
            magic = fh.readline().decode().strip()
            if magic != DATASET_MAGIC:
                raise ConfigurationError(f"not a dataset file (magic {magic!r})")
            length = int(fh.readline().decode().strip())
            manifest = json.loads(fh.read(length).decode())
            payload = fh.read()

        if hashlib.sha256(payload).hexdigest() != manifest["sha256"]:
            raise ConfigurationError("dataset payload hash mismatch")

        stats = NormStats.from_dict(manifest["stats"])
        samples = []
        offset = 0
        raw = np.frombuffer(payload, dtype="<f8")
        for rec in manifest["samples"]:
            ln = int(raw[offset])
            if ln != rec["length"]:
                raise ConfigurationError("length prefix disagrees with manifest")
            offset += 1
            window = raw[offset:offset + ln * 6].reshape(ln, 6).copy()
            offset += ln * 6
            label = raw[offset:offset + 2].copy()
            offset += 2
            samples.append(
                Sample(window=window, label=label,
                       traj_id=rec["traj_id"], end_tick=rec["end_tick"])
            )
        n_train = manifest["n_train"]
        return cls(
            train=samples[:n_train],
            val=samples[n_train:],
            stats=stats,
            manifest=manifest,
        )

    def export_csv(self, path):
        """Flat interoperability dump: one row per window tick."""
        with open(Path(path), "w") as fh:
            fh.write("sample,split,traj_id,end_tick,tick,R,q,q_dot,V_A,theta_A,a_A,"
                     "label_pn_gain,label_time_constant\n")
            for k, (split, s) in enumerate(
                [("train", s) for s in self.train] + [("val", s) for s in self.val]
            ):
                for i in range(s.length):
                    row = ",".join(f"{v:.12g}" for v in s.window[i])
                    fh.write(
                        f"{k},{split},{s.traj_id},{s.end_tick},{i},{row},"
                        f"{s.label[0]:.12g},{s.label[1]:.12g}\n"
                    )


# ---------------------------------------------------------------------------
# generation pipeline


def generate_dataset(
    box: ParamBox = ParamBox(),
    n_traj: int = 200,
    windows_per_traj: int = 20,
    max_steps: int = DEFAULT_WINDOW_STEPS,
    min_steps: int = DEFAULT_MIN_WINDOW,
    noise_free: bool = True,
    sigma_r: float = 5.0,
    sigma_q: float = 1e-3,
    period: float = 0.01,
    dt: float = 1e-3,
    limits: SimLimits = SimLimits(),
    val_fraction: float = 0.1,
    seed: int = 0,
    max_retries: int = 10,
    workers: int = 1,
) -> Dataset:
    """Simulate scenarios, window them, and assemble a normalized dataset.

    Noise-free datasets (the default, used for training) sample the radar
    without noise and carry the exact LOS rate; noisy datasets follow the
    radar noise model and difference the rate from measurements.  The split
    is by trajectory so no validation window shares a flight with training
    data.  Failed scenarios (no intercept, or too short to window) are
    resampled uniformly inside the box up to ``max_retries`` times.

    Each trajectory slot owns a spawned RNG stream and its results are
    assembled in slot order, so the output bytes do not depend on
    ``workers``.
    """

    if not 0.0 <= val_fraction < 1.0:
        raise ConfigurationError("val_fraction must be in [0, 1)")
    if n_traj < 1:
        raise ConfigurationError("n_traj must be >= 1")

    root = np.random.SeedSequence(seed)
    ss_scenarios, ss_split, ss_traj = root.spawn(3)
    vectors = lhs_sample(box, n_traj, ss_scenarios)
    traj_streams = ss_traj.spawn(n_traj)

    ranges = box.ranges()

    def build_slot(i: int):
        """(traj_id, window rows, skip records) for one scenario slot."""
        rng = np.random.default_rng(traj_streams[i])
        vec = vectors[i]
        skips = []
        for attempt in range(max_retries + 1):
            missile, aircraft, r0, q0 = scenario_from_vector(vec)
            traj = simulate(missile, aircraft, r0, q0, dt=dt, limits=limits,
                            traj_id=f"traj{i:05d}")
            series = sample_measurements(
                traj, period=period,
                sigma_r=0.0 if noise_free else sigma_r,
                sigma_q=0.0 if noise_free else sigma_q,
                seed=rng.integers(2**63),
            )
            ok = traj.termination == "min_range" and len(series) >= min_steps
            if ok:
                break
            skips.append(
                {"traj": i, "attempt": attempt, "termination": traj.termination,
                 "ticks": len(series)}
            )
            vec = ranges[:, 0] + rng.random(len(ranges)) * (ranges[:, 1] - ranges[:, 0])
        else:
            raise ConfigurationError(
                f"scenario slot {i} failed {max_retries + 1} times; "
                f"last termination {traj.termination!r}"
            )

        feats = build_features(
            series, traj, rate_mode="exact" if noise_free else "smoothed"
        )
        matrix = feats.matrix()
        label = np.array([missile.pn_gain, missile.time_constant])
        specs = extract_windows(feats, windows_per_traj, max_steps, min_steps, rng)
        rows = [
            (i, traj.traj_id, end, matrix[start:end + 1].copy(), label)
            for start, end in specs
        ]
        return traj.traj_id, rows, skips

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            slot_results = list(pool.map(build_slot, range(n_traj)))
    else:
        slot_results = [build_slot(i) for i in range(n_traj)]

    raw_windows = []  # (traj_index, traj_id, end_tick, raw window, raw label)
    traj_ids = []
    skipped = []
    for traj_id, rows, skips in slot_results:
        traj_ids.append(traj_id)
        raw_windows.extend(rows)
        skipped.extend(skips)

    # split by trajectory so windows never leak across the boundary
    n_val = int(round(val_fraction * n_traj))
    order = np.random.default_rng(ss_split).permutation(n_traj)
    val_ids = {traj_ids[j] for j in order[:n_val]}

    train_rows = [w for w in raw_windows if w[1] not in val_ids]
    val_rows = [w for w in raw_windows if w[1] in val_ids]
    if not train_rows:
        raise InsufficientDataError("empty training split")

    stats = NormStats.from_training_arrays(
        [w[3] for w in train_rows], np.array([w[4] for w in train_rows])
    )

    def materialize(rows):
        return [
            Sample(
                window=stats.norm_features(w[3]),
                label=stats.norm_labels(w[4]),
                traj_id=w[1],
                end_tick=w[2],
            )
            for w in rows
        ]

    manifest = {
        "seed": seed,
        "box": {name: list(getattr(box, name)) for name in SCENARIO_FIELDS},
        "n_traj": n_traj,
        "windows_per_traj": windows_per_traj,
        "max_steps": max_steps,
        "min_steps": min_steps,
        "noise_free": noise_free,
        "sigma_r": sigma_r,
        "sigma_q": sigma_q,
        "period": period,
        "dt": dt,
        "val_fraction": val_fraction,
        "val_traj_ids": sorted(val_ids),
        "skipped": skipped,
    }
    return Dataset(
        train=materialize(train_rows),
        val=materialize(val_rows),
        stats=stats,
        manifest=manifest,
    )
