"""Dress rehearsal for acceptance criteria 5-7.

Uses the exact seeds, dataset spec, and training recipe the acceptance
suite will use; byte-level determinism makes a pass here binding for the
real run. Prints every check plus triage diagnostics.
"""
import os
import time

import numpy as np

from pnident.dataset import Dataset, ParamBox, generate_dataset
from pnident.engagement import AircraftParams, MissileParams
from pnident.experiments import (
    compare_training,
    drag_sweep_eval,
    monte_carlo_eval,
    sample_run,
)
from pnident.nn import save_model, train
from pnident.nn.training import evaluate_mse

SEED = 0
BOX = ParamBox()
DESK_TRAIN = dict(
    hidden=48, n_layers=2, iterations=2000, batch_size=128,
    seed=SEED, base_rate=0.005, decay=0.98, decay_every=100,
)
EXTRA_ITERATIONS = 4000
EXTRA_BATCH = 128

DEMO_MISSILE = MissileParams(pn_gain=5.0, time_constant=0.30,
                             initial_speed=2.25 * 340.0)
DEMO_AIRCRAFT = AircraftParams(speed=0.9 * 340.0)

t_all = time.perf_counter()

# --- dataset (cached: generation is deterministic, criterion 8) ---
DS = ".scratch/accept.ds"
if os.path.exists(DS):
    ds = Dataset.load(DS)
    print(f"loaded {DS}")
else:
    t0 = time.perf_counter()
    ds = generate_dataset(box=BOX, n_traj=200, windows_per_traj=20,
                          noise_free=True, seed=SEED, workers=4)
    ds.save(DS)
    print(f"dataset generated in {time.perf_counter()-t0:.0f} s")

# --- criterion 5: head-to-head at the pinned recipe ---
r = compare_training(ds, **DESK_TRAIN)
print(f"[c5] runtime {r.meta['runtime_s']:.0f} s (cap 1800)")
print(f"[c5] initial regime {r.regime_initial:.4f} < linear {r.linear_initial:.4f}"
      f" -> {r.regime_initial < r.linear_initial}")
print(f"[c5] final   regime {r.regime_final:.6f} <= linear {r.linear_final:.6f}"
      f" -> {r.regime_final <= r.linear_final}")


def ma100(losses, k):
    w = losses[max(0, k - 100):k]
    return sum(w) / len(w)


for k in (500, 1000, 1500, 2000):
    print(f"     MA100@{k}: regime {ma100(r.regime_losses, k):.4f}"
          f"  linear {ma100(r.linear_losses, k):.4f}")

# --- continuation shared by criteria 6 and 7 ---
model = r.regime_model
t0 = time.perf_counter()
train(model, ds.train, iterations=EXTRA_ITERATIONS, batch_size=EXTRA_BATCH,
      seed=SEED + 9, adam=r.regime_adam)
per, comb = evaluate_mse(model, ds.val)
print(f"[cont] {EXTRA_ITERATIONS} iters in {(time.perf_counter()-t0)/60:.1f} min; "
      f"val per={np.round(per, 5)} comb={comb:.5f}", flush=True)
save_model(".scratch/dress_model.ckpt", model, r.regime_adam)

# --- criterion 6: demo-run band first (cheap), then the 600-run MC ---
run = sample_run(model, DEMO_MISSILE, DEMO_AIRCRAFT, 7000.0,
                 noise=False, seed=SEED)
late = run.t > 1.0
rel_g = np.abs(run.estimates[late, 0] - 5.0) / 5.0
rel_l = np.abs(run.estimates[late, 1] - 0.30) / 0.30
print(f"[c6] band: max rel gain {rel_g.max():.3f} lag {rel_l.max():.3f} (cap 0.10)")
print(f"     frac>band gain {(rel_g > 0.10).mean():.2f} lag {(rel_l > 0.10).mean():.2f};"
      f" worst t gain {run.t[late][rel_g.argmax()]:.2f}s lag {run.t[late][rel_l.argmax()]:.2f}s")

ids = {s.traj_id for s in ds.train + ds.val}
t0 = time.perf_counter()
rep = monte_carlo_eval(model, 600, seed=SEED + 1, box=BOX, windows_per_traj=10,
                       noise=True, training_ids=ids, workers=4)
print(f"[c6] MC600 in {(time.perf_counter()-t0)/60:.1f} min: "
      f"gain {rep.mse_norm[0]:.2e} < lag {rep.mse_norm[1]:.2e}"
      f" -> {rep.mse_norm[0] < rep.mse_norm[1]}", flush=True)

# --- criterion 7: drag sweep ---
t0 = time.perf_counter()
curve = drag_sweep_eval(model, deltas=(0.5, 1.0, 2.0), runs_per_point=100,
                        seed=SEED + 2, box=BOX, noise=True, workers=4)
mse = {v: curve.mse_norm[i] for i, v in enumerate(curve.values)}
print(f"[c7] sweep in {(time.perf_counter()-t0)/60:.1f} min")
for v in (0.5, 1.0, 2.0):
    print(f"     delta {v}: {np.round(mse[v], 5)}")
print(f"[c7] 0.5x worse both: {bool(np.all(mse[0.5] > mse[1.0]))}; "
      f"2x worse both: {bool(np.all(mse[2.0] > mse[1.0]))}")
dg = mse[2.0][0] / mse[1.0][0]
dl = mse[2.0][1] / mse[1.0][1]
print(f"[c7] degradation at 2x: lag {dl:.2f} >= gain {dg:.2f} -> {dl >= dg}")

print(f"total {(time.perf_counter()-t_all)/60:.1f} min")
