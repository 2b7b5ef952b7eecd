import sys, time
import numpy as np
sys.path.insert(0, "/root/pkg/src")
from pnident.dataset import ParamBox, generate_dataset
from pnident.engagement import AircraftParams, MissileParams
from pnident.experiments import (
    compare_training, sample_run, monte_carlo_eval, drag_sweep_eval,
    moving_average,
)
from pnident.nn import save_model

t0 = time.perf_counter()
ds = generate_dataset(n_traj=200, windows_per_traj=20, seed=11)
print(f"dataset {time.perf_counter()-t0:.0f}s train={len(ds.train)} val={len(ds.val)}", flush=True)

cmp = compare_training(ds, hidden=64, n_layers=3, iterations=2000,
                       batch_size=64, seed=0)
print("compare:", {k: round(v, 6) if isinstance(v, float) else v
                   for k, v in cmp.summary().items()}, flush=True)
ma_r = moving_average(cmp.regime_losses, 100)
ma_l = moving_average(cmp.linear_losses, 100)
print("regime MA non-increasing frac:", float(np.mean(np.diff(ma_r) <= 1e-12)),
      "linear:", float(np.mean(np.diff(ma_l) <= 1e-12)), flush=True)
save_model("/root/pkg/.scratch/pilot_regime.ckpt", cmp.regime_model)
save_model("/root/pkg/.scratch/pilot_linear.ckpt", cmp.linear_model)

missile = MissileParams(pn_gain=5.0, time_constant=0.30, initial_speed=2.25 * 340)
aircraft = AircraftParams(speed=0.9 * 340)
for noise in (False, True):
    run = sample_run(cmp.regime_model, missile, aircraft, 7000.0, 0.0,
                     noise=noise, seed=3)
    after = run.t > 1.0
    relN = np.abs(run.estimates[after, 0] - 5.0) / 5.0
    relT = np.abs(run.estimates[after, 1] - 0.30) / 0.30
    print(f"replay noise={noise}: maxN={relN.max():.3f} maxT={relT.max():.3f} "
          f"frac>10%: N={np.mean(relN > 0.1):.3f} T={np.mean(relT > 0.1):.3f}", flush=True)

t1 = time.perf_counter()
train_ids = {s.traj_id for s in ds.train}
mc = monte_carlo_eval(cmp.regime_model, 150, seed=77, training_ids=train_ids)
print(f"MC 150 noisy: mse_norm={mc.mse_norm} ordering={mc.mse_norm[0] < mc.mse_norm[1]} "
      f"t={time.perf_counter()-t1:.0f}s", flush=True)

t2 = time.perf_counter()
sweep = drag_sweep_eval(cmp.regime_model, runs_per_point=40, seed=42)
print("drag sweep values:", sweep.values, flush=True)
print("drag mse:", sweep.mse_norm, flush=True)
base = sweep.mse_norm[1]
print("direction 0.5>1:", (sweep.mse_norm[0] > base).tolist(),
      "2>1:", (sweep.mse_norm[2] > base).tolist(), flush=True)
rel = sweep.mse_norm[2] / base
print("rel degradation at 2.0: N x%.2f tau x%.2f, tau>=N: %s" %
      (rel[0], rel[1], rel[1] >= rel[0]), flush=True)
print("TOTAL", round(time.perf_counter() - t0), flush=True)
