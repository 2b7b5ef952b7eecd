"""Head-to-head race probes for the pinned 2000-iteration comparison."""
import time
import numpy as np
from pnident.dataset import Dataset
from pnident.experiments import compare_training
from pnident.nn.training import evaluate_mse

ds = Dataset.load(".scratch/pilot.ds")

def ma100(losses, k):
    w = losses[max(0, k - 100):k]
    return sum(w) / len(w)

for tag, kw in [
    ("C1 H48L2 B128 d0.98", dict(hidden=48, n_layers=2, batch_size=128,
                                  base_rate=0.005, decay=0.98, decay_every=100)),
    ("C0 H48L2 B128 d0.88", dict(hidden=48, n_layers=2, batch_size=128,
                                  base_rate=0.005, decay=0.88, decay_every=100)),
]:
    t0 = time.perf_counter()
    r = compare_training(ds, iterations=2000, seed=0, **kw)
    dt = time.perf_counter() - t0
    print(f"== {tag}  ({dt/60:.1f} min)")
    print(f"   initial: regime {r.regime_initial:.4f}  linear {r.linear_initial:.4f}")
    print(f"   final:   regime {r.regime_final:.6f}  linear {r.linear_final:.6f}  "
          f"ok={r.regime_final <= r.linear_final}")
    for k in (200, 500, 1000, 1500, 2000):
        print(f"   MA100@{k}: regime {ma100(r.regime_losses, k):.4f}  "
              f"linear {ma100(r.linear_losses, k):.4f}")
    vr = evaluate_mse(r.regime_model, ds.val)
    vl = evaluate_mse(r.linear_model, ds.val)
    print(f"   val: regime per={np.round(vr[0], 5)} comb={vr[1]:.5f} | "
          f"linear per={np.round(vl[0], 5)} comb={vl[1]:.5f}", flush=True)
