import sys, time
import numpy as np
sys.path.insert(0, "src")
from pnident.dataset import Dataset
from pnident.nn import AdamState, init_model, train, evaluate_mse

ds = Dataset.load(".scratch/pilot.ds")
print(f"loaded {len(ds.train)} train / {len(ds.val)} val", flush=True)

CONFIGS = [
    ("P1 H64L3 B64 lr4e-3 d.98", dict(hidden=64, n_layers=3), dict(batch_size=64), dict(base_rate=0.004, decay=0.98)),
    ("P2 H64L3 B96 lr4e-3 d.98", dict(hidden=64, n_layers=3), dict(batch_size=96), dict(base_rate=0.004, decay=0.98)),
    ("P3 H48L2 B128 lr5e-3 d.98", dict(hidden=48, n_layers=2), dict(batch_size=128), dict(base_rate=0.005, decay=0.98)),
    ("P4 H32L2 B256 lr6e-3 d.97", dict(hidden=32, n_layers=2), dict(batch_size=256), dict(base_rate=0.006, decay=0.97)),
]

for name, mk, tk, ak in CONFIGS:
    model = init_model(ds.stats, head_kind="regime", max_steps=100, seed=0, **mk)
    adam = AdamState.for_params(model, decay_every=100, **ak)
    t0 = time.time()
    hist = train(model, ds.train, iterations=600, seed=0, adam=adam, **tk)
    dt = time.time() - t0
    losses = np.asarray(hist.losses)
    ma = [losses[max(0, k-100):k].mean() for k in (100, 300, 600)]
    per, comb = evaluate_mse(model, ds.val)
    print(f"{name}: {dt/600*1000:.0f} ms/iter  MA100@100={ma[0]:.4f} @300={ma[1]:.4f} @600={ma[2]:.4f}  val gain={per[0]:.4f} lag={per[1]:.4f} comb={comb:.4f}", flush=True)
