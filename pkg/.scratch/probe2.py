import sys, time
import numpy as np
sys.path.insert(0, "src")
from pnident.dataset import Dataset
from pnident.nn import AdamState, init_model, train, evaluate_mse

ds = Dataset.load(".scratch/pilot.ds")

def run(name, mk, batch, iters_a, lr, decay, iters_b=0, lr_b=None):
    model = init_model(ds.stats, head_kind="regime", max_steps=100, seed=0, **mk)
    adam = AdamState.for_params(model, base_rate=lr, decay=decay, decay_every=100)
    t0 = time.time()
    train(model, ds.train, iterations=iters_a, batch_size=batch, seed=0, adam=adam)
    per, comb = evaluate_mse(model, ds.val)
    msg = f"{name}: {(time.time()-t0)/iters_a*1000:.0f} ms/iter  val@{iters_a}: gain={per[0]:.4f} lag={per[1]:.4f} comb={comb:.4f}"
    if iters_b:
        adam.base_rate = lr_b
        adam.step = 0  # restart schedule at the lower rate
        train(model, ds.train, iterations=iters_b, batch_size=batch, seed=1, adam=adam)
        per, comb = evaluate_mse(model, ds.val)
        msg += f"  after lr->{lr_b} x{iters_b}: gain={per[0]:.4f} lag={per[1]:.4f} comb={comb:.4f}"
    print(msg, flush=True)

# lr-drop diagnostic on the mid config: is the plateau rate-bound?
run("P5 H48L2 B128 drop", dict(hidden=48, n_layers=2), 128, 600, 0.005, 0.99, iters_b=200, lr_b=0.0005)
# single-layer capacity probes with large batches
run("P6 H32L1 B512", dict(hidden=32, n_layers=1), 512, 600, 0.008, 0.97)
run("P7 H48L1 B384", dict(hidden=48, n_layers=1), 384, 600, 0.006, 0.98)
