import time
import numpy as np
from pnident.dataset import Dataset
from pnident.nn.network import init_model
from pnident.nn.training import AdamState, train

ds = Dataset.load(".scratch/pilot.ds")
for hidden, layers, batch in [(48, 1, 384), (32, 1, 512), (48, 2, 128), (64, 1, 384)]:
    model = init_model(ds.stats, hidden=hidden, n_layers=layers, head_kind="regime",
                       max_steps=ds.manifest["max_steps"], seed=0)
    adam = AdamState.for_params(model, base_rate=0.005)
    train(model, ds.train, iterations=3, batch_size=batch, seed=0, adam=adam)  # warm
    t0 = time.perf_counter()
    train(model, ds.train, iterations=60, batch_size=batch, seed=1, adam=adam)
    dt = (time.perf_counter() - t0) / 60
    print(f"H{hidden}L{layers} B{batch}: {dt*1000:.0f} ms/iter")
