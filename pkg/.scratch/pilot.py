import time, sys
import numpy as np
sys.path.insert(0, "/root/pkg/src")
from pnident.dataset import ParamBox, generate_dataset, latest_window
from pnident.engagement import AircraftParams, MissileParams, SimLimits, simulate
from pnident.sensing import build_features, sample_measurements
from pnident.nn import AdamState, init_model, train, evaluate_mse, pack_batch
from pnident.nn.network import batch_forward
from pnident.dataset import Sample

t0 = time.perf_counter()
box = ParamBox()
ds = generate_dataset(box, n_traj=200, windows_per_traj=20, seed=11)
print(f"dataset: {time.perf_counter()-t0:.1f}s train={len(ds.train)} val={len(ds.val)}", flush=True)

HID, LAY, ITERS, BATCH = 64, 3, 2000, 64
results = {}
for kind in ("regime", "linear"):
    t1 = time.perf_counter()
    model = init_model(ds.stats, hidden=HID, n_layers=LAY, head_kind=kind,
                       max_steps=100, seed=0)
    init_mse = evaluate_mse(model, ds.train)[1]
    hist = train(model, ds.train, iterations=ITERS, batch_size=BATCH, seed=0)
    per, final_mse = evaluate_mse(model, ds.val)
    print(f"{kind}: init={init_mse:.4f} final={final_mse:.3e} per={per} "
          f"first-loss={hist.losses[0]:.4f} t={time.perf_counter()-t1:.0f}s", flush=True)
    results[kind] = (model, init_mse, final_mse, hist)

model = results["regime"][0]

# §IV.C replay, noise-free, exact rates (training distribution)
mp = MissileParams(pn_gain=5.0, time_constant=0.30, initial_speed=2.25*340)
ap = AircraftParams(speed=0.9*340)
traj = simulate(mp, ap, initial_range=7000.0, initial_los=0.0, dt=1e-3)
meas = sample_measurements(traj, sigma_r=0.0, sigma_q=0.0, seed=0)
feats = build_features(meas, traj, rate_mode="exact")
f_norm = ds.stats.norm_features(feats.matrix())
n = f_norm.shape[0]
est = np.zeros((n, 2))
for k in range(n):
    lo, hi = latest_window_k = (max(0, k - 99), k)
    w = f_norm[lo:hi + 1]
    x, mask, _ = pack_batch([Sample(window=w, label=np.zeros(2), traj_id="r", end_tick=k)])
    est[k] = batch_forward(x, mask, model)[0][0]
t_axis = feats.t
after = t_axis > 1.0
relN = np.abs(est[after, 0] - 5.0) / 5.0
relT = np.abs(est[after, 1] - 0.30) / 0.30
print(f"replay noise-free: maxrelN={relN.max():.3f} maxrelT={relT.max():.3f} "
      f"fracN>10%={np.mean(relN>0.1):.3f} fracT>10%={np.mean(relT>0.1):.3f}", flush=True)

# quick Monte Carlo, noisy, smoothed rates, 100 runs
from pnident.dataset import lhs_sample, scenario_from_vector, extract_windows, normalize
rng_eval = np.random.default_rng(999)
vecs = lhs_sample(box, 100, seed=999)
sq = np.zeros(2); cnt = 0
t2 = time.perf_counter()
for i in range(100):
    sc = scenario_from_vector(box, vecs[i])
    mp = MissileParams(pn_gain=sc.pn_gain, time_constant=sc.time_constant,
                       initial_speed=sc.missile_mach*340)
    ap = AircraftParams(speed=sc.aircraft_mach*340)
    try:
        tr = simulate(mp, ap, initial_range=sc.initial_range,
                      initial_los=np.deg2rad(sc.initial_los_deg), dt=1e-3)
    except Exception as e:
        print("sim fail", e); continue
    ms = sample_measurements(tr, seed=int(rng_eval.integers(2**31)))
    ft = build_features(ms, tr, rate_mode="smoothed")
    f = ds.stats.norm_features(ft.matrix())
    ends = extract_windows(ft, 10, rng=rng_eval)
    for (lo, hi) in ends:
        w = f[lo:hi + 1]
        x, mask, _ = pack_batch([Sample(window=w, label=np.zeros(2), traj_id="e", end_tick=hi)])
        phys = batch_forward(x, mask, model)[0][0]
        y = ds.stats.norm_labels(np.array([sc.pn_gain, sc.time_constant]))
        pn = ds.stats.norm_labels(phys)
        sq += (pn - y) ** 2; cnt += 1
mseN, mseT = sq / cnt
print(f"MC noisy 100 runs: mseN={mseN:.4e} mseT={mseT:.4e} ordering N<T: {mseN < mseT} t={time.perf_counter()-t2:.0f}s", flush=True)

# drag sweep quick: 30 runs per point
for delta in (0.5, 1.0, 2.0):
    vecs2 = lhs_sample(box, 30, seed=555)
    sq = np.zeros(2); cnt = 0
    for i in range(30):
        sc = scenario_from_vector(box, vecs2[i])
        mp = MissileParams(pn_gain=sc.pn_gain, time_constant=sc.time_constant,
                           initial_speed=sc.missile_mach*340, drag_scale=delta)
        ap = AircraftParams(speed=sc.aircraft_mach*340)
        try:
            tr = simulate(mp, ap, initial_range=sc.initial_range,
                          initial_los=np.deg2rad(sc.initial_los_deg), dt=1e-3)
        except Exception as e:
            print("sim fail", e); continue
        ms = sample_measurements(tr, seed=1000 + i)
        ft = build_features(ms, tr, rate_mode="smoothed")
        f = ds.stats.norm_features(ft.matrix())
        rngw = np.random.default_rng(2000 + i)
        for (lo, hi) in extract_windows(ft, 10, rng=rngw):
            w = f[lo:hi + 1]
            x, mask, _ = pack_batch([Sample(window=w, label=np.zeros(2), traj_id="d", end_tick=hi)])
            phys = batch_forward(x, mask, model)[0][0]
            y = ds.stats.norm_labels(np.array([sc.pn_gain, sc.time_constant]))
            pn = ds.stats.norm_labels(phys)
            sq += (pn - y) ** 2; cnt += 1
    m = sq / cnt
    print(f"drag delta={delta}: mseN={m[0]:.4e} mseT={m[1]:.4e}", flush=True)
print("TOTAL", time.perf_counter() - t0, flush=True)
