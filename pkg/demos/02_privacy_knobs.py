"""The two post-training knobs: label clamp g (lambda) and rest-head noise f (k).

Trains a synthetic obfuscator, then sweeps k with and without the clamp and
prints leakage (private-label probe accuracy) next to utility.

Run: python3 demos/02_privacy_knobs.py   (about a minute)
"""
import numpy as np

from adjpriv import data as D
from adjpriv.evaluate import ProbeConfig, train_probe
from adjpriv.obfuscator import ObfuscatorArch, TrainHyper, train_obfuscator
from adjpriv.privatize import PrivacyParams, apply_f, apply_g, nu
from adjpriv.tradeoff import Splits, convex_hull_auc, sweep

ds = D.synth_generate(D.SynthSpec(n=4000, correlation=0.9, seed=1))
rest, test = D.split(ds, D.SplitConfig(0.8, 0))
train, aux = D.split(rest, D.SplitConfig(0.5, 1))  # aux: the adversary's look-alike data
fit, val = D.split(train, D.SplitConfig(0.9, 2))
model, _ = train_obfuscator(ObfuscatorArch.dense(ds.width, (128, 128), 32), fit, val,
                            TrainHyper(epochs=30, seed=0))

# what the knobs do to one record's bottleneck
v = model.encode(test.features[:1])
w_np, w_p = model.classify(v), model.rest(v)
print("classifier head", np.round(w_np, 3), "-> clamped", apply_g(w_np, test.y_nonprivate[:1], PrivacyParams()))
print("rest head nu", round(float(nu(w_p)[0]), 4))
noisy = apply_f(w_p, PrivacyParams(k=60), rng=np.random.default_rng(0))
print("noise std at k=60 over this record's 30 coordinates", round(float((noisy - w_p).std()), 4), "law", round(float(np.sqrt(60 * nu(w_p)[0])), 4))

config = ProbeConfig.reference(ds.width, max_epochs=10)
adversary = train_probe(config, aux, "private")
splits = Splits(train, aux, test)
grid = (0, 5, 20, 60, 200)
print("\nmajority rates: private", D.majority_rate(test.y_private), "non-private", D.majority_rate(test.y_nonprivate))
for lam in (-3000.0, -10.0):
    curve = sweep(model, splits, grid, [lam], "weak", "original", config, adversary=adversary)
    print(f"\nlambda={lam:g}  (first row: no clamp, no noise)")
    for p in curve.points:
        print(f"  k={p.k:>5g}  leakage {p.leakage:.3f}  utility {p.utility:.3f}")
    print(f"  convex-hull AUC {convex_hull_auc(curve):.4f}")
