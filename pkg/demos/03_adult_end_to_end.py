"""Full Adult run through the library: preprocess, train, privatize, score.

Uses data/adult/adult.data and adult.test. Prints the encoding widths, the
training curve, leakage/utility at a few settings for two clamp values, and
the convex-hull AUC of each curve against the Gaussian-input baseline.

Run: python3 demos/03_adult_end_to_end.py   (about 8 minutes on one core)
"""
from pathlib import Path

from adjpriv import data as D
from adjpriv.evaluate import ProbeConfig, train_probe
from adjpriv.obfuscator import ObfuscatorArch, TrainHyper, train_obfuscator
from adjpriv.tradeoff import Splits, convex_hull_auc, gaussian_input_baseline, sweep

root = Path(__file__).resolve().parents[1] / "data" / "adult"
raw = D.read_adult([root / "adult.data", root / "adult.test"])
train, test, enc = D.preprocess_adult(raw, D.SplitConfig(0.8, seed=0))
print(f"{len(raw)} raw records, {len(train)} train / {len(test)} test after dropping '?' rows")
print(f"encoded width {enc.encoded_width}, feature width {train.width}")

# half the training split trains the obfuscator, the other half plays the adversary's data
obf_half, aux = D.split(train, D.SplitConfig(0.5, seed=1))
fit, val = D.split(obf_half, D.SplitConfig(0.9, seed=0))
model, history = train_obfuscator(ObfuscatorArch.reference(train.width), fit, val, TrainHyper())
print(f"obfuscator: {history.epochs_run} epochs, best {history.best_epoch}, "
      f"val mse {history.initial_val_ae:.4f} -> {min(history.val_ae):.5f}, "
      f"income acc {history.val_acc[history.best_epoch - 1]:.3f}")

config = ProbeConfig.reference(train.width)
adversary = train_probe(config, aux, "private")
splits = Splits(obf_half, aux, test)
print("majority: gender", round(D.majority_rate(test.y_private), 4),
      "income", round(D.majority_rate(test.y_nonprivate), 4))

grid = (0, 5, 20, 60, 200)
for lam in (-3000.0, -10.0):
    curve = sweep(model, splits, grid, [lam], "weak", "original", config, adversary=adversary)
    print(f"\nlambda={lam:g}")
    for p in curve.points:
        tag = "no clamp" if p.lam is None else f"k={p.k:g}"
        print(f"  {tag:<9} gender acc {p.leakage:.4f}  income acc {p.utility:.4f}")
    print(f"  AUC {convex_hull_auc(curve):.4f} (origin 0,0)  {convex_hull_auc(curve, 'half'):.4f} (origin 0.5,0.5)")

noise = gaussian_input_baseline(splits, (0, 0.05, 0.2, 1, 5), config, adversary=adversary)
print("\nGaussian noise on the inputs")
for p in noise.points:
    print(f"  var={p.k:<5g} gender acc {p.leakage:.4f}  income acc {p.utility:.4f}")
print(f"  AUC {convex_hull_auc(noise):.4f}")
