"""
Rule-based policies on a synthetic corpus
=========================================

Every policy streams the identical set of (trace, start offset) episodes, so
differences between them are paired.
"""

from uavabr import SynthParams, VideoSpec, split, synthesize_corpus
from uavabr.baselines import make_baseline
from uavabr.report import compare

corpus = synthesize_corpus(SynthParams(), count=100, seed=1)
train_set, test_set = split(corpus)
print(f"{len(corpus)} traces: {len(train_set)} train / {len(test_set)} test")

names = ["fixed0", "fixed1", "fixed2", "fixed3", "buffer_based", "rate_based", "mpc"]
policies = {n: make_baseline(n) for n in names}
rep = compare(test_set, policies, VideoSpec(), seed=0)

print(f"\n{'policy':13s} {'QoE':>7s} {'util':>7s} {'rebuf':>7s} {'smooth':>7s} {'viol':>7s}")
for name, res in rep.results.items():
    s = res.summary
    print(f"{name:13s} {s.mean_qoe:7.3f} {s.mean_utility:7.3f} {s.mean_rebuf_pen:7.3f} "
          f"{s.mean_smooth_pen:7.3f} {s.mean_violation:7.3f}")

# Paired bootstrap intervals for MPC against the rest.
print("\nmpc minus other policies, mean QoE per chunk (95% CI):")
for p in rep.pairwise:
    if "mpc" in (p.a, p.b):
        other, sign = (p.b, 1) if p.a == "mpc" else (p.a, -1)
        lo, hi = sorted((sign * p.diff_lo, sign * p.diff_hi))
        print(f"  vs {other:13s} {sign * p.mean_diff:+.3f}  [{lo:+.3f}, {hi:+.3f}]")

# The report bundle is plain CSV (summary, CDFs, per-chunk time series, pairwise stats).
print("\nreport files:", ", ".join(sorted(rep.files())[:6]), "...")
