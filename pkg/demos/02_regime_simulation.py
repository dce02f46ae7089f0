"""Age-dependent regime switching: holding times, occupation, path export.

Run:  python demos/02_regime_simulation.py
"""

import numpy as np

from smheston import (ConstantHazard, HazardSpec, SaturatingHazard, holding_cdf,
                      sample_holding, sample_regime_path, transition_probs)

spec = HazardSpec(2, {
    (0, 1): SaturatingHazard(c=0.9, m=1.0, tau=0.6),   # calm: leaves faster with age
    (1, 0): SaturatingHazard(c=0.9, m=-0.4, tau=0.8),  # stressed: initially sticky
})

print("=" * 72)
print("SEMI-MARKOV REGIME CHAIN")
print("=" * 72)

print("Holding-time distribution out of the calm regime (age matters):")
for age in (0.0, 1.0, 3.0):
    median = np.interp(0.5, [float(holding_cdf(spec, 0, age + u))
                             for u in np.linspace(0, 10, 2001)],
                       np.linspace(0, 10, 2001)) - age
    print(f"   entered {age:.0f}y ago -> median residual holding "
          f"{max(median, 0):.3f}y, jump target probs {transition_probs(spec, 0, age)}")
print()

rng = np.random.default_rng(42)
samples = np.array([sample_holding(spec, 0, 0.0, rng) for _ in range(20000)])
print(f"20k sampled holding times from age 0: mean {samples.mean():.3f}, "
      f"median {np.median(samples):.3f}")
cdf_at_mean = float(holding_cdf(spec, 0, samples.mean()))
print(f"closed-form CDF at the sample mean: {cdf_at_mean:.3f}")
print()

path = sample_regime_path(spec, 0, 0.0, 50.0, np.random.default_rng(7))
t_grid = np.linspace(0.0, 50.0, 100001)
occ0 = float(np.mean(path.state_at(t_grid) == 0))
print(f"One 50y path: {path.n_transitions} transitions, "
      f"fraction of time in calm regime {occ0:.3f}")
out = "regime_path.csv"
path.to_csv(out)
print(f"transitions written to {out} (columns: transition_time,new_state)")
