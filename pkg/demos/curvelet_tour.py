"""
A tour of the curvelet frame
============================

Builds a tiling, checks that it is tight, then looks at what the
wedge restriction keeps on simulated sensor data.
"""

import numpy as np

from patcs.curvelet import Tiling, best_s_term_error, keep_largest
from patcs.pipeline import Experiment, ExperimentConfig
from patcs.wedge import out_of_range_energy

# a tiling only depends on grid size, scale count and angle count
tiling = Tiling((128, 128), 4, 32)
print(tiling)
print("angles per scale:", [tiling.angles_at(s) for s in range(tiling.n_scales)])

u = np.random.default_rng(0).standard_normal((128, 128))
c = tiling.analyze(u)
print("norm ratio     ", np.linalg.norm(c) / np.linalg.norm(u))
print("roundtrip error", np.linalg.norm(tiling.synthesize(c) - u) / np.linalg.norm(u))

# the vessel experiment: 42x172 phantom, 591 time samples per sensor
exp = Experiment(ExperimentConfig())
p0, clean, noisy = exp.simulate()
frame = exp.data_frame
spec = frame.spec
print("angles kept per scale:", [spec.in_range_count(s) for s in range(frame.tiling.n_scales)],
      "of", [frame.tiling.angles_at(s) for s in range(frame.tiling.n_scales)])

# physical data hardly lives outside the bow-tie
g = clean.values
print("range projection loss", np.linalg.norm(frame.synthesize(frame.analyze(g)) - g) / np.linalg.norm(g))

# zero filling the missing sensors smears energy into non-physical directions
pattern = exp.pattern()
holes = noisy.values.copy()
holes[:, ~pattern.mask] = 0
plain = frame.tiling.analyze(holes)
print("out-of-range share of zero-filled data",
      out_of_range_energy(plain, spec) / np.sum(plain ** 2))

# 5% best-term approximations
ref = exp.reference(p0).values
print("image, 5% terms:", best_s_term_error(ref, exp.image_tiling, int(0.05 * ref.size)))
approx = frame.synthesize(keep_largest(frame.analyze(g), int(0.05 * g.size)))
print("data, 5% terms: ", np.linalg.norm(g - approx) / np.linalg.norm(g))
