"""
Compressed sensing reconstructions
==================================

Runs the four methods on a small phantom so that the script finishes
in about a minute.  Pass ``--full`` for the 42x172 setup (roughly ten
minutes on one core).
"""

import sys
from dataclasses import replace

from patcs.phantom import PhantomSpec
from patcs.pipeline import DEFAULT_SOLVERS, ExperimentConfig, TilingParams, run_all

cfg = ExperimentConfig(sigma=0.01)
if "--full" not in sys.argv:
    # half the lateral extent and fewer outer iterations
    solvers = {m: replace(s, k_max=30) for m, s in DEFAULT_SOLVERS.items()}
    cfg = replace(cfg, phantom=PhantomSpec(dims=(24, 96), n_vessels=3),
                  data_tiling=TilingParams(4, 64), image_tiling=TilingParams(4, 64), solvers=solvers)

print(cfg.dumps())
results = run_all(cfg)

print(f"{'method':8s} {'PSNR':>7s} {'SSIM':>6s}  iterations")
for method, (score, _, run) in results.items():
    iters = "-" if run is None else run.iterations
    print(f"{method:8s} {score.psnr:7.2f} {score.ssim:6.3f}  {iters}")
