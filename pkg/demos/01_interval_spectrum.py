"""Neumann eigenvalues of the unit interval from a boundary-corrected graph.

Builds an epsilon-net on [0, 1], assembles the graph Laplacian with the
reflected-distance correction, and compares its lowest eigenvalues with the
classical Neumann values (k pi)^2.  The uncorrected (closed-manifold) variant
is shown alongside; on an interval with exact cell weights the two agree to
high order, which is why the correction is best appreciated through the
energy identities and the glued spaces of the later demos.
"""

import numpy as np

from netlap import geometry, spectra
from netlap.laplacian import build
from netlap.sampling import SamplerConfig, sample_net, verify_net

space = geometry.interval(1.0)
net = sample_net(space, SamplerConfig("grid", target_epsilon=2e-3))
report = verify_net(space, net)
print(f"net: N={net.n_points}, covering radius {report.covering_radius:.2e}, "
      f"sum(mu) - vol = {report.weight_sum_residual:+.1e}")

rho = 0.05
ref = spectra.reference_spectrum(space, 5)
print(f"\nrho = {rho}   (prefactor 2(n+2)/(nu_n rho^(n+2)))")
print(f"{'k':>2} {'neumann':>12} {'boundary':>12} {'closed':>12} {'rel err (bd)':>12}")
rows = {}
for variant in ("boundary", "closed"):
    L = build(space, net, rho, variant)
    rows[variant] = spectra.solve_graph_spectrum(L, 5).eigenvalues
for k in range(6):
    lam = ref.eigenvalues[k]
    rel = abs(rows["boundary"][k] - lam) / lam if lam else 0.0
    print(f"{k:>2} {lam:>12.5f} {rows['boundary'][k]:>12.5f} "
          f"{rows['closed'][k]:>12.5f} {rel:>12.2e}")

print("\nrho sweep at fixed epsilon: the rho^2 and eps/rho error terms trade off")
for r in (0.1, 0.05, 0.025):
    L = build(space, net, r, "boundary")
    lam1 = spectra.solve_graph_spectrum(L, 1).eigenvalues[1]
    print(f"  rho={r:<6} lambda_1 = {lam1:.6f}  (target {np.pi**2:.6f})")
