"""Population density evolution: subcode thresholds and the DE word error rate.

Small populations keep this under a minute; the library defaults are larger.

Run: python demos/03_density_evolution.py
"""

import numpy as np

from coopldpc.channel import Links
from coopldpc.degree import DegreePoly, get_preset
from coopldpc.density import de_boundary, de_threshold, de_wer

lam, rho = DegreePoly.regular(3), DegreePoly.regular(6)
thr = de_threshold(lam, rho, seed=0, population=10_000)
print(f"(3,6) threshold: {thr:.2f} dB Es/N0 (Eb/N0 {thr - 10 * np.log10(0.5):.2f} dB)")

ens = get_preset("scenario1")
thr1 = de_threshold(ens.lam1, ens.rho1, seed=0, population=10_000)
print(f"{ens.name} subcode threshold: {thr1:.2f} dB")

boundary = de_boundary(ens, seed=0, population=5_000, tol_db=0.1)
print(f"full-code threshold with equal frame SNRs: {10 * np.log10(boundary.s_diag):.2f} dB")

grid = np.arange(4.0, 21.0, 4.0)
rows = de_wer(ens, lambda s: Links.scenario("scenario1", s), grid, 20_000, seed=1,
              boundary=boundary, subcode_threshold_db=thr1)
for r in rows:
    print(f"  {r['snr_db']:5.1f} dB  DE WER {r['wer']:.3e}")
