"""Outage probability of the cooperation protocol versus SNR.

The slope per decade of SNR shows the diversity order: about 2 when the
interuser link is good and the rate leaves room for cooperation, about 1 when
the partner is weak.

Run: python demos/02_outage.py
"""

import numpy as np

from coopldpc.channel import Links
from coopldpc.outage import OutageScenario, bpsk_mi, outage_probability

print("BPSK mutual information:", ", ".join(f"{db:+d} dB: {bpsk_mi(10 ** (db / 10)):.4f}" for db in (-10, 0, 5, 10)))

for label, R, beta, offsets in (("R=1/3, beta=1/2, scenario 1", 1 / 3, 0.5, "scenario1"),
                                ("R=0.45, beta=1/4, scenario 2", 0.45, 0.25, "scenario2")):
    print(f"\n{label}")
    p = {}
    for db in (10.0, 20.0, 30.0):
        sc = OutageScenario(R, beta, Links.scenario(offsets, db))
        p[db], (lo, hi) = outage_probability(sc, 200_000, seed=1, key=(int(db),), method="conditional")
        print(f"  {db:4.0f} dB  P_out = {p[db]:.3e}  [{lo:.3e}, {hi:.3e}]")
    print(f"  slope 20->30 dB: {np.log10(p[20.0] / p[30.0]):.2f}")
