"""Monte Carlo simulation of the full protocol with belief propagation decoding.

Run: python demos/04_simulate.py
"""

from coopldpc.channel import Links
from coopldpc.construction import CodeSpec, assemble
from coopldpc.degree import get_preset
from coopldpc.protocol import CooperationSimulator, wilson_interval

code = assemble(CodeSpec(get_preset("regular3936"), 600, seed=3, remove_4cycles=True))
sim = CooperationSimulator(code, max_iter=50)
for i, snr in enumerate((6.0, 10.0, 14.0)):
    res = sim.simulate(Links.scenario("scenario1", snr), 400, seed=4, key=(i,))
    errors, words = res.errors1 + res.errors2, 2 * res.blocks
    lo, hi = wilson_interval(errors, words)
    cases = ", ".join(f"case {c}: {n}" for c, n in enumerate(res.case_counts) if c)
    print(f"{snr:5.1f} dB  WER {errors / words:.3e} [{lo:.2e}, {hi:.2e}]  ({cases})")
