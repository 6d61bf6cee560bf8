"""Sigma-delta quantization of one vector, and how redundancy buys accuracy.

The recursion replaces each frame coefficient with a coarse alphabet level
while feeding the rounding error forward.  The rebuild error is bounded by
delta*d/(2N) * (variation + 1), so at a FIXED bit width per code the error
shrinks as the frame grows.
"""

import numpy as np

import framequant as fq

rng = np.random.default_rng(11)

alphabet = fq.Alphabet(K=2, delta=0.25)
print(f"alphabet levels (K=2, delta=0.25): {alphabet.values()}")

x = rng.normal(size=3)
x *= 0.3 / np.linalg.norm(x)

print(f"\ninput x = {np.round(x, 4)}  (norm {np.linalg.norm(x):.3f})")
print(f"{'N':>6}  {'error':>10}  {'guarantee':>10}")
for n in (8, 32, 128, 512, 2048):
    frame = fq.harmonic_frame(3, n)
    perm = fq.find_permutation(frame)
    out = fq.quantize_vector(x, frame, perm, alphabet)
    err = np.linalg.norm(x - out.reconstruction)
    bound = fq.vector_bound(alphabet.delta, 3, n, fq.frame_variation(frame, perm))
    print(f"{n:>6}  {err:>10.2e}  {bound:>10.2e}")

print("\nstate variable never leaves [-delta/2, delta/2] while inputs fit:")
coeffs = fq.analysis(fq.harmonic_frame(3, 64), x)
trace = fq.sd_quantize_sequence(coeffs, alphabet)
print(f"  max |u_n| = {np.max(np.abs(trace.u)):.4f}  vs  delta/2 = {alphabet.delta / 2}")
print(f"  codes used: {sorted(set(trace.levels.tolist()))} out of 0..{2 * alphabet.K - 1}")
