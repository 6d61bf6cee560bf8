"""The K = 1 regime: every stored code is a single bit.

With a two-level alphabet {-delta/2, +delta/2} the code matrix of a layer
costs exactly (vectors quantized) x N bits.  On the 784 -> 256 -> 256 -> 10
layout the two hidden-frame layers cost 1040*N bits against a 32-bit dense
baseline of 8192*1040 bits, so any N below 8192 saves space.
"""

import numpy as np

import framequant as fq

rng = np.random.default_rng(47)

widths = [784, 256, 256, 10]
model = fq.Model(
    tuple(
        fq.AffineLayer(rng.normal(size=(dout, din)) / np.sqrt(din))
        for din, dout in zip(widths, widths[1:])
    )
)

probe = fq.uniform_config(model, 8, delta=1.0)
delta = 2.0 * fq.max_vector_norm(model, probe)
print(f"smallest one-bit step size for this model: delta = {delta:.3f}\n")

print(f"{'N':>6} {'code bits (layers 1-2)':>24} {'saved vs 32-bit dense':>22}")
for n in (1000, 4000, 7000):
    qmodel = fq.quantize_network(
        model, fq.uniform_config(model, n, delta=delta, K=1)
    )
    qms = list(fq.iter_qmatrices(qmodel))
    assert all(qm.bits_per_code == 1 for qm in qms)
    hidden = [fq.storage_bits(qm) for qm in qms[:2]]
    code = sum(r.code_bits for r in hidden)
    saved = sum(r.dense_bits_32 for r in hidden) - code
    print(f"{n:>6} {code:>24,} {saved:>22,}")

x = rng.normal(size=784)
qmodel = fq.quantize_network(model, fq.uniform_config(model, 4000, delta=delta, K=1))
rel = np.linalg.norm(fq.forward(model, x) - fq.forward_quantized(qmodel, x))
rel /= np.linalg.norm(fq.forward(model, x))
print(f"\nrelative output error of the N=4000 one-bit network on a random input: {rel:.3f}")
