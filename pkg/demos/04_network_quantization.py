"""End-to-end network quantization with error guarantees, plus file round-trips.

A feed-forward stack and a residual chain are quantized layer by layer with
one shared (K, delta).  Measured worst-case output errors sit below the
closed-form estimates, and both model kinds round-trip through their binary
formats.
"""

import tempfile
from pathlib import Path

import numpy as np

import framequant as fq

rng = np.random.default_rng(31)

widths = [20, 16, 16, 8]
model = fq.Model(
    tuple(
        fq.AffineLayer(rng.normal(size=(dout, din)) / np.sqrt(din))
        for din, dout in zip(widths, widths[1:])
    )
)
X = rng.normal(size=(500, widths[0]))

print("feed-forward stack 20 -> 16 -> 16 -> 8, shared delta = 1/8:")
for n in (64, 256, 1024):
    qmodel = fq.quantize_network(model, fq.uniform_config(model, n, delta=1 / 8))
    err = fq.empirical_error(model, qmodel, X)
    reports = {r.bound_kind: r for r in fq.network_bound_reports(model, qmodel, X)}
    general = reports["fnn_general"].theoretical
    harmonic = reports["fnn_harmonic"].theoretical
    print(f"  N={n:>5}: worst error {err.worst:9.4f}   "
          f"general estimate {general:10.2f}   harmonic estimate {harmonic:10.2f}")

k = 12
res = fq.Model(
    tuple(
        fq.ResidualBlock(rng.normal(size=(k, k)) / np.sqrt(k), rng.normal(size=(k, k)) / np.sqrt(k))
        for _ in range(2)
    )
)
Xr = rng.normal(size=(500, k))
print("\nresidual chain, 2 blocks of width 12:")
for n in (64, 512):
    qres = fq.quantize_network(res, fq.uniform_config(res, n, delta=1 / 16))
    (rep,) = fq.network_bound_reports(res, qres, Xr)
    print(f"  N={n:>5}: worst error {rep.empirical:9.4f}   estimate {rep.theoretical:10.2f}")

with tempfile.TemporaryDirectory() as tmp:
    fqw = Path(tmp) / "model.fqw"
    fqq = Path(tmp) / "model.fqq"
    fq.save_model(model, fqw)
    qmodel = fq.quantize_network(model, fq.uniform_config(model, 256, delta=1 / 8))
    fq.save_quantized(qmodel, fqq)
    back = fq.load_quantized(fqq)
    x = rng.normal(size=widths[0])
    drift = np.max(np.abs(fq.forward_quantized(qmodel, x) - fq.forward_quantized(back, x)))
    print(f"\nfile round-trip: {fqw.stat().st_size} bytes float, "
          f"{fqq.stat().st_size} bytes quantized, output drift {drift:.1e}")
