"""Command-line harness.

Subcommands: frame, quantize, eval, sweep, onebit, bounds, storage.
Numbers accepted by ``--delta`` may be plain floats or fractions like 1/16;
list-valued flags take comma-separated entries.  All emitted CSV/JSON is
deterministic for fixed inputs and seed.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 constraint
violation (range/alphabet mismatches, path-length guarantees, estimate
hypotheses).
"""

from __future__ import annotations

import argparse
import csv
import functools
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bounds import (
    BoundReport,
    empirical_error,
    layer_stats,
    matrix_bound,
    network_bound_reports,
    operator_norm,
)
from .errors import ConstraintViolation, FileFormatError
from .fileio import (
    DatasetHandle,
    load_frame_vectors,
    load_mnist,
    load_model,
    load_quantized,
    save_frame,
    save_quantized,
)
from .frames import EXPLICIT, Frame, harmonic_frame, verify_funtf
from .network import (
    AffineLayer,
    Model,
    QuantizedAffine,
    QuantizedModel,
    forward,
    forward_quantized,
    iter_qmatrices,
    max_vector_norm,
    quantize_network,
    shared_K_for_delta,
    uniform_config,
)
from .quantizer import storage_bits


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_number(text: str) -> float:
    """Float or exact fraction like '1/16'."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _number_list(text: str) -> list[float]:
    return [parse_number(t) for t in text.split(",") if t]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _emit(args, rows: list[dict], columns: list[str]) -> None:
    """Write rows as CSV (header + fixed column order) or JSON."""
    if args.format == "json":
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in columns})
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_cell(value):
    if value is None:
        return "NA"
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return "NA"
        return repr(value)
    return value


@functools.lru_cache(maxsize=32)
def _harmonic(d: int, N: int) -> Frame:
    return harmonic_frame(d, N)


def _load_models(spec: str) -> list[Model]:
    return [load_model(p) for p in spec.split(",") if p]


def _load_dataset(args) -> DatasetHandle:
    data = load_mnist(args.data, split=args.split)
    if args.limit and args.limit < data.count:
        rng = np.random.default_rng(args.seed)
        idx = np.sort(rng.choice(data.count, size=args.limit, replace=False))
        data = DatasetHandle(images=data.images[idx], labels=data.labels[idx])
    return data


def _accuracy(net, data: DatasetHandle) -> float:
    out = forward_quantized(net, data.images) if isinstance(net, QuantizedModel) else forward(net, data.images)
    return float(np.mean(np.argmax(out, axis=1) == data.labels))


def _uniform_quantized(model: Model, N: int, delta: float, last_layer_row: bool,
                       bits: int | None = None, K: int | None = None,
                       base_mode: str = "column") -> QuantizedModel:
    """Quantize with one shared policy; fixed delta gets the smallest shared K."""
    if bits is not None:
        cfg = uniform_config(model, N, bits=bits, last_layer_row=last_layer_row,
                             base_mode=base_mode)
    else:
        if K is None:
            probe = uniform_config(model, N, delta=delta, last_layer_row=last_layer_row,
                                   base_mode=base_mode)
            K = shared_K_for_delta(model, probe, delta)
        cfg = uniform_config(model, N, delta=delta, K=K, last_layer_row=last_layer_row,
                             base_mode=base_mode)
    return quantize_network(model, cfg)


# ---------------------------------------------------------------------------
# subcommands


def cmd_frame(args) -> int:
    if args.harmonic:
        if args.frame_d is None or args.frame_N is None:
            raise UsageError("--harmonic needs --frame-d and --frame-N")
        vectors = _harmonic(args.frame_d, args.frame_N).vectors
        kind = "harmonic"
    elif args.explicit:
        vectors, kind = load_frame_vectors(args.explicit)
    else:
        raise UsageError("pick one of --harmonic or --explicit PATH")
    check = verify_funtf(vectors, tol=args.tol)
    report = {
        "kind": kind,
        "d": int(vectors.shape[1]),
        "N": int(vectors.shape[0]),
        "unit_norm_ok": check.unit_norm_ok,
        "tight_ok": check.tight_ok,
        "frame_bound_A": check.frame_bound_A,
        "max_norm_deviation": check.max_norm_deviation,
        "max_tightness_deviation": check.max_tightness_deviation,
    }
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not check.ok:
        raise ConstraintViolation(
            f"frame verification failed (norm dev {check.max_norm_deviation:.3g}, "
            f"tightness dev {check.max_tightness_deviation:.3g})"
        )
    if args.out:
        n, d = vectors.shape
        frame = _harmonic(d, n) if kind == "harmonic" else Frame(d=d, N=n, vectors=vectors, kind=EXPLICIT)
        save_frame(frame, args.out)
    return 0


def cmd_quantize(args) -> int:
    model = load_model(args.model)
    if args.K is not None and args.delta is None:
        raise UsageError("--K needs --delta")
    if args.bits is None and args.delta is None:
        raise UsageError("pick a policy: --bits, --delta, or --K with --delta")
    if args.bits is not None and (args.delta is not None or args.K is not None):
        raise UsageError("--bits excludes --delta/--K")
    last_row = args.last_layer_row == "on"
    qmodel = _uniform_quantized(
        model, args.frame_N, args.delta, last_row, bits=args.bits, K=args.K,
        base_mode=args.mode,
    )
    save_quantized(qmodel, args.out)
    rows = []
    for i, qm in enumerate(iter_qmatrices(qmodel)):
        report = storage_bits(qm)
        rows.append(
            {
                "matrix": i,
                "rows": qm.rows,
                "cols": qm.cols,
                "mode": qm.mode,
                "K": qm.K,
                "delta": qm.delta,
                "N": qm.frame.N,
                "bits_per_code": qm.bits_per_code,
                "code_bits": report.code_bits,
            }
        )
    summary_target = argparse.Namespace(format=args.format, out=None)
    _emit(summary_target, rows, ["matrix", "rows", "cols", "mode", "K", "delta", "N",
                                 "bits_per_code", "code_bits"])
    return 0


def cmd_eval(args) -> int:
    if not args.model and not args.quantized:
        raise UsageError("need --model and/or --quantized")
    data = _load_dataset(args)
    record: dict = {"count": data.count}
    model = load_model(args.model) if args.model else None
    qmodel = load_quantized(args.quantized) if args.quantized else None
    if model is not None:
        record["accuracy_float"] = _accuracy(model, data)
    if qmodel is not None:
        record["accuracy_quantized"] = _accuracy(qmodel, data)
    if model is not None and qmodel is not None:
        if (model.in_dim, model.out_dim) != (qmodel.in_dim, qmodel.out_dim):
            raise UsageError("model and quantized model disagree on input/output shape")
        err = empirical_error(model, qmodel, data.images)
        record["worst_error"] = err.worst
        record["mean_error"] = err.mean
        record["tightness"] = None if math.isinf(err.tightness) or math.isnan(err.tightness) else err.tightness
    columns = [c for c in ("count", "accuracy_float", "accuracy_quantized",
                           "worst_error", "mean_error", "tightness") if c in record]
    _emit(args, [record], columns)
    return 0


def cmd_sweep(args) -> int:
    models = _load_models(args.model)
    data = _load_dataset(args)
    n_values = sorted(set(_int_list(args.frame_N)))
    deltas = sorted(set(_number_list(args.delta)))
    if not n_values or not deltas:
        raise UsageError("--frame-N and --delta need at least one value each")
    last_row = args.last_layer_row == "on"
    rows = []
    for n in n_values:
        for delta in deltas:
            accs, worsts, means, tights = [], [], [], []
            for model in models:
                qmodel = _uniform_quantized(model, n, delta, last_row)
                accs.append(_accuracy(qmodel, data))
                err = empirical_error(model, qmodel, data.images)
                worsts.append(err.worst)
                means.append(err.mean)
                tights.append(err.tightness)
            finite = [t for t in tights if math.isfinite(t)]
            rows.append(
                {
                    "N": n,
                    "delta": delta,
                    "accuracy_mean": float(np.mean(accs)),
                    "accuracy_std": float(np.std(accs)),
                    "worst_error": max(worsts),
                    "mean_error": float(np.mean(means)),
                    "tightness": float(np.mean(finite)) if finite else None,
                }
            )
    _emit(args, rows, ["N", "delta", "accuracy_mean", "accuracy_std",
                       "worst_error", "mean_error", "tightness"])
    return 0


def cmd_onebit(args) -> int:
    models = _load_models(args.model)
    data = _load_dataset(args)
    n_values = sorted(set(_int_list(args.frame_N)))
    last_row = args.last_layer_row == "on"
    delta = args.delta if args.delta is not None else _minimal_onebit_delta(models, last_row)
    rows = []
    for n in n_values:
        accs = []
        code_bits = saved_bits = None
        for model in models:
            qmodel = _uniform_quantized(model, n, delta, last_row, K=1)
            accs.append(_accuracy(qmodel, data))
            if code_bits is None:
                code_bits, saved_bits = _hidden_storage(qmodel)
        rows.append(
            {
                "N": n,
                "accuracy_mean": float(np.mean(accs)),
                "accuracy_std": float(np.std(accs)),
                "code_bits": code_bits,
                "saved_bits": saved_bits,
            }
        )
    _emit(args, rows, ["N", "accuracy_mean", "accuracy_std", "code_bits", "saved_bits"])
    return 0


def _minimal_onebit_delta(models: list[Model], last_layer_row: bool) -> float:
    """Smallest shared delta with K = 1: twice the largest quantized-vector norm."""
    mx = 0.0
    for model in models:
        probe = uniform_config(model, 8, delta=1.0, last_layer_row=last_layer_row)
        mx = max(mx, max_vector_norm(model, probe))
    if mx == 0.0:
        raise ConstraintViolation("all-zero model: no step size fits the one-bit alphabet")
    return 2.0 * mx


def _hidden_storage(qmodel: QuantizedModel) -> tuple[int, int]:
    """Code/saved bits over every layer but the final classifier."""
    code = dense = 0
    for layer in qmodel.layers[:-1]:
        qms = [layer.qmatrix] if isinstance(layer, QuantizedAffine) else [layer.q1, layer.q2]
        for qm in qms:
            rep = storage_bits(qm)
            code += rep.code_bits
            dense += rep.dense_bits_32
    return code, dense - code


def cmd_bounds(args) -> int:
    model = load_model(args.model)
    qmodel = load_quantized(args.quantized)
    if (model.in_dim, model.out_dim) != (qmodel.in_dim, qmodel.out_dim):
        raise UsageError("model and quantized model disagree on input/output shape")
    if len(model.layers) != len(qmodel.layers):
        raise UsageError("model and quantized model disagree on layer count")
    data = _load_dataset(args)
    reports = list(network_bound_reports(model, qmodel, data.images))
    reports.extend(_per_matrix_reports(model, qmodel))
    rows = [r.as_dict() for r in reports]
    base = ["bound_kind", "theoretical", "empirical", "input_norm"]
    extras = sorted({k for row in rows for k in row} - set(base))
    _emit(args, rows, base + extras)
    return 0


def _per_matrix_reports(model: Model, qmodel: QuantizedModel):
    """Operator-norm error of each quantized matrix against its closed form."""
    idx = 0
    for layer, qlayer in zip(model.layers, qmodel.layers):
        if isinstance(layer, AffineLayer):
            pairs = [(layer.W, qlayer.qmatrix, layer.b)]
        else:
            pairs = [(layer.W1, qlayer.q1, layer.b), (layer.W2, qlayer.q2, None)]
        for W, qm, b in pairs:
            target = W
            if qm.bias_folded and b is not None:
                target = np.hstack([W, b[:, None]])
            diff = target - qm.reconstruct()
            stats = layer_stats(target, qm)
            err = operator_norm(diff)
            yield BoundReport(
                "matrix",
                matrix_bound(stats.delta, stats.m_out, stats.m_in, stats.N),
                err,
                0.0,
                {"matrix": idx, "N": stats.N, "delta": stats.delta},
            )
            if stats.harmonic:
                yield BoundReport(
                    "matrix_harmonic",
                    matrix_bound(stats.delta, stats.m_out, stats.m_in, stats.N, harmonic=True),
                    err,
                    0.0,
                    {"matrix": idx, "N": stats.N, "delta": stats.delta},
                )
            idx += 1


def cmd_storage(args) -> int:
    qmodel = load_quantized(args.quantized)
    rows = []
    total = None
    for i, qm in enumerate(iter_qmatrices(qmodel)):
        rep = storage_bits(qm)
        total = rep if total is None else total + rep
        rows.append(
            {
                "matrix": i,
                "rows": qm.rows,
                "cols": qm.cols,
                "mode": qm.mode,
                "K": qm.K,
                "N": qm.frame.N,
                "bits_per_code": qm.bits_per_code,
                "code_bits": rep.code_bits,
                "dense_bits_32": rep.dense_bits_32,
                "saved_bits": rep.saved_bits,
                "frame_overhead_bits": rep.frame_overhead_bits,
            }
        )
    rows.append(
        {
            "matrix": "total",
            "code_bits": total.code_bits,
            "dense_bits_32": total.dense_bits_32,
            "saved_bits": total.saved_bits,
            "frame_overhead_bits": total.frame_overhead_bits,
        }
    )
    _emit(args, rows, ["matrix", "rows", "cols", "mode", "K", "N", "bits_per_code",
                       "code_bits", "dense_bits_32", "saved_bits", "frame_overhead_bits"])
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="framequant", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--seed", type=int, default=0, help="seed for any subsampling")
        if data:
            p.add_argument("--data", required=True, help="dataset directory (IDX files)")
            p.add_argument("--split", choices=["test", "train"], default="test")
            p.add_argument("--limit", type=int, default=None,
                           help="evaluate on a seeded subsample of this size")

    p = sub.add_parser("frame", help="build or verify a unit-norm tight frame")
    p.add_argument("--harmonic", action="store_true")
    p.add_argument("--explicit", metavar="PATH", help="frame file to verify")
    p.add_argument("--frame-d", "-d", type=int, dest="frame_d")
    p.add_argument("--frame-N", "-N", type=int, dest="frame_N")
    p.add_argument("--tol", type=parse_number, default=1e-9)
    p.add_argument("--out", help="write the frame file here")
    p.set_defaults(func=cmd_frame)

    p = sub.add_parser("quantize", help="quantize a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--frame-N", type=int, dest="frame_N", required=True)
    p.add_argument("--delta", type=parse_number)
    p.add_argument("--bits", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--mode", choices=["column", "row"], default="column")
    p.add_argument("--last-layer-row", choices=["on", "off"], default="on")
    p.add_argument("--out", required=True, help="output quantized model path")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("eval", help="accuracy / error statistics on a dataset")
    p.add_argument("--model")
    p.add_argument("--quantized")
    common(p, data=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="(N, delta) grid evaluation")
    p.add_argument("--model", required=True, help="model file(s), comma separated")
    p.add_argument("--frame-N", dest="frame_N", required=True, help="comma-separated N values")
    p.add_argument("--delta", required=True, help="comma-separated step sizes")
    p.add_argument("--last-layer-row", choices=["on", "off"], default="on")
    common(p, data=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("onebit", help="K = 1 sweep with storage accounting")
    p.add_argument("--model", required=True, help="model file(s), comma separated")
    p.add_argument("--frame-N", dest="frame_N", required=True, help="comma-separated N values")
    p.add_argument("--delta", type=parse_number, default=None,
                   help="shared step size (default: smallest valid for K = 1)")
    p.add_argument("--last-layer-row", choices=["on", "off"], default="on")
    common(p, data=True)
    p.set_defaults(func=cmd_onebit)

    p = sub.add_parser("bounds", help="theoretical estimates vs measured errors")
    p.add_argument("--model", required=True)
    p.add_argument("--quantized", required=True)
    common(p, data=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("storage", help="bit accounting of a quantized model")
    p.add_argument("--quantized", required=True)
    common(p)
    p.set_defaults(func=cmd_storage)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConstraintViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
