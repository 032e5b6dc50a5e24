"""Command-line experiment runner.

Subcommands write CSV (``--out`` or stdout) plus, when writing to a file, a
small ``<out>.summary.json`` with run metadata and wall time. Timing lives
only in the summary so the CSV is byte-stable for a given seed.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from . import __version__
from .cellmodel import (FJ, US, PulseSpec, fit_cell_params, load_cell_model, model_from_fit,
                        model_to_dict, read_sweep_csv, store_cell_model, sweep_to_si)
from .energy import merge_reports
from .errors import ConvergenceError, SchemaError, XbarError
from .mapping import MappingKind, MappingScheme
from .mvmunit import (execute_mvm, prepare, request_from_dict, response_to_dict,
                      run_vectors)
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL
from .workload import (gen_synthetic_weights, gen_uniform_inputs, gen_validation_set, im2col,
                       load_layer_manifest)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
BUNDLED_CONFIGS = ("A", "B", "C", "D")


class ConfigError(Exception):
    pass


def data_path(name) -> Path:
    return Path(str(resources.files("xbar_energy") / "data" / name))


def resolve_cell_model(value):
    """A cell-model path, or the ID of a bundled configuration (A-D)."""
    p = Path(value)
    if not p.exists() and value.upper() in BUNDLED_CONFIGS:
        p = data_path(f"config-{value.upper()}.json")
    return load_cell_model(p)


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _scheme_list(text):
    kinds = []
    for t in text.split(","):
        t = t.strip().lower()
        if t not in ("bias", "diff"):
            raise argparse.ArgumentTypeError(f"scheme must be bias or diff, got {t!r}")
        kinds.append(MappingKind(t))
    return kinds


def fmt(x) -> str:
    return repr(float(x))


def _pmap(fn, items, threads):
    """Order-preserving map; ``threads`` only changes scheduling."""
    items = list(items)
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _emit(args, header, rows, summary):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if args.out:
        out = Path(args.out)
        out.write_text(buf.getvalue())
        summary_path = out.with_name(out.name + ".summary.json")
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(buf.getvalue())


def _check_common(args):
    for name, lo, hi in (("cell_bits", 1, 8), ("weight_bits", 1, 16), ("input_bits", 1, 16)):
        for v in getattr(args, name, None) or []:
            if not lo <= v <= hi:
                raise ConfigError(f"--{name.replace('_', '-')} values must be in [{lo}, {hi}]")
    if getattr(args, "rows", 1) < 1 or getattr(args, "cols", 1) < 1:
        raise ConfigError("--rows/--cols must be positive")
    if getattr(args, "threads", 1) < 1:
        raise ConfigError("--threads must be >= 1")
    if getattr(args, "max_iter", 1) < 1:
        raise ConfigError("--max-iter must be >= 1")
    if getattr(args, "tol", 1.0) <= 0:
        raise ConfigError("--tol must be positive")
    if getattr(args, "n", 1) < 1:
        raise ConfigError("--n must be >= 1")


def _single(args, name):
    values = getattr(args, name)
    if len(values) != 1:
        raise ConfigError(f"--{name.replace('_', '-')} takes a single value here")
    return values[0]


# -- calibrate ---------------------------------------------------------------

def cmd_calibrate(args):
    points = read_sweep_csv(args.sweep_csv)
    pulse = PulseSpec(args.t_pulse, args.t_active, args.t_rf, args.v_rb, args.v_rw)
    fit = fit_cell_params(sweep_to_si(points), pulse)
    g_us = [g for g, _ in points]
    model = model_from_fit(
        fit, pulse, args.name,
        g_min_us=args.g_min if args.g_min is not None else min(g_us),
        g_max_us=args.g_max if args.g_max is not None else max(g_us),
        r_wire_ohm=args.r_wire, c_bl_ff=args.c_bl, c_wl_ff=args.c_wl, c_sl_ff=args.c_sl)
    print(f"alpha        = {fit.alpha:.6g}")
    print(f"p_wl         = {fit.p_wl / 1e-6:.6g} uW")
    print(f"rms residual = {fit.rms_residual / FJ:.6g} fJ over {fit.n_points} points")
    print(f"g range      = [{model.g_min_us}, {model.g_max_us}] uS")
    if args.dry_run:
        print(json.dumps(model_to_dict(model), indent=2))
        return EXIT_OK
    if not args.out:
        raise ConfigError("--out is required unless --dry-run is given")
    store_cell_model(model, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


# -- validate ----------------------------------------------------------------

VALIDATE_HEADER = ["mvm", "seed", "sparsity", "active_bits", "e_total_fj", "e_bl_fj", "e_wl_fj",
                   "g_x_min_us", "g_x_mean_us", "g_x_max_us", "e_oracle_fj", "rel_err"]


def _rel_err(a, ref):
    if ref == 0:
        return 0.0 if a == 0 else float("inf")
    return abs(a - ref) / abs(ref)


def cmd_validate(args):
    _check_common(args)
    model = resolve_cell_model(args.cell_model)
    kind = _single(args, "scheme")
    wb, ib = _single(args, "weight_bits"), _single(args, "input_bits")
    cb = _single(args, "cell_bits") if args.cell_bits else wb
    vs = gen_validation_set(args.rows, args.cols, args.n, args.sparsity, args.seed,
                            weight_bits=wb, input_bits=ib)
    scheme = MappingScheme(kind, cb, wb, signed=False)
    mapped = prepare(vs.weights, scheme, model, (args.rows, args.cols))

    def work(k):
        v = vs.inputs[k:k + 1]
        _, (fast,) = run_vectors(mapped, v, ib, method="fast", tol=args.tol,
                                max_iter=args.max_iter)
        _, (orc,) = run_vectors(mapped, v, ib, method="oracle")
        return fast, orc

    t0 = time.perf_counter()
    results = _pmap(work, range(args.n), args.threads)
    wall = time.perf_counter() - t0

    rows = []
    for k, (fast, orc) in enumerate(results):
        main, ref = (orc, fast) if args.oracle else (fast, orc)
        gx = main.pulses["g_x"] / US
        rows.append([k, args.seed, fmt(vs.sparsity[k]), int(main.pulses["active"].sum()),
                     fmt(main.e_total / FJ), fmt(main.e_bl / FJ), fmt(main.e_wl / FJ),
                     fmt(gx.min()), fmt(gx.mean()), fmt(gx.max()),
                     fmt(orc.e_total / FJ), fmt(_rel_err(fast.e_total, orc.e_total))])
    fast_all = merge_reports(r[0] for r in results)
    orc_all = merge_reports(r[1] for r in results)
    main_all = orc_all if args.oracle else fast_all
    total_err = _rel_err(fast_all.e_total, orc_all.e_total)
    rows.append(["total", args.seed, "", int(main_all.pulses["active"].sum()),
                 fmt(main_all.e_total / FJ), fmt(main_all.e_bl / FJ), fmt(main_all.e_wl / FJ),
                 "", "", "", fmt(orc_all.e_total / FJ), fmt(total_err)])
    max_err = max(_rel_err(f.e_total, o.e_total) for f, o in results)
    _emit(args, VALIDATE_HEADER, rows, {
        "command": "validate", "cell_model": model.name, "n": args.n, "seed": args.seed,
        "rows": args.rows, "cols": args.cols, "sparsity": args.sparsity, "tol": args.tol,
        "fast_vs_oracle_total_rel_err": total_err, "fast_vs_oracle_max_rel_err": max_err,
        "wall_time_s": wall, "threads": args.threads, "version": __version__,
    })
    print(f"fast vs oracle: total rel err {total_err:.3e}, worst MVM {max_err:.3e}", file=sys.stderr)
    return EXIT_OK


# -- sweep-mappings ----------------------------------------------------------

def cmd_sweep_mappings(args):
    _check_common(args)
    model = resolve_cell_model(args.cell_model)
    wb, ib = _single(args, "weight_bits"), _single(args, "input_bits")
    combos = [(kind, cb, sigma) for kind in args.scheme for cb in args.cell_bits
              for sigma in args.sigma]
    for _, cb, _ in combos:
        if cb > wb:
            raise ConfigError("--cell-bits must not exceed --weight-bits")
    V = gen_uniform_inputs(args.n, args.rows, ib, seed=args.seed + 1)
    method = "oracle" if args.oracle else "fast"

    def work(combo):
        kind, cb, sigma = combo
        W = gen_synthetic_weights(args.rows, args.cols, sigma, wb, seed=args.seed)
        mapped = prepare(W, MappingScheme(kind, cb, wb), model, (args.rows, args.cols))
        _, reports = run_vectors(mapped, V, ib, method=method, tol=args.tol,
                                 max_iter=args.max_iter)
        total = merge_reports(reports)
        return total.e_total / total.mac_count

    t0 = time.perf_counter()
    e_mac = _pmap(work, combos, args.threads)
    wall = time.perf_counter() - t0
    rows = [[kind.value, cb, fmt(sigma), fmt(e / FJ)] for (kind, cb, sigma), e in zip(combos, e_mac)]
    _emit(args, ["scheme", "cell_bits", "sigma", "e_per_mac_fj"], rows, {
        "command": "sweep-mappings", "cell_model": model.name, "n": args.n, "seed": args.seed,
        "rows": args.rows, "cols": args.cols, "weight_bits": wb, "input_bits": ib,
        "wall_time_s": wall, "threads": args.threads, "version": __version__,
    })
    return EXIT_OK


# -- conv-bench --------------------------------------------------------------

def conv_layer_energy(layer, kind, cell_bits, model, tile_shape, method="fast",
                      tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """(report, outputs) for one convolution layer lowered with im2col."""
    W, V = im2col(layer.spec, layer.x, layer.w)
    scheme = MappingScheme(kind, cell_bits, layer.spec.weight_bits)
    mapped = prepare(W, scheme, model, tile_shape)
    out, reports = run_vectors(mapped, V, layer.spec.activation_bits, method=method, tol=tol,
                               max_iter=max_iter)
    return merge_reports(reports), out


def cmd_conv_bench(args):
    _check_common(args)
    model = resolve_cell_model(args.cell_model)
    manifest = Path(args.fixtures) if args.fixtures else data_path("fixtures/layers.json")
    layers = load_layer_manifest(manifest)
    combos = [(layer, kind, cb) for layer in layers for kind in args.scheme for cb in args.cell_bits]
    for layer, _, cb in combos:
        if cb > layer.spec.weight_bits:
            raise ConfigError(f"--cell-bits {cb} exceeds {layer.name}'s weight bits")
    method = "oracle" if args.oracle else "fast"

    def work(combo):
        layer, kind, cb = combo
        report, _ = conv_layer_energy(layer, kind, cb, model, (args.rows, args.cols), method,
                                      args.tol, args.max_iter)
        return report

    t0 = time.perf_counter()
    reports = _pmap(work, combos, args.threads)
    wall = time.perf_counter() - t0
    rows = []
    for (layer, kind, cb), rep in zip(combos, reports):
        macs = layer.spec.mac_count
        rows.append([layer.name, kind.value, cb, fmt(rep.e_total / macs / FJ), macs, rep.n_pulses])
    _emit(args, ["layer", "scheme", "cell_bits", "e_per_mac_fj", "mac_count", "pulses"], rows, {
        "command": "conv-bench", "cell_model": model.name, "fixtures": str(manifest),
        "wall_time_s": wall, "threads": args.threads, "version": __version__,
    })
    return EXIT_OK


# -- mvm (batch) -------------------------------------------------------------

def cmd_mvm(args):
    doc = json.loads(Path(args.requests).read_text())
    items = doc["requests"] if isinstance(doc, dict) else doc
    model = resolve_cell_model(args.cell_model) if args.cell_model else None
    reqs = [request_from_dict(d, model) for d in items]
    method = "oracle" if args.oracle else "fast"

    def work(req):
        out, rep = execute_mvm(req, method=method, tol=args.tol, max_iter=args.max_iter)
        return response_to_dict(out, rep, include_pulses=args.pulses)

    responses = _pmap(work, reqs, args.threads)
    text = json.dumps({"responses": responses}, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="xbar-energy",
                                description="Energy estimation of MVMs on 1T1R RRAM crossbars.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--oracle", action="store_true", help="use the direct nodal solver")
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help="relaxation tolerance (relative)")
        sp.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER,
                        help="relaxation sweep limit")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out", help="output path (default: stdout)")

    c = sub.add_parser("calibrate", help="fit alpha and P_WL from a g_us,e_fj sweep")
    c.add_argument("sweep_csv")
    c.add_argument("--name", default="cell")
    c.add_argument("--v-rb", type=float, default=0.2, help="BL read amplitude, V")
    c.add_argument("--v-rw", type=float, default=1.2, help="WL amplitude, V")
    c.add_argument("--t-pulse", type=float, default=10.0, help="pulse period, ns")
    c.add_argument("--t-active", type=float, default=4.0, help="active time, ns")
    c.add_argument("--t-rf", type=float, default=1.0, help="rise/fall time, ns")
    c.add_argument("--g-min", type=float, help="uS; default: smallest swept conductance")
    c.add_argument("--g-max", type=float, help="uS; default: largest swept conductance")
    c.add_argument("--r-wire", type=float, default=0.0, help="wire segment resistance, ohm")
    c.add_argument("--c-bl", type=float, default=0.0, help="fF, informational")
    c.add_argument("--c-wl", type=float, default=0.0, help="fF, informational")
    c.add_argument("--c-sl", type=float, default=0.0, help="fF, informational")
    c.add_argument("--out")
    c.add_argument("--dry-run", action="store_true", help="print the fit, write nothing")
    c.set_defaults(func=cmd_calibrate)

    v = sub.add_parser("validate", help="random MVMs, fast solver vs direct oracle")
    v.add_argument("--cell-model", default="D")
    v.add_argument("--scheme", type=_scheme_list, default=[MappingKind.BIAS])
    v.add_argument("--cell-bits", type=_int_list, default=None)
    v.add_argument("--weight-bits", type=_int_list, default=[8])
    v.add_argument("--input-bits", type=_int_list, default=[1])
    v.add_argument("--rows", type=int, default=64)
    v.add_argument("--cols", type=int, default=64)
    v.add_argument("--sparsity", type=_float_list, default=[0.0, 0.25, 0.5, 0.75, 1.0])
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--n", type=int, default=1000)
    solver_flags(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("sweep-mappings", help="energy per MAC vs weight spread and mapping")
    s.add_argument("--cell-model", default="C")
    s.add_argument("--scheme", type=_scheme_list,
                   default=[MappingKind.BIAS, MappingKind.DIFFERENTIAL])
    s.add_argument("--cell-bits", type=_int_list, default=[1, 2, 4, 8])
    s.add_argument("--weight-bits", type=_int_list, default=[8])
    s.add_argument("--input-bits", type=_int_list, default=[8])
    s.add_argument("--rows", type=int, default=64)
    s.add_argument("--cols", type=int, default=64)
    s.add_argument("--sigma", type=_float_list, default=[2.0**-k for k in range(6, -1, -1)])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=20, help="input vectors per point")
    solver_flags(s)
    s.set_defaults(func=cmd_sweep_mappings)

    b = sub.add_parser("conv-bench", help="energy per MAC of convolution layers")
    b.add_argument("--cell-model", default="C")
    b.add_argument("--fixtures", help="layer manifest JSON (default: bundled fixtures)")
    b.add_argument("--scheme", type=_scheme_list,
                   default=[MappingKind.BIAS, MappingKind.DIFFERENTIAL])
    b.add_argument("--cell-bits", type=_int_list, default=[4])
    b.add_argument("--rows", type=int, default=64)
    b.add_argument("--cols", type=int, default=64)
    solver_flags(b)
    b.set_defaults(func=cmd_conv_bench)

    m = sub.add_parser("mvm", help="execute a JSON batch of MVM requests")
    m.add_argument("requests", help="JSON file: a list of requests or {'requests': [...]}")
    m.add_argument("--cell-model", help="model for requests that do not embed one")
    m.add_argument("--pulses", action="store_true", help="include per-pulse records")
    solver_flags(m)
    m.set_defaults(func=cmd_mvm)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, SchemaError, XbarError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
