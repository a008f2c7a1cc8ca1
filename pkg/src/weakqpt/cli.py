"""Command-line front end.

    weakqpt reconstruct --config run.json [--strict]
    weakqpt sweep --config run.json --axis coupling --points 8e-3,4e-3,2e-3,1e-3
    weakqpt error-accum --config run.json --delta 1e-3 --trials 25 --dims 2,4
    weakqpt channels [--json]

Reports land in the directory named by the config's "output" key, else
$WEAKQPT_OUTPUT_DIR, else ./weakqpt-out. Run metadata (wall time, timestamp)
goes to a separate *.meta.json so the main reports are byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import strong, variants, weak
from .config import (
    SCHEMES,
    ConfigError,
    build_bases,
    build_channel,
    build_couplings,
    build_pointer,
    load_config,
)
from .numkit import ContractViolation, ShapeError
from .pointers import gaussian_pointer, qubit_pointer, tilted_qubit_pointer
from .process import CHANNEL_PARAMS, NAMED_BASES, ChiDistance
from .robustness import error_accumulation

OUTPUT_ENV = "WEAKQPT_OUTPUT_DIR"
EXIT_CONFIG = 2
EXIT_RUNTIME = 1
EXIT_STRICT = 3

ENTRY_COLUMNS = ["i1", "i2", "i3", "i4", "chi_re", "chi_im", "truth_re", "truth_im", "abs_err"]
SWEEP_COLUMNS = ["g", "lambda", "shots", "max_abs_err", "frob_err", "setup_count", "runtime_ms"]
ACCUM_COLUMNS = ["dim", "trial", "delta", "mean_abs_err", "max_abs_err"]


def j12(x: float):
    """Float rounded to 12 significant digits; NaN and inf become null."""
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def c9(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return f"{float(x):.9g}"


def output_dir(cfg: dict, override: str | None = None) -> Path:
    d = override or cfg.get("output") or os.environ.get(OUTPUT_ENV) or "weakqpt-out"
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ------------------------------------------------------------- execution --

def run_config(cfg: dict):
    """Dispatch one reconstruction according to the configured scheme."""
    scheme = cfg["scheme"]
    mode = cfg["mode"]
    shots = cfg.get("shots")
    seed = cfg["seed"]
    pu = build_pointer(cfg.get("pointer"))
    pv = build_pointer(cfg["pointer_v"]) if "pointer_v" in cfg else pu
    dims = cfg.get("dims")

    if scheme == "multi":
        if not dims or len(dims) < 1:
            raise ConfigError("field 'dims': the multi scheme needs per-particle dimensions")
        n = len(dims)
        ch = build_channel(cfg, d=int(np.prod(dims)))
        local = [build_bases(cfg, d, d) for d in dims]
        spec = variants.MultiPartiteSpec(tuple(local), tuple(build_couplings(cfg, n)), tuple([(pu, pv)] * n))
        return variants.reconstruct_multiparticle(ch, spec, mode, shots, seed, cfg["cap"])

    d_hint = dims[0] if dims else None
    ch = build_channel(cfg, d=d_hint)
    if dims:
        want = (dims[0], dims[-1])
        if (ch.d_in, ch.d_out) != want:
            raise ConfigError(f"field 'dims': channel acts on {ch.d_in}->{ch.d_out}, config says {want[0]}->{want[1]}")
    (g, lam), = build_couplings(cfg, 1)
    truth = cfg["ground_truth"]

    if scheme == "weak":
        bases = build_bases(cfg, ch.d_in, ch.d_out)
        return weak.reconstruct(ch, bases, pu, pv, g, lam, mode, shots, seed, with_truth=truth,
                                workers=cfg.get("workers"))
    if scheme == "strong":
        bases = build_bases(cfg, ch.d_in, ch.d_out)
        smode = "exact" if mode == "perturbative" else mode
        return strong.reconstruct_strong(ch, bases, pu, pv, g, lam, smode, shots, seed, with_truth=truth,
                                         workers=cfg.get("workers"))
    if scheme == "sigma-x":
        return variants.reconstruct_qubit_sigma_x(ch, pu, pv, g, lam, mode, shots, seed, cfg["r4_only"])
    if scheme == "ancilla":
        bases = build_bases(cfg, ch.d_in, ch.d_out) if cfg.get("bases") else variants.default_ancilla_bases(ch.d_in, ch.d_out)
        gamma = None
        if "gamma" in cfg:
            g_raw = np.asarray(cfg["gamma"], dtype=float)
            gamma = g_raw[..., 0] + 1j * g_raw[..., 1]
        anc = variants.ancilla_input(gamma, bases)
        return variants.reconstruct_ancilla(ch, anc, pu, pv, g, lam, mode, shots, seed)
    raise ConfigError(f"field 'scheme': unknown scheme {scheme!r}")


def report_dict(rep, cfg: dict) -> dict:
    chi = rep.chi_hat.chi
    out = {
        "scheme": rep.scheme,
        "mode": rep.mode,
        "coupling": _coupling_json(rep.coupling),
        "d_in": rep.chi_hat.d_in,
        "d_out": rep.chi_hat.d_out,
        "setup_count": rep.setup_count,
        "values_per_parameter": rep.values_per_parameter,
        "aux_experiments_per_parameter": rep.aux_experiments_per_parameter,
        "seed": cfg["seed"],
        "shots": cfg.get("shots"),
        "missing": [list(m) for m in rep.missing],
        "chi": [[[[[j12(v.real), j12(v.imag)] for v in row3] for row3 in row2] for row2 in row1] for row1 in chi],
    }
    if cfg["ground_truth"] and rep.truth_distance is not None:
        out["truth_distance"] = {
            "max_abs": j12(rep.truth_distance.max_abs),
            "frobenius": j12(rep.truth_distance.frobenius),
            "missing": rep.truth_distance.missing,
        }
    return out


def _coupling_json(c):
    if c and isinstance(c[0], tuple):
        return [[j12(a), j12(b)] for a, b in c]
    return [j12(c[0]), j12(c[1])]


def entry_rows(rep, with_truth: bool):
    chi = rep.chi_hat.chi
    tru = rep.truth.chi if (with_truth and rep.truth is not None) else None
    for idx in np.ndindex(chi.shape):
        v = chi[idx]
        row = list(idx) + [c9(v.real), c9(v.imag)]
        if tru is not None:
            t = tru[idx]
            row += [c9(t.real), c9(t.imag), c9(abs(v - t))]
        else:
            row += ["", "", ""]
        yield row


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_meta(path: Path, runtime_ms: float, extra: dict | None = None) -> None:
    meta = {"runtime_ms": round(runtime_ms, 3),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    meta.update(extra or {})
    write_json(path, meta)


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -------------------------------------------------------------- commands --

def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    rep = run_config(cfg)
    out = output_dir(cfg, args.output)
    write_json(out / "report.json", report_dict(rep, cfg))
    write_csv(out / "entries.csv", ENTRY_COLUMNS, entry_rows(rep, cfg["ground_truth"]))
    write_meta(out / "report.meta.json", rep.runtime_ms)
    line = f"{rep.scheme}/{rep.mode}: setups={rep.setup_count} values/param={rep.values_per_parameter}"
    if cfg["ground_truth"] and rep.truth_distance is not None:
        line += f" max_abs_err={rep.truth_distance.max_abs:.3e}"
    print(line)
    print(f"wrote {out / 'report.json'}")
    if rep.missing:
        print(f"{len(rep.missing)} entries flagged missing (post-selection starved)", file=sys.stderr)
        if args.strict:
            for m in rep.missing[:20]:
                print(f"  missing entry {tuple(m)}", file=sys.stderr)
            return EXIT_STRICT
    return 0


def parse_points(text: str, integer: bool = False) -> list:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--points: cannot parse {text!r}") from None
    if not vals:
        raise ConfigError("--points: empty list")
    return [int(round(v)) for v in vals] if integer else vals


def _fit_exponent(x, y) -> float | None:
    ok = [(a, b) for a, b in zip(x, y) if a > 0 and b is not None and b > 0 and math.isfinite(b)]
    if len(ok) < 2:
        return None
    xs, ys = zip(*ok)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    points = parse_points(args.points, integer=(args.axis == "shots"))
    rows, errs, total_ms = [], [], 0.0
    for pt in points:
        c = dict(cfg)
        if args.axis == "coupling":
            c["coupling"] = [pt, pt]
        else:
            c["mode"] = "sampled"
            c["shots"] = pt
        rep = run_config(c)
        total_ms += rep.runtime_ms
        dist = rep.truth_distance or ChiDistance(float("nan"), float("nan"))
        g, lam = (rep.coupling[0] if isinstance(rep.coupling[0], tuple) else rep.coupling)
        rows.append([c9(g), c9(lam), c.get("shots") if c["mode"] == "sampled" else "exact",
                     c9(dist.max_abs), c9(dist.frobenius), rep.setup_count, c9(rep.runtime_ms)])
        errs.append(dist.max_abs)
    out = output_dir(cfg, args.output)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    summary = {
        "axis": args.axis,
        "points": [j12(p) for p in points],
        "max_abs_err": [j12(e) for e in errs],
        "strictly_decreasing": bool(decreasing),
    }
    if args.axis == "shots":
        ex = _fit_exponent(points, errs)
        summary["fitted_exponent"] = j12(ex) if ex is not None else None
    else:
        ex = _fit_exponent(points, errs)
        summary["fitted_order"] = j12(ex) if ex is not None else None
    write_json(out / "sweep.summary.json", summary)
    write_meta(out / "sweep.meta.json", total_ms)
    for r in rows:
        print(",".join(str(x) for x in r))
    print(f"strictly decreasing: {decreasing}")
    return 0


def cmd_error_accum(args) -> int:
    cfg = load_config(args.config)
    if not 0 <= args.delta <= 1e-2:
        raise ConfigError("--delta must lie in [0, 1e-2]")
    if args.trials < 10:
        raise ConfigError("--trials must be at least 10")
    dims = parse_points(args.dims, integer=True)
    pu = build_pointer(cfg.get("pointer"))
    (g, lam), = build_couplings(cfg, 1)
    t0 = _dt.datetime.now()
    res = error_accumulation(lambda d: build_channel(cfg, d=d), dims, args.delta, args.trials, cfg["seed"], pu, g, lam)
    ms = (_dt.datetime.now() - t0).total_seconds() * 1e3
    rows = []
    for d, acc in res.per_dim.items():
        for t, (m, mx) in enumerate(zip(acc.trial_means, acc.trial_max)):
            rows.append([d, t, c9(args.delta), c9(m), c9(mx)])
    out = output_dir(cfg, args.output)
    write_csv(out / "error_accum.csv", ACCUM_COLUMNS, rows)
    summary = {
        "delta": j12(args.delta),
        "trials": args.trials,
        "per_dim": {str(d): {"mean_abs_over_delta": j12(a.mean_abs_over_delta),
                             "mean_max_over_delta": j12(a.mean_max_over_delta)} for d, a in res.per_dim.items()},
        "slope": j12(res.slope),
    }
    if len(res.per_dim) > 1 and args.delta > 0:
        summary["ratio_mean_abs"] = j12(res.ratio("mean_abs_over_delta"))
        summary["ratio_mean_max"] = j12(res.ratio("mean_max_over_delta"))
    write_json(out / "error_accum.json", summary)
    write_meta(out / "error_accum.meta.json", ms)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def channel_listing() -> dict:
    pointers = {}
    for name, spec in (("qubit", qubit_pointer()), ("gaussian", gaussian_pointer()),
                       ("tilted-qubit", tilted_qubit_pointer())):
        k = spec.constants
        pointers[name] = {
            "c1": [j12(k.c1.real), j12(k.c1.imag)],
            "c2": j12(k.c2),
            "r4_only_capable": abs(k.im_c1_sq) > 1e-9,
        }
    return {
        "channels": dict(sorted(CHANNEL_PARAMS.items())),
        "bases": sorted(NAMED_BASES),
        "pointers": pointers,
        "schemes": list(SCHEMES),
        "modes": ["exact", "perturbative", "sampled"],
    }


def cmd_channels(args) -> int:
    info = channel_listing()
    if args.json:
        print(json.dumps(info, indent=2, sort_keys=True))
        return 0
    print("channels:")
    for name, params in info["channels"].items():
        print(f"  {name:18s} {params}")
    print("bases:    " + ", ".join(info["bases"]))
    print("pointers:")
    for name, k in info["pointers"].items():
        note = "  (usable for r4-only extraction)" if k["r4_only_capable"] else ""
        print(f"  {name:13s} c1 = {k['c1'][0]:+.6g}{k['c1'][1]:+.6g}i  c2 = {k['c2']:.6g}{note}")
    print("schemes:  " + ", ".join(info["schemes"]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weakqpt", description="Weak-measurement process tomography simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="run one reconstruction from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="output directory (overrides config and environment)")
    p.add_argument("--strict", action="store_true", help="fail when any entry is flagged missing")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="sweep coupling strength or shot count")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=["coupling", "shots"], required=True)
    p.add_argument("--points", required=True, help="comma-separated values")
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("error-accum", help="misaligned-basis error experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--dims", default="2,4")
    p.add_argument("--output")
    p.set_defaults(func=cmd_error_accum)

    p = sub.add_parser("channels", help="list channels, bases, pointers and schemes")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_channels)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, ShapeError, ContractViolation) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
