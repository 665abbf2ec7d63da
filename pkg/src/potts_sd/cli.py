"""Command-line front door.

Subcommands: eval | series | lattice | bethe | verify | critical.
JSON is the machine format (exact rationals as decimal strings inside the
series payloads); CSV is a lossy convenience view.  Exit codes: 0 success,
1 domain/config error, 2 identity-check failure, 3 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import __version__, bethe, closedform, lattice, relations
from .bundle import LogSeries
from .errors import ConvergenceError, DomainError
from .params import SpectralParams, couplings
from .qseries import TruncatedSeries

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IDENTITY = 2
EXIT_CONVERGENCE = 3


def _effective_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "config") and v is not None}
    cfg["version"] = __version__
    return cfg


def _emit(payload: dict, args) -> None:
    payload["config"] = _effective_config(args)
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    fmt = getattr(args, "format", "json") or "json"
    if fmt == "json":
        text = json.dumps(payload, indent=2, default=str)
    else:
        text = _to_csv(payload)
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _to_csv(payload: dict) -> str:
    rows = payload.get("rows")
    if not rows:
        return "key,value\n" + "\n".join(f"{k},{v}" for k, v in payload.items() if k != "config")
    cols = sorted({k for r in rows for k in r})
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(_csv_cell(r.get(c, "")) for c in cols))
    return "\n".join(lines)


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _series_payload(s) -> dict:
    if isinstance(s, LogSeries):
        return {"logq_coeff": str(s.logq_coeff), "series": s.series.to_json_dict()}
    if isinstance(s, TruncatedSeries):
        return s.to_json_dict()
    return s


def _points(args):
    qs = args.q if args.q else [0.2]
    ss = args.s if args.s else [1.0]
    ufracs = args.u_frac if args.u_frac else []
    pts = []
    for q in qs:
        if ufracs:
            for f in ufracs:
                lam = -math.log(q) / 2
                pts.append(SpectralParams(q, math.exp(-2 * f * lam)))
        else:
            for s in ss:
                pts.append(SpectralParams.from_q_s(q, s))
    return pts


def cmd_eval(args) -> int:
    if args.ring != "f64":
        raise DomainError(
            "eval computes in f64; use `series`/`lattice` for the exact rings "
            "and `critical --precision-bits` for high precision"
        )
    routes = (args.route or "closedform").split(",")
    rows = []
    pool = ThreadPoolExecutor(max_workers=args.threads)

    def one(sp):
        row = {"q": sp.q, "w": sp.w, "s": sp.s, "u_over_lam": sp.u / sp.lam, "physical": sp.physical}
        for route in routes:
            if route == "closedform":
                b = closedform.free_energies(sp)
                row.update({"f_b": b.f_b, "f_s": b.f_s, "f_sp": b.f_sp, "f_c": b.f_c})
            elif route == "bethe":
                N = args.N or 10
                br = bethe.solve(N, sp.q, sp.w)
                lam2, _ = bethe.eigenvalue(br, sp.q, sp.w)
                cp = couplings(sp)
                fb = closedform.f_bulk(sp)
                row["f_s_bethe_N%d" % N] = (
                    -N * fb - (N / 2) * math.log(cp.Q) + N * math.log(cp.x) - math.log(lam2.real)
                )
                row["bethe_residual"] = br.residual
            else:
                raise DomainError(f"unknown route {route!r}")
        return row

    rows = list(pool.map(one, _points(args)))
    _emit({"command": "eval", "rows": rows}, args)
    return EXIT_OK


def cmd_series(args) -> int:
    order = args.order or 16
    bundle = closedform.series_bundle(order)
    rows = []
    for d in range(0, order + 1):
        row = {"tdeg": d}
        for name, s in (("f_b", bundle.f_b.series), ("f_s", bundle.f_s), ("f_sp", bundle.f_sp), ("f_c", bundle.f_c)):
            c = s.coeff(d)
            if not c.is_zero():
                row[name] = repr(c)
        if len(row) > 1:
            rows.append(row)
    payload = {
        "command": "series",
        "order": order,
        "f_b": _series_payload(bundle.f_b),
        "f_s": _series_payload(bundle.f_s),
        "f_sp": _series_payload(bundle.f_sp),
        "f_c": _series_payload(bundle.f_c),
        "f_c_s_free": bundle.f_c.s_free(),
        "rows": rows,
    }
    _emit(payload, args)
    return EXIT_OK


def cmd_lattice(args) -> int:
    order = args.order or 8
    if args.extract:
        bound = lattice.stabilization_bound(order)
        sizes = [(bound, bound), (bound, bound + 1), (bound + 1, bound + 1), (bound + 2, bound + 1)]
        pool = ThreadPoolExecutor(max_workers=args.threads)
        series = list(pool.map(lambda mn: lattice.series_logZ(lattice.LatticeSpec(*mn), order), sizes))
        table = dict(zip(sizes, series))
        table[(bound + 1, bound)] = table[(bound, bound + 1)].subst_s_inv()
        bundle = lattice.extract_free_energies(table, order)
        payload = {
            "command": "lattice",
            "order": order,
            "sizes": sorted(table),
            "f_b": _series_payload(bundle.f_b),
            "f_s": _series_payload(bundle.f_s),
            "f_sp": _series_payload(bundle.f_sp),
            "f_c": _series_payload(bundle.f_c),
            "matches_closed_form": {
                "f_b": bundle.f_b == closedform.f_bulk_series(order),
                "f_s": bundle.f_s == closedform.f_surface_v_series(order),
                "f_sp": bundle.f_sp == closedform.f_surface_h_series(order),
                "f_c": bundle.f_c == closedform.f_corner_series(order),
            },
        }
        _emit(payload, args)
        return EXIT_OK
    M = args.M or 3
    N = args.N or 3
    spec = lattice.LatticeSpec(M, N)
    t0 = time.time()
    s = lattice.series_logZ(spec, order)
    _emit(
        {
            "command": "lattice",
            "M": M,
            "N": N,
            "ring": "series",
            "order": order,
            "log_q^MN_Z": s.to_json_dict(),
            "seconds": round(time.time() - t0, 3),
        },
        args,
    )
    return EXIT_OK


def cmd_bethe(args) -> int:
    q = (args.q or [0.2])[0]
    s = (args.s or [1.0])[0]
    N = args.N or 8
    sp = SpectralParams.from_q_s(q, s)
    br = bethe.solve(N, sp.q, sp.w)
    lam2, lam2b = bethe.eigenvalue(br, sp.q, sp.w)
    payload = {
        "command": "bethe",
        "roots": bethe.roots_to_json(br),
        "eigenvalue_product_form": [lam2.real, lam2.imag],
        "eigenvalue_r_form": [lam2b.real, lam2b.imag],
    }
    if args.convergence:
        tab = bethe.surface_convergence(N, sp.q, sp.w)
        payload["surface_convergence"] = {
            "rows": [{"N": r.N, "f_s_N": r.f_s_N, "deviation": r.deviation} for r in tab.rows],
            "f_s_closed": tab.f_s_closed,
            "decay_rate": tab.decay_rate,
            "extrapolated": tab.extrapolated,
        }
    _emit(payload, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    order = args.order or 20
    reports = relations.run_default_suite(order=order)
    reports.append(relations.verify_fc_constant(min(order, 12)))
    rows = [r.to_json_dict() for r in reports]
    all_pass = all(r.passed for r in reports)
    _emit({"command": "verify", "all_passed": all_pass, "rows": rows}, args)
    if not all_pass:
        return EXIT_IDENTITY
    return EXIT_OK


def cmd_critical(args) -> int:
    eps = args.eps or 0.02
    fc, ratio = closedform.fc_asymptote(eps)
    payload = {
        "command": "critical",
        "eps": eps,
        "f_c": fc,
        "asymptote": -math.pi / (8 * eps),
        "ratio": ratio,
        "conjugate_modulus": closedform.conjugate_modulus_report(max(eps, 0.5), prec_bits=args.precision_bits or 256),
    }
    slope, expected = closedform.singular_decay_fit()
    payload["surface_decay_slope"] = {"fitted": slope, "expected": expected}
    _emit(payload, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="potts-sd", description=__doc__)
    p.add_argument("--config", help="JSON config file; flags override its entries")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--q", type=float, nargs="*")
        sp.add_argument("--s", type=float, nargs="*")
        sp.add_argument("--u-frac", dest="u_frac", type=float, nargs="*")
        sp.add_argument("--Q", type=float)
        sp.add_argument("--N", type=int)
        sp.add_argument("--M", type=int)
        sp.add_argument("--order", type=int)
        sp.add_argument("--ring", choices=["f64", "hp", "rational", "series"], default="f64")
        sp.add_argument("--precision-bits", dest="precision_bits", type=int)
        sp.add_argument(
            "--threads",
            type=int,
            default=int(os.environ.get("POTTS_SD_THREADS", "4")),
        )
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=["json", "csv"], default="json")

    for name, fn in (
        ("eval", cmd_eval),
        ("series", cmd_series),
        ("lattice", cmd_lattice),
        ("bethe", cmd_bethe),
        ("verify", cmd_verify),
        ("critical", cmd_critical),
    ):
        sp = sub.add_parser(name)
        common(sp)
        sp.set_defaults(func=fn)
    sub.choices["eval"].add_argument("--route", help="comma list: closedform,bethe")
    sub.choices["lattice"].add_argument("--extract", action="store_true")
    sub.choices["bethe"].add_argument("--convergence", action="store_true")
    sub.choices["verify"].add_argument("--grid", default="default")
    sub.choices["critical"].add_argument("--eps", type=float)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_DOMAIN
        for k, v in conf.items():
            k = k.replace("-", "_")
            if getattr(args, k, None) in (None, parser.get_default(k)):
                setattr(args, k, v)
    try:
        return args.func(args)
    except DomainError as e:
        print(f"domain error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as e:
        print(f"convergence error: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
