"""``symstab`` command line: thin wrapper that prints experiment rows as CSV or JSON.

Exit codes: 0 success, 1 a validation check failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import experiments as ex
from .noise import (
    functional_F,
    second_derivative_at_zero,
    stability_mc,
    stability_series,
)
from .sets import _PolarSet, cross_moment, defect_vector, parse_set
from .variation import NormalPerturbation, second_variation_F, second_variation_noise

COLUMNS = ("label", "quantity", "value", "provenance", "error", "status", "inputs")
COMMANDS = ("counterexample", "phase-scan", "asymptotics", "optimize-1d",
            "stability", "functional", "variation", "validate")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    try:
        return format(float(v), ".17g")
    except (TypeError, ValueError):
        return str(v)


def _plain(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    try:
        f = float(v)
    except (TypeError, ValueError):
        return str(v)
    return f if math.isfinite(f) else str(f)


def render(rows, fmt: str) -> str:
    if fmt == "json":
        payload = [{
            "label": r.label, "quantity": r.quantity, "value": _plain(r.value),
            "provenance": r.provenance, "error": _plain(r.error), "status": r.status,
            "inputs": {k: _plain(v) for k, v in r.inputs.items()},
        } for r in rows]
        return json.dumps(payload, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        inputs = ";".join(f"{k}={_fmt(v)}" for k, v in r.inputs.items())
        w.writerow([r.label, r.quantity, _fmt(r.value), r.provenance, _fmt(r.error), r.status, inputs])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symstab", description="Noise stability of symmetric Gaussian sets.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--dim", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--measure", type=float)
    p.add_argument("--measure-b", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--degree", type=int, default=20)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int)
    p.add_argument("--set", action="append", default=[], dest="sets",
                   help="set description; give twice for a pair (A then B)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    p.add_argument("--out")
    p.add_argument("--tol", type=float)
    return p


def config_from_args(args) -> ex.ExperimentConfig:
    return ex.ExperimentConfig(
        command=args.command, dim=args.dim, radius=args.radius, measure=args.measure,
        measure_b=args.measure_b, rho=args.rho, degree=args.degree, samples=args.samples,
        seed=args.seed, grid=args.grid, sets=tuple(args.sets), fmt=args.fmt, out=args.out,
        tol=args.tol,
    )


def _stability_rows(cfg):
    if not cfg.sets or cfg.rho is None:
        raise ValueError("stability needs --set (once or twice) and --rho")
    A = parse_set(cfg.sets[0])
    B = parse_set(cfg.sets[1]) if len(cfg.sets) > 1 else A
    inputs = {"A": A.label(), "B": B.label(), "rho": cfg.rho}
    s = stability_series(A, B, cfg.rho, cfg.degree)
    m = stability_mc(A, B, cfg.rho, cfg.samples, cfg.seed)
    return [
        ex.ResultRow("stability", "series", s.value, "series", s.tail_bound,
                     inputs={**inputs, "degree": cfg.degree}),
        ex.ResultRow("stability", "montecarlo", m.value, "montecarlo", m.std_error,
                     inputs={**inputs, "samples": cfg.samples, "seed": cfg.seed}),
    ]


def _functional_rows(cfg):
    if not cfg.sets:
        raise ValueError("functional needs --set")
    A = parse_set(cfg.sets[0])
    prov = "quadrature" if isinstance(A, _PolarSet) else "closed_form"
    inputs = {"set": A.label()}
    rows = [ex.ResultRow("functional", "measure", A.measure(), prov, inputs=inputs)]
    for i, d in enumerate(defect_vector(A)):
        rows.append(ex.ResultRow("functional", f"defect_{i + 1}", float(d), prov))
    for i in range(A.dim):
        for j in range(i + 1, A.dim):
            rows.append(ex.ResultRow("functional", f"cross_{i + 1}{j + 1}", cross_moment(A, i, j), prov))
    rows.append(ex.ResultRow("functional", "F", functional_F(A), prov))
    rows.append(ex.ResultRow("functional", "second_derivative_at_zero", second_derivative_at_zero(A), prov))
    return rows


def _variation_rows(cfg):
    if cfg.dim is None or cfg.radius is None:
        raise ValueError("variation needs --dim and --radius")
    if cfg.dim < 2 or cfg.radius <= 0:
        raise ValueError("variation needs --dim >= 2 and --radius > 0")
    f = NormalPerturbation.g1(cfg.dim, cfg.radius)
    rep = second_variation_F(f)
    inputs = {"n": cfg.dim, "r": cfg.radius}
    prov = "quadrature" if cfg.dim <= 3 else "closed_form"
    rows = [
        ex.ResultRow("variation", "F_second_variation", rep.second_variation, prov, inputs=inputs),
        ex.ResultRow("variation", "closed_form_bound", rep.closed_form_bound, "closed_form"),
        ex.ResultRow("variation", "phase", rep.phase, "closed_form"),
    ]
    if cfg.rho is not None:
        if cfg.dim > 3:
            raise ValueError("noise variation needs --dim 2 or 3")
        nrep = second_variation_noise(f, cfg.rho)
        rows += [
            ex.ResultRow("variation", "noise_second_variation", nrep.second_variation, "quadrature",
                         nrep.quadrature_error, inputs={**inputs, "rho": cfg.rho}),
            ex.ResultRow("variation", "noise_limit_reference", nrep.reference, "quadrature"),
        ]
        if nrep.calibration_constant is not None:
            rows.append(ex.ResultRow("variation", "calibration_constant", nrep.calibration_constant,
                                     "quadrature"))
    return rows


def run(cfg: ex.ExperimentConfig):
    c = cfg.command
    if c == "counterexample":
        return ex.cmd_counterexample()
    if c == "phase-scan":
        ns = [cfg.dim] if cfg.dim else [2, 3, 4, 5]
        rs = [cfg.radius] if cfg.radius is not None else [round(0.5 + 0.1 * k, 10) for k in range(26)]
        if any(r <= 0 for r in rs) or any(n < 2 for n in ns):
            raise ValueError("phase-scan needs --dim >= 2 and --radius > 0")
        return ex.cmd_phase_scan(ns, rs)
    if c == "asymptotics":
        ns = [cfg.dim] if cfg.dim else [10, 100, 1000, 10000]
        return ex.cmd_asymptotics([-1.0, 0.0, 1.0], ns)
    if c == "optimize-1d":
        if cfg.measure is None or cfg.rho is None:
            raise ValueError("optimize-1d needs --measure and --rho")
        b = cfg.measure_b if cfg.measure_b is not None else cfg.measure
        return ex.cmd_optimize_1d(cfg.measure, b, cfg.rho, cfg.grid or 20)
    if c == "stability":
        return _stability_rows(cfg)
    if c == "functional":
        return _functional_rows(cfg)
    if c == "variation":
        return _variation_rows(cfg)
    return ex.cmd_validate(cfg.seed, cfg.samples, cfg.tol)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        rows = run(cfg)
    except (ValueError, TypeError, OSError, NotImplementedError) as exc:
        print(f"symstab: error: {exc}", file=sys.stderr)
        return 2
    text = render(rows, cfg.fmt)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 1 if any(r.status == "fail" for r in rows) else 0


if __name__ == "__main__":
    sys.exit(main())
