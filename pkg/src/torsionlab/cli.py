"""Command-line front end: compute, sweep, verify, oracle."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load, parse_complex
from .geometry import GeometryError, ResourceError
from .reduce import resolve_threads
from .special import DomainError, dedekind_eta, kronecker_torsion, theta1_product, theta1_series
from .zeta import ConsistencyError

log = logging.getLogger("torsionlab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
ORACLES = ("eta", "theta1", "theta1-series", "kronecker")


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _need_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load(args.config)


def _threads(args, cfg: RunConfig | None = None) -> int:
    if args.threads is not None:
        return resolve_threads(args.threads)
    if cfg is not None and cfg.knobs.threads is not None:
        return resolve_threads(cfg.knobs.threads)
    return resolve_threads(None)


def cmd_compute(args) -> int:
    from .torsion import analytic_torsion
    cfg = _need_config(args)
    settings = cfg.knobs.heat_settings()
    for job in cfg.jobs:
        if job.command != "compute":
            continue
        spec = cfg.spec(job.spec)
        tv = analytic_torsion(spec, job.method, settings)
        doc = {"spec": job.spec, "torsion": tv.to_json_dict()}
        path = _write(args.out, job.output or f"{job.spec}.json", json.dumps(doc, indent=2) + "\n")
        print(f"{job.spec}: log_tau={tv.log_tau:.12g} err={tv.err:.3g} -> {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .torsion import (SuiteError, conjugation_family, flux_continuity, gauge_sweep,
                          metric_sweep, relative_metric_sweep, sweep_csv)
    cfg = _need_config(args)
    threads = _threads(args, cfg)
    settings = cfg.knobs.heat_settings()
    status = EXIT_OK
    for job in cfg.jobs:
        if job.command != "sweep":
            continue
        spec = cfg.spec(job.spec)
        tol = args.tolerance if args.tolerance is not None else job.tolerance
        samples = job.samples or list(np.linspace(-0.4, 0.4, 9))
        if job.sweep == "metric":
            path = cfg.path(job, spec)
            if job.relative:
                u1, u2 = job.relative
                v = relative_metric_sweep(spec, path, u1, u2, samples, tol, job.method, threads, settings)
            else:
                try:
                    v = metric_sweep(spec, path, samples, tol, job.method, threads, settings)
                except SuiteError as exc:
                    raise ConfigError(str(exc)) from exc
        elif job.sweep == "gauge":
            gen = np.array([[parse_complex(e) for e in row] for row in job.generator]) \
                if job.generator else np.zeros((1, 1))
            v = gauge_sweep(conjugation_family(spec, gen), samples, tol, job.method, threads,
                            job.spec, settings)
        elif job.sweep == "flux":
            v = None
            rep = flux_continuity(lambda e: _scaled_flux(cfg, job.spec, e), samples or (0.1, 0.05, 0.025),
                                  settings)
            rows = list(zip(rep.eps, rep.deviations, [0.0] * len(rep.eps)))
            from .torsion import Verdict
            v = Verdict("flux", job.spec, len(rows), max(rep.deviations), tol, rep.passed(), rows,
                        {"slope": rep.slope})
        else:
            raise ConfigError(f"unknown sweep kind {job.sweep!r}")
        stem = job.output or f"{job.spec}-{job.sweep}"
        _write(args.out, stem + ".csv", sweep_csv(v.rows))
        _write(args.out, stem + ".verdict.json", v.to_json() + "\n")
        print(f"{stem}: max_deviation={v.max_deviation:.3g} pass={v.passed}")
        if not v.passed:
            status = EXIT_NUMERIC
    return status


def _scaled_flux(cfg: RunConfig, name: str, eps: float):
    from .complexes import ComplexSpec, ConstantForm, SuperconnectionData, TwistedDeRham
    spec = cfg.spec(name)
    kind = spec.kind
    if isinstance(kind, TwistedDeRham):
        return ComplexSpec(TwistedDeRham(kind.flux.scaled(eps)), spec.geometry, spec.char, name)
    if isinstance(kind, SuperconnectionData):
        # only the positive-degree part is scaled; the 0-form part is kept
        comps = {k: (v if len(k) == 0 else eps * v) for k, v in kind.form.components.items()}
        form = ConstantForm(kind.form.n, comps, kind.form.parity)
        return ComplexSpec(SuperconnectionData(kind.r0, kind.r1, form), spec.geometry, spec.char, name)
    raise ConfigError("flux sweeps need a de Rham or superconnection complex")


def cmd_verify(args) -> int:
    from .suites import SUITES
    suites = []
    overrides = {}
    if args.config:
        cfg = load(args.config)
        for entry in cfg.suites:
            if isinstance(entry, dict):
                suites.append(entry["name"])
                if "expected" in entry:
                    overrides[entry["name"]] = float(entry["expected"])
            else:
                suites.append(entry)
    else:
        suites = list(SUITES)
    if not suites:
        log.warning("empty suite list: nothing to verify")
        print(json.dumps({"suites": [], "pass": True}))
        return EXIT_OK
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; known: {sorted(SUITES)}")
    results = []
    for name in suites:
        kwargs = {"expected": overrides[name]} if name in overrides else {}
        v = SUITES[name](**kwargs)
        results.append(v.to_json_dict())
        print(f"{name}: pass={v.passed} max_deviation={v.max_deviation:.3g}", file=sys.stderr)
    summary = {"suites": results, "pass": all(r["pass"] for r in results),
               "failed": [r["suite"] for r in results if not r["pass"]]}
    _write(args.out, "verify.json", json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK if summary["pass"] else EXIT_NUMERIC


def cmd_oracle(args) -> int:
    name = args.formula
    if name not in ORACLES:
        print(f"unknown formula {name!r}; known: {', '.join(ORACLES)}", file=sys.stderr)
        return EXIT_CONFIG
    tau = _parse_cli_complex(args.tau)
    if name == "eta":
        val = dedekind_eta(tau)
    elif name == "theta1":
        val = theta1_product(_parse_cli_complex(args.w), tau)
    elif name == "theta1-series":
        val = theta1_series(_parse_cli_complex(args.w), tau)
    else:
        val = kronecker_torsion(args.u, args.v, tau)
    print(_fmt12(val))
    return EXIT_OK


def _fmt12(z) -> str:
    z = complex(z)
    if abs(z.imag) <= 1e-15 * max(1.0, abs(z.real)):
        return format(z.real, ".12g")
    return f"{z.real:.12g}{z.imag:+.12g}i"


def _parse_cli_complex(text: str) -> complex:
    try:
        return complex(text.replace("i", "j").replace(" ", ""))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $TORSIONLAB_THREADS or 1)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--tolerance", type=float, default=None, help="override job tolerances")
    p = argparse.ArgumentParser(prog="torsionlab", parents=[common],
                                description="Analytic torsion of graded complexes on flat tori.")
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("compute", parents=[common], help="torsion for each compute job")
    sub.add_parser("sweep", parents=[common], help="metric, gauge or flux sweeps")
    sub.add_parser("verify", parents=[common], help="run registered verification suites")
    o = sub.add_parser("oracle", parents=[common], help="closed-form values")
    o.add_argument("formula", help=f"one of {', '.join(ORACLES)}")
    o.add_argument("--tau", default="0+1i")
    o.add_argument("--w", default="0.5")
    o.add_argument("--u", type=float, default=0.5)
    o.add_argument("--v", type=float, default=0.0)
    return p


COMMANDS = {"compute": cmd_compute, "sweep": cmd_sweep, "verify": cmd_verify, "oracle": cmd_oracle}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, GeometryError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConsistencyError, ResourceError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
