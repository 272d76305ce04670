"""Command line front end: ``domsplit run|validate|schema``.

Exit status: 0 on success, 2 when a command's ``require`` verdict is not met,
1 on configuration or numerical errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .certifier import (certify, classify, fit_certificate, gap_profile, reconstruct_splitting, sample_points,
                        verify_domination)
from .errors import ConfigError, DomsplitError
from .lyapunov import gelfand_profile, semicontinuity_probe, spectrum_estimate, uniform_convergence_profile
from .periodic_data import scan_narrowness
from .sft import close_orbit, enumerate_periodic, minimal_rotation

OUTPUT_ENV = "DOMSPLIT_OUTPUT_DIR"
THREADS_ENV = "DOMSPLIT_THREADS"


def fmt(v):
    """12 significant digits; infinities and NaN as strings."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.12g}")
    if isinstance(v, dict):
        return {str(k): fmt(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [fmt(x) for x in v]
    return v


def _csv_cell(v):
    v = fmt(v)
    return v if isinstance(v, str) else repr(v) if isinstance(v, float) else str(v)


def _word(w) -> str:
    return "".join(map(str, w))


def _witness(p, n):
    out = {"point": str(p), "n": n}
    if p.is_periodic:
        out["orbit"] = _word(minimal_rotation(p.window(0, p.period)))
    return out


class Run:
    """Executes the analysis commands of one configuration against one output directory."""

    def __init__(self, cfg: dict, outdir: Path):
        self.cfg = cfg
        self.seed = int(cfg["seed"])
        self.outdir = outdir
        self.sys = cfgmod.build_system(cfg["system"])
        self.spec = cfgmod.build_cocycle(cfg["cocycle"], self.sys)
        self.csv = {}
        self.unmet = []

    def series(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_csv_cell(c) for c in r])
        self.csv[name] = buf.getvalue()
        return name

    def require(self, cmd, got):
        want = cmd.get("require")
        if want is not None and want != got:
            self.unmet.append(f"{cmd['command']}: required {want}, got {got}")

    def point(self, obj):
        return cfgmod.build_point(obj, self.sys)

    # commands -------------------------------------------------------------
    def enumerate_periodic(self, c):
        rows, counts = [], {}
        for n in range(1, c["N"] + 1):
            orbs = enumerate_periodic(self.sys, n)
            counts[str(n)] = len(orbs)
            rows += [(n, _word(o.word)) for o in orbs]
        return {"fixed_point_counts": counts, "csv": [self.series("enumerate_periodic.csv", ["n", "word"], rows)]}

    def periodic_data(self, c):
        k = c.get("k", 1)
        rep = scan_narrowness(self.spec, self.sys, k, c["N"], c.get("tol_const", 1e-8))
        rows = [(_word(dt.orbit.word), dt.period, i + 1, e) for dt in rep.data for i, e in enumerate(dt.exponents)]
        fixed = {str(n): [_word(o.word) for o in enumerate_periodic(self.sys, n)] for n in range(1, c["N"] + 1)}
        self.require(c, "constant" if rep.constant_data else "narrow" if rep.viable else "not_narrow")
        return {"k": k, "N": c["N"], "lambda_hat": rep.lambda_hat, "delta_hat": rep.delta_hat,
                "constant_data": rep.constant_data, "viable": rep.viable, "advisory": rep.advisory,
                "orbit_count": rep.orbit_count, "excluded_orbits": rep.excluded,
                "offenders": [{"deviation": d, "orbit": _word(w), "index": i} for d, w, i in rep.offenders],
                "fixed_points": fixed, "fixed_point_counts": {n: len(v) for n, v in fixed.items()},
                "csv": [self.series("periodic_data.csv", ["word", "period", "i", "exponent"], rows)]}

    def gelfand_profile(self, c):
        x = self.point(c["point"])
        prof = gelfand_profile(self.spec, x, c.get("q_max"), c.get("n_max", 60))
        return {"point": str(x), "q_max": prof.q_max, "n_max": prof.n_max,
                "final_log_c": prof.log_c[:, -1],
                "csv": [self.series("gelfand_profile.csv", ["n", "q", "value"], prof.rows())]}

    def spectrum(self, c):
        sp = spectrum_estimate(self.spec, None, c.get("q_max"), c.get("n", 200), self.seed,
                               c.get("sample_count", 8), c.get("tol_group"))
        rows = [(q + 1, sp.l[q], sp.zeta[q]) for q in range(len(sp.l))]
        return {"l": sp.l, "zeta": sp.zeta, "multiplicities": sp.multiplicities, "kappa": sp.kappa,
                "n": sp.n, "sample_count": sp.sample_count, "tol_group": sp.tol_group, "notes": sp.notes,
                "csv": [self.series("spectrum.csv", ["q", "l", "zeta"], rows)]}

    def certify(self, c):
        k = c["k"]
        n_min, n_max = c.get("n_min", 10), c.get("n_max", 60)
        pts = sample_points(self.sys, c.get("N", 8), c.get("random_count", 20), self.seed)
        profiles = [gap_profile(self.spec, x, k, n_max) for x in pts]
        fit_kw = {key: c[key] for key in ("tau_accept", "res_accept", "slope_reject", "slope_tol") if key in c}
        cert = fit_certificate(profiles, n_min, n_max, **fit_kw)
        env = np.array([p.log_ratio for p in profiles]).max(axis=0)
        bg = np.array([p.log_ratio_bg for p in profiles]).max(axis=0)
        out = {"k": k, "verdict": cert.verdict, "C_fit": cert.C_fit, "tau_fit": cert.tau_fit,
               "residual": cert.residual, "slope": cert.slope, "bg_slope": cert.bg_slope,
               "n_range": list(cert.n_range), "sample_count": len(pts), "note": cert.note,
               "witnesses": [_witness(p, n) for p, n in cert.witnesses]}
        vs = c.get("verify_samples", 0)
        if cert.certified and vs and self.spec.norm_context.is_euclidean:
            rng = np.random.default_rng(self.seed)
            samples = [reconstruct_splitting(self.spec, self.sys.random_point(rng), k) for _ in range(vs)]
            rep = verify_domination(self.spec, samples, None, cert.tau_fit, c.get("n_check", 40), seed=self.seed)
            out["verification"] = {"pass_rate": rep.pass_rate, "worst_margin": rep.worst_margin, "C": rep.C,
                                   "tau": rep.tau, "equivariance_angle": rep.equivariance_angle,
                                   "passed": rep.passed}
        self.require(c, cert.verdict)
        rows = [(n, env[n], bg[n]) for n in range(n_max + 1)]
        out["csv"] = [self.series(f"certify_k{k}.csv", ["n", "log_ratio", "log_ratio_bg"], rows)]
        return out

    def classify(self, c):
        d = self.spec.dimension
        indices = c.get("indices", list(range(1, d)))
        N = c.get("N", 8)
        nar = scan_narrowness(self.spec, self.sys, max(1, d - 1), N)
        certs = {}
        if self.spec.injective:
            pts = sample_points(self.sys, N, c.get("random_count", 20), self.seed)
            certs = {k: certify(self.spec, self.sys, k, points=pts) for k in indices}
        kw = {key: c[key] for key in ("sample_count", "eps", "zero_tol", "n_check", "n_center", "depth") if key in c}
        cl = classify(self.spec, self.sys, nar, certs, seed=self.seed, **kw)
        self.require(c, cl.kind)
        return {"classification": cl.label(), "kind": cl.kind, "indices": list(cl.indices),
                "dominated_indices": list(cl.dominated_indices), "exponents": cl.exponents,
                "zero_tol": cl.zero_tol, "checks": cl.checks,
                "certificates": {str(k): {"verdict": v.verdict, "tau_fit": v.tau_fit} for k, v in certs.items()},
                "csv": []}

    def shadow(self, c):
        x = self.point(c["point"])
        rows, out = [], []
        for n in c["n"]:
            orbit, j, rep = close_orbit(self.sys, x, n)
            out.append({"n": n, "orbit": _word(orbit.word), "connector_length": j, "verified": rep.verified,
                        "return_distance": rep.return_distance, "worst_ratio": rep.worst_ratio})
            rows += [(n, i, dist, bound) for i, dist, bound in rep.rows]
        self.require(c, "verified" if all(o["verified"] for o in out) else "failed")
        return {"point": str(x), "closing_constants": list(self.sys.closing_constants), "orbits": out,
                "csv": [self.series("shadow.csv", ["n", "i", "distance", "bound"], rows)]}

    def semicontinuity(self, c):
        x = self.point(c["point"])
        rep = semicontinuity_probe(self.spec, self.sys, x, c.get("q", 1), c["periods"])
        rows = list(zip(rep.periods, rep.values, rep.one_period_values))
        return {"point": str(x), "q": rep.q, "orbits": [_word(o.word) for o in rep.orbits], "values": rep.values,
                "one_period_values": rep.one_period_values, "reference": rep.reference,
                "reference_kind": rep.reference_kind, "gap": rep.gap, "closing_verified": rep.closing_verified,
                "csv": [self.series("semicontinuity.csv", ["period", "value", "one_period_value"], rows)]}

    def uniform_convergence(self, c):
        prof = uniform_convergence_profile(self.spec, self.sys, c["k"], c["n_list"], c.get("sample_count", 100),
                                           self.seed, N=c.get("N", 8))
        self.require(c, "convergent" if prof.convergent else "non_convergent")
        return {"k": prof.k, "lambda_hat": prof.lambda_hat, "rows": [list(r) for r in prof.rows],
                "convergent": prof.convergent, "advisory": prof.advisory,
                "csv": [self.series("uniform_convergence.csv", ["n", "q", "e_n"], prof.csv_rows())]}

    def execute(self):
        results = []
        for c in self.cfg["analysis"]["commands"]:
            res = getattr(self, c["command"].replace("-", "_"))(c)
            results.append({"command": c["command"], **res})
        return results


def resolve_outdir(cfg: dict, config_path: Path) -> Path:
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    if "output_dir" in cfg:
        p = Path(cfg["output_dir"])
        return p if p.is_absolute() else config_path.parent / p
    return config_path.parent / (config_path.stem + "_out")


def emit_report(results, cfg: dict, raw: bytes, run: Run, outdir: Path) -> Path:
    report = {"format": "domsplit-report", "report_version": 1, "library_version": __version__,
              "config_sha256": hashlib.sha256(raw).hexdigest(), "seed": int(cfg["seed"]),
              "results": results}
    text = json.dumps(fmt(report), sort_keys=True, indent=2, allow_nan=False) + "\n"
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        for name, body in sorted(run.csv.items()):
            (outdir / name).write_text(body)
        path = outdir / "report.json"
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write output: {exc.strerror}", str(outdir)) from None
    return path


def _thread_limit():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return None
    try:
        n = int(n)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(n)


def cmd_run(args) -> int:
    path = Path(args.config)
    cfg, raw = cfgmod.load(path)
    limit = _thread_limit()
    try:
        run = Run(cfg, Path(args.output) if args.output else resolve_outdir(cfg, path))
        results = run.execute()
        report = emit_report(results, cfg, raw, run, run.outdir)
    finally:
        if limit is not None:
            limit.unregister()
    print(report)
    for msg in run.unmet:
        print(f"requirement not met: {msg}", file=sys.stderr)
    return 2 if run.unmet else 0


def cmd_validate(args) -> int:
    cfg, _ = cfgmod.load(Path(args.config))
    sysm = cfgmod.build_system(cfg["system"])
    cfgmod.build_cocycle(cfg["cocycle"], sysm)
    print("ok")
    return 0


def cmd_schema(args) -> int:
    print(json.dumps({"config": cfgmod.CONFIG_SCHEMA, "report": cfgmod.REPORT_SCHEMA}, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="domsplit", description="Dominated splittings of linear cocycles over SFTs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="execute a configuration and write report.json plus CSV series")
    r.add_argument("config")
    r.add_argument("-o", "--output", help=f"output directory (overrides {OUTPUT_ENV}, which overrides the config)")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("schema", help="print the configuration and report schemas")
    s.set_defaults(func=cmd_schema)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DomsplitError as exc:
        print(f"error: {exc.qualified()}", file=sys.stderr)
        return 1
