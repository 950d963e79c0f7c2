"""``thermal-wick run <config.json> [--out DIR] [--verbose]``.

Exit status is 0 when every task passes, 1 on a numerical failure (the
report is still written) and 2 on a usage or configuration error (nothing is
written).
"""

import argparse
import json
import logging
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import config as cfg
from . import green, modular, reconstruct
from .estimator import ThermalReconstruction
from .exceptions import ConfigError, QuadratureWarning, ThermalWickError
from .oracle import check_cyclic_periodicity
from .system import gibbs_state, kms_residual, rtgf

log = logging.getLogger("thermal_wick")

THREADS_ENV = "THERMAL_WICK_THREADS"
TASK_ORDER = ("verify-kms", "verify-green", "reconstruct", "roundtrip", "modular", "cesaro")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def thread_cap(environ=None):
    """Worker cap from ``THERMAL_WICK_THREADS`` (default: CPU count)."""
    environ = os.environ if environ is None else environ
    raw = environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _task_rng(ctx, name):
    return np.random.default_rng([ctx.numerics["seed"], TASK_ORDER.index(name)])


class _Record:
    def __init__(self, name, tolerances):
        self.name = name
        self.tolerances = tolerances
        self.checks = []
        self.info = {}
        self.error = None

    def check(self, name, value, tol_key=None):
        tol = self.tolerances[tol_key or name]
        value = float(value)
        self.checks.append({"name": name, "value": value, "tolerance": tol, "passed": bool(np.isfinite(value) and value <= tol)})

    def require(self, name, ok, detail):
        self.checks.append({"name": name, "value": detail, "tolerance": None, "passed": bool(ok)})

    def as_dict(self):
        passed = self.error is None and all(c["passed"] for c in self.checks)
        out = {"task": self.name, "passed": passed, "checks": self.checks, "info": self.info}
        if self.error is not None:
            out["error"] = self.error
        return out


def _non_identity(ctx):
    ident = ctx.oracle.identity_index
    return [i for i in range(ctx.oracle.n_generators) if i != ident]


def task_verify_kms(ctx, rec, rng, fit):
    obs = ctx.observables
    t_grid = ctx.numerics["t_grid"]
    worst = 0.0
    for i in _non_identity(ctx):
        for j in _non_identity(ctx):
            scale = obs[i].norm * obs[j].norm
            worst = max(worst, kms_residual(ctx.system, obs[i], obs[j], t_grid) / scale)
    rec.check("kms", worst)
    rec.info["log_partition"] = gibbs_state(ctx.system).logXi


def task_verify_green(ctx, rec, rng, fit):
    oracle = ctx.oracle
    beta = oracle.beta
    gens = _non_identity(ctx)
    basis = reconstruct.build_basis(oracle, ctx.numerics["n_max"], max(ctx.numerics["m"], 2))
    pick = np.sort(rng.choice(len(basis), size=min(8, len(basis)), replace=False))
    pi = green.build_pi_matrix(oracle, [basis.words[k] for k in pick])
    ev = pi.eigenvalues
    rec.check("reflection_positivity", max(0.0, -ev[0]) / max(ev[-1], 1.0))
    rec.info["pi_size"] = len(pick)

    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 5))
        word = [(int(g), float(t)) for g, t in zip(rng.choice(gens, n), np.sort(rng.uniform(0, beta, n)))]
        scale = oracle.norm_bound(word)
        scale = scale if np.isfinite(scale) else 1.0 + abs(oracle(word))
        worst = max(worst, green.cyclic_kms_residual(oracle, word, int(rng.integers(1, n))) / scale)
    rec.check("cyclic_kms", worst)

    if ctx.system is not None:
        excess = -np.inf
        for n in (2, 3):
            obs = [ctx.observables[int(g)] for g in rng.choice(gens, n)]
            samples = green.sample_closed_tube(n, beta, n_interior=32, seed=int(rng.integers(2**31)))
            excess = max(excess, green.tube_bound_check(ctx.system, obs, samples))
        rec.check("tube_bound", max(excess, 0.0))

    kind = ctx.config.get("oracle", {}).get("kind", "finite")
    if kind in ("fermion", "boson"):
        prefix = "psi0" if kind == "fermion" else "phi0"
        expected = -1 if kind == "fermion" else 1
        per = check_cyclic_periodicity(oracle, prefix + "*", prefix, np.linspace(0, beta, 9))
        rec.check("periodicity", per.residual)
        rec.require("statistics_sign", per.sign == expected, per.sign)


def task_reconstruct(ctx, rec, rng, fit):
    est = fit()
    rec.info.update(est.report())
    checks = dict(est.checks_)
    rec.check("gram_psd", max(0.0, -checks.pop("gram_min_eigenvalue")))
    checks.pop("gram_hermiticity")
    for name, value in checks.items():
        rec.check(name, value)
    if ctx.system is not None:
        bohr = ctx.system.bohr_frequencies()
        dist = max(float(np.min(np.abs(bohr - x))) for x in est.spectrum_)
        rec.check("bohr_spectrum", dist)
    if est.space_ is not None:
        t_grid = ctx.numerics["t_grid"]
        worst = max(est.kms_residual(g, ctx.oracle.star(g), t_grid) for g in _non_identity(ctx) or [0])
        rec.check("realtime_kms", worst)


def task_roundtrip(ctx, rec, rng, fit):
    est = fit()
    if est.space_ is None:
        raise ConfigError("roundtrip needs represented generators")
    gens = list(range(ctx.oracle.n_generators))
    worst = 0.0
    for _ in range(ctx.numerics["n_words"]):
        n = int(rng.integers(1, 4))
        word = [(int(g), float(t)) for g, t in zip(rng.choice(gens, n), rng.normal(scale=2.0, size=n))]
        exact = rtgf(ctx.system, [(ctx.observables[g], t) for g, t in word])
        worst = max(worst, abs(exact - est.predict([word])[0]))
    rec.check("roundtrip", worst)
    rec.info["n_words"] = ctx.numerics["n_words"]


def task_modular(ctx, rec, rng, fit):
    g = modular.gns(ctx.system)
    md = modular.tomita(g, ctx.system.beta)
    res = modular.modular_residuals(g, md, seed=int(rng.integers(2**31)))
    rec.check("modular_identities", max(res.values()))
    rec.info["modular_residuals"] = res
    comm = modular.verify_commutant_theorem(g, md, seed=int(rng.integers(2**31)))
    rec.check("commutant_span", comm["span_residual"])
    rec.check("commutant_commutator", comm["max_commutator"])
    rec.require("commutant_dim", comm["commutant_dim"] == ctx.system.dim ** 2, comm["commutant_dim"])
    rec.info["kernel_dimension"] = g.kernel_dimension()


def _offdiagonal_probe(ctx):
    """Hermitian sum of the generators that do not commute with ``H_mu``."""
    Hm = ctx.system.H_mu
    total = np.zeros_like(Hm)
    for i in _non_identity(ctx):
        m = ctx.observables[i].matrix
        if np.linalg.norm(Hm @ m - m @ Hm) > 1e-12 * (1 + np.linalg.norm(Hm)):
            total = total + m
    total = 0.5 * (total + total.conj().T)
    return total if np.linalg.norm(total) > 0 else np.eye(ctx.system.dim, dtype=complex)


def task_cesaro(ctx, rec, rng, fit):
    g = modular.gns(ctx.system)
    a = _offdiagonal_probe(ctx)
    psi = modular.perturbed_state(g, a)
    T, steps = ctx.numerics["cesaro_T"], ctx.numerics["cesaro_steps"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", QuadratureWarning)
        avg = modular.cesaro_average(g, psi, a, T, steps)
    limit = modular.cesaro_limit(g, psi, a)
    exact = modular.cesaro_exact(g, psi, a, T)
    tail = modular.cesaro_tail_bound(g, psi, a, T)
    # the gap to the limit decays like 1/T; only the excess over the analytic tail is a failure
    rec.check("cesaro_excess", max(0.0, abs(avg - limit) - tail), "cesaro")
    rec.check("cesaro_quadrature", abs(avg - exact))
    rec.info.update(
        average=[avg.real, avg.imag],
        limit=[limit.real, limit.imag],
        T=T,
        gap=abs(avg - limit),
        tail_bound=tail,
        kernel_dimension=g.kernel_dimension(),
        quadrature_warnings=len(caught),
    )


TASKS = {
    "verify-kms": task_verify_kms,
    "verify-green": task_verify_green,
    "reconstruct": task_reconstruct,
    "roundtrip": task_roundtrip,
    "modular": task_modular,
    "cesaro": task_cesaro,
}


def _run_task(ctx, name, fit):
    rec = _Record(name, ctx.tolerances)
    log.info("task %s", name)
    try:
        TASKS[name](ctx, rec, _task_rng(ctx, name), fit)
    except ThermalWickError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec.as_dict()


class _Fit:
    """Single shared reconstruction; the fit runs before any worker starts."""

    def __init__(self, ctx, needed):
        self.est = self.error = None
        if not needed:
            return
        n = ctx.numerics
        est = ThermalReconstruction(n_max=n["n_max"], m=n["m"], delta=n["delta"], rel_tol=n["rel_tol"])
        try:
            self.est = est.fit(ctx.oracle)
        except ThermalWickError as exc:
            self.error = exc

    def __call__(self):
        if self.error is not None:
            raise self.error
        return self.est


def _resolve_curves(ctx):
    """Translate curve specs into index words; raises ConfigError on bad labels."""
    out = []
    for curve in ctx.config.get("curves", []):
        var = "t" if curve["kind"] == "rtgf" else "tau"
        word = []
        for label, time in curve["word"]:
            try:
                g = ctx.oracle.index(label)
            except (KeyError, ValueError):
                raise ConfigError(f"curve {curve['name']!r}: unknown generator {label!r}") from None
            if isinstance(time, str) and time != var:
                raise ConfigError(f"curve {curve['name']!r}: {curve['kind']} curves use the variable {var!r}")
            word.append((g, time))
        source = curve.get("source", "system" if ctx.system is not None else "reconstruction")
        if curve["kind"] == "rtgf" and source == "system" and ctx.system is None:
            raise ConfigError(f"curve {curve['name']!r}: no exact system for source 'system'")
        out.append((curve, word, source))
    return out


def _fmt(x):
    return format(float(x), ".17g")


def emit_curves(ctx, curve, word, source, fit):
    """CSV text for one curve; ``# ...`` comment line then the column header."""
    grid = np.linspace(curve["grid"]["start"], curve["grid"]["stop"], curve["grid"]["num"])
    labels = [ctx.oracle.labels[g] for g, _ in word]
    desc = " ".join(f"{lab}@{time}" for lab, (_, time) in zip(labels, word))
    if curve["kind"] == "rtgf":
        lines = [f"# rtgf {curve['name']} source={source} word={desc}; columns t,re,im", "t,re,im"]
        for t in grid:
            w = [(g, t if tm == "t" else float(tm)) for g, tm in word]
            if source == "system":
                val = rtgf(ctx.system, [(ctx.observables[g], tt) for g, tt in w])
            else:
                val = fit().predict([w])[0]
            lines.append(f"{_fmt(t)},{_fmt(val.real)},{_fmt(val.imag)}")
    else:
        lines = [f"# togf {curve['name']} word={desc}; columns tau,value (real part)", "tau,value"]
        for tau in grid:
            w = [(g, tau if tm == "tau" else float(tm)) for g, tm in word]
            lines.append(f"{_fmt(tau)},{_fmt(ctx.oracle(w).real)}")
    return "\n".join(lines) + "\n"


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def run(config_path, out_dir=".", environ=None):
    """Run all configured tasks; returns ``(exit_status, report)``.

    Raises
    ------
    ConfigError
        Before anything is written.
    """
    config = cfg.load_config(config_path)
    ctx = cfg.build_context(config)
    curves = _resolve_curves(ctx)
    workers = thread_cap(environ)
    os.makedirs(out_dir, exist_ok=True)

    names = [t for t in TASK_ORDER if t in config["tasks"]]
    needs_fit = bool({"reconstruct", "roundtrip"} & set(names)) or any(src == "reconstruction" for *_, src in curves)
    fit = _Fit(ctx, needs_fit)
    with ThreadPoolExecutor(max_workers=min(workers, max(len(names), 1))) as pool:
        records = list(pool.map(lambda name: _run_task(ctx, name, fit), names))

    files = []
    for curve, word, source in curves:
        fname = f"{curve['name']}.csv"
        try:
            text = emit_curves(ctx, curve, word, source, fit)
        except ThermalWickError as exc:
            records.append({"task": f"curve:{curve['name']}", "passed": False, "checks": [], "info": {}, "error": str(exc)})
            continue
        atomic_write(os.path.join(out_dir, fname), text)
        files.append(fname)

    passed = all(r["passed"] for r in records)
    report = {
        "schema_version": cfg.SCHEMA_VERSION,
        "status": "pass" if passed else "fail",
        "provenance": {"config_sha256": cfg.config_hash(config), "version": __version__},
        "tolerances": ctx.tolerances,
        "numerics": ctx.numerics,
        "tasks": records,
        "curves": files,
    }
    report = _jsonable(report)
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"
    atomic_write(os.path.join(out_dir, "report.json"), text)
    return (EXIT_OK if passed else EXIT_FAIL), report


def build_parser():
    parser = argparse.ArgumentParser(prog="thermal-wick", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the tasks of a JSON experiment config")
    p_run.add_argument("config", help="path to config.json")
    p_run.add_argument("--out", default=".", help="output directory (default: current directory)")
    p_run.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        status, report = run(args.config, args.out)
    except ConfigError as exc:
        print(f"thermal-wick: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for rec in report["tasks"]:
        log.info("%s: %s", rec["task"], "pass" if rec["passed"] else "FAIL")
    if args.verbose or status:
        print(f"thermal-wick: {report['status']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
