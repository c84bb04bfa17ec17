"""Command-line runner: ``ultralab run CONFIG`` or ``ultralab <experiment-id> --key value``.

Every run writes ``report.json`` plus one CSV per trace (and a two-column
``.dat`` file per decay trace) into ``--out``. The exit status is 0 exactly
when every asserted verdict passes, 1 when one fails or an experiment raised,
and 2 for an invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import tomli

from . import __version__
from . import circle_hyperfunctions as ch
from . import config as cfgmod
from . import embedding_lab as el
from . import gevrey_calculus as gc
from . import mollifier_factory as mf
from .cache import Cache, cache_gc, default_dir
from .core_sequences import Thresholds, Verdict, WeightSequence
from .errors import ConfigInvalid, UltralabError


@dataclass
class Trace:
    name: str
    header: List[str]
    rows: List[list]
    decay: Optional[tuple] = None  # (n, log_p / n**(1/m')) for the .dat file


@dataclass
class Outcome:
    passed: bool
    result: Dict[str, Any]
    verdicts: List[Dict[str, Any]] = field(default_factory=list)
    traces: List[Trace] = field(default_factory=list)


@dataclass
class Context:
    thresholds: Thresholds
    k_sweep: tuple
    tau_c: float
    cache: Optional[Cache] = None


def _enc(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _verdict(name, est) -> Dict[str, Any]:
    return {"name": name, "verdict": est.verdict.value, "L_hat": _enc(est.L_hat),
            "window_trace": [[int(e), _enc(v)] for e, v in est.window_trace]}


def _fit_trace(name: str, fit: el.DecayFit, w: WeightSequence) -> Trace:
    rows = fit.trace_rows(w)
    return Trace(name, ["n", "n_pow", "log_p", "log_p_over_n_pow"], [[_enc(x) for x in r] for r in rows],
                 (fit.n, fit.log_p / w.scale(fit.n)))


def _bump(order, mu, center=0.0):
    return gc.gevrey_bump(order, mu, center=center)


# ------------------------------------------------------------------ runners

def run_null_decay(p, ctx: Context) -> Outcome:
    psi = _bump(p["order"], p["mu"], p["center"])
    M = el.FlatMultiplier(p["kind"], p["m"])
    w = WeightSequence(p["m"])
    res = el.null_decay_experiment(psi, M, gc.GevreyParams(p["m"], p["nus"][0], p["mu"]), w,
                                   p["n_range"], p["nus"], ctx.thresholds, p["control"], p["roumieu"])
    verdicts = [_verdict(f"nu={nu}", f.estimate) for nu, f in res.fits.items()]
    traces = [_fit_trace(f"nu{nu:g}", f, w) for nu, f in res.fits.items()]
    if res.control is not None:
        verdicts.append(_verdict("gaussian-control (must not be Null)", res.control.estimate))
        traces.append(_fit_trace("control", res.control, w))
    return Outcome(res.passed, res.to_dict(), verdicts, traces)


def run_moderate_growth(p, ctx: Context) -> Outcome:
    if p["f"] == "delta":
        f = el.UltraDistribution.delta(p["k"])
    else:
        f = el.UltraDistribution("derivative_of_continuous", p["k"], gc.hat(p["mu"], p["width"]))
    w = WeightSequence(p["m"] - 1.0)
    res = el.moderate_growth_experiment(f, el.FlatMultiplier(p["kind"], p["m"]),
                                        gc.GevreyParams(p["m"], p["nu"], p["mu"]), w, p["n_range"], ctx.thresholds)
    return Outcome(res.passed, res.to_dict(), [_verdict(f"{p['f']} k={p['k']}", res.fit.estimate)],
                   [_fit_trace("growth", res.fit, w)])


def run_weak_equality(p, ctx: Context) -> Outcome:
    psi = _bump(p["order"], p["mu"], p["center"])
    a, b = (el.FlatMultiplier("pow", p["m"], int(o)) for o in p["g_offsets"][:2])
    delta = el.UltraDistribution.delta()
    res = el.weak_equality_experiment(delta, a, b, psi, p["m"], p["n_range"], ctx.thresholds, ks=ctx.k_sweep)
    ctrl = el.weak_equality_experiment(delta, a, el.ShiftedMultiplier(a, p["control_shift"]), psi, p["m"],
                                       p["n_range"], ctx.thresholds, use_bound=False, ks=ctx.k_sweep)
    verdicts = [_verdict(f"k={k}", e) for k, e in res.k_sweep.estimates.items()]
    verdicts += [_verdict(f"shifted-control k={k} (must not all be Null)", e) for k, e in ctrl.k_sweep.estimates.items()]
    rows = [[int(n), float(c), _enc(float(lb)), float(cc)] for n, c, lb, cc in zip(res.n, res.c, res.log_bound, ctrl.c)]
    traces = [Trace("pairing", ["n", "c_n", "log_bound", "c_n_control"], rows)]
    return Outcome(res.passed and not ctrl.passed, {"pairing": res.to_dict(), "control": ctrl.to_dict()},
                   verdicts, traces)


def run_product(p, ctx: Context) -> Outcome:
    (o1, o2), (c1, c2) = p["orders"][:2], p["centers"][:2]
    w = WeightSequence(p["m"])
    res = el.product_consistency_check(_bump(o1, p["mu"], c1), _bump(o2, p["mu"], c2),
                                       el.FlatMultiplier(p["kind"], p["m"]),
                                       gc.GevreyParams(p["m"], p["nu"], p["mu"]), w, p["n_range"], ctx.thresholds)
    return Outcome(res.passed, res.to_dict(), [_verdict("product", res.fit.estimate)], [_fit_trace("product", res.fit, w)])


def _circle_sequence(name, K, **kw) -> ch.FourierSeq:
    if name == "exp_root":
        return ch.exp_root(K, kw.get("a", 1.0))
    if name == "geometric":
        return ch.geometric(kw.get("p", 0.5), K)
    if name == "constant":
        return ch.monomial(0).extended(K)
    if name == "stretched":
        return ch.stretched(kw["beta"], kw["m"], K)
    if name == "power_of_p":
        return ch.power_of_p(kw["p"], kw["m"], K)
    if name == "ones":
        return ch.ones(K)
    if name == "finite":
        return ch.finite({int(k): 1.0 for k in kw.get("support", [])} or {0: 1.0}).extended(K)
    raise ConfigInvalid(f"unknown sequence {name!r}")


def _circle_trace(name, n, lq, w) -> Trace:
    n = np.asarray(n)
    lq = np.asarray(lq, dtype=float)
    rows = [[int(a), _enc(float(b)), _enc(float(b / w.scale(a)))] for a, b in zip(n, lq)]
    return Trace(name, ["n", "log_qhat", "log_qhat_times_r"], rows, (n, lq / w.scale(n)))


def run_circle_embed(p, ctx: Context) -> Outcome:
    H = _circle_sequence(p["sequence"], p["K"])
    w = WeightSequence(p["m_prime"])
    rep = ch.embed_hyperfunction(H, w, p["lam"], range(1, p["n_max"] + 1), p["slack"], ctx.thresholds)
    return Outcome(rep.passed, rep.to_dict(), [_verdict("embedding", rep.estimate)],
                   [_circle_trace("qhat", rep.n, rep.log_qhat, w)])


def run_circle_null(p, ctx: Context) -> Outcome:
    w = WeightSequence(p["m_prime"])
    ns = range(1, p["n_max"] + 1)
    f = ch.power_of_p(p["p"], p["m"], 64)
    partners = [ch.power_of_p(p["p"], p["m"], 64), ch.finite({1: 1.0, -2: 0.5})]
    rep = ch.embedding_consistency_check(f, p["m"], w, p["lam"], ns, partners, ctx.thresholds)
    ctrl = ch.embedding_consistency_check(ch.geometric(p["control_p"], 64), p["m"], w, p["control_lam"],
                                          ns, (), ctx.thresholds)
    verdicts = [_verdict("tail", rep.tail)] + [_verdict(f"product {k}", e) for k, e in rep.products.items()]
    verdicts.append(_verdict("geometric-control (must not be Null)", ctrl.tail))
    ok = rep.passed and ctrl.tail.verdict is not Verdict.NULL
    return Outcome(ok, {"check": rep.to_dict(), "control": ctrl.to_dict()}, verdicts)


def random_certified_net(rng: np.random.Generator, n_max: int, K: int, rho0: float, m_prime: float):
    """Net ``n -> f_n`` with ``|f_n(k)| <= exp(s n**(1/m')) rho0**-|k|`` and random phases."""
    s = rng.uniform(-1.0, 1.0)
    net = []
    k = np.arange(-K, K + 1)
    for n in range(1, n_max + 1):
        logC = s * n ** (1.0 / m_prime)
        la = logC + np.log(rng.uniform(0.0, 1.0, k.size)) - np.abs(k) * math.log(rho0)
        ph = rng.uniform(-math.pi, math.pi, k.size)
        net.append((n, ch.FourierSeq(la, ph, certificate=ch.DecayCertificate(logC, math.log(rho0)),
                                     name=f"random_{n}")))
    return net


def run_prop_aba(p, ctx: Context) -> Outcome:
    rng = np.random.default_rng(p["seed"])
    w = WeightSequence(p["m_prime"])
    per_n_fail, chain_fail, worst = [], [], math.inf
    rows = []
    for i in range(p["count"]):
        net = random_certified_net(rng, p["n_max"], p["K"], p["rho0"], p["m_prime"])
        rep = ch.prop_aba_check(net, p["mu"], p["lam"], w, ctx.thresholds, strict=False)
        worst = min(worst, rep.worst_margin)
        if not rep.per_n_ok:
            per_n_fail.append(i)
        if not rep.chain_ok:
            chain_fail.append(i)
        rows.append([i, rep.estimates["q_mu"].L_hat, rep.estimates["qhat_lam"].L_hat,
                     rep.estimates["q_lam"].L_hat, rep.slack, rep.worst_margin])
    ok = not per_n_fail and not chain_fail
    result = {"count": p["count"], "per_n_failures": per_n_fail, "chain_failures": chain_fail,
              "worst_log_margin": worst, "comparison_constant": ch.comparison_constant(p["lam"], p["mu"])}
    return Outcome(ok, result, [], [Trace("chains", ["net", "L_q_mu", "L_qhat_lam", "L_q_lam", "slack", "worst_margin"], rows)])


def run_lemma_min(p, ctx: Context) -> Outcome:
    out, rows, ok = [], [], True
    for m in p["m"]:
        for rho in p["rho"]:
            r = ch.lemma_aaa_minimize(m, rho, strict=False)
            out.append(r.to_dict())
            ok = ok and r.passed
            rows.append([m, rho, r.t_rho, r.gap, r.residual, r.log_phi_at_t] + [int(v) for v in r.checks.values()])
    header = ["m", "rho", "t_rho", "gap", "residual", "log_phi"] + (list(out[0]["checks"]) if out else [])
    return Outcome(ok, {"results": out}, [], [Trace("minimizers", header, rows)])


def run_mollifier_certify(p, ctx: Context) -> Outcome:
    kind = p["kind"]
    flat = []
    for n in p["n"]:
        for k in (kind, "der" if kind == "pow" else "pow"):
            r = mf.certify_flatness(k, n)
            flat.append({"window": r.kind, "n": n, "passed": r.passed,
                         "first_nonzero_order": r.first_nonzero})
    bounds = mf.certify_uniform_bounds("h", p["bound_n"], raise_on_fail=False)
    moments = []
    for n in p["moments"]:
        e = mf.build_mollifier(kind, p["m"], n, cache=ctx.cache)
        moments.append(mf.moment_report(e).to_dict())
    ok = all(f["passed"] for f in flat) and bounds.passed and all(m["passed"] for m in moments)
    rows = [[n, v, bounds.extra["max_re_exponent"][str(n)]] for n, v in bounds.per_n.items()]
    return Outcome(ok, {"flatness": flat, "uniform_bound": bounds.to_dict(), "moments": moments}, [],
                   [Trace("sigma2", ["n", "sigma2_bound", "max_re_exponent"], rows)])


def run_abe_classify(p, ctx: Context) -> Outcome:
    c = _circle_sequence(p["sequence"], p["K"], beta=p["beta"], m=p["m"], p=p["p"], support=p["support"], a=p["a"])
    am = ch.classify_Am(c, p["m"], ctx.tau_c)
    circ = ch.classify_circle_object(c, ctx.tau_c)
    ok = am.member is not None and circ.verdict is not ch.CircleClass.INCONCLUSIVE
    coeffs = Trace("coefficients", ["k", "log_abs_c", "phase"],
                   [[int(k), _enc(float(la)), float(ph)] for k, la, ph in zip(c.k, c.log_abs, c.phase)])
    verdicts = [{"name": "A_m", "member": am.member}, {"name": "circle", "verdict": circ.verdict.value}]
    return Outcome(ok, {"A_m": am.to_dict(), "circle": circ.to_dict(), "sequence": c.name}, verdicts, [coeffs])


RUNNERS: Dict[str, Callable[[dict, Context], Outcome]] = {
    "null-decay": run_null_decay,
    "moderate-growth": run_moderate_growth,
    "weak-equality": run_weak_equality,
    "product-consistency": run_product,
    "circle-embed": run_circle_embed,
    "circle-null": run_circle_null,
    "prop-aba": run_prop_aba,
    "lemma-min": run_lemma_min,
    "mollifier-certify": run_mollifier_certify,
    "abe-classify": run_abe_classify,
}


# ------------------------------------------------------------------ driver

def _run_one(exp: cfgmod.ExperimentConfig, ctx: Context):
    t0 = time.perf_counter()
    try:
        out = RUNNERS[exp.id](exp.params, ctx)
        entry = {"id": exp.id, "params": exp.params, "passed": out.passed, "verdicts": out.verdicts,
                 "result": out.result}
    except UltralabError as exc:
        out = Outcome(False, {})
        entry = {"id": exp.id, "params": exp.params, "passed": False,
                 "error": {"type": type(exc).__name__, "message": str(exc),
                           "witness": getattr(exc, "witness", None)}}
    return entry, out.traces, time.perf_counter() - t0


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        return _enc(float(o))
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if hasattr(o, "value") and isinstance(getattr(o, "value"), str):
        return o.value
    return o


def run(config: cfgmod.RunConfig, out_dir: Path, cache_dir: Optional[Path] = None, threads: int = 1) -> dict:
    """Execute every experiment of ``config`` and write the report and traces."""
    th = config.thresholds
    cache = Cache(cache_dir) if cache_dir is not None else None
    ctx = Context(Thresholds(th["tau"], th["bound"], th["oscillation"]), tuple(th["k_sweep"]), th["tau_c"], cache)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    exps = config.experiments
    if threads > 1 and len(exps) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(lambda e: _run_one(e, ctx), exps))
    else:
        done = [_run_one(e, ctx) for e in exps]
    results, timings = [], []
    for i, (entry, traces, dt) in enumerate(done):
        files = []
        for tr in traces:
            stem = f"{i:02d}-{entry['id']}-{tr.name}"
            path = out_dir / f"{stem}.csv"
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(tr.header)
                wr.writerows(tr.rows)
            files.append(path.name)
            if tr.decay is not None:
                dat = out_dir / f"{stem}.dat"
                with open(dat, "w") as fh:
                    for a, b in zip(*tr.decay):
                        fh.write(f"{int(a)} {float(b)!r}\n")
                files.append(dat.name)
        entry["traces"] = files
        results.append(entry)
        timings.append(dt)
    report = {
        "tool": "ultralab", "version": __version__, "config": config.to_dict(), "thresholds": th,
        "results": results, "passed": all(r["passed"] for r in results),
        "cache": {"dir": None if cache is None else str(cache.root),
                  "hits": 0 if cache is None else cache.hits, "misses": 0 if cache is None else cache.misses},
        "wall_clock": {"total_s": time.perf_counter() - t0, "per_experiment_s": timings},
    }
    report = _jsonable(report)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report


def _parse_overrides(eid: str, tokens: Sequence[str]) -> dict:
    """``--key value`` pairs; values are read as TOML literals, lists may be comma separated."""
    schema = cfgmod.SCHEMA[eid]
    raw: Dict[str, Any] = {"id": eid}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigInvalid(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        try:
            val = next(it)
        except StopIteration:
            raise ConfigInvalid(f"{tok} needs a value") from None
        default = schema.get(key)
        if isinstance(default, list) and "," in val and not val.startswith("["):
            val = f"[{val}]"
        try:
            raw[key] = tomli.loads(f"v = {val}")["v"]
        except tomli.TOMLDecodeError:
            raw[key] = val
        if isinstance(default, list) and not isinstance(raw[key], list):
            raw[key] = [raw[key]]
    return raw


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ultralab", description=__doc__.splitlines()[0])
    ap.add_argument("--cache-dir", default=None, help="mollifier cache (falls back to $ULTRALAB_CACHE)")
    ap.add_argument("--threads", type=int, default=1, help="experiments run concurrently")
    ap.add_argument("--out", default="ultralab-out", help="directory for report.json and traces")
    ap.add_argument("--version", action="version", version=f"ultralab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config file or one experiment")
    r.add_argument("target", help="TOML config path or experiment id")
    gcp = sub.add_parser("cache-gc", help="remove cache entries whose hash does not match")
    gcp.add_argument("directory", nargs="?", default=None)
    for eid in cfgmod.SCHEMA:
        sub.add_parser(eid, help=f"run {eid} with --key value overrides", add_help=True)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    try:
        if args.command == "cache-gc":
            if extra:
                raise ConfigInvalid(f"unexpected arguments {extra}")
            d = args.directory or default_dir(args.cache_dir)
            if d is None:
                raise ConfigInvalid("no cache directory given")
            print(json.dumps(cache_gc(d).to_dict(), indent=2))
            return 0
        if args.command == "run":
            if args.target in cfgmod.SCHEMA:
                config = cfgmod.validate({"experiment": [_parse_overrides(args.target, extra)]})
            else:
                if extra:
                    raise ConfigInvalid(f"unexpected arguments {extra}")
                config = cfgmod.load(args.target)
        else:
            config = cfgmod.validate({"experiment": [_parse_overrides(args.command, extra)]})
    except ConfigInvalid as exc:
        print(f"ultralab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    report = run(config, Path(args.out), default_dir(args.cache_dir), max(1, args.threads))
    for r in report["results"]:
        status = "PASS" if r["passed"] else "FAIL"
        extra_msg = f" ({r['error']['type']}: {r['error']['message']})" if "error" in r else ""
        print(f"{status} {r['id']}{extra_msg}")
    print(f"report: {Path(args.out) / 'report.json'}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
