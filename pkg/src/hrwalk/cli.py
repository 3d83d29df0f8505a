"""Batch experiment runner: ``hrw <experiment> --config file.json [--seed S] [--out DIR]``.

A config is a JSON object::

    {"walk": {"N": 2, "law": {"type": "geometric", "c": 1}},
     "params": {...},            # experiment parameters
     "seed": 12345,              # simulation experiments only
     "prefix": "run1"}           # artifact name prefix (default: experiment)

Exit codes: 0 ok, 2 invalid config, 3 certificate failure, 4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import distance_chain as dc
from . import kernel as kn
from . import montecarlo as mc
from . import potential as pot
from . import sequences as seqs
from .group import GroupElement

EXIT_OK, EXIT_INVALID, EXIT_CERTIFICATE, EXIT_SOLVER = 0, 2, 3, 4


class CertificateError(RuntimeError):
    """A series could not be certified convergent or divergent."""


@dataclass
class ExperimentConfig:
    experiment: str
    walk: dict | None
    params: dict = field(default_factory=dict)
    seed: int | None = None
    prefix: str | None = None
    threads: int = 1

    @classmethod
    def from_json(cls, experiment: str, obj: dict) -> ExperimentConfig:
        return cls(experiment, obj.get("walk"), dict(obj.get("params", {})),
                   obj.get("seed"), obj.get("prefix"))

    @property
    def spec(self) -> kn.WalkSpec:
        return kn.WalkSpec.from_json(self.walk)


# ----------------------------------------------------------- parameters

# name -> (kind, required); kinds: int, number, numlist, intlist, str, dict, list
_PARAMS: dict[str, dict[str, tuple[str, bool]]] = {
    "kernel-table": {"eps": ("number", False)},
    "transition": {"n": ("int", False), "t": ("number", False), "rad": ("int", True)},
    "degree": {},
    "green": {"zeta": ("number", True), "start": ("int", False)},
    "incomplete-sweep": {"zeta": ("number", True), "t_grid": ("numlist", True)},
    "asymptotic-benchmark": {"mu": ("number", True), "t_grid": ("numlist", True)},
    "last-exit": {"mu": ("number", True), "R": ("intlist", True),
                  "replicas": ("int", False), "horizon": ("number", False)},
    "return-tail": {"T": ("number", True), "M": ("int", True), "tol": ("number", False)},
    "chain-analytics": {"cap": ("int", False)},
    "max-process": {"n": ("int", True), "levels": ("int", False)},
    "timescale": {"eta": ("number", True), "mu": ("number", True), "j": ("int", True)},
    "simulate": {"replicas": ("int", True), "horizon": ("number", True),
                 "scheme": ("str", False), "times": ("numlist", False)},
    "occupation": {"replicas": ("int", True), "t": ("number", True), "F": ("list", False)},
}
EXPERIMENTS = tuple(_PARAMS)
_SEEDED = {"simulate", "occupation"}


def _type_ok(kind: str, v: Any) -> bool:
    num = lambda x: isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
    if kind == "int":
        return isinstance(v, int) and not isinstance(v, bool)
    if kind == "number":
        return num(v)
    if kind == "numlist":
        return isinstance(v, list) and len(v) > 0 and all(num(x) for x in v)
    if kind == "intlist":
        return (isinstance(v, int) and not isinstance(v, bool)) or (
            isinstance(v, list) and len(v) > 0 and all(isinstance(x, int) for x in v))
    if kind == "str":
        return isinstance(v, str)
    if kind == "list":
        return isinstance(v, list)
    return True


def _parse_F(N: int, items) -> dict[GroupElement, float]:
    if items is None:
        return {GroupElement.origin(N): 1.0}
    return {GroupElement.parse(N, str(it["x"])): float(it["value"]) for it in items}


def validate(config: ExperimentConfig) -> list[str]:
    """Schema and cross-field diagnostics; empty when the config can run."""
    out: list[str] = []
    if config.experiment not in _PARAMS:
        return [f"unknown experiment {config.experiment!r}"]
    spec = None
    if config.walk is None:
        out.append("missing field 'walk'")
    else:
        try:
            spec = config.spec
        except (kn.KernelError, seqs.SequenceError, KeyError, TypeError, ValueError) as exc:
            out.append(f"invalid walk: {exc}")
    p = config.params
    for name, (kind, required) in _PARAMS[config.experiment].items():
        if name not in p:
            if required:
                out.append(f"missing field 'params.{name}'")
        elif not _type_ok(kind, p[name]):
            out.append(f"field 'params.{name}' must be of type {kind}")
    for name in p:
        if name not in _PARAMS[config.experiment]:
            out.append(f"unknown field 'params.{name}'")
    if config.experiment in _SEEDED or (config.experiment == "last-exit" and "replicas" in p):
        if config.seed is None:
            out.append("missing field 'seed'")
        elif not (isinstance(config.seed, int) and 0 <= config.seed < 2**64):
            out.append("field 'seed' must be an unsigned 64-bit integer")
    if spec is None:
        return out

    exp = config.experiment
    if exp == "transition" and ("n" in p) == ("t" in p):
        out.append("transition needs exactly one of 'params.n' or 'params.t'")
    if exp == "simulate" and p.get("scheme", "discrete") not in ("discrete", "continuous"):
        out.append("field 'params.scheme' must be 'discrete' or 'continuous'")
    for name in ("replicas", "n", "M", "j"):
        if name in p and isinstance(p[name], int) and p[name] < 1:
            out.append(f"field 'params.{name}' must be >= 1")
    if exp == "occupation":
        if not mc.certified_recurrent_mu1(spec):
            out.append("occupation requires recurrent walk (mu = 1, non-decreasing c_j, sum 1/d_j divergent)")
        try:
            _parse_F(spec.N, p.get("F"))
        except (KeyError, TypeError, ValueError) as exc:
            out.append(f"invalid 'params.F': {exc}")
    if exp == "last-exit":
        try:
            transient = pot.green_power(kn.build_tables(spec), 1.0).finite
        except kn.KernelError as exc:
            out.append(f"invalid walk: {exc}")
        else:
            if not transient:
                out.append("last-exit requires transient walk")
    if exp in ("asymptotic-benchmark",) and spec.family is None:
        out.append("asymptotic-benchmark requires a muC or muD walk")
    if exp == "chain-analytics" and spec.geometric_c is None:
        out.append("chain-analytics requires a c^j walk")
    return out


# -------------------------------------------------------------- outputs


@dataclass
class Artifacts:
    out_dir: str
    prefix: str
    written: list[str] = field(default_factory=list)

    def write(self, suffix: str, text: str) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, f"{self.prefix}{suffix}")
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=".tmp-")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(path)
        return path

    def json(self, suffix: str, obj) -> str:
        return self.write(suffix, json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")

    def tsv(self, suffix: str, title: str, header: list[str], rows) -> str:
        lines = [f"# {title}", "\t".join(header)]
        lines += ["\t".join(_fmt(v) for v in row) for row in rows]
        return self.write(suffix, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _clean(obj):
    """Make an object JSON-safe: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _certified(v: pot.PotentialValue) -> pot.PotentialValue:
    if v.indeterminate:
        raise CertificateError("series is neither certified convergent nor divergent")
    return v


# ---------------------------------------------------------- experiments


def _kernel_table(cfg, tb, art):
    art.write(".csv", tb.to_csv())
    art.json(".json", {"J": tb.J, "D": tb.D, "tailBound": tb.tail_bound, "specHash": tb.spec.digest()})
    return f"J={tb.J} D={tb.D!r} tail<={tb.tail_bound:.3g}"


def _transition(cfg, tb, art):
    p = cfg.params
    rad = p["rad"]
    if "n" in p:
        value, err = kn.pn(tb, p["n"], rad, with_error=True)
        what = {"n": p["n"]}
    else:
        value, err = kn.pt(tb, p["t"], rad, with_error=True)
        what = {"t": p["t"]}
    art.json(".json", {**what, "rad": rad, "value": value, "truncationError": err})
    return f"p={value:.12g} (|y|={rad})"


def _degree(cfg, tb, art):
    rep = pot.degree_classify(tb.spec)
    art.json(".json", rep.to_json())
    return f"gamma={rep.gamma:.12g} decoration={rep.decoration}"


def _green(cfg, tb, art):
    zeta = cfg.params["zeta"]
    v = _certified(pot.green_power(tb, zeta, start=cfg.params.get("start", 1)))
    art.json(".json", {"zeta": zeta, **v.to_json()})
    return f"green power zeta={zeta:g}: " + ("divergent" if v.divergent else f"{v.value:.12g}")


def _incomplete_sweep(cfg, tb, art):
    zeta = cfg.params["zeta"]
    rows = []
    for t in cfg.params["t_grid"]:
        v = _certified(pot.g_t_zeta(tb, zeta, t))
        rows.append((t, v.value, v.truncation_error))
    art.tsv(".tsv", f"incomplete green power g_t of order {zeta:g}", ["t", "value", "truncation_error"], rows)
    return f"incomplete sweep zeta={zeta:g}: {len(rows)} points, last={rows[-1][1]:.6g}"


def _asymptotic_benchmark(cfg, tb, art):
    mu = cfg.params["mu"]
    rows = []
    for t in cfg.params["t_grid"]:
        meas = _certified(pot.f_t(tb, mu, t)).value
        pred = pot.asymptotic_benchmark(tb, mu, t)
        rows.append((t, meas, pred, meas / pred))
    art.tsv(".tsv", "incomplete potential vs d_j^-mu partial-sum benchmark",
            ["t", "measured", "predicted", "ratio"], rows)
    return f"benchmark mu={mu:g}: final ratio={rows[-1][3]:.6f}"


def _last_exit(cfg, tb, art):
    p = cfg.params
    mu = p["mu"]
    Rs = p["R"] if isinstance(p["R"], list) else [p["R"]]
    rows, res = [], []
    for R in Rs:
        le = pot.last_exit_integral(tb, mu, R)
        _certified(le.series)
        cf = le.closed_form
        rows.append((R, le.series.value, le.series.truncation_error, math.nan if cf is None else cf))
        entry = {"R": R, "series": le.series.to_json(), "closedForm": cf}
        if "replicas" in p:
            conf = mc.SimConfig(cfg.seed, p["replicas"], p.get("horizon", 1e4), "continuous",
                                threads=cfg.threads)
            rep = mc.estimate_last_exit(tb, conf, R)
            m, hw = rep.moment(mu - 1.0)
            entry["simulation"] = {**rep.to_json(), "moment": m, "momentHalfWidth99": hw}
        res.append(entry)
    art.tsv(".tsv", f"time-weighted occupation of B_R, order {mu:g}",
            ["R", "series", "truncation_error", "closed_form"], rows)
    art.json(".json", {"mu": mu, "results": res})
    return f"last exit mu={mu:g}: R={Rs[0]} value={rows[0][1]:.6g}"


def _return_tail(cfg, tb, art):
    p = cfg.params
    tail = pot.return_tail_solve(tb, p["T"], p["M"], p.get("tol", 1e-6))
    surv = pot.survival_with_holding(tail)
    art.tsv(".tsv", "excursion tail rho_t and first-return survival",
            ["t", "rho", "survival"], zip(tail.grid, tail.rho, surv))
    art.json(".json", {"T": p["T"], "M": p["M"], "residual": tail.residual, "clip": tail.clip})
    return f"return tail: residual={tail.residual:.3g} rho(T)={tail.rho[-1]:.6g}"


def _chain_analytics(cfg, tb, art):
    N, c = tb.N, tb.spec.geometric_c
    cap = cfg.params.get("cap", 16)
    art.write(".csv", dc.chain_csv(tb, cap))
    drift = [{"i": i, "closedForm": dc.drift(N, c, i), "direct": dc.drift_direct(tb, i)[0],
              "exitMean": dc.exit_stats(tb, i).mean if i > 0 else None} for i in range(cap + 1)]
    out = {"N": N, "c": c, "drift": drift}
    if c < 1:
        L = dc.drift_threshold(N, c)
        integer, cont = dc.threshold_hitting_mean(N, c)
        out["threshold"] = {"L": L, "hittingMeanInteger": integer, "hittingMeanContinuous": cont}
    art.json(".json", out)
    return f"distance chain N={N} c={c:g}: levels 0..{cap}"


def _max_process(cfg, tb, art):
    n = cfg.params["n"]
    levels = cfg.params.get("levels", 16)
    Q = dc.max_matrix(tb).power(n, levels)
    c = tb.spec.geometric_c
    closed = dc.max_matrix_n(tb.N, c, n, levels) if c is not None else None
    rows = []
    for i in range(levels):
        for j in range(i, levels):
            rows.append((i, j, Q[i, j], math.nan if closed is None else closed[i, j]))
    art.tsv(".tsv", f"{n}-step kernel of the running maximum", ["i", "j", "matrix_power", "closed_form"], rows)
    diff = float(np.max(np.abs(Q - closed))) if closed is not None else math.nan
    return f"max process n={n}: max |power - closed| = {diff:.3g}"


def _timescale(cfg, tb, art):
    p = cfg.params
    rep = dc.timescale_probability(tb.N, p["eta"], p["mu"], p["j"])
    art.json(".json", rep.__dict__)
    return f"timescale n={rep.n}: P[Z*=j]={rep.prob_equal_j:.6g} vs e^(-eta^j)={rep.limit_in_N_at_j:.6g}"


def _simulate(cfg, tb, art):
    p = cfg.params
    conf = mc.SimConfig(cfg.seed, p["replicas"], p["horizon"], p.get("scheme", "discrete"),
                        threads=cfg.threads)
    res = mc.simulate(tb, conf, p.get("times"))
    cols = res.times if res.times is not None else range(res.distances.shape[1])
    names = [f"t={t!r}" if res.times is not None else f"n={t}" for t in cols]
    lines = [",".join(["replica", *names])]
    lines += [",".join([str(k), *map(str, row.tolist())]) for k, row in enumerate(res.distances)]
    art.write(".csv", "\n".join(lines) + "\n")
    final = res.distances[:, -1]
    art.json(".json", mc.summary(tb.spec, conf, overflowFraction=float((final < 0).mean()),
                                 finalDistance=mc.EmpiricalStats.from_samples(final[final >= 0]).to_json()))
    return f"simulated {conf.replicas} paths: mean final distance {final[final >= 0].mean():.4f}"


def _occupation(cfg, tb, art):
    p = cfg.params
    conf = mc.SimConfig(cfg.seed, p["replicas"], p["t"], "continuous", threads=cfg.threads)
    F = _parse_F(tb.N, p.get("F"))
    rep = mc.occupation_statistic(tb, F, p["t"], conf)
    art.write(".csv", mc.samples_csv({"statistic": rep.samples}))
    art.json(".json", mc.summary(tb.spec, conf, **rep.to_json()))
    return f"occupation t={p['t']:g}: KS vs Exp(1) = {rep.ks:.4f}"


_RUNNERS: dict[str, Callable] = {
    "kernel-table": _kernel_table,
    "transition": _transition,
    "degree": _degree,
    "green": _green,
    "incomplete-sweep": _incomplete_sweep,
    "asymptotic-benchmark": _asymptotic_benchmark,
    "last-exit": _last_exit,
    "return-tail": _return_tail,
    "chain-analytics": _chain_analytics,
    "max-process": _max_process,
    "timescale": _timescale,
    "simulate": _simulate,
    "occupation": _occupation,
}


def run(config: ExperimentConfig, out_dir: str = "out", quiet: bool = False) -> int:
    diags = validate(config)
    if diags:
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INVALID
    eps = config.params.get("eps", kn.DEFAULT_EPS) if config.experiment == "kernel-table" else kn.DEFAULT_EPS
    art = Artifacts(out_dir, config.prefix or config.experiment)
    try:
        tb = kn.build_tables(config.spec, eps)
        line = _RUNNERS[config.experiment](config, tb, art)
    except CertificateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except pot.SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (kn.KernelError, pot.UnsupportedSpecError, mc.RefusedError, dc.DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not quiet:
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hrw", description="Hierarchical random walk experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="experiment config (JSON)")
    ap.add_argument("--out", default="./out", help="output directory (default ./out)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--threads", type=int, default=0, help="worker threads, 0 = all cores")
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not isinstance(obj, dict):
        print("error: config must be a JSON object", file=sys.stderr)
        return EXIT_INVALID
    declared = obj.get("experiment")
    if declared is not None and declared != args.experiment:
        print(f"error: config declares experiment {declared!r}", file=sys.stderr)
        return EXIT_INVALID
    cfg = ExperimentConfig.from_json(args.experiment, obj)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return EXIT_INVALID
    cfg.threads = args.threads
    return run(cfg, args.out, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
