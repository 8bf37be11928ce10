"""Command-line front end: ``kcluster {gen,test,verify,calibrate,spectra,bench,replay}``.

Every record is one JSON object per line and embeds the schema version,
tool version, resolved configuration, seed, query count and wall time.

Exit codes: 0 ran to completion, 1 an asserted invariant failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import DECLARED_PRACTICAL, k_cluster_test, oracle_cluster_test, practical_params, theory_params, TestParams
from .corpus import calibration_corpus, load_corpus
from .errors import CapacityError, KClusterError
from .generators import (
    ClusterInstance,
    dumbbell,
    far_instance_disjoint,
    low_conductance_family,
    planted_clusterable,
    random_regular_expander,
)
from .graph import BoundedDegreeGraph, VertexSet, load_edgelist
from .spectral import (
    EIGEN_CAP,
    RHO_CAP,
    SPECTRAL_TOL,
    cheeger_check,
    eigengap_report,
    eigensolve,
    rho_k_bruteforce,
    verify_spectral_facts,
)

SCHEMA_VERSION = 1
CONSTANT_KEYS = tuple(DECLARED_PRACTICAL) + ("closeness_c",)
DEFAULTS = {"seed": 0, "trials": 1, "mode": "practical", "k": 2, "epsilon": 0.5, "phi": 0.4, "workers": 1}


class UsageError(Exception):
    """Configuration or usage problem (exit code 2)."""


# ---------------------------------------------------------------------------
# configuration


def read_config(path: str | None) -> dict:
    """Flat ``key = value`` settings from the ``[kcluster]`` section (or file defaults)."""
    if not path:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not text.lstrip().startswith("["):
        text = "[kcluster]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"config {path}: {exc}") from None
    section = cp["kcluster"] if cp.has_section("kcluster") else cp.defaults()
    return {k: _parse_value(v) for k, v in section.items()}


def _parse_value(v: str):
    v = v.strip()
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    if "," in v:
        return [_parse_value(x) for x in v.split(",") if x.strip()]
    return v


def resolve(args: argparse.Namespace, keys) -> dict:
    """Flags > config file > defaults."""
    cfg = dict(DEFAULTS)
    cfg.update(read_config(getattr(args, "config", None)))
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        cfg[key.strip()] = _parse_value(val)
    if not isinstance(cfg.get("seed"), int) or cfg["seed"] < 0:
        raise UsageError(f"field 'seed': expected a non-negative integer, got {cfg.get('seed')!r}")
    return cfg


def constants_from(cfg: dict) -> dict:
    return {k: float(cfg[k]) for k in CONSTANT_KEYS if k in cfg}


def build_params(g: BoundedDegreeGraph, cfg: dict) -> TestParams:
    if cfg["mode"] == "theory":
        return theory_params(g.n, g.d, int(cfg["k"]), float(cfg["epsilon"]), float(cfg["phi"]), constants_from(cfg))
    if cfg["mode"] != "practical":
        raise UsageError(f"field 'mode': expected theory or practical, got {cfg['mode']!r}")
    return practical_params(g.n, g.d, int(cfg["k"]), float(cfg["epsilon"]), float(cfg["phi"]), constants_from(cfg))


def record(command: str, cfg: dict, **fields) -> dict:
    return {"schema_version": SCHEMA_VERSION, "tool": "kcluster", "version": __version__,
            "command": command, "config": cfg, **fields}


class Output:
    def __init__(self, path: str | None):
        self.fh = open(path, "w") if path else sys.stdout

    def write(self, rec: dict) -> None:
        self.fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self.fh.flush()

    def close(self) -> None:
        if self.fh is not sys.stdout:
            self.fh.close()


def _instance_paths(path: str) -> tuple[Path, Path | None]:
    p = Path(path)
    edges = p if p.suffix == ".edges" else p.with_suffix(".edges")
    if not edges.exists():
        if p.exists():
            edges = p
        else:
            raise UsageError(f"instance {path} not found")
    side = edges.with_suffix(".json")
    return edges, side if side.exists() else None


def load_graph(path: str) -> BoundedDegreeGraph:
    edges, _ = _instance_paths(path)
    return load_edgelist(edges)


# ---------------------------------------------------------------------------
# gen


def _ints(v) -> list[int]:
    if isinstance(v, list):
        return [int(x) for x in v]
    if isinstance(v, int):
        return [v]
    return [int(x) for x in str(v).split(",") if x]


def cmd_gen(args) -> int:
    cfg = resolve(args, ["kind", "seed", "d", "sizes", "cross_edges", "k_plus", "size", "half", "cut_edges", "n", "out"])
    kind = cfg.get("kind")
    if "out" not in cfg:
        raise UsageError("field 'out': an output stem is required")
    seed = cfg["seed"]
    try:
        if kind == "planted":
            inst = planted_clusterable(_ints(cfg["sizes"]), int(cfg["d"]), int(cfg.get("cross_edges", 0)), seed)
        elif kind == "far":
            inst = far_instance_disjoint(int(cfg["k_plus"]), int(cfg["size"]), int(cfg["d"]), seed)
        elif kind == "dumbbell":
            inst = dumbbell(int(cfg["half"]), int(cfg["d"]), int(cfg["cut_edges"]), seed)
        elif kind == "regular":
            g = random_regular_expander(int(cfg["n"]), int(cfg["d"]), seed)
            inst = ClusterInstance(g, [VertexSet(g.n, tuple(range(g.n)))], {"kind": "regular"}, seed)
        elif kind in ("path", "cycle", "grid"):
            g = low_conductance_family(kind, int(cfg["n"]))
            inst = ClusterInstance(g, [VertexSet(g.n, tuple(range(g.n)))], {"kind": kind}, seed)
        else:
            raise UsageError(f"field 'kind': expected planted, far, dumbbell, regular, path, cycle or grid, got {kind!r}")
    except KeyError as exc:
        raise UsageError(f"field {exc.args[0]!r}: required for kind {kind!r}") from None
    except KClusterError as exc:
        raise UsageError(f"field spec for kind {kind!r}: {exc}") from None
    edges, meta = inst.save(cfg["out"])
    print(json.dumps(record("gen", cfg, files=[str(edges), str(meta)], n=inst.graph.n, d=inst.graph.d,
                            parts=len(inst.parts), seed=seed)))
    return 0


# ---------------------------------------------------------------------------
# test / replay


def _run_trial(job):
    g, params, seed, oracle = job
    rep = oracle_cluster_test(g, params, seed) if oracle else k_cluster_test(g, params, seed)
    return rep.to_dict()


def run_trials(g, params, seeds, oracle=False, workers=1):
    jobs = [(g, params, s, oracle) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_run_trial, jobs))  # map keeps trial order
    return [_run_trial(j) for j in jobs]


def cmd_test(args) -> int:
    cfg = resolve(args, ["instance", "seed", "trials", "mode", "k", "epsilon", "phi", "oracle", "workers", "out"])
    cfg["oracle"] = bool(cfg.get("oracle", False))
    g = load_graph(cfg["instance"])
    params = build_params(g, cfg)
    trials = 1 if cfg["oracle"] else int(cfg["trials"])
    seeds = [cfg["seed"] + i for i in range(trials)]
    try:
        reports = run_trials(g, params, seeds, cfg["oracle"], int(cfg["workers"]))
    except CapacityError as exc:
        raise UsageError(f"parameters infeasible for this instance: {exc}") from None
    out = Output(cfg.get("out"))
    accepted = 0
    for i, (seed, rep) in enumerate(zip(seeds, reports)):
        accepted += rep["verdict"] == "accept"
        out.write(record("test", cfg, trial=i, seed=seed, verdict=rep["verdict"], queries=rep["queries"],
                         wall_time=rep["wall_time"], report=rep))
    out.close()
    print(f"accept fraction {accepted}/{trials} = {accepted / trials:.3f}", file=sys.stderr)
    return 0


def replay_record(rec: dict) -> dict:
    """Re-run a ``test`` record from its embedded seed and configuration."""
    cfg = rec["config"]
    g = load_graph(cfg["instance"])
    params = TestParams.from_dict(rec["report"]["params"])
    fn = oracle_cluster_test if cfg.get("oracle") else k_cluster_test
    return fn(g, params, rec["seed"]).to_dict()


def cmd_replay(args) -> int:
    bad = 0
    total = 0
    for line in Path(args.records).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        rep = replay_record(rec)
        same = rep["verdict"] == rec["verdict"] and rep["queries"] == rec["queries"]
        total += 1
        bad += not same
        print(json.dumps({"trial": rec.get("trial"), "seed": rec["seed"], "reproduced": same}))
    print(f"reproduced {total - bad}/{total}", file=sys.stderr)
    return 1 if bad else 0


# ---------------------------------------------------------------------------
# verify / spectra


def audit_instance(path: Path, tol: float, vertices: int = 3, t: int = 25) -> dict:
    g = load_edgelist(path)
    side = path.with_suffix(".json")
    rec = {"instance": str(path), "n": g.n, "d": g.d, "failed": [], "skipped": []}
    ncomp, _ = g.component_labels()
    if g.n > EIGEN_CAP:
        rec["skipped"].append(f"spectral: n={g.n} above dense cap {EIGEN_CAP}")
        return rec
    rep = eigensolve(g)
    rec["residuals"] = rep.residuals
    if max(rep.residuals.values()) > tol:
        rec["failed"].append("eigen_residual")
    rec["zero_multiplicity"] = rep.zero_multiplicity()
    rec["components"] = int(ncomp)
    if rep.zero_multiplicity() != ncomp:
        rec["failed"].append("zero_multiplicity")
    facts = [verify_spectral_facts(g, rep, int(v), t, tol)
             for v in np.linspace(0, g.n - 1, min(vertices, g.n)).astype(int)]
    rec["spectral_facts_max"] = max(max(f[k] for k in ("indicator_expansion", "row_norm", "walk_expansion")) for f in facts)
    if not all(f["holds"] for f in facts):
        rec["failed"].append("spectral_facts")
    ch = cheeger_check(g)
    rec["cheeger"] = ch.to_dict()
    if not ch.holds:
        rec["failed"].append("cheeger")
    if g.n <= RHO_CAP:
        rec["rho"] = {}
        for k in (2, 3):
            if k <= g.n:
                rho = rho_k_bruteforce(g, k)
                ok = rep.eigenvalues[k - 1] / 2 <= float(rho) + 1e-9
                rec["rho"][k] = {"rho": str(rho), "lambda_k": float(rep.eigenvalues[k - 1]), "holds": bool(ok)}
                if not ok:
                    rec["failed"].append(f"higher_order_cheeger_k{k}")
    if side.exists():
        inst = ClusterInstance.load(path.with_suffix(""))
        if len(inst.parts) > 1 and "phi_out" in inst.design:
            recorded = [Fraction(x) for x in inst.design["phi_out"]]
            if recorded != inst.realized_phi_out():
                rec["failed"].append("recorded_phi_out")
            gap = eigengap_report(inst)
            rec["eigengap"] = gap
            if not gap["holds"]:
                rec["failed"].append("eigengap")
    return rec


def cmd_verify(args) -> int:
    cfg = resolve(args, ["corpus", "out"])
    tol = float(cfg.get("eigen_tol", SPECTRAL_TOL))
    corpus = Path(cfg["corpus"])
    if not corpus.is_dir():
        raise UsageError(f"field 'corpus': {corpus} is not a directory")
    files = sorted(corpus.glob("*.edges"))
    if not files:
        print("warning: empty corpus, nothing to verify", file=sys.stderr)
        return 0
    out = Output(cfg.get("out"))
    failed = 0
    for path in files:
        t0 = time.perf_counter()
        rec = audit_instance(path, tol)
        failed += bool(rec["failed"])
        out.write(record("verify", cfg, seed=cfg["seed"], queries=0, wall_time=time.perf_counter() - t0, audit=rec))
        for name in rec["failed"]:
            print(f"invariant failed: {name} on {path.name}", file=sys.stderr)
    out.close()
    return 1 if failed else 0


def cmd_spectra(args) -> int:
    cfg = resolve(args, ["instance", "out", "vectors"])
    g = load_graph(cfg["instance"])
    t0 = time.perf_counter()
    try:
        rep = eigensolve(g)
    except CapacityError as exc:
        raise UsageError(str(exc)) from None
    out = Output(cfg.get("out"))
    out.write(record("spectra", cfg, seed=cfg["seed"], queries=0, wall_time=time.perf_counter() - t0,
                     spectrum=rep.to_dict(bool(cfg.get("vectors")))))
    out.close()
    return 0


# ---------------------------------------------------------------------------
# calibrate


DEFAULT_GRID = {"c_r": [1.0, 2.0, 4.0], "c_median": [0.3, 0.5], "c_ell": [0.5, 1.0]}


def default_defaults_path() -> Path:
    return Path(__file__).parent / "data" / "practical_defaults.json"


def evaluate_setting(entries, constants: dict, trials: int, seed: int, phi: float, epsilon: float) -> dict:
    rows = []
    for e in entries:
        g = e.graph
        p = practical_params(g.n, g.d, e.k, epsilon, phi, constants, calibrated=False)
        good = queries = 0
        for i in range(trials):
            rep = k_cluster_test(g, p, seed + i)
            good += rep.accepted == e.expect_accept
            queries += rep.queries
        rows.append({"instance": e.name, "expect_accept": e.expect_accept, "correct_rate": good / trials,
                     "mean_queries": queries / trials})
    acc = [r["correct_rate"] for r in rows if r["expect_accept"]]
    rej = [r["correct_rate"] for r in rows if not r["expect_accept"]]
    return {
        "constants": constants,
        "accept_rate": min(acc) if acc else 1.0,
        "reject_rate": min(rej) if rej else 1.0,
        "mean_queries": float(np.mean([r["mean_queries"] for r in rows])),
        "instances": rows,
    }


def cmd_calibrate(args) -> int:
    cfg = resolve(args, ["seed", "trials", "mode", "corpus", "out", "phi", "epsilon", "k"])
    target = float(cfg.get("target_rate", 0.9))
    if cfg["mode"] == "theory":
        n = int(cfg.get("n", 4096))
        budget = int(cfg.get("s_budget", 1000))
        p = theory_params(n, int(cfg.get("d", 8)), int(cfg["k"]), float(cfg["epsilon"]), float(cfg["phi"]))
        infeasible = p.s > budget
        rep = record("calibrate", cfg, seed=cfg["seed"], queries=0, wall_time=0.0, settings=[
            {"constants": p.constants, "s": p.s, "r": p.r, "ell": p.ell, "infeasible": infeasible,
             "reason": f"s={p.s} exceeds practical budget {budget}" if infeasible else None}],
            recommended=None, success=not infeasible)
        print(json.dumps(rep, sort_keys=True))
        return 1 if infeasible else 0
    grid = {k: v if isinstance(v, list) else [v] for k, v in DEFAULT_GRID.items()}
    for key in CONSTANT_KEYS:
        if key in cfg:
            grid[key] = cfg[key] if isinstance(cfg[key], list) else [cfg[key]]
    entries = load_corpus(cfg["corpus"]) if cfg.get("corpus") else calibration_corpus()
    trials = int(cfg["trials"]) if cfg["trials"] != DEFAULTS["trials"] else 20
    keys = sorted(grid)
    t0 = time.perf_counter()
    results = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        consts = {**{k: float(v) for k, v in DECLARED_PRACTICAL.items()}, **dict(zip(keys, map(float, combo)))}
        res = evaluate_setting(entries, consts, trials, cfg["seed"], float(cfg["phi"]), float(cfg["epsilon"]))
        res["meets_target"] = res["accept_rate"] >= target and res["reject_rate"] >= target
        results.append(res)
        print(json.dumps({k: res[k] for k in ("constants", "accept_rate", "reject_rate", "mean_queries", "meets_target")}),
              file=sys.stderr)
    ok = [r for r in results if r["meets_target"]]
    best = min(ok or results, key=lambda r: (r["mean_queries"] if ok else -(r["accept_rate"] + r["reject_rate"])))
    rep = record("calibrate", cfg, seed=cfg["seed"], queries=int(sum(r["mean_queries"] for r in results)),
                 wall_time=time.perf_counter() - t0, settings=results, recommended=best["constants"],
                 success=bool(ok), target_rate=target, trials=trials)
    out = Output(cfg.get("out"))
    out.write(rep)
    out.close()
    defaults_path = Path(cfg.get("defaults_out", default_defaults_path()))
    if ok:
        defaults_path.parent.mkdir(parents=True, exist_ok=True)
        defaults_path.write_text(json.dumps({
            "constants": best["constants"], "accept_rate": best["accept_rate"],
            "reject_rate": best["reject_rate"], "trials": trials, "seed": cfg["seed"],
            "phi": float(cfg["phi"]), "epsilon": float(cfg["epsilon"]),
        }, indent=1, sort_keys=True) + "\n")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# bench


def loglog_slope(ns, values) -> float:
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def bench_sizes(ns, trials: int, seed: int, k: int = 2, phi: float = 0.4, epsilon: float = 0.5, constants=None):
    rows = []
    for n in ns:
        half = n // 2 + (n // 2) % 2
        inst = planted_clusterable([half] * 2, 8, 10, seed + n, lambda2_floor=None)
        g = inst.graph
        p = practical_params(g.n, g.d, k, epsilon, phi, constants)
        q, wall = [], []
        for i in range(trials):
            rep = k_cluster_test(g, p, seed + i)
            q.append(rep.queries)
            wall.append(rep.wall_time)
        rows.append({"n": g.n, "s": p.s, "ell": p.ell, "r": p.r, "batches": p.batches,
                     "mean_queries": float(np.mean(q)), "mean_wall_time": float(np.mean(wall)),
                     "query_budget": p.query_budget()})
    return rows


def cmd_bench(args) -> int:
    cfg = resolve(args, ["seed", "trials", "k", "phi", "epsilon", "out", "sizes"])
    ns = _ints(cfg.get("sizes", [1000, 10000, 100000]))
    t0 = time.perf_counter()
    rows = bench_sizes(ns, int(cfg["trials"]), cfg["seed"], int(cfg["k"]), float(cfg["phi"]),
                       float(cfg["epsilon"]), constants_from(cfg))
    slope = loglog_slope([r["n"] for r in rows], [r["mean_queries"] for r in rows])
    out = Output(cfg.get("out"))
    out.write(record("bench", cfg, seed=cfg["seed"], queries=int(sum(r["mean_queries"] for r in rows)),
                     wall_time=time.perf_counter() - t0, rows=rows, loglog_slope=slope))
    out.close()
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kcluster", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"kcluster {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--out", help="output path (JSON lines); stdout when omitted")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any setting")
        return p

    g = common(sub.add_parser("gen", help="generate an instance"))
    g.add_argument("kind", nargs="?", choices=["planted", "far", "dumbbell", "regular", "path", "cycle", "grid"])
    g.add_argument("--d", type=int)
    g.add_argument("--sizes", help="comma-separated part sizes (planted)")
    g.add_argument("--cross-edges", dest="cross_edges", type=int)
    g.add_argument("--k-plus", dest="k_plus", type=int)
    g.add_argument("--size", type=int)
    g.add_argument("--half", type=int)
    g.add_argument("--cut-edges", dest="cut_edges", type=int)
    g.add_argument("--n", type=int)
    g.set_defaults(func=cmd_gen)

    t = common(sub.add_parser("test", help="run the cluster tester on an instance"))
    t.add_argument("instance")
    t.add_argument("--trials", type=int)
    t.add_argument("--mode", choices=["theory", "practical"])
    t.add_argument("--k", type=int)
    t.add_argument("--epsilon", type=float)
    t.add_argument("--phi", type=float)
    t.add_argument("--oracle", action="store_true", default=None)
    t.add_argument("--workers", type=int)
    t.set_defaults(func=cmd_test)

    r = sub.add_parser("replay", help="re-run test records and compare verdicts")
    r.add_argument("records")
    r.set_defaults(func=cmd_replay)

    v = common(sub.add_parser("verify", help="audit spectral invariants over a corpus directory"))
    v.add_argument("corpus")
    v.set_defaults(func=cmd_verify)

    c = common(sub.add_parser("calibrate", help="sweep practical-mode constants"))
    c.add_argument("--corpus")
    c.add_argument("--trials", type=int)
    c.add_argument("--mode", choices=["theory", "practical"])
    c.add_argument("--k", type=int)
    c.add_argument("--phi", type=float)
    c.add_argument("--epsilon", type=float)
    c.set_defaults(func=cmd_calibrate)

    s = common(sub.add_parser("spectra", help="dump the spectrum of an instance"))
    s.add_argument("instance")
    s.add_argument("--vectors", action="store_true", default=None)
    s.set_defaults(func=cmd_spectra)

    b = common(sub.add_parser("bench", help="query and time scaling versus n"))
    b.add_argument("--trials", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--phi", type=float)
    b.add_argument("--epsilon", type=float)
    b.add_argument("--sizes", help="comma-separated vertex counts")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KClusterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
