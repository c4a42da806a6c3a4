"""Command-line entry point.

Subcommands: ``fit``, ``sample-gaussian``, ``bench``, ``diagnose`` and
``oracle``.  Settings come from an optional JSON file (``--config``, which
may also be a previous run's ``manifest.json``) and command-line flags, with
flags taking precedence.  Exit status is 0 on success, 2 on configuration or
input errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .bench import DEFAULT_MEMORY_LIMIT, run_bench, speedups, write_bench
from .data import parse_dataset
from .diagnostics import ChainTrace, ess_report
from .errors import ConfigError, NumericalError
from .gaussian import StructuredGaussianTarget, sample
from .gibbs import GibbsConfig, run_gibbs
from .kernels import HMCConfig, ShrinkagePosterior, run_chain
from .linalg import read_dense_csv, read_matrix_market
from .oracles import best_subset_brute, ridge_fit, score_statistic, spike_slab_enumerate
from .rng import chain_seed_sequences, describe_stream, make_rng

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

RUN_DEFAULTS = {
    "algorithm": "gibbs",
    "family": "gaussian",
    "format": "csv",
    "response": "y",
    "response_file": None,
    "data": None,
    "chains": 1,
    "seed": 0,
    "threads": 1,
    "workers": 1,
    "out": None,
    "gibbs": {},
    "hmc": {},
}


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config):
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config(path):
    """Read a JSON config; a run manifest is accepted and its ``config`` entry used."""
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{p}: config file not found")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: expected a JSON object at top level")
    if "config" in cfg and "config_hash" in cfg:
        cfg = cfg["config"]
    return cfg


def resolve_run_config(file_cfg, overrides):
    """Merge defaults, file settings and flag overrides (flags win)."""
    cfg = json.loads(json.dumps(RUN_DEFAULTS))
    unknown = sorted(set(file_cfg) - set(cfg) - {"command"})
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key, val in file_cfg.items():
        if key in ("gibbs", "hmc"):
            cfg[key].update(val)
        elif key != "command":
            cfg[key] = val
    for key, val in overrides.items():
        if val is None:
            continue
        if key.startswith("gibbs.") or key.startswith("hmc."):
            block, name = key.split(".", 1)
            cfg[block][name] = val
        else:
            cfg[key] = val
    if cfg["chains"] < 1:
        raise ConfigError(f"chains must be at least 1, got {cfg['chains']}")
    if cfg["threads"] < 1 or cfg["workers"] < 1:
        raise ConfigError("threads and workers must be at least 1")
    if cfg["algorithm"] not in ("gibbs", "hmc"):
        raise ConfigError(f"unknown algorithm {cfg['algorithm']!r}; choose gibbs or hmc")
    if cfg["data"] is None:
        raise ConfigError("no dataset given (--data or 'data' in the config)")
    if not Path(cfg["data"]).exists():
        raise ConfigError(f"{cfg['data']}: dataset not found")
    if cfg["out"] is None:
        raise ConfigError("no output directory given (--out or 'out' in the config)")
    if not 0 <= int(cfg["seed"]) < 2 ** 64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {cfg['seed']}")
    cfg["data"] = str(Path(cfg["data"]).resolve())
    if cfg["response_file"] is not None:
        cfg["response_file"] = str(Path(cfg["response_file"]).resolve())
    GibbsConfig.from_dict(cfg["gibbs"])
    HMCConfig(**cfg["hmc"])
    return cfg


def _run_one_chain(args):
    cfg, index = args
    ss = chain_seed_sequences(int(cfg["seed"]), cfg["chains"])[index]
    data = parse_dataset(cfg["data"], cfg["format"], cfg["response"], cfg["family"],
                         cfg["response_file"])
    rng = make_rng(ss)
    with threadpool_limits(limits=cfg["threads"]):
        if cfg["algorithm"] == "gibbs":
            gcfg = GibbsConfig.from_dict({**cfg["gibbs"], "seed": int(cfg["seed"])})
            trace = run_gibbs(data, gcfg, rng=rng)
            trace.meta.pop("final_state", None)
        else:
            g = GibbsConfig.from_dict(cfg["gibbs"])
            hcfg = HMCConfig(**cfg["hmc"])
            target = ShrinkagePosterior(data.X, data.y, data.family, sigma2=g.fixed_sigma2,
                                        tau_scale=g.tau_scale, sigma2_shape=g.sigma2_shape,
                                        sigma2_rate=g.sigma2_rate, intercept=g.intercept)
            trace = run_chain(target, "hmc", hcfg, g.samples, rng, warmup=g.warmup)
    return trace


def fit(cfg):
    """Run every chain, write traces, timings, ESS report and manifest; return the manifest."""
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"{out}: cannot create output directory ({exc.strerror})") from None
    t0 = time.perf_counter()
    jobs = [(cfg, i) for i in range(cfg["chains"])]
    if cfg["workers"] > 1 and cfg["chains"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            traces = list(pool.map(_run_one_chain, jobs))
    else:
        traces = [_run_one_chain(j) for j in jobs]
    wall = time.perf_counter() - t0

    chains = []
    for i, (trace, ss) in enumerate(zip(traces, chain_seed_sequences(int(cfg["seed"]),
                                                                     cfg["chains"]))):
        trace_path = out / f"chain_{i}.csv"
        timing_path = out / f"chain_{i}_timing.csv"
        trace.to_csv(trace_path)
        trace.timings_to_csv(timing_path)
        entry = {
            "index": i,
            "stream": describe_stream(ss),
            "trace": trace_path.name,
            "trace_sha256": _sha256(trace_path),
            "timing": timing_path.name,
            "sampling_seconds": trace.total_seconds,
        }
        if "cg_iterations" in trace.meta:
            entry["cg_iterations_per_sweep"] = np.asarray(trace.meta["cg_iterations"]).tolist()
            entry["cg_nonconverged"] = int(trace.meta.get("cg_nonconverged", 0))
        if "acceptance_rate" in trace.meta:
            entry["acceptance_rate"] = trace.meta["acceptance_rate"]
            entry["divergences"] = trace.meta["divergences"]
        chains.append(entry)
    report = ess_report(traces)
    report.to_json(out / "ess_report.json")
    manifest = {
        "command": "fit",
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": int(cfg["seed"]),
        "seed_expansion": "SeedSequence(seed, spawn_key=(chain,)) -> Philox",
        "chains": chains,
        "versions": _versions(),
        "wall_clock_seconds": wall,
        "ess_report": "ess_report.json",
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _versions():
    return {
        "cgshrink": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _read_vector(path):
    m = read_dense_csv(path).array
    if 1 not in m.shape:
        raise ConfigError(f"{path}: expected a single row or column, got shape {m.shape}")
    return m.ravel()


def _read_design(path):
    return read_matrix_market(path) if str(path).endswith(".mtx") else read_dense_csv(path)


def _vector_or_scalar(value, size, name):
    if value is None:
        return np.ones(size)
    try:
        return np.full(size, float(value))
    except ValueError:
        v = _read_vector(value)
        if v.size != size:
            raise ConfigError(f"{value}: {name} has {v.size} entries, expected {size}") from None
        return v


def cmd_fit(args):
    overrides = {
        "data": args.data, "format": args.format, "response": args.response,
        "response_file": args.response_file, "family": args.family, "chains": args.chains,
        "seed": args.seed, "threads": args.threads, "workers": args.workers, "out": args.out,
        "algorithm": args.algorithm,
        "gibbs.sampler": args.sampler, "gibbs.preconditioner": args.preconditioner,
        "gibbs.warmup": args.warmup, "gibbs.samples": args.samples,
        "gibbs.cg_rel_tol": args.cg_rel_tol, "gibbs.standardize": args.standardize,
        "gibbs.intercept": args.intercept, "gibbs.record_scales": args.record_scales,
        "hmc.step_size": args.step_size, "hmc.n_steps": args.n_steps, "hmc.mass": args.mass,
        "hmc.adapt_every": args.adapt_every, "hmc.jitter": args.jitter,
    }
    cfg = resolve_run_config(load_config(args.config), overrides)
    manifest = fit(cfg)
    report = json.loads((Path(cfg["out"]) / "ess_report.json").read_text())
    print(f"wrote {cfg['chains']} chain(s) to {cfg['out']}; "
          f"min ESS {report['min_ess']:.1f}, min ESS/s {report['min_ess_per_second']:.1f}, "
          f"wall-clock {manifest['wall_clock_seconds']:.2f}s")


def cmd_sample_gaussian(args):
    X = _read_design(args.design)
    n, p = X.shape
    y = _read_vector(args.y) if args.y else np.zeros(n)
    if y.size != n:
        raise ConfigError(f"{args.y}: response has {y.size} entries, design has {n} rows")
    lam = _vector_or_scalar(args.lam, p, "lambda")
    omega = _vector_or_scalar(args.omega, n, "omega")
    target = StructuredGaussianTarget(X, omega, y, args.tau, lam)
    rng = make_rng(args.seed)
    draws = np.empty((args.draws, p))
    iters = []
    t0 = time.perf_counter()
    with threadpool_limits(limits=args.threads):
        for s in range(args.draws):
            kw = {"precond": args.preconditioner, "rel_tol": args.rel_tol} if args.method == "cg" else {}
            draws[s], rep = sample(target, rng, args.method, **kw)
            if rep is not None:
                iters.append(rep.iterations)
    seconds = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ChainTrace([f"theta_{j + 1}" for j in range(p)], draws, np.full(args.draws, seconds / args.draws)
               ).to_csv(out / "draws.csv")
    summary = {"method": args.method, "draws": args.draws, "seconds_per_draw": seconds / args.draws,
               "mean": draws.mean(axis=0).tolist(), "seed": args.seed}
    if iters:
        summary["cg_iterations"] = iters
    _write_json(out / "summary.json", summary)
    print(f"{args.draws} draws via {args.method} in {seconds:.3f}s -> {out / 'draws.csv'}")


def _parse_grid(text):
    grid = []
    for item in text.split(","):
        parts = item.lower().split("x")
        if len(parts) != 3:
            raise ConfigError(f"grid point {item!r} must look like NxPxK, e.g. 1000x2000x20")
        try:
            grid.append(tuple(int(v) for v in parts))
        except ValueError:
            raise ConfigError(f"grid point {item!r} has a non-integer entry") from None
    return grid


def cmd_bench(args):
    file_cfg = load_config(args.config)
    grid = _parse_grid(args.grid) if args.grid else [tuple(g) for g in file_cfg.get("grid", [])]
    if not grid:
        raise ConfigError("no benchmark grid given (--grid or 'grid' in the config)")
    threads = ([int(t) for t in args.threads.split(",")] if args.threads
               else file_cfg.get("threads", [1]))
    samplers = args.samplers.split(",") if args.samplers else file_cfg.get(
        "samplers", ["direct", "bhattacharya", "cg"])
    draws = args.draws or file_cfg.get("draws", 3)
    rows = run_bench(grid, threads, samplers, draws, seed=args.seed,
                     memory_limit=args.memory_limit)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_bench(rows, out / "bench.json", out / "bench.csv")
    for r in rows:
        extra = f", {r.cg_iterations:.1f} CG iterations" if r.sampler == "cg" else ""
        print(f"N={r.n} P={r.p} K={r.k} threads={r.threads} {r.sampler}: "
              f"{1e3 * r.seconds_per_draw:.2f} ms/draw{extra}")
    for key, ratio in speedups(rows).items():
        print(f"N={key[0]} P={key[1]} K={key[2]} threads={key[3]}: direct/cg = {ratio:.1f}x")


def cmd_diagnose(args):
    traces = []
    for i, path in enumerate(args.traces):
        timing = None
        if args.timings:
            if len(args.timings) != len(args.traces):
                raise ConfigError(f"{len(args.timings)} timing files for {len(args.traces)} traces")
            timing = args.timings[i]
        if not Path(path).exists():
            raise ConfigError(f"{path}: trace file not found")
        traces.append(ChainTrace.from_csv(path, timing))
    names = traces[0].names
    for path, t in zip(args.traces, traces):
        if t.names != names:
            raise ConfigError(f"{path}: columns differ from {args.traces[0]}")
    report = ess_report(traces, names=args.params.split(",") if args.params else None)
    text = report.to_json(args.out)
    if args.csv:
        report.to_csv(args.csv)
    print(text if args.out is None else f"wrote {args.out}")


def cmd_oracle(args):
    result = {"oracle": args.kind}
    if args.kind == "score":
        if not (args.information and args.score):
            raise ConfigError("the score oracle needs --information and --score")
        info = _read_design(args.information)
        res = score_statistic(info, _read_vector(args.score))
        result.update(res.to_dict())
    else:
        if args.data is None:
            raise ConfigError(f"the {args.kind} oracle needs --data")
        ds = parse_dataset(args.data, args.format, args.response, "gaussian", args.response_file)
        if args.kind == "ridge":
            result["coef"] = ridge_fit(ds.X, ds.y, args.penalty).tolist()
        elif args.kind == "best-subset":
            result.update(best_subset_brute(ds.X, ds.y, args.k, args.allow_large).to_dict())
        else:
            res = spike_slab_enumerate(ds.X, ds.y, args.inclusion_prob, args.slab_scale,
                                       args.sigma2, args.allow_large)
            result.update(res.to_dict())
        result["names"] = ds.names
    text = json.dumps(result, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)


def build_parser():
    ap = argparse.ArgumentParser(prog="cgshrink", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"cgshrink {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="run shrinkage-regression chains on a dataset")
    f.add_argument("--config", help="JSON config or a previous manifest.json")
    f.add_argument("--data", help="CSV with header, or MatrixMarket design (.mtx)")
    f.add_argument("--format", choices=["csv", "mtx"])
    f.add_argument("--response", help="response column name")
    f.add_argument("--response-file", help="response CSV for MatrixMarket designs")
    f.add_argument("--family", choices=["gaussian", "binomial"])
    f.add_argument("--algorithm", choices=["gibbs", "hmc"])
    f.add_argument("--chains", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--threads", type=int, help="BLAS thread budget per chain")
    f.add_argument("--workers", type=int, help="chains run in parallel processes")
    f.add_argument("--out", help="output directory")
    f.add_argument("--sampler", choices=["direct", "bhattacharya", "cg"])
    f.add_argument("--preconditioner", choices=["prior", "jacobi", "identity"])
    f.add_argument("--warmup", type=int)
    f.add_argument("--samples", type=int)
    f.add_argument("--cg-rel-tol", type=float)
    f.add_argument("--standardize", action="store_true", default=None)
    f.add_argument("--intercept", action="store_true", default=None)
    f.add_argument("--record-scales", action="store_true", default=None)
    f.add_argument("--step-size", type=float)
    f.add_argument("--n-steps", type=int)
    f.add_argument("--mass", choices=["identity", "adaptive"])
    f.add_argument("--adapt-every", type=int)
    f.add_argument("--jitter", type=float)
    f.set_defaults(func=cmd_fit)

    g = sub.add_parser("sample-gaussian", help="draw from a structured Gaussian conditional")
    g.add_argument("--design", required=True, help="headerless CSV or MatrixMarket (.mtx)")
    g.add_argument("--y", help="response vector CSV (default zeros)")
    g.add_argument("--tau", type=float, default=1.0)
    g.add_argument("--lam", default=None, help="scalar or vector CSV (default 1)")
    g.add_argument("--omega", default=None, help="scalar or vector CSV (default 1)")
    g.add_argument("--method", choices=["direct", "bhattacharya", "cg"], default="cg")
    g.add_argument("--preconditioner", choices=["prior", "jacobi", "identity"], default="prior")
    g.add_argument("--rel-tol", type=float, default=1e-10)
    g.add_argument("--draws", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_sample_gaussian)

    b = sub.add_parser("bench", help="time the Gaussian samplers over a size grid")
    b.add_argument("--config")
    b.add_argument("--grid", help="comma-separated NxPxK points, e.g. 500x500x10,1000x2000x20")
    b.add_argument("--threads", help="comma-separated thread counts, e.g. 1,4")
    b.add_argument("--samplers", help="comma-separated subset of direct,bhattacharya,cg")
    b.add_argument("--draws", type=int)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--memory-limit", type=int, default=DEFAULT_MEMORY_LIMIT,
                   help="bytes; grid points estimated above this are refused")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("diagnose", help="ESS and ESS/s for trace CSVs")
    d.add_argument("traces", nargs="+", help="chain trace CSVs (one per chain)")
    d.add_argument("--timings", nargs="+", help="matching *_timing.csv files")
    d.add_argument("--params", help="comma-separated parameter subset")
    d.add_argument("--out", help="write the report JSON here")
    d.add_argument("--csv", help="also write per-parameter ESS as CSV")
    d.set_defaults(func=cmd_diagnose)

    o = sub.add_parser("oracle", help="exact reference computations")
    o.add_argument("kind", choices=["ridge", "best-subset", "spike-slab", "score"])
    o.add_argument("--data")
    o.add_argument("--format", choices=["csv", "mtx"], default="csv")
    o.add_argument("--response", default="y")
    o.add_argument("--response-file")
    o.add_argument("--penalty", type=float, default=1.0)
    o.add_argument("--k", type=int, default=3)
    o.add_argument("--inclusion-prob", type=float, default=0.5)
    o.add_argument("--slab-scale", type=float, default=1.0)
    o.add_argument("--sigma2", type=float, default=1.0)
    o.add_argument("--allow-large", action="store_true",
                   help="I understand enumeration is exponential in P; lift the size guard")
    o.add_argument("--information", help="Fisher information (CSV or .mtx)")
    o.add_argument("--score", help="score vector CSV")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
