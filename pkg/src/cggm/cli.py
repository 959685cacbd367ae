"""Command line front end: ``cggm fit | simulate | summarize | roc``.

Every option can also be given in a flat ``key=value`` config file
(``--config``); keys use the option names with either dashes or
underscores, and command-line flags override the file. Exit codes are 0 on
success, 2 for invalid input, 3 for a numerical failure and 4 for I/O
errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, io
from .errors import ChainError
from .fitting import (
    default_hyperparameters,
    design_from_meta,
    make_data,
    preprocess,
    run_chains,
    write_roc,
    write_summary,
)
from .graph import DecomposableGraph
from .posterior import roc_curve
from .sampler import Schedule
from .simulate import EFFECTS, SimulationSpec, generate

log = logging.getLogger("cggm")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# --------------------------------------------------------------------------
# configuration

def read_config(path):
    """Flat ``key=value`` file; ``#`` starts a comment. Keys are normalised to snake_case."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value, got {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _int_list(v):
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(x) for x in str(v).replace(" ", "").split(",") if x]


def _float_list(v):
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).replace(",", " ").split()]


def _str_list(v):
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [x for x in str(v).replace(" ", "").split(",") if x]


# option name -> (converter, default); shared by the config file and argparse
_SIM_OPTIONS = {
    "preset": (str, None),
    "n": (int, None),
    "p": (int, None),
    "q": (int, None),
    "support": (_int_list, None),
    "effects": (_str_list, None),
    "edges": (int, None),
    "graph": (str, None),
    "hiw_b": (float, 3.0),
    "random_signs": (_bool, False),
    "sim_seed": (int, None),
}

_FIT_OPTIONS = {
    "y": (str, None),
    "x": (str, None),
    "out": (str, None),
    "g": (float, None),
    "g_rule": (str, "n"),
    "b": (float, 3.0),
    "d": (float, 1.0),
    "delta": (float, 0.5),
    "eta": (float, 0.5),
    "alpha_g": (float, None),
    "knots": (int, 10),
    "knot_values": (_float_list, None),
    "standardize": (str, "zscore"),
    "center_y": (_bool, True),
    "iterations": (int, 100_000),
    "burn_in": (int, 10_000),
    "thin": (int, 1),
    "chains": (int, 1),
    "seed": (int, 0),
    "save_sigma": (_bool, False),
    "ridge": (_bool, False),
    "cutoff": (float, 0.5),
    "truth": (str, None),
    "workers": (int, None),
    "log_every": (int, 0),
    "simulate": (_bool, False),
}


def _merge(options, file_cfg, cli_ns):
    """Defaults < config file < command line, converted with each option's type."""
    unknown = set(file_cfg) - set(options)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = {}
    for key, (conv, default) in options.items():
        v = getattr(cli_ns, key, None)
        if v is None:
            v = file_cfg.get(key)
        if v is None or v == "":
            out[key] = default
            continue
        try:
            out[key] = conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {v!r} ({exc})") from None
    return out


@dataclass
class RunConfig:
    """Everything needed to reproduce a fit; exactly one data source is set."""

    out: Path
    hyper: dict
    schedule: dict
    chains: int = 1
    input_paths: tuple | None = None
    simulation: SimulationSpec | None = None
    knots: int = 10
    knot_values: list | None = None
    standardize: str = "zscore"
    center_y: bool = True
    ridge: bool = False
    cutoff: float = 0.5
    truth: Path | None = None
    workers: int | None = None
    g_rule: str = "n"
    extra: dict = field(default_factory=dict)

    def validate(self):
        if (self.input_paths is None) == (self.simulation is None):
            raise ConfigError("give exactly one of --y/--x input files or a simulation spec")
        if self.input_paths is not None:
            for p in self.input_paths:
                if not Path(p).is_file():
                    raise ConfigError(f"input file not found: {p}")
        if self.truth is not None and not Path(self.truth).is_file():
            raise ConfigError(f"truth file not found: {self.truth}")
        if self.chains < 1:
            raise ConfigError("chains must be at least 1")
        if not 0.0 < self.cutoff < 1.0:
            raise ConfigError("cutoff must lie in (0, 1)")
        if self.standardize not in ("none", "center", "zscore"):
            raise ConfigError("standardize must be one of none, center, zscore")
        if self.g_rule not in ("n", "max_n_p2"):
            raise ConfigError("g-rule must be 'n' or 'max_n_p2'")
        if self.knots < 0:
            raise ConfigError("knots must be non-negative")
        if self.schedule["iterations"] <= self.schedule["burn_in"]:
            raise ConfigError("iterations must exceed burn-in")
        return self


def _simulation_spec(sim):
    if sim["preset"] not in (None, "full"):
        raise ConfigError(f"unknown preset {sim['preset']!r}; the only preset is 'full'")
    if sim["preset"] == "full":
        base = SimulationSpec.full_scale(seed=sim["sim_seed"], target_edges=sim["edges"])
        kw = {k: sim[k] for k in ("n", "p", "q") if sim[k] is not None}
        return _spec_replace(base, kw, sim)
    missing = [k for k in ("n", "p", "q", "support", "effects") if sim[k] is None]
    if missing:
        raise ConfigError(f"simulation needs {', '.join(missing)} (or --preset full)")
    return _spec_replace(None, {}, sim)


def _spec_replace(base, kw, sim):
    graph = None
    q = kw.get("q", sim["q"] if base is None else base.q)
    if sim["graph"]:
        if not Path(sim["graph"]).is_file():
            raise ConfigError(f"graph file not found: {sim['graph']}")
        graph = DecomposableGraph.from_adjacency(io.read_graph_file(sim["graph"], q))
    fields = dict(
        n=kw.get("n", sim["n"] if base is None else base.n),
        p=kw.get("p", sim["p"] if base is None else base.p),
        q=q,
        support=tuple(s - 1 for s in sim["support"]) if sim["support"] else base.support,
        effects=tuple(sim["effects"]) if sim["effects"] else base.effects,
        graph=graph,
        target_edges=sim["edges"] if sim["edges"] is not None else (None if base is None else base.target_edges),
        hiw_b=sim["hiw_b"],
        random_signs=sim["random_signs"],
        seed=sim["sim_seed"],
    )
    try:
        return SimulationSpec(**fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_run_config(args):
    file_cfg = read_config(args.config) if args.config else {}
    fit_keys = {k: v for k, v in file_cfg.items() if k in _FIT_OPTIONS}
    sim_keys = {k: v for k, v in file_cfg.items() if k in _SIM_OPTIONS}
    unknown = set(file_cfg) - set(fit_keys) - set(sim_keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    f = _merge(_FIT_OPTIONS, fit_keys, args)
    s = _merge(_SIM_OPTIONS, sim_keys, args)
    if f["out"] is None:
        raise ConfigError("--out is required")
    use_sim = f["simulate"] or s["preset"] is not None
    has_input = f["y"] is not None or f["x"] is not None
    if has_input and use_sim:
        raise ConfigError("give exactly one of --y/--x input files or a simulation spec")
    if has_input and (f["y"] is None or f["x"] is None):
        raise ConfigError("both --y and --x are required")
    spec = _simulation_spec(s) if use_sim else None
    hyper = {k: f[k] for k in ("g", "b", "d", "delta", "eta", "alpha_g")}
    schedule = {
        "iterations": f["iterations"],
        "burn_in": f["burn_in"],
        "thin": f["thin"],
        "seed": f["seed"],
        "save_sigma": f["save_sigma"],
        "log_every": f["log_every"],
    }
    cfg = RunConfig(
        out=Path(f["out"]),
        hyper=hyper,
        schedule=schedule,
        chains=f["chains"],
        input_paths=(f["y"], f["x"]) if has_input else None,
        simulation=spec,
        knots=f["knots"],
        knot_values=f["knot_values"],
        standardize=f["standardize"],
        center_y=f["center_y"],
        ridge=f["ridge"],
        cutoff=f["cutoff"],
        truth=Path(f["truth"]) if f["truth"] else None,
        workers=f["workers"],
        g_rule=f["g_rule"],
        extra={**{k: v for k, v in s.items() if v is not None}},
    )
    return cfg.validate()


# --------------------------------------------------------------------------
# commands

class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def _load_inputs(y_path, x_path):
    _, Y = io.read_table(y_path)
    _, X = io.read_table(x_path)
    if Y.shape[0] != X.shape[0]:
        raise ConfigError(f"Y has {Y.shape[0]} rows but X has {X.shape[0]}")
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
        raise ConfigError("input contains non-finite values")
    return Y, X


def write_simulation(out, sim):
    out = io.ensure_dir(out)
    n, p = sim.X.shape
    q = sim.Y.shape[1]
    io.write_table(out / "X.csv", [f"x{i + 1}" for i in range(p)], sim.X)
    io.write_table(out / "Y.csv", [f"y{j + 1}" for j in range(q)], sim.Y)
    with open(out / "truth_support.csv", "w") as fh:
        fh.write("predictor\n")
        for s in sorted(sim.support):
            fh.write(f"{s + 1}\n")
    io.write_edge_list(out / "truth_edges.csv", sim.graph.edges)
    io.write_matrix(out / "truth_sigma.csv", sim.sigma)


def cmd_fit(cfg: RunConfig):
    collector = _WarningCollector()
    logging.getLogger("cggm").addHandler(collector)
    try:
        return _fit(cfg, collector)
    finally:
        logging.getLogger("cggm").removeHandler(collector)


def _fit(cfg, collector):
    out = io.ensure_dir(cfg.out)
    truth = None
    if cfg.simulation is not None:
        sim = generate(cfg.simulation)
        write_simulation(out / "data", sim)
        Y, X = sim.Y, sim.X
        truth = sim.graph.adjacency
    else:
        Y, X = _load_inputs(*cfg.input_paths)
    n, p = X.shape
    q = Y.shape[1]
    if cfg.truth is not None:
        truth = io.read_graph_file(cfg.truth, q)
    Xp, Yp = preprocess(X, Y, cfg.standardize, cfg.center_y)
    data = make_data(Xp, Yp, knots=cfg.knot_values, n_knots=cfg.knots, ridge=cfg.ridge)
    knots = data.design.basis.knots
    hyper = default_hyperparameters(n, p, q, g_rule=cfg.g_rule, **dict(cfg.hyper))
    schedule = Schedule(**cfg.schedule)
    results = run_chains(Xp, Yp, knots, hyper, schedule, chains=cfg.chains, ridge=cfg.ridge,
                         workers=cfg.workers, return_errors=True)

    x_lo, x_hi = float(Xp.min()), float(Xp.max())
    traces, failures = [], []
    for c, res in enumerate(results, 1):
        trace = res.trace if isinstance(res, ChainError) else res
        if isinstance(res, ChainError):
            failures.append((c, res))
        io.write_trace(out / f"chain_{c}", trace, data.design,
                       extra_meta={"x_min": x_lo, "x_max": x_hi, "failed": isinstance(res, ChainError),
                                   "g": hyper.g, "b": hyper.b, "d": hyper.d, "delta": hyper.delta,
                                   "eta": hyper.eta, "alpha_g": hyper.alpha_g})
        traces.append(trace)
    if truth is not None:
        io.write_edge_list(out / "truth_edges.csv", zip(*np.nonzero(np.triu(truth, 1))))

    meta = {
        "version": __version__,
        "command": "fit",
        "n": n, "p": p, "q": q,
        "source": "simulation" if cfg.simulation is not None else "files",
        "y": cfg.input_paths[0] if cfg.input_paths else "",
        "x": cfg.input_paths[1] if cfg.input_paths else "",
        "g": hyper.g, "b": hyper.b, "d": hyper.d, "delta": hyper.delta, "eta": hyper.eta, "alpha_g": hyper.alpha_g,
        "g_rule": cfg.g_rule,
        "knots": list(knots), "k": len(knots),
        "standardize": cfg.standardize, "center_y": cfg.center_y, "ridge": cfg.ridge,
        "iterations": schedule.iterations, "burn_in": schedule.burn_in, "thin": schedule.thin,
        "seed": schedule.seed, "chains": cfg.chains,
        "chain_seeds": [t.seed for t in traces],
        "save_sigma": schedule.save_sigma, "cutoff": cfg.cutoff,
        "x_min": x_lo, "x_max": x_hi,
    }
    if cfg.simulation is not None:
        meta.update({f"sim_{k}": v for k, v in cfg.extra.items()})
    io.write_meta(out / "meta", meta)

    if failures:
        lines = [f"chain {c} failed at iteration {e.iteration}: {e}" for c, e in failures]
        _write_report(out, traces, None, collector.messages + lines, hyper)
        for line in lines:
            print(f"error: {line}", file=sys.stderr)
        print(f"partial traces kept in {out}", file=sys.stderr)
        return EXIT_NUMERIC
    if sum(len(t) for t in traces) == 0:
        raise ConfigError("no iterations were recorded")
    summary = write_summary(out / "summary", traces, data.design if schedule.save_sigma else None,
                            cutoff=cfg.cutoff, truth=truth)
    if not summary.selected_is_decomposable:
        log.warning("the thresholded graph at cutoff %.3g is not decomposable", cfg.cutoff)
    _write_report(out, traces, summary, collector.messages, hyper)
    print(f"wrote {out}")
    return EXIT_OK


def _write_report(out, traces, summary, warnings, hyper):
    lines = [f"cggm {__version__} fit report", ""]
    lines.append(f"hyperparameters: g={hyper.g:g} b={hyper.b:g} d={hyper.d:g} delta={hyper.delta:g} "
                 f"eta={hyper.eta:g} alpha_G={hyper.alpha_g:g}")
    for c, t in enumerate(traces, 1):
        cnt = t.counts
        lines.append(
            f"chain {c}: seed {t.seed}, {len(t)} records, gamma acceptance {t.gamma_acceptance_rate:.4f}, "
            f"graph acceptance {t.graph_acceptance_rate:.4f}, rank-deficient proposals {cnt.get('rank_rejections', 0)}, "
            f"non-decomposable proposals {cnt.get('nondecomposable', 0)}"
        )
    if summary is not None:
        sel = np.flatnonzero(summary.incl_prob > summary.cutoff) + 1
        lines.append("")
        lines.append(f"selected predictors (inclusion probability > {summary.cutoff:g}): {sel.tolist()}")
        lines.append(f"selected edges: {int(np.triu(summary.selected_graph, 1).sum())}")
        lines.append(f"selected graph decomposable: {summary.selected_is_decomposable}")
        conv = out / "summary" / "convergence"
        if conv.exists():
            gap = io.read_meta(conv)["max_abs_edge_prob_difference"]
            lines.append(f"max |edge_prob difference| between chains: {float(gap):.4f}")
        roc = out / "summary" / "roc.csv"
        if roc.exists():
            lines.append(f"edge ROC AUC vs truth: {_read_auc(roc):.4f}")
    lines.append("")
    lines.append("warnings:" if warnings else "warnings: none")
    lines += [f"  {w}" for w in warnings]
    (Path(out) / "report.txt").write_text("\n".join(lines) + "\n")


def _read_auc(path):
    with open(path) as fh:
        for line in fh:
            if line.startswith("# auc="):
                return float(line.split("=", 1)[1])
    raise ValueError(f"{path} has no auc line")


def cmd_simulate(args):
    s = _merge(_SIM_OPTIONS, read_config(args.config) if args.config else {}, args)
    if s["preset"] is None and all(s[k] is None for k in ("n", "p", "q")):
        raise ConfigError("give --preset full or --n/--p/--q/--support/--effects")
    spec = _simulation_spec(s)
    sim = generate(spec)
    write_simulation(args.out, sim)
    meta = {"version": __version__, "command": "simulate"}
    meta.update({k: v for k, v in s.items() if v is not None})
    meta["graph_edges"] = sim.graph.edge_count
    io.write_meta(Path(args.out) / "meta", meta)
    print(f"wrote {args.out}: n={spec.n} p={spec.p} q={spec.q}, {sim.graph.edge_count} true edges")
    return EXIT_OK


def cmd_summarize(trace_dir, cutoff=0.5, out=None, truth=None):
    trace_dir = Path(trace_dir)
    if not trace_dir.is_dir():
        raise ConfigError(f"not a directory: {trace_dir}")
    dirs = io.chain_dirs(trace_dir)
    if not dirs:
        raise ConfigError(f"no chain traces found in {trace_dir}")
    traces = [io.read_trace(d) for d in dirs]
    if sum(len(t) for t in traces) == 0:
        raise ConfigError(f"traces in {trace_dir} are empty")
    meta = io.read_meta(dirs[0] / "meta")
    design = design_from_meta(meta) if all(t.B_draws is not None for t in traces) else None
    q = traces[0].q
    truth_adj = None
    if truth is not None:
        truth_adj = io.read_graph_file(truth, q)
    elif (trace_dir / "truth_edges.csv").exists():
        truth_adj = io.read_edge_list(trace_dir / "truth_edges.csv", q)
    out = Path(out) if out is not None else trace_dir / "summary"
    write_summary(out, traces, design, cutoff=cutoff, truth=truth_adj)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_roc(edge_prob_path, truth_path, out=None):
    ep = io.read_matrix(edge_prob_path)
    q = ep.shape[0]
    if ep.shape != (q, q):
        raise ConfigError(f"{edge_prob_path} is not a square matrix")
    truth = io.read_graph_file(truth_path, q)
    fpr, tpr, auc = roc_curve(ep, truth)
    if out is not None:
        write_roc(out, fpr, tpr, auc)
    print(f"auc={auc:.6f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing

def _add_sim_args(p, prefix=""):
    g = p.add_argument_group("simulation")
    g.add_argument("--preset", choices=["full"], help="full-scale design (n=700, p=30, q=40)")
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--q", type=int)
    g.add_argument("--support", help="comma-separated 1-based predictor indices, e.g. 2,5")
    g.add_argument("--effects", help=f"comma-separated effect kinds from {sorted(EFFECTS)}")
    g.add_argument("--edges", type=int, help="edge count of the random decomposable truth")
    g.add_argument("--graph", help="true graph as an i,j edge list or dense 0/1 matrix")
    g.add_argument("--hiw-b", dest="hiw_b", type=float)
    g.add_argument("--random-signs", dest="random_signs", action="store_const", const=True)
    g.add_argument("--sim-seed", dest="sim_seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="cggm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cggm {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="run the sampler and write traces plus a summary")
    fit.add_argument("--config", help="key=value config file")
    fit.add_argument("--y", help="responses CSV (header row, n x q)")
    fit.add_argument("--x", help="predictors CSV (header row, n x p)")
    fit.add_argument("--out", help="output directory")
    fit.add_argument("--simulate", action="store_const", const=True, help="fit simulated data instead of files")
    hp = fit.add_argument_group("model")
    hp.add_argument("--g", type=float, help="g-prior scale (default: n)")
    hp.add_argument("--g-rule", dest="g_rule", choices=["n", "max_n_p2"])
    hp.add_argument("--b", type=float, help="HIW degrees of freedom (default 3)")
    hp.add_argument("--d", type=float, help="HIW scale D = d I (default 1)")
    hp.add_argument("--delta", type=float, help="gamma proposal flip probability (default 0.5)")
    hp.add_argument("--eta", type=float, help="edge proposal toggle probability (default 0.5)")
    hp.add_argument("--alpha-g", dest="alpha_g", type=float, help="edge prior probability (default min(2/(q-1), 0.5))")
    hp.add_argument("--knots", type=int, help="number of evenly spaced knots (default 10)")
    hp.add_argument("--knot-values", dest="knot_values", help="explicit knot locations, comma separated")
    hp.add_argument("--standardize", choices=["none", "center", "zscore"])
    hp.add_argument("--no-center-y", dest="center_y", action="store_const", const=False)
    hp.add_argument("--ridge", action="store_const", const=True, help="add a tiny ridge to U'U")
    ch = fit.add_argument_group("chain")
    ch.add_argument("--iterations", type=int, help="total iterations including burn-in (default 100000)")
    ch.add_argument("--burn-in", dest="burn_in", type=int, help="default 10000")
    ch.add_argument("--thin", type=int)
    ch.add_argument("--chains", type=int)
    ch.add_argument("--seed", type=int)
    ch.add_argument("--workers", type=int, help="parallel chains (default: CGGM_THREADS or CPU count)")
    ch.add_argument("--save-sigma", dest="save_sigma", action="store_const", const=True,
                    help="draw covariance and coefficients at recorded iterations")
    ch.add_argument("--log-every", dest="log_every", type=int)
    ch.add_argument("--cutoff", type=float, help="edge/inclusion probability threshold (default 0.5)")
    ch.add_argument("--truth", help="true graph for ROC output")
    _add_sim_args(fit)

    sim = sub.add_parser("simulate", help="write a synthetic dataset with its ground truth")
    sim.add_argument("--config")
    sim.add_argument("--out", required=True)
    _add_sim_args(sim)

    summ = sub.add_parser("summarize", help="recompute posterior summaries from saved traces")
    summ.add_argument("trace_dir")
    summ.add_argument("--cutoff", type=float, default=0.5)
    summ.add_argument("--out")
    summ.add_argument("--truth")

    roc = sub.add_parser("roc", help="ROC curve and AUC of an edge probability matrix")
    roc.add_argument("edge_prob")
    roc.add_argument("truth")
    roc.add_argument("--out")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fit":
            return cmd_fit(build_run_config(args))
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "summarize":
            if not 0.0 < args.cutoff < 1.0:
                raise ConfigError("cutoff must lie in (0, 1)")
            return cmd_summarize(args.trace_dir, args.cutoff, args.out, args.truth)
        return cmd_roc(args.edge_prob, args.truth, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ChainError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
