"""Command-line surface: simulate, fit, summarize, evaluate, diagnose.

Settings come from a flat ``key = value`` config file; command-line flags
override file values. Exit codes: 0 success, 2 validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, figures, io
from .model import (
    MixtureHyperParams,
    ModelHyperParams,
    NumericalError,
    SEMHyperParams,
    ValidationError,
)
from .graphs import StructurePriorParams
from .sampler import INIT_MODES, SamplerConfig, run_chain
from .simulate import SimulationConfig, simulate_all
from .summarize import (
    classification_auc,
    compute_summary,
    diagnostics,
    evaluate_against_truth,
    select_median_model,
)
from .trace import TraceStore

_INIT_ALIASES = {
    "full": "prior-graph-full",
    "empty": "empty-graph",
    "prior-graph-full": "prior-graph-full",
    "empty-graph": "empty-graph",
    "random": "random",
}

HYPER_KEYS = (
    "th_mu", "tau_mu2", "gamma_sigma", "lambda_sigma",
    "gamma_kappa_minus", "lambda_kappa_minus",
    "gamma_kappa_plus", "lambda_kappa_plus", "tau_alpha2",
    "a_s", "b_s", "sigma2_beta", "tau_b2", "a_phi", "b_phi",
)


def _typed(cfg, key, default, cast):
    if key not in cfg or cfg[key] == "":
        return default
    try:
        return cast(cfg[key])
    except ValueError as err:
        raise ValidationError(f"config key {key!r}: {err}") from err


@dataclass
class RunConfig:
    """Resolved settings of one fit run."""

    data: str
    design: str
    graph: str
    out_dir: str
    n_iter: int = 100_000
    burn_in: int = 50_000
    thin: int = 10
    mh_scale: float = 1.0
    rj_per_sweep: int = 0
    seed: int = 0
    chains: int = 1
    init: list = field(default_factory=lambda: ["prior-graph-full"])
    parallel: int = 1
    threshold: float = 0.5
    validate_every: int = 0
    hyper: ModelHyperParams = field(default_factory=ModelHyperParams)

    def __post_init__(self):
        if self.chains < 1:
            raise ValidationError("chains must be >= 1")
        for path, kind in ((self.data, "data"), (self.design, "design"),
                           (self.graph, "graph")):
            if not path:
                raise ValidationError(f"missing required path: {kind}")
            if not os.path.exists(path):
                raise ValidationError(f"{kind} file not found: {path}")
        if not self.out_dir:
            raise ValidationError("missing required path: out_dir")
        if len(self.init) == 1 and self.chains > 1:
            self.init = self.init * self.chains
        if len(self.init) != self.chains:
            raise ValidationError("init list length must equal chains")
        for mode in self.init:
            if mode not in INIT_MODES:
                raise ValidationError(f"unknown init mode {mode!r}")


def _parse_init(text):
    modes = []
    for raw in text.split(","):
        name = raw.strip()
        if name not in _INIT_ALIASES:
            raise ValidationError(
                f"unknown init mode {name!r}; use full, empty, or random"
            )
        modes.append(_INIT_ALIASES[name])
    return modes


def _hyper_from_config(cfg) -> ModelHyperParams:
    mix = MixtureHyperParams(
        th_mu=_typed(cfg, "th_mu", 0.0, float),
        tau_mu2=_typed(cfg, "tau_mu2", 100.0, float),
        gamma_sigma=_typed(cfg, "gamma_sigma", 2.0, float),
        lambda_sigma=_typed(cfg, "lambda_sigma", 2.0, float),
        gamma_kappa_minus=_typed(cfg, "gamma_kappa_minus", 2.0, float),
        lambda_kappa_minus=_typed(cfg, "lambda_kappa_minus", 10.0, float),
        gamma_kappa_plus=_typed(cfg, "gamma_kappa_plus", 2.0, float),
        lambda_kappa_plus=_typed(cfg, "lambda_kappa_plus", 10.0, float),
        tau_alpha2=_typed(cfg, "tau_alpha2", 100.0, float),
    )
    sem = SEMHyperParams(
        a_s=_typed(cfg, "a_s", 2.0, float),
        b_s=_typed(cfg, "b_s", 2.0, float),
        sigma2_beta=_typed(cfg, "sigma2_beta", 1.0, float),
        tau_b2=_typed(cfg, "tau_b2", 100.0, float),
    )
    structure = StructurePriorParams(
        a_phi=_typed(cfg, "a_phi", 1.0, float),
        b_phi=_typed(cfg, "b_phi", 1.0, float),
    )
    return ModelHyperParams(mixture=mix, sem=sem, structure=structure)


def _merge_config(args, flag_map):
    """File config overridden by any explicitly supplied flags."""
    cfg = io.read_config(args.config) if getattr(args, "config", None) else {}
    for key, attr in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = str(value)
    return cfg


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _merge_config(args, {
        "p": "p", "n": "n", "false_edges": "false_edges", "seed": "seed",
        "out_dir": "out", "expected_true_edges": "expected_true_edges",
        "pi0": "pi0", "group_split": "group_split",
    })
    sim = SimulationConfig(
        p=_typed(cfg, "p", 50, int),
        n=_typed(cfg, "n", 30, int),
        group_split=_typed(cfg, "group_split", 0, int),
        pi0=_typed(cfg, "pi0", -1.0, float),
        expected_true_edges=_typed(cfg, "expected_true_edges", 0, int),
        false_edge_count=_typed(cfg, "false_edges", 87, int),
        sigma_b2=_typed(cfg, "sigma_b2", 0.25, float),
        seed=_typed(cfg, "seed", 0, int),
    )
    out_dir = cfg.get("out_dir", "")
    if not out_dir:
        raise ValidationError("simulate requires an output directory (--out)")
    os.makedirs(out_dir, exist_ok=True)
    data, truth, g0 = simulate_all(sim)
    io.write_expression(os.path.join(out_dir, "expression.tsv"),
                        data.Y, data.gene_ids, data.sample_ids)
    io.write_design(os.path.join(out_dir, "design.tsv"), data.X)
    io.write_edge_list(os.path.join(out_dir, "prior_graph.edges"),
                       g0.edges, data.gene_ids)
    io.write_truth(os.path.join(out_dir, "truth.json"), truth,
                   data.gene_ids, data.sample_ids)
    print(f"seed = {sim.seed}")
    print(f"p = {sim.p}, n = {sim.n} ({sim.group_split}/{sim.n - sim.group_split} split)")
    print(f"true edges = {len(truth.E_star)}, false edges = {len(truth.E_tilde)}, "
          f"prior graph edges = {g0.K}")
    print(f"wrote {out_dir}/expression.tsv design.tsv prior_graph.edges truth.json")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _load_run_config(args) -> RunConfig:
    cfg = _merge_config(args, {
        "data": "data", "design": "design", "graph": "graph", "out_dir": "out",
        "n_iter": "n_iter", "burn_in": "burn_in", "thin": "thin",
        "seed": "seed", "chains": "chains", "init": "init",
        "parallel": "parallel", "mh_scale": "mh_scale",
        "rj_per_sweep": "rj_per_sweep", "threshold": "threshold",
        "validate_every": "validate_every",
    })
    return RunConfig(
        data=cfg.get("data", ""),
        design=cfg.get("design", ""),
        graph=cfg.get("graph", ""),
        out_dir=cfg.get("out_dir", ""),
        n_iter=_typed(cfg, "n_iter", 100_000, int),
        burn_in=_typed(cfg, "burn_in", 50_000, int),
        thin=_typed(cfg, "thin", 10, int),
        mh_scale=_typed(cfg, "mh_scale", 1.0, float),
        rj_per_sweep=_typed(cfg, "rj_per_sweep", 0, int),
        seed=_typed(cfg, "seed", 0, int),
        chains=_typed(cfg, "chains", 1, int),
        init=_parse_init(cfg.get("init", "full")),
        parallel=_typed(cfg, "parallel", 1, int),
        threshold=_typed(cfg, "threshold", 0.5, float),
        validate_every=_typed(cfg, "validate_every", 0, int),
        hyper=_hyper_from_config(cfg),
    )


def _fit_one_chain(payload):
    data, g0, hyper, config, chain_id, chain_dir = payload
    trace, stats = run_chain(data, g0, hyper, config, chain_id=chain_id)
    trace.save(chain_dir)
    kept = trace.edge_count[config.burn_in:]
    return chain_id, float(kept.mean()), stats.acceptance_rates()


def _manifest_text(run: RunConfig, wall_time) -> str:
    lines = ["# poenet fit manifest (re-runnable as a config file)"]
    for key, value in (
        ("data", os.path.abspath(run.data)),
        ("design", os.path.abspath(run.design)),
        ("graph", os.path.abspath(run.graph)),
        ("out_dir", os.path.abspath(run.out_dir)),
        ("n_iter", run.n_iter), ("burn_in", run.burn_in), ("thin", run.thin),
        ("mh_scale", run.mh_scale), ("rj_per_sweep", run.rj_per_sweep),
        ("seed", run.seed), ("chains", run.chains),
        ("init", ",".join(run.init)), ("parallel", run.parallel),
        ("threshold", run.threshold),
        ("validate_every", run.validate_every),
    ):
        lines.append(f"{key} = {value}")
    hm, hs, sp = run.hyper.mixture, run.hyper.sem, run.hyper.structure
    for key in HYPER_KEYS:
        for block in (hm, hs, sp):
            if hasattr(block, key):
                lines.append(f"{key} = {getattr(block, key)}")
                break
    lines.append(f"# poenet_version = {__version__}")
    lines.append(f"# numpy_version = {np.__version__}")
    lines.append(f"# wall_time_s = {wall_time:.1f}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    run = _load_run_config(args)
    data = io.load_dataset(run.data, run.design)
    g0 = io.load_prior_graph(run.graph, data.gene_ids)
    os.makedirs(run.out_dir, exist_ok=True)

    start = time.monotonic()
    jobs = []
    for c in range(run.chains):
        config = SamplerConfig(
            n_iter=run.n_iter,
            burn_in=run.burn_in,
            thin=run.thin,
            mh_scale=run.mh_scale,
            rj_moves_per_sweep=run.rj_per_sweep,
            seed=run.seed + c,
            init_mode=run.init[c],
            validate_every=run.validate_every,
        )
        chain_dir = os.path.join(run.out_dir, f"chain_{c:02d}")
        jobs.append((data, g0, run.hyper, config, c, chain_dir))

    if run.parallel > 1 and run.chains > 1:
        with ProcessPoolExecutor(max_workers=min(run.parallel, run.chains)) as pool:
            results = list(pool.map(_fit_one_chain, jobs))
    else:
        results = [_fit_one_chain(job) for job in jobs]

    wall = time.monotonic() - start
    io.atomic_write_text(os.path.join(run.out_dir, "manifest.txt"),
                         _manifest_text(run, wall))
    for chain_id, mean_k, rates in results:
        rj_rate = rates.get("rj_birth", float("nan"))
        print(f"chain {chain_id}: mean post-burn-in edge count {mean_k:.2f}, "
              f"birth acceptance {rj_rate:.3f}")
    print(f"wrote {run.chains} trace(s) under {run.out_dir} in {wall:.1f}s")
    return 0


# ---------------------------------------------------------------------------
# summarize / evaluate / diagnose
# ---------------------------------------------------------------------------

def _load_traces(trace_dir):
    trace_dir = os.fspath(trace_dir)
    if not os.path.isdir(trace_dir):
        raise ValidationError(f"trace directory not found: {trace_dir}")
    if os.path.exists(os.path.join(trace_dir, "meta.json")):
        return [TraceStore.load(trace_dir)]
    chain_dirs = sorted(
        os.path.join(trace_dir, name)
        for name in os.listdir(trace_dir)
        if name.startswith("chain_")
        and os.path.exists(os.path.join(trace_dir, name, "meta.json"))
    )
    if not chain_dirs:
        raise ValidationError(f"no trace directories found under {trace_dir}")
    return [TraceStore.load(d) for d in chain_dirs]


def _write_summary_files(summary, out_dir, threshold):
    os.makedirs(out_dir, exist_ok=True)
    lines = ["gene_id\t" + "\t".join(summary.sample_ids)]
    for i, gid in enumerate(summary.gene_ids):
        lines.append(gid + "\t" + "\t".join(io.fmt(v) for v in summary.p_star[i]))
    io.atomic_write_text(os.path.join(out_dir, "summary_pstar.tsv"),
                         "\n".join(lines) + "\n")

    lines = ["src\tdst\tv\tbeta_mean\tbeta_mean_given_inclusion"]
    for t, (src, dst) in enumerate(summary.edges):
        lines.append(
            f"{summary.gene_ids[src]}\t{summary.gene_ids[dst]}\t"
            f"{io.fmt(summary.v[t])}\t{io.fmt(summary.beta_mean[t])}\t"
            f"{io.fmt(summary.beta_mean_given_inclusion[t])}"
        )
    io.atomic_write_text(os.path.join(out_dir, "summary_edges.tsv"),
                         "\n".join(lines) + "\n")

    selected = select_median_model(summary, threshold)
    io.write_edge_list(os.path.join(out_dir, "selected_graph.edges"),
                       [e for e, _, _ in selected.edges], summary.gene_ids)

    max_deg = summary.degree_posterior.shape[1] - 1
    lines = ["gene_id\t" + "\t".join(f"deg{d}" for d in range(max_deg + 1))]
    for i, gid in enumerate(summary.gene_ids):
        lines.append(gid + "\t" + "\t".join(
            io.fmt(v) for v in summary.degree_posterior[i]))
    io.atomic_write_text(os.path.join(out_dir, "degree_posterior.tsv"),
                         "\n".join(lines) + "\n")
    return selected


def cmd_summarize(args) -> int:
    traces = _load_traces(args.trace_dir)
    summary = compute_summary(traces)
    out_dir = args.out or os.path.join(args.trace_dir, "summary")
    selected = _write_summary_files(summary, out_dir, args.threshold)
    io.atomic_write_text(os.path.join(out_dir, "diagnostics.txt"),
                         diagnostics(traces))
    figures.plot_pstar_heatmap(summary, os.path.join(out_dir, "pstar_heatmap.png"))
    figures.plot_inclusion_vs_beta(
        summary, os.path.join(out_dir, "edge_inclusion.png"),
        threshold=args.threshold)
    figures.plot_degree_posterior(
        summary, os.path.join(out_dir, "degree_posterior.png"))
    print(f"pooled draws = {summary.n_draws}")
    print(f"selected edges (v > {args.threshold}) = {len(selected.edges)}")
    print(f"wrote summary files under {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    traces = _load_traces(args.trace_dir)
    summary = compute_summary(traces)
    truth = io.read_truth(args.truth)
    selected = select_median_model(summary, args.threshold)
    fdr, power, counts = evaluate_against_truth(selected, truth)
    auc = classification_auc(summary.p_star, np.asarray(truth["e_true"]))
    lines = [
        f"threshold = {args.threshold}",
        f"tp = {counts['tp']}",
        f"fp = {counts['fp']}",
        f"fn = {counts['fn']}",
        f"n_selected = {counts['n_selected']}",
        f"n_true = {counts['n_true']}",
        f"fdr = {io.fmt(fdr)}",
        f"power = {io.fmt(power)}",
        f"classification_auc = {io.fmt(auc)}",
    ]
    report = "\n".join(lines) + "\n"
    out_path = os.path.join(args.trace_dir, "evaluation.txt")
    io.atomic_write_text(out_path, report)
    index = {g: i for i, g in enumerate(truth["gene_ids"])}
    false_edges = [(index[r["src"]], index[r["dst"]])
                   for r in truth["edges"] if not r["is_true"]]
    figures.plot_inclusion_vs_beta(
        summary, os.path.join(args.trace_dir, "edge_truth_scatter.png"),
        false_edges=false_edges, threshold=args.threshold)
    sys.stdout.write(report)
    print(f"wrote {out_path}")
    return 0


def cmd_diagnose(args) -> int:
    traces = _load_traces(args.trace_dir)
    report = diagnostics(traces)
    out_path = os.path.join(args.trace_dir, "diagnostics.txt")
    io.atomic_write_text(out_path, report)
    figures.plot_edge_count_traces(
        [t.edge_count for t in traces],
        traces[0].meta["burn_in"],
        os.path.join(args.trace_dir, "edge_count_trace.png"),
        labels=[f"chain {t.meta['chain_id']} ({t.meta['init_mode']})"
                for t in traces],
    )
    sys.stdout.write(report)
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poenet",
        description="Pathway-anchored inference for dependent probability of expression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic study with truth")
    sim.add_argument("config", nargs="?", help="key = value config file")
    sim.add_argument("--p", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--false-edges", dest="false_edges", type=int)
    sim.add_argument("--expected-true-edges", dest="expected_true_edges", type=int)
    sim.add_argument("--pi0", type=float)
    sim.add_argument("--group-split", dest="group_split", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="run MCMC chains and persist traces")
    fit.add_argument("config", nargs="?", help="key = value config file")
    fit.add_argument("--data")
    fit.add_argument("--design")
    fit.add_argument("--graph")
    fit.add_argument("--out")
    fit.add_argument("--n-iter", dest="n_iter", type=int)
    fit.add_argument("--burn-in", dest="burn_in", type=int)
    fit.add_argument("--thin", type=int)
    fit.add_argument("--chains", type=int)
    fit.add_argument("--init", help="comma list: full, empty, random")
    fit.add_argument("--seed", type=int)
    fit.add_argument("--parallel", type=int)
    fit.add_argument("--mh-scale", dest="mh_scale", type=float)
    fit.add_argument("--rj-per-sweep", dest="rj_per_sweep", type=int)
    fit.add_argument("--validate-every", dest="validate_every", type=int)
    fit.set_defaults(func=cmd_fit)

    summ = sub.add_parser("summarize", help="posterior summaries from traces")
    summ.add_argument("trace_dir")
    summ.add_argument("--threshold", type=float, default=0.5)
    summ.add_argument("--out", help="summary output directory")
    summ.set_defaults(func=cmd_summarize)

    ev = sub.add_parser("evaluate", help="FDR/power against simulation truth")
    ev.add_argument("trace_dir")
    ev.add_argument("truth")
    ev.add_argument("--threshold", type=float, default=0.5)
    ev.set_defaults(func=cmd_evaluate)

    diag = sub.add_parser("diagnose", help="convergence and acceptance report")
    diag.add_argument("trace_dir")
    diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
