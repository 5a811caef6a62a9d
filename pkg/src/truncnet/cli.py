"""Command-line harness: simulate, bound, ingest, infer.

Every run resolves its configuration (JSON file, then --seed/--out/--set
overrides), writes the resolved copy next to its outputs, and derives all
randomness from the explicit seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bounds as bnd
from . import fileio
from . import inference as inf
from . import measures as msr
from . import netgen as net
from .errors import ParameterError


class UsageError(SystemExit):
    def __init__(self, msg):
        print(f"error: {msg}", file=sys.stderr)
        super().__init__(2)


def _load_config(args):
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    for kv in args.set or []:
        if "=" not in kv:
            raise UsageError(f"--set expects key=value, got {kv!r}")
        key, val = kv.split("=", 1)
        try:
            cfg[key] = json.loads(val)
        except json.JSONDecodeError:
            cfg[key] = val
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    cfg.setdefault("seed", 0)
    if "out" not in cfg:
        raise UsageError("an output directory is required (--out or config key 'out')")
    return cfg


def _resolve_out(cfg):
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.resolved.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
    return out


def _measure_from(cfg):
    family = cfg.get("family", "beta_process")
    p = cfg.get("params", {})
    gamma = float(p.get("gamma", 1.0))
    lam = float(p.get("lambda", 2.0))
    alpha = float(p.get("alpha", 0.0))
    if family == "beta_process":
        return msr.beta_process(gamma, lam, alpha)
    if family == "gamma_process":
        return msr.gamma_process(gamma, lam, alpha)
    if family == "power_law":
        return msr.power_law_measure(float(p.get("mass", 1.0)), alpha)
    raise UsageError(f"unknown family {family!r}")


def _likelihood_from(cfg):
    name = cfg.get("likelihood", "bernoulli")
    if name == "bernoulli":
        return net.bernoulli_likelihood()
    if name == "poisson":
        return net.poisson_likelihood()
    raise UsageError(f"unknown likelihood {name!r}")


def _k_grid(cfg):
    grid = cfg.get("K_grid", [])
    if not grid:
        raise UsageError("K_grid must be a nonempty list")
    return sorted({int(k) for k in grid})


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _growth_series(round_map, n_rounds, checkpoints=200):
    """Cumulative (#binary undirected edges, #vertices) over rounds, from
    the per-index first-appearance rounds."""
    first_pair = {}
    first_vertex = {}
    for key, rounds in round_map.items():
        pair = tuple(sorted(key))
        r0 = int(rounds[0])
        if pair not in first_pair or r0 < first_pair[pair]:
            first_pair[pair] = r0
        for v in key:
            if v not in first_vertex or r0 < first_vertex[v]:
                first_vertex[v] = r0
    edge_rounds = np.sort(np.fromiter(first_pair.values(), dtype=np.int64,
                                      count=len(first_pair)))
    vert_rounds = np.sort(np.fromiter(first_vertex.values(), dtype=np.int64,
                                      count=len(first_vertex)))
    multi_rounds = np.sort(np.concatenate(
        [np.asarray(r, dtype=np.int64) for r in round_map.values()])) \
        if round_map else np.zeros(0, dtype=np.int64)
    if n_rounds <= checkpoints:
        marks = np.arange(1, n_rounds + 1)
    else:
        marks = np.unique(np.linspace(1, n_rounds, checkpoints).astype(np.int64))
    rows = []
    for mk in marks:
        rows.append((int(mk),
                     int(np.searchsorted(multi_rounds, mk, side="left")),
                     int(np.searchsorted(edge_rounds, mk, side="left")),
                     int(np.searchsorted(vert_rounds, mk, side="left"))))
    return rows


def cmd_simulate(cfg):
    out = _resolve_out(cfg)
    measure = _measure_from(cfg)
    lik = _likelihood_from(cfg)
    d = int(cfg.get("d", 2))
    if d < 2:
        raise UsageError("d must be >= 2")
    n_rounds = int(cfg.get("N", 10000))
    grid = _k_grid(cfg)
    seed = int(cfg["seed"])
    representation = cfg.get("representation", "rejection")
    stats_rows = []
    degree_rows = []
    series_rows = []
    for K in grid:
        sub = np.random.SeedSequence((seed, K))
        s_crm, s_net = sub.spawn(2)
        if representation == "rejection":
            crm = msr.sample_rejection(measure, K, s_crm)
        else:
            crm = msr.sample_inverse_levy(measure, K, s_crm)
        edges, round_map = net.simulate_independent(crm, lik, n_rounds, d,
                                                    s_net, with_rounds=True)
        fileio.write_edges(os.path.join(out, f"edges_K{K}.txt"), edges)
        stats = net.network_stats(edges)
        binar = net.network_stats(net.binarize_undirect(edges))
        stats_rows.append((K, stats["num_vertices"], stats["num_edges"],
                           binar["num_vertices"], binar["num_edges"]))
        for deg, cnt in sorted(binar["degree_histogram"].items()):
            degree_rows.append((K, deg, cnt))
        for mk, me, be, v in _growth_series(round_map, n_rounds):
            series_rows.append((K, mk, me, be, v))
    fileio.write_csv(os.path.join(out, "stats.csv"),
                     ["K", "num_vertices", "num_edges",
                      "binary_num_vertices", "binary_num_edges"], stats_rows)
    fileio.write_csv(os.path.join(out, "degrees.csv"),
                     ["K", "degree", "count"], degree_rows)
    fileio.write_csv(os.path.join(out, "series.csv"),
                     ["K", "round", "cum_edges_multi", "cum_edges_binary",
                      "cum_vertices"], series_rows)
    return 0


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------

def cmd_bound(cfg):
    out = _resolve_out(cfg)
    method = cfg.get("method", "closed_form")
    d = int(cfg.get("d", 2))
    n_rounds = int(cfg.get("N", 1))
    grid = _k_grid(cfg)
    seed = int(cfg["seed"])
    rows = []
    if method == "closed_form":
        case = cfg.get("closed_form_case")
        if case not in bnd._CASES:
            raise UsageError(f"closed_form_case must be one of {bnd._CASES}")
        p = cfg.get("params", {})
        sigma = {"gamma": float(p.get("gamma", 1.0)),
                 "lam": float(p.get("lambda", 2.0)),
                 "alpha": float(p.get("alpha", 0.0))}
        for K in grid:
            rep = bnd.bound_closed_form(case, sigma, K, N=n_rounds)
            rows.append((K, rep.method.value, rep.B_total,
                         rep.prob_lower_bound, rep.mc_stderr))
    elif method in ("mc", "categorical"):
        mc_samples = int(cfg.get("mc_samples", 1000))
        if mc_samples <= 0:
            raise UsageError("mc_samples must be positive for Monte Carlo methods")
        measure = _measure_from(cfg)
        for K in grid:
            if method == "mc":
                lik = _likelihood_from(cfg)
                rep = bnd.bound_independent_mc(measure, lik, K, n_rounds, d,
                                               mc_samples=mc_samples, seed=seed)
            else:
                rep = bnd.bound_categorical(measure, K, n_rounds, d,
                                            mc_samples=mc_samples, seed=seed)
            rows.append((K, rep.method.value, rep.B_total,
                         rep.prob_lower_bound, rep.mc_stderr))
    else:
        raise UsageError(f"unknown bound method {method!r}")
    fileio.write_csv(os.path.join(out, "bound_curve.csv"),
                     ["K", "method", "B_total", "prob_lower_bound", "mc_stderr"],
                     rows)
    return 0


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(cfg):
    out = _resolve_out(cfg)
    path = cfg.get("input")
    if not path:
        raise UsageError("ingest needs an 'input' edge-stream path")
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    records = fileio.parse_edge_stream(path)
    round_edges, n_rounds, n_vertices, n_edges = fileio.bin_edge_stream(
        records,
        bin_minutes=float(cfg.get("bin_minutes", 30)),
        transient_rounds_to_drop=int(cfg.get("transient_rounds_to_drop", 0)),
        dedup_within_round=bool(cfg.get("dedup_within_round", True)),
        drop_self_loops=bool(cfg.get("drop_self_loops", True)))
    fileio.write_rounds(os.path.join(out, "rounds.txt"), round_edges, n_rounds)
    summary = {"vertices": n_vertices, "edges": n_edges, "rounds": n_rounds}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------

def _predictive_outputs(out, trace, n_rounds, seed, n_draws):
    samples = trace[-1]["samples"]
    if not samples:
        return
    step = max(1, len(samples) // max(n_draws, 1))
    chosen = samples[::step][:n_draws]
    growth_rows = []
    degree_rows = []
    seeds = np.random.SeedSequence((seed, 777)).spawn(len(chosen))
    lik = net.bernoulli_likelihood()
    for i, (st, sq) in enumerate(zip(chosen, seeds)):
        alpha, lam, gamma, theta = st.constrained()
        rates = np.sort(theta)[::-1]
        crm = msr.TruncatedCRM(rates=rates,
                               gammas=np.asarray(
                                   msr.beta_process(gamma, lam, alpha).nu_tail(rates)),
                               representation=msr.Representation.INVERSE_LEVY,
                               measure=msr.beta_process(gamma, lam, alpha), seed=0)
        edges, round_map = net.simulate_independent(crm, lik, n_rounds, 2, sq,
                                                    with_rounds=True)
        for mk, me, be, v in _growth_series(round_map, n_rounds):
            growth_rows.append((f"sample{i}", mk, be, v))
        hist = net.network_stats(net.binarize_undirect(edges))["degree_histogram"]
        for deg, cnt in sorted(hist.items()):
            degree_rows.append((f"sample{i}", deg, cnt))
    fileio.write_csv(os.path.join(out, "predictive_growth.csv"),
                     ["series", "round", "cum_edges", "cum_vertices"], growth_rows)
    fileio.write_csv(os.path.join(out, "predictive_degree.csv"),
                     ["series", "degree", "count"], degree_rows)


def cmd_infer(cfg):
    out = _resolve_out(cfg)
    xi = float(cfg.get("xi", 0.01))
    if not (0.0 < xi < 1.0):
        raise UsageError("xi must lie in (0, 1)")
    path = cfg.get("input")
    if not path:
        raise UsageError("infer needs an 'input' path (edges or rounds file)")
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    kind = cfg.get("input_kind", "edges")
    observed_growth = None
    if kind == "rounds":
        edges, n_rounds, triples = fileio.read_rounds(path)
        rm = {}
        for rnd, a, b in triples:
            rm.setdefault((a, b), []).append(rnd)
        rm = {k: np.sort(np.asarray(v)) for k, v in rm.items()}
        observed_growth = _growth_series(rm, n_rounds)
    elif kind == "edges":
        edges = fileio.read_edges(path)
        n_rounds = edges.rounds
    else:
        raise UsageError("input_kind must be 'edges' or 'rounds'")
    if "N" in cfg:
        n_rounds = int(cfg["N"])
    sds = cfg.get("proposal_sds", {})
    hp = cfg.get("hyperprior", {})
    config = inf.AdaptConfig(
        chain_length=int(cfg.get("chain_length", 2000)),
        burn_frac=float(cfg.get("burn_frac", 0.2)),
        sd_alpha=float(sds.get("alpha", 0.1)),
        sd_lambda=float(sds.get("lambda", 0.1)),
        sd_theta_k=float(sds.get("theta_K", 0.1)),
        sd_theta=float(sds.get("theta", 0.1)),
        sd_theta_zero=float(sds.get("theta_zero", 0.1)),
        hyperprior=inf.Hyperprior(
            gamma_a=float(hp.get("gamma_a", 1.0)),
            gamma_b=float(hp.get("gamma_b", 1.0)),
            normal_sd=float(hp.get("normal_sd", 10.0))),
        xi=xi,
        max_rounds=int(cfg.get("max_rounds", 8)),
        init_alpha=float(cfg.get("init", {}).get("alpha", 0.4)),
        init_lambda=float(cfg.get("init", {}).get("lambda", 5.0)),
        init_gamma=float(cfg.get("init", {}).get("gamma", 2.0)),
        predict_subsample=int(cfg.get("predict_subsample", 0)))
    seed = int(cfg["seed"])
    result = inf.adapt_truncation(edges, n_rounds, config, seed=seed)
    trace = result["rounds"]
    cert_records = []
    for rec in trace:
        cert = rec["certificate"]
        cert_records.append({
            "round": rec["round"], "K": rec["K"], "epsilon": cert.epsilon,
            "eta": cert.eta, "bound": cert.bound, "xi": xi,
            "predicted_schedule": [[int(k), float(b)] for k, b in rec["predicted_schedule"]],
            "next_K": rec["next_K"], "nonfinite_bounds": rec["nonfinite_bounds"]})
        rows = []
        for it, st in enumerate(rec["samples"]):
            alpha, lam, gamma, theta = st.constrained()
            rows.append((it, alpha, lam, gamma, float(theta[-1]), st.K,
                         st.cached_logpost if st.cached_logpost is not None else math.nan,
                         st.cached_cond_bound if st.cached_cond_bound is not None else math.nan))
        fileio.write_csv(os.path.join(out, f"samples_round{rec['round']}.csv"),
                         ["iteration", "alpha", "lambda", "gamma", "theta_K",
                          "K", "log_posterior", "cond_bound"], rows)
    fileio.write_jsonl(os.path.join(out, "certificates.jsonl"), cert_records)
    if observed_growth is not None:
        fileio.write_csv(os.path.join(out, "observed_growth.csv"),
                         ["series", "round", "cum_edges", "cum_vertices"],
                         [("observed", mk, be, v) for mk, _, be, v in observed_growth])
    obs_hist = net.network_stats(net.binarize_undirect(edges))["degree_histogram"]
    fileio.write_csv(os.path.join(out, "observed_degree.csv"),
                     ["series", "degree", "count"],
                     [("observed", deg, cnt) for deg, cnt in sorted(obs_hist.items())])
    _predictive_outputs(out, trace, n_rounds, seed,
                        int(cfg.get("predictive_draws", 20)))
    print(json.dumps({"rounds": len(trace), "final_K": trace[-1]["K"],
                      "final_bound": result["final"].bound}, sort_keys=True))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="trunc-net",
        description="Truncated edge-exchangeable network simulation, bounds, and inference")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("bound", cmd_bound),
                     ("ingest", cmd_ingest), ("infer", cmd_infer)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the RNG seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (JSON-parsed value)")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.fn(cfg)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
