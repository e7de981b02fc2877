"""Command-line experiment runner (``qwalks <command> --help``)."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import classical, graph, mixing, qwalk, spectral
from .reports import csv_text, dumps, write_csv, write_json

DEFAULT_SEED = mixing.DEFAULT_SEED


class ConfigError(ValueError):
    pass


# --- parsing of specs -----------------------------------------------------------

def parse_graph_spec(spec: str) -> graph.LabeledGraph:
    """``cycle:n``, ``complete:n``, ``bridged:m``, ``cayley:5:1;-1``, ``cayley:2x2:1,0;0,1`` or a file path."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "cycle":
            return graph.cycle(int(rest))
        if kind == "complete":
            return graph.complete(int(rest))
        if kind == "bridged":
            return graph.bridged_cliques(int(rest))
        if kind == "cayley":
            orders_s, _, gens_s = rest.partition(":")
            orders = [int(x) for x in orders_s.split("x")]
            gens = [[int(c) for c in g.split(",")] for g in gens_s.split(";") if g]
            return graph.cayley_abelian(orders, gens)
    except ValueError as exc:
        if isinstance(exc, graph.InvalidGraphError):
            raise
        raise ConfigError(f"malformed graph spec {spec!r}: {exc}") from None
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"graph spec {spec!r} is neither a builtin nor an existing file")
    return graph.read_graph(path)


def phase_coin() -> np.ndarray:
    return qwalk.dft_coin(2) @ np.diag([1, 1j])


def load_matrix(path) -> np.ndarray:
    """JSON file holding a matrix of ``[re, im]`` pairs or plain reals."""
    try:
        data = np.asarray(json.loads(Path(path).read_text()), dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from None
    if data.ndim == 3 and data.shape[2] == 2:
        return data[..., 0] + 1j * data[..., 1]
    if data.ndim == 2:
        return data.astype(complex)
    raise ConfigError(f"matrix file {path} must hold a square matrix")


def coin_matrix(spec: str, d: int) -> np.ndarray:
    if spec == "hadamard":
        if d != 2:
            raise ConfigError(f"the Hadamard coin needs degree 2, graph has d={d}")
        return qwalk.hadamard_coin()
    if spec == "dft":
        return qwalk.dft_coin(d)
    if spec == "phase":
        if d != 2:
            raise ConfigError("the phase coin needs degree 2")
        return phase_coin()
    return load_matrix(spec)


def build_walk(cfg, g: graph.LabeledGraph):
    if cfg.walk == "coined":
        return qwalk.CoinedWalk(coin_matrix(cfg.coin, g.d), g)
    if cfg.walk == "matrix":
        if not cfg.matrix:
            raise ConfigError("--walk matrix needs --matrix FILE")
        return qwalk.UnitaryWalk(load_matrix(cfg.matrix), g)
    if cfg.walk == "mixture":
        coins = cfg.mixture_coins.split(",")
        probs = [float(p) for p in cfg.mixture_probs.split(",")] if cfg.mixture_probs else [1 / len(coins)] * len(coins)
        if len(probs) != len(coins):
            raise ConfigError("need one probability per mixture coin")
        if abs(sum(probs) - 1) > 1e-12:
            raise ConfigError("mixture probabilities must sum to 1")
        return qwalk.RandomUnitaryWalk([qwalk.CoinedWalk(coin_matrix(c, g.d), g) for c in coins], probs)
    raise ConfigError(f"unknown walk kind {cfg.walk!r}")


def parse_cuts(spec: str | None):
    if not spec:
        return []
    return [[int(v) for v in part.split(",")] for part in spec.split(";") if part]


def family_for(cfg, g: graph.LabeledGraph, include_full=True) -> graph.CutFamily:
    extra = parse_cuts(cfg.cuts)
    if cfg.family == "default":
        # Exhaustive families already contain any extra cuts.
        return mixing.default_mixing_family(g, extra) if include_full else graph.default_cut_family(g, extra)
    if cfg.family == "exhaustive":
        return graph.exhaustive_cuts(g.n, include_full=include_full)
    if cfg.family == "singletons":
        fam = graph.singleton_cuts(g.n)
    elif cfg.family == "arcs":
        fam = graph.singleton_cuts(g.n) | graph.arc_cuts(g.n)
    else:
        raise ConfigError(f"unknown subset family {cfg.family!r}")
    if extra:
        fam = fam | graph.subsets_family(g.n, extra)
    if include_full:
        fam = fam | graph.full_set(g.n)
    return fam


def starts_for(cfg, W):
    if cfg.starts == "all":
        return np.arange(W.graph.dim)
    return mixing.default_starts(W)


def threads() -> int:
    try:
        return max(1, int(os.environ.get("QWALK_THREADS", "1")))
    except ValueError:
        return 1


def run_parallel(tasks):
    """Run zero-argument callables; results come back in submission order."""
    if threads() == 1 or len(tasks) < 2:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads()) as ex:
        futures = [ex.submit(t) for t in tasks]
        return [f.result() for f in futures]


# --- commands -------------------------------------------------------------------

def _out(cfg, name) -> Path:
    return Path(cfg.out) / name


def cmd_spectrum(cfg) -> int:
    g = parse_graph_spec(cfg.graph)
    if g.dim > spectral.DENSE_CAP:
        raise ConfigError(f"dn = {g.dim} exceeds the dense decomposition cap of {spectral.DENSE_CAP}")
    W = build_walk(cfg, g)
    if isinstance(W, qwalk.RandomUnitaryWalk):
        raise ConfigError("spectrum needs a unitary walk")
    dec = spectral.decompose_walk(W)
    report = {
        "graph": g.name, "n": g.n, "d": g.d, "dim": g.dim,
        "distinct": dec.distinct, "num_classes": len(dec.classes),
        "min_class_gap": dec.min_gap if math.isfinite(dec.min_gap) else None,
        "spacing": spectral.spacing_report(dec).to_dict(),
    }
    odd_hadamard_cycle = (g.transitive and g.d == 2 and g.n % 2 == 1 and g == graph.cycle(g.n)
                          and isinstance(W, qwalk.CoinedWalk)
                          and np.allclose(W.coin, qwalk.hadamard_coin(), atol=1e-15))
    if odd_hadamard_cycle:
        rep = spectral.spacing_report(dec, cfg.delta, qwalk.basis_state(g, 0, 0))
        report["good_bad"] = rep.to_dict()
        report["good_bad"]["spacing_floor"] = math.pi * cfg.delta / (math.sqrt(2) * g.n)
        report["analytic"] = {"max_deviation": spectral.multiset_distance(dec.eigvals, spectral.analytic_eigenvalues(g.n))}
    write_csv(_out(cfg, "spectrum.csv"), ["index", "re", "im", "arg", "class_id"], spectral.spectrum_rows(dec))
    write_json(_out(cfg, "spectrum.json"), report)
    if cfg.eigenvectors:
        from .reports import state_to_json
        write_json(_out(cfg, "eigenvectors.json"), [state_to_json(v) for v in dec.eigvecs.T])
    print(f"{g.name}: {g.dim} eigenvalues, {len(dec.classes)} classes, distinct={dec.distinct}")
    return 0


def cmd_mix(cfg) -> int:
    g = parse_graph_spec(cfg.graph)
    W = build_walk(cfg, g)
    fam = family_for(cfg, g)
    P = classical.transition_matrix(g)
    t_q = cfg.t_max or mixing.default_horizon(g.n)
    t_c = cfg.t_max_classical or classical.default_horizon(g.n)
    q_rep, c_rep = run_parallel([
        lambda: mixing.measure_mixing(W, cfg.eps, t_q, fam, starts_for(cfg, W)),
        lambda: classical.classical_sweep(P, cfg.eps, t_c, fam),
    ])
    table = {"quantum_M": q_rep.M.value, "classical_M": c_rep["mixing"].value}
    if g == graph.cycle(g.n) and g.n % 2 == 1 and 0 < cfg.eps <= 1:
        table["cycle_mixing_bound"] = spectral.cycle_mixing_bound(g.n, cfg.eps)
    if not isinstance(W, qwalk.RandomUnitaryWalk) and g.dim <= spectral.DENSE_CAP:
        dec = spectral.decompose_walk(W)
        if dec.distinct:
            Delta = spectral.spacing_report(dec).Delta
            # Smallest T at which the uniform-spacing bound drops to eps.
            table["uniform_spacing_T"] = math.ceil(spectral.convergence_bound_uniform_spacing(g.n, g.d, Delta, 1) / cfg.eps)
    out = {
        "graph": g.name, "walk": cfg.walk, "coin": cfg.coin, "seed": cfg.seed,
        "quantum": q_rep.to_dict(),
        "classical": {k: c_rep[k].to_dict() for k in ("mixing", "filling", "dispersion")},
        "bound_table": table,
    }
    rows = []
    qc, cc = q_rep.curve, c_rep["curve"]
    for t in range(max(len(qc), len(cc))):
        rows.append([t, float(qc[t]) if t < len(qc) else "", float(cc[t]) if t < len(cc) else ""])
    write_json(_out(cfg, "mixing.json"), out)
    write_csv(_out(cfg, "curve.csv"), ["t", "quantum_tv", "classical_tv"], rows)
    print(f"{g.name}: quantum M={_fmt(q_rep.M)} S={_fmt(q_rep.S)} tau={_fmt(q_rep.tau)} xi={_fmt(q_rep.xi)}; "
          f"classical M={_fmt(c_rep['mixing'])}")
    return 0


def _fmt(est):
    return str(est.value) if est.value is not None else f">{est.horizon}"


def _finding(name, fatal, check=None, **extra):
    d = {"check": name, "fatal": fatal}
    if check is not None:
        d.update(check.to_dict() if hasattr(check, "to_dict") else check)
    d.update(extra)
    return d


def cmd_verify(cfg) -> int:
    g = parse_graph_spec(cfg.graph)
    findings = []
    walk_ok = True
    try:
        if cfg.walk == "coined":
            C = coin_matrix(cfg.coin, g.d)
            res = qwalk.unitarity_residual(C) if C.shape == (g.d, g.d) else math.inf
            findings.append(_finding("unitarity", True, {"measured": res, "upper_bound": qwalk.UNITARY_TOL,
                                                          "holds": res <= qwalk.UNITARY_TOL}))
            walk_ok = res <= qwalk.UNITARY_TOL
        elif cfg.walk == "matrix":
            U = load_matrix(cfg.matrix) if cfg.matrix else None
            if U is None or U.shape != (g.dim, g.dim):
                raise ConfigError("--walk matrix needs a dn x dn --matrix FILE")
            res = qwalk.unitarity_residual(U)
            findings.append(_finding("unitarity", True, {"measured": res, "upper_bound": qwalk.UNITARY_TOL,
                                                          "holds": res <= qwalk.UNITARY_TOL}))
            walk_ok = res <= qwalk.UNITARY_TOL
    except qwalk.NonUnitaryError as exc:
        findings.append(_finding("unitarity", True, {"holds": False}, note=str(exc)))
        walk_ok = False

    family = graph.default_cut_family(g)
    tasks = [
        lambda: _finding("conductance_sandwich", True, classical.check_cond_bounds(g, family)),
        lambda: _finding("boundary_vs_conductance", True, graph.phi_prime_vs_phi_check(g, family)),
    ]
    P = classical.transition_matrix(g)
    spect = classical.check_spect_bounds(P, cfg.eps)
    findings.extend(run_parallel(tasks))
    findings.append(_finding("mixing_vs_spectral_gap_literal", False, spect))
    findings.append(_finding("mixing_vs_slem", True, {"measured": spect.measured,
                                                       "upper_bound": spect.details["upper_bound_slem"],
                                                       "holds": spect.details["slem_holds"]}))

    if walk_ok:
        findings.extend(_quantum_findings(cfg, g, family))
    write_json(_out(cfg, "findings.json"), {"graph": g.name, "eps": cfg.eps, "seed": cfg.seed, "findings": findings,
                                            "passed": all(f["holds"] for f in findings if f["fatal"])})
    failed = [f["check"] for f in findings if f["fatal"] and not f["holds"]]
    for f in findings:
        status = "ok" if f["holds"] else ("FAIL" if f["fatal"] else "finding")
        print(f"{status:8s} {f['check']}")
    return 1 if failed else 0


def _quantum_findings(cfg, g, family):
    W = build_walk(cfg, g)
    out = []
    rng = np.random.default_rng(cfg.seed)
    unitary = not isinstance(W, qwalk.RandomUnitaryWalk)
    constituents = W.walks if not unitary else (W,)
    for i, w in enumerate(constituents):
        out.append(_finding(f"locality[{i}]", True, {"holds": qwalk.locality_check(w, g)}))
    _, cut = graph.boundary_phi_prime(g, family)
    alphas = qwalk.random_states(g.dim, cfg.random_states, rng)
    for i, w in enumerate(constituents):
        out.append(_finding(f"projection_inequality[{i}]", True, qwalk.projection_inequality_check(w, g, cut.X, alphas)))
    if unitary:
        out.append(_finding("complete_mixture", True, qwalk.complete_mixture_check(W, g, cfg.mixture_steps)))
    if g.dim > spectral.DENSE_CAP or (not unitary and g.dim > spectral.CHANNEL_CAP):
        out.append(_finding("mixing_measures", False, {"holds": True}, note="walk too large for the limit computation"))
        return out

    fam = family_for(cfg, g)
    rep = mixing.measure_mixing(W, cfg.eps, cfg.t_max, fam, starts_for(cfg, W))
    out.append(_finding("ordering", True, rep.ordering_check()))
    out.append(_finding("mixing_measures", False, {"holds": True}, measures={k: v.to_dict() for k, v in rep.measures().items()}))
    limits = mixing.limits_for(W, np.arange(g.dim))
    uniform = bool(np.abs(limits - 1 / g.n).max() <= 1e-8)
    if unitary and spectral.start_independent(limits) and rep.M.value:
        amp = mixing.amplify(W, rep.M.value, 3, cfg.seed)
        out.append(_finding("amplification_contraction", True, mixing.contraction_check(amp)))
        out.append(_finding("amplification_stages", True, {"measured": amp.final_distance, "upper_bound": amp.eps0 ** 3 + 1e-9,
                                                            "holds": amp.final_distance <= amp.eps0 ** 3 + 1e-9}))
    if uniform and unitary:
        out.append(_finding("filling_lower_bound", True,
                            mixing.lower_bound_filling_check(W, g, cut, cfg.eps, rep.tau, n_random=cfg.random_states, seed=cfg.seed)))
        if isinstance(W, qwalk.CoinedWalk):
            _, phi_cut = graph.conductance(g, family)
            out.append(_finding("coined_lower_bound", True,
                                mixing.coined_lower_bound_check(W, g, phi_cut, cfg.eps, rep.tau, n_random=cfg.random_states, seed=cfg.seed)))
    if uniform:
        out.append(_finding("sampling_lower_bound", True, mixing.nonunitary_lower_bound_check(W, g, cut, cfg.eps, rep.S)))
    return out


def cmd_amplify(cfg) -> int:
    g = parse_graph_spec(cfg.graph)
    W = build_walk(cfg, g)
    if isinstance(W, qwalk.RandomUnitaryWalk):
        raise ConfigError("amplify needs a unitary walk")
    M = cfg.stage_length or mixing.estimate_mixing_time(W, cfg.eps, cfg.t_max).value
    if not M:
        raise ConfigError("mixing time is zero or beyond the horizon; pass --stage-length")
    D0 = None
    if cfg.trials:
        D0 = np.zeros(g.n)
        D0[0] = 1.0
    try:
        res = mixing.amplify(W, M, cfg.stages, cfg.seed, D0=D0, trials=cfg.trials)
    except mixing.StartDependentLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = {"graph": g.name, "result": res.to_dict(), "contraction": mixing.contraction_check(res).to_dict()}
    if 0 < cfg.eps < 1:
        out["amplified_sampling_bound"] = mixing.amplified_sampling_bound(W, cfg.eps, M).to_dict()
    write_json(_out(cfg, "amplify.json"), out)
    print(f"{g.name}: stage length {M}, eps0={res.eps0!r}, distance after {cfg.stages} stages {res.final_distance!r}")
    return 0


def cmd_bounds(cfg) -> int:
    g = parse_graph_spec(cfg.graph)
    family = graph.default_cut_family(g)
    P = classical.transition_matrix(g)
    phi, phi_cut = graph.conductance(g, family)
    phip, phip_cut = graph.boundary_phi_prime(g, family)
    lam = classical.spectral_gap(P, classical.stationary(g))
    out = {
        "graph": g.name, "n": g.n, "d": g.d,
        "phi": phi, "phi_cut": phi_cut.to_dict(),
        "phi_prime": phip, "phi_prime_cut": phip_cut.to_dict(),
        "lambda2": lam.lambda2, "lambda_min": lam.lambda_min, "gap": lam.gap,
        "checks": [
            classical.check_cond_bounds(g, family).to_dict(),
            graph.phi_prime_vs_phi_check(g, family).to_dict(),
            classical.check_spect_bounds(P, cfg.eps).to_dict(),
        ],
        "filling_lower_bound": mixing.filling_lower_bound(phip_cut, g.n, cfg.eps),
        "sampling_lower_bound": (1 - 3 * cfg.eps) * len(phip_cut.X) / (2 * (1 + cfg.eps) * len(phip_cut.boundary)),
    }
    if g == graph.cycle(g.n) and g.n % 2 == 1 and 0 < cfg.eps <= 1:
        out["cycle_mixing_bound"] = spectral.cycle_mixing_bound(g.n, cfg.eps)
    write_json(_out(cfg, "bounds.json"), out)
    print(f"{g.name}: phi={phi!r} phi'={phip!r} gap={lam.gap!r}")
    return 0


def cmd_graph_info(cfg) -> int:
    g = parse_graph_spec(cfg.graph)
    info = {
        "name": g.name, "n": g.n, "d": g.d, "edges": g.num_edges,
        "degrees": g.degrees, "self_loops": int((g.sigma == np.arange(g.n)).sum()),
        "connected": g.is_connected(), "transitive": g.transitive, "sigma": g.sigma,
    }
    if g.is_connected():
        family = graph.default_cut_family(g)
        info["phi"] = graph.conductance(g, family)[0]
        info["phi_prime"] = graph.boundary_phi_prime(g, family)[0]
    write_json(_out(cfg, "graph.json"), info)
    if cfg.write_graph:
        graph.write_graph(g, cfg.write_graph)
    sys.stdout.write(dumps(info))
    return 0


COMMANDS = {
    "spectrum": cmd_spectrum,
    "mix": cmd_mix,
    "verify": cmd_verify,
    "amplify": cmd_amplify,
    "bounds": cmd_bounds,
    "graph-info": cmd_graph_info,
}


def _add_common(p):
    p.add_argument("--config", help="JSON file whose keys override the defaults below")
    p.add_argument("--graph", default="cycle:5", help="cycle:n | complete:n | bridged:m | cayley:ORDERS:GENS | FILE")
    p.add_argument("--coin", default="hadamard", help="hadamard | dft | phase | FILE (JSON matrix)")
    p.add_argument("--walk", default="coined", choices=["coined", "matrix", "mixture"])
    p.add_argument("--matrix", help="JSON dn x dn walk matrix for --walk matrix")
    p.add_argument("--mixture-coins", default="hadamard,phase")
    p.add_argument("--mixture-probs", default=None)
    p.add_argument("--eps", type=float, default=mixing.DEFAULT_EPS)
    p.add_argument("--t-max", type=int, default=None, help="quantum horizon (default 200 n ln n)")
    p.add_argument("--t-max-classical", type=int, default=None, help="classical horizon (default 50 n^2)")
    p.add_argument("--family", default="default", choices=["default", "exhaustive", "singletons", "arcs"])
    p.add_argument("--cuts", default=None, help="extra subsets, e.g. '0,1;2,3,4'")
    p.add_argument("--starts", default="default", choices=["default", "all"])
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwalks", description="Quantum walk experiments on finite graphs")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("spectrum", help="eigenvalues, classes and spacing")
    _add_common(p)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eigenvectors", action="store_true")
    p = sub.add_parser("mix", help="quantum and classical mixing measures")
    _add_common(p)
    p = sub.add_parser("verify", help="invariant and inequality suite")
    _add_common(p)
    p.add_argument("--random-states", type=int, default=1000)
    p.add_argument("--mixture-steps", type=int, default=100)
    p = sub.add_parser("amplify", help="amplification protocol")
    _add_common(p)
    p.add_argument("--stages", type=int, default=3)
    p.add_argument("--stage-length", type=int, default=None)
    p.add_argument("--trials", type=int, default=0)
    p = sub.add_parser("bounds", help="conductance, boundary and spectral-gap bounds")
    _add_common(p)
    p = sub.add_parser("graph-info", help="describe a graph")
    _add_common(p)
    p.add_argument("--write-graph", default=None)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` so explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    known = set(vars(args))
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except (ConfigError, graph.InvalidGraphError, qwalk.NonUnitaryError, spectral.DenseCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
