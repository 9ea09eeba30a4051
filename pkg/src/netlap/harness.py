"""Experiment runner: config parsing, spectrum runs, convergence sweeps.

Configs are YAML mappings with a strict schema; unknown keys are rejected
with their line number.  Reports are CSV with a fixed column row; run
provenance (config echo, seeds, variant) goes into comment lines above the
header so identical configs reproduce identical rows.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import geometry as geo
from . import operators, spectra
from .laplacian import build
from .sampling import Net, SamplerConfig, sample_net

REPORT_HEADER = "eps,rho,N,k,lambda_gamma,lambda_ref,abs_err,rel_err,eigfn_err,wall_ms"
RATES_HEADER = "k,slope,intercept,n_points"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    space: geo.SpaceModel
    space_desc: dict
    sampler_strategy: str = "grid"
    sampler_seed: int = 0
    locus_bias: float = 1.0
    anchors: tuple | None = None
    mc_probes: int = 1_000_000
    rho_values: tuple[float, ...] = (0.05,)
    eps_fixed: float | None = None
    eps_c: float = 1.0
    eps_a: float = 2.0
    variant: str = "boundary"
    k_max: int = 5
    reflect_at_gluing: bool = True
    seed: int = 0
    tol: float = 1e-10
    dense_cutoff: int = 512
    compare_overrides: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def epsilon_for(self, rho: float) -> float:
        if self.eps_fixed is not None:
            return self.eps_fixed
        return self.eps_c * rho**self.eps_a


# ---------------------------------------------------------------------------
# config parsing


_SPACE_KEYS = {"kind", "length", "a", "b", "pages", "lengths", "circle", "segment",
               "parts", "vertices"}
_SAMPLER_KEYS = {"strategy", "seed", "bias", "anchors", "mc_probes"}
_EPS_KEYS = {"fixed", "c", "a"}
_RHO_KEYS = {"start", "factor", "count"}
_SOLVER_KEYS = {"tol", "dense_cutoff"}
_COMPARE_KEYS = {"variant", "reflect_at_gluing"}
_TOP_KEYS = {"space", "sampler", "rho", "epsilon", "variant", "k_max",
             "reflect_at_gluing", "seed", "solver", "compare"}


def _mark(node) -> str:
    return f"line {node.start_mark.line + 1}"


def _node_to_value(node):
    return yaml.safe_load(yaml.serialize(node))


def _check_mapping(node, allowed, context):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{_mark(node)}: {context} must be a mapping")
    out = {}
    for key_node, val_node in node.value:
        key = key_node.value
        if key not in allowed:
            raise ConfigError(f"{_mark(key_node)}: unknown key {key!r} in {context}")
        out[key] = val_node
    return out


def _build_space(desc: dict, reflect: bool) -> geo.SpaceModel:
    kind = desc.get("kind")
    if kind == "interval":
        return geo.interval(desc.get("length", 1.0))
    if kind == "circle":
        return geo.circle(desc.get("length", 1.0))
    if kind == "rectangle":
        return geo.rectangle(desc.get("a", 1.0), desc.get("b", 1.0))
    if kind == "flat_torus":
        return geo.flat_torus(desc.get("a", 1.0), desc.get("b", 1.0))
    if kind == "glued_circles":
        return geo.glued_circles(*desc.get("lengths", [1.0, 1.0]),
                                 reflect_at_gluing=reflect)
    if kind == "circle_segment":
        return geo.circle_with_segment(desc.get("circle", 1.0), desc.get("segment", 1.0),
                                       reflect_at_gluing=reflect)
    if kind == "metric_graph":
        return geo.metric_graph(desc.get("parts", []), desc.get("vertices", []),
                                reflect_at_gluing=reflect)
    if kind == "book_pages":
        return geo.book_pages(desc.get("pages", 3), desc.get("a", 1.0), desc.get("b", 1.0),
                              reflect_at_gluing=reflect)
    raise ConfigError(f"unknown space kind {kind!r}")


def parse_config(path) -> ExperimentConfig:
    """Strict schema validation with line-anchored messages."""
    with open(path) as fh:
        text = fh.read()
    root = yaml.compose(text)
    if root is None:
        raise ConfigError("empty config")
    top = _check_mapping(root, _TOP_KEYS, "config")
    if "space" not in top:
        raise ConfigError("config needs a 'space' section")
    warnings_list = []

    space_map = _check_mapping(top["space"], _SPACE_KEYS, "space")
    space_desc = {k: _node_to_value(v) for k, v in space_map.items()}

    strategy, sampler_seed, bias, anchors, mc_probes = "grid", None, 1.0, None, 1_000_000
    if "sampler" in top:
        smap = _check_mapping(top["sampler"], _SAMPLER_KEYS, "sampler")
        svals = {k: _node_to_value(v) for k, v in smap.items()}
        strategy = svals.get("strategy", "grid")
        sampler_seed = svals.get("seed")
        bias = float(svals.get("bias", 1.0))
        if "anchors" in svals:
            anchors = tuple((int(p), (a if isinstance(a, str) else float(a)))
                            for p, a in svals["anchors"])
        mc_probes = int(svals.get("mc_probes", 1_000_000))

    rho_values: tuple[float, ...]
    if "rho" in top:
        rnode = top["rho"]
        if isinstance(rnode, yaml.SequenceNode):
            rho_values = tuple(float(v) for v in _node_to_value(rnode))
        else:
            rmap = _check_mapping(rnode, _RHO_KEYS, "rho")
            rvals = {k: _node_to_value(v) for k, v in rmap.items()}
            start = float(rvals.get("start", 0.1))
            factor = float(rvals.get("factor", 0.5))
            count = int(rvals.get("count", 3))
            rho_values = tuple(start * factor**i for i in range(count))
    else:
        rho_values = (0.05,)
    if not rho_values:
        raise ConfigError("rho schedule is empty")

    eps_fixed, eps_c, eps_a = None, 1.0, 2.0
    if "epsilon" in top:
        emap = _check_mapping(top["epsilon"], _EPS_KEYS, "epsilon")
        evals = {k: _node_to_value(v) for k, v in emap.items()}
        if "fixed" in evals:
            eps_fixed = float(evals["fixed"])
        else:
            eps_c = float(evals.get("c", 1.0))
            eps_a = float(evals.get("a", 2.0))
            if eps_a <= 1.0:
                warnings_list.append(
                    f"epsilon rule exponent a={eps_a} <= 1: eps/rho does not vanish")

    tol, dense_cutoff = 1e-10, 512
    if "solver" in top:
        smap = _check_mapping(top["solver"], _SOLVER_KEYS, "solver")
        svals = {k: _node_to_value(v) for k, v in smap.items()}
        tol = float(svals.get("tol", 1e-10))
        dense_cutoff = int(svals.get("dense_cutoff", 512))

    compare_overrides = {}
    if "compare" in top:
        cmap = _check_mapping(top["compare"], _COMPARE_KEYS, "compare")
        compare_overrides = {k: _node_to_value(v) for k, v in cmap.items()}

    variant = _node_to_value(top["variant"]) if "variant" in top else "boundary"
    if variant not in ("closed", "boundary", "glued"):
        raise ConfigError(f"{_mark(top['variant'])}: unknown variant {variant!r}")
    k_max = int(_node_to_value(top["k_max"])) if "k_max" in top else 5
    reflect = bool(_node_to_value(top["reflect_at_gluing"])) \
        if "reflect_at_gluing" in top else True
    seed = int(_node_to_value(top["seed"])) if "seed" in top else 0

    space = _build_space(space_desc, reflect)
    for rho in rho_values:
        eps = (eps_fixed if eps_fixed is not None else eps_c * rho**eps_a)
        if eps >= rho / 4.0:
            warnings_list.append(f"eps={eps:g} >= rho/4 at rho={rho:g}")
    return ExperimentConfig(
        space=space, space_desc=space_desc, sampler_strategy=strategy,
        sampler_seed=seed if sampler_seed is None else int(sampler_seed),
        locus_bias=bias, anchors=anchors, mc_probes=mc_probes,
        rho_values=rho_values, eps_fixed=eps_fixed, eps_c=eps_c, eps_a=eps_a,
        variant=variant, k_max=k_max, reflect_at_gluing=reflect, seed=seed,
        tol=tol, dense_cutoff=dense_cutoff, compare_overrides=compare_overrides,
        warnings=tuple(warnings_list))


def apply_compare_overrides(cfg: ExperimentConfig) -> ExperimentConfig:
    over = cfg.compare_overrides
    out = cfg
    if "variant" in over:
        out = replace(out, variant=over["variant"])
    if "reflect_at_gluing" in over:
        reflect = bool(over["reflect_at_gluing"])
        out = replace(out, reflect_at_gluing=reflect,
                      space=_build_space(cfg.space_desc, reflect))
    return out


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunRow:
    eps: float
    rho: float
    n_points: int
    k: int
    lambda_gamma: float
    lambda_ref: float
    abs_err: float
    rel_err: float
    eigfn_err: float
    wall_ms: float


@dataclass
class ConvergenceReport:
    rows: list
    rates: list                      # (k, slope, intercept, n_points)
    warnings: tuple[str, ...] = ()
    failures: tuple[str, ...] = ()


def run_spectrum(cfg: ExperimentConfig, rho: float | None = None,
                 with_eigfn: bool = True) -> tuple[list, Net]:
    """One (eps, rho) run: sample, assemble, solve, compare to the reference
    spectrum.  Deterministic given the seeds."""
    rho = cfg.rho_values[0] if rho is None else rho
    eps = cfg.epsilon_for(rho)
    t0 = time.perf_counter()
    net = sample_net(cfg.space, SamplerConfig(
        cfg.sampler_strategy, eps, seed=cfg.sampler_seed, locus_bias=cfg.locus_bias,
        anchors=cfg.anchors, mc_probes=cfg.mc_probes))
    lap = build(cfg.space, net, rho, cfg.variant)
    sol = spectra.solve_graph_spectrum(lap, cfg.k_max, dense_cutoff=cfg.dense_cutoff,
                                       tol=cfg.tol, seed=cfg.seed)
    ref = spectra.reference_spectrum(cfg.space, cfg.k_max)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    clusters = ref.clusters()
    rows = []
    for k in range(cfg.k_max + 1):
        lam_g = float(sol.eigenvalues[k])
        lam_r = float(ref.eigenvalues[k])
        abs_err = abs(lam_g - lam_r)
        rel_err = abs_err / lam_r if lam_r > 0 else abs_err
        eig_err = math.nan
        if with_eigfn:
            eig_err = _eigfn_error(cfg, net, sol, ref, clusters, k)
        rows.append(RunRow(net.epsilon, rho, net.n_points, k, lam_g, lam_r,
                           abs_err, rel_err, eig_err, wall_ms))
    return rows, net


def _eigfn_error(cfg, net, sol, ref, clusters, k):
    """Subspace projection error for eigenvalue clusters fully captured in
    the solve window; NaN where the reference basis is unavailable."""
    lo = 0
    for val, mult in clusters:
        hi = lo + mult - 1
        if lo <= k <= hi:
            if hi > cfg.k_max:
                return math.nan
            try:
                basis = spectra.reference_eigenfunctions(cfg.space, val)
            except geo.GeometryError:
                return math.nan
            if not basis:
                return math.nan
            return operators.eigenspace_error(cfg.space, net,
                                              sol.eigenvectors[:, k], basis)
        lo = hi + 1
    return math.nan


def run_sweep(cfg: ExperimentConfig, threads: int = 1,
              with_eigfn: bool = True) -> ConvergenceReport:
    """Run every schedule point, fit log-log error slopes.  Failures are
    recorded and the sweep continues."""
    results: dict[int, list] = {}
    failures = []

    def one(i_rho):
        i, rho = i_rho
        return i, run_spectrum(cfg, rho, with_eigfn=with_eigfn)[0]

    jobs = list(enumerate(cfg.rho_values))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(one, j) for j in jobs]
            for fut, (i, rho) in zip(futs, jobs):
                try:
                    idx, rows = fut.result()
                    results[idx] = rows
                except Exception as exc:   # failure rows recorded, sweep continues
                    failures.append(f"rho={rho}: {exc}")
    else:
        for j in jobs:
            try:
                idx, rows = one(j)
                results[idx] = rows
            except Exception as exc:
                failures.append(f"rho={j[1]}: {exc}")
    rows = [r for i in sorted(results) for r in results[i]]
    rates = fit_rates(rows, cfg.k_max)
    return ConvergenceReport(rows, rates, warnings=cfg.warnings,
                             failures=tuple(failures))


def fit_rates(rows, k_max: int):
    rates = []
    for k in range(1, k_max + 1):
        pts = [(r.rho, r.rel_err) for r in rows if r.k == k and r.rel_err > 0
               and math.isfinite(r.rel_err)]
        if len(pts) >= 3:
            lx = np.log([p[0] for p in pts])
            ly = np.log([p[1] for p in pts])
            slope, intercept = np.polyfit(lx, ly, 1)
            rates.append((k, float(slope), float(intercept), len(pts)))
    return rates


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def write_report_csv(path, rows, provenance: list[str] = (),
                     warnings: tuple[str, ...] = ()):
    with open(path, "w") as fh:
        for line in provenance:
            fh.write(f"# {line}\n")
        for w in warnings:
            fh.write(f"# warning: {w}\n")
        fh.write(REPORT_HEADER + "\n")
        for r in rows:
            fh.write(",".join([
                _fmt(r.eps), _fmt(r.rho), str(r.n_points), str(r.k),
                _fmt(r.lambda_gamma), _fmt(r.lambda_ref), _fmt(r.abs_err),
                _fmt(r.rel_err), _fmt(r.eigfn_err), _fmt(r.wall_ms)]) + "\n")


def write_rates_csv(path, rates):
    with open(path, "w") as fh:
        fh.write(RATES_HEADER + "\n")
        for k, slope, intercept, n in rates:
            fh.write(f"{k},{_fmt(slope)},{_fmt(intercept)},{n}\n")


def provenance_lines(cfg: ExperimentConfig) -> list[str]:
    return [
        f"space: {cfg.space_desc}",
        f"sampler: {cfg.sampler_strategy} seed={cfg.sampler_seed} bias={cfg.locus_bias}",
        f"variant: {cfg.variant} reflect_at_gluing={cfg.reflect_at_gluing}",
        f"k_max: {cfg.k_max} seed={cfg.seed}",
        f"rho: {list(cfg.rho_values)} eps: "
        + (f"fixed={cfg.eps_fixed}" if cfg.eps_fixed is not None
           else f"c={cfg.eps_c} a={cfg.eps_a}"),
    ]
