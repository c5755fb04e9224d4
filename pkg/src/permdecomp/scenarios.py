"""End-to-end scenarios: two Gaussian packets, scattering channels, custom
position-cut trees and the property suite.

Each scenario writes deterministic data files into the output directory and
returns a :class:`RunReport`; timestamps and run times live only in
``report.json``.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ScenarioConfig
from .decomposition import CoarseningMap, Decomposition, w_general, w_two_from_log_densities, \
    w_two_spatial
from .errors import ConfigError, InvalidInputError
from .geometry import branch_trajectory, write_trajectories_csv
from .io import write_csv, write_json
from .scattering import (AsymptoticVelocityMeasure, ChannelPartition, convergence_diagnostic,
                         channel_separation_curve)
from .spaces import interval
from .tree import SpatialTree, TreeNode, branches, tree_to_json, validate_tree, w_plus_tree
from .verify import run_property_suite
from .wavegrid import (GaussianPacketParams, GridSpec, PositionMeasure, SplitStepPropagator,
                       analytic_gaussian_wE, analytic_gaussian_wF, edge_density, gaussian_f,
                       log_sqrt_erfc, make_gaussian, position_project)

EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_ALL_SKIPPED = 5

# quadrature grid for the log-domain momentum overlap
QUAD_POINTS = 200_001
QUAD_HALF_WIDTH = 40.0
# custom-tree pieces lighter than this fraction of the norm are merged into a sibling
NEGLIGIBLE = 1e-12


@dataclass
class Check:
    name: str
    status: str
    value: object = None
    threshold: object = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


@dataclass
class RunReport:
    scenario: str
    config: dict
    out_dir: Path
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    error: str | None = None
    exit_code: int | None = None
    started: str = ""

    def check(self, name, passed: bool, value=None, threshold=None, detail="") -> bool:
        self.checks.append(Check(name, "pass" if passed else "fail", value, threshold, detail))
        return bool(passed)

    def skip(self, name, detail=""):
        self.checks.append(Check(name, "skip", detail=detail))

    def wrote(self, path) -> Path:
        self.files.append(Path(path))
        return Path(path)

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        states = {c.status for c in self.checks}
        if "fail" in states:
            return "fail"
        if states and states == {"skip"}:
            return "skipped"
        return "pass"

    def final_exit_code(self) -> int:
        if self.exit_code is not None:
            return self.exit_code
        return {"fail": EXIT_FAIL, "skipped": EXIT_ALL_SKIPPED}.get(self.status, EXIT_PASS)

    def failed(self) -> list:
        return [c for c in self.checks if c.status == "fail"]

    def to_dict(self) -> dict:
        files = []
        for p in self.files:
            data = p.read_bytes()
            files.append({"name": p.name, "bytes": len(data),
                          "sha256": hashlib.sha256(data).hexdigest()})
        return {
            "scenario": self.scenario,
            "config": self.config,
            "status": self.status,
            "exit_code": self.final_exit_code(),
            "checks": [c.to_dict() for c in self.checks],
            "warnings": list(self.warnings),
            "files": files,
            "error": self.error,
            "metadata": {
                "started": self.started,
                "finished": _now(),
                "timings_s": self.timings,
                "version": __version__,
                "kernel_backend": kernels.BACKEND,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        }

    def write(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return write_json(self.out_dir / "report.json", self.to_dict())


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def new_report(cfg: ScenarioConfig) -> RunReport:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return RunReport(cfg.scenario, cfg.to_dict(), out, started=_now())


class _Timer:
    def __init__(self, report: RunReport, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.start = time.perf_counter()

    def __exit__(self, *exc):
        self.report.timings[self.name] = round(time.perf_counter() - self.start, 4)


def _grid(cfg: ScenarioConfig) -> GridSpec:
    try:
        return GridSpec(cfg.grid.n_cells, cfg.grid.box_length, cfg.grid.origin_offset)
    except InvalidInputError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _params(cfg: ScenarioConfig, p0=None, sigma_p=None, x0=None) -> GaussianPacketParams:
    p = cfg.packet
    return GaussianPacketParams(p.p0 if p0 is None else p0,
                                p.sigma_p if sigma_p is None else sigma_p,
                                p.x0 if x0 is None else x0, p.mass, p.hbar)


def _times(t_max: float, n: int) -> np.ndarray:
    return np.linspace(0.0, t_max, n)


# ------------------------------------------------------------------ gaussian

def momentum_overlap(params: GaussianPacketParams) -> dict:
    """Momentum w of the two-packet state: closed form, log quadrature, grid-free."""
    value, log_value = analytic_gaussian_wF(params)
    sp = params.sigma_p
    span = abs(params.p0) + QUAD_HALF_WIDTH * sp
    p = np.linspace(-span, span, QUAD_POINTS)
    log_norm = math.log(math.sqrt(math.pi) * sp)
    logs = [-(p - s * params.p0) ** 2 / sp ** 2 - log_norm for s in (1, -1)]
    # Simpson weights; the overlap's kink at p = 0 falls on a panel boundary
    weights = np.full(QUAD_POINTS, 2.0)
    weights[1::2] = 4.0
    weights[[0, -1]] = 1.0
    weights *= (p[1] - p[0]) / 3
    q_value, q_log = w_two_from_log_densities(logs[0], logs[1], weights)
    return {"analytic": value, "log_analytic": log_value,
            "quadrature": q_value, "log_quadrature": q_log}


def f_checks(params: GaussianPacketParams, times: np.ndarray, report: RunReport,
             tol: float) -> np.ndarray:
    """Record the separation-parameter checks and return the sampled values."""
    f = np.asarray(gaussian_f(params, times), dtype=float)
    ratio = params.ratio
    report.check("f.zero_at_start", f[0] == 0.0, float(f[0]), 0.0)
    steps = np.diff(f)
    if ratio == 0:
        report.check("f.monotone", bool(np.all(f == 0)), float(np.abs(f).max()), 0.0,
                     "zero separation: f vanishes identically")
    else:
        rising = steps * np.sign(ratio)
        report.check("f.monotone", bool(np.all(rising > 0)), float(rising.min()), 0.0,
                     "strictly increasing in |f| on the sample grid")
    a = params.mass * params.hbar / params.sigma_p ** 2
    t = float(times[-1])
    r = math.hypot(a, t)
    closed_gap = ratio * a * a / (r * (r + t))
    gap = ratio - float(f[-1])
    report.check("f.closed_form_gap", abs(gap - closed_gap) <= tol, abs(gap - closed_gap), tol,
                 f"p0/sigma_p - f(t_max) = {gap:.17g}")
    report.check("f.bounded", bool(np.all(np.abs(f) <= abs(ratio))),
                 float(np.abs(f).max()), abs(ratio))
    return f


def run_gaussian(cfg: ScenarioConfig) -> RunReport:
    """Two packets with opposite momenta from the same place.

    Writes ``w_curve.csv``, ``gaussian_summary.json``, ``tree.json``,
    ``trajectories.csv`` and wavefunction snapshots at ``t = 0`` and
    ``t_max``.
    """
    report = new_report(cfg)
    out, thr = report.out_dir, cfg.thresholds
    grid = _grid(cfg)
    params = _params(cfg)
    plus, minus = make_gaussian(params, 1, grid), make_gaussian(params, -1, grid)
    try:
        D = Decomposition([plus, minus])
    except InvalidInputError:
        report.warnings.append("the two packets are linearly dependent (p0 = 0); "
                               "w values are reported for the degenerate pair")
        D = Decomposition([plus, minus], check_rank=False)
    prop = SplitStepPropagator()
    times = _times(cfg.time.t_max, cfg.time.n_samples)

    with _Timer(report, "momentum_overlap"):
        wF = momentum_overlap(params)
        grid_wF = w_two_spatial(plus, minus, "momentum").value
    rel = abs(wF["log_quadrature"] - wF["log_analytic"])
    report.check("w_momentum.quadrature_agrees", rel <= 1e-6, rel, 1e-6,
                 "log-domain quadrature vs closed form, difference of logs")
    if thr.w_momentum_reference is not None:
        ref = thr.w_momentum_reference
        err = abs(wF["analytic"] - ref) / ref
        report.check("w_momentum.reference", err <= thr.w_momentum_rel_tol, err,
                     thr.w_momentum_rel_tol, f"analytic {wF['analytic']:.6g} vs {ref:.6g}")
    if wF["analytic"] > 1e-8:
        diff = abs(grid_wF - wF["analytic"])
        report.check("w_momentum.grid_agrees", diff <= thr.analytic_tol, diff, thr.analytic_tol)
    else:
        report.skip("w_momentum.grid_agrees",
                    f"grid value {grid_wF:.3g} is roundoff; the analytic value is "
                    f"{wF['analytic']:.3g}")

    with _Timer(report, "position_curve"):
        pos = PositionMeasure(grid)
        w_grid, edges = [], []
        for t in times:
            Dt = D.evolve(prop, t)
            w_grid.append(w_general(pos, Dt).value)
            edges.append(max(edge_density(e) for e in Dt))
        w_grid = np.asarray(w_grid)
        edges = np.asarray(edges)
    analytic = np.asarray(analytic_gaussian_wE(params, times))
    f = f_checks(params, times, report, thr.f_closed_form_tol)

    err = np.abs(w_grid - analytic)
    report.check("w_position.analytic_agrees", float(err.max()) <= thr.analytic_tol,
                 float(err.max()), thr.analytic_tol, f"{len(times)} sample times")
    rises = float(np.diff(w_grid).max(initial=0.0))
    report.check("w_position.monotone", rises <= thr.monotone_tol, rises, thr.monotone_tol,
                 "largest increase between consecutive samples")
    limit = math.exp(float(log_sqrt_erfc(abs(params.ratio))))
    gap = abs(float(w_grid[-1]) - limit)
    report.check("w_position.asymptote", gap <= thr.asymptote_tol, gap, thr.asymptote_tol,
                 f"w(t_max) = {w_grid[-1]:.6g}, limit {limit:.6g}")
    if edges.max() > 1e-8:
        report.warnings.append(f"density reached the box edge ({edges.max():.3g}); "
                               "periodic wrap may bias late samples")

    write_csv(report.wrote(out / "w_curve.csv"),
              ["t", "f", "w_position_grid", "w_position_analytic", "abs_error", "edge_density"],
              zip(times, f, w_grid, analytic, err, edges))

    below = np.flatnonzero(w_grid <= thr.branch_threshold)
    t1 = float(times[below[0]]) if below.size else None
    if t1 is None:
        report.warnings.append(f"no branching time: w never fell to {thr.branch_threshold:g} "
                               f"by t = {times[-1]:g}")
        T = SpatialTree(D.total, [], prop)
    else:
        D1 = D.evolve(prop, t1)
        T = SpatialTree(D.total, [TreeNode(t1, D1, CoarseningMap((0, 0), 1))], prop)

    with _Timer(report, "tree"):
        tv = validate_tree(T)
        report.check("tree.valid", tv.valid, "; ".join(tv.violations) or None)
        bs = branches(T)
        trajs = [branch_trajectory(T, b, times) for b in bs]
    write_json(report.wrote(out / "tree.json"), tree_to_json(T))
    write_trajectories_csv(report.wrote(out / "trajectories.csv"),
                           [(b.leaf_index, b.probability, tr) for b, tr in zip(bs, trajs)])

    if t1 is None:
        report.skip("branches.count", "no branching time found")
        report.skip("branches.probabilities", "no branching time found")
        report.skip("branches.trajectories", "no branching time found")
    else:
        report.check("branches.count", len(bs) == 2, len(bs), 2)
        perr = max(abs(b.probability - 0.5) for b in bs)
        report.check("branches.probabilities", perr <= thr.probability_tol, perr,
                     thr.probability_tol)
        dev = 0.0
        after = times >= t1
        for b, tr in zip(bs, trajs):
            sign = 1 if b.leaf_index == 0 else -1
            expected = params.centre(times, sign)
            dev = max(dev, float(np.abs(tr.points - expected)[after].max()),
                      float(np.abs(tr.points - params.x0)[~after].max(initial=0.0)))
        tol = thr.trajectory_cells * grid.dx
        report.check("branches.trajectories", dev <= tol, dev, tol,
                     "centroid vs x0 +/- t p0/m after the branching time")

    D.total.to_csv(report.wrote(out / "snapshot_t0.csv"))
    prop(D.total, float(times[-1])).to_csv(report.wrote(out / "snapshot_tmax.csv"))

    summary = {
        "packet": {"p0": params.p0, "sigma_p": params.sigma_p, "x0": params.x0,
                   "mass": params.mass, "hbar": params.hbar, "sigma_x": params.sigma_x,
                   "ratio": params.ratio},
        "grid": {"n_cells": grid.n_cells, "box_length": grid.box_length, "dx": grid.dx},
        "w_momentum": {**wF, "grid": grid_wF},
        "w_position_limit": limit,
        "w_position_final": float(w_grid[-1]),
        "branch_time": t1,
        "branches": [{"id": b.leaf_index, "probability": b.probability} for b in bs],
    }
    write_json(report.wrote(out / "gaussian_summary.json"), summary)
    return report


# ---------------------------------------------------------------- scattering

def sech2_well(grid: GridSpec, depth: float, centre: float = 0.0) -> np.ndarray:
    """``-depth sech^2(x - centre)`` without overflow in the tails."""
    e = np.exp(-2.0 * np.abs(grid.x - centre))
    return -depth * 4.0 * e / (1.0 + e) ** 2


def _monotone_tail(report, name, res, jitter):
    w = res.w_position
    tail = w[res.transient_index:]
    rise = float(np.diff(tail).max(initial=0.0))
    report.check(f"{name}.monotone_after_transient",
                 rise <= jitter and res.transient_index < len(w) - 1, rise, jitter,
                 f"transient ends at t = {res.transient_time:g}")


def _free_lane(cfg, report, grid):
    thr = cfg.thresholds
    params = _params(cfg)
    psi = make_gaussian(params, 1, grid) + make_gaussian(params, -1, grid)
    F = AsymptoticVelocityMeasure(grid, params.mass, params.hbar)
    times = _times(cfg.time.t_max, cfg.time.n_samples)
    res = channel_separation_curve(F, psi, ChannelPartition.velocity_sign(), times,
                         F.propagator(cfg.scattering.max_dt))
    report.warnings += [f"free: {w}" for w in res.warnings]
    report.check("free.final_w", res.w_position[-1] < thr.final_w,
                 float(res.w_position[-1]), thr.final_w)
    _monotone_tail(report, "free", res, thr.monotone_jitter)
    spread = float(np.ptp(res.w_momentum))
    report.check("free.momentum_constant", spread <= thr.momentum_constant_tol, spread,
                 thr.momentum_constant_tol)
    write_csv(report.wrote(report.out_dir / "decay_free.csv"),
              ["t", "w_position", "w_momentum", "edge_density"],
              zip(res.times, res.w_position, res.w_momentum, res.edge_density),
              comments=res.warnings)
    return res


def _well_lane(cfg, report, grid):
    thr, sc = cfg.thresholds, cfg.scattering
    params = _params(cfg, p0=sc.well_p0, sigma_p=sc.well_sigma_p)
    V = sech2_well(grid, sc.well_depth)
    F = AsymptoticVelocityMeasure(grid, params.mass, params.hbar, potential=V)
    report.check("well.has_bound_state", len(F.energies) > 0, len(F.energies), 1)
    if not len(F.energies):
        return None
    psi = make_gaussian(params, 1, grid)
    times = _times(sc.well_t_max, sc.well_n_samples)
    res = channel_separation_curve(F, psi, ChannelPartition.bound_vs_continuum(), times,
                         F.propagator(sc.max_dt))
    report.warnings += [f"well: {w}" for w in res.warnings]
    report.check("well.final_w", res.w_position[-1] < thr.final_w,
                 float(res.w_position[-1]), thr.final_w)
    _monotone_tail(report, "well", res, thr.monotone_jitter)
    comments = [f"bound energies {', '.join(f'{e:.12g}' for e in F.energies)}"] + res.warnings
    write_csv(report.wrote(report.out_dir / "decay_well.csv"),
              ["t", "w_position", "edge_density"],
              zip(res.times, res.w_position, res.edge_density), comments=comments)
    return res


def _diagnostic_lane(cfg, report, grid):
    thr, sc = cfg.thresholds, cfg.scattering
    params = _params(cfg, p0=sc.diagnostic_p0)
    psi = make_gaussian(params, 1, grid) + make_gaussian(params, -1, grid)
    F = AsymptoticVelocityMeasure(grid, params.mass, params.hbar)
    regions = [interval(lo=0.0), interval(hi=0.0, closed_hi=False)]
    n = sc.diagnostic_n_samples
    times = np.linspace(sc.diagnostic_t_max / n, sc.diagnostic_t_max, n)
    curve = convergence_diagnostic(F, psi, regions, times, F.propagator(sc.max_dt))
    report.warnings += [f"diagnostic: {w}" for w in curve.warnings]
    final = float(curve.errors[-1].max())
    report.check("diagnostic.final_error", final < thr.diagnostic_max, final, thr.diagnostic_max)
    write_csv(report.wrote(report.out_dir / "convergence_diagnostic.csv"),
              ["t", "e_nonnegative_velocity", "e_negative_velocity", "wrapped"],
              ([t, *e, int(w)] for t, e, w in zip(curve.times, curve.errors, curve.wrapped)),
              comments=curve.warnings)
    return curve


def run_scattering(cfg: ScenarioConfig) -> RunReport:
    """Channel decompositions by asymptotic velocity, free and with a well."""
    report = new_report(cfg)
    grid = _grid(cfg)
    lanes = {"free": _free_lane, "well": _well_lane, "diagnostic": _diagnostic_lane}
    for name in cfg.scattering.lanes:
        if cfg.fail_fast and report.failed():
            report.skip(name, "skipped after an earlier failure (fail-fast)")
            continue
        with _Timer(report, name):
            lanes[name](cfg, report, grid)
    return report


# --------------------------------------------------------------- custom tree

def _cells(grid: GridSpec, cuts) -> list:
    edges = [-np.inf, *sorted(float(c) for c in cuts), np.inf]
    return [(grid.x >= lo) & (grid.x < hi) for lo, hi in zip(edges[:-1], edges[1:])]


def _split(psi, cells, total2):
    """Position pieces of ``psi``; negligible ones are folded into the heaviest."""
    pieces = [position_project(psi, m) for m in cells]
    norms = np.array([p.norm2() for p in pieces])
    heavy = int(np.argmax(norms))
    keep = norms > NEGLIGIBLE * total2
    keep[heavy] = True
    for k in np.flatnonzero(~keep):
        pieces[heavy] = pieces[heavy] + pieces[k]
    return [p for p, k in zip(pieces, keep) if k]


def position_cut_tree(root, stages, propagator) -> SpatialTree:
    """Tree whose node at each stage cuts every evolved element at the given positions."""
    nodes, prev, prev_t = [], [root], 0.0
    total2 = root.norm2()
    for stage in stages:
        t = float(stage["t"])
        if t < prev_t or (nodes and t == prev_t):
            raise ConfigError("custom_tree stage times must be increasing and nonnegative")
        evolved = [propagator(e, t - prev_t) for e in prev]
        cells = _cells(root.grid, stage["cuts"])
        elems, grouping = [], []
        for j, e in enumerate(evolved):
            parts = _split(e, cells, total2)
            elems += parts
            grouping += [j] * len(parts)
        nodes.append(TreeNode(t, Decomposition(elems), CoarseningMap(tuple(grouping), len(prev))))
        prev, prev_t = elems, t
    return SpatialTree(root, nodes, propagator)


def run_custom_tree(cfg: ScenarioConfig) -> RunReport:
    """Superposed packets, split by position cuts at configured times."""
    report = new_report(cfg)
    grid = _grid(cfg)
    psi = None
    for spec in cfg.custom_tree.packets:
        params = _params(cfg, p0=float(spec.get("p0", cfg.packet.p0)),
                         x0=float(spec.get("x0", cfg.packet.x0)))
        packet = make_gaussian(params, 1, grid) * complex(spec.get("amplitude", 1.0))
        psi = packet if psi is None else psi + packet
    if psi is None:
        raise ConfigError("custom_tree.packets is empty")
    prop = SplitStepPropagator()
    times = _times(cfg.time.t_max, cfg.time.n_samples)
    with _Timer(report, "tree"):
        T = position_cut_tree(psi, cfg.custom_tree.stages, prop)
        tv = validate_tree(T)
        report.check("tree.valid", tv.valid, "; ".join(tv.violations) or None)
        bs = branches(T)
        leaves = len(T.leaves) if T.nodes else 1
        report.check("tree.branch_leaf_bijection",
                     len(bs) == leaves and len({b.leaf_index for b in bs}) == leaves,
                     len(bs), leaves)
        trajs = [branch_trajectory(T, b, times) for b in bs]
        wt = w_plus_tree(T, PositionMeasure(grid), times)
    if not tv.leaves_orthogonal:
        report.warnings.append("leaves are not orthogonal; branch probabilities are "
                               "normalised squared norms")
    write_json(report.wrote(report.out_dir / "tree.json"), tree_to_json(T))
    write_trajectories_csv(report.wrote(report.out_dir / "trajectories.csv"),
                           [(b.leaf_index, b.probability, tr) for b, tr in zip(bs, trajs)])
    write_json(report.wrote(report.out_dir / "custom_tree_summary.json"), {
        "w_plus": wt.to_dict(),
        "leaves_orthogonal": tv.leaves_orthogonal,
        "branches": [{"id": b.leaf_index, "path": list(b.path), "probability": b.probability}
                     for b in bs],
    })
    return report


# -------------------------------------------------------------------- verify

def run_verify(cfg: ScenarioConfig) -> RunReport:
    """The randomised property suite; one report check per property."""
    report = new_report(cfg)
    v = cfg.verify
    try:
        with _Timer(report, "suite"):
            results = run_property_suite(cfg.seed, v.finite_trials, v.tree_trials,
                                         v.partition_trials, v.inject_fault, cfg.fail_fast)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    for r in results:
        detail = f"{r.trials} trials, {r.comparisons} comparisons, {r.violations} violations"
        if r.details:
            detail += "; " + "; ".join(r.details)
        report.checks.append(Check(r.name, r.status, r.worst if r.comparisons else None,
                                   None, detail))
    write_json(report.wrote(report.out_dir / "verify_results.json"),
               {"seed": cfg.seed, "checks": [r.to_dict() for r in results]})
    return report


RUNNERS = {"gaussian": run_gaussian, "scattering": run_scattering,
           "custom-tree": run_custom_tree, "verify": run_verify}


def run(cfg: ScenarioConfig) -> RunReport:
    return RUNNERS[cfg.scenario](cfg)
