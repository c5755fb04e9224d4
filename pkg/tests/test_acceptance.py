"""Acceptance criteria 1 to 10.  Each test carries ``@pytest.mark.criterion(n)``
and the terminal summary prints one pass/fail line per criterion."""
import csv
import itertools
import json
import math
import time
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy import special

from permdecomp import config
from permdecomp.generators import random_partition_instance
from permdecomp.measurelab import continuity_partition
from permdecomp.scenarios import momentum_overlap, run, run_gaussian, run_scattering
from permdecomp.verify import FINITE_CHECKS, TREE_CHECKS, run_property_suite
from permdecomp.wavegrid import (GaussianPacketParams, GridSpec, gaussian_f, make_gaussian,
                                 propagate_free, propagate_potential)

pytestmark = pytest.mark.usefixtures("clean_env")


def read_csv(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def statuses(report):
    return {c.name: c.status for c in report.checks}


@pytest.mark.criterion(1)
def test_momentum_overlap_of_separated_packets():
    start = time.perf_counter()
    wF = momentum_overlap(GaussianPacketParams(10.0, 1.0))
    elapsed = time.perf_counter() - start
    assert math.exp(wF["log_analytic"]) == pytest.approx(4.6e-23, rel=0.05)
    assert math.exp(wF["log_quadrature"]) == pytest.approx(4.6e-23, rel=0.05)
    assert wF["analytic"] == pytest.approx(math.sqrt(special.erfc(10.0)), rel=1e-12)
    assert elapsed < 1.0


@pytest.mark.criterion(2)
def test_spatial_curve_tracks_closed_form(tmp_path):
    cfg = config.resolve("gaussian", cli={"out_dir": str(tmp_path)}, environ={})
    cfg.packet.p0 = 2.0
    cfg.thresholds.w_momentum_reference = None
    cfg.grid.n_cells = 4096
    cfg.time.t_max, cfg.time.n_samples = 28.0, 57
    start = time.perf_counter()
    report = run_gaussian(cfg)
    elapsed = time.perf_counter() - start

    header, rows = read_csv(tmp_path / "w_curve.csv")
    table = dict(zip(header, np.array(rows).T))
    t, w = table["t"], table["w_position_grid"]
    expected = np.sqrt(special.erfc(2.0 * t / np.sqrt(1.0 + t ** 2)))
    assert len(t) >= 50
    assert np.abs(w - expected).max() <= 5e-3
    assert np.all(np.diff(w) <= 0)
    assert abs(w[-1] - math.sqrt(special.erfc(2.0))) <= 1e-3
    s = statuses(report)
    assert [s[k] for k in ("w_position.analytic_agrees", "w_position.monotone",
                           "w_position.asymptote")] == ["pass"] * 3
    assert elapsed < 30.0


@pytest.mark.criterion(3)
def test_separation_parameter():
    params = GaussianPacketParams(2.0, 1.0)
    times = np.linspace(0.0, 28.0, 57)
    f = np.asarray(gaussian_f(params, times))
    assert f[0] == 0.0
    assert np.all(np.diff(f) > 0)
    # ratio * t / sqrt(1 + t^2) in 40-digit decimal arithmetic
    getcontext().prec = 40
    tm = Decimal(repr(float(times[-1])))
    exact_gap = Decimal(2) - Decimal(2) * tm / (1 + tm * tm).sqrt()
    assert abs((params.ratio - f[-1]) - float(exact_gap)) <= 1e-12


@pytest.mark.criterion(4)
def test_finite_property_suite():
    start = time.perf_counter()
    res = run_property_suite(seed=2024, finite_trials=1000, tree_trials=0, partition_trials=0)
    elapsed = time.perf_counter() - start
    finite = [r for r in res if r.name in FINITE_CHECKS]
    for name in ("w.zero-iff-exact", "w.coarsening-monotone", "w.orthogonality-bound",
                 "w.heuristic-upper-bound"):
        assert name in {r.name for r in finite}
    assert [(r.name, r.violations, r.details) for r in finite if r.status != "pass"] == []
    assert all(r.trials == 1000 and r.comparisons > 0 for r in finite)
    assert elapsed < 120.0


@pytest.mark.criterion(5)
def test_tree_properties():
    res = run_property_suite(seed=2024, finite_trials=0, tree_trials=500, partition_trials=0)
    trees = [r for r in res if r.name in TREE_CHECKS]
    for name in ("tree.branch-leaf-bijection", "tree.branch-prefix",
                 "tree.refinement-transport", "tree.orthogonality-propagation"):
        assert name in {r.name for r in trees}
    assert all(r.trials == 500 and r.comparisons > 0 for r in trees)
    assert sum(r.violations for r in trees) == 0
    assert {r.status for r in trees} == {"pass"}


@pytest.mark.criterion(6)
def test_two_branches_reproduced(tmp_path):
    cfg = config.resolve("gaussian", cli={"out_dir": str(tmp_path)}, environ={})
    report = run_gaussian(cfg)
    summary = json.loads((tmp_path / "gaussian_summary.json").read_text())
    t1 = summary["branch_time"]
    assert t1 is not None
    probs = [b["probability"] for b in summary["branches"]]
    assert len(probs) == 2
    assert probs == pytest.approx([0.5, 0.5], abs=1e-6)

    dx = cfg.grid.box_length / cfg.grid.n_cells
    header, rows = read_csv(tmp_path / "trajectories.csv")
    assert header == ["t", "x", "branch_id", "prob"]
    for t, x, branch, _ in rows:
        velocity = cfg.packet.p0 / cfg.packet.mass
        target = (1 if branch == 0 else -1) * velocity * t if t >= t1 else 0.0
        assert abs(x - target) <= 2 * dx
    s = statuses(report)
    assert s["branches.count"] == s["branches.probabilities"] == \
        s["branches.trajectories"] == "pass"


def subset_residuals(weights, base, new):
    n = len(base)
    for r in range(1, n + 1):
        for I in itertools.combinations(range(n), r):
            a, b = base[list(I)].any(axis=0), new[list(I)].any(axis=0)
            yield math.sqrt(weights[a != b].sum())


@pytest.mark.criterion(7)
def test_constructive_partition_certificates():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    violations = 0
    for _ in range(200):
        inst = random_partition_instance(rng)
        mu, n = inst.measure, len(inst.regions)
        assert n <= 6
        res = continuity_partition(mu, inst.regions, inst.eps)
        base = np.array([r.contains(mu.points) for r in inst.regions])
        delta = inst.eps / (2 * (n - 1) ** 2)
        bounds = [(2 * i - 1) * delta for i in range(1, n)] + [(n - 1) ** 2 * delta]
        stages = [math.sqrt(mu.weights[base[i] != res.masks[i]].sum()) for i in range(n)]
        slack = 1e-12
        violations += int(not np.all(res.masks.sum(axis=0) == 1))
        violations += sum(r > inst.eps + slack for r in subset_residuals(mu.weights, base,
                                                                          res.masks))
        violations += sum(s > b + slack for s, b in zip(stages, bounds))
        violations += int(not res.certificate.passed)
    suite = run_property_suite(seed=2024, finite_trials=0, tree_trials=0, partition_trials=200)
    elapsed = time.perf_counter() - start
    assert violations == 0
    (certificates,) = [r for r in suite if r.name == "measurelab.continuity-partition"]
    assert certificates.status == "pass" and certificates.violations == 0
    assert elapsed < 60.0


@pytest.mark.criterion(8)
def test_velocity_channels_separate(tmp_path):
    cfg = config.resolve("scattering", cli={"out_dir": str(tmp_path)}, environ={})
    cfg.scattering.lanes = ["free"]
    report = run_scattering(cfg)
    header, rows = read_csv(tmp_path / "decay_free.csv")
    table = dict(zip(header, np.array(rows).T))
    w, wp = table["w_position"], table["w_momentum"]
    # the transient ends after the last rise beyond the sampling jitter
    rises = np.flatnonzero(np.diff(w) > cfg.thresholds.monotone_jitter)
    transient = rises[-1] + 1 if rises.size else 0
    assert transient < len(w) - 1
    assert w[-1] < 0.05
    assert np.ptp(wp) <= 1e-10
    s = statuses(report)
    assert s["free.final_w"] == s["free.monotone_after_transient"] == \
        s["free.momentum_constant"] == "pass"


@pytest.mark.criterion(9)
def test_propagator_hygiene():
    grid = GridSpec(4096, 512.0)
    psi = make_gaussian(GaussianPacketParams(2.0, 1.0), 1, grid)
    n0 = psi.norm2()
    stepped = psi
    for _ in range(1000):
        stepped = propagate_free(stepped, 0.01)
    assert abs(stepped.norm2() - n0) / n0 < 1e-10

    back = propagate_free(propagate_free(psi, 25.0), -25.0)
    assert np.abs(back.samples - psi.samples).max() < 1e-12

    strang = propagate_potential(psi, np.zeros(grid.n_cells), 0.01, 1000)
    free = propagate_free(psi, 10.0)
    assert np.abs(strang.samples - free.samples).max() < 1e-8


@pytest.mark.criterion(10)
@pytest.mark.parametrize("kind, overrides", [
    ("gaussian", {}),
    ("custom-tree", {}),
    ("verify", {"trials": 5}),
    ("scattering", {}),
])
def test_identical_reruns(tmp_path, kind, overrides):
    outputs = []
    for name in ("a", "b"):
        cfg = config.resolve(kind, cli={"out_dir": str(tmp_path / name), "seed": 11,
                                        **overrides}, environ={})
        report = run(cfg)
        report.write()
        files = {p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())
                 if p.name != "report.json"}
        outputs.append(files)
    assert outputs[0].keys() == outputs[1].keys() and outputs[0]
    for name in outputs[0]:
        assert outputs[0][name] == outputs[1][name], name
