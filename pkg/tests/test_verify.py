import pytest

from permdecomp.verify import (FINITE_CHECKS, PARTITION_CHECKS, SLACKS, TREE_CHECKS,
                               run_property_suite)


@pytest.fixture(scope="module")
def small_run():
    return run_property_suite(seed=3, finite_trials=40, tree_trials=20, partition_trials=20)


def test_every_check_passes(small_run):
    assert [r.name for r in small_run] == FINITE_CHECKS + TREE_CHECKS + PARTITION_CHECKS
    failing = [(r.name, r.details) for r in small_run if r.status != "pass"]
    assert not failing
    trials = dict.fromkeys(FINITE_CHECKS, 40) | dict.fromkeys(TREE_CHECKS, 20) | \
        dict.fromkeys(PARTITION_CHECKS, 20)
    assert all(r.trials == trials[r.name] for r in small_run)
    assert all(r.comparisons > 0 and r.violations == 0 for r in small_run)


def test_same_seed_same_results(small_run):
    again = run_property_suite(seed=3, finite_trials=40, tree_trials=20, partition_trials=20)
    assert [r.to_dict()["worst"] for r in again] == [r.to_dict()["worst"] for r in small_run]


@pytest.mark.parametrize("name", ["w.orthogonality-bound", "tree.branch-prefix",
                                  "measurelab.continuity-partition"])
def test_injected_fault_fails_only_that_check(name):
    res = run_property_suite(seed=3, finite_trials=10, tree_trials=5, partition_trials=5,
                             inject_fault=name)
    status = {r.name: r.status for r in res}
    assert status.pop(name) == "fail"
    assert set(status.values()) == {"pass"}


def test_zero_trials_skip_everything():
    res = run_property_suite(finite_trials=0, tree_trials=0, partition_trials=0)
    assert len(res) == len(SLACKS)
    assert {r.status for r in res} == {"skip"}


def test_fail_fast_skips_later_suites():
    res = run_property_suite(seed=1, finite_trials=5, tree_trials=5, partition_trials=5,
                             inject_fault="finite.polarization", fail_fast=True)
    status = {r.name: r.status for r in res}
    assert status["finite.polarization"] == "fail"
    assert all(status[n] == "skip" for n in TREE_CHECKS + PARTITION_CHECKS)


def test_unknown_fault_name():
    with pytest.raises(KeyError):
        run_property_suite(finite_trials=1, inject_fault="no.such-check")
