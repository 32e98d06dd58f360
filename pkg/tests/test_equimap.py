import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pesym.equimap import (
    GENERIC_SYSTEM, EquivalenceParams, FormPreservingMap, apply_equivalence, check_residuals,
    equivalence_sweep, find_reductions, fp_constraint_residuals, g_scaling_report,
    load_reductions, pull_back_generator, push_system, theorem1_check,
    transported_symmetry_ratios,
)
from pesym.liealg import PESystem, find_entry
from pesym.symexpr import parse

SCALES = st.sampled_from([-1.0, -0.5, 0.5, 1.0, 2.0])
SHIFTS = st.floats(-1, 1, allow_nan=False)
PARAMS = st.builds(EquivalenceParams, SCALES, SHIFTS, SCALES, SHIFTS, SCALES, SHIFTS, SCALES,
                   SHIFTS)
GENERIC = PESystem.from_strings(*GENERIC_SYSTEM)


def _same_system(a: PESystem, b: PESystem) -> bool:
    res = [parse(f"({x}) - ({y})") for x, y in ((a.D, b.D), (a.F, b.F), (a.G, b.G))]
    return check_residuals(res, a.function_names | b.function_names)[0] < 1e-10


@settings(max_examples=25, deadline=None)
@given(PARAMS)
def test_equivalence_maps_satisfy_form_preserving_constraints(p):
    m = FormPreservingMap.from_equivalence(p)
    res = fp_constraint_residuals(m, GENERIC, apply_equivalence(GENERIC, p))
    assert check_residuals(res, GENERIC.function_names)[0] < 1e-10


@settings(max_examples=15, deadline=None)
@given(PARAMS, PARAMS)
def test_equivalence_group_composition(p, q):
    two_steps = apply_equivalence(apply_equivalence(GENERIC, p), q)
    assert _same_system(two_steps, apply_equivalence(GENERIC, p.then(q)))


def test_identity_equivalence_is_neutral():
    assert _same_system(apply_equivalence(GENERIC, EquivalenceParams()), GENERIC)


def test_g_scaling_candidates_split_off_a3_equal_one():
    rep = g_scaling_report(GENERIC, EquivalenceParams(a1=2, a2=0.3, a3=2, a5=0.5, a7=-1))
    assert rep["derived"] < 1e-12 and rep["printed"] > 0.1
    rep = g_scaling_report(GENERIC, EquivalenceParams(a1=2, a3=-1, a7=-1))
    assert rep["printed"] > 0.1
    rep = g_scaling_report(GENERIC, EquivalenceParams(a1=2, a3=1, a7=3))
    assert rep["derived"] < 1e-12 and rep["printed"] < 1e-12
    sweep = equivalence_sweep(count=4, seed=2)
    assert sweep[0]["a3"] == 2.0 and all(r["ratio_derived"] < 1e-10 for r in sweep)


def test_reduction_rows_and_branches():
    rows = load_reductions()
    assert len({(r.table, r.case) for r in rows}) == 22
    assert sum(r.table == 3 for r in {(r.table, r.case): r for r in rows}.values()) == 8
    assert {r.branch for r in find_reductions(4, 3)} == {"alpha = 0", "alpha != 0"}


@pytest.mark.parametrize("table,case,target", [(3, 4, "T1.8"), (4, 3, None), (3, 1, None),
                                               (4, 10, None)])
def test_both_routes_pass(table, case, target):
    for e in find_reductions(table, case):
        if target:
            assert e.target_id == target
        for seed in (0, 1):
            assert push_system(e, seed=seed).passed
            assert theorem1_check(e, seed=seed).passed


def test_branch_target_of_alpha_zero_row():
    (e,) = [r for r in find_reductions(4, 3) if r.branch == "alpha = 0"]
    assert e.target_id == "T2.11"


def test_perturbed_map_fails_both_routes():
    (e,) = find_reductions(3, 4)
    bad = dataclasses.replace(e, map=dict(e.map, U=f"1.01*({e.map['U']})"))
    assert not push_system(bad, seed=0).passed
    assert not theorem1_check(bad, seed=0).passed


def test_pulled_back_generators_are_source_symmetries():
    (e,) = find_reductions(3, 4)
    rng = np.random.default_rng(5)
    vals = e.sample_params(rng)
    tgt = find_entry(1, 8)
    tvals = e.target_params(vals)
    gens = [g for t in tgt.generators for g in tgt.expand(t.effective, tvals)]
    ratios = transported_symmetry_ratios(e, vals, gens)
    assert max(ratios) < 1e-9
    pg = pull_back_generator(e, vals, gens[0])
    assert pg.label.startswith("pull-back")
