"""Optimization pipeline: mining, merging, consolidation, layering, guards."""
from __future__ import annotations

import math
from random import Random

import pytest

from gbpa import dag
from gbpa.errors import CorrelationKeyMissingError, MissingDurationError
from gbpa.optimizer import (
    ConsolidationGroup,
    OptimizerConfig,
    RiskPolicy,
    apply_consolidations,
    estimate_makespan,
    expected_duration_ms,
    infer_dependencies,
    insert_risk_controls,
    inter_node_wait,
    merge_redundant,
    optimize,
    parallelize,
)
from gbpa.process_spec import AgentKind, Lognormal, parse_spec, serialize_spec
from gbpa.scenarios import get_scenario

from .generators import random_serial_spec
from .test_engine import rnode, spec_of


# --- dependency mining ----------------------------------------------------

def test_mined_deps_carry_field_witnesses():
    spec = spec_of(
        [rnode("a"), rnode("b", reads=["out.a"]), rnode("c", reads=["out.b"])],
        edges=[("a", "b"), ("b", "c")],
        constraints=[("a", "c")],
    )
    mined = {d.pair(): d.witness for d in infer_dependencies(spec)}
    assert mined == {
        ("a", "b"): "out.a",
        ("b", "c"): "out.b",
        ("a", "c"): "constraint",
    }


def test_mined_deps_prefer_first_sorted_path():
    spec = spec_of(
        [rnode("a", writes={"aux.a", "out.a"}),
         rnode("b", reads=["out.a", "aux.a"])],
        edges=[("a", "b")],
    )
    (dep,) = infer_dependencies(spec)
    assert dep.witness == "aux.a"


def test_mined_deps_ignore_self_writes():
    spec = spec_of([rnode("a", reads=["out.a"], writes={"out.a"})])
    assert infer_dependencies(spec) == ()


# --- redundant-node merging -----------------------------------------------

def keyed(node_id, *, key, reads=(), writes=None, duration=1000, kind="reasoning"):
    doc = rnode(node_id, reads=reads, writes=writes, duration=duration, kind=kind)
    doc["merge_key"] = key
    return doc


def test_merge_takes_min_id_unions_writes_keeps_longest():
    spec = spec_of(
        [rnode("root"),
         keyed("check_b", key="screen", reads=["out.root"], duration=9000),
         keyed("check_a", key="screen", reads=["out.root"], duration=5000),
         keyed("check_c", key="screen", reads=["out.root"], duration=7000),
         rnode("sink", reads=["out.check_a", "out.check_b", "out.check_c"])],
        edges=[("root", "check_b"), ("root", "check_a"), ("root", "check_c"),
               ("check_b", "sink"), ("check_a", "sink"), ("check_c", "sink")],
    )
    merged, records = merge_redundant(spec)
    assert [r.survivor for r in records] == ["check_a"]
    assert records[0].absorbed == ("check_b", "check_c")
    assert records[0].merge_key == "screen"
    survivor = merged.node("check_a")
    assert survivor.writes == frozenset(
        {"out.check_a", "out.check_b", "out.check_c"})
    assert survivor.duration == 9000
    assert set(merged.node_ids) == {"root", "check_a", "sink"}
    assert set(map(tuple, merged.edges)) == {("root", "check_a"), ("check_a", "sink")}


def test_merge_duration_compares_lognormal_by_expectation():
    dist = {"lognormal": {"mu": math.log(20000), "sigma": 0.25}}
    spec = spec_of(
        [keyed("m1", key="k", duration=15000),
         keyed("m2", key="k", duration=dist)],
    )
    merged, _ = merge_redundant(spec)
    model = merged.node("m1").duration
    assert isinstance(model, Lognormal)
    assert expected_duration_ms(merged.node("m1")) == pytest.approx(
        20000 * math.exp(0.25 ** 2 / 2))


def test_merge_requires_same_kind_and_reads():
    spec = spec_of(
        [keyed("x", key="k", reads=["in.a"]),
         keyed("y", key="k", reads=["in.b"]),
         keyed("z", key="k", reads=["in.a"], kind="retrieval")],
    )
    merged, records = merge_redundant(spec)
    assert records == ()
    assert merged is spec


def test_merge_that_wrecks_declared_order_drops_edges():
    spec = spec_of(
        [keyed("a", key="k"), rnode("b", reads=["out.a"]),
         keyed("c", key="k"), rnode("d", reads=["out.c"])],
        edges=[("a", "b"), ("b", "c"), ("c", "d")],
    )
    merged, records = merge_redundant(spec)
    assert records[0].survivor == "a"
    # a absorbed c; keeping b->a and a->d alongside a->b would be cyclic.
    assert merged.edges == ()
    assert merged.node("a").writes == {"out.a", "out.c"}


def test_lookalikes_without_merge_key_are_an_error():
    spec = spec_of(
        [rnode("dup_1", reads=["in.x"], writes={"flag.ok"}),
         rnode("dup_2", reads=["in.x"], writes={"flag.ok"})],
        edges=[("dup_1", "dup_2")],
    )
    with pytest.raises(CorrelationKeyMissingError, match="dup_1, dup_2"):
        merge_redundant(spec)


def test_merge_remaps_fallback_and_constraints():
    spec = spec_of(
        [keyed("a", key="k"), keyed("b", key="k"), rnode("z", reads=["out.a"])],
        edges=[("a", "z"), ("b", "z")],
        fallback={"b": {"retries": 1, "fallback": None}},
        constraints=[("b", "z")],
    )
    merged, _ = merge_redundant(spec)
    assert merged.constraint_pairs == (("a", "z"),)
    policies = dict(merged.fallback)
    assert "a" in policies and "b" not in policies


# --- declared consolidations ----------------------------------------------

def test_consolidation_defaults_derive_from_members():
    spec = spec_of(
        [rnode("m1", reads=["in.x"], writes={"mid.y"}, duration=1000),
         rnode("m2", reads=["mid.y"], writes={"out.z"}, duration=2000),
         rnode("tail", reads=["out.z"])],
        edges=[("m1", "m2"), ("m2", "tail")],
    )
    group = ConsolidationGroup.from_doc({
        "id": "joined", "agent_kind": "api", "members": ["m1", "m2"],
    })
    out, applied = apply_consolidations(spec, [group])
    assert applied == ("joined",)
    node = out.node("joined")
    assert node.reads == {"in.x"}
    assert node.writes == {"mid.y", "out.z"}
    assert node.duration == 3000
    assert set(map(tuple, out.edges)) == {("joined", "tail")}


def test_consolidation_overrides_and_skip_when_members_gone():
    spec = spec_of([rnode("only")])
    gone = ConsolidationGroup.from_doc(
        {"id": "ghost", "agent_kind": "api", "members": ["m1", "m2"]})
    override = ConsolidationGroup.from_doc({
        "id": "only", "agent_kind": "authorization", "members": ["only"],
        "duration": 777, "reads": ["in.q"], "writes": ["out.q"],
        "risk_control": True, "effectful": True, "params": {"role": "dual"},
    })
    out, applied = apply_consolidations(spec, [gone, override])
    assert applied == ("only",)
    node = out.node("only")
    assert node.agent_kind is AgentKind.AUTHORIZATION
    assert (node.duration, node.reads, node.writes) == (777, {"in.q"}, {"out.q"})
    assert node.risk_control and node.effectful
    assert dict(node.params) == {"role": "dual"}


# --- parallelization ------------------------------------------------------

def test_parallelize_frees_independent_chain_links():
    spec = spec_of(
        [rnode("a", duration=1000),
         rnode("b", reads=["out.a"], duration=2000),
         rnode("c", reads=["out.a"], duration=3000),
         rnode("d", reads=["out.b", "out.c"], duration=1000)],
        edges=[("a", "b"), ("b", "c"), ("c", "d")],
    )
    assert estimate_makespan(spec) == 7000
    freed = parallelize(spec)
    assert set(map(tuple, freed.edges)) == {
        ("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")}
    assert estimate_makespan(freed) == 1000 + 3000 + 1000


def test_parallelize_respects_declared_constraints():
    spec = spec_of(
        [rnode("a"), rnode("b")],
        edges=[("a", "b")],
        constraints=[("a", "b")],
    )
    freed = parallelize(spec)
    # No data dependency, but the declared ordering survives as an edge.
    assert set(map(tuple, freed.edges)) == {("a", "b")}


# --- risk-control insertion -----------------------------------------------

def effectful(node_id, **kw):
    doc = rnode(node_id, **kw)
    doc["effectful"] = True
    doc["agent_kind"] = "api"
    return doc


GUARD_POLICY_DOC = {
    "name": "pre_effect_check",
    "trigger": {"effectful": True},
    "placement": "before",
    "template": {"id": "guard", "reads": [], "writes": ["guard.ok"],
                 "duration": 500, "params": {"control": "checkpoint"}},
}


def test_insertion_wires_guard_before_target():
    spec = spec_of(
        [rnode("prep"), effectful("pay", reads=["out.prep"])],
        edges=[("prep", "pay")],
    )
    policy = RiskPolicy.from_doc(GUARD_POLICY_DOC)
    out, inserted = insert_risk_controls(spec, [policy])
    assert inserted == ("guard",)
    assert out.node("guard").risk_control
    assert ("guard", "pay") in {tuple(e) for e in out.edges}
    assert ("guard", "pay") in out.constraint_pairs


def test_insertion_reads_wired_to_writers():
    doc = dict(GUARD_POLICY_DOC)
    doc["template"] = dict(doc["template"], reads=["out.prep"])
    spec = spec_of(
        [rnode("prep"), effectful("pay", reads=["out.prep"])],
        edges=[("prep", "pay")],
    )
    out, _ = insert_risk_controls(spec, [RiskPolicy.from_doc(doc)])
    assert ("prep", "guard") in {tuple(e) for e in out.edges}


def test_insertion_is_idempotent():
    spec = spec_of(
        [rnode("prep"), effectful("pay", reads=["out.prep"])],
        edges=[("prep", "pay")],
    )
    policy = RiskPolicy.from_doc(GUARD_POLICY_DOC)
    once, inserted = insert_risk_controls(spec, [policy])
    again, inserted_again = insert_risk_controls(once, [policy])
    assert inserted == ("guard",) and inserted_again == ()
    assert serialize_spec(again) == serialize_spec(once)


def test_insertion_suffixes_second_guard():
    spec = spec_of(
        [effectful("pay_x", writes={"out.pay_x"}),
         effectful("pay_y", writes={"out.pay_y"})],
    )
    out, inserted = insert_risk_controls(spec, [RiskPolicy.from_doc(GUARD_POLICY_DOC)])
    assert inserted == ("guard", "guard_2")
    edges = {tuple(e) for e in out.edges}
    assert ("guard", "pay_x") in edges and ("guard_2", "pay_y") in edges


def test_after_placement_and_guard_immunity():
    doc = dict(GUARD_POLICY_DOC, placement="after", name="post_effect_check")
    spec = spec_of([effectful("pay")])
    out, inserted = insert_risk_controls(spec, [RiskPolicy.from_doc(doc)])
    assert inserted == ("guard",)
    assert ("pay", "guard") in {tuple(e) for e in out.edges}
    # A catch-all trigger still never matches risk-control nodes.
    catch_all = RiskPolicy.from_doc(dict(doc, trigger={}))
    _, more = insert_risk_controls(out, [catch_all])
    assert more == ()


def test_bad_placement_rejected():
    with pytest.raises(ValueError, match="placement"):
        RiskPolicy.from_doc(dict(GUARD_POLICY_DOC, placement="around"))


def test_reimbursement_baseline_gets_two_guards():
    scenario = get_scenario("reimbursement")
    spec = scenario.baseline_spec()
    config = OptimizerConfig.from_doc(scenario.optimizer_doc)
    assert sum(n.risk_control for n in spec.nodes) == 1
    out, inserted = insert_risk_controls(spec, config.risk_policies)
    assert inserted == ("transfer_audit", "transfer_archive")
    assert sum(n.risk_control for n in out.nodes) == 3
    _, again = insert_risk_controls(out, config.risk_policies)
    assert again == ()


# --- scoring --------------------------------------------------------------

def test_makespan_is_sum_of_stage_maxima():
    spec = spec_of(
        [rnode("a", duration=100), rnode("b", duration=900),
         rnode("z", reads=["out.a", "out.b"], duration=50)],
        edges=[("a", "z"), ("b", "z")],
    )
    assert estimate_makespan(spec) == 950


def test_makespan_uses_lognormal_mean():
    spec = spec_of([rnode("a", duration={"lognormal": {"mu": 7.0, "sigma": 0.5}})])
    assert estimate_makespan(spec) == pytest.approx(math.exp(7.0 + 0.125))


def test_strict_makespan_requires_durations():
    spec = spec_of([rnode("a", duration=0)])
    with pytest.raises(MissingDurationError):
        estimate_makespan(spec, strict=True)
    dist = spec_of([rnode("a", duration={"lognormal": {"mu": 0.0, "sigma": 0.1}})])
    assert estimate_makespan(dist, strict=True) > 0


def test_inter_node_wait_counts_barrier_stalls():
    spec = spec_of(
        [rnode("a", duration=1000), rnode("slow", duration=5000),
         rnode("b", reads=["out.a"], duration=100)],
        edges=[("a", "b")],
    )
    # b is ready at 1000 but the stage barrier holds it until 5000.
    assert inter_node_wait(spec) == 4000


def test_wait_is_zero_for_pure_chain():
    spec = spec_of(
        [rnode("a"), rnode("b", reads=["out.a"]), rnode("c", reads=["out.b"])],
        edges=[("a", "b"), ("b", "c")],
    )
    assert inter_node_wait(spec) == 0


# --- whole pipeline -------------------------------------------------------

def merge_mapping(merges) -> dict[str, str]:
    return {a: m.survivor for m in merges for a in m.absorbed}


def assert_optimize_preserves(spec):
    """Pipeline invariants with no external config: nothing added, absorbed
    work survives in its merge survivor, and the estimate never regresses."""
    report = optimize(spec)
    assert report.consolidated == () and report.inserted == ()
    mapping = merge_mapping(report.merges)
    after_ids = set(report.after.node_ids)
    assert {mapping.get(n, n) for n in spec.node_ids} == after_ids

    for node in spec.nodes:
        twin = report.after.node(mapping.get(node.id, node.id))
        if node.effectful:
            assert twin.effectful, node.id
        assert node.id == twin.id or node.writes <= twin.writes

    before_writes = frozenset().union(*(n.writes for n in spec.nodes))
    after_writes = frozenset().union(*(n.writes for n in report.after.nodes))
    assert before_writes == after_writes

    assert report.makespan_after_ms <= report.makespan_before_ms + 1e-6

    edges = [tuple(e) for e in report.after.edges] + list(report.after.constraint_pairs)
    for dep in report.mined:
        src = mapping.get(dep.src, dep.src)
        dst = mapping.get(dep.dst, dep.dst)
        assert src == dst or dag.has_path(
            list(after_ids), edges, src, dst), dep
    # The optimized spec is still a valid document.
    parse_spec(serialize_spec(report.after))
    return report


def test_pipeline_preserves_work_on_random_serial_specs():
    rng = Random(7)
    merges_seen = 0
    for _ in range(150):
        spec = random_serial_spec(rng, rng.randrange(2, 20))
        report = assert_optimize_preserves(spec)
        merges_seen += len(report.merges)
    assert merges_seen > 20  # the sample genuinely exercises merging


def test_report_reduction_properties():
    spec = spec_of(
        [rnode("a", duration=1000),
         rnode("b", reads=["out.a"], duration=1000),
         rnode("c", reads=["out.a"], duration=1000)],
        edges=[("a", "b"), ("b", "c")],
    )
    report = optimize(spec)
    assert report.makespan_before_ms == 3000
    assert report.makespan_after_ms == 2000
    assert report.makespan_reduction == pytest.approx(1 / 3)
    # c was ready at 1000 but stuck behind b's stage until 2000.
    assert report.wait_before_ms == 1000
    assert report.wait_after_ms == 0 and report.wait_reduction == 1.0
