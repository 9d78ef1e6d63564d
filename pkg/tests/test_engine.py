"""Write/read transaction lifecycle, MetaInfo, LastRead, GC watermark."""

import pytest
from hypothesis import given, settings, strategies as st

from viewlens.engine import Engine
from viewlens.errors import (
    AlreadyCommitted,
    EmptyViewport,
    EmptyWriteSet,
    UnknownNode,
    WriteOrderViolation,
)
from viewlens.graph import RESULT, UC, build_graph
from viewlens.lenses import Lens
from viewlens.scheduler import Policy
from viewlens.workloads import DEMO_GRAPH_SPEC


def demo_engine(policy="antifreeze"):
    # uniform costs + antifreeze => deterministic lexicographic schedule
    return Engine(build_graph(DEMO_GRAPH_SPEC), policy=Policy(policy))


class TestBeginWrite:
    def test_write_n1_stamps_dependents(self):
        e = demo_engine()
        txn = e.begin_write(["n1"], 0)
        assert txn.update_set == ("n1", "n3", "n4", "n5", "n6")
        meta = e.snapshot_meta()
        assert (meta.t_c, meta.t_s, meta.c_uc) == (0, 1, 5)

    def test_write_n2_counts_four_ucs(self):
        e = demo_engine()
        txn = e.begin_write(["n2"], 0)
        assert txn.update_set == ("n2", "n6", "n7", "n8")
        assert e.snapshot_meta().c_uc == 4

    def test_empty_write_set(self):
        with pytest.raises(EmptyWriteSet):
            demo_engine().begin_write([], 0)

    def test_non_base_write_set(self):
        with pytest.raises(UnknownNode):
            demo_engine().begin_write(["n3"], 0)


class TestStepWrite:
    def test_full_write_commits_with_clean_meta(self):
        e = demo_engine()
        txn = e.begin_write(["n1"], 0)
        installed = []
        while True:
            step = e.step_write(txn, 10)
            if step.committed:
                break
            installed.append(step.node)
        assert installed == ["n1", "n3", "n4", "n5", "n6"]
        meta = e.snapshot_meta()
        assert (meta.t_c, meta.t_s, meta.c_uc) == (1, 1, 0)

    def test_last_install_leaves_commit_to_final_step(self):
        e = demo_engine()
        txn = e.begin_write(["n1"], 0)
        for _ in range(4):
            e.step_write(txn, 5)
        assert e.snapshot_meta().c_uc == 1
        step = e.step_write(txn, 6)  # installs n6, the last remaining view
        assert step.node == "n6" and not step.committed
        meta = e.snapshot_meta()
        assert meta.c_uc == 0 and meta.t_c == 0  # step 3 still pending
        assert e.step_write(txn, 7).committed
        assert e.snapshot_meta().t_c == 1

    def test_step_after_commit(self):
        e = demo_engine()
        txn = e.run_write(["n1"], 0)
        with pytest.raises(AlreadyCommitted):
            e.step_write(txn, 1)

    def test_writes_commit_in_submission_order(self):
        e = demo_engine()
        first = e.begin_write(["n1"], 0)
        second = e.begin_write(["n2"], 1)
        with pytest.raises(WriteOrderViolation):
            e.step_write(second, 2)
        while not e.step_write(first, 3).committed:
            pass
        while not e.step_write(second, 4).committed:
            pass
        assert e.snapshot_meta().t_c == 2


class TestSnapshotMeta:
    def test_initial_state(self):
        assert demo_engine().snapshot_meta().as_dict() == {
            "t_c": 0, "t_s": 0, "c_uc": 0,
        }

    def test_after_begin(self):
        e = demo_engine()
        e.begin_write(["n1"], 0)
        meta = e.snapshot_meta()
        assert (meta.t_c, meta.t_s, meta.c_uc) == (0, 1, 5)

    def test_after_commit(self):
        e = demo_engine()
        e.run_write(["n1"], 0)
        meta = e.snapshot_meta()
        assert (meta.t_c, meta.t_s, meta.c_uc) == (1, 1, 0)


def mid_write_engine():
    """Write on n1 with n1, n3 computed; n4, n5, n6 still UC."""
    e = demo_engine()
    txn = e.begin_write(["n1"], 0)
    e.step_write(txn, 1)  # n1
    e.step_write(txn, 2)  # n3
    return e, txn


class TestRead:
    def test_gcpb_mid_write_mixes_results_and_ucs(self):
        e, _ = mid_write_engine()
        ev = e.read(["n3", "n4", "n5"], Lens("gcpb"), 10)
        assert ev.states == {
            "n3": (RESULT, 1), "n4": (UC, 1), "n5": (UC, 1),
        }
        assert ev.chosen_version == 1

    def test_gcnb_mid_write_reads_committed(self):
        e, _ = mid_write_engine()
        ev = e.read(["n3", "n4", "n5"], Lens("gcnb"), 10)
        assert ev.states == {
            "n3": (RESULT, 0), "n4": (RESULT, 0), "n5": (RESULT, 0),
        }

    def test_empty_viewport(self):
        e, _ = mid_write_engine()
        with pytest.raises(EmptyViewport):
            e.read([], Lens("gcpb"), 10)

    def test_unknown_viewport_node(self):
        e, _ = mid_write_engine()
        with pytest.raises(UnknownNode):
            e.read(["n3", "zz"], Lens("gcpb"), 10)

    def test_read_updates_gc_watermark(self):
        e = demo_engine()
        e.run_write(["n1"], 0)
        assert e.gc_watermark() == 0  # no read since t0
        e.read(["n3"], Lens("gcnb"), 1)
        assert e.gc_watermark() == 1

    def test_committed_graph_has_no_ucs(self):
        e, txn = mid_write_engine()
        while not e.step_write(txn, 3).committed:
            pass
        ev = e.read(sorted(e.graph.node_ids), Lens("gcnb"), 10)
        assert all(kind == RESULT for kind, _ in ev.states.values())

    def test_last_read_never_decreases(self):
        e, txn = mid_write_engine()
        e.read(["n3", "n4"], Lens("gcpb"), 10)
        floor = dict(e.last_read)
        e.read(["n3", "n4"], Lens("gcnb"), 11)
        for node, version in floor.items():
            assert e.last_read[node] >= version


class TestQueuedWrites:
    def test_stacked_ucs_and_overlap_corrected_c_uc(self):
        e = demo_engine()
        e.begin_write(["n1"], 0)  # UCs on n1, n3..n6
        e.begin_write(["n2"], 1)  # UCs on n2, n6..n8; n6 overlaps
        meta = e.snapshot_meta()
        assert meta.t_s == 2
        # n6 already showed a UC in the latest graph: counted once.
        assert meta.c_uc == 5 + 3
        assert e.count_ucs_at_latest() == meta.c_uc

    def test_commit_of_first_write_keeps_second_running(self):
        e = demo_engine()
        first = e.begin_write(["n1"], 0)
        second = e.begin_write(["n2"], 1)
        while not e.step_write(first, 2).committed:
            pass
        meta = e.snapshot_meta()
        assert meta.t_c == 1 and meta.t_s == 2
        # committed graph at t1 is complete even with w2 pending
        ev = e.read(sorted(e.graph.node_ids), Lens("gcnb"), 3)
        assert all(kind == RESULT for kind, _ in ev.states.values())
        while not e.step_write(second, 4).committed:
            pass
        assert e.snapshot_meta().as_dict() == {"t_c": 2, "t_s": 2, "c_uc": 0}


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_c_uc_matches_brute_force_rescan(data):
    """c_uc always equals the UC count visible in the latest graph."""
    e = demo_engine()
    txns = []
    base_choices = [["n1"], ["n2"], ["n1", "n2"]]
    for step in range(data.draw(st.integers(min_value=1, max_value=25))):
        do_begin = data.draw(st.booleans()) and len(txns) < 3
        if do_begin or not txns:
            txns.append(e.begin_write(data.draw(st.sampled_from(base_choices)), step))
        else:
            head = txns[0]
            result = e.step_write(head, step)
            if result.committed:
                txns.pop(0)
        assert e.snapshot_meta().c_uc == e.count_ucs_at_latest()


def test_gc_never_removes_items_a_reader_can_reach():
    e = demo_engine()
    e.run_write(["n1"], 0)
    e.run_write(["n2"], 1)
    e.read(["n3"], Lens("gcnb"), 2)  # t_r := 2
    removed = e.collect_garbage()
    assert removed > 0
    for node in e.graph.node_ids:
        for version in (2, 3):
            e.graph.item_at(node, version)  # must not raise
