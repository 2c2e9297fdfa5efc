import json

import numpy as np
import pytest

from splitting.errors import CommunicationError, ContractError, RegularityError
from splitting.graph import complete_graph, cycle_graph, path_graph
from splitting.iteration import StopRule, TraceStatus
from splitting.operators import prox_op, zero_op
from splitting.simulator import (Message, Network, Phase, ReadRecord, SimTrace, audit_messages,
                                 equivalence_check, simulate, x_pass_schedule)

from conftest import consensus_ops, random_monotone_affine


def test_zero_operators_stationary(k3):
    trace = simulate(k3, [zero_op(1)] * 3, 0.5)
    assert trace.status is TraceStatus.CONVERGED
    assert trace.rounds == 1
    assert trace.records[0].msgs_v == 0
    assert all(not np.any(m.payload) for m in trace.messages)


def test_k3_consensus(k3):
    trace = simulate(k3, consensus_ops([0.0, 3.0, 6.0]), 0.5, stop=StopRule(1e-10, 1e-10), reference=[3.0])
    assert trace.status is TraceStatus.CONVERGED
    point, _ = trace.solution()
    assert point[0] == pytest.approx(3.0, abs=1e-6)
    assert audit_messages(trace, k3)


def test_petersen_matches_centralized(petersen, rng):
    F = random_monotone_affine(10, 2, rng)
    assert equivalence_check(petersen, F, 0.5, 100) <= 1e-12


def test_k3_affine_equivalence(k3):
    assert equivalence_check(k3, consensus_ops([1.0, -2.0, 7.0]), 0.5, 100) <= 1e-12


def test_c4_box_equivalence(c4):
    F = [prox_op('box', 1, lower=lo, upper=hi) for lo, hi in ((0.0, 3.0), (1.0, 4.0), (-1.0, 2.0), (0.5, 5.0))]
    assert equivalence_check(c4, F, 0.5, 100) <= 1e-12


def test_zero_operators_equivalence_exact(c4):
    assert equivalence_check(c4, [zero_op(2)] * 4, 0.5, 100) == 0.0


def test_petersen_message_counts(petersen, rng):
    trace = simulate(petersen, random_monotone_affine(10, 1, rng), 0.5, stop=StopRule.fixed(20))
    assert audit_messages(trace, petersen)
    for record in trace.records:
        assert record.msgs_x == 15
        assert record.msgs_v == 30
    assert len(trace.messages) == 20 * 45


def test_x_pass_only_goes_upward(c4):
    trace = simulate(c4, consensus_ops([1, 2, 3, 4]), 0.5, stop=StopRule.fixed(3))
    for message in trace.messages:
        if message.phase is Phase.X_PASS:
            assert message.sender < message.receiver


def test_v_updates_conserve_sum(petersen, rng):
    trace = simulate(petersen, random_monotone_affine(10, 2, rng), 0.5, stop=StopRule.fixed(50))
    assert max(r.v_change_sum for r in trace.records) <= 1e-12


def test_deterministic_replay(c4):
    F = consensus_ops([0.0, 1.0, 5.0, 2.0])
    first = simulate(c4, F, 0.5, stop=StopRule.fixed(40))
    second = simulate(c4, F, 0.5, stop=StopRule.fixed(40))
    assert first.to_csv() == second.to_csv()
    assert np.array_equal(first.final_x, second.final_x)


def test_non_regular_graph_rejected():
    with pytest.raises(RegularityError):
        simulate(path_graph(3), [zero_op(1)] * 3, 0.5)


def test_v0_must_sum_to_zero(k3):
    with pytest.raises(ContractError):
        simulate(k3, [zero_op(1)] * 3, 0.5, v0=np.ones((3, 1)))


def test_audit_rejects_non_edge_message():
    c6 = cycle_graph(6)
    trace = SimTrace(messages=[Message(0, 3, 0, Phase.X_PASS, np.zeros(1))])
    assert not audit_messages(trace, c6)


def test_audit_rejects_foreign_read():
    c6 = cycle_graph(6)
    trace = SimTrace(reads=[ReadRecord(1, 4, 0, Phase.V_PASS)])
    assert not audit_messages(trace, c6)


def test_audit_rejects_aggregate_primitive(k3):
    trace = SimTrace(primitives={'send', 'receive', 'allreduce'})
    assert not audit_messages(trace, k3)


def test_audit_needs_message_log(k3):
    trace = simulate(k3, [zero_op(1)] * 3, 0.5, record_messages=False)
    with pytest.raises(ContractError):
        audit_messages(trace, k3)


def test_network_refuses_non_neighbour():
    network = Network(cycle_graph(6))
    with pytest.raises(CommunicationError):
        network.send(0, 3, 0, Phase.V_PASS, np.zeros(1))


def test_x_pass_schedule(two_edges):
    assert x_pass_schedule(complete_graph(3)) == [[0], [1], [2]]
    # 3 waits for 2, which waits for 1
    assert x_pass_schedule(cycle_graph(4)) == [[0], [1], [2], [3]]
    assert x_pass_schedule(two_edges) == [[0, 2], [1, 3]]


def test_sim_trace_exports(c4, tmp_path):
    trace = simulate(c4, consensus_ops([1, 2, 3, 4]), 0.5, stop=StopRule.fixed(2))
    text = trace.to_csv(tmp_path / "sim.csv")
    assert text.splitlines()[0] == "k,fp_residual,consensus_residual,ref_error,msgs_x,msgs_v"
    assert text.splitlines()[-1] == "# status=max-iters"

    lines = trace.message_log_lines().splitlines()
    assert len(lines) == 2 * (4 + 8)
    first = json.loads(lines[0])
    assert first == {'round': 0, 'phase': 'x-pass', 'from': 0, 'to': 1}
    with_payload = json.loads(trace.message_log_lines(include_payloads=True).splitlines()[0])
    assert 'payload' in with_payload


def test_equivalence_check_with_non_conforming_gamma(k3):
    F = consensus_ops([1.0, -2.0, 7.0])
    with pytest.raises(ContractError):
        equivalence_check(k3, F, 1.5, 20)
    assert equivalence_check(k3, F, 1.5, 20, allow_gamma=True) <= 1e-10
