"""
Decentralized execution of the d-regular scheme as per-node state machines.

Each round has two phases:
  x-pass  nodes activate in ascending id; node i computes
          x_i = J_{F_i}(v_i + tau * sum_{j<i, j~i} x_j) and sends x_i to every
          higher-id neighbour.
  v-pass  every node sends x_i to all neighbours, then updates
          v_i <- v_i - gamma * tau * (d x_i - sum_{j~i} x_j).

Nodes only see their own state and delivered messages; the network refuses
any message that does not travel along an edge. Residuals are gathered by
the engine for instrumentation only.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Union

import numpy as np
import pandas as pd

from .errors import CommunicationError, ContractError
from .graph import Graph, consensus_step_size
from .iteration import (StopRule, TRACE_COLUMNS, TraceStatus, _check_operands, _require_gamma,
                        iterate_reduced, write_trace_csv)
from .numerics import as_blocks, consensus_residual, kron_apply
from .operators import MonotoneOperator
from .schemes import regular_graph_scheme
from .scheme_core import in_range_of_S

logger = logging.getLogger(__name__)

ALLOWED_PRIMITIVES = frozenset({'send', 'receive'})


class Phase(Enum):
    X_PASS = "x-pass"
    V_PASS = "v-pass"


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    round: int
    phase: Phase
    payload: Optional[np.ndarray] = None

    def to_record(self, include_payload: bool = False) -> Dict[str, Any]:
        record: Dict[str, Any] = {'round': self.round, 'phase': self.phase.value,
                                  'from': self.sender, 'to': self.receiver}
        if include_payload and self.payload is not None:
            record['payload'] = self.payload.tolist()
        return record


@dataclass(frozen=True)
class ReadRecord:
    """Node `reader` consumed a value owned by node `source`"""
    reader: int
    source: int
    round: int
    phase: Phase


class Network:
    """Synchronous message bus restricted to graph edges"""

    def __init__(self, graph: Graph, record: bool = True):
        self.graph = graph
        self.record = record
        self.inboxes: List[List[Message]] = [[] for _ in range(graph.vertex_count)]
        self.log: List[Message] = []
        self.reads: List[ReadRecord] = []
        self.primitives: Set[str] = set()
        self.sent = {Phase.X_PASS: 0, Phase.V_PASS: 0}

    def send(self, sender: int, receiver: int, round_: int, phase: Phase, payload: np.ndarray) -> None:
        self.primitives.add('send')
        if not self.graph.has_edge(sender, receiver):
            raise CommunicationError(f"node {sender} cannot reach non-neighbour {receiver}")
        message = Message(sender, receiver, round_, phase, payload.copy())
        self.inboxes[receiver].append(message)
        self.sent[phase] += 1
        if self.record:
            self.log.append(message)

    def receive(self, node: int, phase: Phase) -> List[Message]:
        """Drain the inbox of `node` for one phase, ordered by sender id"""
        self.primitives.add('receive')
        taken = sorted((m for m in self.inboxes[node] if m.phase is phase), key=lambda m: m.sender)
        self.inboxes[node] = [m for m in self.inboxes[node] if m.phase is not phase]
        if self.record:
            self.reads.extend(ReadRecord(node, m.sender, m.round, phase) for m in taken)
        return taken

    def reset_counts(self) -> None:
        self.sent = {Phase.X_PASS: 0, Phase.V_PASS: 0}


@dataclass
class NodeState:
    """Local variables of one node"""
    id: int
    operator: MonotoneOperator
    v: np.ndarray
    x: np.ndarray
    degree: int
    neighbors: tuple

    def compute_x(self, tau: float, messages: List[Message]) -> np.ndarray:
        argument = self.v.copy()
        if messages:
            argument = argument + tau * np.sum([m.payload for m in messages], axis=0)
        self.x = self.operator.resolvent(argument)
        return self.x

    def update_v(self, gamma: float, tau: float, messages: List[Message]) -> np.ndarray:
        """Apply the Laplacian row locally; returns the change in v"""
        laplacian_row = self.degree * self.x - np.sum([m.payload for m in messages], axis=0)
        change = -gamma * tau * laplacian_row
        self.v = self.v + change
        return change


@dataclass(frozen=True)
class SimRecord:
    k: int
    fp_residual: float
    consensus_residual: float
    ref_error: Optional[float]
    msgs_x: int
    msgs_v: int
    v_change_sum: float = 0.0


@dataclass
class SimTrace:
    """Round history, message log and audit material of a simulation"""
    records: List[SimRecord] = field(default_factory=list)
    status: Optional[TraceStatus] = None
    messages: List[Message] = field(default_factory=list)
    reads: List[ReadRecord] = field(default_factory=list)
    primitives: Set[str] = field(default_factory=set)
    message_log_enabled: bool = True
    schedule: List[List[int]] = field(default_factory=list)
    final_x: Optional[np.ndarray] = None
    x_history: List[np.ndarray] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.records)

    def solution(self):
        return self.final_x.mean(axis=0), consensus_residual(self.final_x)

    def to_frame(self) -> pd.DataFrame:
        rows = [[r.k, r.fp_residual, r.consensus_residual,
                 np.nan if r.ref_error is None else r.ref_error, r.msgs_x, r.msgs_v]
                for r in self.records]
        return pd.DataFrame(rows, columns=TRACE_COLUMNS + ['msgs_x', 'msgs_v'])

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        comments = [f"# {note}" for note in self.notes]
        comments.append(f"# status={self.status.value if self.status else 'unknown'}")
        return write_trace_csv(self.to_frame(), comments, path)

    def message_log_lines(self, include_payloads: bool = False) -> str:
        """JSON-lines message log"""
        return "".join(json.dumps(m.to_record(include_payloads)) + "\n" for m in self.messages)


def x_pass_schedule(graph: Graph) -> List[List[int]]:
    """
    Activation waves of the x-pass: a node can run once all lower-id
    neighbours have. The number of waves is the critical path of the labelling.
    """
    wave = [0] * graph.vertex_count
    for i in range(graph.vertex_count):
        lower = [wave[j] + 1 for j in graph.neighbors(i) if j < i]
        wave[i] = max(lower, default=0)
    waves: List[List[int]] = [[] for _ in range(max(wave, default=-1) + 1)]
    for i, w in enumerate(wave):
        waves[w].append(i)
    return waves


def simulate(graph: Graph, F, gamma: float, v0=None, stop: Optional[StopRule] = None,
             reference=None, allow_gamma: bool = False, record_messages: bool = True,
             keep_history: bool = False) -> SimTrace:
    """
    Run the decentralized iteration on a connected d-regular graph.

    Args:
        graph: Communication graph (|V| nodes)
        F: One operator per node
        gamma: Relaxation parameter in (0, 1) unless allow_gamma
        v0: (|V|, dim) initial local states summing to zero (default 0)
        stop: Stopping rule
        reference: Known solution for ref_error
        record_messages: Keep the message and read logs for auditing
        keep_history: Keep the gathered x of every round

    Returns:
        SimTrace
    """
    scheme = regular_graph_scheme(graph, gamma, allow_gamma)
    F = _check_operands(scheme, F)
    stop = stop or StopRule()
    dim = F.dim
    if v0 is None:
        v0 = np.zeros((graph.vertex_count, dim))
    else:
        v0 = as_blocks(v0, graph.vertex_count, dim, "v0")
        if not in_range_of_S(scheme, v0):
            raise ContractError("v0 must sum to zero across nodes")
    tau = float(consensus_step_size(graph))
    ref = None if reference is None else np.asarray(reference, dtype=float)

    trace = SimTrace(message_log_enabled=record_messages, schedule=x_pass_schedule(graph))
    _require_gamma(scheme, trace.notes)
    trace.notes.append(f"tau={consensus_step_size(graph)}")
    network = Network(graph, record=record_messages)
    degrees = graph.degrees()
    nodes = [NodeState(i, F[i], v0[i].copy(), np.zeros(dim), int(degrees[i]), graph.neighbors(i))
             for i in range(graph.vertex_count)]

    logger.info("simulating %d nodes, %d edges, gamma=%g, tau=%g, x-pass depth %d",
                graph.vertex_count, graph.edge_count, gamma, tau, len(trace.schedule))
    status = TraceStatus.MAX_ITERS
    x = np.zeros((graph.vertex_count, dim))
    for k in range(stop.max_iters):
        network.reset_counts()
        with np.errstate(all='ignore'):
            for node in nodes:
                node.compute_x(tau, network.receive(node.id, Phase.X_PASS))
                for j in node.neighbors:
                    if j > node.id:
                        network.send(node.id, j, k, Phase.X_PASS, node.x)

        # instrumentation: gathered outside the nodes
        x = np.array([node.x for node in nodes])
        fp = float(np.linalg.norm(kron_apply(scheme.M, x)))
        cons = consensus_residual(x)
        ref_error = None if ref is None else float(np.linalg.norm(x.mean(axis=0) - ref))
        if keep_history:
            trace.x_history.append(x)

        finite = np.all(np.isfinite(x)) and all(np.all(np.isfinite(node.v)) for node in nodes)
        done = not finite or stop.satisfied(fp, cons)
        change_sum = 0.0
        if not done:
            with np.errstate(all='ignore'):
                for node in nodes:
                    for j in node.neighbors:
                        network.send(node.id, j, k, Phase.V_PASS, node.x)
                changes = [node.update_v(gamma, tau, network.receive(node.id, Phase.V_PASS)) for node in nodes]
            change_sum = float(np.linalg.norm(np.sum(changes, axis=0)))

        trace.records.append(SimRecord(k, fp, cons, ref_error, network.sent[Phase.X_PASS],
                                       network.sent[Phase.V_PASS], change_sum))
        if not finite:
            status = TraceStatus.DIVERGED
            logger.warning("simulation diverged at round %d", k)
            break
        if done:
            status = TraceStatus.CONVERGED
            break

    trace.status = status
    trace.final_x = x
    trace.messages = network.log
    trace.reads = network.reads
    trace.primitives = set(network.primitives)
    logger.info("simulation terminated: %s after %d rounds", status.value, trace.rounds)
    return trace


def audit_messages(sim_trace: SimTrace, graph: Graph) -> bool:
    """
    True iff every logged message travels along an edge, every value a node
    consumed came from itself or a neighbour, and only point-to-point
    primitives were used.
    """
    if not sim_trace.message_log_enabled:
        raise ContractError("trace was recorded without a message log")
    for message in sim_trace.messages:
        if not graph.has_edge(message.sender, message.receiver):
            logger.warning("message %d -> %d in round %d does not follow an edge",
                           message.sender, message.receiver, message.round)
            return False
    for read in sim_trace.reads:
        if read.reader != read.source and not graph.has_edge(read.reader, read.source):
            logger.warning("node %d read state of non-neighbour %d", read.reader, read.source)
            return False
    if not sim_trace.primitives <= ALLOWED_PRIMITIVES:
        logger.warning("aggregate primitives used: %s", sorted(sim_trace.primitives - ALLOWED_PRIMITIVES))
        return False
    return True


def equivalence_check(graph: Graph, F, gamma: float, rounds: int, v0=None, allow_gamma: bool = False) -> float:
    """
    Max over rounds and nodes of ||x_sim - x_central|| between the simulator
    and the centralized v-form on the same scheme.
    """
    stop = StopRule.fixed(rounds)
    sim = simulate(graph, F, gamma, v0=v0, stop=stop, allow_gamma=allow_gamma,
                   record_messages=False, keep_history=True)
    central = iterate_reduced(regular_graph_scheme(graph, gamma, allow_gamma), F, v0=v0, stop=stop, keep_history=True)
    if len(sim.x_history) != len(central.x_history):
        return float('inf')
    deviation = 0.0
    for x_sim, x_central in zip(sim.x_history, central.x_history):
        deviation = max(deviation, float(np.max(np.linalg.norm(x_sim - x_central, axis=1))))
    return deviation
