"""Decentralized inference: one state machine per agent, hidden states over ring links."""

from dataclasses import dataclass

import numpy as np

from boxswarm.errors import Malformed
from boxswarm.gnn.model import (
    agent_decode,
    agent_encode,
    agent_message,
    agent_update,
    pack_hidden,
    slot_features,
    unpack_hidden,
)
from boxswarm.protocol import Kind, WireMessage, decode_hidden
from boxswarm.sim.network import RingNetwork


class AgentNode:
    """What one agent knows: its position, candidate goals and costs, and its two links."""

    def __init__(self, agent_id, position, candidates, costs, prev, nxt, params):
        self.id = agent_id
        self.position = np.asarray(position, dtype=np.float64)
        self.candidates = np.asarray(candidates)
        self.features = slot_features(costs)
        self.prev = prev
        self.next = nxt
        self.params = params
        self.H = self.u = None
        self.probs = None

    def _set_state(self, H, u):
        # keep exactly what neighbors will decode
        vec = pack_hidden(H, u)
        self.H, self.u = unpack_hidden(vec, self.params.config)
        return vec

    def start(self):
        H, u = agent_encode(self.params, self.features, self.position)
        self._set_state(H, u)

    def outgoing(self, round_index):
        vec = pack_hidden(self.H, self.u)
        msg = WireMessage.hidden(round_index, vec)
        return [(self.prev, msg), (self.next, msg)]

    def _read(self, message, round_index):
        if message is None or message.kind is not Kind.HIDDEN_STATE:
            raise Malformed(f"agent {self.id} expected a hidden state in round {round_index}")
        k, vec = decode_hidden(message.payload, self.params.d_h)
        if k != round_index:
            raise Malformed(f"agent {self.id} got round {k} state during round {round_index}")
        return unpack_hidden(vec, self.params.config)

    def absorb(self, round_index, from_prev, from_next):
        Hp, up = self._read(from_prev, round_index)
        Hn, un = self._read(from_next, round_index)
        m1, w1 = agent_message(self.params, Hp, up, self.H, self.u)
        m2, w2 = agent_message(self.params, Hn, un, self.H, self.u)
        H, u = agent_update(self.params, m1 + m2, w1 + w2, self.H, self.u, self.features)
        self._set_state(H, u)

    def decide(self):
        self.probs = agent_decode(self.params, self.H, self.u, self.features)
        return int(self.candidates[int(np.argmax(self.probs))])


@dataclass
class InferResult:
    choices: np.ndarray  # goal index per agent
    network: RingNetwork
    rounds: int

    def messages_per_agent_round(self):
        return {a: c.messages_sent / self.rounds for a, c in self.network.traffic.items()}

    def hidden_bytes_per_agent_round(self):
        """Bytes of hidden-state floats sent per agent per round (round bytes and framing excluded)."""
        return {a: (c.payload_bytes_sent - c.messages_sent) / self.rounds for a, c in self.network.traffic.items()}

    def payload_bytes_per_agent_round(self):
        return {a: c.payload_bytes_sent / self.rounds for a, c in self.network.traffic.items()}


def make_nodes(params, graph):
    prev, nxt = graph.neighbors()
    return [
        AgentNode(i, graph.agent_positions[i], graph.candidates[i], graph.costs[i], int(prev[i]), int(nxt[i]), params)
        for i in range(graph.n_agents)
    ]


def decentralized_infer(params, graph, network=None):
    """Run the K message rounds over ``network`` (a fresh ring by default).

    Each round every agent, in index order, sends its state to its
    predecessor then its successor; then every agent reads one frame from
    each neighbor link and updates.
    """
    network = RingNetwork(graph.ring) if network is None else network
    nodes = make_nodes(params, graph)
    for node in nodes:
        node.start()
    for k in range(params.rounds):
        for node in nodes:
            for dst, msg in node.outgoing(k):
                network.send(node.id, dst, msg)
        for node in nodes:
            node.absorb(k, network.recv(node.id, node.prev), network.recv(node.id, node.next))
    choices = np.array([node.decide() for node in nodes])
    return InferResult(choices, network, params.rounds)
