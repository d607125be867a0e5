"""Agent/goal graphs on the unit square, ghost padding, and labeled datasets."""

import math
from dataclasses import dataclass

import numpy as np

from boxswarm.errors import DegenerateInput
from boxswarm.lsa import solve_lsa

GHOST_COST = 10.0 * math.sqrt(2.0)  # ten unit-square diameters


@dataclass(frozen=True, eq=False)
class AgentGoalGraph:
    agent_positions: np.ndarray  # (n_a, 2)
    goal_positions: np.ndarray  # (n_real, 2); ghost goals have no position
    ring: tuple  # agent indices in cyclic order
    candidates: np.ndarray  # (n_a, k) goal indices, ascending per agent
    costs: np.ndarray  # (n_a, k) cost of each candidate
    n_goals: int  # real goals plus ghosts

    @property
    def n_agents(self):
        return len(self.agent_positions)

    @property
    def n_real_goals(self):
        return len(self.goal_positions)

    @property
    def n_ghosts(self):
        return self.n_goals - self.n_real_goals

    def neighbors(self):
        """``(prev, next)`` arrays: ring predecessor and successor of every agent."""
        n = len(self.ring)
        prev = np.empty(n, dtype=int)
        nxt = np.empty(n, dtype=int)
        for pos, agent in enumerate(self.ring):
            prev[agent] = self.ring[pos - 1]
            nxt[agent] = self.ring[(pos + 1) % n]
        return prev, nxt

    def adjacency(self):
        """Ring edges as sorted pairs."""
        n = len(self.ring)
        return sorted({tuple(sorted((self.ring[k], self.ring[(k + 1) % n]))) for k in range(n)})

    def cost_matrix(self):
        """Dense (n_a, n_goals) costs; non-candidates are ``inf``."""
        out = np.full((self.n_agents, self.n_goals), np.inf)
        np.put_along_axis(out, self.candidates, self.costs, axis=1)
        return out


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    graph: AgentGoalGraph
    Y: np.ndarray  # (n_a, n_goals) optimal one-hot rows


def ring_order(agent_positions):
    """Agents sorted by angle about their centroid, ties broken by index."""
    p = np.asarray(agent_positions, dtype=np.float64)
    c = p.mean(axis=0)
    ang = np.arctan2(p[:, 1] - c[1], p[:, 0] - c[0])
    seen = set()
    for i in range(len(p)):
        key = (float(ang[i]), float(p[i, 0]), float(p[i, 1]))
        if key in seen:
            raise DegenerateInput(f"agent {i} duplicates another agent's position")
        seen.add(key)
    return tuple(int(i) for i in np.argsort(ang, kind="stable"))


def build_graph(agent_positions, goal_positions, g_max=10):
    agents = np.asarray(agent_positions, dtype=np.float64).reshape(-1, 2)
    goals = np.asarray(goal_positions, dtype=np.float64).reshape(-1, 2)
    if len(agents) < 2:
        raise ValueError("a ring needs at least two agents")
    if len(goals) < 1:
        raise ValueError("need at least one goal")
    if g_max < 1:
        raise ValueError("g_max must be positive")
    for name, pts in (("agent", agents), ("goal", goals)):
        if not (np.isfinite(pts).all() and pts.min() >= 0.0 and pts.max() <= 1.0):
            raise ValueError(f"{name} positions must lie in the unit square")
    ring = ring_order(agents)
    dist = np.sqrt(np.sum((agents[:, None, :] - goals[None, :, :]) ** 2, axis=2))
    if len(goals) <= g_max:
        cand = np.broadcast_to(np.arange(len(goals)), dist.shape).copy()
    else:
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :g_max]
        cand = np.sort(nearest, axis=1)
    costs = np.take_along_axis(dist, cand, axis=1)
    return AgentGoalGraph(agents, goals, ring, cand, costs, len(goals))


def pad_ghost_goals(graph, n_target, ghost_cost=GHOST_COST):
    """Append ``n_target - n_goals`` ghost goals to every agent's candidates."""
    extra = n_target - graph.n_goals
    if extra < 0:
        raise ValueError(f"graph already has {graph.n_goals} goals, more than {n_target}")
    if extra == 0:
        return graph
    ghosts = np.arange(graph.n_goals, n_target)
    cand = np.concatenate([graph.candidates, np.broadcast_to(ghosts, (graph.n_agents, extra))], axis=1)
    costs = np.concatenate([graph.costs, np.full((graph.n_agents, extra), float(ghost_cost))], axis=1)
    return AgentGoalGraph(graph.agent_positions, graph.goal_positions, graph.ring, cand, costs, n_target)


def optimal_labels(agent_positions, goal_positions, n_goals=None, ghost_cost=GHOST_COST):
    """One-hot Hungarian optimum on the full Euclidean matrix (ghost columns appended if asked)."""
    a = np.asarray(agent_positions, dtype=np.float64)
    g = np.asarray(goal_positions, dtype=np.float64)
    cost = np.sqrt(np.sum((a[:, None, :] - g[None, :, :]) ** 2, axis=2))
    n_goals = len(g) if n_goals is None else n_goals
    if n_goals > len(g):
        cost = np.concatenate([cost, np.full((len(a), n_goals - len(g)), float(ghost_cost))], axis=1)
    sigma, _ = solve_lsa(cost)
    Y = np.zeros((len(a), n_goals))
    Y[np.arange(len(a)), sigma] = 1.0
    return Y


def gen_dataset(n_a, n_g, count, g_max=10, seed=0, n_target=None, ghost_cost=GHOST_COST):
    """``count`` random labeled graphs; positions uniform on the unit square.

    With ``n_target`` the graphs are padded with ghost goals up to that many
    goals (labels include the ghost columns).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    total = n_g if n_target is None else n_target
    if n_a > total:
        raise ValueError(f"{n_a} agents cannot take distinct goals among {total}")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        agents = rng.random((n_a, 2))
        goals = rng.random((n_g, 2))
        try:
            graph = build_graph(agents, goals, g_max)
        except DegenerateInput:
            continue
        if n_target is not None:
            graph = pad_ghost_goals(graph, n_target, ghost_cost)
        out.append(LabeledGraph(graph, optimal_labels(agents, goals, graph.n_goals, ghost_cost)))
    return out


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Graphs with equal shapes stacked in ring order, as the batch network expects."""

    positions: np.ndarray  # (B, N, 2)
    costs: np.ndarray  # (B, N, k)
    candidates: np.ndarray  # (B, N, k)
    Y: np.ndarray  # (B, N, n_goals) or empty when unlabeled
    order: np.ndarray  # (B, N): ring position -> agent index
    n_goals: int

    def __len__(self):
        return len(self.positions)

    def take(self, idx):
        return GraphBatch(self.positions[idx], self.costs[idx], self.candidates[idx],
                          self.Y[idx] if self.Y.size else self.Y, self.order[idx], self.n_goals)


def stack_graphs(items):
    """Stack ``AgentGoalGraph`` or ``LabeledGraph`` items into a :class:`GraphBatch`."""
    graphs = [x.graph if isinstance(x, LabeledGraph) else x for x in items]
    labeled = all(isinstance(x, LabeledGraph) for x in items)
    order = np.array([g.ring for g in graphs])
    pos = np.array([g.agent_positions[o] for g, o in zip(graphs, order)])
    costs = np.array([g.costs[o] for g, o in zip(graphs, order)])
    cand = np.array([g.candidates[o] for g, o in zip(graphs, order)])
    n_goals = {g.n_goals for g in graphs}
    if len(n_goals) != 1:
        raise ValueError("all graphs in a batch need the same goal count")
    Y = np.array([x.Y[o] for x, o in zip(items, order)]) if labeled else np.empty(0)
    return GraphBatch(pos, costs, cand, Y, order, n_goals.pop())
