"""Optimality and diversity scores of a trained network."""

import math
from dataclasses import dataclass

import numpy as np

from boxswarm.gnn.graph import GHOST_COST, gen_dataset, stack_graphs
from boxswarm.gnn.model import forward_batch

OPT_RTOL = 1e-9


@dataclass(frozen=True)
class AssignmentScores:
    n_a: int
    n_g: int
    trials: int
    optimality_pct: float  # share of trials whose total cost equals the Hungarian optimum
    diversity_pct: float  # share of trials with no two agents on the same real goal


def hard_picks(params, batch, chunk=500):
    """Goal index chosen by every agent, (B, N) in agent order.

    Evaluates the network in batches with the same float32 rounding of the
    hidden state as the per-agent path.
    """
    out = np.empty(batch.order.shape, dtype=int)
    for s in range(0, len(batch), chunk):
        part = batch.take(slice(s, s + chunk))
        probs, _ = forward_batch(params, part.positions, part.costs, quantize=True)
        slot = np.argmax(probs, axis=-1)
        goals = np.take_along_axis(part.candidates, slot[..., None], axis=-1)[..., 0]
        rows = out[s:s + chunk]
        np.put_along_axis(rows, part.order, goals, axis=1)
    return out


def score_picks(items, picks, ghost_cost=GHOST_COST):
    """``(optimal, diverse)`` boolean arrays for labeled graphs and their picks."""
    optimal = np.zeros(len(items), dtype=bool)
    diverse = np.zeros(len(items), dtype=bool)
    for t, (item, pick) in enumerate(zip(items, picks)):
        g = item.graph
        real = pick[pick < g.n_real_goals]
        diverse[t] = len(np.unique(real)) == len(real)
        dist = np.sqrt(np.sum((g.agent_positions[:, None] - g.goal_positions[None]) ** 2, axis=2))
        full = np.concatenate([dist, np.full((g.n_agents, g.n_ghosts), ghost_cost)], axis=1)
        total = math.fsum(full[np.arange(g.n_agents), pick])
        best = math.fsum(full[item.Y > 0])
        optimal[t] = abs(total - best) <= OPT_RTOL * best
    return optimal, diverse


def eval_assignment(params, n_a, n_g, trials, seed=0, ghost_cost=GHOST_COST):
    """Scores on ``trials`` fresh random graphs, ghost-padded up to the network's slot count."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    g_max = params.config.g_max
    target = g_max if n_g < g_max else None
    items = gen_dataset(n_a, n_g, trials, g_max=g_max, seed=seed, n_target=target, ghost_cost=ghost_cost)
    picks = hard_picks(params, stack_graphs(items))
    optimal, diverse = score_picks(items, picks, ghost_cost)
    return AssignmentScores(n_a, n_g, trials, 100.0 * optimal.mean(), 100.0 * diverse.mean())
