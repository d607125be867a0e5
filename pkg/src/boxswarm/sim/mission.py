"""End-to-end mission: scout, register views around the ring, assign goals, report."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from boxswarm.errors import AssignmentFailed, BoxSwarmError, RegistrationFailed, ScoutTimeout
from boxswarm.gnn.graph import AgentGoalGraph, pad_ghost_goals
from boxswarm.gnn.infer import decentralized_infer
from boxswarm.gnn.io import load_params, params_from_bytes
from boxswarm.lsa import assignment_cost, solve_lsa
from boxswarm.protocol import Kind, WireMessage, decode_boxes, decode_claim
from boxswarm.registration import relabel_from_predecessor
from boxswarm.sim.config import MissionConfig
from boxswarm.sim.network import RingNetwork
from boxswarm.sim.scene import SyntheticDetector, ViewRegime, make_scene, render_view, sample_pose, view_in_frame
from boxswarm.sim.scout import FrameBuffer, frame_has_detection, spiral_waypoints

SCHEMA_VERSION = 1
REFERENCE_PARAMS = "reference_params.bin"
CSV_FIELDS = (
    "schema_version", "config_hash", "agent", "goal", "scene_id", "cost",
    "messages_sent", "bytes_sent", "box_frames", "box_bytes",
    "hidden_frames", "hidden_bytes", "claim_frames", "claim_bytes",
)


def reference_params():
    """Weights shipped with the package (trained with the reference recipe)."""
    data = resources.files("boxswarm.data").joinpath(REFERENCE_PARAMS).read_bytes()
    return params_from_bytes(data)


@dataclass
class AgentRecord:
    agent: int
    goal: int  # consensus label of the chosen whale, or -1 for a ghost goal
    scene_id: int  # ground-truth whale id, -1 for a ghost goal
    cost: float  # normalized pixel distance to the chosen whale
    messages_sent: int
    bytes_sent: int
    box_frames: int
    box_bytes: int
    hidden_frames: int
    hidden_bytes: int
    claim_frames: int
    claim_bytes: int


@dataclass
class MissionReport:
    config_hash: str
    seed: int
    n_agents: int
    n_whales: int
    detection_triggered: bool
    scout_frames: int
    consensus_ok: bool
    failing_pair: list
    labels_correct: bool  # consensus labels agree with ground truth in every view
    pair_costs: list  # Box-ICP final cost per ring pair, pixels
    distinct_goals: bool
    assignment_cost: float
    optimal_cost: float
    optimal: bool
    agents: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @property
    def goals(self):
        return [a.goal for a in self.agents]

    def summary(self):
        d = asdict(self)
        del d["agents"]
        return d

    def to_jsonl(self):
        lines = [json.dumps({"record": "mission", **self.summary()}, sort_keys=True)]
        for a in self.agents:
            lines.append(json.dumps({"record": "agent", "schema_version": self.schema_version,
                                     "config_hash": self.config_hash, **asdict(a)}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for a in self.agents:
            w.writerow({"schema_version": self.schema_version, "config_hash": self.config_hash, **asdict(a)})
        return buf.getvalue()


def scout(scene, cfg, rng):
    """Fly the spiral until the frame buffer triggers; returns the number of frames used.

    After a positive frame the scout holds its position for the next frame
    instead of moving on, so a detection can fill the buffer.
    """
    sc = cfg.scout
    extent = cfg.scene.extent
    turns = max(1, math.ceil(sc.max_frames / sc.points_per_turn))
    start = (sc.start[0] * extent, sc.start[1] * extent)
    path = spiral_waypoints(start, sc.spacing * extent, turns, sc.points_per_turn)
    buf = FrameBuffer(sc.window, sc.threshold)
    k = 0
    for frame in range(1, sc.max_frames + 1):
        positive = frame_has_detection(scene, path[k], sc.footprint * extent, cfg.detector.s_det, rng)
        if buf.push(positive):
            return frame
        if not positive:
            k = min(k + 1, len(path) - 1)
    raise ScoutTimeout(f"no detection trigger within {sc.max_frames} frames")


def place_views(scene, cfg, rng):
    """One in-frame view per agent, every whale visible (registration-phase assumption)."""
    v = cfg.views
    regime = ViewRegime(v.max_rotation, v.max_shift_frac, (v.scale_min, v.scale_max), v.max_shear)
    detector = SyntheticDetector(1.0, v.jitter)
    views = []
    for agent in range(cfg.agents.count):
        for _ in range(v.max_resample):
            view = render_view(scene, sample_pose(scene, rng, regime), detector, rng)
            if view_in_frame(view, cfg.scene.extent):
                views.append(view)
                break
        else:
            raise RegistrationFailed(f"agent {agent}: no pose kept every whale in frame")
    return views


def register_ring(views, net, cfg):
    """Pass consensus labels from agent 0 around the ring as BoxAnnounce frames.

    Returns ``(labels, consensus_ok, pair_costs, failing_pair)``; ``labels[k]``
    maps agent k's local box ids to consensus ids.
    """
    n = len(views)
    extent = cfg.scene.extent
    labels = [{i: i for i in views[0].observed.ids}]
    carried = views[0].observed
    pair_costs = []
    closing = None
    for k in range(1, n + 1):
        src, dst = k - 1, k % n
        net.send(src, dst, WireMessage.boxes(carried, extent))
        msg = net.recv(dst, src)
        try:
            pred = decode_boxes(msg.payload, extent)
            relabeled, mapping, result = relabel_from_predecessor(
                pred, views[dst].observed, cfg.registration.tol, cfg.registration.max_iter
            )
        except BoxSwarmError as exc:
            raise RegistrationFailed(f"pair {src} -> {dst}: {exc}") from exc
        pair_costs.append(float(result.final_cost))
        if k < n:
            labels.append(mapping)
            carried = relabeled
        else:
            closing = mapping
    consensus_ok = all(closing[i] == i for i in views[0].observed.ids)
    failing = None
    if not consensus_ok:
        worst = int(np.argmax(pair_costs))
        failing = [worst, (worst + 1) % n]
    return labels, consensus_ok, pair_costs, failing


def _labels_correct(views, labels):
    truth0 = dict(zip(views[0].observed.ids, views[0].truth))
    for view, mapping in zip(views, labels):
        for local, scene_id in zip(view.observed.ids, view.truth):
            if truth0[mapping[local]] != scene_id:
                return False
    return True


def goal_costs(views, labels, extent):
    """(n_agents, n_whales) distance from each frame center to each consensus box center, / extent."""
    n_w = len(views[0].observed)
    mid = np.array([extent / 2, extent / 2])
    out = np.empty((len(views), n_w))
    for k, (view, mapping) in enumerate(zip(views, labels)):
        centers = view.observed.centers()
        for j, local in enumerate(view.observed.ids):
            out[k, mapping[local]] = np.linalg.norm(centers[j] - mid) / extent
    return out


def assignment_graph(views, costs, extent, g_max, ghost_cost, goal_positions):
    """Assignment graph in the mission's own ring order (agent k talks to k - 1 and k + 1)."""
    n, n_w = costs.shape
    positions = []
    for view in views:
        inv = view.pose.transform.inverse()
        p = np.asarray(inv.apply(np.array([[extent / 2, extent / 2]]))[0]) / extent
        positions.append(np.clip(p, 0.0, 1.0))
    if n_w > g_max:
        cand = np.sort(np.argsort(costs, axis=1, kind="stable")[:, :g_max], axis=1)
    else:
        cand = np.broadcast_to(np.arange(n_w), (n, n_w)).copy()
    graph = AgentGoalGraph(np.array(positions), goal_positions, tuple(range(n)), cand,
                           np.take_along_axis(costs, cand, axis=1), n_w)
    if n_w < g_max:
        graph = pad_ghost_goals(graph, g_max, ghost_cost)
    return graph


def _traffic(net, agent):
    per = {kind: [0, 0] for kind in Kind}
    for src, _, kind, size in net.log:
        if src == agent:
            per[Kind(kind)][0] += 1
            per[Kind(kind)][1] += size
    return per


def run_mission(cfg=MissionConfig(), params=None):
    """Run the whole pipeline under ``cfg``; every random draw comes from ``cfg.seed``."""
    if params is None:
        params = load_params(cfg.assignment.params) if cfg.assignment.params else reference_params()
    n = cfg.agents.count
    extent = cfg.scene.extent
    scene = make_scene(cfg.scene.n_whales, extent, cfg.rng("scene"), cfg.scene.spread)
    frames = scout(scene, cfg, cfg.rng("scout"))

    views = place_views(scene, cfg, cfg.rng("views"))
    net = RingNetwork(range(n))
    labels, consensus_ok, pair_costs, failing = register_ring(views, net, cfg)

    n_w = len(views[0].observed)
    if n > n_w:
        raise AssignmentFailed(f"{n} agents but only {n_w} whales")
    costs = goal_costs(views, labels, extent)
    scene_ids = [views[0].truth[views[0].observed.ids.index(c)] for c in range(n_w)]
    goal_positions = np.array([scene.boxes[s].center for s in scene_ids]) / extent
    graph = assignment_graph(views, costs, extent, params.config.g_max, cfg.assignment.ghost_cost, goal_positions)
    try:
        choices = decentralized_infer(params, graph, network=net).choices
        if cfg.assignment.claims:
            for agent in range(n):
                for dst in net.neighbors(agent):
                    net.send(agent, dst, WireMessage.claim(agent, int(choices[agent])))
            for agent in range(n):
                for src in net.neighbors(agent):
                    msg = net.recv(agent, src)
                    decode_claim(msg.payload)
    except BoxSwarmError as exc:
        raise AssignmentFailed(str(exc)) from exc

    full = np.concatenate([costs, np.full((n, graph.n_ghosts), cfg.assignment.ghost_cost)], axis=1)
    total = assignment_cost(full, choices)
    _, best = solve_lsa(costs)
    real = [int(c) for c in choices if c < n_w]
    records = []
    for agent in range(n):
        c = int(choices[agent])
        t = _traffic(net, agent)
        counter = net.traffic[agent]
        records.append(AgentRecord(
            agent=agent,
            goal=c if c < n_w else -1,
            scene_id=int(scene_ids[c]) if c < n_w else -1,
            cost=float(full[agent, c]),
            messages_sent=counter.messages_sent,
            bytes_sent=counter.bytes_sent,
            box_frames=t[Kind.BOX_ANNOUNCE][0],
            box_bytes=t[Kind.BOX_ANNOUNCE][1],
            hidden_frames=t[Kind.HIDDEN_STATE][0],
            hidden_bytes=t[Kind.HIDDEN_STATE][1],
            claim_frames=t[Kind.GOAL_CLAIM][0],
            claim_bytes=t[Kind.GOAL_CLAIM][1],
        ))
    return MissionReport(
        config_hash=cfg.hash(),
        seed=cfg.seed,
        n_agents=n,
        n_whales=n_w,
        detection_triggered=True,
        scout_frames=frames,
        consensus_ok=consensus_ok,
        failing_pair=failing,
        labels_correct=_labels_correct(views, labels),
        pair_costs=pair_costs,
        distinct_goals=len(real) == n and len(set(real)) == n,
        assignment_cost=total,
        optimal_cost=best,
        optimal=abs(total - best) <= 1e-9 * best,
        agents=records,
    )
