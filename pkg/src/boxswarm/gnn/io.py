"""Binary files for trained parameters and labeled datasets (layouts in docs/file_formats.md)."""

import struct

import numpy as np

from boxswarm.errors import Malformed
from boxswarm.gnn.graph import GHOST_COST, LabeledGraph, build_graph, pad_ghost_goals
from boxswarm.gnn.model import GnnConfig, GnnParams

PARAMS_MAGIC = b"BSGN"
PARAMS_VERSION = 1
PARAMS_HEADER = struct.Struct("<4sHHHHHHHHBH")
LAYER_ENTRY = struct.Struct("<8sHHHH")

DATASET_MAGIC = b"BSDS"
DATASET_VERSION = 1
DATASET_HEADER = struct.Struct("<4sHHHHHId")
NO_LABEL = 255


def params_to_bytes(params):
    cfg = params.config
    layers = cfg.layer_dims()
    out = bytearray(PARAMS_HEADER.pack(
        PARAMS_MAGIC, PARAMS_VERSION, cfg.d_h, cfg.rounds, cfg.g_max, cfg.slot_channels,
        cfg.global_channels, cfg.hidden, cfg.hidden_global, int(cfg.residual), len(layers),
    ))
    for name, a, b, c, e in layers:
        out += LAYER_ENTRY.pack(name.encode("ascii"), a, b, c, e)
    for w in params.weights.values():
        out += np.ascontiguousarray(w, dtype="<f4").tobytes()
    return bytes(out)


def params_from_bytes(data):
    if len(data) < PARAMS_HEADER.size:
        raise Malformed("parameter file shorter than its header")
    (magic, version, d_h, rounds, g_max, cs, cg, hidden, hidden_global, residual,
     n_layers) = PARAMS_HEADER.unpack_from(data)
    if magic != PARAMS_MAGIC:
        raise Malformed("not a parameter file (bad magic)")
    if version != PARAMS_VERSION:
        raise Malformed(f"unsupported parameter file version {version}")
    cfg = GnnConfig(g_max, cs, cg, hidden, hidden_global, rounds, bool(residual))
    if cfg.d_h != d_h:
        raise Malformed(f"header d_h {d_h} disagrees with slot layout ({cfg.d_h})")
    offset = PARAMS_HEADER.size
    table = []
    for _ in range(n_layers):
        if offset + LAYER_ENTRY.size > len(data):
            raise Malformed("truncated layer table")
        name, a, b, c, e = LAYER_ENTRY.unpack_from(data, offset)
        table.append((name.rstrip(b"\0").decode("ascii"), a, b, c, e))
        offset += LAYER_ENTRY.size
    if table != cfg.layer_dims():
        raise Malformed("layer table does not match the declared configuration")
    weights = {}
    for name, shape in cfg.param_shapes().items():
        size = int(np.prod(shape))
        end = offset + 4 * size
        if end > len(data):
            raise Malformed(f"truncated weights at {name}")
        weights[name] = np.frombuffer(data, dtype="<f4", count=size, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise Malformed(f"{len(data) - offset} trailing bytes after the weights")
    return GnnParams(cfg, weights)


def save_params(params, path):
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(params))


def load_params(path):
    with open(path, "rb") as fh:
        return params_from_bytes(fh.read())


def dataset_to_bytes(items, g_max=10, ghost_cost=GHOST_COST):
    if not items:
        raise ValueError("empty dataset")
    first = items[0].graph
    n_a, n_g, n_goals = first.n_agents, first.n_real_goals, first.n_goals
    out = bytearray(DATASET_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, n_a, n_g, n_goals, g_max,
                                        len(items), float(ghost_cost)))
    for item in items:
        g = item.graph
        if (g.n_agents, g.n_real_goals, g.n_goals) != (n_a, n_g, n_goals):
            raise ValueError("all graphs in a dataset file need the same sizes")
        out += np.ascontiguousarray(g.agent_positions, dtype="<f8").tobytes()
        out += np.ascontiguousarray(g.goal_positions, dtype="<f8").tobytes()
        labels = [int(np.argmax(r)) if r.any() else NO_LABEL for r in item.Y]
        out += bytes(labels)
    return bytes(out)


def dataset_from_bytes(data):
    if len(data) < DATASET_HEADER.size:
        raise Malformed("dataset file shorter than its header")
    magic, version, n_a, n_g, n_goals, g_max, count, ghost_cost = DATASET_HEADER.unpack_from(data)
    if magic != DATASET_MAGIC:
        raise Malformed("not a dataset file (bad magic)")
    if version != DATASET_VERSION:
        raise Malformed(f"unsupported dataset file version {version}")
    record = 16 * (n_a + n_g) + n_a
    if len(data) != DATASET_HEADER.size + record * count:
        raise Malformed(f"expected {count} records of {record} bytes")
    items = []
    offset = DATASET_HEADER.size
    for _ in range(count):
        agents = np.frombuffer(data, "<f8", 2 * n_a, offset).reshape(n_a, 2).copy()
        offset += 16 * n_a
        goals = np.frombuffer(data, "<f8", 2 * n_g, offset).reshape(n_g, 2).copy()
        offset += 16 * n_g
        labels = data[offset:offset + n_a]
        offset += n_a
        graph = build_graph(agents, goals, g_max)
        if n_goals > n_g:
            graph = pad_ghost_goals(graph, n_goals, ghost_cost)
        Y = np.zeros((n_a, n_goals))
        for i, j in enumerate(labels):
            if j != NO_LABEL:
                if j >= n_goals:
                    raise Malformed(f"label {j} outside {n_goals} goals")
                Y[i, j] = 1.0
        items.append(LabeledGraph(graph, Y))
    return items


def save_dataset(items, path, g_max=10, ghost_cost=GHOST_COST):
    with open(path, "wb") as fh:
        fh.write(dataset_to_bytes(items, g_max, ghost_cost))


def load_dataset(path):
    with open(path, "rb") as fh:
        return dataset_from_bytes(fh.read())
