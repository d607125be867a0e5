"""Ring message-passing network over per-agent candidate-goal slots.

Every agent keeps a hidden state made of ``slot_channels`` values per
candidate goal slot plus ``global_channels`` agent-level values, so
``d_h = g_max * slot_channels + global_channels``.  All perceptrons are built
from :func:`eq_forward` layers, which treat slots as an unordered set: the
same weights act on every slot and slots interact only through their mean.
Permuting an agent's candidate goals therefore permutes its output row the
same way.

The per-agent functions (``agent_encode``, ``agent_message``,
``agent_update``, ``agent_decode``) are the reference computation, shared by
the centralized :func:`gnn_forward` and the decentralized ring simulation.
:func:`forward_batch` / :func:`backward_batch` evaluate the same network on a
batch of ring-ordered graphs for training.
"""

import math
from dataclasses import dataclass, field

import numpy as np

MLPS = ("enc", "msg", "upd", "dec")
COST_CLIP = math.sqrt(2.0)  # diameter of the unit square


@dataclass(frozen=True)
class GnnConfig:
    g_max: int = 10  # candidate goal slots per agent
    slot_channels: int = 3
    global_channels: int = 2
    hidden: int = 16  # per-slot width of each perceptron's hidden layer
    hidden_global: int = 8
    rounds: int = 5  # K
    residual: bool = False  # add the update to the previous hidden state

    def __post_init__(self):
        for name in ("g_max", "slot_channels", "global_channels", "hidden", "hidden_global", "rounds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def d_h(self):
        return self.g_max * self.slot_channels + self.global_channels

    def layer_dims(self):
        """``(name, slot_in, global_in, slot_out, global_out)`` for every layer, in declaration order.

        The decoder emits one score per slot and nothing global; its output
        layer also drops the slot-shared term, which the softmax would cancel.
        """
        cs, cg, h, hg = self.slot_channels, self.global_channels, self.hidden, self.hidden_global
        inputs = {
            "enc": (2, 2),
            "msg": (2 * cs, 2 * cg),
            "upd": (2 * cs + 2, 2 * cg),
            "dec": (cs + 2, cg),
        }
        out = []
        for mlp in MLPS:
            a, b = inputs[mlp]
            if mlp == "dec":
                out.append((f"{mlp}.0", a, b, h, 0))
                out.append((f"{mlp}.1", h, 0, 1, 0))
            else:
                out.append((f"{mlp}.0", a, b, h, hg))
                out.append((f"{mlp}.1", h, hg, cs, cg))
        return out

    def param_shapes(self):
        """Ordered ``name -> shape`` map of every weight array."""
        shapes = {}
        for layer, a, b, c, e in self.layer_dims():
            shapes[f"{layer}.A"] = (a, c)
            if b:
                shapes[f"{layer}.B"] = (a, c)
                shapes[f"{layer}.C"] = (b, c)
                shapes[f"{layer}.bs"] = (c,)
            if e:
                shapes[f"{layer}.D"] = (a, e)
                shapes[f"{layer}.E"] = (b, e)
                shapes[f"{layer}.bg"] = (e,)
        return shapes


@dataclass
class GnnParams:
    config: GnnConfig
    weights: dict = field(repr=False)

    def __post_init__(self):
        shapes = self.config.param_shapes()
        if list(self.weights) != list(shapes):
            raise ValueError("weights do not follow the declared parameter order")
        for name, shape in shapes.items():
            w = np.asarray(self.weights[name], dtype=np.float64)
            if w.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {w.shape}")
            self.weights[name] = w

    @property
    def d_h(self):
        return self.config.d_h

    @property
    def rounds(self):
        return self.config.rounds

    def copy(self):
        return GnnParams(self.config, {k: v.copy() for k, v in self.weights.items()})

    def count(self):
        return sum(w.size for w in self.weights.values())

    def to_float32(self):
        """Round every weight to float32 precision (what the parameter file stores)."""
        return GnnParams(self.config, {k: v.astype(np.float32).astype(np.float64) for k, v in self.weights.items()})


def init_params(config=GnnConfig(), seed=0):
    """Uniform init in +-1/sqrt(fan_in); biases use the layer's slot input width."""
    rng = np.random.default_rng(seed)
    fan = {}
    for layer, a, _, _, _ in config.layer_dims():
        fan[layer] = a
    weights = {}
    for name, shape in config.param_shapes().items():
        fan_in = shape[0] if len(shape) == 2 else fan[name.rsplit(".", 1)[0]]
        bound = 1.0 / math.sqrt(fan_in)
        weights[name] = rng.uniform(-bound, bound, size=shape)
    return GnnParams(config, weights)


# ---------------------------------------------------------------- layers


def eq_forward(w, layer, X, v):
    """Slot-equivariant affine layer.

    ``X``: (..., S, a) slot features, ``v``: (..., b) agent features.
    Returns ``Y`` (..., S, c) and ``u`` (..., e) (``None`` when e = 0).
    """
    m = X.mean(axis=-2)
    Y = X @ w[f"{layer}.A"]
    if f"{layer}.B" in w:
        shared = m @ w[f"{layer}.B"] + v @ w[f"{layer}.C"] + w[f"{layer}.bs"]
        Y = Y + shared[..., None, :]
    u = None
    if f"{layer}.D" in w:
        u = m @ w[f"{layer}.D"] + v @ w[f"{layer}.E"] + w[f"{layer}.bg"]
    return Y, u, (X, v, m)


def _sum_outer(a, b):
    """sum over all leading axes of a[..., i] * b[..., j]."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def eq_backward(w, layer, cache, dY, du, grads):
    X, v, m = cache
    S = X.shape[-2]
    grads[f"{layer}.A"] += _sum_outer(X, dY)
    dm = np.zeros_like(m)
    dv = np.zeros_like(v)
    if f"{layer}.B" in w:
        dshared = dY.sum(axis=-2)
        grads[f"{layer}.B"] += _sum_outer(m, dshared)
        grads[f"{layer}.C"] += _sum_outer(v, dshared)
        grads[f"{layer}.bs"] += dshared.reshape(-1, dshared.shape[-1]).sum(axis=0)
        dm = dm + dshared @ w[f"{layer}.B"].T
        dv = dv + dshared @ w[f"{layer}.C"].T
    if du is not None:
        grads[f"{layer}.D"] += _sum_outer(m, du)
        grads[f"{layer}.E"] += _sum_outer(v, du)
        grads[f"{layer}.bg"] += du.reshape(-1, du.shape[-1]).sum(axis=0)
        dm = dm + du @ w[f"{layer}.D"].T
        dv = dv + du @ w[f"{layer}.E"].T
    dX = dY @ w[f"{layer}.A"].T + dm[..., None, :] / S
    return dX, dv


def mlp_forward(w, mlp, X, v, out_act=True):
    """Two slot-equivariant layers with a tanh hidden layer."""
    Z, z, c0 = eq_forward(w, f"{mlp}.0", X, v)
    H = np.tanh(Z)
    h = np.tanh(z) if z is not None else v[..., :0]
    Y, y, c1 = eq_forward(w, f"{mlp}.1", H, h)
    if out_act:
        Y = np.tanh(Y)
        y = np.tanh(y) if y is not None else None
    return Y, y, (c0, H, h, c1, Y, y, out_act)


def mlp_backward(w, mlp, cache, dY, dy, grads):
    c0, H, h, c1, Y, y, out_act = cache
    if out_act:
        dY = dY * (1.0 - Y * Y)
        dy = dy * (1.0 - y * y) if y is not None else None
    dH, dh = eq_backward(w, f"{mlp}.1", c1, dY, dy, grads)
    dZ = dH * (1.0 - H * H)
    dz = dh * (1.0 - h * h) if h.shape[-1] else None
    return eq_backward(w, f"{mlp}.0", c0, dZ, dz, grads)


def slot_features(costs):
    """Per-slot inputs ``[c, c - min(c)]`` with costs clipped at the unit-square diameter."""
    c = np.minimum(np.asarray(costs, dtype=np.float64), COST_CLIP)
    return np.stack([c, c - c.min(axis=-1, keepdims=True)], axis=-1)


def softmax(scores):
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _quantize(a):
    return a.astype(np.float32).astype(np.float64)


# ---------------------------------------------------------- per-agent path


def pack_hidden(H, u):
    """Flatten one agent's state to the d_h float32 vector sent on the wire."""
    return np.concatenate([H.ravel(), u]).astype(np.float32)


def unpack_hidden(vec, config):
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (config.d_h,):
        raise ValueError(f"hidden vector must have {config.d_h} entries, got {vec.shape}")
    split = config.g_max * config.slot_channels
    return vec[:split].reshape(config.g_max, config.slot_channels), vec[split:]


def _check_slots(params, f):
    if f.shape[-2] != params.config.g_max:
        raise ValueError(
            f"agents need exactly {params.config.g_max} candidate slots, got {f.shape[-2]}; pad with ghost goals"
        )


def agent_encode(params, f, position):
    _check_slots(params, f)
    H, u, _ = mlp_forward(params.weights, "enc", f, np.asarray(position, dtype=np.float64))
    return H, u


def agent_message(params, H_nb, u_nb, H, u):
    """Message computed by the receiver from a neighbor's state and its own."""
    m, w, _ = mlp_forward(params.weights, "msg", np.concatenate([H_nb, H], axis=-1), np.concatenate([u_nb, u]))
    return m, w


def agent_update(params, m, w, H, u, f):
    Hn, un, _ = mlp_forward(params.weights, "upd", np.concatenate([m, H, f], axis=-1), np.concatenate([w, u]))
    if params.config.residual:
        return H + Hn, u + un
    return Hn, un


def agent_decode(params, H, u, f):
    """Soft assignment over the agent's candidate slots."""
    s, _, _ = mlp_forward(params.weights, "dec", np.concatenate([H, f], axis=-1), u, out_act=False)
    return softmax(s[..., 0])


@dataclass
class ForwardResult:
    A: np.ndarray  # (n_a, n_goals) soft assignment, zero outside each agent's candidates
    slot_probs: np.ndarray  # (n_a, g_max) in candidate order
    hidden_trace: list  # per round k = 0..K-1, (n_a, d_h) float32 states sent to neighbors

    def hard(self):
        """Goal index chosen by each agent (lowest index on ties)."""
        return np.argmax(self.A, axis=1)


def scatter_rows(slot_values, candidates, n_goals):
    out = np.zeros(slot_values.shape[:-1] + (n_goals,))
    np.put_along_axis(out, candidates, slot_values, axis=-1)
    return out


def gnn_forward(params, graph, quantize=True):
    """Centralized reference evaluation, agent by agent.

    With ``quantize`` every agent's state is rounded to float32 after each
    round, exactly as it would be after a trip over the wire.
    """
    n = graph.n_agents
    feats = [slot_features(graph.costs[i]) for i in range(n)]
    H, u = [], []
    for i in range(n):
        h_i, u_i = agent_encode(params, feats[i], graph.agent_positions[i])
        H.append(h_i)
        u.append(u_i)
    trace = []
    prev, nxt = graph.neighbors()
    for _ in range(params.rounds):
        if quantize:
            H = [_quantize(h) for h in H]
            u = [_quantize(x) for x in u]
        trace.append(np.stack([pack_hidden(H[i], u[i]) for i in range(n)]))
        new = []
        for i in range(n):
            m1, w1 = agent_message(params, H[prev[i]], u[prev[i]], H[i], u[i])
            m2, w2 = agent_message(params, H[nxt[i]], u[nxt[i]], H[i], u[i])
            new.append(agent_update(params, m1 + m2, w1 + w2, H[i], u[i], feats[i]))
        H = [x[0] for x in new]
        u = [x[1] for x in new]
    if quantize:
        H = [_quantize(h) for h in H]
        u = [_quantize(x) for x in u]
    probs = np.stack([agent_decode(params, H[i], u[i], feats[i]) for i in range(n)])
    return ForwardResult(scatter_rows(probs, graph.candidates, graph.n_goals), probs, trace)


# ------------------------------------------------------------- batch path


def forward_batch(params, positions, costs, quantize=False):
    """Network on ring-ordered batches.

    ``positions``: (B, N, 2); ``costs``: (B, N, g_max) candidate costs; agent
    ``i``'s ring neighbors are ``i - 1`` and ``i + 1`` (mod N).  Returns the
    slot probabilities (B, N, g_max) and a cache for :func:`backward_batch`.
    """
    w = params.weights
    residual = params.config.residual
    f = slot_features(costs)
    _check_slots(params, f)
    H, u, enc_cache = mlp_forward(w, "enc", f, positions)
    rounds = []
    for _ in range(params.rounds):
        if quantize:
            H, u = _quantize(H), _quantize(u)
        # both neighbor messages in one call, stacked on a leading axis: prev then next
        Hnb = np.stack([np.roll(H, 1, axis=1), np.roll(H, -1, axis=1)])
        unb = np.stack([np.roll(u, 1, axis=1), np.roll(u, -1, axis=1)])
        Xm = np.concatenate([Hnb, np.broadcast_to(H, Hnb.shape)], axis=-1)
        vm = np.concatenate([unb, np.broadcast_to(u, unb.shape)], axis=-1)
        m, mw, msg_cache = mlp_forward(w, "msg", Xm, vm)
        Xu = np.concatenate([m[0] + m[1], H, f], axis=-1)
        vu = np.concatenate([mw[0] + mw[1], u], axis=-1)
        Hn, un, upd_cache = mlp_forward(w, "upd", Xu, vu)
        rounds.append((msg_cache, upd_cache))
        if residual:
            H, u = H + Hn, u + un
        else:
            H, u = Hn, un
    if quantize:
        H, u = _quantize(H), _quantize(u)
    s, _, dec_cache = mlp_forward(w, "dec", np.concatenate([H, f], axis=-1), u, out_act=False)
    probs = softmax(s[..., 0])
    return probs, (enc_cache, rounds, dec_cache, probs)


def backward_batch(params, cache, dprobs):
    """Gradients of a scalar loss given ``d loss / d probs``; returns ``name -> array``."""
    w = params.weights
    cfg = params.config
    cs, cg = cfg.slot_channels, cfg.global_channels
    grads = {k: np.zeros_like(v) for k, v in w.items()}
    enc_cache, rounds, dec_cache, probs = cache
    ds = probs * (dprobs - np.sum(dprobs * probs, axis=-1, keepdims=True))
    dX, du = mlp_backward(w, "dec", dec_cache, ds[..., None], None, grads)
    dH = dX[..., :cs]
    df = dX[..., cs:]  # inputs carry no parameters; kept for symmetry
    del df
    for msg_cache, upd_cache in reversed(rounds):
        dXu, dvu = mlp_backward(w, "upd", upd_cache, dH, du, grads)
        dm = dXu[..., :cs]
        dH_new = dXu[..., cs:2 * cs]
        dw = dvu[..., :cg]
        du_new = dvu[..., cg:]
        if cfg.residual:
            dH_new = dH_new + dH
            du_new = du_new + du
        dXm, dvm = mlp_backward(w, "msg", msg_cache, np.stack([dm, dm]), np.stack([dw, dw]), grads)
        dHnb, dHself = dXm[..., :cs], dXm[..., cs:]
        dunb, duself = dvm[..., :cg], dvm[..., cg:]
        dH = dH_new + dHself[0] + dHself[1] + np.roll(dHnb[0], -1, axis=1) + np.roll(dHnb[1], 1, axis=1)
        du = du_new + duself[0] + duself[1] + np.roll(dunb[0], -1, axis=1) + np.roll(dunb[1], 1, axis=1)
    mlp_backward(w, "enc", enc_cache, dH, du, grads)
    return grads
