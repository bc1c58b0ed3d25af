"""Forward-pass reference of the iterative depth decoder and its distillation losses.

No training happens here: every weight is drawn from a seeded generator so the
algebra, shapes and invariants of the decoding step can be checked. One layer:

    Q^i      = base queries + O^{i-1} split per head (broadcast over points)
    delta    = affine(Q^i)                       one scalar per (query, head, point)
    alpha    = softmax_p(affine(Q^i))            attention weights over points
    o        = P^{i-1} broadcast to every head and point
    W_d      = beta * sum_p alpha * (o + delta)  one scalar per (query, head)
    y^h      = W_d * Psi(V^h, c)                 Psi: bilinear sample, averaged over scales
    Y        = concat_h y^h
    O^i      = T(Y, q_embed)                     one pre-norm transformer block
    P^i      = P^{i-1} + f([O^i; O^{i-1}])       f: one affine map shared by all layers

with O^0 = 0 and P^0 = f(0, 0). Sampling offsets are disabled, so every point
of a head reads the same location c and only its weight differs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

LN_EPS = 1e-5


@dataclass(frozen=True)
class DepthHeadConfig:
    queries: int = 300
    heads: int = 8
    points: int = 4
    scales: int = 3
    channels: int = 256
    layers: int = 6
    beta: float = 1.0

    def __post_init__(self):
        for name in ("queries", "heads", "points", "scales", "channels", "layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.channels % self.heads:
            raise ValueError(f"channels ({self.channels}) must divide evenly into {self.heads} heads")

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads


# --------------------------------------------------------------- building blocks

def depth_offset(q: np.ndarray, w: np.ndarray, b: float = 0.0) -> np.ndarray:
    """Affine map of query vectors (last axis) to one scalar each."""
    q, w = np.asarray(q, dtype=float), np.asarray(w, dtype=float)
    if w.ndim != 1 or q.shape[-1] != w.shape[0]:
        raise ValueError(f"query width {q.shape[-1]} does not match offset weights {w.shape}")
    return q @ w + b


def check_alpha(alpha: np.ndarray, tol: float = 1e-6) -> None:
    a = np.asarray(alpha, dtype=float)
    if (a < 0).any():
        raise ValueError("attention weights must be non-negative")
    if np.abs(a.sum(axis=-1) - 1.0).max(initial=0.0) > tol:
        raise ValueError("attention weights must sum to 1 over points")


def depth_weight(alpha, beta: float, o, delta) -> np.ndarray:
    """W_d = beta * sum_p alpha_p (o_p + delta_p), reduced over the last axis."""
    alpha = np.asarray(alpha, dtype=float)
    check_alpha(alpha)
    s = (alpha * (np.asarray(o, dtype=float) + np.asarray(delta, dtype=float))).sum(axis=-1)
    return beta * s


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def sample_memory(grid: np.ndarray, c) -> np.ndarray:
    """Bilinear sample of an (h, w, d) grid at normalized points c = (x, y).

    Cell (i, j) has its centre at ((j + 0.5) / w, (i + 0.5) / h); points past
    the outer centres clamp to the border cells. ``c`` may be a single point
    or an (n, 2) array.
    """
    grid = np.asarray(grid, dtype=float)
    c = np.asarray(c, dtype=float)
    single = c.ndim == 1
    c = c.reshape(-1, 2)
    if ((c < 0) | (c > 1)).any():
        raise ValueError("sampling points must lie in [0, 1]^2")
    h, w = grid.shape[:2]
    px = np.clip(c[:, 0] * w - 0.5, 0.0, w - 1)
    py = np.clip(c[:, 1] * h - 0.5, 0.0, h - 1)
    x0 = np.floor(px).astype(int)
    y0 = np.floor(py).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (px - x0)[:, None]
    fy = (py - y0)[:, None]
    out = ((1 - fy) * ((1 - fx) * grid[y0, x0] + fx * grid[y0, x1])
           + fy * ((1 - fx) * grid[y1, x0] + fx * grid[y1, x1]))
    return out[0] if single else out


def sample_pyramid(levels: Sequence[np.ndarray], c) -> np.ndarray:
    """Psi: the bilinear sample averaged over every scale of one head."""
    return sum(sample_memory(g, c) for g in levels) / len(levels)


def head_output(levels: Sequence[np.ndarray], c, w_d) -> np.ndarray:
    """y^h = W_d * Psi(V^h, c); ``w_d`` is a scalar or one value per point."""
    s = sample_pyramid(levels, c)
    w_d = np.asarray(w_d, dtype=float)
    return w_d[..., None] * s if w_d.ndim else w_d * s


def concat_heads(parts: Sequence[np.ndarray], heads: int) -> np.ndarray:
    if len(parts) != heads:
        raise ValueError(f"expected {heads} head outputs, got {len(parts)}")
    widths = {np.shape(p)[-1] for p in parts}
    if len(widths) != 1:
        raise ValueError(f"head outputs differ in width: {sorted(widths)}")
    return np.concatenate(parts, axis=-1)


def layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS)


@dataclass
class BlockWeights:
    """Single-head self-attention plus a ReLU feed-forward, both pre-norm."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def random(cls, rng: np.random.Generator, c: int, hidden: Optional[int] = None) -> "BlockWeights":
        hidden = hidden or 2 * c
        g = lambda *s: rng.normal(0.0, 1.0 / np.sqrt(s[0]), s)
        return cls(g(c, c), g(c, c), g(c, c), g(c, c), g(c, hidden), np.zeros(hidden), g(hidden, c), np.zeros(c))

    @classmethod
    def zeros(cls, c: int, hidden: Optional[int] = None) -> "BlockWeights":
        hidden = hidden or 2 * c
        z = np.zeros
        return cls(z((c, c)), z((c, c)), z((c, c)), z((c, c)), z((c, hidden)), z(hidden), z((hidden, c)), z(c))


def layer_update(y: np.ndarray, q_embed: np.ndarray, w: BlockWeights) -> np.ndarray:
    """T(Y, q_embed): one pre-norm transformer block over the query axis."""
    y = np.asarray(y, dtype=float)
    q_embed = np.asarray(q_embed, dtype=float)
    if y.shape != q_embed.shape or y.ndim != 2 or w.wq.shape[0] != y.shape[1]:
        raise ValueError(f"block input {y.shape} / query embedding {q_embed.shape} / weights {w.wq.shape} disagree")
    h = layer_norm(y)
    qk = h + q_embed
    scores = (qk @ w.wq) @ (qk @ w.wk).T / np.sqrt(y.shape[1])
    x = y + (softmax(scores, axis=-1) @ (h @ w.wv)) @ w.wo
    h2 = layer_norm(x)
    return x + np.maximum(h2 @ w.w1 + w.b1, 0.0) @ w.w2 + w.b2


def refine_depth(o_now: np.ndarray, o_prev: np.ndarray, p_prev: np.ndarray, fw: np.ndarray, fb: float) -> np.ndarray:
    """P^i = P^{i-1} + f([O^i; O^{i-1}]) with f affine."""
    z = np.concatenate([np.asarray(o_now, dtype=float), np.asarray(o_prev, dtype=float)], axis=-1)
    if z.shape[-1] != np.shape(fw)[0] or np.shape(p_prev) != z.shape[:-1]:
        raise ValueError("refinement inputs and weights disagree in shape")
    return np.asarray(p_prev, dtype=float) + (z @ fw + fb)


# --------------------------------------------------------------- full pass

@dataclass
class HeadWeights:
    phi_w: np.ndarray      # (layers, head_dim) offset module
    phi_b: np.ndarray      # (layers,)
    att_w: np.ndarray      # (layers, head_dim) attention logits
    att_b: np.ndarray      # (layers, points)
    blocks: list           # BlockWeights per layer
    f_w: np.ndarray        # (2 * channels,) shared depth map
    f_b: float

    @classmethod
    def random(cls, cfg: DepthHeadConfig, rng: np.random.Generator) -> "HeadWeights":
        d, L = cfg.head_dim, cfg.layers
        return cls(
            phi_w=rng.normal(0.0, 0.1 / np.sqrt(d), (L, d)),
            phi_b=rng.normal(0.0, 0.01, L),
            att_w=rng.normal(0.0, 1.0 / np.sqrt(d), (L, d)),
            att_b=rng.normal(0.0, 0.1, (L, cfg.points)),
            blocks=[BlockWeights.random(rng, cfg.channels) for _ in range(L)],
            f_w=rng.normal(0.0, 0.05 / np.sqrt(2 * cfg.channels), 2 * cfg.channels),
            f_b=float(rng.uniform(0.2, 0.8)),
        )

    @classmethod
    def zeros(cls, cfg: DepthHeadConfig) -> "HeadWeights":
        d, L = cfg.head_dim, cfg.layers
        return cls(np.zeros((L, d)), np.zeros(L), np.zeros((L, d)), np.zeros((L, cfg.points)),
                   [BlockWeights.zeros(cfg.channels) for _ in range(L)], np.zeros(2 * cfg.channels), 0.0)


@dataclass
class DecoderInputs:
    memory: list          # per head: list over scales of (h_s, w_s, head_dim) grids
    queries: np.ndarray   # (Q, heads, points, head_dim)
    refs: np.ndarray      # (Q, 2) normalized box centres

    def validate(self, cfg: DepthHeadConfig) -> None:
        if len(self.memory) != cfg.heads or any(len(m) != cfg.scales for m in self.memory):
            raise ValueError("memory must hold one grid per head per scale")
        for levels in self.memory:
            for g in levels:
                if g.ndim != 3 or g.shape[2] != cfg.head_dim or not np.isfinite(g).all():
                    raise ValueError("memory grids must be finite (h, w, head_dim) arrays")
        if self.queries.shape != (cfg.queries, cfg.heads, cfg.points, cfg.head_dim):
            raise ValueError(f"queries have shape {self.queries.shape}")
        if self.refs.shape != (cfg.queries, 2) or ((self.refs < 0) | (self.refs > 1)).any():
            raise ValueError("reference points must be a (Q, 2) array in [0, 1]")


def make_inputs(cfg: DepthHeadConfig, seed: int, sizes: Optional[Sequence[tuple[int, int]]] = None) -> DecoderInputs:
    """Seeded memory pyramid, queries and reference points."""
    rng = np.random.default_rng([int(seed), 1])
    if sizes is None:
        sizes = [(max(1, 32 >> s), max(1, 32 >> s)) for s in range(cfg.scales)]
    if len(sizes) != cfg.scales:
        raise ValueError("one grid size per scale is required")
    memory = [[rng.normal(0.0, 1.0, (h, w, cfg.head_dim)) for h, w in sizes] for _ in range(cfg.heads)]
    queries = rng.normal(0.0, 1.0, (cfg.queries, cfg.heads, cfg.points, cfg.head_dim))
    refs = rng.uniform(0.0, 1.0, (cfg.queries, 2))
    return DecoderInputs(memory, queries, refs)


@dataclass
class LayerTrace:
    alpha: np.ndarray      # (Q, heads, points)
    o: np.ndarray          # (Q, heads, points)
    delta: np.ndarray      # (Q, heads, points)
    w_d: np.ndarray        # (Q, heads)
    increment: np.ndarray  # (Q,)
    p: np.ndarray          # (Q,) prediction after this layer


@dataclass
class ForwardResult:
    p: np.ndarray
    p0: np.ndarray
    layers: list = field(default_factory=list)

    @property
    def alphas(self) -> list:
        return [t.alpha for t in self.layers]


def forward(cfg: DepthHeadConfig, inputs: DecoderInputs, seed: int = 0,
            weights: Optional[HeadWeights] = None) -> ForwardResult:
    """Run ``cfg.layers`` refinement passes; weights come from ``seed`` unless given."""
    inputs.validate(cfg)
    if weights is None:
        weights = HeadWeights.random(cfg, np.random.default_rng([int(seed), 2]))
    nq, H, d = cfg.queries, cfg.heads, cfg.head_dim
    psi = np.stack([sample_pyramid(inputs.memory[h], inputs.refs) for h in range(H)], axis=1)  # (Q, H, d)

    o_prev = np.zeros((nq, cfg.channels))
    p = refine_depth(o_prev, o_prev, np.zeros(nq), weights.f_w, weights.f_b)
    result = ForwardResult(p=p, p0=p.copy())
    for i in range(cfg.layers):
        q = inputs.queries + o_prev.reshape(nq, H, 1, d)
        delta = depth_offset(q, weights.phi_w[i], weights.phi_b[i])
        alpha = softmax(q @ weights.att_w[i] + weights.att_b[i], axis=-1)
        o = np.broadcast_to(p[:, None, None], alpha.shape).copy()
        w_d = depth_weight(alpha, cfg.beta, o, delta)
        y = concat_heads([w_d[:, h, None] * psi[:, h] for h in range(H)], H)
        q_embed = q.mean(axis=2).reshape(nq, cfg.channels)
        o_now = layer_update(y, q_embed, weights.blocks[i])
        p_new = refine_depth(o_now, o_prev, p, weights.f_w, weights.f_b)
        result.layers.append(LayerTrace(alpha, o, delta, w_d, p_new - p, p_new))
        p, o_prev = p_new, o_now
    result.p = p
    return result


def replay_depth_weights(result: ForwardResult, beta: float) -> list[np.ndarray]:
    """Recompute every logged W_d from the logged alpha, o and delta under a new beta."""
    return [depth_weight(t.alpha, beta, t.o, t.delta) for t in result.layers]


def format_trace(cfg: DepthHeadConfig, result: ForwardResult, seed: int) -> str:
    """Line-oriented dump of per-layer predictions, depth weights and alpha sums."""
    lines = [f"# depth-head trace seed={seed} queries={cfg.queries} heads={cfg.heads} points={cfg.points} "
             f"scales={cfg.scales} channels={cfg.channels} layers={cfg.layers} beta={cfg.beta:.6f}",
             "layer,query,P,W_d_mean,alpha_sum_min,alpha_sum_max"]
    for q in range(cfg.queries):
        lines.append(f"0,{q},{result.p0[q]:.6f},,,")
    for i, t in enumerate(result.layers, start=1):
        sums = t.alpha.sum(axis=-1)
        for q in range(cfg.queries):
            lines.append(f"{i},{q},{t.p[q]:.6f},{t.w_d[q].mean():.6f},{sums[q].min():.6f},{sums[q].max():.6f}")
    dev = max((float(np.abs(t.alpha.sum(-1) - 1).max()) for t in result.layers), default=0.0)
    tele = float(np.abs(result.p - result.p0 - sum(t.increment for t in result.layers)).max()) if result.layers else 0.0
    lines.append(f"# check alpha_sum_max_deviation={dev:.3e} telescoping_residual={tele:.3e}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------- losses

@dataclass
class FeaturePair:
    """Student and teacher features: per scale, an array whose first axis is the frame."""

    src: list
    teacher: list

    def __post_init__(self):
        if len(self.src) != len(self.teacher) or not self.src:
            raise ValueError("need the same positive number of scales on both sides")
        for a, b in zip(self.src, self.teacher):
            if np.shape(a) != np.shape(b):
                raise ValueError(f"feature shapes differ: {np.shape(a)} vs {np.shape(b)}")


def align_loss(pair: FeaturePair) -> float:
    """Mean over frames and scales of 1 - cosine similarity of the flattened maps."""
    terms = []
    for a, b in zip(pair.src, pair.teacher):
        a = np.asarray(a, dtype=float).reshape(len(a), -1)
        b = np.asarray(b, dtype=float).reshape(len(b), -1)
        na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
        if (na == 0).any() or (nb == 0).any():
            raise ValueError("feature map with zero norm")
        cos = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
        terms.append(1.0 - cos)
    return float(np.mean(np.concatenate(terms)))


@dataclass
class ProjectionMLP:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def random(cls, rng: np.random.Generator, c_in: int, c_out: int, hidden: Optional[int] = None):
        hidden = hidden or c_in
        return cls(rng.normal(0, 1 / np.sqrt(c_in), (c_in, hidden)), np.zeros(hidden),
                   rng.normal(0, 1 / np.sqrt(hidden), (hidden, c_out)), np.zeros(c_out))


def project_features(x: np.ndarray, mlp: ProjectionMLP) -> np.ndarray:
    """Two-layer projection of encoder features onto the teacher's width."""
    return np.maximum(np.asarray(x, dtype=float) @ mlp.w1 + mlp.b1, 0.0) @ mlp.w2 + mlp.b2


def reg_loss(p, y) -> float:
    p, y = np.asarray(p, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()
    if p.size != y.size:
        raise ValueError(f"{p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise ValueError("regression loss needs at least one instance")
    return float(np.mean((p - y) ** 2))


def total_loss(l_box: float, l_reg: float, l_align: float, weights=(1.0, 1.0, 1.0)) -> float:
    vals = (l_box, l_reg, l_align)
    if not all(np.isfinite(v) for v in vals + tuple(weights)):
        raise ValueError("losses and weights must be finite")
    if any(w < 0 for w in weights):
        raise ValueError("loss weights must be non-negative")
    return float(sum(w * v for w, v in zip(weights, vals)))
