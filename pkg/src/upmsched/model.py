"""Variable-dimension policy network.

Pipeline per decision state (J pending jobs, M active machines):

1. Sequential embedding: a bidirectional LSTM reads each job's M machine-rows
   and its final states are refined to a 16-wide job vector; urgency rows are
   lifted, contextualized by self-attention across jobs, concatenated in and
   re-embedded.
2. Transformer encoder: self-attention plus feedforward, each with a residual
   connection.
3. Action-pointer decoder: a bottom bidirectional LSTM turns encoded jobs
   into per-action keys (plus a derived deactivation key), a top bidirectional
   LSTM initialized from the bottom's final states produces a query, and an
   additive attention head scores the J+1 actions; softmax yields the output
   distribution.

All feedforward blocks are two affine maps around a Leaky ReLU.  Parameter
shapes are fixed; the total count is 117,292 regardless of (J, M).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var, concat, leaky_relu, sigmoid, softmax, stack, swap_last, tanh
from .encoding import EncodedState

FORMAT_VERSION = 1

# layer name -> {array name -> shape}; LSTM weights hold the input rows first,
# then the recurrent rows, with gate columns ordered (input, forget, cell, out)
PARAM_SHAPES: dict[str, dict[str, tuple[int, ...]]] = {
    "embedding_bilstm": {"fw_W": (20, 64), "fw_b": (64,), "bw_W": (20, 64), "bw_b": (64,)},
    "ff_res": {"W_in": (32, 16), "b_in": (16,), "W_out": (16, 16), "b_out": (16,)},
    "ff_urg_1": {"W_in": (2, 4), "b_in": (4,), "W_out": (4, 4), "b_out": (4,)},
    "urgency_attention": {"Wq": (4, 16), "bq": (16,), "Wk": (4, 16), "bk": (16,),
                          "Wv": (4, 16), "bv": (16,), "Wo": (16, 4), "bo": (4,)},
    "ff_urg_2": {"W_in": (4, 4), "b_in": (4,), "W_out": (4, 4), "b_out": (4,)},
    "ff_emb": {"W_in": (20, 16), "b_in": (16,), "W_out": (16, 16), "b_out": (16,)},
    "encoder_attention": {"Wq": (16, 128), "bq": (128,), "Wk": (16, 128), "bk": (128,),
                          "Wv": (16, 128), "bv": (128,), "Wo": (128, 16), "bo": (16,)},
    "ff_enc": {"W_in": (16, 16), "b_in": (16,), "W_out": (16, 16), "b_out": (16,)},
    "decoder_bottom_bilstm": {"fw_W": (48, 128), "fw_b": (128,),
                              "bw_W": (48, 128), "bw_b": (128,)},
    "ff_deact": {"W_in": (64, 64), "b_in": (64,), "W_out": (64, 64), "b_out": (64,)},
    "ff_h_fw": {"W_in": (32, 32), "b_in": (32,), "W_out": (32, 32), "b_out": (32,)},
    "ff_h_bw": {"W_in": (32, 32), "b_in": (32,), "W_out": (32, 32), "b_out": (32,)},
    "ff_c_fw": {"W_in": (32, 32), "b_in": (32,), "W_out": (32, 32), "b_out": (32,)},
    "ff_c_bw": {"W_in": (32, 32), "b_in": (32,), "W_out": (32, 32), "b_out": (32,)},
    "decoder_top_bilstm": {"fw_W": (96, 128), "fw_b": (128,),
                           "bw_W": (96, 128), "bw_b": (128,)},
    "ff_q": {"W_in": (64, 128), "b_in": (128,), "W_out": (128, 128), "b_out": (128,)},
    "pointer_attention": {"W_keys": (64, 128), "W_query": (128, 128), "v": (128,)},
}

LAYER_PARAM_COUNTS = {
    "embedding_bilstm": 2688,
    "ff_res": 800,
    "ff_urg_1": 32,
    "urgency_attention": 308,
    "ff_urg_2": 40,
    "ff_emb": 608,
    "encoder_attention": 8592,
    "ff_enc": 544,
    "decoder_bottom_bilstm": 12544,
    "ff_deact": 8320,
    "ff_h_fw": 2112,
    "ff_h_bw": 2112,
    "ff_c_fw": 2112,
    "ff_c_bw": 2112,
    "decoder_top_bilstm": 24832,
    "ff_q": 24832,
    "pointer_attention": 24704,
}

TOTAL_PARAM_COUNT = 117_292

_MASK = -1e9  # pre-softmax score for infeasible deactivation


@dataclass(frozen=True)
class ModelConfig:
    w_max: int = 10
    alpha: float = 0.1  # Leaky ReLU slope


class ShapeError(ValueError):
    """A parameter array does not match its layer's expected shape."""


class ParamStore:
    """Named, shaped, 64-bit parameter arrays plus metadata."""

    def __init__(self, arrays: dict[str, np.ndarray], meta: dict):
        self.arrays = arrays
        self.meta = meta
        validate_shapes(arrays)

    @property
    def config(self) -> ModelConfig:
        return ModelConfig(w_max=self.meta["w_max"], alpha=self.meta["alpha"])

    def total_count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def layer_counts(self) -> dict[str, int]:
        out = {layer: 0 for layer in PARAM_SHAPES}
        for name, a in self.arrays.items():
            out[name.split(".")[0]] += a.size
        return out

    def copy(self) -> "ParamStore":
        return ParamStore({k: v.copy() for k, v in self.arrays.items()},
                          dict(self.meta))


def validate_shapes(arrays: dict[str, np.ndarray]):
    for layer, subs in PARAM_SHAPES.items():
        for sub, shape in subs.items():
            name = f"{layer}.{sub}"
            if name not in arrays:
                raise ShapeError(f"missing parameter array {name}")
            if tuple(arrays[name].shape) != shape:
                raise ShapeError(
                    f"layer {name}: expected shape {shape}, got {tuple(arrays[name].shape)}")
    extra = set(arrays) - {f"{l}.{s}" for l, subs in PARAM_SHAPES.items() for s in subs}
    if extra:
        raise ShapeError(f"unexpected parameter arrays: {sorted(extra)}")


def _glorot(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + (shape[1] if len(shape) > 1 else 1)))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _lstm_init(rng, d_in, hidden):
    W = np.empty((d_in + hidden, 4 * hidden))
    for g in range(4):
        W[:d_in, g * hidden:(g + 1) * hidden] = _glorot(rng, (d_in, hidden))
        W[d_in:, g * hidden:(g + 1) * hidden] = _orthogonal(rng, hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget gate
    return W, b


def init_params(config: ModelConfig = ModelConfig(), seed: int = 0) -> ParamStore:
    """Fresh parameters: Glorot-uniform affine weights, orthogonal LSTM
    recurrences, zero biases except forget gates at one."""
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for layer, subs in PARAM_SHAPES.items():
        if layer.endswith("bilstm"):
            d_in = subs["fw_W"][0] - subs["fw_b"][0] // 4
            hidden = subs["fw_b"][0] // 4
            for direction in ("fw", "bw"):
                W, b = _lstm_init(rng, d_in, hidden)
                arrays[f"{layer}.{direction}_W"] = W
                arrays[f"{layer}.{direction}_b"] = b
        else:
            for sub, shape in subs.items():
                if sub.startswith("b"):
                    arrays[f"{layer}.{sub}"] = np.zeros(shape)
                else:
                    arrays[f"{layer}.{sub}"] = _glorot(rng, shape)
    meta = {"version": FORMAT_VERSION, "seed": seed,
            "init": "glorot-uniform/orthogonal-recurrent/forget-bias-1",
            **asdict(config)}
    return ParamStore(arrays, meta)


def save_params(store: ParamStore, path):
    np.savez(path, __meta__=np.array(json.dumps(store.meta, sort_keys=True)),
             **store.arrays)


def load_params(path) -> ParamStore:
    with np.load(path, allow_pickle=False) as z:
        if "__meta__" not in z:
            raise ShapeError("missing metadata record")
        meta = json.loads(str(z["__meta__"]))
        if meta.get("version") != FORMAT_VERSION:
            raise ShapeError(f"unsupported weight format version {meta.get('version')}")
        arrays = {k: z[k].astype(np.float64, copy=True) for k in z.files if k != "__meta__"}
    return ParamStore(arrays, meta)


# -- forward graph ----------------------------------------------------------

def make_param_vars(store: ParamStore, requires_grad: bool = False) -> dict[str, Var]:
    return {k: Var(v, requires_grad=requires_grad) for k, v in store.arrays.items()}


def _ff(pv, layer, x, alpha):
    h = leaky_relu(x @ pv[f"{layer}.W_in"] + pv[f"{layer}.b_in"], alpha)
    return h @ pv[f"{layer}.W_out"] + pv[f"{layer}.b_out"]


def _self_attention(pv, layer, x, d_k):
    q = x @ pv[f"{layer}.Wq"] + pv[f"{layer}.bq"]
    k = x @ pv[f"{layer}.Wk"] + pv[f"{layer}.bk"]
    v = x @ pv[f"{layer}.Wv"] + pv[f"{layer}.bv"]
    att = softmax((q @ swap_last(k)) * (1.0 / np.sqrt(d_k)))
    return (att @ v) @ pv[f"{layer}.Wo"] + pv[f"{layer}.bo"]


def _lstm_scan(pv, layer, direction, x, hidden, h0, c0, reverse):
    """One LSTM direction over the second-to-last axis of ``x``.

    Returns per-position hidden states (in positional order) and the final
    (hidden, cell) pair.
    """
    W = pv[f"{layer}.{direction}_W"]
    b = pv[f"{layer}.{direction}_b"]
    T = x.shape[-2]
    d_in = x.shape[-1]
    Wx = W[0:d_in]
    Wh = W[d_in:]
    z_all = x @ Wx + b
    h, c = h0, c0
    hs = []
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        z = z_all[..., t, :] + (h @ Wh)
        i = sigmoid(z[..., 0:hidden])
        f = sigmoid(z[..., hidden:2 * hidden])
        g = tanh(z[..., 2 * hidden:3 * hidden])
        o = sigmoid(z[..., 3 * hidden:4 * hidden])
        c = f * c + i * g
        h = o * tanh(c)
        hs.append(h)
    if reverse:
        hs.reverse()
    return hs, h, c


def _zeros(shape):
    return Var(np.zeros(shape))


def forward_graph(pv: dict[str, Var], resource: np.ndarray, urgency: np.ndarray,
                  mask_deactivate: bool, alpha: float) -> Var:
    """Batched forward pass: (B, J, M, 4) + (B, J, 2) -> (B, J+1) distribution."""
    B, J, M, _ = resource.shape
    x_res = Var(resource)
    x_urg = Var(urgency)

    # sequential embedding: machines as a sequence, (B, J) as batch
    z0 = _zeros((B, J, 16))
    _, hf, _ = _lstm_scan(pv, "embedding_bilstm", "fw", x_res, 16, z0, z0, False)
    _, hb, _ = _lstm_scan(pv, "embedding_bilstm", "bw", x_res, 16, z0, z0, True)
    res_emb = _ff(pv, "ff_res", concat([hf, hb]), alpha)  # (B, J, 16)

    urg = _ff(pv, "ff_urg_1", x_urg, alpha)
    urg = _self_attention(pv, "urgency_attention", urg, 16)
    urg = _ff(pv, "ff_urg_2", urg, alpha)  # (B, J, 4)

    emb = _ff(pv, "ff_emb", concat([res_emb, urg]), alpha)  # (B, J, 16)

    # transformer encoder
    enc = emb + _self_attention(pv, "encoder_attention", emb, 128)
    enc = enc + _ff(pv, "ff_enc", enc, alpha)

    # action-pointer decoder
    z0 = _zeros((B, 32))
    bf_hs, bf_h, bf_c = _lstm_scan(pv, "decoder_bottom_bilstm", "fw", enc, 32, z0, z0, False)
    bb_hs, bb_h, bb_c = _lstm_scan(pv, "decoder_bottom_bilstm", "bw", enc, 32, z0, z0, True)
    h_bottom = [concat([bf_hs[i], bb_hs[i]]) for i in range(J)]  # (B, 64) each
    h_deact = _ff(pv, "ff_deact", h_bottom[-1], alpha)
    keys = stack(h_bottom + [h_deact], axis=-2)  # (B, J+1, 64)

    h0f = _ff(pv, "ff_h_fw", bf_h, alpha)
    c0f = _ff(pv, "ff_c_fw", bf_c, alpha)
    h0b = _ff(pv, "ff_h_bw", bb_h, alpha)
    c0b = _ff(pv, "ff_c_bw", bb_c, alpha)
    tf_hs, _, _ = _lstm_scan(pv, "decoder_top_bilstm", "fw", keys, 32, h0f, c0f, False)
    tb_hs, _, _ = _lstm_scan(pv, "decoder_top_bilstm", "bw", keys, 32, h0b, c0b, True)
    h_top_last = concat([tf_hs[-1], tb_hs[-1]])  # (B, 64)
    query = _ff(pv, "ff_q", h_top_last, alpha)  # (B, 128)

    u = tanh(keys @ pv["pointer_attention.W_keys"]
             + (query @ pv["pointer_attention.W_query"]).reshape(B, 1, 128))
    scores = (u @ pv["pointer_attention.v"].reshape(128, 1)).reshape(B, J + 1)
    if mask_deactivate:
        mask = np.zeros(J + 1)
        mask[J] = _MASK
        scores = scores + Var(mask)
    return softmax(scores)


def forward(store: ParamStore, es: EncodedState) -> np.ndarray:
    """Action distribution of length J+1 for one encoded state.

    The deactivation slot is masked out when only one machine is active.
    """
    if es.n_jobs < 1 or es.n_machines < 1:
        raise ValueError("state must have at least one pending job and active machine")
    pv = make_param_vars(store)
    y = forward_graph(pv, es.resource[None], es.urgency[None],
                      mask_deactivate=es.n_machines == 1, alpha=store.config.alpha)
    return y.data[0]


def loss(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error over the action slots."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise ValueError(f"length mismatch: {y_hat.shape} vs {y.shape}")
    return float(np.mean((y_hat - y) ** 2))


def batch_loss_graph(pv: dict[str, Var], resource: np.ndarray, urgency: np.ndarray,
                     y: np.ndarray, mask_deactivate: bool, alpha: float) -> Var:
    """Summed per-state MSE of a same-shape batch (scalar Var)."""
    y_hat = forward_graph(pv, resource, urgency, mask_deactivate, alpha)
    diff = y_hat - Var(y)
    return (diff * diff).sum() * (1.0 / y.shape[-1])


def backward(store: ParamStore, es: EncodedState, y: np.ndarray) -> dict[str, np.ndarray]:
    """Gradient of the MSE loss w.r.t. every parameter array."""
    if len(y) != es.n_jobs + 1:
        raise ValueError("target length must be J+1")
    pv = make_param_vars(store, requires_grad=True)
    total = batch_loss_graph(pv, es.resource[None], es.urgency[None], y[None],
                             es.n_machines == 1, store.config.alpha)
    total.backward()
    return {k: (v.grad if v.grad is not None else np.zeros_like(v.data))
            for k, v in pv.items()}
