"""Recurrent, attention and affine building blocks.

Sequences are batched as ``[batch, time, features]`` with a boolean
``[batch, time]`` mask that is true on real tokens. Padding must be on the
right. Unbatched ``[time, features]`` inputs are accepted and returned
unbatched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Parameter, ShapeError, Tensor, _record, as_tensor, concat, matmul, reshape, sigmoid, softmax, stack, tanh, where


def uniform_init(rng: np.random.Generator, shape, fan_in: int, name: str) -> Parameter:
    bound = 1.0 / np.sqrt(fan_in)
    return Parameter(rng.uniform(-bound, bound, size=shape), name=name)


def zeros(shape, name: str) -> Parameter:
    return Parameter(np.zeros(shape), name=name)


@dataclass
class GruCellParams:
    input_dim: int
    hidden_dim: int
    W_z: Parameter
    W_r: Parameter
    W_h: Parameter
    U_z: Parameter
    U_r: Parameter
    U_h: Parameter
    b_z: Parameter
    b_r: Parameter
    b_h: Parameter

    @classmethod
    def init(cls, rng, input_dim: int, hidden_dim: int, prefix: str = "gru") -> "GruCellParams":
        w = {g: uniform_init(rng, (hidden_dim, input_dim), input_dim, f"{prefix}.W_{g}") for g in "zrh"}
        u = {g: uniform_init(rng, (hidden_dim, hidden_dim), hidden_dim, f"{prefix}.U_{g}") for g in "zrh"}
        b = {g: zeros(hidden_dim, f"{prefix}.b_{g}") for g in "zrh"}
        return cls(input_dim, hidden_dim, w["z"], w["r"], w["h"], u["z"], u["r"], u["h"], b["z"], b["r"], b["h"])

    def parameters(self) -> list[Parameter]:
        return [self.W_z, self.W_r, self.W_h, self.U_z, self.U_r, self.U_h, self.b_z, self.b_r, self.b_h]


@dataclass
class BiGruParams:
    forward_cell: GruCellParams
    backward_cell: GruCellParams

    @classmethod
    def init(cls, rng, input_dim: int, hidden_dim: int, prefix: str = "bigru") -> "BiGruParams":
        return cls(
            GruCellParams.init(rng, input_dim, hidden_dim, f"{prefix}.fwd"),
            GruCellParams.init(rng, input_dim, hidden_dim, f"{prefix}.bwd"),
        )

    @property
    def hidden_dim(self) -> int:
        return self.forward_cell.hidden_dim

    def parameters(self) -> list[Parameter]:
        return self.forward_cell.parameters() + self.backward_cell.parameters()


@dataclass
class AttentionParams:
    score_vector: Parameter

    @classmethod
    def init(cls, rng, dim: int, prefix: str = "attn") -> "AttentionParams":
        return cls(uniform_init(rng, dim, dim, f"{prefix}.score"))

    def parameters(self) -> list[Parameter]:
        return [self.score_vector]


@dataclass
class LinearParams:
    weight: Parameter
    bias: Parameter

    @classmethod
    def init(cls, rng, in_dim: int, out_dim: int, prefix: str = "linear") -> "LinearParams":
        return cls(uniform_init(rng, (out_dim, in_dim), in_dim, f"{prefix}.weight"), zeros(out_dim, f"{prefix}.bias"))

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


def _gate_step(cell: GruCellParams, xz, xr, xh, h, UzT, UrT, UhT):
    z = sigmoid(xz + matmul(h, UzT) + cell.b_z)
    r = sigmoid(xr + matmul(h, UrT) + cell.b_r)
    h_tilde = tanh(xh + matmul(r * h, UhT) + cell.b_h)
    return (1.0 - z) * h + z * h_tilde


def gru_cell_step(cell: GruCellParams, x_t, h_prev) -> Tensor:
    """One GRU update: ``h = (1 - z) * h_prev + z * tanh(W_h x + U_h (r * h_prev) + b_h)``."""
    x_t, h_prev = as_tensor(x_t), as_tensor(h_prev)
    if x_t.shape[-1] != cell.input_dim or h_prev.shape[-1] != cell.hidden_dim:
        raise ShapeError(
            f"gru cell expects input {cell.input_dim} / hidden {cell.hidden_dim}, "
            f"got {x_t.shape} / {h_prev.shape}"
        )
    return _gate_step(
        cell,
        matmul(x_t, cell.W_z.T),
        matmul(x_t, cell.W_r.T),
        matmul(x_t, cell.W_h.T),
        h_prev,
        cell.U_z.T,
        cell.U_r.T,
        cell.U_h.T,
    )


def _check_mask(mask: np.ndarray):
    # right padding: once a row turns false it never turns true again
    if mask.shape[1] > 1 and (mask[:, 1:] & ~mask[:, :-1]).any():
        raise ValueError("masked positions must form a suffix of each sequence")


def _run_direction(cell: GruCellParams, seq: Tensor, mask: np.ndarray, reverse: bool) -> list[Tensor]:
    batch, steps, _ = seq.shape
    xz = matmul(seq, cell.W_z.T)
    xr = matmul(seq, cell.W_r.T)
    xh = matmul(seq, cell.W_h.T)
    UzT, UrT, UhT = cell.U_z.T, cell.U_r.T, cell.U_h.T
    h = Tensor(np.zeros((batch, cell.hidden_dim)))
    outputs: list[Tensor | None] = [None] * steps
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    for t in order:
        m = mask[:, t : t + 1]
        h_new = _gate_step(cell, xz[:, t], xr[:, t], xh[:, t], h, UzT, UrT, UhT)
        h = where(m, h_new, h)
        outputs[t] = where(m, h, 0.0)
    return outputs


def gru_scan(cell: GruCellParams, seq, mask: np.ndarray, reverse: bool = False) -> Tensor:
    """Whole-sequence GRU direction as a single tape node with hand-written BPTT.

    Same arithmetic as chaining :func:`gru_cell_step` (see ``_run_direction``)
    but records one node instead of a dozen per step. Returns ``[B, T, H]``.
    """
    seq = as_tensor(seq)
    x = seq.data
    B, T, _ = x.shape
    H = cell.hidden_dim
    Wz, Wr, Wh = cell.W_z.data, cell.W_r.data, cell.W_h.data
    Uz, Ur, Uh = cell.U_z.data, cell.U_r.data, cell.U_h.data
    xz = x @ Wz.T + cell.b_z.data
    xr = x @ Wr.T + cell.b_r.data
    xh = x @ Wh.T + cell.b_h.data
    m = mask[:, :, None].astype(x.dtype)
    order = range(T - 1, -1, -1) if reverse else range(T)
    hp = np.zeros((T, B, H))  # state entering each step
    zs, rs, cs = np.zeros((T, B, H)), np.zeros((T, B, H)), np.zeros((T, B, H))
    out = np.zeros((B, T, H))
    h = np.zeros((B, H))
    xzr = np.concatenate([xz, xr], axis=-1)
    UzrT = np.concatenate([Uz, Ur]).T
    for t in order:
        hp[t] = h
        zr = 0.5 * (1.0 + np.tanh(0.5 * (xzr[:, t] + h @ UzrT)))
        z, r = zr[:, :H], zr[:, H:]
        c = np.tanh(xh[:, t] + (r * h) @ Uh.T)
        zs[t], rs[t], cs[t] = z, r, c
        mt = m[:, t]
        h = mt * ((1.0 - z) * h + z * c) + (1.0 - mt) * h
        out[:, t] = mt * h

    def fn(g):
        dxz, dxr, dxh = np.zeros((B, T, H)), np.zeros((B, T, H)), np.zeros((B, T, H))
        dUz, dUr, dUh = np.zeros_like(Uz), np.zeros_like(Ur), np.zeros_like(Uh)
        dh = np.zeros((B, H))
        Uzr = UzrT.T
        for t in reversed(order):
            mt = m[:, t]
            gt = dh + mt * g[:, t]
            gm = gt * mt
            h0, z, r, c = hp[t], zs[t], rs[t], cs[t]
            da_h = gm * z * (1.0 - c * c)
            drh = da_h @ Uh
            da_r = drh * h0 * r * (1.0 - r)
            da_z = gm * (c - h0) * z * (1.0 - z)
            dUh += da_h.T @ (r * h0)
            dUr += da_r.T @ h0
            dUz += da_z.T @ h0
            dh = gt * (1.0 - mt) + gm * (1.0 - z) + drh * r + np.concatenate([da_z, da_r], axis=-1) @ Uzr
            dxz[:, t], dxr[:, t], dxh[:, t] = da_z, da_r, da_h
        dx = dxz @ Wz + dxr @ Wr + dxh @ Wh
        flat = x.reshape(-1, x.shape[-1])
        dW = [d.reshape(-1, H).T @ flat for d in (dxz, dxr, dxh)]
        db = [d.sum(axis=(0, 1)) for d in (dxz, dxr, dxh)]
        return (dx, dW[0], dW[1], dW[2], dUz, dUr, dUh, db[0], db[1], db[2])

    parents = (seq, cell.W_z, cell.W_r, cell.W_h, cell.U_z, cell.U_r, cell.U_h, cell.b_z, cell.b_r, cell.b_h)
    return _record(out, parents, fn)


def bigru_forward(params: BiGruParams, seq, mask=None, fused: bool = True) -> Tensor:
    """Run both GRU directions and concatenate per-step outputs ``[fwd_t, bwd_t]``.

    Each direction starts from a zero state and only consumes unmasked steps;
    masked steps produce zero vectors. ``fused=False`` builds the graph from
    per-step cell operations instead of the fused scan.
    """
    seq = as_tensor(seq)
    unbatched = seq.ndim == 2
    if unbatched:
        seq = reshape(seq, (1,) + seq.shape)
    if seq.ndim != 3 or seq.shape[1] == 0:
        raise ShapeError(f"bigru expects a nonempty [batch, time, features] sequence, got {seq.shape}")
    if seq.shape[2] != params.forward_cell.input_dim:
        raise ShapeError(f"bigru input dim {params.forward_cell.input_dim}, got features {seq.shape[2]}")
    mask = np.ones(seq.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(seq.shape[:2])
    _check_mask(mask)

    if fused:
        fwd = gru_scan(params.forward_cell, seq, mask, reverse=False)
        bwd = gru_scan(params.backward_cell, seq, mask, reverse=True)
        out = concat([fwd, bwd], axis=-1)
    else:
        fwd = _run_direction(params.forward_cell, seq, mask, reverse=False)
        bwd = _run_direction(params.backward_cell, seq, mask, reverse=True)
        out = stack([concat([f, b], axis=-1) for f, b in zip(fwd, bwd)], axis=1)
    if unbatched:
        out = reshape(out, out.shape[1:])
    return out


def attention_weights(attn: AttentionParams, H, mask=None) -> Tensor:
    H = as_tensor(H)
    if H.shape[-1] != attn.score_vector.shape[0]:
        raise ShapeError(f"attention score vector {attn.score_vector.shape} does not match outputs {H.shape}")
    scores = matmul(H, attn.score_vector)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).reshape(scores.shape)
        if not mask.any(axis=-1).all():
            raise ValueError("attention over a sequence with every position masked")
    return softmax(scores, axis=-1, mask=mask)


def attention_pool(attn: AttentionParams, H, mask=None) -> Tensor:
    """Softmax-weighted average of ``H`` over time, scored by ``score_vector . H_i``."""
    H = as_tensor(H)
    a = attention_weights(attn, H, mask)
    return (reshape(a, a.shape + (1,)) * H).sum(axis=-2)


def linear(l: LinearParams, x) -> Tensor:
    x = as_tensor(x)
    if x.shape[-1] != l.weight.shape[1]:
        raise ShapeError(f"linear expects input width {l.weight.shape[1]}, got {x.shape}")
    return matmul(x, l.weight.T) + l.bias
