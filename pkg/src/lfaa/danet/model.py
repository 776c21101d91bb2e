"""DA2N parameters, initialization, inference and the L1 objective."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from ..lightfield import Epi, upsampled_count
from ..spectral import gaussian_kernel
from .graph import Graph, build_da2n, param_shapes, run_backward, run_forward

INIT_STD = 1e-3
DEFAULT_SHEARS = (-9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0)


def init_prefilter_layer(sigma_max: float, channels: int, length: int) -> np.ndarray:
    """Gaussian taps with widths spread evenly over ``[0, sigma_max]``, one row per channel."""
    if channels < 1:
        raise ValueError("channels must be >= 1")
    if length < 1 or length % 2 == 0:
        raise ValueError("length must be a positive odd integer")
    if channels == 1:
        sig = np.zeros(1)
    else:
        sig = sigma_max * np.arange(channels) / (channels - 1)
    return np.stack([gaussian_kernel(s, length // 2) for s in sig])


def prefilter_sigma_max(length: int) -> float:
    # six standard deviations inside the kernel keep truncation ripple out of the response,
    # so every initial bank is a monotone low-pass
    return (length - 1) / 12.0


@dataclass
class NetworkParams:
    """Trainable tensors keyed by layer, plus running normalization statistics."""

    graph: Graph
    tensors: Dict[str, Dict[str, np.ndarray]]
    state: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def alpha_s(self) -> int:
        return int(self.graph.meta["alpha_s"])

    @property
    def shears(self):
        return tuple(self.graph.meta["shears"])

    @property
    def width_scale(self) -> float:
        return float(self.graph.meta["width_scale"])

    def theta_r(self):
        return {k: v for k, v in self.tensors.items() if k.startswith("recon/")}

    def theta_f(self):
        return {k: v for k, v in self.tensors.items() if k.startswith("fusion/")}

    def flat(self):
        """``(name, array)`` pairs in declaration order."""
        return [(f"{k}.{n}", t) for k, d in self.tensors.items() for n, t in d.items()]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.graph, {k: {n: t.copy() for n, t in d.items()} for k, d in self.tensors.items()},
                             {k: {n: t.copy() for n, t in d.items()} for k, d in self.state.items()})


def init_params(graph: Graph, seed: int = 0, std: float = INIT_STD, scheme: str = "fixed",
                dtype=np.float64) -> NetworkParams:
    """Gaussian weights, zero biases, Gaussian prefilter banks, unit normalization.

    ``scheme="fixed"`` draws every weight with standard deviation ``std``;
    ``scheme="he"`` scales it by ``sqrt(2 / fan_in)`` instead, which trains
    faster at small widths.
    """
    if scheme not in ("fixed", "he"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    tensors: Dict[str, Dict[str, np.ndarray]] = {}
    state: Dict[str, Dict[str, np.ndarray]] = {}
    for key, shapes in param_shapes(graph).items():
        node = next(n for n in graph.nodes if n.key == key)
        d = {}
        if node.kind == "prefilter1d":
            ci, m, length = shapes["w"]
            bank = init_prefilter_layer(prefilter_sigma_max(length), ci * m, length)
            d["w"] = bank.reshape(ci, m, length).astype(dtype)
        elif node.kind == "norm":
            c = shapes["gamma"][0]
            d["gamma"] = np.ones(c, dtype=dtype)
            d["beta"] = np.zeros(c, dtype=dtype)
            state[key] = {"mean": np.zeros(c, dtype=dtype), "var": np.ones(c, dtype=dtype)}
        else:
            w_shape = shapes["w"]
            if node.kind == "conv2d":
                fan_in = w_shape[1] * w_shape[2] * w_shape[3]
            else:
                # each output of a strided deconvolution sees about in * k / stride taps
                fan_in = w_shape[0] * w_shape[2] * w_shape[3] / (node.stride[0] * node.stride[1])
            scale = std if scheme == "fixed" else np.sqrt(2.0 / fan_in)
            d["w"] = (rng.standard_normal(w_shape) * scale).astype(dtype)
            d["b"] = np.zeros(shapes["b"], dtype=dtype)
        tensors[key] = d
    return NetworkParams(graph, tensors, state)


def build_network(alpha_s: int = 3, shears: Sequence[float] = DEFAULT_SHEARS, width_scale: float = 1.0,
                  seed: int = 0, scheme: str = "fixed", dtype=np.float64) -> NetworkParams:
    return init_params(build_da2n(alpha_s, shears, width_scale), seed=seed, scheme=scheme, dtype=dtype)


def _as_batch(x, dtype):
    if isinstance(x, Epi):
        x = x.samples
    x = np.asarray(x, dtype=dtype)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValueError("expected an EPI or an (N, S, U) batch")
    if x.shape[1] < 2:
        raise ValueError("the network needs at least 2 views")
    if x.shape[2] % 4:
        raise ValueError(f"width {x.shape[2]} must be divisible by 4")
    return x[:, None]


def _dtype(params: NetworkParams):
    return next(iter(params.tensors.values()))["w"].dtype if params.tensors else np.float64


def forward_batch(params: NetworkParams, x, training: bool = False):
    """``(N, S, U)`` -> ``(N, S', U)`` plus the tape needed for gradients."""
    xb = _as_batch(x, _dtype(params))
    y, tape = run_forward(params.graph, params.tensors, params.state, xb, training)
    return y[:, 0], tape


def forward(params: NetworkParams, epi, shears=None, alpha_s=None) -> Epi:
    """Reconstruct one EPI with ``alpha_s * S - (alpha_s - 1)`` views.

    ``shears``/``alpha_s`` may be given to assert the configuration the
    parameters were built for.
    """
    if shears is not None and tuple(float(a) for a in shears) != params.shears:
        raise ValueError(f"parameters were built for shears {params.shears}")
    if alpha_s is not None and int(alpha_s) != params.alpha_s:
        raise ValueError(f"parameters were built for alpha_s={params.alpha_s}")
    y, _ = forward_batch(params, epi)
    src = epi if isinstance(epi, Epi) else Epi(np.asarray(epi))
    out = y[0].astype(np.float64)
    if out.shape[0] != upsampled_count(src.angular, params.alpha_s):
        raise ValueError(f"network produced {out.shape[0]} views for {src.angular} inputs")
    return src.with_samples(out)


def loss_l1(pred, label) -> float:
    pred = np.asarray(pred)
    label = np.asarray(label)
    if pred.shape != label.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {label.shape}")
    return float(np.mean(np.abs(pred - label)))


def loss_l1_grad(pred, label) -> np.ndarray:
    return np.sign(pred - label) / pred.size


def backward(params: NetworkParams, batch, training: bool = True):
    """L1 loss and its gradients for a batch ``(inputs, labels)``."""
    inputs, labels = batch
    pred, tape = forward_batch(params, inputs, training)
    labels = np.asarray(labels, dtype=pred.dtype)
    loss = loss_l1(pred, labels)
    dout = loss_l1_grad(pred, labels)[:, None]
    grads, _ = run_backward(params.graph, params.tensors, tape, dout)
    return loss, grads
