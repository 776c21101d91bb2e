"""Layer graphs for the reconstruction and fusion nets and a small executor.

A :class:`Graph` is a topologically ordered list of :class:`LayerSpec`
nodes. Nodes that name the same ``param`` share one set of tensors, which is
how the reconstruction net is reused across shear branches.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..shear import shear_tensor, shear_tensor_adjoint
from . import layers as L

KINDS = ("input", "conv2d", "deconv2d", "prefilter1d", "shear", "concat", "subtract", "leaky_relu", "norm")
TABLE_KINDS = ("conv2d", "deconv2d", "prefilter1d")
PREFILTER_LENGTHS = (5, 11, 21)


class NonFiniteActivation(FloatingPointError):
    """A layer produced NaN or infinite values."""


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    kernel: Tuple[int, int] = (1, 1)    # (spatial, angular)
    stride: Tuple[int, int] = (1, 1)    # (spatial, angular)
    channels: Tuple[int, int] = (0, 0)  # (in, out)
    inputs: Tuple[str, ...] = ()
    alpha: float = 0.0                  # shear amount for kind == "shear"
    param: Optional[str] = None         # parameter key; defaults to the name

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    @property
    def key(self) -> str:
        return self.param or self.name


@dataclass
class Graph:
    nodes: List[LayerSpec]
    output: str
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for n in self.nodes:
            for i in n.inputs:
                if i not in seen:
                    raise ValueError(f"{n.name}: input {i!r} is not defined earlier")
            if n.name in seen:
                raise ValueError(f"duplicate layer name {n.name!r}")
            seen.add(n.name)
        if self.output not in seen:
            raise ValueError(f"output {self.output!r} not in graph")
        self._by_name = {n.name: n for n in self.nodes}
        self._check_channels()

    def __getitem__(self, name) -> LayerSpec:
        return self._by_name[name]

    def _check_channels(self):
        ch: Dict[str, int] = {}
        for n in self.nodes:
            if n.kind == "input":
                ch[n.name] = n.channels[1]
                continue
            got = [ch[i] for i in n.inputs]
            if n.kind == "concat":
                c_in = sum(got)
            else:
                if len(set(got)) != 1:
                    raise ValueError(f"{n.name}: mismatched input channels {got}")
                c_in = got[0]
            if n.kind in TABLE_KINDS:
                if c_in != n.channels[0]:
                    raise ValueError(f"{n.name}: expects {n.channels[0]} input channels, wiring gives {c_in}")
                ch[n.name] = n.channels[1]
            else:
                ch[n.name] = c_in
        self.out_channels = ch

    def table_rows(self, prefix: str = "") -> List[Tuple[str, Tuple[int, int], Tuple[int, int], str, str]]:
        """Rows ``(layer, kernel, stride, "in/out", input expression)`` in table form."""
        rows = []
        for n in self.nodes:
            if n.kind in TABLE_KINDS and n.name.startswith(prefix):
                rows.append((n.name[len(prefix):], tuple(n.kernel), tuple(n.stride),
                             f"{n.channels[0]}/{n.channels[1]}",
                             "; ".join(self._describe(i, prefix) for i in n.inputs)))
        return rows

    def _describe(self, name, prefix):
        n = self[name]
        if n.kind in ("leaky_relu", "norm"):
            return self._describe(n.inputs[0], prefix)
        if n.kind == "subtract":
            return "⊖".join(self._describe(i, prefix) for i in n.inputs)
        if n.kind == "concat":
            return "; ".join(self._describe(i, prefix) for i in n.inputs)
        return n.name[len(prefix):] if n.name.startswith(prefix) else n.name


def _scaled(c, width_scale):
    return max(1, int(round(c * width_scale)))


def _conv_block(nodes, name, kind, k, s, ch, inputs, act=True, param_prefix="", norm=False):
    nodes.append(LayerSpec(name, kind, k, s, ch, tuple(inputs), param=param_prefix + name.split("/")[-1]))
    last = name
    if norm:
        nodes.append(LayerSpec(name + ".norm", "norm", inputs=(last,),
                               param=param_prefix + name.split("/")[-1] + ".norm"))
        last = name + ".norm"
    if act:
        nodes.append(LayerSpec(name + ".act", "leaky_relu", inputs=(last,)))
        last = name + ".act"
    return last


def _recon_nodes(nodes, src, alpha_s, width_scale, prefix="", param_prefix=""):
    c10, c27 = _scaled(10, width_scale), _scaled(27, width_scale)
    c20, c81 = 2 * c10, 3 * c27
    p = prefix
    blk = lambda *a, **k: _conv_block(nodes, *a, param_prefix=param_prefix, **k)  # noqa: E731
    c11 = blk(p + "conv1_1", "conv2d", (5, 5), (4, 1), (1, c10), [src])
    c12 = blk(p + "conv1_2", "conv2d", (5, 5), (2, 1), (1, c10), [src])
    c13 = blk(p + "conv1_3", "conv2d", (5, 5), (1, 1), (1, c10), [src])
    d21 = blk(p + "deconv2_1", "deconv2d", (3, 3), (2, 1), (c10, c10), [c11])
    d22 = blk(p + "deconv2_2", "deconv2d", (5, 5), (2, 1), (c10, c10), [c12])
    nodes.append(LayerSpec(p + "res2", "subtract", inputs=(c12, d21)))
    nodes.append(LayerSpec(p + "res3", "subtract", inputs=(c13, d22)))
    f1 = blk(p + "conv2_1", "prefilter1d", (PREFILTER_LENGTHS[0], 1), (1, 1), (c10, c20), [c11], act=False)
    f2 = blk(p + "conv2_2", "prefilter1d", (PREFILTER_LENGTHS[1], 1), (1, 1), (c10, c20), [p + "res2"], act=False)
    f3 = blk(p + "conv2_3", "prefilter1d", (PREFILTER_LENGTHS[2], 1), (1, 1), (c10, c20), [p + "res3"], act=False)
    c31 = blk(p + "conv3_1", "conv2d", (3, 3), (1, 1), (c20, c27), [f1])
    c32 = blk(p + "conv3_2", "conv2d", (3, 3), (1, 1), (c20, c27), [f2])
    c33 = blk(p + "conv3_3", "conv2d", (3, 3), (1, 1), (c20, c27), [f3])
    d41 = blk(p + "deconv4_1", "deconv2d", (5, 5), (4, 1), (c27, c27), [c31])
    d42 = blk(p + "deconv4_2", "deconv2d", (5, 5), (2, 1), (c27, c27), [c32])
    nodes.append(LayerSpec(p + "cat4", "concat", inputs=(d41, d42, c33)))
    c4 = blk(p + "conv4", "conv2d", (3, 3), (1, 1), (c81, c81), [p + "cat4"], norm=True)
    return blk(p + "deconv5", "deconv2d", (9, 9), (1, alpha_s), (c81, c27), [c4], act=False)


def _fusion_nodes(nodes, src, num_shears, width_scale, prefix="", param_prefix=""):
    c27, c54 = _scaled(27, width_scale), _scaled(54, width_scale)
    p = prefix
    blk = lambda *a, **k: _conv_block(nodes, *a, param_prefix=param_prefix, **k)  # noqa: E731
    c11 = blk(p + "conv1_1", "conv2d", (1, 1), (1, 1), (c27 * num_shears, c27), [src])
    c12 = blk(p + "conv1_2", "conv2d", (3, 3), (2, 1), (c27, c54), [c11])
    c21 = blk(p + "conv2_1", "conv2d", (3, 3), (1, 1), (c54, c54), [c12])
    c22 = blk(p + "conv2_2", "conv2d", (3, 3), (2, 1), (c54, c54), [c21])
    c31 = blk(p + "conv3_1", "conv2d", (3, 3), (1, 1), (c54, c54), [c22])
    c4 = blk(p + "conv4", "conv2d", (3, 3), (1, 1), (c54, c54), [c31])
    d51 = blk(p + "deconv5_1", "deconv2d", (5, 5), (2, 1), (c54, c54), [c4])
    nodes.append(LayerSpec(p + "cat5", "concat", inputs=(d51, c21)))
    c52 = blk(p + "conv5_2", "conv2d", (1, 1), (1, 1), (2 * c54, c54), [p + "cat5"])
    d61 = blk(p + "deconv6_1", "deconv2d", (5, 5), (2, 1), (c54, c27), [c52])
    nodes.append(LayerSpec(p + "cat6", "concat", inputs=(d61, c11)))
    c62 = blk(p + "conv6_2", "conv2d", (1, 1), (1, 1), (2 * c27, c27), [p + "cat6"])
    return blk(p + "conv7", "conv2d", (9, 9), (1, 1), (c27, 1), [c62], act=False)


def build_reconstruction_net(alpha_s: int, width_scale: float = 1.0) -> Graph:
    if int(alpha_s) != alpha_s or alpha_s < 1:
        raise ValueError(f"alpha_s must be a positive integer, got {alpha_s}")
    nodes = [LayerSpec("input", "input", channels=(0, 1))]
    out = _recon_nodes(nodes, "input", int(alpha_s), width_scale)
    return Graph(nodes, out, {"alpha_s": int(alpha_s), "width_scale": width_scale})


def build_fusion_net(num_shears: int, width_scale: float = 1.0) -> Graph:
    if num_shears < 1:
        raise ValueError("num_shears must be >= 1")
    c27 = _scaled(27, width_scale)
    nodes = [LayerSpec("input", "input", channels=(0, c27 * num_shears))]
    out = _fusion_nodes(nodes, "input", num_shears, width_scale)
    return Graph(nodes, out, {"num_shears": num_shears, "width_scale": width_scale})


def build_da2n(alpha_s: int, shears: Sequence[float], width_scale: float = 1.0) -> Graph:
    """Full network: per-shear branches sharing one reconstruction net, then fusion."""
    shears = [float(a) for a in shears]
    if not shears:
        raise ValueError("at least one shear is required")
    nodes = [LayerSpec("input", "input", channels=(0, 1))]
    branch_out = []
    for i, a in enumerate(shears):
        nodes.append(LayerSpec(f"shear[{i}]", "shear", inputs=("input",), alpha=a))
        feat = _recon_nodes(nodes, f"shear[{i}]", alpha_s, width_scale, prefix=f"recon[{i}]/",
                            param_prefix="recon/")
        nodes.append(LayerSpec(f"unshear[{i}]", "shear", inputs=(feat,), alpha=-a / alpha_s))
        branch_out.append(f"unshear[{i}]")
    nodes.append(LayerSpec("concat", "concat", inputs=tuple(branch_out)))
    out = _fusion_nodes(nodes, "concat", len(shears), width_scale, prefix="fusion/", param_prefix="fusion/")
    return Graph(nodes, out, {"alpha_s": int(alpha_s), "shears": shears, "width_scale": width_scale})


# ---------------------------------------------------------------------------
# execution


def _axes(t):
    # (spatial, angular) -> (S, U) array order
    return (int(t[1]), int(t[0]))


def _deconv_size(n: LayerSpec, shape):
    s_s, s_u = _axes(n.stride)
    S, U = shape[2], shape[3]
    # spatial deconvolutions multiply the width; angular ones insert views between existing ones
    return (S if s_s == 1 else s_s * (S - 1) + 1, U * s_u)


def param_shapes(g: Graph) -> Dict[str, Dict[str, tuple]]:
    out: Dict[str, Dict[str, tuple]] = {}
    for n in g.nodes:
        kS, kU = _axes(n.kernel)
        ci, co = n.channels
        if n.kind == "conv2d":
            shapes = {"w": (co, ci, kS, kU), "b": (co,)}
        elif n.kind == "deconv2d":
            shapes = {"w": (ci, co, kS, kU), "b": (co,)}
        elif n.kind == "prefilter1d":
            shapes = {"w": (ci, co // ci, n.kernel[0])}
        elif n.kind == "norm":
            c = g.out_channels[n.inputs[0]]
            shapes = {"gamma": (c,), "beta": (c,)}
        else:
            continue
        if n.key in out and out[n.key] != shapes:
            raise ValueError(f"shared parameter {n.key!r} used with different shapes")
        out[n.key] = shapes
    return out


def _check_finite(name, y):
    if not np.all(np.isfinite(y)):
        raise NonFiniteActivation(f"non-finite activation in layer {name}")


def run_forward(g: Graph, params, state, x, training: bool = False):
    """Evaluate ``g`` on ``x``; returns ``(output, tape)`` for :func:`run_backward`."""
    vals = {}
    tape = {}
    for n in g.nodes:
        if n.kind == "input":
            vals[n.name] = x
            continue
        ins = [vals[i] for i in n.inputs]
        p = params.get(n.key)
        if n.kind == "conv2d":
            y, tape[n.name] = L.conv_forward(ins[0], p["w"], p["b"], _axes(n.stride))
        elif n.kind == "deconv2d":
            y, tape[n.name] = L.deconv_forward(ins[0], p["w"], p["b"], _axes(n.stride),
                                               _deconv_size(n, ins[0].shape))
        elif n.kind == "prefilter1d":
            y, tape[n.name] = L.prefilter_forward(ins[0], p["w"])
        elif n.kind == "shear":
            y = shear_tensor(ins[0], n.alpha)
        elif n.kind == "concat":
            y = np.concatenate(ins, axis=1)
        elif n.kind == "subtract":
            y = ins[0] - ins[1]
        elif n.kind == "leaky_relu":
            y = L.leaky_forward(ins[0])
            tape[n.name] = ins[0]
        elif n.kind == "norm":
            y, tape[n.name] = L.norm_forward(ins[0], p["gamma"], p["beta"], state[n.key], training)
        _check_finite(n.name, y)
        vals[n.name] = y
    return vals[g.output], (tape, {k: v.shape for k, v in vals.items()})


def run_backward(g: Graph, params, tape, dout):
    """Gradients of ``sum(output * dout)`` w.r.t. parameters and the graph input."""
    caches, shapes = tape
    grads = {k: {name: np.zeros_like(t) for name, t in v.items()} for k, v in params.items()}
    gvals = {g.output: dout}

    def acc(name, gval):
        if name in gvals:
            gvals[name] = gvals[name] + gval
        else:
            gvals[name] = gval

    for n in reversed(g.nodes):
        if n.kind == "input" or n.name not in gvals:
            continue
        dy = gvals.pop(n.name) if n.kind != "input" else None
        p = params.get(n.key)
        if n.kind == "conv2d":
            dx, dw, db = L.conv_backward(dy, p["w"], caches[n.name])
            grads[n.key]["w"] += dw
            grads[n.key]["b"] += db
            acc(n.inputs[0], dx)
        elif n.kind == "deconv2d":
            dx, dw, db = L.deconv_backward(dy, p["w"], caches[n.name])
            grads[n.key]["w"] += dw
            grads[n.key]["b"] += db
            acc(n.inputs[0], dx)
        elif n.kind == "prefilter1d":
            dx, dw = L.prefilter_backward(dy, p["w"], caches[n.name])
            grads[n.key]["w"] += dw
            acc(n.inputs[0], dx)
        elif n.kind == "shear":
            acc(n.inputs[0], shear_tensor_adjoint(dy, n.alpha))
        elif n.kind == "concat":
            start = 0
            for i in n.inputs:
                c = shapes[i][1]
                acc(i, dy[:, start:start + c])
                start += c
        elif n.kind == "subtract":
            acc(n.inputs[0], dy)
            acc(n.inputs[1], -dy)
        elif n.kind == "leaky_relu":
            acc(n.inputs[0], L.leaky_backward(dy, caches[n.name]))
        elif n.kind == "norm":
            dx, dgam, dbet = L.norm_backward(dy, p["gamma"], caches[n.name])
            grads[n.key]["gamma"] += dgam
            grads[n.key]["beta"] += dbet
            acc(n.inputs[0], dx)
    src = next(n.name for n in g.nodes if n.kind == "input")
    dinput = gvals.get(src)
    return grads, (dinput if dinput is not None else np.zeros(shapes[src]))
