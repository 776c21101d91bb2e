"""Shared test fixtures: published layer tables, a toy graph with every layer kind, gradient checks."""
import numpy as np

from lfaa.danet import LayerSpec
from lfaa.danet.graph import Graph, run_backward, run_forward
from lfaa.danet.model import init_params
from lfaa.pyramid import filter_spatial

# (name, kernel, stride, channels, input) in the published layout
RECON_TABLE = [
    ("conv1_1", (5, 5), (4, 1), "1/10", "input"),
    ("conv1_2", (5, 5), (2, 1), "1/10", "input"),
    ("conv1_3", (5, 5), (1, 1), "1/10", "input"),
    ("deconv2_1", (3, 3), (2, 1), "10/10", "conv1_1"),
    ("deconv2_2", (5, 5), (2, 1), "10/10", "conv1_2"),
    ("conv2_1", (5, 1), (1, 1), "10/20", "conv1_1"),
    ("conv2_2", (11, 1), (1, 1), "10/20", "conv1_2⊖deconv2_1"),
    ("conv2_3", (21, 1), (1, 1), "10/20", "conv1_3⊖deconv2_2"),
    ("conv3_1", (3, 3), (1, 1), "20/27", "conv2_1"),
    ("conv3_2", (3, 3), (1, 1), "20/27", "conv2_2"),
    ("conv3_3", (3, 3), (1, 1), "20/27", "conv2_3"),
    ("deconv4_1", (5, 5), (4, 1), "27/27", "conv3_1"),
    ("deconv4_2", (5, 5), (2, 1), "27/27", "conv3_2"),
    ("conv4", (3, 3), (1, 1), "81/81", "deconv4_1; deconv4_2; conv3_3"),
    ("deconv5", (9, 9), (1, 3), "81/27", "conv4"),
]

FUSION_TABLE = [
    ("conv1_1", (1, 1), (1, 1), "189/27", "input"),
    ("conv1_2", (3, 3), (2, 1), "27/54", "conv1_1"),
    ("conv2_1", (3, 3), (1, 1), "54/54", "conv1_2"),
    ("conv2_2", (3, 3), (2, 1), "54/54", "conv2_1"),
    ("conv3_1", (3, 3), (1, 1), "54/54", "conv2_2"),
    ("conv4", (3, 3), (1, 1), "54/54", "conv3_1"),
    ("deconv5_1", (5, 5), (2, 1), "54/54", "conv4"),
    ("conv5_2", (1, 1), (1, 1), "108/54", "deconv5_1; conv2_1"),
    ("deconv6_1", (5, 5), (2, 1), "54/27", "conv5_2"),
    ("conv6_2", (1, 1), (1, 1), "54/27", "deconv6_1; conv1_1"),
    ("conv7", (9, 9), (1, 1), "27/1", "conv6_2"),
]


def toy_graph():
    L = LayerSpec
    nodes = [L("x", "input", channels=(0, 1)),
             L("sh", "shear", inputs=("x",), alpha=1.5),
             L("c1", "conv2d", (3, 3), (2, 1), (1, 3), ("sh",)),
             L("a1", "leaky_relu", inputs=("c1",)),
             L("pf", "prefilter1d", (5, 1), (1, 1), (3, 6), ("a1",)),
             L("n1", "norm", inputs=("pf",)),
             L("a2", "leaky_relu", inputs=("n1",)),
             L("dc", "deconv2d", (3, 3), (2, 3), (6, 2), ("a2",)),
             L("c2", "conv2d", (3, 3), (1, 1), (2, 2), ("dc",)),
             L("sub", "subtract", inputs=("dc", "c2")),
             L("cat", "concat", inputs=("sub", "dc")),
             L("out", "conv2d", (1, 1), (1, 1), (4, 1), ("cat",))]
    return Graph(nodes, "out")


def relative_error(a, b):
    a = np.ravel(a)
    b = np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-30)


def gradient_errors(g, x, seed=0, step=1e-5):
    params = init_params(g, seed=seed, scheme="he", dtype=np.float64)
    rng = np.random.default_rng(seed)
    for d in params.tensors.values():
        for n, t in d.items():
            if n in ("b", "beta"):
                t[...] = rng.normal(0, 0.1, t.shape)
            elif n == "gamma":
                t[...] = rng.uniform(0.5, 1.5, t.shape)
    out, _ = run_forward(g, params.tensors, params.state, x, True)
    R = rng.standard_normal(out.shape)

    def f():
        return float(np.sum(run_forward(g, params.tensors, params.state, x, True)[0] * R))

    _, tape = run_forward(g, params.tensors, params.state, x, True)
    grads, dx = run_backward(g, params.tensors, tape, R)

    def numeric(t):
        num = np.empty(t.size)
        for i in range(t.size):
            old = t.flat[i]
            t.flat[i] = old + step
            fp = f()
            t.flat[i] = old - step
            fm = f()
            t.flat[i] = old
            num[i] = (fp - fm) / (2 * step)
        return num

    kinds = {n.key: n.kind for n in g.nodes}
    errs = {}
    for key, d in params.tensors.items():
        for n, t in d.items():
            e = relative_error(grads[key][n], numeric(t))
            errs[kinds[key]] = max(errs.get(kinds[key], 0.0), e)
    errs["input"] = relative_error(dx, numeric(x))
    return errs


def single_layer_graph(kind):
    L = LayerSpec
    x = L("x", "input", channels=(0, 2))
    if kind == "shear":
        nodes = [x, L("y", "shear", inputs=("x",), alpha=0.7), L("o", "conv2d", (1, 1), (1, 1), (2, 1), ("y",))]
    elif kind == "leaky_relu":
        nodes = [x, L("y", "leaky_relu", inputs=("x",)), L("o", "conv2d", (1, 1), (1, 1), (2, 1), ("y",))]
    elif kind == "norm":
        nodes = [x, L("y", "norm", inputs=("x",)), L("o", "conv2d", (1, 1), (1, 1), (2, 1), ("y",))]
    elif kind == "prefilter1d":
        nodes = [x, L("o", "prefilter1d", (5, 1), (1, 1), (2, 4), ("x",))]
    elif kind == "deconv2d":
        nodes = [x, L("o", "deconv2d", (5, 3), (2, 3), (2, 3), ("x",))]
    else:
        nodes = [x, L("o", "conv2d", (5, 3), (4, 1), (2, 3), ("x",))]
    return Graph(nodes, "o")


def unit_sinusoid_gain(taps, omega, n=4096):
    # measure the gain on a long cosine, away from the edge-replicated borders
    u = np.arange(n, dtype=float)
    y = filter_spatial(np.cos(omega * u)[None], taps)[0]
    h = len(taps)
    inner = slice(h, n - h)
    basis = np.stack([np.cos(omega * u[inner]), np.sin(omega * u[inner])], axis=1)
    coef, *_ = np.linalg.lstsq(basis, y[inner], rcond=None)
    return float(np.hypot(*coef))


# acceptance results, printed by the terminal summary hook in conftest
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
