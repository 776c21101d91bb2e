"""On-disk light field container.

A container is a directory holding ``manifest.json`` and one image per view.
Views are listed row-major, file ``k`` holding view ``(t, s) = divmod(k, views_s)``.
``bit_depth`` selects the image type: 8 or 16 for single-channel PNG (values
scaled to [0, 1]), 32 for PFM (float, little endian, rows stored bottom-up as
the format requires). ``disparity_min``/``disparity_max`` are optional.
"""
from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np
from PIL import Image

from .lightfield import DisparityRange, LightField4D

MANIFEST = "manifest.json"
FORMATS = ("png8", "png16", "pfm")
BIT_DEPTH = {"png8": 8, "png16": 16, "pfm": 32}
FORMAT_OF_DEPTH = {v: k for k, v in BIT_DEPTH.items()}


class ContainerError(ValueError):
    """Malformed or inconsistent light field container."""


def write_pfm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype="<f4")
    if img.ndim != 2:
        raise ValueError("PFM writer expects a single-channel image")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        fh.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header != b"Pf":
            raise ContainerError(f"{path}: only single-channel PFM is supported")
        dims = fh.readline().split()
        scale = float(fh.readline().strip())
        w, h = int(dims[0]), int(dims[1])
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != w * h:
        raise ContainerError(f"{path}: expected {w * h} samples, found {data.size}")
    return data.reshape(h, w)[::-1].astype(np.float64)


def _write_png(path, img, bits):
    peak = (1 << bits) - 1
    q = np.rint(np.clip(img, 0.0, 1.0) * peak)
    arr = q.astype(np.uint8 if bits == 8 else np.uint16)
    Image.fromarray(arr).save(path)


def _read_png(path):
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim != 2:
        raise ContainerError(f"{path}: expected a single-channel image")
    peak = 255.0 if arr.dtype == np.uint8 else 65535.0
    return arr.astype(np.float64) / peak


def _name(k, fmt):
    return f"view_{k:04d}." + ("pfm" if fmt == "pfm" else "png")


def write_container(lf: LightField4D, path, fmt: str = "pfm", extra: Optional[dict] = None) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    os.makedirs(path, exist_ok=True)
    files = []
    for t in range(lf.views_t):
        for s in range(lf.views_s):
            name = _name(t * lf.views_s + s, fmt)
            img = lf.samples[t, s]
            if fmt == "pfm":
                write_pfm(os.path.join(path, name), img)
            else:
                _write_png(os.path.join(path, name), img, 8 if fmt == "png8" else 16)
            files.append(name)
    manifest = {
        "views_s": lf.views_s,
        "views_t": lf.views_t,
        "height": lf.height,
        "width": lf.width,
        "bit_depth": BIT_DEPTH[fmt],
        "files": files,
    }
    if lf.disparity_hint is not None:
        manifest["disparity_min"] = lf.disparity_hint.d_min
        manifest["disparity_max"] = lf.disparity_hint.d_max
    if extra:
        manifest["extra"] = extra
    with open(os.path.join(path, MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    mpath = os.path.join(path, MANIFEST)
    if not os.path.isfile(mpath):
        raise ContainerError(f"no {MANIFEST} in {path}")
    with open(mpath) as fh:
        try:
            m = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ContainerError(f"{mpath}: {exc}") from exc
    for key in ("views_s", "views_t", "height", "width", "bit_depth", "files"):
        if key not in m:
            raise ContainerError(f"{mpath}: missing field {key!r}")
    if m["bit_depth"] not in FORMAT_OF_DEPTH:
        raise ContainerError(f"{mpath}: bit_depth must be 8, 16 (PNG) or 32 (PFM), got {m['bit_depth']!r}")
    if ("disparity_min" in m) != ("disparity_max" in m):
        raise ContainerError(f"{mpath}: give both disparity_min and disparity_max or neither")
    if len(m["files"]) != m["views_s"] * m["views_t"]:
        raise ContainerError(f"{mpath}: {len(m['files'])} files for {m['views_t']}x{m['views_s']} views")
    return m


def read_container(path) -> LightField4D:
    m = read_manifest(path)
    T, S, V, U = m["views_t"], m["views_s"], m["height"], m["width"]
    out = np.empty((T, S, V, U))
    for k, name in enumerate(m["files"]):
        fpath = os.path.join(path, name)
        if not os.path.isfile(fpath):
            raise ContainerError(f"missing view file {fpath}")
        img = read_pfm(fpath) if m["bit_depth"] == 32 else _read_png(fpath)
        if img.shape != (V, U):
            raise ContainerError(f"{fpath}: shape {img.shape}, manifest says {(V, U)}")
        t, s = divmod(k, S)
        out[t, s] = img
    hint = DisparityRange(m["disparity_min"], m["disparity_max"]) if "disparity_min" in m else None
    return LightField4D(out, hint)


PATCH_INDEX = "patches.json"


def save_training_set(ds, path, fmt: str = "pfm") -> None:
    """Store a patch set as two containers, ``inputs`` and ``labels``, plus a patch index.

    A stack of ``N`` EPIs of shape ``(S, U)`` is laid out as a light field
    with ``S`` views of ``N x U`` images, so row ``n`` of view ``s`` is row
    ``s`` of patch ``n``.
    """
    if len(ds) == 0:
        raise ValueError("cannot store an empty patch set")
    os.makedirs(path, exist_ok=True)
    for name, arr in (("inputs", ds.inputs), ("labels", ds.labels)):
        lf = LightField4D(np.transpose(np.asarray(arr), (1, 0, 2))[None])
        write_container(lf, os.path.join(path, name), fmt)
    index = {
        "count": int(len(ds)),
        "disparity": [float(d) for d in ds.disparities],
        "nonlambertian": [bool(b) for b in ds.nonlambertian],
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(ds.config).items()},
    }
    with open(os.path.join(path, PATCH_INDEX), "w") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_training_set(path):
    from .synth import TrainingSet, TrainingSetConfig

    ipath = os.path.join(path, PATCH_INDEX)
    if not os.path.isfile(ipath):
        raise ContainerError(f"no {PATCH_INDEX} in {path}")
    with open(ipath) as fh:
        index = json.load(fh)
    inputs = np.transpose(read_container(os.path.join(path, "inputs")).samples[0], (1, 0, 2))
    labels = np.transpose(read_container(os.path.join(path, "labels")).samples[0], (1, 0, 2))
    if inputs.shape[0] != index["count"] or labels.shape[0] != index["count"]:
        raise ContainerError(f"{path}: patch count disagrees with {PATCH_INDEX}")
    cfg = TrainingSetConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in index["config"].items()})
    return TrainingSet(inputs, labels, np.asarray(index["disparity"], dtype=np.float64),
                       np.asarray(index["nonlambertian"], dtype=bool), cfg)
