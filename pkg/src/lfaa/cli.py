"""Command-line entry point: ``lfaa <verb> [options]``.

Exit codes: 0 on success, 2 for invalid input or configuration, 3 when a
computation produced non-finite values or diverged.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

import numpy as np
from PIL import Image

from . import io as lfio
from .lightfield import Epi, LightField4D, ReconstructionError, reconstruct_4d

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
THREADS_ENV = "LFAA_THREADS"

log = logging.getLogger("lfaa")


class UsageError(ValueError):
    """Bad command-line input detected after parsing."""


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _path(args, p):
    return p if os.path.isabs(p) else os.path.join(args.out_dir, p)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _save_png(path, img):
    lo, hi = float(np.min(img)), float(np.max(img))
    scaled = (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)
    Image.fromarray(np.rint(scaled * 255).astype(np.uint8)).save(path)


def _epi_to_lf(epi: Epi) -> LightField4D:
    return LightField4D(epi.samples[None, :, None, :])


def _pick_epi(lf: LightField4D, v: Optional[int], t: Optional[int]) -> Epi:
    from .lightfield import extract_epi_horizontal

    v = lf.height // 2 if v is None else v
    t = lf.views_t // 2 if t is None else t
    return extract_epi_horizontal(lf, v, t)


def _subsample(lf: LightField4D, alpha_s: int) -> LightField4D:
    for n in (lf.views_s, lf.views_t):
        if n > 1 and (n - 1) % alpha_s:
            raise UsageError(f"{n} views cannot be subsampled by {alpha_s}")
    return LightField4D(lf.samples[::alpha_s, ::alpha_s].copy(), lf.disparity_hint)


# ---------------------------------------------------------------- synth

def _scene_points(spec):
    from .synth import ScenePoint

    try:
        return [ScenePoint(**p) for p in spec["points"]]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad scene point list: {exc}") from exc


def cmd_synth(args) -> int:
    from .presets import fig2_dense
    from .synth import TrainingSetConfig, make_training_set, render_epi
    from .suites import textured_light_field

    if (args.scene is None) == (args.preset is None):
        raise UsageError("give exactly one of --scene or --preset")
    out = _path(args, args.out or (args.preset or "scene"))
    if args.preset == "fig2":
        lf = _epi_to_lf(fig2_dense())
    else:
        spec = _load_json(args.scene)
        kind = spec.get("kind", "epi")
        if kind == "epi":
            epi = render_epi(_scene_points(spec), int(spec["views"]), int(spec["width"]),
                             bool(spec.get("periodic", False)))
            lf = _epi_to_lf(epi)
        elif kind == "plane":
            seed = spec.get("seed", args.seed)
            _, lf = textured_light_field(float(spec["d"]), int(spec.get("sparse_views", 3)),
                                         int(spec.get("alpha_s", 3)), int(spec.get("size", 48)), seed,
                                         float(spec.get("density", 0.06)))
        elif kind == "training_set":
            fields = {k: v for k, v in spec.items() if k != "kind"}
            fields.setdefault("seed", args.seed)
            if "d_range" in fields:
                fields["d_range"] = tuple(fields["d_range"])
            ds = make_training_set(TrainingSetConfig(**fields))
            lfio.save_training_set(ds, out, args.format)
            print(f"wrote {len(ds)} patch pairs to {out}")
            return EXIT_OK
        else:
            raise UsageError(f"unknown scene kind {kind!r}; use epi, plane or training_set")
    lfio.write_container(lf, out, args.format)
    print(f"wrote {lf.views_t}x{lf.views_s} views to {out}")
    if args.sparse_out:
        sparse = _subsample(lf, args.alpha_s)
        lfio.write_container(sparse, _path(args, args.sparse_out), args.format)
        print(f"wrote {sparse.views_t}x{sparse.views_s} sparse views to {_path(args, args.sparse_out)}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze / curve

def _analysis_input(args):
    from .presets import FIG2_STEP, FIG2_SUPPORT, fig2_sparse
    from .spectral import SpectralSupport

    if args.input is None:
        return fig2_sparse(), FIG2_SUPPORT, FIG2_STEP
    if args.step is None or args.d is None:
        raise UsageError("--step and --d are required with --in")
    epi = _pick_epi(lfio.read_container(args.input), args.v, args.t)
    return epi, SpectralSupport(args.d, args.beta_over_z), args.step


def cmd_analyze(args) -> int:
    from .spectral import (analyze_epi, curve_csv, epi_spectrum, log_magnitude, report_csv, sigma_alpha_curve,
                           zero_stuff)

    epi, support, step = _analysis_input(args)
    report = analyze_epi(epi, support, step)
    os.makedirs(args.out_dir, exist_ok=True)
    _save_png(os.path.join(args.out_dir, "spectrum.png"), log_magnitude(epi_spectrum(zero_stuff(epi, step))))
    with open(os.path.join(args.out_dir, "alias_report.csv"), "w") as fh:
        fh.write(report_csv(report))
    with open(os.path.join(args.out_dir, "sigma_alpha.csv"), "w") as fh:
        fh.write(curve_csv(sigma_alpha_curve(report, args.gammas, args.alphas)))
    state = "clean" if report.clean else f"alias at omega_u={report.omega_u_pa:.4f}, amplitude {report.amplitude:.2f}"
    print(f"{state}; overlap_detected={report.overlap_detected}; outputs in {args.out_dir}")
    return EXIT_OK


def cmd_curve(args) -> int:
    from .spectral import analyze_epi, curve_csv, sigma_alpha_curve

    epi, support, step = _analysis_input(args)
    text = curve_csv(sigma_alpha_curve(analyze_epi(epi, support, step), args.gammas, args.alphas))
    if args.out:
        path = _path(args, args.out)
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- reconstruct / infer

def _recon_config(args, alpha_s):
    from .recon import ReconConfig

    kw = dict(alpha_s=alpha_s, gamma=args.gamma, fusion=args.fusion, threads=1)
    if args.shears is not None:
        kw["shears"] = sorted(args.shears)
    return ReconConfig(**kw)


def _dump_candidates(sparse: LightField4D, cfg, path):
    from .recon import reconstruct_candidate

    os.makedirs(path, exist_ok=True)
    epi = _pick_epi(sparse, None, None)
    for a in cfg.shears:
        c = reconstruct_candidate(epi, a, cfg)
        _save_png(os.path.join(path, f"candidate_{a:+g}.png"), c.samples)
        for w in c.warnings:
            log.warning("alpha_h=%g: %s", a, w)


def cmd_reconstruct(args) -> int:
    from .recon import reconstruct_multi

    sparse = lfio.read_container(args.input)
    cfg = _recon_config(args, args.alpha_s)
    if args.dump_candidates:
        _dump_candidates(sparse, cfg, _path(args, args.dump_candidates))
    dense = reconstruct_4d(sparse, lambda e: reconstruct_multi(e, cfg), cfg.alpha_s, threads=args.threads)
    lfio.write_container(dense, _path(args, args.out), args.format)
    print(f"reconstructed {dense.views_t}x{dense.views_s} views into {_path(args, args.out)}")
    return EXIT_OK


def cmd_infer(args) -> int:
    from .danet import forward, load_checkpoint

    params = load_checkpoint(args.ckpt)
    sparse = lfio.read_container(args.input)
    dense = reconstruct_4d(sparse, lambda e: forward(params, e), params.alpha_s, threads=args.threads)
    lfio.write_container(dense, _path(args, args.out), args.format)
    print(f"inferred {dense.views_t}x{dense.views_s} views into {_path(args, args.out)}")
    return EXIT_OK


# ---------------------------------------------------------------- train

def _training_data(section, seed):
    from .synth import TrainingSetConfig, make_training_set

    if "path" in section:
        return lfio.load_training_set(section["path"])
    fields = dict(section)
    fields.setdefault("seed", seed)
    if "d_range" in fields:
        fields["d_range"] = tuple(fields["d_range"])
    return make_training_set(TrainingSetConfig(**fields))


def cmd_train(args) -> int:
    from .danet import TrainConfig, build_network, save_checkpoint, train

    conf = _load_json(args.config)
    unknown = set(conf) - {"network", "data", "train", "finetune"}
    if unknown:
        raise UsageError(f"unknown config sections {sorted(unknown)}")
    net = dict(conf.get("network", {}))
    dtype = np.dtype(net.pop("dtype", "float32"))
    scheme = net.pop("init", "fixed")
    params = build_network(seed=args.seed, scheme=scheme, dtype=dtype, **net)
    phases = [(conf.get("data", {}), conf.get("train", {}))]
    if "finetune" in conf:
        ft = conf["finetune"]
        phases.append((ft.get("data", {"phase": "pseudo"}), ft.get("train", {})))
    for i, (data, tcfg) in enumerate(phases):
        ds = _training_data(data, args.seed + i)
        cfg = TrainConfig(**{"seed": args.seed + i, **tcfg})
        res = train(cfg, ds, params)
        if res.losses:
            sm = res.smoothed()
            print(f"phase {i + 1}: {len(res.losses)} steps, smoothed loss {sm[0]:.5f} -> {sm[-1]:.5f}")
    save_checkpoint(params, _path(args, args.out))
    print(f"saved checkpoint to {_path(args, args.out)}")
    return EXIT_OK


# ---------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    from .evaluate import BenchmarkCase, benchmark, benchmark_epi_suite, rows_csv
    from .suites import lambertian_suite, nonlambertian_suite

    params = None
    if args.pipeline in ("danet", "both"):
        if not args.ckpt:
            raise UsageError("--ckpt is required for the danet pipeline")
        from .danet import load_checkpoint

        params = load_checkpoint(args.ckpt)
    recon_cfg = _recon_config(args, args.alpha_s)
    if args.suite:
        kw = {} if args.seed_suites is None else {"seed": args.seed_suites}
        cases = (lambertian_suite if args.suite == "lambertian" else nonlambertian_suite)(args.alpha_s, **kw)
        rows = benchmark_epi_suite(cases, recon_cfg, args.pipeline, params, args.threads)
    else:
        cases = [BenchmarkCase(os.path.basename(os.path.normpath(p)), lfio.read_container(p), args.alpha_s)
                 for p in args.dense]
        rows = benchmark(cases, args.pipeline, recon_cfg, params, args.threads)
    text = rows_csv(rows, timing=args.timing)
    if args.csv:
        with open(_path(args, args.csv), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, top):
        # subcommands accept the same flags, but must not reset values given before the verb
        d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
        parser.add_argument("--seed", type=int, default=d(0), help="seed for every random draw (default 0)")
        parser.add_argument("--threads", type=int, default=d(None),
                            help=f"worker threads (default ${THREADS_ENV} or 1)")
        parser.add_argument("--out-dir", default=d("."), help="base directory for relative output paths")
        parser.add_argument("-v", "--verbose", action="store_true", default=d(False))

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, top=False)
    p = argparse.ArgumentParser(prog="lfaa", description="Anti-aliased light field reconstruction toolkit.")
    global_flags(p, top=True)
    sub = p.add_subparsers(dest="verb", required=True)

    def fmt(sp):
        sp.add_argument("--format", choices=lfio.FORMATS, default="pfm", help="view image format (default pfm)")

    s = sub.add_parser("synth", parents=[common], help="render a scene or training set to a container")
    s.add_argument("--scene", help="JSON scene description")
    s.add_argument("--preset", choices=["fig2"], help="built-in analysis scene")
    s.add_argument("--out", help="output container (default: preset name)")
    s.add_argument("--sparse-out", help="also write every --alpha-s-th view here")
    s.add_argument("--alpha-s", type=int, default=3)
    fmt(s)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("analyze", cmd_analyze, "spectrum, alias report and sigma table"),
                                 ("curve", cmd_curve, "sigma versus downscale factor table")):
        a = sub.add_parser(name, parents=[common], help=helptext)
        a.add_argument("--in", dest="input", help="sparse container (default: the fig2 preset)")
        a.add_argument("--v", type=int, help="image row of the horizontal EPI (default centre)")
        a.add_argument("--t", type=int, help="vertical view index (default centre)")
        a.add_argument("--step", type=int, help="dense view steps between input views")
        a.add_argument("--d", type=float, help="disparity per dense view step of the aliasing layer")
        a.add_argument("--beta-over-z", type=float, default=0.0)
        a.add_argument("--gammas", type=_floats, default=[5.0, 10.0, 15.0, 20.0, 25.0])
        a.add_argument("--alphas", type=_floats, default=[1.0, 1.5, 2.0, 3.0, 4.0])
        if name == "curve":
            a.add_argument("--out", help="CSV path (default stdout)")
        a.set_defaults(func=func)

    def recon_opts(sp, alpha_default):
        sp.add_argument("--alpha-s", type=int, default=alpha_default)
        sp.add_argument("--shears", type=_floats, default=None,
                        help="comma-separated shear values; write --shears=-9,-6,... when the first is negative")
        sp.add_argument("--gamma", type=float, default=10.0)
        sp.add_argument("--fusion", choices=["select_best_patch", "global_best"], default="select_best_patch")

    r = sub.add_parser("reconstruct", parents=[common], help="classical multi-shear reconstruction")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out", required=True)
    recon_opts(r, 4)
    r.add_argument("--dump-candidates", help="directory for per-shear PNGs of the central EPI")
    fmt(r)
    r.set_defaults(func=cmd_reconstruct)

    t = sub.add_parser("train", parents=[common], help="train the network")
    t.add_argument("--config", required=True, help="JSON with network, data, train and finetune sections")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", parents=[common], help="network reconstruction from a checkpoint")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--out", required=True)
    fmt(i)
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("eval", parents=[common], help="score reconstructions against ground truth")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--suite", choices=["lambertian", "nonlambertian"])
    src.add_argument("--dense", nargs="+", help="dense ground-truth containers")
    e.add_argument("--pipeline", choices=["classical", "danet", "both", "oracle"], default="classical")
    e.add_argument("--ckpt")
    e.add_argument("--seed-suites", type=int, default=None, help="override the suites' fixed seeds")
    e.add_argument("--timing", action="store_true", help="fill the runtime_ms column")
    e.add_argument("--csv", help="CSV path (default stdout)")
    recon_opts(e, 4)
    e.set_defaults(func=cmd_eval)
    return p


def _exit_code(exc: BaseException) -> int:
    from .danet import NonFiniteActivation, TrainingDiverged

    if isinstance(exc, (FloatingPointError, NonFiniteActivation, TrainingDiverged)):
        return EXIT_NUMERICAL
    if isinstance(exc, ReconstructionError):
        cause = exc.__cause__
        return _exit_code(cause) if cause is not None else EXIT_NUMERICAL
    if isinstance(exc, (ValueError, KeyError, TypeError, OSError)):
        return EXIT_VALIDATION
    raise exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is None:
            args.threads = default_threads()
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _exit_code(exc)
        print(f"lfaa {args.verb}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
