"""Command-line interface.

Subcommands: dynamics (population-map analysis), attend (apply an attention
module to a .ten tensor), metrics (MSE/PSNR/SSIM between two images), bench
(full comparison experiment), mask (undersampling mask generation).

Machine-readable results go to stdout, progress and errors to stderr, files
only under --out. Exit status is 0 only when every requested output was
written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

import bioattn
from bioattn import attention as attn
from bioattn import ecology as eco
from bioattn import kernels
from bioattn import metrics as M
from bioattn import recon
from bioattn import tenio
from bioattn.errors import ConfigurationError, DomainError, ShapeError, TrainingDivergence
from bioattn.tensor import Tensor

DEFAULT_SEED = 0


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(v: float) -> str:
    return f"{v:g}"


# -- dynamics -------------------------------------------------------------------


def _parse_sweep(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError(f"sweep range must be LO:HI:COUNT, got {text!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1 or hi < lo:
        raise ConfigurationError(f"invalid sweep range {text!r}")
    return np.linspace(lo, hi, count)


def cmd_dynamics(args) -> int:
    out = _out_dir(args)
    if args.sweep_lambda:
        lambdas = _parse_sweep(args.sweep_lambda)
        rows = eco.bifurcation_sweep(lambdas, args.alpha, args.b, args.n0,
                                     args.transient, args.samples)
        lines = ["lambda,value"]
        for lam, samples in rows:
            lines.extend(f"{lam!r},{v!r}" for v in samples)
        tenio.atomic_write_text(out / "bifurcation.csv", "\n".join(lines) + "\n")
        _log(f"wrote {out / 'bifurcation.csv'}")
        return 0
    params = eco.EcologyParams(lam=args.lam, alpha=args.alpha, b=args.b)
    traj = eco.iterate(args.n0, params, args.steps)
    lines = ["t,value"]
    lines.extend(f"{t},{v!r}" for t, v in enumerate(traj.values))
    tenio.atomic_write_text(out / "trajectory.csv", "\n".join(lines) + "\n")
    _log(f"wrote {out / 'trajectory.csv'}")
    fp = eco.fixed_point(params)
    if fp is None:
        print("fixed_point=none")
    else:
        m, label = eco.stability(params)
        print(f"fixed_point={_fmt(fp)} multiplier={_fmt(m)} {label}")
    return 0


# -- attend ---------------------------------------------------------------------


def cmd_attend(args) -> int:
    if not args.kind and not args.config:
        raise ConfigurationError("attend requires --kind or --config")
    x = Tensor(tenio.load_ten(args.input))
    if x.ndim != 4:
        raise ShapeError(f"attend expects a rank-4 .ten tensor, got rank {x.ndim}")
    if args.config:
        module = attn.load_module(args.config)
    else:
        module = attn.make_attention(args.kind, channels=x.shape[1])
    y = module(x)
    out = _out_dir(args)
    tenio.save_ten(out / args.output_name, y.data)
    _log(f"wrote {out / args.output_name}")
    if module.kind == "identity":
        gates = np.ones(x.shape[:2])
    else:
        g = module.gate(x).data
        gates = g.mean(axis=(2, 3)) if g.ndim == 4 else g
    print("sample,channel,gate")
    for n in range(gates.shape[0]):
        for c in range(gates.shape[1]):
            print(f"{n},{c},{float(gates[n, c])!r}")
    return 0


# -- metrics ---------------------------------------------------------------------


def cmd_metrics(args) -> int:
    a = tenio.load_ten(args.image_a)
    b = tenio.load_ten(args.image_b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("metrics expects two rank-2 tensors")
    mse_v = M.mse(a, b)
    psnr_v = M.psnr(a, b, args.max_val)
    ssim_v = M.ssim(a, b, M.SSIMConfig(dynamic_range=args.max_val))
    print(f"{_fmt(mse_v)},{_fmt(psnr_v)},{_fmt(ssim_v)}")
    return 0


# -- mask ------------------------------------------------------------------------


def cmd_mask(args) -> int:
    spec = recon.MaskSpec(args.height, args.width, args.accel, args.acs,
                          seed=args.seed, pattern=args.pattern)
    mask = recon.make_mask(spec)
    out = _out_dir(args)
    tenio.save_ten(out / args.output_name, mask)
    _log(f"wrote {out / args.output_name}")
    lines = recon.sampled_line_count(mask)
    print("height,width,accel,acs_lines,sampled_lines,fraction")
    print(f"{args.height},{args.width},{_fmt(args.accel)},{args.acs},"
          f"{lines},{lines / args.height!r}")
    return 0


# -- bench -----------------------------------------------------------------------


def _thread_count() -> int:
    raw = os.environ.get("BIOATTN_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        _log(f"ignoring invalid BIOATTN_THREADS={raw!r}")
        return 1


def _write_bench_outputs(result: recon.BenchResult, out: Path, proposed: str) -> None:
    report = result.report
    agg = report.aggregates()
    comps = {c.method_b: c for c in report.comparisons}
    lines = ["method,overhead,psnr,mse,ssim,wilcoxon_w,wilcoxon_p_two_sided,wilcoxon_p_one_sided"]
    for method in report.methods():
        ov = result.overhead.get(method)
        ov_s = "" if ov is None else str(ov)
        a = agg[method]
        c = comps.get(method)
        if c is None:
            w_s = ",,"
        else:
            w_s = f"{c.statistic!r},{c.p_two_sided!r},{c.p_one_sided!r}"
        lines.append(f"{method},{ov_s},{a['psnr']!r},{a['mse']!r},{a['ssim']!r},{w_s}")
    tenio.atomic_write_text(out / "report.csv", "\n".join(lines) + "\n")

    payload = {
        "version": bioattn.__version__,
        "kernel_backend": kernels.BACKEND,
        "proposed": proposed,
        "config": json.loads(result.config.to_json()),
        "overhead": result.overhead,
        "aggregates": agg,
        "comparisons": [vars(c) for c in report.comparisons],
        "rows": [vars(r) for r in report.rows],
    }
    tenio.atomic_write_text(out / "report.json", json.dumps(payload, indent=2) + "\n")
    tenio.atomic_write_text(out / "per_image.csv", report.to_csv())

    for (kind, seed), losses in result.loss_history.items():
        body = "step,loss\n" + "\n".join(f"{i},{v!r}" for i, v in enumerate(losses))
        tenio.atomic_write_text(out / f"loss_{kind}_seed{seed}.csv", body + "\n")
    recon_dir = out / "recon"
    recon_dir.mkdir(exist_ok=True)
    for (kind, seed), pairs in result.recons.items():
        for j, (rec, err) in enumerate(pairs):
            tenio.save_ten(recon_dir / f"{kind}_seed{seed}_im{j}.ten", rec)
            tenio.save_ten(recon_dir / f"{kind}_seed{seed}_im{j}_errmap.ten", err)


def cmd_bench(args) -> int:
    if args.config:
        cfg = recon.ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = recon.ExperimentConfig()
    threads = _thread_count()
    _log(f"bench: {len(cfg.attention_kinds)} variants x {len(cfg.seeds)} seeds, "
         f"kernel backend={kernels.BACKEND}, threads={threads}")
    result = recon.run_experiment(cfg, threads=threads, proposed=args.proposed)
    out = _out_dir(args)
    _write_bench_outputs(result, out, args.proposed)
    _log(f"wrote report.csv, report.json, per_image.csv under {out}")
    agg = result.report.aggregates()
    print("method,overhead,psnr,mse,ssim")
    for method in result.report.methods():
        ov = result.overhead.get(method)
        a = agg[method]
        print(f"{method},{'' if ov is None else ov},{_fmt(a['psnr'])},"
              f"{a['mse']!r},{_fmt(a['ssim'])}")
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bioattn",
                                description="Population-map channel attention toolkit")
    p.add_argument("--version", action="version", version=f"bioattn {bioattn.__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dynamics", help="trajectories, fixed points, bifurcation sweeps")
    d.add_argument("--lambda", dest="lam", type=float, default=4.0)
    d.add_argument("--alpha", type=float, default=2.0)
    d.add_argument("--b", type=float, default=2.0)
    d.add_argument("--n0", type=float, default=0.1)
    d.add_argument("--steps", type=int, default=100)
    d.add_argument("--sweep-lambda", default=None, metavar="LO:HI:COUNT")
    d.add_argument("--transient", type=int, default=1000)
    d.add_argument("--samples", type=int, default=16)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dynamics)

    a = sub.add_parser("attend", help="apply an attention module to a .ten tensor")
    a.add_argument("--kind", choices=attn.ALL_KINDS, default=None)
    a.add_argument("--config", default=None, help="module JSON with weight files")
    a.add_argument("--input", required=True)
    a.add_argument("--output-name", default="gated.ten")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_attend)

    m = sub.add_parser("metrics", help="MSE/PSNR/SSIM between two rank-2 .ten images")
    m.add_argument("image_a")
    m.add_argument("image_b")
    m.add_argument("--max-val", type=float, default=1.0)
    m.set_defaults(func=cmd_metrics)

    k = sub.add_parser("mask", help="generate a Cartesian undersampling mask")
    k.add_argument("--height", type=int, default=64)
    k.add_argument("--width", type=int, default=64)
    k.add_argument("--accel", type=float, default=4.0)
    k.add_argument("--acs", type=int, default=4)
    k.add_argument("--pattern", choices=recon.MASK_PATTERNS,
                   default="uniform-random-lines")
    k.add_argument("--seed", type=int, default=DEFAULT_SEED)
    k.add_argument("--output-name", default="mask.ten")
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_mask)

    b = sub.add_parser("bench", help="train and compare attention variants")
    b.add_argument("--config", default=None, help="ExperimentConfig JSON (default: desk config)")
    b.add_argument("--proposed", default="bio", help="method the Wilcoxon tests compare against")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergence as e:
        _log(f"error: {e}")
        return 1
    except (ConfigurationError, ShapeError, DomainError) as e:
        _log(f"error: {e}")
        return 2
    except OSError as e:
        _log(f"error: {e}")
        return 2
    except ValueError as e:
        _log(f"error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
