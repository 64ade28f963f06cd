"""Command line entry point: ``anisosmooth <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .certify import ABSTAIN
from .core import CertifyConfig, Family, NoiseSpec, SmoothingError
from .harness import (
    DEFAULT_RADIUS_GRID,
    CertificationReport,
    Dataset,
    build_models,
    certified_accuracy,
    certify_dataset,
    compare_reports,
    curve_csv,
    datasets,
    load_dataset,
    load_experiment_config,
    make_blobs,
    predict_dataset,
    run_experiment,
    save_dataset,
)
from .net import Mlp, NoiseGenNet, load_checkpoint, pgd_attack, save_checkpoint

log = logging.getLogger("anisosmooth")


def _radii(text):
    if not text:
        return DEFAULT_RADIUS_GRID
    return [float(v) for v in text.split(",")]


def _clip(text):
    if not text:
        return None
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def _load_models(args, dim):
    f = load_checkpoint(args.model)
    if not isinstance(f, Mlp):
        raise SmoothingError(f"{args.model} is not a classifier checkpoint")
    family = Family(args.family)
    if args.noisegen and args.noisegen.lower() != "none":
        g = load_checkpoint(args.noisegen)
        if not isinstance(g, NoiseGenNet):
            raise SmoothingError(f"{args.noisegen} is not a noise generator checkpoint")
        return f, g
    if args.sigma is None:
        raise SmoothingError("--sigma is required when no noise generator is given")
    return f, NoiseSpec.isotropic(args.sigma, dim, family)


def _add_noise_args(p):
    p.add_argument("--model", required=True)
    p.add_argument("--noisegen", default="none")
    p.add_argument("--dataset", required=True)
    p.add_argument("--family", choices=["gaussian", "laplace"], default="gaussian")
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=1000)


def cmd_certify(args):
    ds = load_dataset(args.dataset)
    f, noise = _load_models(args, ds.dim)
    cfg = CertifyConfig(args.n0, args.n, args.alpha, args.batch_size, args.seed)
    rep = certify_dataset(f, noise, ds, cfg, args.workers, not args.no_timing, Family(args.family),
                          {"family": args.family, "model": args.model, "noisegen": args.noisegen})
    rep.write(args.out)
    log.info("certified %d/%d examples", sum(r.status.value == "CERTIFIED" for r in rep.rows), len(rep.rows))


def cmd_predict(args):
    ds = load_dataset(args.dataset)
    f, noise = _load_models(args, ds.dim)
    preds = predict_dataset(f, noise, ds, args.n, args.alpha, args.seed, args.workers,
                            Family(args.family), args.batch_size)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["example_id", "true_label", "prediction"])
        for j, p in enumerate(preds):
            w.writerow([j, int(ds.labels[j]), "ABSTAIN" if p == ABSTAIN else p])


def cmd_train(args):
    cfg = load_experiment_config(args.config)
    train_ds, _ = datasets(cfg)
    f, noise, trace = build_models(cfg, train_ds)
    save_checkpoint(args.out_model, f, cfg["seed"])
    if isinstance(noise, NoiseGenNet):
        if not args.out_noisegen:
            raise SmoothingError("anisotropic mode needs --out-noisegen")
        save_checkpoint(args.out_noisegen, noise, cfg["seed"])
    for t in trace:
        log.info("epoch %d total %.6f smoothing %.6f", t["epoch"], t["total"], t["smoothing"])


def cmd_attack(args):
    ds = load_dataset(args.dataset)
    f = load_checkpoint(args.model)
    adv = pgd_attack(f, ds.inputs, ds.labels, args.eps_inf, args.iters, args.step, _clip(args.clip))
    save_dataset(Dataset(adv, ds.labels, ds.name + "-pgd", "test", ds.num_classes), args.out)


def cmd_report(args):
    rep = CertificationReport.read(args.report)
    text = curve_csv(certified_accuracy(rep, _radii(args.radii)))
    _emit(text, args.out)


def cmd_compare(args):
    base = CertificationReport.read(args.baseline)
    cand = CertificationReport.read(args.candidate)
    rows = compare_reports(base, cand, _radii(args.radii))
    _emit(curve_csv(rows, ("radius", "acc_baseline", "acc_candidate", "delta")), args.out)


def cmd_experiment(args):
    res = run_experiment(args.config, args.out_dir, args.workers)
    grid = res.config["radius_grid"]
    sys.stdout.write(curve_csv(certified_accuracy(res.clean, grid)))


def cmd_blobs(args):
    ds = make_blobs(args.num_classes, args.points_per_class, args.dim, args.separation,
                    args.noise_std, args.seed, args.split)
    save_dataset(ds, args.out)


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anisosmooth", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify every example of a dataset CSV")
    _add_noise_args(p)
    p.add_argument("--n0", type=int, default=100)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_s empty (byte-stable CSV)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("predict", help="smoothed prediction with abstention")
    _add_noise_args(p)
    p.add_argument("--n", type=int, default=100_000)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("train", help="train classifier (and noise generator) from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-noisegen")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="PGD pre-perturbation of a dataset CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--eps-inf", type=float, required=True)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--step", type=float)
    p.add_argument("--clip")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("report", help="certified-accuracy curve from a report CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--radii")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="per-radius accuracy deltas between two reports")
    p.add_argument("--baseline", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--radii")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="train, certify and (optionally) attack from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("blobs", help="write a synthetic Gaussian-blobs dataset CSV")
    p.add_argument("--num-classes", type=int, default=2)
    p.add_argument("--points-per-class", type=int, default=128)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_blobs)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except SmoothingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
