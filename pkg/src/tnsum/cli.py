"""Command-line entry point: ``tnsum <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
The default output directory can be set with ``TNSUM_OUTPUT_DIR``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import export_dataset, load_sample, downsample
from .errors import DatasetError, ShapeError
from .experiment import METHODS, RunConfig, load_samples, mean_confusion, run_many, summarize, write_json
from .features import basis_from_networks, project, save_basis, write_features_csv
from .sums import MatrixChain, contract_chain, sum_chains, sum_tucker
from .tucker import TuckerNetwork, hosvd, hosvd_many, reconstruct, save_tucker

log = logging.getLogger("tnsum")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SUM_TOL = 1e-12


def _rel_err(a, b):
    denom = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / denom) if denom else float(np.linalg.norm(a - b))


def _random_tucker(rng, shape, ranks, zero=False):
    core = np.zeros(ranks) if zero else rng.standard_normal(ranks)
    return TuckerNetwork(core, tuple(rng.standard_normal((d, r)) for d, r in zip(shape, ranks)))


def tucker_trial(seed, max_order=4, max_dim=10, max_rank=5, zero_second=False, min_order=3):
    """One random Tucker summation check; returns a report dict."""
    rng = np.random.default_rng(seed)
    order = int(rng.integers(min_order, max_order + 1))
    shape = tuple(int(d) for d in rng.integers(1, max_dim + 1, size=order))
    rx = tuple(int(rng.integers(1, min(max_rank, d) + 1)) for d in shape)
    ry = tuple(int(rng.integers(1, min(max_rank, d) + 1)) for d in shape)
    x = _random_tucker(rng, shape, rx)
    y = _random_tucker(rng, shape, ry, zero=zero_second)
    dense = reconstruct(x) + reconstruct(y)
    err = _rel_err(reconstruct(sum_tucker(x, y)), dense)
    return {"kind": "tucker", "seed": seed, "shape": shape, "ranks_x": rx, "ranks_y": ry, "rel_error": err}


def chain_trial(seed, max_len=6, max_dim=8, zero_second=False):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_len + 1))
    dims_x = [int(d) for d in rng.integers(1, max_dim + 1, size=n + 1)]
    dims_y = [dims_x[0]] + [int(d) for d in rng.integers(1, max_dim + 1, size=n - 1)] + [dims_x[-1]]
    x = MatrixChain(tuple(rng.standard_normal((dims_x[k], dims_x[k + 1])) for k in range(n)))
    y = MatrixChain(tuple((0.0 if zero_second else 1.0) * rng.standard_normal((dims_y[k], dims_y[k + 1]))
                          for k in range(n)))
    dense = contract_chain(x) + contract_chain(y)
    err = _rel_err(contract_chain(sum_chains(x, y)), dense)
    return {"kind": "chain", "seed": seed, "length": n, "dims_x": dims_x, "dims_y": dims_y, "rel_error": err}


def cmd_verify_sum(args) -> int:
    if args.trials < 1:
        raise argparse.ArgumentTypeError("--trials must be >= 1")
    reports = []
    for k in range(args.trials):
        reports.append(tucker_trial([args.seed, 0, k], args.max_order, args.max_dim, args.max_rank,
                                    args.zero_second, min_order=min(args.min_order, args.max_order)))
        reports.append(chain_trial([args.seed, 1, k], args.max_chain, args.max_chain_dim, args.zero_second))
    failed = [r for r in reports if not r["rel_error"] <= SUM_TOL]
    for r in reports:
        status = "ok  " if r["rel_error"] <= SUM_TOL else "FAIL"
        desc = (f"shape={r['shape']} ranks={r['ranks_x']}+{r['ranks_y']}" if r["kind"] == "tucker"
                else f"length={r['length']} dims={r['dims_x']}/{r['dims_y']}")
        print(f"{status} {r['kind']:6s} seed={r['seed']} {desc} rel_error={r['rel_error']:.3e}")
    worst = max(r["rel_error"] for r in reports)
    print(f"{len(reports) - len(failed)}/{len(reports)} trials within {SUM_TOL:g} (worst {worst:.3e})")
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "verify_sum.json", {"tolerance": SUM_TOL, "trials": reports})
    if failed:
        for r in failed:
            print(f"replay: kind={r['kind']} seed={r['seed']}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _config_from_args(args, command) -> RunConfig:
    cfg = RunConfig(
        command=command,
        dataset=args.dataset,
        synth_classes=args.classes,
        synth_per_class=args.per_class,
        synth_shape=tuple(args.shape),
        synth_noise=args.noise,
        synth_core_spread=args.core_spread,
        synth_shared=args.shared,
        image_size=tuple(args.image_size),
        pixel_scale=args.pixel_scale,
        ranks=tuple(args.ranks),
        train_fraction=args.train_fraction,
        fractions=tuple(getattr(args, "fractions", None) or ()),
        realizations=args.realizations,
        seed=args.seed,
        C=args.C,
        gamma=args.gamma,
        standardize_raw=args.standardize_raw,
        methods=tuple(args.methods),
        output_dir=str(args.output_dir),
    )
    print(json.dumps({"config": cfg.to_dict()}, sort_keys=True))
    return cfg


def cmd_train_eval(args) -> int:
    cfg = _config_from_args(args, "train-eval")
    out = Path(cfg.output_dir)
    (out / "realizations").mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_dict())
    samples, labels = load_samples(cfg)
    networks = hosvd_many(samples, cfg.ranks) if "sum_of_tns" in cfg.methods else None

    def save(res):
        write_json(out / "realizations" / f"r{res.index:03d}.json", res.to_dict())

    started = time.time()
    results = run_many(samples, labels, cfg, cfg.train_fraction, networks, on_result=save)
    summary = {"config": cfg.to_dict(), "elapsed_seconds": time.time() - started,
               "methods": {m: summarize(results, m) for m in cfg.methods}}
    write_json(out / "accuracy.json", summary)
    main_method = cfg.methods[0]
    mean_confusion(results, main_method).to_csv(out / "confusion.csv")
    if "sum_of_tns" in cfg.methods:
        _write_feature_cache(samples, labels, networks, cfg, out)
    for m in cfg.methods:
        print(f"{m}: mean accuracy {summary['methods'][m]['mean_accuracy']:.4f} "
              f"over {cfg.realizations} realizations")
    return EXIT_OK


def _write_feature_cache(samples, labels, networks, cfg, out):
    """Basis and features of the first realization's training split."""
    from .dataio import split_indices

    tr, _ = split_indices(labels, cfg.train_fraction, [cfg.seed, 0])
    basis = basis_from_networks([networks[k] for k in tr], cfg.ranks)
    save_basis(basis, out / "basis.txt")
    feats = [project(s, basis, sample_id=k, label=lab) for k, (s, lab) in enumerate(zip(samples, labels))]
    write_features_csv(out / "features.csv", feats)


def cmd_compare(args) -> int:
    if not args.fractions:
        print("compare: at least one --fractions value is required", file=sys.stderr)
        return EXIT_USAGE
    args.methods = list(METHODS)
    cfg = _config_from_args(args, "compare")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_dict())
    samples, labels = load_samples(cfg)
    networks = hosvd_many(samples, cfg.ranks)
    rows = []
    for frac in cfg.fractions:
        results = run_many(samples, labels, cfg, frac, networks)
        acc = {m: summarize(results, m)["mean_accuracy"] for m in METHODS}
        rows.append([frac, acc["sum_of_tns"], acc["raw_svm"], acc["tkd_concat"],
                     acc["sum_of_tns"] - acc["raw_svm"]])
        print(f"fraction {frac:.2f}: sum_of_tns {acc['sum_of_tns']:.4f} raw_svm {acc['raw_svm']:.4f} "
              f"tkd_concat {acc['tkd_concat']:.4f}")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fraction", "acc_sum_of_tns", "acc_raw_svm", "acc_tkd_concat", "diff_vs_raw"])
        w.writerows(rows)
    return EXIT_OK


def cmd_synth_gen(args) -> int:
    from .dataio import synth_dataset

    samples, labels = synth_dataset(args.classes, args.per_class, args.shape, args.ranks, args.noise,
                                    args.seed, core_spread=args.core_spread, shared=args.shared)
    manifest = export_dataset(samples, labels, args.out)
    print(f"wrote {len(manifest)} samples and manifest.csv to {args.out}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    t = load_sample(args.image)
    if t.ndim == 3 and Path(args.image).suffix != ".tensor" and args.image_size:
        t = downsample(t, args.image_size)
    tk = hosvd(t, args.ranks)
    save_tucker(tk, args.out)
    err = _rel_err(reconstruct(tk), t)
    print(f"shape {t.shape} ranks {tk.ranks} relative error {err:.4e} -> {args.out}")
    return EXIT_OK


def _add_data_args(p):
    p.add_argument("--dataset", help="ETH-80 style directory (<class>/<object>/<image>) or manifest.csv; "
                                     "synthetic data when omitted")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--per-class", type=int, default=41)
    p.add_argument("--shape", type=int, nargs="+", default=[32, 32, 3])
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--core-spread", type=float, default=0.5)
    p.add_argument("--shared", type=float, default=0.0)
    p.add_argument("--image-size", type=int, nargs=2, default=[32, 32])
    p.add_argument("--pixel-scale", type=float, default=1.0,
                   help="multiply loaded [0,1] pixels by this (255 restores raw intensities)")
    p.add_argument("--ranks", type=int, nargs="+", default=[3, 3, 3])
    p.add_argument("--seed", type=int, default=0)


def _add_run_args(p):
    _add_data_args(p)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--realizations", type=int, default=20)
    p.add_argument("--C", type=float, default=10.0)
    p.add_argument("--gamma", type=float, default=None, help="kernel width; default 1/(d*var)")
    p.add_argument("--standardize-raw", action="store_true", help="z-score pixels for the raw SVM baseline")


def build_parser() -> argparse.ArgumentParser:
    default_out = os.environ.get("TNSUM_OUTPUT_DIR", "tnsum-out")
    parser = argparse.ArgumentParser(prog="tnsum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-sum", help="check sums of random Tucker networks and matrix chains")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--min-order", type=int, default=3)
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--max-dim", type=int, default=10)
    p.add_argument("--max-rank", type=int, default=5)
    p.add_argument("--max-chain", type=int, default=6)
    p.add_argument("--max-chain-dim", type=int, default=8)
    p.add_argument("--zero-second", action="store_true", help="make the second summand zero")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_verify_sum)

    p = sub.add_parser("train-eval", help="sum-of-TNs classification over random splits")
    _add_run_args(p)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=["sum_of_tns"])
    p.add_argument("--output-dir", default=default_out)
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("compare", help="accuracy of all methods over training fractions")
    _add_run_args(p)
    p.add_argument("--fractions", type=float, nargs="*", default=None)
    p.add_argument("--output-dir", default=default_out)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth-gen", help="write a synthetic dataset as tensor dumps + manifest")
    _add_data_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("decompose", help="HOSVD of one image, written as a Tucker record")
    p.add_argument("image")
    p.add_argument("--ranks", type=int, nargs="+", default=[3, 3, 3])
    p.add_argument("--image-size", type=int, nargs=2, default=[32, 32])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DatasetError, ShapeError, OSError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"tnsum {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
