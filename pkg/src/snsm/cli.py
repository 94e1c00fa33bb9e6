"""Command-line front end: train / sweep / rates / noise / mem / bound.

Exit status: 0 success, 1 usage error, 2 numeric failure, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import analysis, harness
from .noise_models import MLP2, NoiseModel, Quadratic

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_CHECK_FAILED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(rows, fields, fmt: str, out_path: str | None):
    if fmt == "csv":
        text = harness.rows_to_csv(rows, fields)
    else:
        text = harness.rows_to_json(rows)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _int_list(s: str):
    return [int(x) for x in s.split(",") if x]


def _float_list(s: str):
    return [float(x) for x in s.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="snsm", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--seed-base", type=int, default=0)

    t = sub.add_parser("train", help="run one optimizer config over seeds")
    common(t)
    t.add_argument("--objective", choices=("quadratic", "mlp2"), default="quadratic")
    t.add_argument("--d", type=int, default=100)
    t.add_argument("--hidden", type=int, default=16, help="mlp2 hidden width")
    t.add_argument("--T", type=int, default=1000)
    t.add_argument("--preset", default="Adam")
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--n-seeds", type=int, default=1)
    t.add_argument("--sigma", type=float, default=0.0, help="dense noise level")
    t.add_argument("--noise-beta", type=float, default=None,
                   help="density exponent: ceil(d^beta) noisy coordinates")
    t.add_argument("--noise-alpha", type=float, default=1.0)
    t.add_argument("--delta1", type=float, default=1.0)
    t.add_argument("--record-every", type=int, default=1)
    t.add_argument("--rank", type=int, default=4)
    t.add_argument("--refresh-gap", type=int, default=200)
    t.add_argument("--frame", default="svd")
    t.add_argument("--subset-rule", default="heuristic2d")
    t.add_argument("--subset-size", type=int, default=None)
    t.add_argument("--param-shape", default=None,
                   help="view the parameter as MxN, e.g. 10x10")
    t.add_argument("--clip-norm", type=float, default=None)
    t.add_argument("--weight-decay", type=float, default=0.0)

    s = sub.add_parser("sweep", help="beta-sweep over step-size families")
    common(s)
    s.add_argument("--betas", type=_float_list, default=[0.0, 0.5, 1.0])
    s.add_argument("--d", type=int, default=1024)
    s.add_argument("--T", type=int, default=1000)
    s.add_argument("--n-seeds", type=int, default=5)
    s.add_argument("--subset-sizes", type=_int_list, default=[])
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--lr", type=float, default=0.1)

    r = sub.add_parser("rates", help="dimension-dependence exponents at beta")
    common(r)
    r.add_argument("--beta", type=float, required=True)

    n = sub.add_parser("noise", help="noise-variance report from gradient samples")
    common(n)
    n.add_argument("--samples", required=True,
                   help="(n, d) array: .npy or whitespace-delimited text")
    n.add_argument("--threshold", type=float, default=1e-12)

    m = sub.add_parser("mem", help="optimizer state size over a shape manifest")
    common(m)
    m.add_argument("--manifest", required=True)
    m.add_argument("--preset", required=True)
    m.add_argument("--rank", type=int, default=4)
    m.add_argument("--subset-rule", default="heuristic2d")
    m.add_argument("--subset-size", type=int, default=None)

    b = sub.add_parser("bound", help="evaluate a convergence bound")
    common(b)
    b.add_argument("--thm", choices=("2", "3"), required=True)
    b.add_argument("--delta1", type=float, default=1.0)
    b.add_argument("--L", type=float, default=1.0)
    b.add_argument("--sigma", type=float, default=1.0)
    b.add_argument("--T", type=int, default=10000)
    b.add_argument("--beta1", type=float, default=0.9)
    b.add_argument("--delta", type=float, default=0.1, help="failure probability")
    b.add_argument("--eta", type=float, default=0.01, help="thm 3 step size")
    b.add_argument("--sigma-subsets", type=_float_list, default=None,
                   help="thm 3: per-subset noise levels, comma-separated")
    b.add_argument("--b0", type=_float_list, default=None,
                   help="thm 3: per-subset initial accumulators")
    b.add_argument("--verify", action="store_true",
                   help="thm 2: Monte-Carlo check over seeds")
    b.add_argument("--d", type=int, default=100)
    b.add_argument("--n-seeds", type=int, default=20)
    b.add_argument("--rank", type=int, default=10)
    b.add_argument("--frame", default="gaussian_ortho")
    return p


def _cmd_train(args) -> int:
    if args.objective == "quadratic":
        obj = Quadratic(np.ones(args.d))
    else:
        rng = np.random.default_rng(args.seed_base)
        X = rng.standard_normal((64, args.d))
        y = rng.standard_normal(64)
        obj = MLP2(X, y, hidden=args.hidden)
    if args.noise_beta is not None:
        noise = NoiseModel(density_beta=args.noise_beta,
                           density_alpha=args.noise_alpha)
    else:
        noise = NoiseModel(sigma=args.sigma)
    shape = None
    if args.param_shape:
        shape = tuple(int(x) for x in args.param_shape.lower().split("x"))
    config = harness.ExperimentConfig(
        objective=obj, noise=noise, preset=args.preset, T=args.T,
        seeds=tuple(range(args.seed_base, args.seed_base + args.n_seeds)),
        lr=args.lr, delta1=args.delta1, param_shape=shape,
        record_every=args.record_every, rank=args.rank,
        refresh_gap=args.refresh_gap, frame_kind=args.frame,
        subset_rule=args.subset_rule, subset_size=args.subset_size,
        clip_norm=args.clip_norm, weight_decay=args.weight_decay)
    result = harness.run(config)
    if args.format == "csv":
        text = harness.records_to_csv(result.records)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        _emit([dataclasses.asdict(r) for r in result.records],
              harness.RECORD_FIELDS, "json", args.out)
    for s in result.summaries:
        print(f"# seed={s.seed} mean_grad_norm_sq={s.mean_grad_norm_sq:.17g} "
              f"final_loss={s.final_loss:.17g} diverged={s.diverged}",
              file=sys.stderr)
    return EXIT_NUMERIC if result.any_diverged else EXIT_OK


def _cmd_sweep(args) -> int:
    rows = harness.sweep_beta(
        args.betas, d=args.d, T=args.T,
        seeds=range(args.seed_base, args.seed_base + args.n_seeds),
        subset_sizes=args.subset_sizes, alpha=args.alpha, lr=args.lr)
    _emit(rows, ("beta", "optimizer", "subset_size", "mean_metric", "stderr"),
          args.format, args.out)
    return EXIT_OK


def _cmd_rates(args) -> int:
    r = analysis.rate_exponents(args.beta)
    row = dict(beta=args.beta,
               coord_slow=r.coord[0], coord_fast=r.coord[1],
               norm_slow=r.norm[0], norm_fast=r.norm[1],
               subset_slow=r.subset_slow, subset_fast=r.subset_fast,
               optimal_k_exponent=r.optimal_k_exponent)
    _emit([row], tuple(row), args.format, args.out)
    return EXIT_OK


def _cmd_noise(args) -> int:
    if args.samples.endswith(".npy"):
        samples = np.load(args.samples)
    else:
        samples = np.loadtxt(args.samples)
    est = analysis.estimate_noise(samples, threshold=args.threshold)
    d = samples.shape[1]
    row = dict(d=d, n=samples.shape[0], noisy_count=est.noisy_count,
               noisy_fraction=est.noisy_count / d,
               mean_noisy_var=est.mean_noisy_var)
    _emit([row], tuple(row), args.format, args.out)
    return EXIT_OK


def _cmd_mem(args) -> int:
    manifest = harness.load_manifest(args.manifest)
    report = harness.mem_report(manifest, args.preset, rank=args.rank,
                                subset_rule=args.subset_rule,
                                subset_size=args.subset_size)
    fields = ("name", "tag", "shape", "state_elems", "frame_elems")
    _emit(report["entries"], fields, args.format, args.out)
    print(f"# preset={report['preset']} total={report['total']} "
          f"frame_elements={report['frame_elements']}", file=sys.stderr)
    return EXIT_OK


def _cmd_bound(args) -> int:
    if args.thm == "2":
        mb = analysis.momentum_bound(args.delta1, args.L, args.sigma, args.T,
                                     args.beta1, args.delta)
        row = dict(alpha=mb.alpha, eta_star=mb.eta_star,
                   deterministic_term=mb.deterministic_term,
                   noise_term=mb.noise_term,
                   concentration_term=mb.concentration_term, total=mb.total)
        _emit([row], tuple(row), args.format, args.out)
        if args.verify:
            check = harness.verify_thm2(
                d=args.d, sigma=args.sigma, delta1=args.delta1, T=args.T,
                fail_prob=args.delta, n_seeds=args.n_seeds, rank=args.rank,
                frame_kind=args.frame, seed_base=args.seed_base)
            print(f"# verify: fraction={check.fraction:.4f} "
                  f"threshold={check.threshold:.4f} passed={check.passed}",
                  file=sys.stderr)
            if not check.passed:
                return EXIT_CHECK_FAILED
        return EXIT_OK
    if args.sigma_subsets is None or args.b0 is None:
        raise SystemExit(EXIT_USAGE)
    b0 = args.b0
    if len(b0) == 1:
        b0 = b0 * len(args.sigma_subsets)
    sb = analysis.subsetnorm_bound(args.delta1, args.L, args.eta, args.T,
                                   np.array(args.sigma_subsets), np.array(b0),
                                   args.delta)
    row = dict(G=sb.G, I=sb.I, H=sb.H, rhs=sb.rhs)
    _emit([row], tuple(row), args.format, args.out)
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train, "sweep": _cmd_sweep, "rates": _cmd_rates,
    "noise": _cmd_noise, "mem": _cmd_mem, "bound": _cmd_bound,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.cmd](args)
    except (ValueError, OSError) as exc:
        print(f"snsm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FloatingPointError as exc:
        print(f"snsm: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
