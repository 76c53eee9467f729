"""Command-line interface.

Subcommands: run, rates, mismatch, meanwidth, probe, identities.
Exit codes: 0 success, 1 usage error, 2 runtime error.
The environment variable NLCS_THREADS overrides --threads.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

import numpy as np

from . import analysis, harness
from .model import L1Ball, L2Ball, MeasurementEnsemble, SignalSpec, gen_signal
from .observe import sign_val, uniform_quantize
from .seeds import rng_from

__all__ = ["cli_main", "main"]


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="nlcs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run a configured recovery experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None, help="override master_seed")

    p_rates = sub.add_parser("rates", help="summarize a result CSV and fit decay slopes")
    p_rates.add_argument("--in", dest="path", required=True)
    p_rates.add_argument("--column", default="err_direction")
    p_rates.add_argument("--group", default="model,p,s")
    p_rates.add_argument("--window", type=int, default=None)

    p_mismatch = sub.add_parser("mismatch", help="Monte-Carlo target mismatch of a model")
    p_mismatch.add_argument("--model", required=True,
                            choices=["linear", "one_bit", "one_bit_dither",
                                     "multi_bit_dither", "modulo"])
    p_mismatch.add_argument("--p", type=int, default=32)
    p_mismatch.add_argument("--s", type=int, default=4)
    p_mismatch.add_argument("--lam", type=float, default=None)
    p_mismatch.add_argument("--delta", type=float, default=None)
    p_mismatch.add_argument("--ensemble", default="gaussian",
                            choices=["gaussian", "rademacher", "uniform_scaled"])
    p_mismatch.add_argument("--n", type=int, default=100_000)
    p_mismatch.add_argument("--seed", type=int, default=0)

    p_width = sub.add_parser("meanwidth", help="Monte-Carlo Gaussian mean width")
    p_width.add_argument("--set", dest="cset", required=True, choices=["l1ball", "l2ball"])
    p_width.add_argument("--radius", type=float, default=1.0)
    p_width.add_argument("--p", type=int, required=True)
    p_width.add_argument("--n", type=int, default=100_000)
    p_width.add_argument("--t", type=float, default=None,
                         help="localization scale; requires --s for the center")
    p_width.add_argument("--s", type=int, default=1)
    p_width.add_argument("--seed", type=int, default=0)

    p_probe = sub.add_parser("probe", help="decoupling probe for a union of localizations")
    p_probe.add_argument("--p", type=int, default=32)
    p_probe.add_argument("--s", type=int, default=2)
    p_probe.add_argument("--t", type=float, default=0.5)
    p_probe.add_argument("--centers", type=int, default=20)
    p_probe.add_argument("--n", type=int, default=400)
    p_probe.add_argument("--seed", type=int, default=0)

    p_id = sub.add_parser("identities", help="Monte-Carlo checks of dithering identities")
    p_id.add_argument("--model", required=True, choices=["multibit", "onebitdither"])
    p_id.add_argument("--delta", type=float, default=1.0)
    p_id.add_argument("--lam", type=float, default=1.0)
    p_id.add_argument("--n", type=int, default=1_000_000)
    p_id.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    records = harness.run_experiment(cfg, threads=args.threads, out_path=args.out)
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def _cmd_rates(args) -> int:
    keys = tuple(k for k in args.group.split(",") if k)
    table, slopes = harness.summarize(args.path, group_keys=keys,
                                      column=args.column, window=args.window)
    print(table.to_string(index=False))
    for key, slope in slopes.items():
        label = ", ".join(str(k) for k in key)
        print(f"group ({label}): fitted slope {slope:+.3f}")
    return 0


def _cmd_mismatch(args) -> int:
    spec = {"kind": args.model}
    if args.lam is not None:
        spec["lam"] = args.lam
    if args.delta is not None:
        spec["delta"] = args.delta
    model = harness.build_model(spec)
    sig = SignalSpec(family="unit_sphere", p=args.p, s=args.s)
    x = gen_signal(sig, args.seed)
    ens = MeasurementEnsemble(law=args.ensemble, p=args.p)
    tx = harness.target_vector(model, ens, x, args.p)
    est = analysis.target_mismatch(model, x, tx, n=args.n, seed=args.seed, ens=ens)
    print(f"model={args.model} p={args.p} s={args.s} n={args.n}")
    print(f"rho_hat = {est.rho_hat:.6g}   stderr = {est.stderr:.6g}")
    return 0


def _cmd_meanwidth(args) -> int:
    cset = L1Ball(args.radius) if args.cset == "l1ball" else L2Ball(args.radius)
    if args.t is None:
        est = analysis.mean_width_global(cset, n=args.n, seed=args.seed, p=args.p)
    else:
        center = np.zeros(args.p)
        rng = rng_from(args.seed, "center")
        sup = rng.choice(args.p, size=args.s, replace=False)
        mags = np.abs(rng.standard_normal(args.s))
        if args.cset == "l1ball":
            center[sup] = rng.choice([-1.0, 1.0], args.s) * mags / mags.sum() * args.radius
        else:
            center[sup] = mags / np.linalg.norm(mags) * args.radius
        est = analysis.mean_width_local(cset, center, args.t, n=args.n, seed=args.seed)
    print(f"value = {est.value:.6g}   stderr = {est.stderr:.6g}   kind = {est.kind}")
    return 0


def _cmd_probe(args) -> int:
    rng = rng_from(args.seed, "probe-centers")
    centers = np.zeros((args.centers, args.p))
    for i in range(args.centers):
        sup = rng.choice(args.p, size=args.s, replace=False)
        mags = np.abs(rng.standard_normal(args.s))
        centers[i, sup] = rng.choice([-1.0, 1.0], args.s) * mags / mags.sum()
    lhs, rhs, ratio = analysis.decoupling_probe(
        L1Ball(1.0), centers, args.t, n=args.n, seed=args.seed
    )
    print(f"lhs = {lhs:.4f}   rhs = {rhs:.4f}   ratio = {ratio:.4f}")
    return 0


def _cmd_identities(args) -> int:
    rng = rng_from(args.seed, "identities")
    if args.model == "multibit":
        d = args.delta
        print(f"E[q_delta(s + tau)] - s with delta={d}, n={args.n}")
        for s in (-3.3, 0.0, 0.7, 2 * d):
            tau = rng.uniform(-d, d, args.n)
            resid = uniform_quantize(s + tau, d).mean() - s
            print(f"  s = {s:+.3f}:  residual = {resid:+.3e}")
    else:
        lam = args.lam
        print(f"E[sign(s + tau)] - s/lam with lam={lam}, n={args.n}")
        for frac in (-1.0, -0.5, 0.0, 0.4, 0.9):
            s = frac * lam
            tau = rng.uniform(-lam, lam, args.n)
            resid = sign_val(s + tau).mean() - s / lam
            print(f"  s = {s:+.3f}:  residual = {resid:+.3e}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "rates": _cmd_rates,
    "mismatch": _cmd_mismatch,
    "meanwidth": _cmd_meanwidth,
    "probe": _cmd_probe,
    "identities": _cmd_identities,
}


def cli_main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # runtime failure, not usage
        print(f"nlcs: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
