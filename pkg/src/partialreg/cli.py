"""Command-line interface: ``partialreg {register,synth,eval}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench.io import load_cloud, read_truth, save_cloud, write_truth
from .bench.metrics import truth_error
from .bench.scenarios import BASES, ScenarioSpec, make_scenario
from .core import ContractError, DeformationModel, KernelSpec, apply_deformation
from .pipelines import Method, RegistrationConfig, register

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="partialreg", description="Partial-transport point-cloud registration.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("register", help="register a source cloud onto a target cloud")
    r.add_argument("--method", required=True, choices=[m.value for m in Method])
    r.add_argument("--source", required=True, type=Path)
    r.add_argument("--target", required=True, type=Path)
    r.add_argument("--zeta", type=int, help="number of clean points (required for partial methods)")
    r.add_argument("--iters", type=int, default=100)
    r.add_argument("--rigid-iters", type=int, default=20)
    r.add_argument("--kernel", choices=["gaussian", "tps"])
    r.add_argument("--sigma2", type=float, help="Gaussian kernel width")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--projections", type=int, default=100)
    r.add_argument("--lambda0", type=float)
    r.add_argument("--xi", type=float)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--scaling", choices=["fixed", "uniform", "per-axis"], default="fixed")
    r.add_argument("--out", required=True, type=Path, help="report JSON path")
    r.add_argument("--transformed", type=Path,
                   help="where to write the transformed source (default: next to --out)")
    r.add_argument("--header", action="store_true", help="point files start with a header row")
    r.add_argument("--truth", type=Path, help="truth sidecar; adds the registration error")
    r.add_argument("--repeat", type=int, default=1, help="repetitions with seeds seed+i")

    s = sub.add_parser("synth", help="generate a synthetic scenario")
    s.add_argument("--base", required=True,
                   help=f"point file or generator name ({', '.join(BASES)})")
    s.add_argument("--deform", choices=["rigid", "tps_random", "none"], default="tps_random")
    s.add_argument("--coefficient-scale", type=float, default=0.05)
    s.add_argument("--n-points", type=int)
    s.add_argument("--eta", type=float, default=0.0)
    s.add_argument("--noise-on", choices=["source", "target", "both"], default="target")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--header", action="store_true")
    s.add_argument("--out-dir", required=True, type=Path)

    e = sub.add_parser("eval", help="error of a saved report against a truth sidecar")
    e.add_argument("--report", required=True, type=Path)
    e.add_argument("--truth", required=True, type=Path)
    return p


def _config(args, seed: int, dim: int) -> RegistrationConfig:
    kernel = None
    if args.kernel == "gaussian":
        if args.sigma2 is None:
            raise UsageError("--kernel gaussian needs --sigma2")
        kernel = KernelSpec.gaussian(args.sigma2)
    elif args.kernel == "tps":
        kernel = KernelSpec.tps(dim)
    elif args.sigma2 is not None:
        kernel = KernelSpec.gaussian(args.sigma2)
    return RegistrationConfig(
        method=args.method, zeta=args.zeta, T=args.iters, rigid_iters=args.rigid_iters,
        kernel=kernel, epsilon=args.epsilon, projections=args.projections,
        lambda0=args.lambda0, xi=args.xi, seed=seed,
        scaling_mode={"fixed": "fixed_identity", "per-axis": "per_axis"}.get(args.scaling,
                                                                            args.scaling))


def _cmd_register(args) -> int:
    if args.repeat < 1:
        raise UsageError("--repeat must be positive")
    if args.truth is not None:
        source, target, _ = read_truth(args.truth)
        X = load_cloud(args.source, header=args.header).points
        if not np.array_equal(X, source.points):
            raise ContractError("--source does not match the cloud named in --truth")
    else:
        source = target = None
        X = load_cloud(args.source, header=args.header).points
    Y = load_cloud(args.target, header=args.header).points

    runs = []
    for i in range(args.repeat):
        cfg = _config(args, args.seed + i, X.shape[1])
        rep = register(X, Y, cfg)
        if source is not None:
            rep.final_error = truth_error(rep.model, source, target)
        runs.append((cfg, rep))

    cfg, rep = runs[0]
    moved = apply_deformation(rep.model, X)
    if not np.all(np.isfinite(moved)):
        raise FloatingPointError("registration produced non-finite coordinates")
    transformed = args.transformed or args.out.with_suffix(".transformed.xyz")
    save_cloud(moved, transformed)
    doc = {"config": cfg.to_dict(), "source": str(args.source), "target": str(args.target),
           "transformed": str(transformed), **rep.to_dict()}
    if args.repeat > 1:
        doc["runs"] = [{"seed": c.seed, "final_error": r.final_error,
                        "converged_at": r.converged_at, "model": r.model.to_dict()}
                       for c, r in runs]
        errs = [r.final_error for _, r in runs if r.final_error is not None]
        if errs:
            doc["mean_error"] = float(np.mean(errs))
    args.out.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    msg = f"{rep.method}: {rep.n_iter} iterations"
    if rep.final_error is not None:
        msg += f", error {rep.final_error:.6g}"
    print(msg)
    return EXIT_OK


def _cmd_synth(args) -> int:
    base = args.base
    if base not in BASES:
        base = load_cloud(Path(base), header=args.header).points
    spec = ScenarioSpec(base=base, n_points=args.n_points, deform=args.deform,
                        coefficient_scale=args.coefficient_scale, eta=args.eta,
                        noise_on=args.noise_on, seed=args.seed)
    sc = make_scenario(spec)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_cloud(sc.source, args.out_dir / "source.xyz")
    save_cloud(sc.target, args.out_dir / "target.xyz")
    write_truth(args.out_dir / "truth.json", sc.source, sc.target, "source.xyz", "target.xyz",
                sc.truth)
    print(f"wrote {args.out_dir}: {sc.source.n} source, {sc.target.n} target points, "
          f"zeta={sc.zeta}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    try:
        doc = json.loads(args.report.read_text(encoding="utf-8"))
        model = DeformationModel.from_dict(doc["model"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ContractError(f"{args.report}: not a registration report ({exc})") from None
    source, target, _ = read_truth(args.truth)
    err = truth_error(model, source, target)
    print(f"{err:.17g}")
    return EXIT_OK


def run_cli(argv=None) -> int:
    """Run the CLI and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        return {"register": _cmd_register, "synth": _cmd_synth, "eval": _cmd_eval}[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
