"""Command-line entry point: ``tedecomp <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import InputError, TeDecompError
from .io import load_csv, load_system_config, parse_list, records_to_csv
from .knn import DEFAULT_K, SampleBlock, cmi_knn
from .pipeline import ExperimentConfig, compute, load_experiment_config, run_experiment, validate

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    p.add_argument("--k", type=int, default=argparse.SUPPRESS,
                   help=f"nearest neighbours (default {DEFAULT_K})")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="worker threads for batched estimates (default 1)")
    p.add_argument("--out-dir", default=argparse.SUPPRESS,
                   help="directory for outputs and manifests (default .)")
    return p


def _embedding(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=2, help="embedding dimension")
    p.add_argument("--lag", type=int, default=1, help="spacing between embedded samples")
    p.add_argument("--horizon", type=int, default=1, help="source prediction offset")
    p.add_argument("--normalize", action="store_true", help="z-score every coordinate first")


def _policy(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lags", default="1..8", help="candidate lags of S, e.g. 1..8 or 1,2,5")
    p.add_argument("--max-size", type=int, default=3, help="largest subset size")
    p.add_argument("--mode", choices=["exhaustive", "greedy"], default="exhaustive")
    p.add_argument("--exhaustive-limit", type=int, default=12)
    p.add_argument("--bias-matched", dest="bias_matched", action="store_true", default=True,
                   help="compare against late-past S samples (default)")
    p.add_argument("--no-bias-matched", dest="bias_matched", action="store_false")
    p.add_argument("--T", default="auto", help="late-past offset in samples, or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="tedecomp",
        description="Synergy/redundancy decomposition of transfer entropy.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a coupled system to CSV")
    p.add_argument("--config", required=True, help="system config file")
    p.add_argument("--n", type=int, help="number of samples (overrides config)")
    p.add_argument("--out", default="panel.csv")

    p = sub.add_parser("theorem1", parents=[common], help="exact AND-gate information curve")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out", default="curve.csv")

    p = sub.add_parser("cmi", parents=[common], help="k-NN (conditional) mutual information")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--x", required=True, help="comma-separated columns")
    p.add_argument("--y", required=True, help="comma-separated columns")
    p.add_argument("--z", default="", help="comma-separated conditioning columns")
    p.add_argument("--normalize", action="store_true")

    p = sub.add_parser("te", parents=[common], help="causally conditioned transfer entropy")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--cond", default="", help="channels whose embedded past is conditioned on")
    p.add_argument("--cond-lags", default="", help="explicit lags, e.g. S:1,2;R:5")
    p.add_argument("--out", help="also write the record (and a manifest) here")
    _embedding(p)

    p = sub.add_parser("decomp", parents=[common], help="synergy/redundancy subset search")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--cond", default="")
    p.add_argument("--s", required=True, help="conditioning series searched over")
    p.add_argument("--dead-band", type=float, default=0.03)
    p.add_argument("--out", default="decomp.csv")
    _policy(p)
    _embedding(p)

    p = sub.add_parser("dtau", parents=[common], help="delay scan of pair-summed TE")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--cond-set", required=True)
    p.add_argument("--tau", required=True, help="e.g. 1..100")
    p.add_argument("--out", default="dtau.csv")
    _embedding(p)

    p = sub.add_parser("pairwise-syn", parents=[common],
                       help="per-channel synergy of conditioner A versus B")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--a", required=True, help="conditioner A")
    p.add_argument("--b", required=True, help="conditioner B")
    p.add_argument("--channels", required=True)
    p.add_argument("--out", default="pairwise_syn.csv")
    _policy(p)
    _embedding(p)

    p = sub.add_parser("run", parents=[common], help="run an experiment config or manifest")
    p.add_argument("--config", required=True)
    return parser


def _globals(args) -> dict:
    return {
        "seed": getattr(args, "seed", 0),
        "k": getattr(args, "k", DEFAULT_K),
        "threads": getattr(args, "threads", 1),
        "out_dir": getattr(args, "out_dir", "."),
    }


def _outputs(args, out: str, kind: str, extra: dict = None) -> tuple[str, dict]:
    out = Path(out)
    out_dir = Path(_globals(args)["out_dir"]) / out.parent
    main = {"simulate": "panel", "theorem1": "curve", "te": "record", "decomp": "summary",
            "dtau": "table", "pairwise-syn-map": "table"}[kind]
    outputs = {main: out.name}
    for name, suffix in (extra or {}).items():
        outputs[name] = f"{out.stem}.{suffix}{out.suffix or '.csv'}"
    return str(out_dir), outputs


def _embed_params(args) -> dict:
    return {"dim": args.dim, "lag": args.lag, "horizon": args.horizon,
            "normalize": args.normalize}


def _policy_params(args) -> dict:
    return {"lags": args.lags, "max_size": args.max_size, "mode": args.mode,
            "exhaustive_limit": args.exhaustive_limit, "bias_matched": args.bias_matched,
            "T": args.T}


def _config_from_args(args) -> ExperimentConfig:
    g = _globals(args)
    cmd = args.command
    if getattr(args, "input", None):
        args.input = str(Path(args.input).resolve())
    if cmd == "run":
        config = load_experiment_config(args.config)
        for key in ("seed", "k", "threads", "out_dir"):
            if hasattr(args, key):
                setattr(config, key, getattr(args, key))
        return ExperimentConfig.from_dict(config.to_dict())
    if cmd == "simulate":
        system = load_system_config(args.config)
        changes = {}
        if args.n is not None:
            changes["n_samples"] = args.n
        if hasattr(args, "seed"):
            changes["seed"] = args.seed
        system = system.with_(**changes)
        out_dir, outputs = _outputs(args, args.out, "simulate")
        return ExperimentConfig("simulate", {}, g["seed"], g["k"], g["threads"], None, system,
                                out_dir, outputs)
    if cmd == "theorem1":
        out_dir, outputs = _outputs(args, args.out, "theorem1")
        return ExperimentConfig("theorem1", {"grid": args.grid}, g["seed"], g["k"], g["threads"],
                                None, None, out_dir, outputs)
    if cmd == "te":
        params = {"source": args.source, "target": args.target, "cond": args.cond,
                  "cond_lags": args.cond_lags, **_embed_params(args)}
        out_dir, outputs = _outputs(args, args.out or "te.csv", "te")
        return ExperimentConfig("te", params, g["seed"], g["k"], g["threads"], args.input, None,
                                out_dir, outputs)
    if cmd == "decomp":
        params = {"source": args.source, "target": args.target, "cond": args.cond, "s": args.s,
                  "dead_band": args.dead_band, **_policy_params(args), **_embed_params(args)}
        out_dir, outputs = _outputs(args, args.out, "decomp", {"subsets": "subsets"})
        return ExperimentConfig("decomp", params, g["seed"], g["k"], g["threads"], args.input,
                                None, out_dir, outputs)
    if cmd == "dtau":
        params = {"pairs": args.pairs, "cond_set": args.cond_set, "tau": args.tau,
                  **_embed_params(args)}
        out_dir, outputs = _outputs(args, args.out, "dtau")
        return ExperimentConfig("dtau", params, g["seed"], g["k"], g["threads"], args.input, None,
                                out_dir, outputs)
    if cmd == "pairwise-syn":
        params = {"conditioner_a": args.a, "conditioner_b": args.b, "channels": args.channels,
                  **_policy_params(args), **_embed_params(args)}
        out_dir, outputs = _outputs(args, args.out, "pairwise-syn-map", {"summary": "summary"})
        return ExperimentConfig("pairwise-syn-map", params, g["seed"], g["k"], g["threads"],
                                args.input, None, out_dir, outputs)
    raise InputError(f"unknown command {cmd!r}")  # pragma: no cover


def _run_cmi(args) -> None:
    g = _globals(args)
    panel = load_csv(args.input)
    groups = [parse_list(args.x), parse_list(args.y), parse_list(args.z)]
    if not groups[0] or not groups[1]:
        raise InputError("--x and --y need at least one column each")
    flat = [c for grp in groups for c in grp]
    if len(set(flat)) != len(flat):
        raise InputError("--x, --y and --z must not share columns")
    panel.require(*flat)
    block = SampleBlock.from_groups(*[panel.select(grp).data.T if grp else None for grp in groups])
    est = cmi_knn(block, g["k"], seed=g["seed"], normalize=args.normalize)
    rec = est.as_record()
    rec.update({"x": args.x, "y": args.y, "z": args.z})
    sys.stdout.write(records_to_csv([rec]))


def _fail(kind: str, exc: BaseException) -> None:
    line = json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)})
    print(line, file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        if args.command == "cmi":
            _run_cmi(args)
            return EXIT_OK
        config = _config_from_args(args)
        if args.command == "te" and args.out is None:
            panel = validate(config)
            texts, _, _ = compute(config, panel)
            sys.stdout.write(texts["record"])
            return EXIT_OK
        report = run_experiment(config)
        if args.command == "te":
            sys.stdout.write(Path(report.outputs["record"]).read_text())
        else:
            for path in report.outputs.values():
                print(path)
            print(report.manifest)
        return EXIT_OK
    except InputError as exc:
        _fail("validation", exc)
        return EXIT_VALIDATION
    except (TeDecompError, OSError, ArithmeticError, RuntimeError) as exc:
        _fail("runtime", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
