"""Command-line entry point: ``neurogrow {wave,organize,grow,eval,analyze}``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
Progress goes to standard error and ``run.log``; data goes to files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, ExperimentConfig
from .errors import FormatError, NumericOverflowError, SingularSystemError, SizeLimitError
from .io import close_logger, run_logger, write_manifest

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _csv(kind):
    def parse(text: str):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__}s: {text!r}")
    return parse


def _global_flags(defaults_suppressed: bool) -> argparse.ArgumentParser:
    # The same flags are attached to the main parser and every subcommand so
    # they may appear before or after the subcommand name.
    p = argparse.ArgumentParser(add_help=False)
    kw = {"default": argparse.SUPPRESS} if defaults_suppressed else {}
    p.add_argument("--config", help="YAML experiment config", **kw)
    p.add_argument("--seed", type=int, help="global seed", **kw)
    p.add_argument("--out", help="output directory (default: <config out>/<command>)", **kw)
    p.add_argument("--threads", type=int, help="worker threads for parallel kernels", **kw)
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures", **kw)
    p.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr", **kw)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurogrow", parents=[_global_flags(False)],
        description="Grow, self-organise and evaluate two-layer pooling networks.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _global_flags(True)

    p = sub.add_parser("wave", parents=[common], help="spontaneous waves in layer I")
    p.add_argument("--steps", type=int)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--mask", help="layer mask file ('#'/'.' text or JSON 0/1)")

    p = sub.add_parser("organize", parents=[common], help="self-organise pooling units")
    p.add_argument("--steps", type=int)
    p.add_argument("--units", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--mask")
    p.add_argument("--init-scheme", choices=["uniform-full", "spatially-biased"])
    p.add_argument("--ablate", action="store_true",
                   help="after organising, ablate a contiguous block and continue")
    p.add_argument("--ablate-file", help="node ids to ablate (implies --ablate)")
    p.add_argument("--post-steps", type=int, help="steps after ablation")
    p.add_argument("--inhibition-radius", type=_csv(float), metavar="R[,R...]",
                   help="sweep these inhibition radii over --seeds")
    p.add_argument("--seeds", type=_csv(int), metavar="S[,S...]",
                   help="run several seeds (with --inhibition-radius: the sweep's seed set)")

    p = sub.add_parser("grow", parents=[common], help="grow a network from one cell")
    p.add_argument("--max-steps", type=int, help="sweep cap")
    p.add_argument("--scaffold", choices=["rect", "disk"])
    p.add_argument("--scaffold-size", type=_csv(float), metavar="W,H|R")
    p.add_argument("--scaffold-file")
    p.add_argument("--post-steps", type=int, help="self-organisation steps after growth")

    p = sub.add_parser("eval", parents=[common], help="MNIST readout comparison")
    p.add_argument("--mnist", help="directory with the IDX files (else $MNIST_DIR)")
    p.add_argument("--kinds", type=_csv(str), metavar="K[,K...]")
    p.add_argument("--seeds", type=int, help="networks per kind")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--so-steps", type=int, help="self-organisation steps per network")

    p = sub.add_parser("analyze", parents=[common], help="rate-model and scaling analyses")
    p.add_argument("task", choices=["fixed-points", "stability", "noise", "scaling"])
    p.add_argument("--n", type=int, help="nodes per random layout (fixed points)")
    p.add_argument("--layouts", type=int, help="number of random layouts")
    p.add_argument("--sigma2", type=_csv(float), metavar="S[,S...]", help="noise levels")
    p.add_argument("--rate-seeds", type=_csv(int), metavar="S[,S...]")
    p.add_argument("--rate-steps", type=int)
    p.add_argument("--sizes", type=_csv(int), metavar="N[,N...]")
    p.add_argument("--step-cap", type=int)
    return parser


def _set(d: dict, path: str, value) -> None:
    if value is None:
        return
    block, key = path.split(".")
    d[block][key] = list(value) if isinstance(value, (list, tuple)) else value


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    d = cfg.to_dict()
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    g = lambda name: getattr(args, name, None)  # noqa: E731
    cmd = args.command
    if cmd in ("wave", "organize"):
        _set(d, "topology.rows", g("rows"))
        _set(d, "topology.cols", g("cols"))
        _set(d, "topology.mask_file", g("mask"))
    if cmd == "wave":
        _set(d, "dynamics.steps", g("steps"))
        _set(d, "dynamics.sigma2", g("sigma2"))
    elif cmd == "organize":
        _set(d, "plasticity.steps", g("steps"))
        _set(d, "plasticity.units", g("units"))
        _set(d, "plasticity.init_scheme", g("init_scheme"))
        _set(d, "analysis.ablate_file", g("ablate_file"))
        _set(d, "analysis.post_ablation_steps", g("post_steps"))
        _set(d, "analysis.inhibition_radii", g("inhibition_radius"))
        if g("inhibition_radius"):
            _set(d, "analysis.sweep_seeds", g("seeds"))
    elif cmd == "grow":
        _set(d, "growth.max_steps", g("max_steps"))
        _set(d, "growth.scaffold", g("scaffold"))
        _set(d, "growth.scaffold_size", g("scaffold_size"))
        _set(d, "growth.scaffold_file", g("scaffold_file"))
        _set(d, "growth.post_steps", g("post_steps"))
    elif cmd == "eval":
        _set(d, "eval.mnist_dir", g("mnist"))
        _set(d, "eval.kinds", g("kinds"))
        _set(d, "eval.seeds", g("seeds"))
        _set(d, "eval.n_train", g("n_train"))
        _set(d, "eval.n_test", g("n_test"))
        _set(d, "eval.so_steps", g("so_steps"))
    elif cmd == "analyze":
        _set(d, "analysis.fp_nodes", g("n"))
        _set(d, "analysis.fp_layouts", g("layouts"))
        _set(d, "analysis.rate_sigma2", g("sigma2"))
        _set(d, "analysis.rate_seeds", g("rate_seeds"))
        _set(d, "analysis.rate_steps", g("rate_steps"))
        _set(d, "analysis.scaling_sizes", g("sizes"))
        _set(d, "analysis.scaling_step_cap", g("step_cap"))
    return ExperimentConfig.from_dict(d)


def _validate(args, cfg: ExperimentConfig) -> None:
    cmd = args.command
    if cmd == "wave" and cfg.dynamics.steps < 1:
        raise ConfigError("--steps must be >= 1")
    if cmd == "organize" and cfg.plasticity.steps < 1:
        raise ConfigError("--steps must be >= 1")
    if cmd == "organize" and cfg.plasticity.units < 1:
        raise ConfigError("--units must be >= 1")
    if cmd == "grow" and cfg.growth.max_steps < 1:
        raise ConfigError("--max-steps must be >= 1")
    if cmd == "eval":
        if cfg.eval.seeds < 2:
            raise ConfigError("--seeds must be >= 2 for the comparison statistics")
        ex.canonical_kinds(cfg.eval.kinds)
    if cmd == "analyze":
        a = cfg.analysis
        if args.task in ("fixed-points", "stability") and not 1 <= a.fp_nodes <= 16:
            raise ConfigError("--n must lie in 1..16 for the brute-force oracle")
        if args.task == "scaling" and any(b < a_ for a_, b in zip(a.scaling_sizes,
                                                                 a.scaling_sizes[1:])):
            raise ConfigError("--sizes must be non-decreasing")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def dispatch(args, cfg: ExperimentConfig, out: Path, log) -> dict:
    figures = not getattr(args, "no_figures", False)
    cmd = args.command
    if cmd == "wave":
        return ex.wave_experiment(cfg, out, figures=figures, log=log)
    if cmd == "organize":
        if args.inhibition_radius:
            return ex.inhibition_sweep_experiment(cfg, out, figures=figures, log=log)
        if args.seeds:
            return ex.organize_seeds_experiment(cfg, out, args.seeds, figures=figures, log=log)
        return ex.organize_experiment(cfg, out, ablate=args.ablate or bool(args.ablate_file),
                                      figures=figures, log=log)
    if cmd == "grow":
        return ex.grow_experiment(cfg, out, figures=figures, log=log)
    if cmd == "eval":
        return ex.eval_experiment(cfg, out, figures=figures, log=log)
    task = args.task
    if task in ("fixed-points", "stability"):
        return ex.fixed_points_experiment(cfg, out, figures=figures, log=log)
    if task == "noise":
        return ex.noise_experiment(cfg, out, figures=figures, log=log)
    return ex.scaling_experiment(cfg, out, figures=figures, log=log)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        _validate(args, cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"neurogrow: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    name = args.command if args.command != "analyze" else f"analyze-{args.task}"
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.out) / name
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"neurogrow: error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logger = run_logger(out, verbose=not getattr(args, "quiet", False))
    code = EXIT_OK
    try:
        _set_threads(getattr(args, "threads", None))
        cfg.save(out / "config.yaml")
        logger.info("%s: seed %d, config %s", name, cfg.seed, cfg.hash()[:12])
        summary = dispatch(args, cfg, out, logger.info)
        write_manifest(out, name, cfg.hash(), cfg.seed)
        if args.command == "grow" and not summary.get("converged", True):
            logger.warning("growth did not reach a steady state within the sweep cap")
        logger.info("outputs in %s", out)
    except (NumericOverflowError, SingularSystemError) as exc:
        logger.error("numeric failure: %s", exc)
        code = EXIT_NUMERIC
    except (ConfigError, FormatError, SizeLimitError, FileNotFoundError, ValueError) as exc:
        logger.error("%s", exc)
        code = EXIT_INPUT
    finally:
        close_logger(logger)
    return code


if __name__ == "__main__":
    sys.exit(main())
