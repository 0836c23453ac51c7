"""Command-line entry point.

Every pipeline stage is its own subcommand and hands off through files under
``--out``; ``pipeline`` chains them all. Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import BcmParams, DataError, NumericalError, ParameterError
from .dynamics import GroupScheme, InteractionMode, converged, simulate
from .io import (
    PLOT_KINDS,
    SynthSpec,
    emit_plot_data,
    generate_synthetic,
    load_trajectories,
    save_ground_truth,
    save_trajectories,
)
from .labeling import load_dataset, save_dataset
from .pipeline import (
    Forecast,
    RunConfig,
    StageError,
    dump_json,
    evaluate_model,
    fit_stage,
    forecast_accuracy,
    forecast_network,
    forecasts_csv,
    label_stage,
    next_segment_truth,
    run_pipeline,
    split_stage,
    tune_stage,
)
from .pso import GenerationRecord, history_csv, load_pso_document
from .regress import RegressorSpec, load_model, save_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("valuedyn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="run configuration JSON")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    g.add_argument("--mu", type=float, default=argparse.SUPPRESS, help="convergence factor")
    g.add_argument("--delta", type=float, default=argparse.SUPPRESS, help="label margin")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = _Parser(prog="valuedyn", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = add("synth", "generate a synthetic corpus with known thresholds")
    p.add_argument("--networks", type=int, default=275)
    p.add_argument("--alters", type=int, default=5)
    p.add_argument("--segments", type=int, default=20)
    p.add_argument("--sigma", type=float, nargs="+", default=[0.1, 0.9],
                   metavar="S", help="fixed threshold, or LO HI for a per-network uniform draw")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--mode", default="ego-only")
    p.add_argument("--scheme", default="sequential")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = add("simulate", "run BCM dynamics on loaded networks")
    p.add_argument("--input", required=True)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--mode", default="ego-only")
    p.add_argument("--scheme", default="sequential")
    p.add_argument("--segment", type=int, default=None, help="start segment (default: first)")
    p.add_argument("--tolerance", type=float, default=1e-6)

    p = add("label", "build the sigma-regression dataset")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--interpolate", action="store_true", help="fill interior segment gaps")

    p = add("tune", "PSO hyperparameter search for one regressor family")
    p.add_argument("--dataset", required=True)
    p.add_argument("--family", default="svr")
    p.add_argument("--pso-config", help="JSON with optional 'pso' and 'spaces' sections")
    p.add_argument("--max-train-samples", type=int, default=None)

    p = add("fit", "fit a regressor on the training split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--spec", required=True, help="best_spec.json from 'tune'")
    p.add_argument("--max-train-samples", type=int, default=None)

    p = add("forecast", "forecast each ego's next-segment profile")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--next", help="trajectories of the following segment, added as a truth column")
    p.add_argument("--mode", default=None)
    p.add_argument("--scheme", default=None)

    p = add("evaluate", "test-split MSE and, optionally, forecast accuracy")
    p.add_argument("--dataset")
    p.add_argument("--model")
    p.add_argument("--forecasts", help="forecasts.csv with a truth column")

    p = add("plot-data", "emit CSV for external plotting")
    p.add_argument("--kind", required=True, choices=PLOT_KINDS)
    p.add_argument("--input", required=True,
                   help="tune.json (hyperparam-variation), metrics.json (model-loss) "
                        "or forecasts.csv with truth (actual-vs-predicted)")

    p = add("pipeline", "run every stage end to end")
    p.add_argument("--input", nargs="+")
    p.add_argument("--next", help="trajectories of the following segment, to score forecasts")
    p.add_argument("--families", nargs="+")
    p.add_argument("--primary-family")
    p.add_argument("--max-train-samples", type=int)
    p.add_argument("--pso-config")
    p.add_argument("--interpolate", action="store_true", default=None)
    p.add_argument("--mode")
    p.add_argument("--scheme")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {k: getattr(args, k) for k in ("seed", "out", "mu", "delta") if hasattr(args, k)}
    for key in ("max_train_samples", "primary_family", "mode", "scheme", "interpolate"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "families", None):
        overrides["families"] = tuple(args.families)
    if getattr(args, "pso_config", None):
        pso, spaces = load_pso_document(args.pso_config)
        if pso is not None:
            overrides["pso"] = pso
        overrides["spaces"] = {**cfg.spaces, **spaces}
    return replace(cfg, **overrides)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_all(paths, interpolate=False):
    nets = [n for p in paths for n in load_trajectories(p, interpolate=interpolate)]
    if not nets:
        raise DataError("no networks loaded")
    return nets


def cmd_synth(args, cfg):
    sigma = args.sigma[0] if len(args.sigma) == 1 else tuple(args.sigma[:2])
    if len(args.sigma) > 2:
        raise UsageError("--sigma takes one value or LO HI")
    spec = SynthSpec(args.networks, args.alters, args.segments, cfg.mu, sigma, args.noise,
                     args.mode, args.scheme, cfg.seed)
    result = generate_synthetic(spec)
    out = _outdir(cfg)
    save_trajectories(result.networks, out / f"trajectories.{args.format}")
    save_trajectories(result.next_segment, out / f"next_segment.{args.format}")
    save_ground_truth(result.truth, out / "ground_truth.csv")
    dump_json(spec.to_dict(), out / "synth_spec.json")
    print(f"wrote {len(result.networks)} networks to {out}")


def cmd_simulate(args, cfg):
    params = BcmParams(cfg.mu, args.sigma)
    mode, scheme = InteractionMode.parse(args.mode), GroupScheme.parse(args.scheme)
    out = _outdir(cfg)
    nets = load_trajectories(args.input)
    if not nets:
        raise DataError("no networks loaded")
    with (out / "trace.csv").open("w", newline="", encoding="utf-8") as fh, \
            (out / "simulate_summary.csv").open("w", newline="", encoding="utf-8") as sh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ego_id", "step", "user_id", "dimension", "score"])
        sw = csv.writer(sh, lineterminator="\n")
        sw.writerow(["ego_id", "steps", "final_spread", "converged"])
        for net in nets:
            traces = simulate(net, params, mode, scheme, args.steps, cfg.seed, args.segment)
            for tr in traces:
                for u, user in enumerate(tr.user_ids):
                    for d, dim in enumerate(tr.profile(user).as_dict()):
                        w.writerow([net.ego_id, tr.step, user, dim, repr(float(tr.snapshot[u, d]))])
            ok, spread = converged(traces, args.tolerance)
            sw.writerow([net.ego_id, args.steps, repr(spread), ok])
            print(f"{net.ego_id}: final spread {spread:.3g} ({'converged' if ok else 'not converged'}"
                  f" at tolerance {args.tolerance:g})")


def cmd_label(args, cfg):
    nets = _load_all(args.input, args.interpolate)
    d = label_stage(nets, cfg)
    out = _outdir(cfg)
    save_dataset(d, out / "dataset.csv")
    print(f"wrote {len(d)} tuples from {len(d.egos())} egos to {out / 'dataset.csv'}")


def cmd_tune(args, cfg):
    d = load_dataset(args.dataset)
    split = split_stage(d, cfg)
    outcome = tune_stage(split, args.family, cfg)
    out = _outdir(cfg)
    dump_json(outcome.spec.to_dict(), out / "best_spec.json")
    (out / "pso_history.csv").write_text(history_csv(outcome.result), encoding="utf-8")
    dump_json({
        "family": outcome.family,
        "best_spec": outcome.spec.to_dict(),
        "validation_mse": outcome.validation_mse,
        "history": [{"generation": r.generation, "best_fitness": r.best_fitness,
                     "best_params": r.best_params} for r in outcome.result.history],
    }, out / "tune.json")
    print(f"{outcome.family}: validation MSE {outcome.validation_mse:.6g} with {outcome.spec.params}")


def cmd_fit(args, cfg):
    d = load_dataset(args.dataset)
    spec = RegressorSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    split = split_stage(d, cfg)
    model = fit_stage(split, spec, cfg)
    out = _outdir(cfg)
    save_model(model, out / "model.json")
    print(f"wrote {spec.family} model to {out / 'model.json'}")


def cmd_forecast(args, cfg):
    nets = _load_all(args.input)
    model = load_model(args.model)
    mode = args.mode or cfg.mode
    scheme = args.scheme or cfg.scheme
    forecasts = [forecast_network(model, n, cfg.mu, mode, scheme) for n in nets]
    truth = next_segment_truth(load_trajectories(args.next)) if args.next else None
    out = _outdir(cfg)
    (out / "forecasts.csv").write_text(forecasts_csv(forecasts, truth), encoding="utf-8")
    print(f"wrote {len(forecasts)} ego forecasts to {out / 'forecasts.csv'}")


def _read_forecasts(path):
    rows = list(csv.DictReader(Path(path).open(encoding="utf-8", newline="")))
    if not rows or "truth" not in rows[0]:
        raise DataError(f"{path}: need forecasts with a truth column")
    return rows


def cmd_evaluate(args, cfg):
    if not (args.dataset and args.model) and not args.forecasts:
        raise UsageError("evaluate needs --dataset and --model, and/or --forecasts")
    report = {}
    if args.dataset and args.model:
        split = split_stage(load_dataset(args.dataset), cfg)
        value, _ = evaluate_model(load_model(args.model), split.test)
        report["test_mse"] = value
    if args.forecasts:
        rows = _read_forecasts(args.forecasts)
        by_ego: dict = {}
        for r in rows:
            by_ego.setdefault(r["ego_id"], []).append(r)
        fcs = [Forecast(e, int(rs[0]["segment"]), np.array([float(r["current"]) for r in rs]),
                        np.array([float(r["forecast"]) for r in rs]), np.zeros(0), 0)
               for e, rs in by_ego.items()]
        truth = {e: np.array([float(r["truth"]) for r in rs]) for e, rs in by_ego.items()}
        report["forecast"] = forecast_accuracy(fcs, truth)
    out = _outdir(cfg)
    dump_json(report, out / "evaluation.json")
    print(json.dumps(report, indent=1, sort_keys=True))


def cmd_plot_data(args, cfg):
    path = Path(args.input)
    if args.kind == "hyperparam-variation":
        doc = json.loads(path.read_text(encoding="utf-8"))
        inputs = [GenerationRecord(h["generation"], h["best_fitness"], h["best_params"])
                  for h in doc.get("history", [])]
    elif args.kind == "model-loss":
        doc = json.loads(path.read_text(encoding="utf-8"))
        inputs = {f: m["test_mse"] for f, m in doc.get("families", {}).items()}
    else:
        rows = _read_forecasts(path)
        inputs = ([float(r["truth"]) for r in rows], [float(r["forecast"]) for r in rows])
    out = _outdir(cfg)
    target = out / f"plot_{args.kind.replace('-', '_')}.csv"
    target.write_text(emit_plot_data(args.kind, inputs), encoding="utf-8")
    print(f"wrote {target}")


def cmd_pipeline(args, cfg):
    if args.input:
        cfg = replace(cfg, inputs=list(args.input))
    if args.next:
        cfg = replace(cfg, next_segment=args.next)
    if not cfg.inputs:
        raise UsageError("pipeline needs --input (or 'inputs' in --config)")
    result = run_pipeline(cfg)
    m = result.metrics
    print(f"test MSE ({m['primary_family']}): {m['test_mse']:.6g}")
    for fam, fm in m["families"].items():
        print(f"  {fam:<10} validation {fm['validation_mse']:.6g}  test {fm['test_mse']:.6g}")
    if "forecast" in m:
        fa = m["forecast"]["all_egos"]
        print(f"forecasts within {fa['tolerance']}: {fa['within_tolerance']:.1%} of {fa['pairs']} pairs")
    print(f"artifacts in {result.out}")


COMMANDS = {
    "synth": cmd_synth, "simulate": cmd_simulate, "label": cmd_label, "tune": cmd_tune,
    "fit": cmd_fit, "forecast": cmd_forecast, "evaluate": cmd_evaluate,
    "plot-data": cmd_plot_data, "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", 0) > 1
                            else logging.INFO if getattr(args, "verbose", 0) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code_for(exc.cause)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _code_for(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


def _code_for(exc):
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (DataError, FileNotFoundError, json.JSONDecodeError)):
        return EXIT_DATA
    if isinstance(exc, (ParameterError, UsageError)):
        return EXIT_USAGE
    if isinstance(exc, (np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERICAL
    return EXIT_DATA if isinstance(exc, StageError) else None


if __name__ == "__main__":
    sys.exit(main())
