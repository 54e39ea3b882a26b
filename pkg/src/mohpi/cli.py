"""Command line: ``mohpi generate | pareto | analyze | plot | dp-loss``.

Exit codes: 0 success, 1 invalid input, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from mohpi import __version__
from mohpi.ablation import AblationOptions, mo_ablation
from mohpi.configspace import load_space
from mohpi.dataset import load_csv, save_csv
from mohpi.errors import ValidationError
from mohpi.fanova import FanovaOptions, mo_fanova
from mohpi.forest import ForestParams
from mohpi.pareto import front_weights, pareto_mask
from mohpi.report import AnalysisReport, build_metadata, parse_json, render_json, render_svg
from mohpi.synthetic import dp_loss, load_problem, sample_runs

log = logging.getLogger("mohpi")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _objectives(text: str) -> List[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    if len(names) != 2:
        raise UsageError("--objectives takes exactly two comma-separated names")
    return names


def _forest_params(args) -> ForestParams:
    return ForestParams(
        n_trees=args.trees,
        mtry=args.mtry,
        min_samples_leaf=args.min_samples_leaf,
        max_depth=args.max_depth,
        bootstrap=not args.no_bootstrap,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trees", type=int, default=100, help="trees per surrogate forest")
    common.add_argument("--mtry", type=int, default=None, help="features tried per split (default d//3)")
    common.add_argument("--min-samples-leaf", type=int, default=1)
    common.add_argument("--max-depth", type=int, default=None)
    common.add_argument("--no-bootstrap", action="store_true")
    common.add_argument("--grid", type=int, default=0, metavar="K",
                        help="add K evenly spaced weightings to the Pareto-derived ones")
    common.add_argument("--invert-weights", action="store_true",
                        help="swap (w1, w2) of every Pareto-derived weighting")
    common.add_argument("--pairwise", action="store_true", help="also report pairwise fANOVA importance")
    common.add_argument("--raw-incumbent", action="store_true",
                        help="pick ablation incumbents on raw instead of normalized objectives")
    common.add_argument("--dump-surrogate", metavar="PATH", help="write fitted forests as JSON")

    data = _Parser(add_help=False)
    data.add_argument("--space", required=True, help="config-space JSON (or bundled name, e.g. mlp_mnist)")
    data.add_argument("--data", required=True, help="meta-dataset CSV")
    data.add_argument("--objectives", required=True, type=_objectives, help="o1,o2")

    parser = _Parser(prog="mohpi", description="Hyperparameter importance for bi-objective HPO runs.")
    parser.add_argument("--version", action="version", version=f"mohpi {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", parents=[common], help="sample a synthetic problem by random search")
    gen.add_argument("--problem", required=True)
    gen.add_argument("--n", type=int, default=1000)
    gen.add_argument("--out", required=True)
    gen.add_argument("--space-out", help="also write the problem's config space")

    par = sub.add_parser("pareto", parents=[common, data], help="print efficient rows and weightings")

    ana = sub.add_parser("analyze", parents=[common, data], help="run MO-fANOVA or MO-ablation")
    ana.add_argument("--method", required=True, choices=["fanova", "ablation"])
    ana.add_argument("--out", required=True, help="output prefix for <out>.json and <out>.svg")
    ana.add_argument("--no-svg", action="store_true")

    plot = sub.add_parser("plot", help="re-render the SVG of an existing report")
    plot.add_argument("report")
    plot.add_argument("--out", help="SVG path (default: report path with .svg)")

    dp = sub.add_parser("dp-loss", help="demographic-parity loss of a predictions CSV")
    dp.add_argument("--data", required=True)
    dp.add_argument("--prediction-column", default="prediction")
    dp.add_argument("--sensitive-column", default="sensitive")
    dp.add_argument("--dp-shared-n", action="store_true", help="divide both group sums by the total count")
    return parser


def cmd_generate(args) -> int:
    problem = load_problem(args.problem)
    ds = sample_runs(problem, args.n, args.seed)
    save_csv(ds, args.out)
    if args.space_out:
        Path(args.space_out).write_text(json.dumps(problem.space.to_dict(), indent=2) + "\n", encoding="utf-8")
    log.info("wrote %d runs to %s", ds.n, args.out)
    return EXIT_OK


def _load(args):
    space = load_space(args.space)
    ds = load_csv(args.data, space, args.objectives)
    weights = front_weights(ds.normalized(), invert=args.invert_weights, grid=args.grid)
    return space, ds, weights


def cmd_pareto(args) -> int:
    _, ds, weights = _load(args)
    norm = ds.normalized()
    mask = pareto_mask(norm)
    rows = [int(i) for i in np.flatnonzero(mask)]
    out = {
        "objectives": ds.objective_names,
        "efficient_rows": rows,
        "points": [[float(ds.objectives[0].raw[i]), float(ds.objectives[1].raw[i])] for i in rows],
        "normalized": [[float(norm[i, 0]), float(norm[i, 1])] for i in rows],
        "weights": [w.to_dict() for w in weights],
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    space, ds, weights = _load(args)
    params = _forest_params(args)
    meta = build_metadata(
        args.data, space.name, ds.objective_names,
        hyperparameters=space.names,
        invert_weights=args.invert_weights,
        grid=args.grid,
    )
    surrogates: list = []
    if args.method == "fanova":
        meta["pairwise"] = args.pairwise
        curves = mo_fanova(ds, FanovaOptions(params, pairwise=args.pairwise, weights=weights), surrogates=surrogates)
        report = AnalysisReport("mo-fanova", meta, weights, params, args.seed, curves=curves)
        labels = [{"w1": w.w1, "w2": w.w2} for w in sorted(weights, key=lambda w: w.w1)]
    else:
        meta["raw_incumbent"] = args.raw_incumbent
        paths = mo_ablation(ds, AblationOptions(params, weights, args.raw_incumbent), surrogates=surrogates)
        report = AnalysisReport("mo-ablation", meta, weights, params, args.seed, paths=paths)
        labels = [{"objective": name} for name in ds.objective_names]

    out = Path(args.out)
    json_path = out.with_name(out.name + ".json")
    json_path.write_text(render_json(report), encoding="utf-8")
    if not args.no_svg:
        out.with_name(out.name + ".svg").write_text(render_svg(report), encoding="utf-8")
    if args.dump_surrogate:
        doc = {
            "format": "mohpi-surrogates",
            "version": 1,
            "method": report.method,
            "forests": [dict(label, forest=f.to_dict()) for label, f in zip(labels, surrogates)],
        }
        Path(args.dump_surrogate).write_text(json.dumps(doc, separators=(",", ":")), encoding="utf-8")
    log.info("wrote %s", json_path)
    return EXIT_OK


def cmd_plot(args) -> int:
    report = parse_json(Path(args.report).read_text(encoding="utf-8"))
    target = Path(args.out) if args.out else Path(args.report).with_suffix(".svg")
    target.write_text(render_svg(report), encoding="utf-8")
    return EXIT_OK


def cmd_dp_loss(args) -> int:
    with open(args.data, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    try:
        y = [float(r[args.prediction_column]) for r in rows]
        s = [float(r[args.sensitive_column]) for r in rows]
    except KeyError as exc:
        raise ValidationError(f"missing column {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    sys.stdout.write(f"{dp_loss(y, s, shared_n=args.dp_shared_n)!r}\n")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "pareto": cmd_pareto,
    "analyze": cmd_analyze,
    "plot": cmd_plot,
    "dp-loss": cmd_dp_loss,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
