"""Command-line harness.

Subcommands:

- ``generate``: write a synthetic two-view dataset to CSV files
- ``embed``: spectral-embed a view file
- ``cluster``: constrained K-Means on one view
- ``coem``: two-view co-EM with constraint propagation
- ``experiment``: full trial loop over counts and mapping fractions

``experiment`` reads a flat key=value config file; command-line flags
override config values. Exit code 0 on full success, 2 when some cells
failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import coem, data, embedding, experiment
from .ckmeans import ClusteringConfig, cluster
from .model import ConstraintSet


def _cmd_generate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset != "four-quadrants":
        raise SystemExit(f"unknown dataset {args.dataset!r}")
    view_a, view_b, rel = data.gen_four_quadrants(args.seed, args.per_quadrant)
    data.write_view(view_a, out / "view_a.csv")
    data.write_view(view_b, out / "view_b.csv")
    data.write_relations(rel, out / "relations.csv")
    print(f"wrote {out}/view_a.csv, view_b.csv, relations.csv")
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    view = data.read_view(args.view)
    dims = args.dims or embedding.default_out_dims(view.dim)
    cfg = embedding.EmbeddingConfig(sigma=args.sigma, out_dims=dims)
    embedded, reports = embedding.spectral_embed(view, cfg)
    for line in reports:
        print(f"note: {line}", file=sys.stderr)
    data.write_view(embedded, args.out)
    print(f"wrote {args.out} ({embedded.n} x {embedded.dim})")
    return 0


def _write_assignment(assignment: dict[str, int], path: Path) -> None:
    with path.open("w") as fh:
        fh.write("id,cluster\n")
        for iid in sorted(assignment):
            fh.write(f"{iid},{assignment[iid]}\n")


def _cmd_cluster(args: argparse.Namespace) -> int:
    view = data.read_view(args.view)
    constraints = (
        data.read_constraints(args.constraints, set(view.instance_ids))
        if args.constraints
        else ConstraintSet()
    )
    config = ClusteringConfig(
        k=args.k, variant=args.variant, seed=args.seed, epsilon=args.epsilon
    )
    run = cluster(view, constraints, config)
    _write_assignment(run.model.assignment, Path(args.out))
    print(
        f"objective {run.objective:.6g} after {len(run.objective_trace)} "
        f"iterations; wrote {args.out}"
    )
    return 0


def _cmd_coem(args: argparse.Namespace) -> int:
    view_a = data.read_view(args.view_a, "A")
    view_b = data.read_view(args.view_b, "B")
    constraints = {
        "A": data.read_constraints(args.constraints_a, set(view_a.instance_ids)),
        "B": data.read_constraints(args.constraints_b, set(view_b.instance_ids)),
    }
    relations = data.read_relations(
        args.relations, "A", "B", set(view_a.instance_ids), set(view_b.instance_ids)
    )
    config = coem.CoEmConfig(
        thresholds={"A": args.t_a, "B": args.t_b},
        clustering=ClusteringConfig(
            k=args.k, variant=args.variant, seed=args.seed, epsilon=args.epsilon
        ),
        max_outer_iters=args.max_outer_iters,
    )
    result = coem.run_two_view(view_a, view_b, constraints, relations, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for v, run in result.models.items():
        _write_assignment(run.model.assignment, out / f"assignment_{v}.csv")
        data.write_constraints(result.propagated[v], out / f"propagated_{v}.csv")
    for conflict in result.conflicts:
        print(
            "conflict: must-link path joins cannot-link endpoints "
            f"{conflict.constraint.a}, {conflict.constraint.b}",
            file=sys.stderr,
        )
    print(
        f"converged in {result.outer_iterations} outer iterations"
        + (" (forced stop)" if result.forced_stop else "")
    )
    return 0


_CONFIG_KEYS = """
dataset            four-quadrants | file
name               dataset label (default: generator name)
seed               dataset generation seed
per_quadrant       draws per Gaussian for four-quadrants (default 50)
view_a, view_b     view CSV paths (dataset=file)
relations          relation CSV path (dataset=file)
methods            comma list from: cp,direct,cluster-membership,single-view,single-view-cp
counts             comma list of even constraint counts
fractions          comma list of mapping fractions in [0,1]
trials             trials per cell
base_seed          base seed; per-trial seed = base_seed + trial index
k                  number of clusters
variant            pck | mpck
t                  default propagation threshold
t_<view>           per-view threshold override
embed              true | false
embed_dims         embedding dimensionality (default ceil(sqrt(d)))
embed_sigma        affinity bandwidth
"""


def _parse_experiment_config(
    values: dict[str, str], overrides: argparse.Namespace
) -> experiment.ExperimentConfig:
    def get(key: str, default: str) -> str:
        over = getattr(overrides, key, None)
        if over is not None:
            return str(over)
        return values.get(key, default)

    generator = get("dataset", "four-quadrants")
    if generator == "four-quadrants":
        spec = data.DatasetSpec(
            name=values.get("name", "four-quadrants"),
            generator="four-quadrants",
            seed=int(get("seed", "0")),
            per_quadrant=int(get("per_quadrant", "50")),
        )
    elif generator == "file":
        spec = data.DatasetSpec(
            name=values.get("name", "file"),
            generator="file",
            view_files={"A": values["view_a"], "B": values["view_b"]},
            relation_file=values.get("relations"),
        )
    else:
        raise SystemExit(f"unknown dataset {generator!r}")

    thresholds = {
        key[2:]: float(v) for key, v in values.items() if key.startswith("t_")
    }
    return experiment.ExperimentConfig(
        dataset=spec,
        methods=get("methods", "cp,direct,single-view").split(","),
        constraint_counts=[int(x) for x in get("counts", "20,40,60").split(",")],
        mapping_fractions=[float(x) for x in get("fractions", "0.2,0.4,1.0").split(",")],
        trials=int(get("trials", "25")),
        base_seed=int(get("base_seed", "0")),
        k=int(get("k", "2")),
        variant=get("variant", "pck"),
        thresholds=thresholds,
        default_threshold=float(get("t", "0.75")),
        embed=get("embed", "false").lower() in ("true", "1", "yes"),
        embed_dims=int(values["embed_dims"]) if "embed_dims" in values else None,
        embed_sigma=float(get("embed_sigma", "1.0")),
    )


def _cmd_experiment(args: argparse.Namespace) -> int:
    values = data.read_spec_file(args.config) if args.config else {}
    config = _parse_experiment_config(values, args)
    report = experiment.run_experiment(config)
    experiment.write_report(report, args.out, figures=not args.no_figures)
    print(f"wrote raw.csv, summary.csv, summary.txt under {args.out}")
    if report.n_failures:
        print(f"{report.n_failures} cells failed; see summary.txt", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvclust", description="multi-view constrained clustering toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--dataset", default="four-quadrants")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-quadrant", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("embed", help="spectral-embed a view")
    p.add_argument("--view", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--dims", type=int, default=None)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("cluster", help="constrained K-Means on one view")
    p.add_argument("--view", required=True)
    p.add_argument("--constraints", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--variant", choices=("pck", "mpck"), default="pck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("coem", help="two-view co-EM with constraint propagation")
    p.add_argument("--view-a", required=True)
    p.add_argument("--view-b", required=True)
    p.add_argument("--constraints-a", required=True)
    p.add_argument("--constraints-b", required=True)
    p.add_argument("--relations", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--variant", choices=("pck", "mpck"), default="pck")
    p.add_argument("--t-a", type=float, default=0.75)
    p.add_argument("--t-b", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-outer-iters", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_coem)

    p = sub.add_parser(
        "experiment",
        help="trial loop over constraint counts and mapping fractions",
        epilog="config keys:\n" + _CONFIG_KEYS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--methods", default=None)
    p.add_argument("--counts", default=None)
    p.add_argument("--fractions", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--base-seed", type=int, dest="base_seed", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--variant", choices=("pck", "mpck"), default=None)
    p.add_argument("--t", type=float, default=None)
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
