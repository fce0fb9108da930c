"""Command-line front end.

Subcommands: run (full degree test on a cohort manifest), simulate
(synthetic benchmark from a design file), null (moment summary and null
networks from a difference network), enrich (module-pair enrichment of an
adjacency). Seeds are mandatory in manifests; nothing draws from wall-clock
entropy, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import binomial_corrected, degree_ttest
from .core import (
    AdjacencyMatrix,
    DdtError,
    DifferenceNetwork,
    P_MIN,
    SymmetricMatrix,
    ValidationError,
)
from .degree_test import PipelineError, ddt_run
from .enrichment import NoSelectedEdgesError, enrichment_test
from .hqs import MomentSummary, NonpositiveMeanError, generate_null, observed_moments
from .io import (
    ManifestError,
    load_cohort,
    load_design,
    load_json,
    load_partition,
    parse_test_config,
    parse_threshold_rule,
    read_matrix_csv,
    write_enrichment_csv,
    write_gamma_json,
    write_json,
    write_matrix_csv,
    write_metrics_csv,
    write_moments_json,
    write_nodes_csv,
    write_null_networks,
    write_replicates_csv,
)
from .simulate import run_experiment

EXIT_OK = 0
EXIT_INPUT = 2       # missing/invalid files, manifests, usage
EXIT_PIPELINE = 3    # domain errors raised by the statistics themselves

BASELINE_NAMES = ("t10", "binb", "binf")


def _error_json(kind: str, message: str, **extra) -> str:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    return json.dumps(payload, sort_keys=True)


def _fail(code: int, kind: str, message: str, **extra) -> int:
    print(_error_json(kind, message, **extra), file=sys.stderr)
    return code


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("DDT_THREADS")
    if env and env.isdigit():
        return max(1, int(env))
    return os.cpu_count() or 1


def cmd_run(args) -> int:
    t_start = time.perf_counter()
    manifest_path = Path(args.manifest)
    manifest = load_json(manifest_path)
    base_dir = manifest_path.parent

    if "seed" not in manifest and args.seed is None:
        raise ManifestError("manifest must carry a seed (or pass --seed); "
                            "runs never draw implicit entropy")
    seed = int(args.seed if args.seed is not None else manifest["seed"])
    cohort_block = manifest.get("cohort", manifest)
    cohort = load_cohort(cohort_block, base_dir,
                         header=bool(manifest.get("header", False)))
    test_cfg = parse_test_config(manifest.get("test_config",
                                              {"test": manifest.get("test", "welch_t"),
                                               "fisher_z": manifest.get("fisher_z", False),
                                               "permutations": manifest.get("permutations", 1000)}),
                                 seed)
    rule = parse_threshold_rule(manifest.get("threshold", {}))
    ensemble_size = int(manifest.get("null_networks", 1000))
    alpha = float(manifest.get("alpha", 0.05))
    baselines_wanted = manifest.get("baselines", [])
    if args.baselines:
        baselines_wanted = [b.strip() for b in args.baselines.split(",") if b.strip()]
    unknown = [b for b in baselines_wanted if b not in BASELINE_NAMES]
    if unknown:
        raise ManifestError(f"unknown baselines {unknown}; valid: {BASELINE_NAMES}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = ddt_run(cohort, test_cfg=test_cfg, rule=rule,
                     ensemble_size=ensemble_size, alpha=alpha, seed=seed,
                     inner_dim=int(manifest.get("inner_dim", 2)),
                     correct_nodes=bool(manifest.get("correct_nodes", False)))

    baseline_results = {}
    for name in baselines_wanted:
        if name == "t10":
            baseline_results[name] = degree_ttest(
                cohort, density=float(manifest.get("density", 0.10)),
                alpha=alpha, ranking=manifest.get("ranking", "signed"))
        elif name == "binb":
            baseline_results[name] = binomial_corrected(result.pvalues,
                                                        "bonferroni", alpha)
        else:
            baseline_results[name] = binomial_corrected(result.pvalues,
                                                        "fdr", alpha)

    write_nodes_csv(out_dir / "nodes.csv", result, labels=cohort.labels,
                    baselines=baseline_results)
    write_matrix_csv(out_dir / "difference_network.csv",
                     result.difference.to_symmetric().to_dense())
    write_matrix_csv(out_dir / "adjacency.csv", result.adjacency.to_dense())
    write_gamma_json(out_dir / "gamma.json", rule, result.gamma)
    write_moments_json(out_dir / "moments.json", result.moments)
    summary = {
        "seed": seed,
        "alpha": alpha,
        "null_networks": ensemble_size,
        "test_config": {"test": test_cfg.method, "fisher_z": test_cfg.fisher_z,
                        "permutations": test_cfg.permutations,
                        "seed": test_cfg.seed},
        "threshold": {"kind": rule.kind, "level": rule.level,
                      "resolution": rule.resolution, "seed": rule.seed},
        "baselines": list(baselines_wanted),
        "n_nodes": cohort.n,
        "n_subjects": [cohort.n1, cohort.n2],
        "gamma": result.gamma,
        "flags": result.flags,
        "significant_nodes": [int(v) for v in result.significant_nodes],
        "elapsed_seconds": round(time.perf_counter() - t_start, 3),
    }
    write_json(out_dir / "run_summary.json", summary)
    if not args.quiet:
        print(f"wrote {out_dir}/nodes.csv "
              f"({len(result.significant_nodes)} significant nodes, "
              f"gamma={result.gamma:.4f})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    t_start = time.perf_counter()
    design, methods, edge_rules = load_design(args.design)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_experiment(design, methods=methods, edge_rules=edge_rules,
                            threads=_threads(args))
    write_metrics_csv(out_dir / "metrics.csv", result)
    write_replicates_csv(out_dir / "replicates.csv.gz", result)
    echo = {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in design.__dict__.items()}
    echo["methods"] = list(methods)
    echo["edge_rules"] = list(edge_rules)
    echo["elapsed_seconds"] = round(time.perf_counter() - t_start, 3)
    write_json(out_dir / "design.json", echo)
    if not args.quiet:
        for row in result.metrics:
            print(f"{row.method:12s} {row.scope:4s} TPR={row.tpr:.3f} "
                  f"FPR={row.fpr:.4f} MCC={row.mcc:.3f} "
                  f"(used {row.replicates_used}, errors {row.errors})")
    return EXIT_OK


def cmd_null(args) -> int:
    n_nodes = args.nodes
    if args.moments:
        moments = MomentSummary.from_dict(load_json(args.moments))
    elif args.difference:
        dense = read_matrix_csv(args.difference, header=args.header)
        sym = SymmetricMatrix.from_dense(dense)
        dn = DifferenceNetwork(n=sym.n,
                               d=np.clip(sym.values, P_MIN, 1.0 - P_MIN))
        moments = observed_moments(dn, m=args.inner_dim)
        n_nodes = n_nodes or sym.n
    else:
        raise ManifestError("pass --difference (difference-network CSV) or "
                            "--moments (moment JSON)")
    if args.moments_out:
        write_moments_json(args.moments_out, moments)
    if args.out:
        if not n_nodes:
            raise ManifestError("--nodes is required when generating from "
                                "--moments")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        ensemble = generate_null(moments, n=n_nodes,
                                 size=args.ensemble_size, seed=args.seed or 0)
        write_null_networks(out_dir, ensemble)
        if not args.quiet:
            print(f"wrote {ensemble.size} null networks to {out_dir}")
    elif not args.quiet:
        print(json.dumps(moments.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_enrich(args) -> int:
    dense = read_matrix_csv(args.adjacency)
    adjacency = AdjacencyMatrix.from_dense(dense.astype(int))
    partition = load_partition(args.modules)
    results = enrichment_test(adjacency, partition, alpha=args.alpha)
    write_enrichment_csv(args.out, results, partition)
    if not args.quiet:
        flagged = [r.block for r in results if r.significant]
        print(f"wrote {args.out} ({len(flagged)} enriched blocks)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddt",
        description="Differential degree test for two-population networks")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker pool size (default: DDT_THREADS env or "
                             "available parallelism)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the manifest seed")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the degree test on a cohort")
    p_run.add_argument("--manifest", required=True, help="run manifest JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--baselines",
                       help="comma list of baselines to add (t10,binb,binf)")
    p_run.set_defaults(func=cmd_run)

    p_sim = sub.add_parser("simulate", help="run a synthetic benchmark")
    p_sim.add_argument("--design", required=True, help="design JSON")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_null = sub.add_parser("null", help="moment summary and null networks")
    p_null.add_argument("--difference", help="difference-network CSV")
    p_null.add_argument("--moments", help="moment summary JSON (input)")
    p_null.add_argument("--moments-out", help="write the moment summary here")
    p_null.add_argument("--ensemble-size", type=int, default=100)
    p_null.add_argument("--nodes", type=int, default=None,
                        help="node count when generating from --moments")
    p_null.add_argument("--inner-dim", type=int, default=2)
    p_null.add_argument("--header", action="store_true",
                        help="matrix CSVs carry one header line")
    p_null.add_argument("--out", help="directory for generated null networks")
    p_null.set_defaults(func=cmd_null)

    p_enr = sub.add_parser("enrich", help="module-pair enrichment")
    p_enr.add_argument("--adjacency", required=True, help="adjacency CSV")
    p_enr.add_argument("--modules", required=True,
                       help="modules.csv: node_index,module_id[,module_name]")
    p_enr.add_argument("--out", required=True, help="output CSV")
    p_enr.add_argument("--alpha", type=float, default=0.05)
    p_enr.set_defaults(func=cmd_enrich)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ManifestError as err:
        return _fail(EXIT_INPUT, "manifest", str(err), stage="input")
    except (NonpositiveMeanError,) as err:
        return _fail(EXIT_PIPELINE, "nonpositive-mean", str(err),
                     stage="moments",
                     hint="the difference network's logit-scale mean must be "
                          "positive; weak or null signal cannot seed the "
                          "generator")
    except NoSelectedEdgesError as err:
        return _fail(EXIT_PIPELINE, "no-selected-edges", str(err),
                     stage="enrichment")
    except PipelineError as err:
        return _fail(EXIT_PIPELINE, "pipeline", str(err), stage="pipeline")
    except ValidationError as err:
        return _fail(EXIT_INPUT, "validation", str(err), stage="input")
    except DdtError as err:
        return _fail(EXIT_PIPELINE, "error", str(err), stage="pipeline")
    except OSError as err:
        return _fail(EXIT_INPUT, "io", str(err), stage="io")


if __name__ == "__main__":
    sys.exit(main())
