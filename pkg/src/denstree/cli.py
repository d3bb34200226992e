"""Command-line interface.

Verbs: gen, preprocess, train, eval, cv, structure, sample, bench.
Exit codes: 0 success, 1 data error, 2 config error, 3 internal assertion.
The seed may also come from the DENSTREE_SEED environment variable; an
explicit --seed flag wins.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bayesnet import (
    NetworkStructure,
    SearchConfig,
    TierConfig,
    joint_log_likelihood,
    learn_structure,
    parameterize,
    sample_network,
)
from .conditional import CondLearnConfig, ConditionalSpec, EvalCounters, learn_conditional, smooth_conditional
from .datagen import generate_mixture2d, generate_standin, standin_schema
from .errors import ConfigError, DataError, DensTreeError
from .experiment import AlgorithmSpec, ExperimentConfig, format_report, run_experiment
from .files import ingest_csv, load_model, load_schema, save_model, save_schema, write_csv
from .preprocess import add_noise, scale_to_unit
from .schema import Dataset
from .serialize import encode_model


def _seed_from(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DENSTREE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"DENSTREE_SEED must be an integer, got {env!r}") from None
    return 0


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $DENSTREE_SEED or 0)")


def _cmd_gen(args):
    seed = _seed_from(args)
    if args.dataset == "mixture2d":
        n = args.n if args.n is not None else 8000
        ds = generate_mixture2d(n, seed)
        truth = None
    else:
        ds, truth = generate_standin(args.dataset, args.n, seed)
    write_csv(ds, args.out)
    if args.schema_out:
        save_schema(ds.schema, args.schema_out)
    if args.truth_out and truth is not None:
        with open(args.truth_out, "w", encoding="utf-8") as fh:
            json.dump({"profile": args.dataset, "seed": seed, "parents": [list(p) for p in truth.parent_sets]}, fh)
    print(f"wrote {ds.n_rows} rows x {ds.schema.width} columns to {args.out}")
    return 0


def _cmd_preprocess(args):
    seed = _seed_from(args)
    schema = load_schema(args.schema)
    ds = ingest_csv(args.data, schema)
    if args.scale:
        ds, record = scale_to_unit(ds)
        if args.affine_out:
            with open(args.affine_out, "w", encoding="utf-8") as fh:
                json.dump(record.to_json_obj(), fh, indent=2)
    if args.noise:
        ds = add_noise(ds, args.noise, args.noise_mag, seed)
    write_csv(ds, args.out)
    if args.schema_out:
        save_schema(ds.schema, args.schema_out)
    print(f"wrote {ds.n_rows} rows to {args.out}")
    return 0


def _parse_child_parents(args, schema):
    if args.child is not None:
        child = schema.index_of(args.child)
    else:
        child = schema.width - 1
    if args.parents:
        parents = tuple(schema.index_of(p.strip()) for p in args.parents.split(",") if p.strip())
    else:
        parents = tuple(c for c in range(schema.width) if c != child)
    return ConditionalSpec(child, parents)


def _cmd_train(args):
    seed = _seed_from(args)
    schema = load_schema(args.schema)
    ds = ingest_csv(args.data, schema)
    if args.mode == "bnet":
        search = SearchConfig(seed=seed, epsilon=args.epsilon, max_parents=args.max_parents)
        if args.structure:
            with open(args.structure, "r", encoding="utf-8") as fh:
                structure = NetworkStructure.from_json_obj(json.load(fh), schema)
        else:
            structure = learn_structure(ds, search)
        final = TierConfig("approx", args.leaf)
        model = parameterize(structure, ds, final, args.epsilon, seed=seed)
    else:
        spec = _parse_child_parents(args, schema)
        cfg = CondLearnConfig(leaf_family=args.leaf, seed=seed)
        model = smooth_conditional(learn_conditional(ds, spec, args.mode, cfg), args.epsilon)
    save_model(model, args.out)
    print(f"wrote model to {args.out}")
    return 0


def _cmd_eval(args):
    model = load_model(args.model)
    schema = load_schema(args.schema) if args.schema else _model_schema(model)
    ds = ingest_csv(args.data, schema)
    counters = EvalCounters() if args.counters else None
    if hasattr(model, "cond_log_density"):
        ll = float(np.sum(model.cond_log_density(ds.values, counters)))
    else:
        ll = joint_log_likelihood(model, ds)
    print(f"total_ll\t{ll!r}")
    print(f"mean_ll_per_row\t{ll / max(ds.n_rows, 1)!r}")
    if counters is not None:
        print(f"mean_visited_leaves\t{counters.mean_visited()!r}")
    return 0


def _model_schema(model):
    from .serialize import _model_schema as ms

    return ms(model)


def _cmd_cv(args):
    seed = _seed_from(args)
    schema = load_schema(args.schema)
    ds = ingest_csv(args.data, schema)
    algos = []
    for spec in args.algo:
        parts = spec.split(":")
        if len(parts) == 2:
            label = f"{parts[0]}-{parts[1]}"
            mode, leaf = parts
        elif len(parts) == 3:
            label, mode, leaf = parts
        else:
            raise ConfigError(f"bad --algo {spec!r}; expected mode:leaf or label:mode:leaf")
        algos.append(AlgorithmSpec(label, mode, leaf))
    config = ExperimentConfig(
        algorithms=tuple(algos),
        folds=args.folds,
        seed=seed,
        scale=args.scale,
        noise=args.noise,
        noise_mag=args.noise_mag,
        epsilon=args.epsilon,
        child=schema.index_of(args.child) if args.child else None,
        timing=not args.no_timing,
    )
    rows = run_experiment(ds, config)
    out = format_report(rows, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(out)
    else:
        sys.stdout.buffer.write(out)
    return 0


def _cmd_structure(args):
    seed = _seed_from(args)
    schema = load_schema(args.schema)
    ds = ingest_csv(args.data, schema)
    config = SearchConfig(seed=seed, max_parents=args.max_parents, max_iterations=args.max_iterations)
    structure = learn_structure(ds, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(structure.to_json_obj(schema), fh, indent=2)
        fh.write("\n")
    print(f"wrote structure with {len(structure.arcs())} arcs to {args.out}")
    return 0


def _cmd_sample(args):
    seed = _seed_from(args)
    model = load_model(args.model)
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 211]))
    if hasattr(model, "sample"):
        values = model.sample(rng, args.n) if not hasattr(model, "schema") else model.sample(rng, args.n)
    else:
        raise ConfigError("model kind does not support sampling")
    schema = _model_schema(model)
    ds = Dataset(schema, np.asarray(values))
    write_csv(ds, args.out)
    print(f"wrote {args.n} sampled rows to {args.out}")
    return 0


def _cmd_bench(args):
    from .bench import run_benchmark

    run_benchmark(sizes=args.sizes, dims=args.dims, repeats=args.repeats)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="denstree", description="Tree-based conditional density estimation")
    p.add_argument("--version", action="version", version=f"denstree {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--dataset", choices=("mixture2d", "bio", "astro"), required=True)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--out", required=True)
    g.add_argument("--schema-out")
    g.add_argument("--truth-out")
    _add_seed(g)
    g.set_defaults(func=_cmd_gen)

    pr = sub.add_parser("preprocess", help="scale to [0,1] and/or add noise")
    pr.add_argument("--data", required=True)
    pr.add_argument("--schema", required=True)
    pr.add_argument("--scale", action="store_true")
    pr.add_argument("--noise", choices=("uniform", "gaussian"))
    pr.add_argument("--noise-mag", type=float, default=0.001)
    pr.add_argument("--out", required=True)
    pr.add_argument("--schema-out")
    pr.add_argument("--affine-out")
    _add_seed(pr)
    pr.set_defaults(func=_cmd_preprocess)

    tr = sub.add_parser("train", help="fit a model")
    tr.add_argument("--data", required=True)
    tr.add_argument("--schema", required=True)
    tr.add_argument("--mode", choices=("cart", "stratified", "joint", "approx", "bnet"), required=True)
    tr.add_argument("--leaf", default="multilinear")
    tr.add_argument("--child")
    tr.add_argument("--parents", help="comma-separated parent names")
    tr.add_argument("--structure", help="fixed structure JSON (bnet mode)")
    tr.add_argument("--max-parents", type=int, default=3)
    tr.add_argument("--epsilon", type=float, default=1e-3)
    tr.add_argument("--out", required=True)
    _add_seed(tr)
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="score a dataset under a model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--schema")
    ev.add_argument("--counters", action="store_true")
    ev.set_defaults(func=_cmd_eval)

    cv = sub.add_parser("cv", help="cross-validated comparison")
    cv.add_argument("--data", required=True)
    cv.add_argument("--schema", required=True)
    cv.add_argument("--algo", action="append", required=True, help="mode:leaf or label:mode:leaf (repeatable)")
    cv.add_argument("--folds", type=int, default=10)
    cv.add_argument("--scale", action="store_true")
    cv.add_argument("--noise", choices=("uniform", "gaussian"))
    cv.add_argument("--noise-mag", type=float, default=0.001)
    cv.add_argument("--epsilon", type=float, default=1e-3)
    cv.add_argument("--child")
    cv.add_argument("--format", choices=("tsv", "json"), default="tsv")
    cv.add_argument("--out")
    cv.add_argument("--no-timing", action="store_true")
    _add_seed(cv)
    cv.set_defaults(func=_cmd_cv)

    st = sub.add_parser("structure", help="learn a network structure")
    st.add_argument("--data", required=True)
    st.add_argument("--schema", required=True)
    st.add_argument("--max-parents", type=int, default=3)
    st.add_argument("--max-iterations", type=int, default=50)
    st.add_argument("--out", required=True)
    _add_seed(st)
    st.set_defaults(func=_cmd_structure)

    sa = sub.add_parser("sample", help="draw rows from a model")
    sa.add_argument("--model", required=True)
    sa.add_argument("--n", type=int, required=True)
    sa.add_argument("--out", required=True)
    _add_seed(sa)
    sa.set_defaults(func=_cmd_sample)

    be = sub.add_parser("bench", help="benchmark compiled vs fallback kernels")
    be.add_argument("--sizes", type=int, nargs="+", default=(64, 400, 4000))
    be.add_argument("--dims", type=int, nargs="+", default=(1, 2, 4))
    be.add_argument("--repeats", type=int, default=200)
    be.set_defaults(func=_cmd_bench)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 1
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DensTreeError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 3
    except AssertionError as e:
        print(f"internal assertion failed: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
