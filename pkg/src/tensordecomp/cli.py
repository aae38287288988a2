"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 no
convergence. Errors print one line to stderr of the form
``error[<kind>]: <message>``.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cpd import CpConfig, cp_als, fit, jennrich
from .errors import ConfigurationError, TensorDecompError
from .io import dump_result, read_documents, read_samples, read_tensor, write_documents, write_samples
from .moments import (
    GmmSpec,
    TopicSpec,
    default_gmm_spec,
    default_topic_spec,
    estimate_mixture,
    gmm_generate,
    match_columns,
    topic_generate,
    total_variation,
    word_counts,
)
from .power import PowerConfig
from .tucker import hooi, hosvd, relative_error

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4
OUTPUT_DIR_ENV = "TENSORDECOMP_OUTPUT_DIR"

_KIND = {EXIT_CONFIG: "config", EXIT_DATA: "data", EXIT_CONVERGENCE: "convergence"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error[config]: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"ranks must be positive, got {text!r}")
    return values


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(doc, args, command):
    doc["run"] = {"command": command, "version": __version__, **doc.get("run", {})}
    text = dump_result(doc)
    out = args.output
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = Path(os.environ[OUTPUT_DIR_ENV]) / f"{command}.json"
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _timed(args, doc, start):
    if args.record_time:
        doc.setdefault("run", {})["wall_time"] = time.perf_counter() - start


def cmd_cp(args):
    start = time.perf_counter()
    t = read_tensor(args.input)
    cfg = CpConfig(rank=args.rank, max_iters=args.max_iters, tol=args.tol, init=args.init,
                   seed=args.seed, normalize=args.normalize)
    result = cp_als(t, cfg)
    doc = {
        "run": {"seed": args.seed, "config": {
            "rank": cfg.rank, "max_iters": cfg.max_iters, "tol": cfg.tol,
            "init": cfg.init, "normalize": cfg.normalize}},
        "shape": list(t.shape),
        "model": {"weights": result.model.weights, "factors": list(result.model.factors)},
        "fit_history": result.fit_history,
        "relative_error": fit(t, result.model),
        "iterations": result.iterations,
        "converged": result.converged,
    }
    _timed(args, doc, start)
    _emit(doc, args, "cp")
    if not result.converged:
        sys.stderr.write(f"error[convergence]: CP-ALS stopped after {result.iterations} sweeps without converging\n")
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_jennrich(args):
    start = time.perf_counter()
    t = read_tensor(args.input)
    model = jennrich(t, args.rank, seed=args.seed)
    doc = {
        "run": {"seed": args.seed, "config": {"rank": args.rank}},
        "shape": list(t.shape),
        "model": {"weights": model.weights, "factors": list(model.factors)},
        "relative_error": fit(t, model),
    }
    _timed(args, doc, start)
    _emit(doc, args, "jennrich")
    return EXIT_OK


def cmd_tucker(args):
    start = time.perf_counter()
    t = read_tensor(args.input)
    if len(args.ranks) != t.order:
        raise ConfigurationError(f"--ranks has {len(args.ranks)} entries but the tensor has order {t.order}")
    converged = True
    history = None
    if args.method == "hosvd":
        model = hosvd(t, args.ranks)
    else:
        res = hooi(t, args.ranks, max_iters=args.max_iters, tol=args.tol, seed=args.seed)
        model, history, converged = res.model, res.history, res.converged
    doc = {
        "run": {"seed": args.seed, "config": {
            "ranks": args.ranks, "method": args.method, "max_iters": args.max_iters, "tol": args.tol}},
        "shape": list(t.shape),
        "model": {
            "core_shape": list(model.ranks),
            "core": model.core.flat,
            "factors": list(model.factors),
        },
        "relative_error": relative_error(t, model),
        "objective_history": history,
        "converged": converged,
    }
    _timed(args, doc, start)
    _emit(doc, args, "tucker")
    if not converged:
        sys.stderr.write("error[convergence]: HOOI did not converge\n")
        return EXIT_CONVERGENCE
    return EXIT_OK


def _evaluate(est, truth, kind):
    true_a = np.array(truth["topics" if kind == "topic" else "means"])
    true_w = np.array(truth["weights"])
    if true_a.shape[1] != est.components.shape[1]:
        return None
    perm = match_columns(est.components, true_a)
    a_hat = est.components[:, perm]
    w_hat = est.weights[perm]
    out = {
        "permutation": perm,
        "weight_errors": np.abs(w_hat - true_w),
    }
    if kind == "topic":
        out["total_variation"] = [total_variation(a_hat[:, i], true_a[:, i]) for i in range(true_a.shape[1])]
    else:
        out["mean_errors"] = np.linalg.norm(a_hat - true_a, axis=0)
        if "sigma" in truth:
            out["sigma2_relative_error"] = abs(est.sigma2 - truth["sigma"] ** 2) / truth["sigma"] ** 2
    return out


def cmd_estimate(args):
    start = time.perf_counter()
    if args.model == "gmm":
        samples = read_samples(args.input)
        d = samples.shape[1]
    else:
        docs, d, _ = read_documents(args.input, args.vocab)
        samples = word_counts(docs, d)
    if args.k > d:
        raise ConfigurationError(
            f"k={args.k} exceeds dimension d={d}; whitening reduces to k dimensions so k <= d is required"
        )
    cfg = PowerConfig(args.k, max_iters=args.max_iters, tol=args.tol, restarts=args.restarts, seed=args.seed)
    doc = {
        "run": {"seed": args.seed, "config": {
            "model": args.model, "k": args.k, "max_iters": args.max_iters, "tol": args.tol,
            "restarts": args.restarts, "path": args.path}},
        "n": int(samples.shape[0]),
        "d": int(d),
    }
    try:
        est = estimate_mixture(samples, args.model, args.k, cfg, path=args.path,
                               renormalize_weights=args.renormalize)
    except TensorDecompError as exc:
        partial = getattr(exc, "partial", [])
        if partial:
            doc["partial"] = [{"eigenvalue": p.value, "vector": p.vector} for p in partial]
            doc["error"] = str(exc)
            _emit(doc, args, "estimate")
        raise
    doc.update({
        "components": est.components,
        "weights": est.weights,
        "sigma2": est.sigma2,
        "eigenvalues": est.eigenvalues,
        "diagnostics": est.diagnostics,
    })
    if args.truth:
        import json

        truth = json.loads(Path(args.truth).read_text())
        evaluation = _evaluate(est, truth, args.model)
        if evaluation is not None:
            doc["diagnostics"]["evaluation"] = evaluation
    _timed(args, doc, start)
    _emit(doc, args, "estimate")
    return EXIT_OK


def cmd_generate(args):
    if args.spec_file:
        import json

        spec_doc = json.loads(Path(args.spec_file).read_text())
        if args.model == "gmm":
            spec = GmmSpec(np.array(spec_doc["means"]), np.array(spec_doc["weights"]), spec_doc["sigma"])
        else:
            spec = TopicSpec(np.array(spec_doc["topics"]), np.array(spec_doc["weights"]),
                             spec_doc.get("words_per_doc", args.words_per_doc))
    else:
        weights = np.array(args.weights) if args.weights else None
        if weights is not None and weights.size != args.k:
            raise ConfigurationError(f"--weights has {weights.size} entries, --k is {args.k}")
        if args.model == "gmm":
            spec = default_gmm_spec(args.k, args.d, args.sigma, seed=args.spec_seed, weights=weights,
                                    mean_norm=args.mean_norm)
        else:
            spec = default_topic_spec(args.k, args.d, args.words_per_doc, seed=args.spec_seed,
                                      weights=weights)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.model == "gmm":
        x, labels = gmm_generate(spec, args.n, seed=args.seed)
        write_samples(out, x)
        truth = {"model": "gmm", "means": spec.means, "weights": spec.weights, "sigma": spec.sigma}
    else:
        words, labels = topic_generate(spec, args.n, seed=args.seed)
        write_documents(out, words)
        truth = {"model": "topic", "topics": spec.topics, "weights": spec.weights,
                 "words_per_doc": spec.words_per_doc, "d": spec.d}
    truth.update({"n": args.n, "seed": args.seed, "labels": labels})
    Path(str(out) + ".truth.json").write_text(dump_result(truth))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tensordecomp", description="Dense tensor decompositions and moment-based mixture estimation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0, help="RNG seed (numpy PCG64)")
        p.add_argument("--output", "-o", default=None,
                       help=f"result path ('-' for stdout; default: ${OUTPUT_DIR_ENV}/<command>.json or stdout)")
        p.add_argument("--record-time", action="store_true",
                       help="add wall time to the run metadata (breaks byte-identical output)")

    p = sub.add_parser("cp", help="CP decomposition by alternating least squares")
    p.add_argument("input", help="tensor file")
    p.add_argument("--rank", type=_positive_int, required=True)
    p.add_argument("--max-iters", type=_positive_int, default=500)
    p.add_argument("--tol", type=_positive_float, default=1e-8)
    p.add_argument("--init", choices=["random", "hosvd-leading-vectors"], default="random")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    common(p)
    p.set_defaults(func=cmd_cp)

    p = sub.add_parser("jennrich", help="exact CP decomposition of an order-3 tensor")
    p.add_argument("input", help="tensor file")
    p.add_argument("--rank", type=_positive_int, required=True)
    common(p)
    p.set_defaults(func=cmd_jennrich)

    p = sub.add_parser("tucker", help="Tucker decomposition by HOSVD or HOOI")
    p.add_argument("input", help="tensor file")
    p.add_argument("--ranks", type=_int_list, required=True, help="comma-separated, one per mode")
    p.add_argument("--method", choices=["hosvd", "hooi"], default="hosvd")
    p.add_argument("--max-iters", type=_positive_int, default=100)
    p.add_argument("--tol", type=_positive_float, default=1e-8)
    common(p)
    p.set_defaults(func=cmd_tucker)

    p = sub.add_parser("estimate", help="method-of-moments mixture estimation")
    p.add_argument("--model", choices=["gmm", "topic"], required=True)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--input", required=True, help="sample file (gmm) or document file (topic)")
    p.add_argument("--vocab", type=_positive_int, default=None, help="topic vocabulary size (default: max index)")
    p.add_argument("--max-iters", type=_positive_int, default=100)
    p.add_argument("--tol", type=_positive_float, default=1e-10)
    p.add_argument("--restarts", type=_positive_int, default=5)
    p.add_argument("--path", choices=["implicit", "materialized"], default="implicit")
    p.add_argument("--renormalize", action="store_true", help="rescale weights to sum to 1")
    p.add_argument("--truth", default=None, help="ground-truth sidecar from 'generate' to score against")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("generate", help="sample synthetic GMM or topic data")
    p.add_argument("--model", choices=["gmm", "topic"], required=True)
    p.add_argument("--k", type=_positive_int, default=3)
    p.add_argument("--d", type=_positive_int, default=10)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--sigma", type=_positive_float, default=0.1)
    p.add_argument("--mean-norm", type=_positive_float, default=1.0)
    p.add_argument("--weights", type=_float_list, default=None)
    p.add_argument("--words-per-doc", type=int, default=3)
    p.add_argument("--spec-seed", type=int, default=0, help="seed for the means/topics")
    p.add_argument("--spec-file", default=None, help="JSON with explicit means/topics, weights, sigma")
    p.add_argument("--seed", type=int, default=0, help="seed for the samples")
    p.add_argument("--output", "-o", required=True, help="sample file; ground truth goes to <output>.truth.json")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TensorDecompError as exc:
        code = exc.exit_code
        kind = _KIND.get(code, "error")
        message = str(exc).replace("\n", " ")
        sys.stderr.write(f"error[{kind}]: {message}\n")
        return code
    except OSError as exc:
        sys.stderr.write(f"error[data]: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
