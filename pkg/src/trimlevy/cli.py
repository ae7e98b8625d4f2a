"""Command-line front end: ``trimlevy <subcommand> [flags]``.

Exit status: 0 success, 1 runtime error, 2 usage error, 3 verification failure.
Every run echoes its resolved configuration as one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .limit_laws import make_limit_law, marginal_quantile
from .models import DomainError, ModelError, model_from_spec, validate_model
from .moments import MomentError, c_alpha_limit, model_c_alpha, truncated_moment
from .norming import norming_sequences
from .schemes import ConfigError, Scheme
from .simulate import (MODES, DEFAULT_REL_TOL, RngStream, TruncationError, normalize,
                       samples_to_csv, simulate_batch)
from .verify import ExperimentConfig, emit_report, run_experiment

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3
THEOREMS = ("1.10", "2.1", "2.2", "2.3i", "2.3ii", "2.4i", "2.4ii", "7.1")


class UsageError(Exception):
    pass


def default_threads() -> int:
    raw = os.environ.get("TLP_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        raise UsageError(f"TLP_THREADS must be an integer, got {raw!r}") from None
    return max(1, val)


def write_atomic(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _echo(resolved: dict) -> None:
    print("# resolved " + json.dumps(resolved, sort_keys=True, default=str), file=sys.stderr)


# -- model arguments ------------------------------------------------------------

def _add_model_args(p):
    p.add_argument("--model", required=True, choices=("stable", "logpower", "slowtail", "tabulated"))
    p.add_argument("--alpha", type=float, help="stable index in (0, 1)")
    p.add_argument("--gamma", type=float, help="extreme-value index (logpower, tabulated)")
    p.add_argument("--path", help="CSV grid with header x,tail (tabulated)")
    p.add_argument("--extrapolate", action="store_true", help="power-law extension off the grid")


def _model_spec(args) -> dict:
    spec = {"model": args.model}
    if args.model == "stable":
        spec["alpha"] = 0.5 if args.alpha is None else args.alpha
    elif args.model == "logpower":
        spec["gamma"] = -1.0 if args.gamma is None else args.gamma
    elif args.model == "tabulated":
        if not args.path:
            raise UsageError("--model tabulated needs --path")
        spec["path"] = args.path
        spec["gamma"] = 0.0 if args.gamma is None else args.gamma
        if args.extrapolate:
            spec["extrapolate"] = True
    if args.model != "stable" and args.alpha is not None:
        raise UsageError("--alpha applies to --model stable only")
    if args.model in ("stable", "slowtail") and args.gamma is not None:
        raise UsageError(f"--gamma is fixed for --model {args.model}")
    return spec


def _model(args):
    spec = _model_spec(args)
    return spec, model_from_spec(spec)


# -- subcommands ----------------------------------------------------------------

def cmd_model(args) -> int:
    spec, model = _model(args)
    _echo({"subcommand": "model", "model": spec})
    report = validate_model(model)
    est = c_alpha_limit(model) if report.passed else None
    out = {
        "model": spec, "gamma": model.gamma, "passed": report.passed,
        "issues": [{"code": c, "message": m} for c, m in report.issues],
        "diagnostics": report.diagnostics,
    }
    if est is not None:
        out["c_alpha"] = model_c_alpha(model)
        out["c_alpha_estimate"] = {"limit": est.limit, "uncertainty": est.uncertainty,
                                   "detected": est.detected}
    if args.json:
        _emit(json.dumps(out, indent=2, sort_keys=True), args.out)
    else:
        lines = [f"model: {spec}", f"gamma: {model.gamma:g}",
                 f"valid: {'yes' if report.passed else 'no'}"]
        lines += [f"issue [{c}]: {m}" for c, m in report.issues]
        if est is not None:
            c = out["c_alpha"]
            lines.append("c_alpha: " + ("no limit detected" if c is None else f"{c:.6g}")
                         + f" (fit {est.limit:.4g} +- {est.uncertainty:.2g})")
        _emit("\n".join(lines), args.out)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_norming(args) -> int:
    spec, model = _model(args)
    _echo({"subcommand": "norming", "model": spec, "r": args.r})
    ns = norming_sequences(model, args.r)
    if args.json:
        _emit(json.dumps(ns.to_dict(), sort_keys=True), args.out)
    else:
        _emit(f"a_r={ns.a_r:.6g} b_r={ns.b_r:.6g} log_b_r={ns.log_b:.6g} regime={ns.regime:g}",
              args.out)
    return EXIT_OK


def cmd_moments(args) -> int:
    spec, model = _model(args)
    _echo({"subcommand": "moments", "model": spec, "p": args.p, "t": args.t})
    m = truncated_moment(model, args.p, args.t)
    _emit(json.dumps({"value": m.value, "method": m.method, "est_error": m.est_error},
                     sort_keys=True), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec, model = _model(args)
    threads = args.threads or default_threads()
    scheme = Scheme.parse(args.scheme)
    resolved = {"subcommand": "simulate", "model": spec, "r": args.r, "t": args.t, "n": args.n,
                "seed": args.seed, "scheme": scheme.value, "rel_tol": args.rel_tol,
                "mode": args.mode, "threads": threads, "out": args.out}
    _echo(resolved)
    c_alpha = args.c_alpha
    if c_alpha is None and scheme in (Scheme.RV_DET_CENTER, Scheme.SLOW_DET_CENTER):
        c_alpha = model_c_alpha(model)
    # fail on an incompatible scheme before spending time on the simulation
    make_limit_law(scheme, model.gamma, c_alpha=c_alpha, t=args.t)
    batch = simulate_batch(model, args.r, args.t, args.n, args.seed, rel_tol=args.rel_tol,
                           mode=args.mode, threads=threads)
    pairs = normalize(batch, model, scheme, c_alpha=c_alpha)
    _emit(samples_to_csv(batch, pairs), args.out)
    return EXIT_OK


def _law(args):
    return make_limit_law(args.scheme, args.gamma, c_alpha=args.c_alpha, t=args.t)


def cmd_limit(args) -> int:
    law = _law(args)
    resolved = {"subcommand": "limit", "scheme": law.scheme.value, "gamma": law.gamma,
                "c_alpha": law.c_alpha, "t": law.t}
    if args.cdf is not None:
        comps = [args.component] if args.component else list(law.components)
        resolved.update(cdf=args.cdf, components=comps)
        _echo(resolved)
        values = [law.marginal_cdf(k, args.cdf) for k in comps]
        if len(values) == 1:
            _emit(f"{values[0]:.6f}", args.out)
        else:
            _emit("\n".join(f"col{k} {v:.6f}" for k, v in zip(comps, values)), args.out)
        return EXIT_OK
    resolved.update(sample=args.sample, seed=args.seed)
    _echo(resolved)
    draws = law.sample(RngStream(args.seed, 0), args.sample)
    lines = ["col1,col2"] + [f"{a!r},{b!r}" for a, b in draws.tolist()]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _run_config(config: ExperimentConfig, args, fmt: str, out) -> int:
    report = run_experiment(config, source=args.source, keep_samples=(fmt == "plotdata"))
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    _emit(emit_report(report, fmt), out)
    return EXIT_OK if report.verdict else EXIT_VERIFY


def cmd_verify(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        data = json.load(fh)
    config = ExperimentConfig.from_dict(data)
    if args.threads:
        config.threads = args.threads
    elif "threads" not in data:
        config.threads = default_threads()
    if config.model.get("model") == "tabulated" and "path" in config.model:
        path = Path(config.model["path"])
        if not path.is_absolute():
            config.model["path"] = str(Path(args.config).resolve().parent / path)
    _echo({"subcommand": "verify", "config": config.to_dict(), "source": args.source,
           "format": args.format})
    return _run_config(config, args, args.format, args.out)


def repro_configs(theorem: str) -> list:
    """The canned experiment configurations shipped for ``theorem``."""
    if theorem not in THEOREMS:
        raise UsageError(f"unknown theorem {theorem!r}; choose from {', '.join(THEOREMS)}")
    base = resources.files("trimlevy") / "repro"
    index = json.loads((base / "index.json").read_text(encoding="utf-8"))
    data = json.loads((base / index[theorem]).read_text(encoding="utf-8"))
    return [ExperimentConfig.from_dict(d) for d in data["experiments"]]


def cmd_repro(args) -> int:
    configs = repro_configs(args.theorem)
    threads = args.threads or default_threads()
    for c in configs:
        c.threads = threads
    _echo({"subcommand": "repro", "theorem": args.theorem, "source": args.source,
           "experiments": [c.to_dict() for c in configs]})
    reports = []
    for c in configs:
        print(f"== {c.name}: {c.description}", file=sys.stderr)
        report = run_experiment(c, source=args.source)
        for line in report.summary_lines():
            print(line, file=sys.stderr)
        reports.append(report)
    verdict = all(r.verdict for r in reports)
    out = {"theorem": args.theorem, "verdict": verdict,
           "reports": [r.to_dict() for r in reports]}
    _emit(json.dumps(out, indent=2, sort_keys=True, allow_nan=False), args.out)
    return EXIT_OK if verdict else EXIT_VERIFY


# -- plot data --------------------------------------------------------------------

def read_samples(path) -> np.ndarray:
    """Read ``col1, col2`` from a samples CSV written by ``simulate`` or ``limit --sample``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"col1", "col2"} <= set(reader.fieldnames):
                raise ValueError("missing col1/col2 header")
            rows = [(float(row["col1"]), float(row["col2"])) for row in reader]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed samples CSV ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no samples")
    return np.array(rows)


def emit_plot_data(samples_path, law, out_path) -> tuple:
    """Write CDF-overlay and QQ data for each limit component of ``law``.

    Produces ``<out>.cdf.csv`` (component, x, empirical_cdf, limit_cdf) and
    ``<out>.qq.csv`` (component, p, sample_quantile, limit_quantile,
    limit_cdf_at_sample) with ``p = (i - 1/2)/n``; each holds n rows per
    component.  Returns the two paths.
    """
    pairs = read_samples(samples_path)
    out_path = Path(out_path)
    stem = out_path.name[:-4] if out_path.suffix == ".csv" else out_path.name
    cdf_path = out_path.with_name(stem + ".cdf.csv")
    qq_path = out_path.with_name(stem + ".qq.csv")
    cdf_rows = ["component,x,empirical_cdf,limit_cdf"]
    qq_rows = ["component,p,sample_quantile,limit_quantile,limit_cdf_at_sample"]
    for comp in law.components:
        x = np.sort(pairs[:, comp - 1])
        if np.any(np.isnan(x)):
            raise ValueError(f"{samples_path}: NaN in col{comp}")
        n = x.size
        ecdf = np.arange(1, n + 1) / n
        lim = np.asarray(law.marginal_cdf(comp, x))
        p = (np.arange(1, n + 1) - 0.5) / n
        q = marginal_quantile(law, comp, p)
        cdf_rows += [f"{comp},{a!r},{b!r},{c!r}" for a, b, c in
                     zip(x.tolist(), ecdf.tolist(), lim.tolist())]
        qq_rows += [f"{comp},{a!r},{b!r},{c!r},{d!r}" for a, b, c, d in
                    zip(p.tolist(), x.tolist(), q.tolist(), lim.tolist())]
    write_atomic(cdf_path, "\n".join(cdf_rows) + "\n")
    write_atomic(qq_path, "\n".join(qq_rows) + "\n")
    return cdf_path, qq_path


def cmd_plot(args) -> int:
    law = _law(args)
    _echo({"subcommand": "plot", "samples": args.samples, "scheme": law.scheme.value,
           "gamma": law.gamma, "c_alpha": law.c_alpha, "t": law.t, "out": args.out})
    for path in emit_plot_data(args.samples, law, args.out):
        print(path)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trimlevy", description="Trimmed subordinators: norming, simulation "
                     "and verification of joint limit laws.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("model", help="validate a tail model and estimate c_alpha")
    _add_model_args(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("norming", help="print a_r, b_r for trimming level r")
    _add_model_args(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_norming)

    p = sub.add_parser("moments", help="truncated moment int_0^t u^p Pi(du)")
    _add_model_args(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--t", type=float, required=True, help="truncation level")
    p.add_argument("--out")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("simulate", help="simulate normalized (trimmed sum, r-th jump) pairs")
    _add_model_args(p)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--t", type=float, default=1.0, help="time horizon")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scheme", required=True)
    p.add_argument("--c-alpha", type=float)
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL)
    p.add_argument("--mode", choices=MODES, default="gaussian-residual")
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("limit", help="limit-law CDF values or samples")
    p.add_argument("--scheme", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--c-alpha", type=float)
    p.add_argument("--t", type=float, default=1.0)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--cdf", type=float, metavar="X")
    g.add_argument("--sample", type=_positive_int, metavar="N")
    p.add_argument("--component", type=int, choices=(1, 2))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("verify", help="run an experiment config and report")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv", "plotdata"), default="json")
    p.add_argument("--source", choices=("simulator", "limit"), default="simulator")
    p.add_argument("--threads", type=_positive_int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("repro", help="run the canned experiment for one theorem")
    p.add_argument("--theorem", required=True, choices=THEOREMS)
    p.add_argument("--source", choices=("simulator", "limit"), default="simulator")
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_repro)

    p = sub.add_parser("plot", help="CDF-overlay and QQ data from a samples CSV")
    p.add_argument("--samples", required=True)
    p.add_argument("--scheme", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--c-alpha", type=float)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError, ModelError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MomentError, TruncationError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
