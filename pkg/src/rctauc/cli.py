"""Command-line entry point: ``rctauc <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 degenerate estimation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import io, theory
from .data import DegenerateEstimationError, Method, validate_dataset
from .dgp import DgpConfig, gen_model_spectrum, gen_pool, subsample_rct
from .estimators import NEEDS_NUISANCE, NpwConfig, estimate
from .harness import (PowerConfig, SweepConfig, _jsonable, run_bias_check, run_cindex_sweep,
                      run_mae_sweep, run_power, ExperimentReport)
from .metrics import TiePolicy, empirical_cdf
from .nuisance import CrossFitConfig, cross_fit_nuisance, noisy_oracle

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _pi_arg(text):
    if text == "empirical":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--pi takes a probability or 'empirical'") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("--pi must lie in [0, 1]")
    return value


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global flags")
    g.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    g.add_argument("--tie", choices=[t.value for t in TiePolicy], default=None)
    g.add_argument("--pi", type=_pi_arg, default=None,
                   help="randomization probability, or 'empirical'")
    g.add_argument("--folds", type=int, default=None, help="cross-fitting folds (default 5)")
    g.add_argument("--out", default=None, help="output path (default stdout)")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--config", default=None, help="flat YAML run-config file")

    parser = _Parser(prog="rctauc", description="AUROC estimation from randomized trial data")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    method_choices = [m.value for m in Method]

    p = sub.add_parser("estimate", parents=[common], help="estimate AUROC for each score column")
    p.add_argument("data")
    p.add_argument("--method", action="append", choices=method_choices,
                   help="repeatable; default standard, naive, npw")
    p.add_argument("--tau-form", choices=("pairwise", "plugin"), default="pairwise")
    p.add_argument("--clip-tau-path", action="store_true")

    p = sub.add_parser("select", parents=[common], help="rank score columns by one estimator")
    p.add_argument("data")
    p.add_argument("--method", choices=method_choices, default="naive")
    p.add_argument("--tau-form", choices=("pairwise", "plugin"), default="pairwise")

    p = sub.add_parser("simulate", parents=[common], help="emit a synthetic pool or trial CSV")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="trial size; omit to emit the pool")
    p.add_argument("--pool-size", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--models", type=_int_list, default=(),
                   help="training sizes of logistic models to add as score columns")
    p.add_argument("--oracle-noise", type=float, default=None,
                   help="add omega_hat/tau_hat columns: true nuisances plus N(0, v)")

    for name, helptext in (("sweep-mae", "MAE of each estimator across a model spectrum"),
                           ("sweep-cindex", "C-index of model rankings across ATEs"),
                           ("bias-check", "empirical versus closed-form naive bias")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--n", type=int, default=None, help="trial size per replicate")
        p.add_argument("--pool-size", type=int, default=None)
        p.add_argument("--delta", type=float, default=None)
        if name == "bias-check":
            p.add_argument("--model-index", type=int, default=None,
                           help="position in the AUROC-sorted spectrum (default middle)")

    p = sub.add_parser("power", parents=[common], help="bootstrap power to prefer model b")
    p.add_argument("data", nargs="?", help="trial CSV; omit for a synthetic pool")
    p.add_argument("--model-a", default=None, help="score column name or spectrum index")
    p.add_argument("--model-b", default=None)
    p.add_argument("--n-grid", type=_int_list, default=None)
    p.add_argument("--bootstrap", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--significance", type=float, default=None)
    p.add_argument("--pool-size", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--methods", default=None, help="comma-separated estimators")
    return parser


# --- output -----------------------------------------------------------------

def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        io._atomic_write(out, text)


def _dumps(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def _emit_report(report: ExperimentReport, args):
    if args.out is None:
        text = io.report_to_json(report) if args.format == "json" else io.report_to_csv(report)
        sys.stdout.write(text)
    else:
        io.write_report(report, args.out, args.format)


# --- config resolution ------------------------------------------------------

def _sections(args) -> dict:
    return io.load_run_config(args.config) if args.config else {
        "dgp": {}, "sweep": {}, "power": {}, "npw": {}}


def _dgp_config(args, sections) -> DgpConfig:
    fields = dict(sections["dgp"])
    if args.seed is not None:
        fields["seed"] = args.seed
    if getattr(args, "delta", None) is not None:
        fields["delta"] = args.delta
    if getattr(args, "pool_size", None) is not None:
        fields["pool_size"] = args.pool_size
    if getattr(args, "dim", None) is not None:
        fields["dim"] = args.dim
    if isinstance(args.pi, float):
        fields["pi"] = args.pi
    for key in ("w_tau_support", "w_tau_probs"):
        if key in fields:
            fields[key] = tuple(fields[key])
    return DgpConfig(**fields)


def _sweep_config(args, sections) -> SweepConfig:
    fields = dict(sections["sweep"])
    dgp = _dgp_config(args, sections)
    if args.seed is not None:
        fields["base_seed"] = args.seed
        fields["model_seed"] = args.seed
    if args.tie is not None:
        fields["tie"] = args.tie
    if args.folds is not None:
        fields["folds"] = args.folds
    if args.replications is not None:
        fields["replications"] = args.replications
    if args.n is not None:
        fields["n_rct"] = args.n
    if args.delta is not None:
        fields["ate_grid"] = (args.delta,)
    elif "ate_grid" not in fields:
        fields["ate_grid"] = (dgp.delta,)
    return SweepConfig(dgp=dgp, **fields)


# --- subcommands ------------------------------------------------------------

def _load(args, eps):
    if args.pi is None:
        raise UsageError("--pi is required (a probability, or 'empirical')")
    loaded = io.load_csv(args.data, args.pi, eps)
    problems = validate_dataset(loaded.dataset)
    if problems:
        raise io.DataError("; ".join(problems))
    if not loaded.scores:
        raise io.DataError("no score__ columns to evaluate")
    return loaded


def _nuisance_for(loaded, methods, args):
    if not any(Method(m) in NEEDS_NUISANCE for m in methods):
        return None
    if loaded.nuisance is not None:
        return loaded.nuisance
    if not loaded.feature_names:
        raise io.DataError("NPW needs omega_hat/tau_hat columns or x_ feature columns")
    folds = 5 if args.folds is None else args.folds
    seed = 0 if args.seed is None else args.seed
    return cross_fit_nuisance(loaded.dataset, CrossFitConfig(folds, seed=seed))


def _npw_config(args, sections) -> NpwConfig:
    fields = dict(sections["npw"])
    fields["tie"] = args.tie or "strict"
    fields["tau_form"] = getattr(args, "tau_form", "pairwise")
    if getattr(args, "clip_tau_path", False):
        fields["clip_tau_path"] = True
    return NpwConfig(**fields)


def cmd_estimate(args):
    sections = _sections(args)
    npw = _npw_config(args, sections)
    methods = args.method or ["standard", "naive", "npw"]
    loaded = _load(args, npw.epsilon)
    nuisance = _nuisance_for(loaded, methods, args)
    records = []
    for score in loaded.scores:
        for m in methods:
            est = estimate(m, loaded.dataset, score.scores, nuisance, npw)
            records.append({"model": score.model_name, **est.to_dict()})
    if args.format == "csv":
        lines = ["model,method,value,n_control,n_treated"]
        lines += [f"{r['model']},{r['method']},{io._fmt(r['value'])},{r['n_control']},"
                  f"{r['n_treated']}" for r in records]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(_dumps({"pi": loaded.dataset.randomization_prob, "estimates": records}), args.out)


def select_report(loaded, method, npw: NpwConfig, nuisance=None) -> dict:
    """Ranking by ``method`` plus, for naive, pairwise misselection flags.

    The plug-ins are beta = pi / (mu1 (1 - mu1)) with mu1 the treated outcome
    rate, and sigma = Cov(tau_hat, F(f)) over all rows with the in-sample
    half-tie CDF of each model's scores.
    """
    ds = loaded.dataset
    values = {s.model_name: estimate(method, ds, s.scores, nuisance, npw).value
              for s in loaded.scores}
    ranking = sorted(values, key=lambda k: (-values[k], k))
    out = {"method": Method(method).value, "ranking": [
        {"rank": i + 1, "model": k, "value": values[k]} for i, k in enumerate(ranking)]}
    if Method(method) is Method.NAIVE:
        if loaded.nuisance is None:
            raise io.DataError("misselection flags need a tau_hat column")
        mu1 = float(ds.outcome[ds.treatment == 1].mean())
        if not 0.0 < mu1 < 1.0:
            raise DegenerateEstimationError("treated outcome rate is 0 or 1; beta undefined")
        beta = ds.randomization_prob / (mu1 * (1 - mu1))
        tau = loaded.nuisance.tau_hat
        sigmas = {s.model_name: theory.sigma_f(tau, empirical_cdf(s.scores, s.scores,
                                                                  TiePolicy.HALF))
                  for s in loaded.scores}
        entries = [(values[k], sigmas[k]) for k in ranking]
        pairs = []
        for i, j, flag in theory.misselection_pairs(entries, beta):
            pairs.append({"higher": ranking[i], "lower": ranking[j], "flagged": flag})
        out.update({"beta": beta, "mu1": mu1, "sigma": sigmas, "pairs": pairs})
    return out


def cmd_select(args):
    sections = _sections(args)
    npw = _npw_config(args, sections)
    loaded = _load(args, npw.epsilon)
    nuisance = _nuisance_for(loaded, [args.method], args)
    _emit(_dumps(select_report(loaded, args.method, npw, nuisance)), args.out)


def cmd_simulate(args):
    sections = _sections(args)
    dgp = _dgp_config(args, sections)
    pool = gen_pool(dgp)
    seed = dgp.seed
    models = []
    if args.models:
        models = gen_model_spectrum(pool, args.models, np.random.default_rng([seed, 1]))
    if args.n is None:
        dataset, extras = io.pool_to_dataset(pool)
        idx = np.arange(pool.size)
    else:
        dataset = subsample_rct(pool, args.n, dgp.pi, np.random.default_rng([seed, 2]))
        idx = dataset.source_index
        extras = {"y0": pool.y0[idx], "y1": pool.y1[idx], "omega_true": pool.omega_true[idx],
                  "tau_true": pool.tau_effective[idx]}
        dataset = replace(dataset, source_index=None)
    nuisance = None
    if args.oracle_noise is not None:
        nuisance = noisy_oracle(pool.omega_true[idx], pool.tau_effective[idx], args.oracle_noise,
                                np.random.default_rng([seed, 3]), dataset)
    scores = [replace(m, scores=m.scores[idx]) for m in models]
    _emit(io.dataset_to_csv(dataset, scores=scores, nuisance=nuisance, extras=extras), args.out)


def cmd_sweep_mae(args):
    _emit_report(run_mae_sweep(_sweep_config(args, _sections(args))), args)


def cmd_sweep_cindex(args):
    _emit_report(run_cindex_sweep(_sweep_config(args, _sections(args))), args)


def cmd_bias_check(args):
    config = _sweep_config(args, _sections(args))
    pool = gen_pool(config.dgp)
    models = gen_model_spectrum(pool, config.training_sizes,
                                np.random.default_rng([config.dgp.seed, config.model_seed]),
                                tie=config.tie)
    k = len(models) // 2 if args.model_index is None else args.model_index
    if not 0 <= k < len(models):
        raise UsageError(f"--model-index must lie in [0, {len(models) - 1}]")
    row = run_bias_check(config, models[k], pool)
    report = ExperimentReport("naive_bias", [row], {"config": _jsonable(config)})
    _emit_report(report, args)


def _pick_model(scores, key, default):
    key = default if key is None else key
    names = [s.model_name for s in scores]
    if key in names:
        return scores[names.index(key)]
    try:
        return scores[int(key)]
    except (ValueError, IndexError):
        raise UsageError(f"unknown model {key!r}; available: {', '.join(names)}") from None


def cmd_power(args):
    sections = _sections(args)
    fields = dict(sections["power"])
    for flag, key in (("n_grid", "n_grid"), ("bootstrap", "bootstrap_samples"),
                      ("repetitions", "repetitions"), ("significance", "significance"),
                      ("folds", "folds")):
        if getattr(args, flag) is not None:
            fields[key] = getattr(args, flag)
    if args.seed is not None:
        fields["base_seed"] = args.seed
    if args.tie is not None:
        fields["tie"] = args.tie
    methods = tuple(args.methods.split(",")) if args.methods else ("standard", "naive", "npw")
    nuisance = None
    if args.data:
        loaded = _load(args, EPS_DEFAULT)
        source, scores = loaded.dataset, loaded.scores
        fields["pi"] = source.randomization_prob
        if loaded.nuisance is not None:
            fields["nuisance_mode"] = "provided"
            nuisance = loaded.nuisance
        else:
            fields["nuisance_mode"] = "cross_fit"
        a = _pick_model(scores, args.model_a, "0")
        b = _pick_model(scores, args.model_b, str(len(scores) - 1))
    else:
        dgp = _dgp_config(args, sections)
        fields["pi"] = dgp.pi
        source = gen_pool(dgp)
        sweep = SweepConfig(**{k: v for k, v in sections["sweep"].items()
                               if k in ("training_sizes", "model_seed")})
        scores = gen_model_spectrum(source, sweep.training_sizes,
                                    np.random.default_rng([dgp.seed, sweep.model_seed]))
        a = _pick_model(scores, args.model_a, "0")
        b = _pick_model(scores, args.model_b, str(len(scores) - 1))
    config = PowerConfig(**fields)
    report = run_power(source, a.scores, b.scores, config, methods, nuisance)
    report.provenance.update({"model_a": a.model_name, "model_b": b.model_name})
    _emit_report(report, args)


EPS_DEFAULT = NpwConfig().epsilon

COMMANDS = {
    "estimate": cmd_estimate, "select": cmd_select, "simulate": cmd_simulate,
    "sweep-mae": cmd_sweep_mae, "sweep-cindex": cmd_sweep_cindex,
    "bias-check": cmd_bias_check, "power": cmd_power,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except io.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateEstimationError as exc:
        print(f"degenerate estimation: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (io.DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
