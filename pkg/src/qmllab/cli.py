"""Command-line entry point: ``qmllab {calibrate,learn,qmlh,owsg} --config PATH``.

Exit codes: 0 success, 2 I/O problem, 3 invalid configuration or input file,
4 the experiment itself failed.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, InvalidParameter, QmlLabError
from .families import family_from_config
from .learner import (
    ExperimentConfig,
    LearnerParams,
    calibrated_B_hat,
    get_channel,
    measure_and_mix,
    run_learning_experiment,
)
from .measure import (
    CONSTRUCTIONS,
    MeasurementDesign,
    default_K,
    sample_distortion_ratios,
)
from .oracle import ObservationBatch
from .owsg import (
    BasisReadoutAdversary,
    FixedKeyAdversary,
    OwsgScheme,
    RandomGuessAdversary,
    learner_to_breaker,
    owsg_experiment,
    reverse_reduction_report,
)
from .qcore import index_to_key
from .qmlh import is_bad_hypothesis, qmlh_required_T, qmlh_sample_index
from .reports import ExperimentReport, to_csv, validate_report

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INVALID, f"{path} is not valid JSON: {exc}") from None


def _design_from(d: dict, num_qubits: int, errors: dict, prefix: str = "design") -> MeasurementDesign | None:
    if not isinstance(d, dict):
        errors[prefix] = "required object {K, construction, seed}"
        return None
    K = d.get("K", default_K(num_qubits))
    construction = d.get("construction", "haar_random")
    seed = d.get("seed", 0)
    if not isinstance(K, int) or isinstance(K, bool) or K < 1:
        errors[f"{prefix}.K"] = "positive integer required"
    if construction not in CONSTRUCTIONS:
        errors[f"{prefix}.construction"] = f"one of {CONSTRUCTIONS}"
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors[f"{prefix}.seed"] = "integer required"
    if any(k.startswith(prefix + ".") for k in errors):
        return None
    return MeasurementDesign(num_qubits, K, construction, seed)


def _family_from(spec, errors: dict, field: str = "family"):
    if not isinstance(spec, dict):
        errors[field] = "required object"
        return None
    try:
        return family_from_config(spec)
    except Exception as exc:  # noqa: BLE001 - surfaced as a validation error
        errors[field] = f"cannot build family: {exc}"
        return None


def _int_field(cfg: dict, name: str, default, minimum: int, errors: dict):
    v = cfg.get(name, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        errors[name] = f"integer >= {minimum} required"
    return v


def _num_field(cfg: dict, name: str, default, errors: dict, minimum: float = 0.0,
               strict: bool = True):
    v = cfg.get(name, default)
    bad = not isinstance(v, (int, float)) or isinstance(v, bool) or (v <= minimum if strict else v < minimum)
    if bad:
        errors[name] = f"number {'>' if strict else '>='} {minimum} required"
    return v


def _write(out_dir: Path, name: str, text: str):
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out_dir / name}: {exc.strerror or exc}") from None


def _emit(report: ExperimentReport, out_dir: Path, stem: str, fmt: str,
          csv_files: dict[str, str]):
    data = json.loads(report.to_json())
    validate_report(data)
    if fmt in ("json", "both"):
        _write(out_dir, f"{stem}.json", report.to_json())
    if fmt in ("csv", "both"):
        for name, text in csv_files.items():
            _write(out_dir, name, text)


def cmd_calibrate(cfg: dict, args) -> list[ExperimentReport]:
    if not isinstance(cfg, dict):
        raise ConfigError({"<root>": "config must be a JSON object"})
    errors: dict = {}
    n = _int_field(cfg, "num_qubits", None, 1, errors)
    pairs = _int_field(cfg, "trial_pairs", 200, 1, errors)
    seed = _int_field(cfg, "master_seed", 0, 0, errors)
    design = _design_from(cfg.get("design"), n, errors) if "num_qubits" not in errors else None
    if errors:
        raise ConfigError(errors)
    if args.seed is not None:
        seed = args.seed
    ratios = sample_distortion_ratios(design, pairs, np.random.default_rng([seed, 0]))
    worst = float(ratios.min())
    trials = [{"pair_index": i, "ratio": float(r)} for i, r in enumerate(ratios)]
    report = ExperimentReport(
        kind="calibrate",
        config={**cfg, "master_seed": seed},
        parameters={"num_qubits": n, "K": design.K, "construction": design.construction,
                    "design_seed": design.seed, "outcome_bits": design.outcome_bits},
        trials=trials,
        aggregate={"B_hat": 0.9 * worst, "worst_ratio": worst, "pairs": len(trials),
                   "mean_ratio": float(ratios.mean()), "max_ratio": float(ratios.max())},
    )
    _emit(report, args.out, "calibrate_report", args.format,
          {"calibrate_ratios.csv": to_csv(trials, ["pair_index", "ratio"])})
    return [report]


def cmd_learn(cfg: dict, args) -> list[ExperimentReport]:
    if not isinstance(cfg, dict):
        raise ConfigError({"<root>": "config must be a JSON object"})
    deltas = cfg.get("delta_bits")
    sweep = isinstance(deltas, list)
    settings = deltas if sweep else [deltas]
    if sweep and not settings:
        raise ConfigError({"delta_bits": "sweep list must be nonempty"})
    configs = []
    for d in settings:
        c = {**cfg, "delta_bits": d}
        if args.seed is not None:
            c["master_seed"] = args.seed
        configs.append(ExperimentConfig.from_dict(c))
    reports, summary, trial_rows = [], [], []
    for i, conf in enumerate(configs):
        rep = run_learning_experiment(conf, threads=args.threads)
        agg, par = rep.aggregate, rep.parameters
        summary.append({"setting": i, "delta_bits": conf.delta_bits, "T": par["T"],
                        "B_hat": par["B_hat"], "trials": agg["trials"],
                        "success_rate": agg["success_rate"], "ci_low": agg["ci_low"],
                        "ci_high": agg["ci_high"],
                        "min_per_key_success_rate": agg["min_per_key_success_rate"],
                        "mean_trace_distance": agg["mean_trace_distance"]})
        trial_rows += [{"setting": i, "trial_index": t["trial_index"], "key": t["key"],
                        "trace_distance": t["trace_distance"], "success": t["success"]}
                       for t in rep.trials]
        reports.append(rep)
    csvs = {
        "learn_summary.csv": to_csv(summary, list(summary[0])),
        "learn_trials.csv": to_csv(trial_rows, ["setting", "trial_index", "key",
                                                "trace_distance", "success"]),
    }
    for i, rep in enumerate(reports):
        stem = f"learn_report_{i}" if sweep else "learn_report"
        _emit(rep, args.out, stem, args.format, csvs if i == len(reports) - 1 else {})
    return reports


def cmd_qmlh(cfg: dict, args) -> list[ExperimentReport]:
    errors: dict = {}
    if not isinstance(cfg, dict):
        raise ConfigError({"<root>": "config must be a JSON object"})
    eps = _num_field(cfg, "epsilon", None, errors)
    delta = _num_field(cfg, "delta_bits", None, errors)
    trials = _int_field(cfg, "trials", 2000, 1, errors)
    base = _int_field(cfg, "base_batch_size", 4, 1, errors)
    alpha = _num_field(cfg, "mix_alpha", 0.5, errors, strict=False)
    seed = _int_field(cfg, "master_seed", 0, 0, errors)
    sweep = cfg.get("T_sweep")
    if sweep is not None and (not isinstance(sweep, list) or not sweep or not all(
            isinstance(t, int) and not isinstance(t, bool) and t >= 1 for t in sweep)):
        errors["T_sweep"] = "nonempty list of positive integers"
    suite = cfg.get("families")
    entries = []
    if not isinstance(suite, list) or not suite:
        errors["families"] = "nonempty list of {family, design}"
    else:
        for j, entry in enumerate(suite):
            if not isinstance(entry, dict):
                errors[f"families[{j}]"] = "object required"
                continue
            fam = _family_from(entry.get("family"), errors, f"families[{j}].family")
            des = _design_from(entry.get("design"), fam.num_qubits, errors,
                               f"families[{j}].design") if fam else None
            entries.append((fam, des))
    fixed_batch = None
    if cfg.get("batch_file") is not None:
        raw = _load_json(cfg["batch_file"])
        try:
            if not isinstance(raw, dict):
                raise InvalidParameter("observation batch must be a JSON object")
            fixed_batch = ObservationBatch.from_dict(raw)
        except InvalidParameter as exc:
            errors["batch_file"] = str(exc)
    if errors:
        raise ConfigError(errors)
    if isinstance(alpha, (int, float)) and alpha > 1:
        raise ConfigError({"mix_alpha": "number in [0, 1] required"})
    if args.seed is not None:
        seed = args.seed
    if fixed_batch is not None:
        for j, (fam, des) in enumerate(entries):
            if fixed_batch.outcome_bits != des.outcome_bits:
                raise ConfigError({"batch_file": f"outcome bits {fixed_batch.outcome_bits} do not "
                                                 f"match families[{j}] ({des.outcome_bits})"})

    rows = []
    for j, (fam, des) in enumerate(entries):
        channel = get_channel(fam, des, alpha)
        T_req = qmlh_required_T(eps, delta, fam.key_bits)
        Ts = sorted(set(sweep)) if sweep else [T_req]

        def run(i, T, j=j, fam=fam, des=des, channel=channel):
            rng = np.random.default_rng([seed, j, T, i])
            if fixed_batch is not None:
                batch = fixed_batch
            else:
                key = index_to_key(int(rng.integers(fam.num_keys)), fam.key_bits)
                batch = measure_and_mix(fam, key, des, base, alpha, rng)
            h = qmlh_sample_index(channel, batch, rng, T)
            return is_bad_hypothesis(channel.log_likelihoods(batch), h, eps)

        for T in Ts:
            if args.threads > 1:
                with ThreadPoolExecutor(max_workers=args.threads) as pool:
                    bad = sum(pool.map(lambda i, T=T: run(i, T), range(trials)))
            else:
                bad = sum(run(i, T) for i in range(trials))
            rate = bad / trials
            bound = min(1.0, 2 ** fam.key_bits * (1 + 1 / eps) ** (-T))
            target = 2.0 ** (-delta)
            slack = 3 * math.sqrt(target / trials)
            rows.append({"family_index": j, "key_bits": fam.key_bits, "T": T,
                         "T_required": T_req, "trials": trials, "bad": bad, "bad_rate": rate,
                         "bound": bound, "target": target, "slack": slack,
                         "holds": rate <= max(bound, target) + slack if T >= T_req else None})
    report = ExperimentReport(
        kind="qmlh",
        config={**cfg, "master_seed": seed},
        parameters={"epsilon": eps, "delta_bits": delta, "base_batch_size": base,
                    "mix_alpha": alpha, "fixed_batch": fixed_batch is not None},
        trials=rows,
        aggregate={"rows": len(rows),
                   "all_required_hold": all(r["holds"] for r in rows if r["holds"] is not None)},
    )
    _emit(report, args.out, "qmlh_report", args.format,
          {"qmlh_sweep.csv": to_csv(rows, list(rows[0]))})
    return [report]


def _adversary_from(spec: dict, learner_params, design, errors: dict, field: str):
    kind = spec.get("type") if isinstance(spec, dict) else None
    if kind == "learner":
        return learner_to_breaker(learner_params, design) if learner_params else None
    if kind == "random_guess":
        return RandomGuessAdversary()
    if kind == "fixed_key":
        return FixedKeyAdversary(spec.get("key", ""))
    if kind == "basis_readout":
        return BasisReadoutAdversary(float(spec.get("p_answer", 1.0)))
    errors[field] = "type must be learner, random_guess, fixed_key or basis_readout"
    return None


def cmd_owsg(cfg: dict, args) -> list[ExperimentReport]:
    errors: dict = {}
    if not isinstance(cfg, dict):
        raise ConfigError({"<root>": "config must be a JSON object"})
    seed = _int_field(cfg, "master_seed", 0, 0, errors)
    trials = _int_field(cfg, "trials", 200, 1, errors)
    rev_eps = _num_field(cfg, "reverse_epsilon", 2.0, errors, minimum=1.0)
    lp = cfg.get("learner", {})
    learner_cfg = {}
    if not isinstance(lp, dict):
        errors["learner"] = "object required"
    else:
        learner_cfg = {
            "epsilon": _num_field(lp, "epsilon", 4.0, errors),
            "delta_bits": _num_field(lp, "delta_bits", 7.0, errors, strict=False),
            "mix_alpha": _num_field(lp, "mix_alpha", 0.5, errors, strict=False),
        }
    games = cfg.get("games")
    prepared = []
    if not isinstance(games, list) or not games:
        errors["games"] = "nonempty list required"
    else:
        for j, g in enumerate(games):
            f = f"games[{j}]"
            if not isinstance(g, dict):
                errors[f] = "object required"
                continue
            fam = _family_from(g.get("family"), errors, f"{f}.family")
            des = _design_from(g.get("design", {}), fam.num_qubits, errors, f"{f}.design") if fam else None
            T = g.get("T", 0)
            if not isinstance(T, int) or isinstance(T, bool) or T < 0:
                errors[f"{f}.T"] = "integer >= 0 required"
            prepared.append((g.get("name", f"game{j}"), fam, des, T, g.get("adversary")))
    if errors:
        raise ConfigError(errors)
    if args.seed is not None:
        seed = args.seed
    eps = learner_cfg["epsilon"]
    all_records, runs = [], {}
    for j, (name, fam, des, T, adv_spec) in enumerate(prepared):
        params = None
        if des is not None:
            B_hat = calibrated_B_hat(des).B_hat
            params = LearnerParams(eps, learner_cfg["delta_bits"], learner_cfg["mix_alpha"],
                                   T=None, B_hat=B_hat)
        adv_errors: dict = {}
        adversary = _adversary_from(adv_spec, params, des, adv_errors, f"games[{j}].adversary")
        if adv_errors:
            raise ConfigError(adv_errors)
        scheme = OwsgScheme(fam)
        res = owsg_experiment(scheme, adversary, trials, T, seed=seed + j,
                              good_threshold=1 - 1 / eps, threads=args.threads)
        rev = reverse_reduction_report(res, rev_eps)
        good = res.good_rate or 0.0
        min_good = res.min_good_fidelity if res.min_good_fidelity is not None else 1.0
        forward_bound = good * min_good - res.ci_width
        runs[name] = {**res.summary(), "adversary": adversary.name, "T": T,
                      "forward_bound": forward_bound,
                      "forward_holds": res.success_rate >= forward_bound,
                      "reverse": rev.summary()}
        all_records += [{"game": name, **r} for r in res.records]
    report = ExperimentReport(
        kind="owsg", game="owsg", config={**cfg, "master_seed": seed},
        parameters={"learner": learner_cfg, "reverse_epsilon": rev_eps, "trials": trials},
        trials=all_records, aggregate={"runs": runs},
    )
    summary_rows = [{"game": k, **{c: v[c] for c in ("success_rate", "ci_low", "ci_high",
                                                      "exact_expected", "good_rate")}}
                    for k, v in runs.items()]
    _emit(report, args.out, "owsg_report", args.format,
          {"owsg_summary.csv": to_csv(summary_rows, list(summary_rows[0]))})
    return [report]


COMMANDS = {"calibrate": cmd_calibrate, "learn": cmd_learn, "qmlh": cmd_qmlh, "owsg": cmd_owsg}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmllab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=".", type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config master_seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $QMLLAB_THREADS or 1)")
        p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is None:
        try:
            args.threads = int(os.environ.get("QMLLAB_THREADS", "1"))
        except ValueError:
            print("error: QMLLAB_THREADS must be an integer", file=sys.stderr)
            return EXIT_INVALID
    if args.threads < 1 or (args.seed is not None and not 0 <= args.seed < 2**64):
        print("error: --threads must be >= 1 and --seed a u64", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = _load_json(args.config)
        COMMANDS[args.command](cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"invalid config: {', '.join(sorted(exc.fields))}", file=sys.stderr)
        for k, v in sorted(exc.fields.items()):
            print(f"  {k}: {v}", file=sys.stderr)
        return EXIT_INVALID
    except (QmlLabError, jsonschema.ValidationError) as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
