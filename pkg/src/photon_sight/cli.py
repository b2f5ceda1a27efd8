"""``photon-sight <command> --config <file> [--output <dir>] [--seed <u64>]``

Writes into the output directory:

* ``trials.csv``   per-trial records (simulation commands except source-stats)
* ``points.csv``   frequency-of-seeing points (hecht)
* ``source_stats.csv`` one-row source summary (source-stats)
* ``summary.json`` session, fit, test or CH result
* ``config_echo.ini`` the fully resolved configuration

and prints one headline line. Failures exit nonzero with a JSON error object
on stderr (exit 2 for configuration errors, 1 otherwise).
"""

import argparse
import json
import math
import os
import sys

from .config import COMMANDS, ConfigError, echo_config, parse_config, resolved_dict
from .inference import fit_hecht
from .observer import frequency_of_seeing
from .protocols import (
    p_obs_threshold,
    required_trials,
    run_2afc,
    run_bell,
    run_superposition_vs_mixture,
    simulate_hecht,
)
from .protocols.power import exact_power
from .records import (
    points_from_trials,
    read_any_points,
    write_points_csv,
    write_source_stats_csv,
    write_trials_csv,
)
from .source import (
    StopConditionUnreachable,
    herald_probability,
    predicted_g2,
    predicted_heralding_efficiency,
    run_source,
)


def _clean(obj):
    """Make ``obj`` strict-JSON safe (NaN/inf become null)."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_with(path, writer, payload):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer(payload, fh)


def _cmd_source_stats(cfg, out, n_jobs):
    p = cfg.protocol
    stats = run_source(cfg.source, p["stop"], p["count"], cfg.seed,
                       max_pulses=p["max_pulses"], n_jobs=n_jobs)
    _write_with(os.path.join(out, "source_stats.csv"), write_source_stats_csv, stats)
    predicted = {
        "g2": predicted_g2(cfg.source),
        "heralding_efficiency": predicted_heralding_efficiency(cfg.source),
        "herald_rate": herald_probability(cfg.source) * cfg.source.rep_rate,
    }
    summary = {"source_stats": stats.to_dict(), "predicted": predicted}
    headline = (
        f"source-stats: heralding efficiency {stats.estimated_heralding_efficiency:.4f}, "
        f"herald rate {stats.herald_rate:.2f} Hz, g2 {stats.estimated_g2:.4g} "
        f"over {stats.pulses} pulses"
    )
    return summary, headline


def _cmd_hecht(cfg, out, n_jobs):
    p = cfg.protocol
    table = simulate_hecht(p["intensities"], p["trials_per_intensity"], cfg.eye, cfg.seed,
                           rating_criteria=p["rating_criteria"], n_jobs=n_jobs)
    points = points_from_trials(table)
    _write_with(os.path.join(out, "trials.csv"), write_trials_csv, table)
    _write_with(os.path.join(out, "points.csv"), write_points_csv, points)
    n = cfg.eye.threshold_n
    alpha = cfg.eye.detection_efficiency
    summary = {
        "points": [
            {"mean_photons": m, "trials": t, "seen": s, "fraction": s / t,
             "analytic": frequency_of_seeing(n, alpha, m)}
            for m, t, s in points
        ],
        "condition_counts": table.condition_counts(),
    }
    if p["rating_criteria"] is not None:
        summary["mean_rating"] = {
            repr(float(m)): float(table.rating[table.mean_photons == m].mean()) for m, _, _ in points
        }
    frac = ", ".join(f"{m:g}:{s / t:.3f}" for m, t, s in points)
    return summary, f"hecht: seen fraction by mean photons {frac}"


def _cmd_afc(cfg, out, n_jobs):
    p = cfg.protocol
    labels = ("Early", "Late") if p["temporal"] else ("Left", "Right")
    session = run_2afc(cfg.source, cfg.eye, p["trials"], p["control_fraction"], cfg.seed,
                       alternatives=labels, n_jobs=n_jobs)
    _write_with(os.path.join(out, "trials.csv"), write_trials_csv, session.trials)
    acc = session.accuracy
    if acc is None:
        headline = "afc: no stimulus trials (control_fraction = 1)"
    else:
        lo, hi = acc["wilson_interval"]
        headline = (f"afc: accuracy {acc['estimate']:.4f} [{lo:.4f}, {hi:.4f}] over "
                    f"{acc['trials']} stimulus trials (p = {acc['p_value_above_chance']:.3g})")
    return session.to_dict(), headline


def _cmd_superposition(cfg, out, n_jobs):
    p = cfg.protocol
    cmp = run_superposition_vs_mixture(cfg.source, cfg.eye, p["trials"], p["anomaly_epsilon"],
                                       cfg.seed, n_jobs=n_jobs)
    from .records import TrialTable

    table = TrialTable.concat([cmp.superposition.trials, cmp.mixture.trials])
    _write_with(os.path.join(out, "trials.csv"), write_trials_csv, table)
    s = cmp.seen
    headline = (f"superposition: right|seen {s['k1']}/{s['n1']} vs mixture {s['k2']}/{s['n2']}, "
                f"p = {cmp.p_value:.4g}")
    return cmp.to_dict(), headline


def _cmd_bell(cfg, out, n_jobs):
    p = cfg.protocol
    threshold = p_obs_threshold(p["threshold_mode"], detector_efficiency=p["detector_efficiency"])
    result = run_bell(p["trials"], detector_efficiency=p["detector_efficiency"], eye=cfg.eye,
                      observer_end_to_end=p["observer_end_to_end"], control_prob=p["control_prob"],
                      rng=cfg.seed, threshold=threshold, n_jobs=n_jobs)
    _write_with(os.path.join(out, "trials.csv"), write_trials_csv, result.trials)
    violated = result.violation_p_value < p["alpha"]
    summary = result.to_dict()
    summary.update(
        threshold_mode=p["threshold_mode"],
        published_threshold=p_obs_threshold("paper"),
        derived_threshold=_derived_or_none(p["detector_efficiency"]),
        violated=violated,
        condition_counts=result.trials.condition_counts(),
    )
    headline = (f"bell: p_obs {result.p_obs_estimate:.4f} vs threshold {threshold:.5f}, "
                f"p = {result.violation_p_value:.3g} ({'violation' if violated else 'no violation'})")
    return summary, headline


def _derived_or_none(eta):
    try:
        return p_obs_threshold("derived", detector_efficiency=eta)
    except ValueError:
        return None


def _cmd_fit(cfg, out, n_jobs):
    p = cfg.protocol
    with open(p["input"], encoding="utf-8") as fh:
        points = read_any_points(fh)
    fit = fit_hecht(points, (p["n_min"], p["n_max"]))
    summary = {"fit": fit.to_dict(), "points": [list(pt) for pt in points]}
    lo, hi = fit.alpha_ci
    return summary, f"fit: n = {fit.n_hat}, alpha = {fit.alpha_hat:.5f} [{lo:.5f}, {hi:.5f}]"


def _cmd_power(cfg, out, n_jobs):
    p = cfg.protocol
    n = required_trials(p["p0"], p["p1"], p["alpha"], p["power"])
    achieved = float(exact_power(n, p["p0"], p["p1"], p["alpha"]))
    summary = {"required_trials": n, "achieved_power": achieved, **p}
    return summary, f"{n}"


_COMMANDS = {
    "source-stats": _cmd_source_stats,
    "hecht": _cmd_hecht,
    "afc": _cmd_afc,
    "superposition": _cmd_superposition,
    "bell": _cmd_bell,
    "fit": _cmd_fit,
    "power": _cmd_power,
}


def execute(cfg, n_jobs=1):
    """Run ``cfg``, write its artifacts and return the headline string."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "config_echo.ini"), echo_config(cfg))
    summary, headline = _COMMANDS[cfg.command](cfg, out, n_jobs)
    document = {"command": cfg.command, "config": resolved_dict(cfg, include_output=False),
                "result": summary}
    _write(os.path.join(out, "summary.json"), dumps(document))
    return headline


def build_parser():
    parser = argparse.ArgumentParser(prog="photon-sight", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI-like configuration file")
    parser.add_argument("--output", help="output directory (overrides run.output_dir)")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides run.seed)")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker threads; never changes results")
    return parser


def _fail(kind, messages, code):
    sys.stderr.write(json.dumps({"error": kind, "messages": list(messages)}, sort_keys=True) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        return _fail("io", [str(exc)], 1)
    try:
        cfg = parse_config(text, args.command, base_dir=os.path.dirname(os.path.abspath(args.config)),
                           seed=args.seed, output_dir=args.output)
    except ConfigError as exc:
        return _fail("config", exc.messages, 2)
    try:
        headline = execute(cfg, n_jobs=args.workers)
    except StopConditionUnreachable as exc:
        return _fail("unreachable", [str(exc), json.dumps(_clean(exc.diagnostic), sort_keys=True)], 1)
    except OSError as exc:
        return _fail("io", [str(exc)], 1)
    except ValueError as exc:
        return _fail("value", [str(exc)], 1)
    print(headline)
    return 0


if __name__ == "__main__":
    sys.exit(main())
