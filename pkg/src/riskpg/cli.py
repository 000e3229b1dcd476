"""Command line entry point: ``riskpg run | oracle | validate``.

Exit status is 0 on success, 2 when the config (or a supplied parameter
vector) fails validation and 3 when a run fails.  Failures print one JSON
object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DimensionMismatch, RiskPGError, ScheduleInvalid
from .harness import load_config, oracle_eval, override, read_theta, run_experiment, validate

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


def _error(kind: str, exc: Exception, code: int, **extra) -> int:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc), **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskpg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="experiment TOML file")
        sp.add_argument("--output-dir", help="override [experiment].output_dir")
        sp.add_argument("--replications", type=int, help="override the replication count")
        sp.add_argument("--seed", type=int, help="override the base seed")

    r = sub.add_parser("run", help="run every replication and write CSV artifacts")
    common(r)
    r.add_argument("--workers", type=int, help="parallel replications")
    o = sub.add_parser("oracle", help="exact objective and risk of a parameter vector")
    common(o)
    o.add_argument("--theta", required=True, help="file of comma/whitespace separated numbers")
    v = sub.add_parser("validate", help="check the config and its step-size schedules")
    common(v)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = override(config, output_dir=args.output_dir, replications=args.replications,
                          seed=args.seed, workers=getattr(args, "workers", None))
        report = validate(config)
        if args.command == "validate":
            print(json.dumps({"valid": True, "mode": report.mode,
                              "conditions": [c.name for c in report.conditions]}, sort_keys=True))
            return EXIT_OK
        if args.command == "oracle":
            rec = oracle_eval(config.run, read_theta(args.theta))
            print(json.dumps({"algorithm": config.run.algorithm, **rec.as_dict()}, sort_keys=True))
            return EXIT_OK
    except ScheduleInvalid as exc:
        failed = [c.name for c in exc.report.failures] if exc.report is not None else []
        return _error("validation", exc, EXIT_INVALID, failed_conditions=failed)
    except (ConfigError, DimensionMismatch) as exc:
        return _error("validation", exc, EXIT_INVALID)
    except (RiskPGError, ValueError, OSError, ArithmeticError) as exc:
        return _error("runtime", exc, EXIT_RUNTIME)

    try:
        result = run_experiment(config)
    except (RiskPGError, ValueError, OSError, ArithmeticError) as exc:
        return _error("runtime", exc, EXIT_RUNTIME)
    print(json.dumps({"output_dir": str(result.output_dir), "replications": len(result.rows)},
                     sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
