"""
Командная строка fsisplit.

  fsisplit run    --config <file> [--out <dir>] [--force] [--progress]
  fsisplit sweep  --plan <file> [--out <dir>] [--jobs N] [--force]
  fsisplit check  [--filter name]
  fsisplit bases  --config <file> [--json <path>]

Коды выхода: 0 — успех, 1 — сбой решателя, 2 — ошибка конфигурации,
3 — нарушен инвариант. Ошибки печатаются в stdout одним JSON-объектом.
"""
from __future__ import annotations
from pathlib import Path
from typing import List, Optional
import argparse
import json
import logging
import sys

from src.config import settings
from src.errors import ConfigError, FsiError, InternalError, InvariantFailure
from src.logging_setup import setup_logging
from src.sentry_integration import capture_exception, init_sentry
from src.utils import to_json_serializable

logger = logging.getLogger(__name__)


def _print_json(payload) -> None:
    print(json.dumps(to_json_serializable(payload), indent=2, ensure_ascii=False))


def _out_dir(out: Optional[str], source: str) -> Path:
    """--out или ARTIFACTS_DIR/<имя файла конфига без расширения>"""
    return Path(out) if out else settings.ARTIFACTS_DIR / Path(source).stem


def _print_table(verdicts) -> None:
    print("=" * 72)
    print(f"{'check':<24}{'status':<8}{'value':>14}{'threshold':>14}{'seconds':>10}")
    print("-" * 72)
    for v in verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"{v.name:<24}{status:<8}{v.value:>14.4e}{v.threshold:>14.4e}{v.detail.get('seconds', 0.0):>10.2f}")
    print("=" * 72)


# ============================
# Подкоманды
# ============================


def cmd_run(args: argparse.Namespace) -> int:
    from src.reports import ensure_out_dir, save_run
    from src.run_schema import load_run_config
    from src.splitting_driver import run

    cfg = load_run_config(args.config)
    out_dir = ensure_out_dir(_out_dir(args.out, args.config), force=args.force)
    result = run(cfg, progress=args.progress)
    save_run(result, out_dir)
    _print_json({"status": result.status, "out": str(out_dir), "summary": result.summary()})
    if not result.passed:
        failed = [v.name for v in result.verdicts if not v.passed]
        raise InvariantFailure("run verdicts failed", verdicts=failed, out=str(out_dir))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    from src.reports import ensure_out_dir, save_sweep, write_csv
    from src.sweep import load_sweep_plan, run_sweep

    plan = load_sweep_plan(args.plan)
    out_dir = ensure_out_dir(_out_dir(args.out, args.plan), force=args.force)
    jobs = args.jobs if args.jobs else settings.sweep_jobs
    table, cauchy = run_sweep(plan, out_dir / "points", jobs=jobs)
    save_sweep(table, {"axes": plan.axes, "reduction": plan.reduction, "points": len(table)}, out_dir)
    if cauchy is not None:
        write_csv(cauchy, out_dir / "cauchy.csv")
    _print_json({"status": "ok", "out": str(out_dir), "points": len(table), "reduction": plan.reduction})
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    from src.checks import run_checks

    verdicts = run_checks(args.filter)
    if not verdicts:
        raise ConfigError(f"no checks match filter {args.filter!r}")
    _print_table(verdicts)
    failed = [v.name for v in verdicts if not v.passed]
    if failed:
        raise InvariantFailure("invariant checks failed", checks=failed)
    return 0


def cmd_bases(args: argparse.Namespace) -> int:
    from src.galerkin_bases import basis_dump, build_bases
    from src.reports import write_json
    from src.run_schema import load_run_config

    cfg = load_run_config(args.config)
    b = cfg.basis
    dump = basis_dump(build_bases(b.k, cfg.geometry.L, b.gamma_cells, b.gamma_order, b.lift_nodes))
    if args.json:
        write_json(dump, Path(args.json))
        logger.info(f"[cli] basis dump written to {args.json}")
    _print_json(dump)
    return 0


# ============================
# Разбор аргументов
# ============================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsisplit", description="Lie-splitting solver for a compressible fluid coupled to a thermoelastic plate")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one trajectory -> manifest.json, ledger.csv, windows.csv")
    p.add_argument("--config", required=True, help="run config (dotted key = value or JSON)")
    p.add_argument("--out", default=None, help="output directory (default: ARTIFACTS_DIR/<config name>)")
    p.add_argument("--force", action="store_true", help="allow writing into a non-empty directory")
    p.add_argument("--progress", action="store_true", help="show a progress bar over windows")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="parameter sweep -> table.csv")
    p.add_argument("--plan", required=True, help="sweep plan (plan.axes.<param> = v1, v2, ...)")
    p.add_argument("--out", default=None, help="output directory (default: ARTIFACTS_DIR/<config name>)")
    p.add_argument("--jobs", type=int, default=0, help="worker count (0 = FSI_JOBS / all cores)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="invariant and acceptance checks")
    p.add_argument("--filter", default=None, help="substring of check names")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bases", help="dump basis diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--json", default=None, help="also write the dump to this file")
    p.set_defaults(func=cmd_bases)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging("cli")
    init_sentry(component="cli")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except FsiError as e:
        if e.exit_code == 1:
            logger.error(f"[cli] {args.command} failed: {e.code} {e.message}")
            capture_exception(e, {"command": args.command, **e.detail})
        _print_json(e.to_dict())
        return e.exit_code
    except Exception as e:
        logger.exception(f"[cli] {args.command} crashed: {type(e).__name__}: {e}")
        capture_exception(e, {"command": args.command})
        err = InternalError.wrap(e)
        _print_json(err.to_dict())
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
