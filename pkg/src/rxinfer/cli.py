"""Command-line interface.

Every subcommand takes either a JSON job file (``--job``) or flags; flags
override job fields.  Reports are JSON by default and carry their inputs, so a
report can be fed back as a job.

Exit codes: 0 success, 1 failed validation, 2 bad input, 3 cache mismatch or
corrupt cache, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import __version__
from .core import (
    DataConfiguration, InvalidInput, TypeConfiguration, lattice_size, parse_spec,
)
from .table import CacheError, CacheMismatch, LambdaTable, build_lambda_table, load_table

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_CACHE = 3
EXIT_RESOURCE = 4

DEFAULT_MAX_S = 300


class ResourceCap(RuntimeError):
    pass


# -- job ---------------------------------------------------------------------------

@dataclass
class JobConfig:
    s: Optional[int] = None
    spec: str = "iid:p=1/2"
    h0: list = field(default_factory=list)
    g: Optional[DataConfiguration] = None
    shares: Optional[str] = None
    theta: Optional[TypeConfiguration] = None
    alpha: float = 0.05
    quantity: Optional[str] = None
    side: str = "lower"
    mode: str = "exact"
    cache: Optional[str] = None
    threads: Optional[int] = None
    format: str = "json"
    rebuild: bool = False
    max_s: int = DEFAULT_MAX_S

    def spec_obj(self):
        return parse_spec(self.spec)

    def data(self) -> DataConfiguration:
        if self.g is None:
            raise InvalidInput("this command needs a data configuration (--g)")
        return self.g

    def size(self) -> int:
        if self.g is not None:
            return self.g.s
        if self.theta is not None:
            return self.theta.s
        if self.s is None:
            raise InvalidInput("sample size unknown: give --s or --g")
        return self.s


def _spec_text(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, dict):
        kind = value.get("kind") or value.get("type")
        if kind is None:
            kind = "iid" if "iid" in value or "p" in value else "urn" if "urn" in value or "m" in value else None
        if kind == "iid":
            return f"iid:p={value.get('p', '1/2')}"
        if kind == "urn":
            if "m" not in value:
                raise InvalidInput("urn spec needs m")
            return f"urn:m={value['m']}"
    raise InvalidInput(f"cannot read randomization spec {value!r}")


def _config_counts(value, cls):
    vals = list(value)
    if len(vals) != 4 or not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
        raise InvalidInput(f"expected four integer counts, got {value!r}")
    return cls(*vals)


def _parse_counts(text: str, cls):
    try:
        parts = [int(x) for x in text.replace(" ", "").strip("()[]").split(",")]
    except ValueError:
        raise InvalidInput(f"expected four comma-separated counts, got {text!r}") from None
    if len(parts) != 4:
        raise InvalidInput(f"expected four comma-separated counts, got {text!r}")
    return cls(*parts)


_JOB_KEYS = {"s", "spec", "h0", "g", "shares", "theta", "alpha", "quantity", "side", "mode",
             "cache", "threads", "format", "rebuild", "max_s"}


def load_job(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read job file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"job file {path} is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and isinstance(data.get("job"), dict):
        data = data["job"]
    if not isinstance(data, dict):
        raise InvalidInput("job file must hold a JSON object")
    return data


def make_job(args) -> JobConfig:
    raw = load_job(args.job) if getattr(args, "job", None) else {}
    job = JobConfig()
    for key in _JOB_KEYS:
        if key in raw and raw[key] is not None:
            setattr(job, key, raw[key])
    if "spec" in raw:
        job.spec = _spec_text(raw["spec"])
    if isinstance(job.h0, str):
        job.h0 = [job.h0]
    if isinstance(job.g, (list, tuple, str)):
        job.g = _parse_counts(job.g, DataConfiguration) if isinstance(job.g, str) else _config_counts(job.g, DataConfiguration)
    if isinstance(job.theta, (list, tuple, str)):
        job.theta = _parse_counts(job.theta, TypeConfiguration) if isinstance(job.theta, str) else _config_counts(job.theta, TypeConfiguration)
    if isinstance(job.shares, (list, tuple)):
        job.shares = ",".join("none" if v is None else str(v) for v in job.shares)

    for key in ("s", "alpha", "quantity", "side", "cache", "threads", "format", "shares", "max_s"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(job, key, val)
    if getattr(args, "spec", None):
        job.spec = args.spec
    if getattr(args, "h0", None):
        job.h0 = list(args.h0)
    if getattr(args, "g", None):
        job.g = _parse_counts(args.g, DataConfiguration)
    if getattr(args, "theta", None):
        job.theta = _parse_counts(args.theta, TypeConfiguration)
    if getattr(args, "mode", None):
        job.mode = args.mode
    if getattr(args, "exact", False):
        job.mode = "exact"
    if getattr(args, "rebuild", False):
        job.rebuild = True

    if job.g is not None and job.shares is not None:
        raise InvalidInput("give either a data configuration or a share pair, not both")
    if job.s is not None and job.g is not None and job.g.s != job.s:
        raise InvalidInput(f"--s {job.s} disagrees with g of size {job.g.s}")
    if job.mode not in ("exact", "log"):
        raise InvalidInput(f"mode must be exact or log, got {job.mode!r}")
    if job.format not in ("json", "csv", "text"):
        raise InvalidInput(f"format must be json, csv or text, got {job.format!r}")
    try:
        job.alpha = float(job.alpha)
    except (TypeError, ValueError):
        raise InvalidInput(f"alpha must be a number, got {job.alpha!r}") from None
    if job.threads is not None:
        job.threads = int(job.threads)
        if job.threads < 1:
            raise InvalidInput("threads must be at least 1")
    return job


def job_echo(job: JobConfig) -> dict:
    out = {"spec": job.spec, "mode": job.mode}
    if job.g is not None:
        out["g"] = list(job.g.as_tuple())
        out["s"] = job.g.s
    elif job.s is not None:
        out["s"] = job.s
    if job.shares is not None:
        out["shares"] = job.shares
    if job.theta is not None:
        out["theta"] = list(job.theta.as_tuple())
    if job.h0:
        out["h0"] = list(job.h0)
    if job.quantity:
        out.update(quantity=job.quantity, side=job.side)
    out["alpha"] = job.alpha
    return out


# -- tables --------------------------------------------------------------------------

def _cap(job: JobConfig, s: int):
    if s > job.max_s:
        raise ResourceCap(f"s={s} exceeds the table cap {job.max_s} ({lattice_size(s):,} entries); "
                          "raise it with --max-s")


def cache_name(s: int, spec, mode: str = "exact") -> str:
    """File name used when ``--cache`` points at a directory."""
    tag = str(spec).replace(":", "-").replace("=", "").replace("/", "_")
    return f"s{s}-{tag}-{mode}.rxlt"


def cache_file(job: JobConfig, s: int, spec) -> Optional[str]:
    path = job.cache
    if not path:
        return None
    if os.path.isdir(path) or path.endswith(os.sep):
        os.makedirs(path, exist_ok=True)
        return os.path.join(path, cache_name(s, spec, job.mode))
    return path


def obtain_table(job: JobConfig, s: int, spec) -> tuple[LambdaTable, dict]:
    _cap(job, s)
    path = cache_file(job, s, spec)
    info = {"path": path, "status": "none"}
    if path and os.path.exists(path) and not job.rebuild:
        table = load_table(path)
        if not (table.matches(s, spec) and table.mode == job.mode):
            raise CacheMismatch(f"cache {path} holds s={table.s} {table.spec} mode={table.mode}, job needs "
                                f"s={s} {spec} mode={job.mode}; use --rebuild to replace it")
        info["status"] = "hit"
        return table, info
    table = build_lambda_table(s, spec, threads=job.threads, mode=job.mode)
    info["build_seconds"] = table.build_seconds
    if path:
        table.save(path)
        info["status"] = "rebuilt" if job.rebuild else "built"
    else:
        info["status"] = "built-in-memory"
    return table, info


# -- commands --------------------------------------------------------------------------

def cmd_test(job: JobConfig) -> dict:
    from .hypothesis import parse_hypothesis
    from .inference import p_value

    g = job.data()
    spec = job.spec_obj()
    spec.check(g.s)
    if not job.h0:
        raise InvalidInput("test needs at least one null hypothesis (--h0)")
    hyps = [parse_hypothesis(h, g.s) for h in job.h0]
    table, info = obtain_table(job, g.s, spec)
    results = []
    for h in hyps:
        t0 = time.perf_counter()
        res = p_value(g, h, spec, table, exact_ties=job.mode == "exact", threads=job.threads)
        d = res.to_dict()
        d["h0"] = h.text
        d["h0_size"] = len(h)
        d["numerator"] = res.numerator
        d["denominator"] = res.denominator
        d["runtime_ms"] = round(1000 * (time.perf_counter() - t0), 3)
        results.append(d)
    return {"command": "test", "job": job_echo(job), "results": results, "cache": info}


def cmd_ci(job: JobConfig) -> dict:
    from .inference import confidence_interval

    g = job.data()
    spec = job.spec_obj()
    spec.check(g.s)
    if not job.quantity:
        raise InvalidInput("ci needs --quantity")
    table, info = obtain_table(job, g.s, spec)
    res = confidence_interval(g, job.quantity, job.side, job.alpha, spec, table,
                              threads=job.threads, exact_ties=job.mode == "exact")
    d = res.to_dict()
    d["interval"] = str(res)
    d["runtime_ms"] = round(1000 * res.seconds, 3)
    return {"command": "ci", "job": job_echo(job), "ci": d, "cache": info}


def cmd_table(job: JobConfig) -> dict:
    s = job.size()
    spec = job.spec_obj()
    spec.check(s)
    if not job.cache:
        raise InvalidInput("table needs --cache (a file or directory)")
    t0 = time.perf_counter()
    table, info = obtain_table(job, s, spec)
    return {"command": "table", "job": job_echo(job), "cache": info, "records": len(table),
            "multi_valued": table.multi_valued_count(), "runtime_ms": round(1000 * (time.perf_counter() - t0), 3)}


def _shares(job: JobConfig):
    from .extensions import SharePair

    if job.shares is not None:
        return SharePair.parse(job.shares)
    return SharePair.from_data(job.data())


def cmd_bounds(job: JobConfig) -> dict:
    from .extensions import bfh_lower_bounds

    sh = _shares(job)
    d, c = bfh_lower_bounds(sh)
    return {"command": "bounds", "job": job_echo(job), "shares": [str(sh.v_hat), str(sh.c_hat)],
            "defier_share_lower_bound": str(d), "complier_share_lower_bound": str(c),
            "defier_share_lower_bound_float": float(d), "complier_share_lower_bound_float": float(c)}


def cmd_limited(job: JobConfig) -> dict:
    from .extensions import limited_data_p_value

    sh = _shares(job)
    s = job.size()
    spec = job.spec_obj()
    spec.check(s)
    if not job.h0:
        raise InvalidInput("limited needs at least one null hypothesis (--h0)")
    table, info = obtain_table(job, s, spec)
    results = []
    for h in job.h0:
        t0 = time.perf_counter()
        res = limited_data_p_value(sh, h, spec, s, table, threads=job.threads, exact_ties=job.mode == "exact")
        d = res.to_dict()
        d["h0"] = h
        d["runtime_ms"] = round(1000 * (time.perf_counter() - t0), 3)
        results.append(d)
    return {"command": "limited", "job": job_echo(job), "shares": [str(sh.v_hat), str(sh.c_hat)],
            "results": results, "cache": info}


def cmd_asymptotic(job: JobConfig) -> dict:
    from .core import IID
    from .extensions import asymptotic_lambda_no_defiers, population_mle, two_proportion_test

    g = job.data()
    spec = job.spec_obj()
    form = "iid" if isinstance(spec, IID) else "urn"
    p = spec.p if isinstance(spec, IID) else Fraction(1, 2)
    mle = population_mle(g, form, p)
    lam = asymptotic_lambda_no_defiers(g, form, p)
    return {"command": "asymptotic", "job": job_echo(job), "asymptotic": True,
            "approximate": "assumes random sampling from an infinite population",
            "mle": mle.to_dict(), "lambda_no_defiers": lam,
            "zero_defier_maximizer_exists": mle.zero_defier_maximizer_exists,
            "two_proportion_test": two_proportion_test(g).to_dict()}


def cmd_mle_count(job: JobConfig) -> dict:
    import numpy as np

    s = job.size()
    spec = job.spec_obj()
    spec.check(s)
    table, info = obtain_table(job, s, spec)
    per = np.diff(table.argmax_offsets)
    hist = {int(k): int(v) for k, v in enumerate(np.bincount(per)) if v}
    return {"command": "mle-count", "job": job_echo(job), "records": len(table),
            "multi_valued": table.multi_valued_count(), "argmax_size_histogram": hist, "cache": info}


def cmd_likelihood(job: JobConfig) -> dict:
    from .likelihood import likelihood

    g = job.data()
    if job.theta is None:
        raise InvalidInput("likelihood needs --theta")
    spec = job.spec_obj()
    val = likelihood(job.theta, g, spec, exact=job.mode == "exact")
    return {"command": "likelihood", "job": job_echo(job), "value": val.value, "log_value": val.log_value,
            "exact": None if val.exact is None else str(val.exact)}


def cmd_oracle_check(job: JobConfig) -> dict:
    from .core import IID, Urn, enumerate_data_configs, enumerate_type_configs
    from .likelihood import exact_likelihood
    from .oracle import IID_CAP, exhaustive_distribution

    s_max = job.s if job.s is not None else 5
    if s_max > IID_CAP:
        raise ResourceCap(f"oracle check limited to s <= {IID_CAP}")
    checked = failed = 0
    failures = []
    for s in range(1, s_max + 1):
        specs = [IID(Fraction(1, 4)), IID(Fraction(1, 2)), IID(Fraction(2, 3))] + [Urn(m) for m in range(1, s)]
        for spec in specs:
            for theta in enumerate_type_configs(s):
                dist = exhaustive_distribution(theta, spec)
                for g in enumerate_data_configs(s):
                    checked += 1
                    if exact_likelihood(theta, g, spec) != dist.get(g, Fraction(0)):
                        failed += 1
                        if len(failures) < 10:
                            failures.append([str(spec), list(theta.as_tuple()), list(g.as_tuple())])
    return {"command": "oracle-check", "s_max": s_max, "checked": checked, "failed": failed,
            "failures": failures, "ok": failed == 0}


COMMANDS = {
    "test": cmd_test,
    "ci": cmd_ci,
    "table": cmd_table,
    "bounds": cmd_bounds,
    "limited": cmd_limited,
    "asymptotic": cmd_asymptotic,
    "mle-count": cmd_mle_count,
    "oracle-check": cmd_oracle_check,
    "likelihood": cmd_likelihood,
}


# -- output --------------------------------------------------------------------------------

def _rows(report: dict) -> tuple[list[str], list[list]]:
    cmd = report.get("command")
    if cmd in ("test", "limited"):
        head = ["h0", "lambda", "p_value", "argmax_null", "argmax_global", "runtime_ms"]
        rows = [[r.get("h0"), r.get("lambda"), r.get("p_value"), _short(r.get("argmax_null")),
                 _short(r.get("argmax_global")), r.get("runtime_ms")] for r in report["results"]]
        return head, rows
    if cmd == "ci":
        head = ["h0", "value", "p_value"]
        rows = [[x["h0"], x["value"], x["p_value"]] for x in report["ci"]["scanned"]]
        return head, rows
    flat = {k: v for k, v in report.items() if not isinstance(v, (dict, list)) and k != "command"}
    return list(flat), [list(flat.values())]


def _short(v):
    if not v:
        return ""
    return " ".join("(" + ",".join(str(x) for x in t) + ")" for t in v[:4]) + (" ..." if len(v) > 4 else "")


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, default=str)
    head, rows = _rows(report)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(head)
        w.writerows(rows)
        return buf.getvalue().rstrip("\n")
    lines = []
    if report.get("command") in ("test", "limited"):
        g = report["job"].get("g") or report.get("shares")
        lines.append(f"data {tuple(g) if g else ''}  spec {report['job']['spec']}")
        for r in report["results"]:
            p = r["p_value"]
            lines.append(f"  H0: {r['h0']:<32} lambda {r['lambda']:.4g}  {{{p:.3f}}}")
        return "\n".join(lines)
    if report.get("command") == "ci":
        c = report["ci"]
        lines.append(f"{c['side']} {1 - c['alpha']:.0%} interval for {c['quantity']}: {c['interval']}")
        for x in c["scanned"]:
            lines.append(f"  {x['h0']:<24} p = {x['p_value']:.4f}")
        return "\n".join(lines)
    width = max(len(h) for h in head) if head else 0
    return "\n".join(f"{h:<{width}}  {v}" for h, v in zip(head, rows[0] if rows else []))


# -- argument parsing -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--job", help="JSON job file; flags override its fields")
    common.add_argument("--s", type=int, help="sample size")
    common.add_argument("--g", help="data configuration g1,g2,g3,g4")
    common.add_argument("--shares", help="treated shares v,c as rationals, e.g. 7/10,3/10")
    common.add_argument("--theta", help="type configuration never,defiers,compliers,always")
    common.add_argument("--spec", help="randomization: iid:p=1/2 or urn:m=50")
    common.add_argument("--h0", action="append", help="null hypothesis expression (repeatable)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--quantity", help="quantity for ci, e.g. killed or saved / killed")
    common.add_argument("--side", choices=["lower", "upper", "two-sided"])
    common.add_argument("--cache", help="cache file, or directory for automatically named files")
    common.add_argument("--threads", type=int)
    common.add_argument("--mode", choices=["exact", "log"], help="tie handling (default exact)")
    common.add_argument("--exact", action="store_true", help="same as --mode exact")
    common.add_argument("--format", choices=["json", "csv", "text"])
    common.add_argument("--rebuild", action="store_true", help="replace a mismatched cache instead of refusing")
    common.add_argument("--max-s", dest="max_s", type=int, help=f"largest s for table builds (default {DEFAULT_MAX_S})")

    parser = argparse.ArgumentParser(prog="rxinfer", description="Exact finite-sample randomization inference "
                                     "on potential-outcome type configurations.")
    parser.add_argument("--version", action="version", version=f"rxinfer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "test": "likelihood-ratio test with worst-case p-value",
        "ci": "confidence interval by test inversion",
        "table": "build and persist the maximum-likelihood table",
        "bounds": "share-based lower bounds on defiers and compliers",
        "limited": "test using only the arm-wise treated shares",
        "asymptotic": "population-level MLE, zero-defier check and z-test (approximate)",
        "mle-count": "count data configurations with a multi-valued MLE",
        "oracle-check": "compare likelihoods with brute-force enumeration for small s",
        "likelihood": "likelihood of one type configuration for one data configuration",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        job = make_job(args)
        report = COMMANDS[args.command](job)
    except (InvalidInput, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CacheMismatch, CacheError) as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return EXIT_CACHE
    except (ResourceCap, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except Exception as exc:  # oracle size cap and similar
        from .oracle import OracleTooLarge

        if isinstance(exc, OracleTooLarge):
            print(f"resource limit: {exc}", file=sys.stderr)
            return EXIT_RESOURCE
        raise
    print(render(report, job.format))
    if report.get("ok") is False:
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
