"""Config-driven batch runs with a content-addressed result cache.

A config is an INI file::

    [experiment]
    master_seed = 1
    model = srw2d
    replicas = 8
    output_dir = out
    max_steps = 10000000
    max_range_entries = 200000000
    time_limit_s = 900
    workers = 1

    [check:range_law]
    n_list = 1e4, 1e5, 1e6

    [check:moment k3]          ; a second word labels repeated checks
    n_list = 1e4, 1e6
    k_list = 3

    [tolerances]
    range_law.band = 0.6, 1.4

Every check receives the seed ``derive_seed(master_seed, check_name)``.
Inside a check the stream for grid point n and replica r is derived from
that seed and (n, r), so checks of the same name share trajectories.
"""

import configparser
import hashlib
import json
import math
import os
import signal
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import complexity, exact_kernels, limit_laws
from .errors import ConfigurationError, ResourceError, RWRSError
from .reports import FAIL, INCONCLUSIVE, CheckReport, emit_report
from .seeding import derive_seed
from .walk_models import build_model

CACHE_ENV = "RWRS_CACHE_DIR"
RECORD_VERSION = 1


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _list(conv):
    def parse(text):
        items = [x for x in text.replace(",", " ").split() if x]
        if not items:
            raise ValueError("empty list")
        return [conv(x) for x in items]
    return parse


def _vectors(text):
    """'1 0; 0 1' -> [[1, 0], [0, 1]]."""
    return [_list(_int)(part) for part in text.split(";") if part.strip()]


# parameter name -> parser
PARSERS = {
    "n_list": _list(_int), "k_list": _list(_int), "m_list": _list(_int),
    "u_grid": _list(float), "band": _list(float), "probs": _list(float),
    "eps_list": _list(float), "w": _list(_int), "w_list": _vectors,
    "alpha": _int, "k": _int, "n": _int, "m_samples": _int, "replicas": _int,
    "eps": float, "factor": float, "max_distance": float, "max_spread": float,
    "allow_periodic": _bool, "model": str,
}


def _scalar_w(w, model):
    return w[0] if model.dimension == 1 and len(w) == 1 else w


@dataclass(frozen=True)
class CheckSpec:
    """A registered check: its runner and which parameters it accepts."""

    run: callable
    required: tuple
    optional: tuple = ()
    replicas: bool = False
    range_cap: bool = True


def _run_complexity(model, seed, n_list, eps, probs, **kw):
    return complexity.complexity_check(model, probs, n_list, eps, seed, **kw)[1]


def _run_eps(model, seed, n, eps_list, probs, **kw):
    return complexity.epsilon_sensitivity(model, probs, n, eps_list, seed, **kw)


def _run_smb(model, seed, n_list, probs, replicas, **kw):
    return complexity.smb_check(model, probs, n_list, replicas, seed, **kw)


def _run_potential(model, seed, m_list, w_list, **kw):
    return exact_kernels.potential_bound_check(model, m_list, w_list)


CHECKS = {
    "range_law": CheckSpec(
        lambda model, seed, n_list, replicas, **kw:
            limit_laws.range_law_check(model, n_list, replicas, seed, **kw),
        ("n_list",), ("band", "workers"), replicas=True),
    "localtime_law": CheckSpec(
        lambda model, seed, n_list, m_samples, **kw:
            limit_laws.localtime_law_check(model, n_list, m_samples, seed=seed, **kw),
        ("n_list", "m_samples"), ("u_grid", "max_distance")),
    "moment": CheckSpec(
        lambda model, seed, n_list, k_list, replicas, **kw:
            limit_laws.moment_check(model, n_list, k_list, replicas, seed, **kw),
        ("n_list", "k_list"), ("band", "workers"), replicas=True),
    "shifted_moment": CheckSpec(
        lambda model, seed, n_list, alpha, w, replicas, **kw:
            limit_laws.shifted_moment_check(model, n_list, alpha, _scalar_w(w, model),
                                            replicas, seed, **kw),
        ("n_list", "alpha", "w"), ("band", "allow_periodic", "workers"), replicas=True),
    "variance_scaling": CheckSpec(
        lambda model, seed, n_list, k, replicas, **kw:
            limit_laws.variance_scaling_check(model, n_list, k, replicas, seed, **kw),
        ("n_list", "k"), ("factor", "workers"), replicas=True),
    "folner": CheckSpec(
        lambda model, seed, n_list, w, replicas, **kw:
            limit_laws.folner_check(model, n_list, _scalar_w(w, model), replicas, seed, **kw),
        ("n_list", "w"), ("workers",), replicas=True),
    "complexity": CheckSpec(_run_complexity, ("n_list", "eps", "probs"), ("band",)),
    "epsilon_sensitivity": CheckSpec(_run_eps, ("n", "eps_list", "probs"), ("max_spread",)),
    "smb": CheckSpec(_run_smb, ("n_list", "probs"), ("band",), replicas=True),
    "potential_bound": CheckSpec(_run_potential, ("m_list", "w_list"), (), range_cap=False),
}

@dataclass
class CheckConfig:
    name: str
    label: str
    model: str
    params: dict


@dataclass
class ExperimentConfig:
    master_seed: int
    model: str
    replicas: int
    output_dir: Path
    max_steps: int
    max_range_entries: int
    time_limit_s: float
    workers: int = 1
    checks: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)


def load_config(path):
    """Parse and validate an INI config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(parser, base=Path(path).parent)


def parse_config(parser, base=Path(".")):
    if "experiment" not in parser:
        raise ConfigurationError("missing [experiment] section")
    ex = parser["experiment"]
    try:
        cfg = ExperimentConfig(
            master_seed=_int(ex.get("master_seed", "0")),
            model=ex.get("model", "srw2d").strip(),
            replicas=_int(ex.get("replicas", "8")),
            output_dir=base / ex.get("output_dir", "rwrs-out").strip(),
            max_steps=_int(ex.get("max_steps", "10000000")),
            max_range_entries=_int(ex.get("max_range_entries", "200000000")),
            time_limit_s=float(ex.get("time_limit_s", "900")),
            workers=_int(ex.get("workers", "1")),
        )
    except ValueError as exc:
        raise ConfigurationError(f"[experiment]: {exc}") from exc
    for key in ("replicas", "max_steps", "max_range_entries", "time_limit_s", "workers"):
        if getattr(cfg, key) <= 0:
            raise ConfigurationError(f"{key} must be positive")
    cfg.model = _validate_model(cfg.model, base)

    tolerances = {}
    if "tolerances" in parser:
        for key, text in parser["tolerances"].items():
            check, _, pname = key.partition(".")
            if check not in CHECKS or not pname:
                raise ConfigurationError(f"bad tolerance key {key!r}")
            tolerances[(check, pname)] = _parse_value(pname, text, f"[tolerances] {key}")
    cfg.tolerances = tolerances

    for section in parser.sections():
        if section in ("experiment", "tolerances"):
            continue
        if not section.startswith("check:"):
            raise ConfigurationError(f"unknown section [{section}]")
        words = section[len("check:"):].split()
        if not words:
            raise ConfigurationError(f"section [{section}] names no check")
        name, label = words[0], " ".join(words[1:]) or words[0]
        if name not in CHECKS:
            raise ConfigurationError(f"unknown check {name!r}; known: {', '.join(CHECKS)}")
        spec = CHECKS[name]
        params = {}
        for key, text in parser[section].items():
            params[key] = _parse_value(key, text, f"[{section}] {key}")
        model = params.pop("model", None)
        model = cfg.model if model is None else _validate_model(model, base)
        allowed = set(spec.required) | set(spec.optional) | {"replicas"}
        unknown = set(params) - allowed
        if unknown:
            raise ConfigurationError(f"[{section}]: unknown parameters {sorted(unknown)}")
        missing = [k for k in spec.required if k not in params]
        if missing:
            raise ConfigurationError(f"[{section}]: missing parameters {missing}")
        for (check, pname), value in tolerances.items():
            if check == name:
                params.setdefault(pname, value)
        if spec.replicas:
            params.setdefault("replicas", cfg.replicas)
        elif "replicas" in params:
            raise ConfigurationError(f"[{section}]: check takes no replicas")
        cfg.checks.append(CheckConfig(name, label, model, params))
    if not cfg.checks:
        raise ConfigurationError("config defines no checks")
    return cfg


def _parse_value(key, text, where):
    conv = PARSERS.get(key)
    if conv is None:
        raise ConfigurationError(f"{where}: unknown parameter {key!r}")
    try:
        return conv(text)
    except ValueError as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc


def _validate_model(name, base):
    """Build the model once to validate it; returns the resolved name."""
    if name.endswith(".txt") or "/" in name:
        path = Path(name)
        name = str(path if path.is_absolute() else base / path)
    try:
        build_model(name)
    except RWRSError as exc:
        raise ConfigurationError(f"model {name!r}: {exc}") from exc
    return name


def cache_key(check, model, params, master_seed):
    """SHA-256 of the canonical JSON of (check, model, params, master seed)."""
    blob = json.dumps({"check": check, "model": model, "params": params,
                       "master_seed": master_seed, "version": RECORD_VERSION},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_dir(cfg):
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else cfg.output_dir / "cache"


class _Timeout(Exception):
    pass


def _with_time_limit(fn, seconds):
    """Run fn(); raise _Timeout after ``seconds`` (main thread only)."""
    try:
        old = signal.signal(signal.SIGALRM, _raise_timeout)
    except (ValueError, AttributeError):  # not the main thread / no SIGALRM
        return fn()
    signal.setitimer(signal.ITIMER_REAL, seconds)
    try:
        return fn()
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old)


def _raise_timeout(signum, frame):
    raise _Timeout()


def _inconclusive(check, model, params, reason, start):
    params = dict(params, inconclusive_reason=reason)
    return CheckReport(check, model, params, [], INCONCLUSIVE,
                       int(1000 * (time.perf_counter() - start)))


def run_check(cfg, chk):
    """Run one configured check, honouring the budgets."""
    start = time.perf_counter()
    spec = CHECKS[chk.name]
    params = dict(chk.params)
    largest = max([max(params.get("n_list", [0]))] + [params.get("n", 0)]
                  + [max(params.get("m_list", [0]))])
    if largest > cfg.max_steps:
        return _inconclusive(chk.name, chk.model, params,
                             f"largest n {largest} exceeds max_steps {cfg.max_steps}", start)
    kwargs = dict(params)
    if spec.range_cap:
        kwargs["range_cap"] = cfg.max_range_entries
    if "workers" in spec.optional:
        kwargs["workers"] = cfg.workers
    seed = derive_seed(cfg.master_seed, chk.name)
    model = build_model(chk.model)
    try:
        report = _with_time_limit(lambda: spec.run(model, seed, **kwargs), cfg.time_limit_s)
    except ResourceError as exc:
        return _inconclusive(chk.name, model.name, params, f"resource budget: {exc}", start)
    except _Timeout:
        return _inconclusive(chk.name, model.name, params,
                             f"time limit of {cfg.time_limit_s} s exceeded", start)
    report.params["label"] = chk.label
    return report


def run_config(cfg, use_cache=True):
    """Run every check; returns (reports, exit_code)."""
    if isinstance(cfg, (str, Path)):
        cfg = load_config(cfg)
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        cdir = cache_dir(cfg)
        cdir.mkdir(parents=True, exist_ok=True)
        for d in (cfg.output_dir, cdir):
            probe = d / ".write-test"
            probe.write_text("")
            probe.unlink()
    except OSError as exc:
        raise ConfigurationError(f"output directory not writable: {exc}") from exc

    reports = []
    for chk in cfg.checks:
        key = cache_key(chk.name, chk.model, chk.params, cfg.master_seed)
        path = cdir / f"{key}.json"
        if use_cache and path.exists():
            reports.append(CheckReport.from_dict(json.loads(path.read_text())["report"]))
            continue
        report = run_check(cfg, chk)
        if report.verdict != INCONCLUSIVE or not report.params.get("inconclusive_reason"):
            record = {"key": key, "check": chk.name, "model": chk.model,
                      "params": chk.params, "master_seed": cfg.master_seed,
                      "report": report.to_dict()}
            path.write_text(json.dumps(record, sort_keys=True, indent=1, default=_plain))
        reports.append(report)

    # wall-clock time is the only nondeterministic field; keep it out of
    # the report files so identical configs give byte-identical outputs
    timings = {f"{i}:{r.check}": r.runtime_ms for i, r in enumerate(reports)}
    stable = [CheckReport.from_dict(dict(r.to_dict(), runtime_ms=0)) for r in reports]
    for fmt in ("json", "csv", "svg"):
        emit_report(stable, fmt, cfg.output_dir / f"reports.{fmt}")
    (cfg.output_dir / "timings.json").write_text(json.dumps(timings, indent=1) + "\n")
    code = 1 if any(r.verdict == FAIL for r in reports) else 0
    return reports, code


def _plain(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(type(obj).__name__)
