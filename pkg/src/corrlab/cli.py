"""Command-line experiment driver.

Every run writes ``<out>/<name>/config.json``, ``results.jsonl`` and
``log.txt``.  Results are serialized with sorted keys and no timestamps so
that re-running a config with the same seed reproduces results.jsonl byte
for byte.

Exit codes: 0 ok, 1 computational failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import CorrlabError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}
_BOOL = {"type": "boolean"}
_GRAPH = {"anyOf": [{"type": "string"}, {"type": "object"}]}
_COMPLEX = {"anyOf": [{"type": "string"}, {"type": "number"},
                      {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_RATIONAL = {"anyOf": [{"type": "string"}, {"type": "integer"}]}
_MATRIX = {"anyOf": [{"type": "string"}, {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}]}
_GRID = {"anyOf": [{"type": "string"}, {"type": "array", "items": {"type": "number"}}]}
_INTLIST = {"anyOf": [{"type": "string"}, {"type": "array", "items": {"type": "integer"}}]}

# name -> (schema, default, help)
COMMANDS: dict[str, dict] = {
    "degrees": {
        "model": ({"enum": ["projective", "graph-sum", "sym-product"]}, "graph-sum", "degree model"),
        "s": (_INT, 2, "degree for the projective model"),
        "s1": (_INT, 2, "first degree of the graph-sum model"),
        "s2": (_INT, 2, "second degree of the graph-sum model"),
        "d0": (_INT, 2, "forward count for the symmetric-product model"),
        "d1": (_INT, 3, "backward count for the symmetric-product model"),
        "k": (_INT, 3, "dimension"),
    },
    "mult": {
        "graph": (_GRAPH, None, "graph polynomial: JSON file, JSON object or expression in z, w"),
        "k": (_INT, 1, "dimension"),
        "q": (_INT, 1, "bidegree index"),
    },
    "compose": {
        "f": (_GRAPH, None, "outer correspondence"),
        "g": (_GRAPH, None, "inner correspondence (defaults to f)"),
        "n": (_INT, 1, "number of extra self-compositions of the result"),
    },
    "equidist": {
        "graph": (_GRAPH, None, "graph polynomial"),
        "start": (_COMPLEX, "1.0+0.5j", "starting point a"),
        "depth": (_INT, 12, "backward depth n"),
        "paths": (_INT, 200000, "number of Monte-Carlo paths"),
        "rate_depth": (_INT, None, "depth of the exact pullback rate fit (default: depth, 0 disables)"),
        "csv": (_BOOL, False, "also export the sampled measure as CSV"),
    },
    "loja": {
        "graph": (_GRAPH, None, "graph polynomial"),
        "z0": (_COMPLEX, "0", "base point"),
        "r_max": (_NUM, 1e-2, "largest sample radius"),
        "r_min": (_NUM, 1e-7, "smallest sample radius"),
        "n_radii": (_INT, 11, "number of radii"),
    },
    "certify-rate": {
        "dq": (_NUM, 3, "d_q"),
        "dqm1": (_NUM, 1, "d_{q-1}"),
        "rho": (_INT, 1, "local multiplicity"),
        "k": (_INT, 1, "dimension"),
        "q": (_INT, 1, "bidegree index"),
        "xi_grid": (_GRID, "log:-4:-16:13", "xi values, list or log:a:b:n"),
        "delta": (_NUM, None, "intermediate growth rate (default geometric mean)"),
        "delta_adj": (_INT, None, "adjoint multiplicity, enables lambda0/lambda1"),
        "r_plus": (_NUM, 0.0, "spectral radius r_+"),
    },
    "critical-orbit": {
        "d0": (_INT, 2, "d0"),
        "d1": (_INT, 3, "d1"),
        "c": (_RATIONAL, "7/5", "rational parameter c"),
        "nmax": (_INT, 2, "largest chain length"),
        "numeric": (_BOOL, True, "cross-check with numeric chain search"),
    },
    "symprod": {
        "h": (_GRAPH, None, "graph of h"),
        "k": (_INT, 2, "number of factors"),
        "samples": (_INT, 100, "number of sample points"),
    },
    "jordan": {
        "matrix": (_MATRIX, None, "square matrix (JSON array or file)"),
        "n": (_INTLIST, "40", "indices for Lambda_n, comma separated"),
        "surjectivity": (_BOOL, True, "check the limit along a convergent subsequence"),
    },
}

REQUIRED = {"mult": ["graph"], "compose": ["f"], "equidist": ["graph"], "loja": ["graph"],
            "symprod": ["h"], "jordan": ["matrix"]}

COMMON = {
    "name": (_STR, None, "run name (default: command plus config hash)"),
    "seed": (_INT, 0, "master seed"),
    "jobs": (_INT, 1, "worker processes"),
}


def config_schema(command: str) -> dict:
    props = {k: v[0] for k, v in {**COMMANDS[command], **COMMON}.items()}
    props["command"] = {"const": command}
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": REQUIRED.get(command, [])}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------


def parse_graph(spec):
    from .corr1 import make_corr
    from .polyalg import BiPoly

    if isinstance(spec, str) and spec.endswith(".json") and Path(spec).exists():
        spec = json.loads(Path(spec).read_text())
    if isinstance(spec, dict):
        try:
            return make_corr(BiPoly.from_json(spec))
        except (KeyError, TypeError, IndexError) as exc:
            raise ConfigError(f"graph object needs 'expr' or 'coeffs': {exc}") from exc
    return make_corr(str(spec))


def parse_complex(v) -> complex:
    if isinstance(v, list):
        return complex(v[0], v[1])
    if isinstance(v, (int, float)):
        return complex(v)
    s = str(v).replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex value {v!r}") from exc


def parse_point(v):
    """Exact rational when possible, else complex."""
    if isinstance(v, (int,)) or (isinstance(v, str) and _is_rational(v)):
        return Fraction(v)
    return parse_complex(v)


def _is_rational(s: str) -> bool:
    try:
        Fraction(s)
        return True
    except (ValueError, ZeroDivisionError):
        return False


def parse_grid(v) -> list[float]:
    if isinstance(v, list):
        return [float(x) for x in v]
    s = str(v)
    if s.startswith("log:"):
        try:
            a, b, n = s[4:].split(":")
            return [float(x) for x in np.logspace(float(a), float(b), int(n))]
        except ValueError as exc:
            raise ConfigError(f"bad grid spec {s!r}, expected log:a:b:n") from exc
    return [float(x) for x in s.split(",")]


def parse_matrix(v) -> np.ndarray:
    if isinstance(v, str):
        v = json.loads(Path(v).read_text()) if Path(v).exists() else json.loads(v)
    M = np.asarray(v, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError("matrix must be square")
    return M


def parse_intlist(v) -> list[int]:
    if isinstance(v, list):
        return [int(x) for x in v]
    return [int(x) for x in str(v).split(",") if x.strip()]


def to_jsonable(x):
    """Deterministic JSON-compatible form: complex -> [re, im], Fraction -> str."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        if not (math.isfinite(x.real) and math.isfinite(x.imag)):
            return "inf"
        return [x.real, x.imag]
    if hasattr(x, "to_json"):
        return to_jsonable(x.to_json())
    return x


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_degrees(cfg, log):
    from .cohomlin import degrees_graph_sum, degrees_projective, degrees_sym_product, kunneth_bound, monotonicity_check

    m = cfg["model"]
    if m == "projective":
        D = degrees_projective(cfg["s"], cfg["k"])
    elif m == "graph-sum":
        D = degrees_graph_sum(cfg["s1"], cfg["s2"], cfg["k"])
    else:
        D = degrees_sym_product(cfg["d0"], cfg["d1"], cfg["k"])
    log.info("degrees %s", list(D.degrees))
    yield {"kind": "degrees", "profile": D, "monotonicity": monotonicity_check(D), "kunneth_bound": kunneth_bound(D)}


def cmd_mult(cfg, log):
    from .mult import mult_report

    f = parse_graph(cfg["graph"])
    rep = mult_report(f, cfg["k"], cfg["q"])
    log.info("rho=%d delta=%d", rep.rho, rep.delta)
    yield {"kind": "mult", "bidegree": list(f.bidegree), "report": rep}


def cmd_compose(cfg, log):
    from .corr1 import compose

    f = parse_graph(cfg["f"])
    g = parse_graph(cfg["g"]) if cfg.get("g") is not None else f
    h = compose(f, g)
    for _ in range(cfg["n"] - 1):
        h = compose(f, h)
    log.info("bidegree %s, %d factors removed", h.bidegree, len(h.removed))
    yield {"kind": "compose", "graph": h.to_json(), "bidegree": list(h.bidegree),
           "removed": [{"factor": fac.to_json(), "multiplicity": m} for fac, m in h.removed]}


def cmd_equidist(cfg, log, out_dir: Path):
    from .green import backward_orbit_sample, equidist_rate, pair_with_sigma, standard_test_functions

    f = parse_graph(cfg["graph"])
    a = parse_complex(cfg["start"])
    mu = backward_orbit_sample(f, a, cfg["depth"], cfg["paths"], seed=cfg["seed"], jobs=cfg["jobs"])
    log.info("sampled %d paths at depth %d (resampled %d)", len(mu), cfg["depth"], mu.meta["resampled"])
    if cfg["csv"]:
        mu.to_csv(out_dir / "measure.csv")
    yield {"kind": "measure", "meta": mu.meta, "total_mass": mu.total_mass}
    for i, phi in enumerate(standard_test_functions()):
        rec = {"kind": "pairing", "index": i, "test_function": phi.to_json()}
        try:
            rec["value"], rec["sigma"] = pair_with_sigma(mu, phi)
        except ValueError as exc:
            rec["error"] = str(exc)
            yield rec
            continue
        rate_depth = cfg["depth"] if cfg["rate_depth"] is None else cfg["rate_depth"]
        if rate_depth > 0:
            try:
                rec["rate"] = equidist_rate(f, a, phi, rate_depth)
            except CorrlabError as exc:
                rec["rate"] = {"error": str(exc)}
        yield rec


def cmd_loja(cfg, log):
    from .mult import loja_exponent

    f = parse_graph(cfg["graph"])
    radii = np.geomspace(cfg["r_max"], cfg["r_min"], cfg["n_radii"])
    fit = loja_exponent(f, parse_point(cfg["z0"]), radii)
    log.info("slope %.6f R^2 %.6f", fit.slope, fit.r2)
    yield {"kind": "loja", "fit": fit}


def cmd_certify_rate(cfg, log):
    from .mult import kappa, kappa_tilde
    from .regcal import certify_log_rate

    kap = kappa(cfg["k"], cfg["q"], cfg["rho"])
    kt = kappa_tilde(cfg["k"], cfg["q"], cfg["delta_adj"]) if cfg.get("delta_adj") is not None else None
    cert = certify_log_rate(cfg["dq"], cfg["dqm1"], kap, parse_grid(cfg["xi_grid"]), delta=cfg.get("delta"),
                            kappa_tilde=kt, r_plus=cfg["r_plus"], strict=False)
    log.info("certificate ok=%s", cert.ok)
    yield {"kind": "rate-certificate", "certificate": cert}
    if not cert.ok:
        raise CorrlabError("log-rate inequality chain violated on the grid")


def cmd_critical_orbit(cfg, log):
    from .algres import periodicity_obstruction_test

    rep = periodicity_obstruction_test(cfg["d0"], cfg["d1"], Fraction(cfg["c"]), cfg["nmax"], numeric=cfg["numeric"])
    log.info("verdict: %s", rep["verdict"])
    yield {"kind": "critical-orbit", **rep}


def cmd_symprod(cfg, log):
    from .mult import adjoint_multiplicity
    from .symprod import delta_product_bound, induced_degrees, product_delta, sampled_delta, semiconjugacy_check

    h = parse_graph(cfg["h"])
    k = cfg["k"]
    rng = np.random.default_rng(cfg["seed"])
    rep = semiconjugacy_check(h, k, cfg["samples"], rng=rng)
    dh = adjoint_multiplicity(h)
    bound = delta_product_bound(product_delta(dh, k), k)
    sampled = sampled_delta(h, k)
    log.info("semiconjugacy residual %.3e", rep.max_residual)
    yield {"kind": "symprod", "k": k, "semiconjugacy": rep, "degrees": induced_degrees(h.d0, h.d1, k),
           "delta_h": dh, "delta_bound": bound, "delta_sampled": sampled, "bound_respected": sampled <= bound}


def cmd_jordan(cfg, log):
    from .cohomlin import check_surjectivity_limit, lambda_n, spectral_data

    M = parse_matrix(cfg["matrix"])
    S = spectral_data(M)
    yield {"kind": "spectral-data", "data": S}
    for n in parse_intlist(cfg["n"]):
        yield {"kind": "lambda_n", "n": n, "matrix": lambda_n(M, S, n)}
    if cfg["surjectivity"]:
        rep = check_surjectivity_limit(M, S)
        log.info("surjectivity ok=%s", rep["ok"])
        yield {"kind": "surjectivity", "report": rep}


HANDLERS = {
    "degrees": cmd_degrees, "mult": cmd_mult, "compose": cmd_compose, "equidist": cmd_equidist,
    "loja": cmd_loja, "certify-rate": cmd_certify_rate, "critical-orbit": cmd_critical_orbit,
    "symprod": cmd_symprod, "jordan": cmd_jordan,
}


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _arg_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrlab", description="Experiments with holomorphic correspondences on P^1.")
    p.add_argument("--version", action="version", version=f"corrlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a config file whose 'command' key selects the experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default="runs")
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config; flags override its values")
        sp.add_argument("--out", default="runs", help="run root directory (or a .jsonl results path)")
        for key in {**params, **COMMON}:
            sp.add_argument(_arg_name(key), dest=key, default=None, help=({**params, **COMMON}[key][2]))
    return p


def _coerce_flag(schema: dict, raw: str):
    """Turn a flag string into the JSON type the schema expects."""
    types = [schema.get("type")] + [s.get("type") for s in schema.get("anyOf", [])]
    if "enum" in schema:
        return raw
    if "boolean" in types:
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if "integer" in types and "string" not in types:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"expected an integer, got {raw!r}") from exc
    if "number" in types and "string" not in types:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"expected a number, got {raw!r}") from exc
    return raw


def assemble_config(command: str, ns: argparse.Namespace) -> dict:
    cfg: dict = {}
    if getattr(ns, "config", None):
        try:
            cfg = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    params = {**COMMANDS[command], **COMMON}
    for key, (schema, _, _) in params.items():
        raw = getattr(ns, key, None)
        if raw is not None:
            cfg[key] = _coerce_flag(schema, raw)
    cfg.setdefault("command", command)
    validator = jsonschema.Draft202012Validator(config_schema(command))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{path}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))
    for key, (_, default, _) in params.items():
        cfg.setdefault(key, default)
    if command == "mult" and not 1 <= cfg["q"] <= cfg["k"]:
        raise ConfigError("q must satisfy 1 <= q <= k")
    return cfg


def _run_name(cfg: dict) -> str:
    if cfg.get("name"):
        return cfg["name"]
    blob = json.dumps({k: v for k, v in cfg.items() if k not in ("name", "jobs")}, sort_keys=True)
    return f"{cfg['command']}-{hashlib.sha256(blob.encode()).hexdigest()[:10]}"


def execute(cfg: dict, out: str) -> int:
    command = cfg["command"]
    out_path = Path(out)
    results_copy = None
    if out_path.suffix == ".jsonl":
        results_copy = out_path
        run_dir = out_path.with_suffix("")
    else:
        run_dir = out_path / _run_name(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    precision = os.environ.get("CORRLAB_PRECISION", "double")
    (run_dir / "config.json").write_text(
        json.dumps({**to_jsonable(cfg), "precision": precision}, sort_keys=True, indent=2) + "\n")

    log_buf = io.StringIO()
    logger = logging.getLogger("corrlab.run")
    logger.setLevel(logging.INFO)
    handler = logging.StreamHandler(log_buf)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    logger.addHandler(handler)
    lib_logger = logging.getLogger("corrlab")
    lib_logger.addHandler(handler)
    lib_level = lib_logger.level
    lib_logger.setLevel(logging.INFO)
    status = EXIT_OK
    lines = []
    try:
        handler_fn = HANDLERS[command]
        gen = handler_fn(cfg, logger, run_dir) if command == "equidist" else handler_fn(cfg, logger)
        for rec in gen:
            lines.append(json.dumps(to_jsonable(rec), sort_keys=True))
    except (ConfigError, ValueError) as exc:
        logger.error("configuration error: %s", exc)
        print(f"corrlab: configuration error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except (CorrlabError, AssertionError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"corrlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = EXIT_FAIL
    finally:
        logger.removeHandler(handler)
        lib_logger.removeHandler(handler)
        lib_logger.setLevel(lib_level)
    text = "".join(line + "\n" for line in lines)
    (run_dir / "results.jsonl").write_text(text)
    if results_copy is not None:
        results_copy.write_text(text)
    (run_dir / "log.txt").write_text(log_buf.getvalue() + f"exit status {status}\n")
    if status == EXIT_OK:
        print(str(run_dir / "results.jsonl"))
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    try:
        if ns.command == "run":
            try:
                raw = json.loads(Path(ns.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
            command = raw.get("command") if isinstance(raw, dict) else None
            if command not in COMMANDS:
                raise ConfigError(f"command: must be one of {sorted(COMMANDS)}")
            cfg = assemble_config(command, ns)
        else:
            cfg = assemble_config(ns.command, ns)
    except ConfigError as exc:
        print(f"corrlab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg, ns.out)


if __name__ == "__main__":
    sys.exit(main())
