"""Command-line front end.

Every subcommand reads an optional JSON config (``--config``); flags given
on the command line override config entries.  Results go to stdout, or to
``--out`` (relative names resolve against ``$WEAKDEP_OUTPUT_DIR``), written
atomically together with a manifest.

Exit status: 0 success, 1 a verification verdict failed, 2 invalid input or
a violated hypothesis.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bounds import (
    adamczak_bound,
    bernstein_bound,
    boro_bound,
    fuk_nagaev_bound,
    semiexp_iid_bound,
    theorem1_bound,
    truncation_residual_bound,
)
from .cantor import build_cantor_set, exhaust_interval
from .constants import gap_ratio_c0, ledger_for
from .errors import WeakDepError
from .montecarlo import (
    DEFAULT_CONF,
    TailEstimate,
    mdp_study,
    simulate_statistics,
    verify_dominance,
)
from .processes import make_process
from .rng import reserved_stream, stream
from .tail_models import TailModel
from .variance import V_integral_bound

OUTPUT_ENV = "WEAKDEP_OUTPUT_DIR"
EXIT_OK, EXIT_VERDICT, EXIT_INVALID = 0, 1, 2

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_exponent = {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "string", "enum": ["inf", "Infinity"]}]}
_grid = {"type": "array", "items": _num, "minItems": 1}
_process = {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}}}
_common = {
    "seed": {"type": "integer", "minimum": 0},
    "replicates": _pos_int,
    "conf": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "format": {"enum": ["csv", "json", "bin"]},
    "out": {"type": "string"},
}
_constants = {k: {"type": "number", "exclusiveMinimum": 0} for k in ("C1", "C2", "C3", "C4", "eta")}

SCHEMAS = {
    "constants": {"c": _num, "gamma1": _exponent, "gamma2": _exponent, **_constants},
    "blocks": {"A": _pos_int, "ell": _pos_int, "gamma": _num, "c0": _num, "exhaust": {"type": "boolean"}},
    "bound": {
        "family": {"enum": ["bernstein", "semiexp", "fuk_nagaev", "theorem1", "boro", "adamczak", "residual"]},
        "x": _grid, "n": _pos_int, "V": _num, "M": _num, "r": _num, "c": _num, "C": _num,
        "c1": _num, "c2": _num, "gamma": _num, "gamma1": _exponent, "gamma2": _exponent,
        "C1p": _num, "C2p": _num, "sigma2": _num, **_constants,
    },
    "simulate": {"process": _process, "n": _pos_int},
    "verify": {
        "suite": {"enum": ["bernstein", "theorem1"]}, "process": _process, "n": _pos_int,
        "x": _grid, **_constants,
    },
    "mdp": {"process": _process, "n_grid": {"type": "array", "items": _pos_int, "minItems": 1},
            "beta": _num, "t_grid": _grid},
}


class ConfigError(WeakDepError):
    pass


def _schema(cmd: str) -> dict:
    return {"type": "object", "properties": {**SCHEMAS[cmd], **_common}, "additionalProperties": False}


# -- output --------------------------------------------------------------------


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats so the output is strict JSON."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    return o


def manifest(cmd: str, cfg: dict) -> dict:
    return {
        "command": cmd,
        "config_sha256": hashlib.sha256(_canonical(cfg).encode()).hexdigest(),
        "seed": cfg.get("seed"),
        "version": __version__,
    }


def _resolve_out(path: str | None) -> Path | None:
    if not path:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    if not p.is_absolute() and base:
        p = Path(base) / p
    return p


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_bytes(man: dict, header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO(newline="")
    buf.write("# manifest " + _canonical(man) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _emit(cmd: str, cfg: dict, result: dict, table: tuple | None = None, raw: bytes | None = None, stdout=None) -> None:
    stdout = stdout or sys.stdout
    man = manifest(cmd, cfg)
    fmt = cfg.get("format", "json")
    if fmt == "bin" and raw is not None:
        data = raw
    elif fmt == "csv" and table is not None:
        data = _csv_bytes(man, *table)
    else:
        data = (json.dumps(_clean({"manifest": man, "result": result}), indent=2, sort_keys=True) + "\n").encode()
    out = _resolve_out(cfg.get("out"))
    if out is None:
        if fmt == "bin":
            stdout.buffer.write(data) if hasattr(stdout, "buffer") else stdout.write(data.decode("latin-1"))
        else:
            stdout.write(data.decode())
        return
    _atomic_write(out, data)
    if fmt == "bin":
        _atomic_write(out.with_name(out.name + ".manifest.json"), (json.dumps(man, indent=2, sort_keys=True) + "\n").encode())


# -- subcommands ----------------------------------------------------------------


def _overrides(cfg: dict) -> dict:
    return {k: float(cfg[k]) for k in ("C1", "C2", "C3", "C4", "eta") if k in cfg}


def cmd_constants(cfg: dict):
    led = ledger_for(float(cfg.get("c", 1.0)), cfg.get("gamma1", 0.5), cfg.get("gamma2", "inf"), **_overrides(cfg))
    return led.to_dict(), None, EXIT_OK


def cmd_blocks(cfg: dict):
    for k in ("A", "ell"):
        if k not in cfg:
            raise ConfigError(f"blocks needs --{k}")
    gamma = float(cfg.get("gamma", 0.5))
    # the ledger value of c0 depends only on gamma
    c0 = cfg["c0"] if "c0" in cfg else gap_ratio_c0(gamma)
    A, ell = int(cfg["A"]), int(cfg["ell"])
    if cfg.get("exhaust"):
        tr = exhaust_interval(A, ell, gamma, float(c0))
        return tr.to_dict(), None, EXIT_OK
    b = build_cantor_set(A, ell, gamma, float(c0))
    res = {"A": b.A, "ell": b.ell, "c0": b.c0, "gamma": b.gamma, "k_ell": b.k_ell, "card": b.card,
           "levels": [{"n": lv.n, "d": lv.d} for lv in b.levels], "intervals": b.intervals.tolist()}
    rows = [[i + 1, int(s), int(e)] for i, (s, e) in enumerate(b.intervals)]
    return res, (["k", "start", "end"], rows), EXIT_OK


def _require(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing parameters: {', '.join(missing)}")


def cmd_bound(cfg: dict):
    fam = cfg.get("family", "theorem1")
    xs = [float(x) for x in cfg.get("x", [])]
    if not xs:
        raise ConfigError("bound needs at least one --x value")
    if fam == "bernstein":
        _require(cfg, "V", "M")
        f = lambda x: bernstein_bound(x, cfg["V"], cfg["M"])
    elif fam == "semiexp":
        _require(cfg, "V", "M", "gamma", "c1", "c2", "n")
        f = lambda x: semiexp_iid_bound(x, cfg["V"], cfg["M"], cfg["gamma"], cfg["c1"], cfg["c2"], cfg["n"])
    elif fam == "fuk_nagaev":
        _require(cfg, "n", "V", "gamma", "c", "C")
        f = lambda x: fuk_nagaev_bound(x, cfg["n"], cfg["V"], float(cfg.get("r", 1.0)), cfg["gamma"], cfg["c"], cfg["C"])
    elif fam == "theorem1":
        _require(cfg, "n", "V")
        led = ledger_for(float(cfg.get("c", 1.0)), cfg.get("gamma1", 0.5), cfg.get("gamma2", "inf"), **_overrides(cfg))
        f = lambda x: theorem1_bound(x, cfg["n"], cfg["V"], led)
    elif fam == "boro":
        _require(cfg, "n", "V", "gamma")
        f = lambda x: boro_bound(x, cfg["n"], cfg["V"], cfg["gamma"], float(cfg.get("C", 1.0)),
                                 float(cfg.get("C1p", 1.0)), float(cfg.get("C2p", 1.0)), float(cfg.get("eta", 1.0)))
    elif fam == "adamczak":
        _require(cfg, "n", "sigma2", "C")
        f = lambda x: adamczak_bound(x, cfg["n"], cfg["sigma2"], cfg["C"])
    else:
        _require(cfg, "n", "M", "gamma2")
        f = lambda x: truncation_residual_bound(x, cfg["n"], cfg["M"], TailModel(cfg["gamma2"]))
    reports = [f(x) for x in xs]
    if len(reports) == 1:
        result = {"x": xs[0], **reports[0].to_dict()}
    else:
        result = {"points": [{"x": x, **r.to_dict()} for x, r in zip(xs, reports)]}
    names = [k for k, _ in reports[0].terms]
    rows = [[x, r.value] + [v for _, v in r.terms] for x, r in zip(xs, reports)]
    return result, (["x", "value"] + names, rows), EXIT_OK


def cmd_simulate(cfg: dict):
    _require(cfg, "process", "n")
    proc = make_process(cfg["process"])
    reps = int(cfg.get("replicates", 1))
    X = proc.simulate(int(cfg["n"]), reps, stream(int(cfg.get("seed", 0)), 0))
    if reps == 1:
        table = (["index", "value"], [[i + 1, float(v)] for i, v in enumerate(X[0])])
    else:
        table = (["replicate", "index", "value"], [[r + 1, i + 1, float(v)] for r in range(reps) for i, v in enumerate(X[r])])
    result = {"process": proc.kind, "params": proc.params(), "n": int(cfg["n"]), "replicates": reps,
              "values": X[0].tolist() if reps == 1 else X.tolist()}
    return result, table, EXIT_OK, np.ascontiguousarray(X.ravel(), dtype="<f8").tobytes()


def _x_grid(cfg: dict, proc, n: int, seed: int) -> np.ndarray:
    if "x" in cfg:
        return np.asarray(sorted(float(x) for x in cfg["x"]))
    pilot = proc.simulate(n, 2000, reserved_stream(seed, 7)).sum(axis=1)
    return float(np.std(pilot, ddof=1)) * np.linspace(0.25, 5.0, 20)


def cmd_verify(cfg: dict):
    suite = cfg.get("suite", "bernstein")
    n = int(cfg.get("n", 200))
    N = int(cfg.get("replicates", 100_000))
    seed = int(cfg.get("seed", 0))
    conf = float(cfg.get("conf", DEFAULT_CONF))
    if suite == "bernstein":
        proc = make_process(cfg.get("process", {"kind": "iid_rademacher"}))
        if proc.sup_norm is None:
            raise ConfigError("the Bernstein suite needs a bounded process")
        xs = np.asarray(cfg.get("x", np.linspace(0, 4 * math.sqrt(n), 25).tolist()), dtype=float)
        vals = simulate_statistics(proc, [n], N, seed, "upper")[n]
        est = TailEstimate.from_statistics(vals, xs, conf, n, "upper")
        var = float(proc.profile.known_bounds.get("variance", 1.0))
        bound = [bernstein_bound(x, n * var, proc.sup_norm).value for x in xs]
    else:
        proc = make_process(cfg.get("process", {"kind": "arch"}))
        prof = proc.profile
        led = ledger_for(prof.mixing.c, prof.mixing.gamma1, prof.tail.gamma2, **_overrides(cfg))
        V = V_integral_bound(prof.tail, prof.mixing)
        xs = _x_grid(cfg, proc, n, seed)
        vals = simulate_statistics(proc, [n], N, seed, "max_abs")[n]
        est = TailEstimate.from_statistics(vals, xs, conf, n, "max_abs")
        bound = [theorem1_bound(float(x), n, V, led).value for x in xs]
    rep = verify_dominance(est, bound)
    rows = [[p["x"], p["hits"], p["N"], p["p_hat"], p["cp_upper"], p["bound"], p["pass"]] for p in rep.per_point]
    result = {"suite": suite, "process": proc.kind, "n": n, "N": N, "conf": conf, "seed": seed, **rep.to_dict()}
    return result, (["x", "hits", "N", "p_hat", "cp_upper", "bound", "pass"], rows), EXIT_OK if rep.passed else EXIT_VERDICT


def cmd_mdp(cfg: dict):
    proc = make_process(cfg.get("process", {"kind": "arch"}))
    n_grid = cfg.get("n_grid", [2**k for k in range(8, 15)])
    st = mdp_study(proc, n_grid, float(cfg.get("beta", 0.25)), cfg.get("t_grid", [1.0]),
                   int(cfg.get("replicates", 10_000)), int(cfg.get("seed", 0)), float(cfg.get("conf", DEFAULT_CONF)))
    rows = [[c.n, c.t, c.hits, c.N, c.hits / c.N, c.cp_upper, "" if c.value is None else c.value,
             -c.t * c.t / 2.0, c.censored] for c in st.cells]
    header = ["n", "t", "hits", "N", "p_hat", "cp_upper", "a_n_log_p_hat", "reference", "censored"]
    return st.to_dict(), (header, rows), EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "blocks": cmd_blocks,
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "mdp": cmd_mdp,
}


# -- argument parsing -------------------------------------------------------------


def _exp_arg(s: str):
    return s if s.strip().lower() in ("inf", "infinity") else float(s)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weakdep", description="Bernstein-type bounds for weakly dependent sequences")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its entries")
        sp.add_argument("--out", help=f"output file (relative paths resolve against ${OUTPUT_ENV})")
        sp.add_argument("--format", choices=["csv", "json", "bin"])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--conf", type=float)
        for k in ("C1", "C2", "C3", "C4", "eta"):
            sp.add_argument(f"--{k}", type=float, dest=k)
        return sp

    s = common(sub.add_parser("constants", help="derived constant ledger"))
    s.add_argument("--c", type=float)
    s.add_argument("--gamma1", type=_exp_arg)
    s.add_argument("--gamma2", type=_exp_arg)

    s = common(sub.add_parser("blocks", help="Cantor block construction"))
    s.add_argument("--A", type=int, dest="A")
    s.add_argument("--ell", type=int)
    s.add_argument("--gamma", type=float)
    s.add_argument("--c0", type=float)
    s.add_argument("--exhaust", action="store_true", default=None)

    s = common(sub.add_parser("bound", help="evaluate a tail bound"))
    s.add_argument("--family")
    s.add_argument("--x", type=float, nargs="+")
    s.add_argument("--n", type=int)
    for k in ("V", "M", "r", "c", "C", "c1", "c2", "gamma", "C1p", "C2p", "sigma2"):
        s.add_argument(f"--{k}", type=float, dest=k)
    s.add_argument("--gamma1", type=_exp_arg)
    s.add_argument("--gamma2", type=_exp_arg)

    s = common(sub.add_parser("simulate", help="simulate an example process"))
    s.add_argument("--process", type=json.loads, help='JSON process spec, e.g. \'{"kind": "arch"}\'')
    s.add_argument("--n", type=int)

    s = common(sub.add_parser("verify", help="Monte-Carlo dominance check"))
    s.add_argument("--suite", choices=["bernstein", "theorem1"])
    s.add_argument("--process", type=json.loads)
    s.add_argument("--n", type=int)
    s.add_argument("--x", type=float, nargs="+")

    s = common(sub.add_parser("mdp", help="moderate-deviation scaling study"))
    s.add_argument("--process", type=json.loads)
    s.add_argument("--n-grid", type=int, nargs="+", dest="n_grid")
    s.add_argument("--beta", type=float)
    s.add_argument("--t-grid", type=float, nargs="+", dest="t_grid")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        cfg[k] = v
    try:
        jsonschema.validate(cfg, _schema(args.command))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    return cfg


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        if args.command in ("simulate", "verify", "mdp"):
            cfg.setdefault("seed", 0)
        out = COMMANDS[args.command](cfg)
    except (WeakDepError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    result, table, code = out[:3]
    raw = out[3] if len(out) > 3 else None
    _emit(args.command, cfg, result, table, raw, stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
