"""Command-line interface.

Subcommands: ``test``, ``glm``, ``boundary``, ``snr``, ``power``,
``simulate`` and ``verify``. Matrices are headerless CSV, vectors are
single-column CSV, configs and results are JSON documents with
``"schema": "1"``. Exit codes: 0 success, 1 other failure, 2 dimension
mismatch, 3 matrix not positive definite, 4 unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
import warnings
from importlib import metadata

import numpy as np

from .dependence import CorrelationModel, Engine, LoessSpec, QuadratureSpec, Sidedness, \
    pvalues_from_stats
from .errors import DimensionMismatchError, GgofError, SingularMatrixError
from .families import StatFamily, TruncationScheme, compute_statistic, rejection_boundary
from .glm import GlmDataset, fit_statistics
from .omnibus import AdaptationGrid, diggof_pvalue, diggof_statistic, omnibus_boundary
from .simulation import CorrelationSpec, StudyConfig, correlation_model, gen_correlation, \
    run_power_study, run_type1_study
from .transforms import TransformKind, snr_report, transform_matrix

SCHEMA = "1"
EXIT_OK, EXIT_FAIL, EXIT_DIM, EXIT_PD, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("ggof")


class InputError(Exception):
    """An input file could not be read or parsed."""


class UsageError(Exception):
    """Invalid command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# ---------------------------------------------------------------------------
# file formats

def read_matrix(path: str) -> np.ndarray:
    """Headerless CSV matrix."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        A = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read matrix {path}: {exc}") from None
    if A.ndim != 2 or A.size == 0:
        raise InputError(f"cannot read matrix {path}: ragged or empty")
    return A


def read_vector(path: str) -> np.ndarray:
    """Single-column CSV vector."""
    A = read_matrix(path)
    if A.shape[1] != 1:
        raise InputError(f"vector file {path} must have one column")
    return A[:, 0]


def read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _write_text(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _manifest(command: str, config: dict, seed, t0: float, caught) -> dict:
    return {"command": command, "config": config, "seed": seed, "version": _version(),
            "wall_time": time.time() - t0,
            "warnings": [f"{w.category.__name__}: {w.message}" for w in caught]}


# ---------------------------------------------------------------------------
# shared options

def _corr_from_args(args, n: int) -> CorrelationModel:
    if args.corr:
        S = read_matrix(args.corr)
        if S.shape != (n, n):
            raise DimensionMismatchError(f"correlation matrix is {S.shape}, expected ({n}, {n})")
        CorrelationModel.general(S)
        return correlation_model(S)
    spec = (args.corr_spec or "identity").strip().lower()
    name, _, val = spec.partition(":")
    if name == "identity":
        return CorrelationModel.identity(n)
    if name == "equal":
        return CorrelationModel.equal(n, float(val))
    if name in ("poly", "exp"):
        cs = CorrelationSpec.poly_decay(n, float(val)) if name == "poly" \
            else CorrelationSpec.exp_decay(n, float(val))
        return CorrelationModel.toeplitz(gen_correlation(cs)[0, 1:])
    raise UsageError(f"unknown correlation spec {spec!r}")


def _tests_from_args(args, n: int) -> AdaptationGrid:
    if args.grid:
        doc = read_json(args.grid)
        items = doc["entries"] if isinstance(doc, dict) else doc
        return AdaptationGrid.from_list(items, n)
    fam = StatFamily.phi(args.s) if args.s is not None else StatFamily.from_label(args.family)
    k1 = args.k1 if args.k1 is not None else n
    return AdaptationGrid(((fam, TruncationScheme(args.k0, k1, args.alpha0, args.alpha1)),), n)


def _engine_opts(args) -> dict:
    return {"n_sims": args.sims, "quad_nodes": args.quad_nodes}


def _engine(corr, method, sided, seed, opts) -> Engine:
    return Engine(corr, method, sided, seed, quad=QuadratureSpec(node_count=opts["quad_nodes"]),
                  loess=LoessSpec(), n_sims=opts["n_sims"])


def _label(f: StatFamily, t: TruncationScheme) -> str:
    return f"{f.label}[{t.k0}:{t.k1}]"


def evaluate(pvalues, corr: CorrelationModel, grid: AdaptationGrid, method: str, sided,
             seed: int, opts: dict, level: float = 0.05) -> dict:
    """The test pipeline shared by ``test``, ``glm`` and ``verify``."""
    P = np.asarray(pvalues, dtype=float)
    if P.size != corr.n:
        raise DimensionMismatchError(
            f"{P.size} p-values but the correlation model has n={corr.n}")
    eng = _engine(corr, method, sided, seed, opts)
    res = diggof_statistic(P, grid, eng)
    out = {"engine": eng.method}
    if len(grid) == 1:
        f, t = grid.entries[0]
        g = compute_statistic(P, f, t)
        out.update(test=_label(f, t), statistic=float(g.statistic),
                   argmax_index=int(g.argmax_index), pvalue=float(res.s_o))
    else:
        p = diggof_pvalue(res, grid, eng)
        table = [{"entry": _label(f, t), "statistic": float(s), "pvalue": float(q)}
                 for (f, t), s, q in zip(grid.entries, res.statistics, res.per_entry_pvalues)]
        u_star = None
        if eng.method != "mc" and 0.0 < res.s_o < 1.0:
            u_star = omnibus_boundary(res, grid, eng)[1].tolist()
        out.update(test="omnibus", s_o=float(res.s_o), chosen_entry=int(res.chosen_entry),
                   entries=table, u_star=u_star, pvalue=float(p))
    out["level"] = level
    out["reject"] = bool(out["pvalue"] <= level)
    return out


def _inputs_doc(P, corr, grid, method, sided, seed, opts, level) -> dict:
    return {"pvalues": [float(v) for v in P], "correlation": corr.to_dict(),
            "tests": grid.to_list(), "method": method,
            "sided": Sidedness.parse(sided).value, "seed": seed, "engine": opts,
            "level": level}


def _result_doc(command, inputs, result, extra=None) -> dict:
    doc = {"schema": SCHEMA, "command": command, "inputs": inputs, "result": result}
    if extra:
        doc.update(extra)
    return doc


def _has_nan(obj) -> bool:
    if isinstance(obj, float):
        return obj != obj
    if isinstance(obj, dict):
        return any(_has_nan(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return any(_has_nan(v) for v in obj)
    return False


def _apply_transform(T, S, text: str):
    kind = TransformKind.parse(text)
    if kind.kind == "none":
        return T, S
    V = transform_matrix(S, kind)
    S2 = V @ S @ V.T
    S2 = 0.5 * (S2 + S2.T)
    np.fill_diagonal(S2, 1.0)
    return V @ T, S2


# ---------------------------------------------------------------------------
# commands

def cmd_test(args) -> dict:
    if bool(args.pvalues) == bool(args.stats):
        raise UsageError("give exactly one of --pvalues and --stats")
    if args.pvalues:
        P = read_vector(args.pvalues)
        corr = _corr_from_args(args, P.size)
        if args.transform != "none":
            raise UsageError("--transform needs --stats")
    else:
        T = read_vector(args.stats)
        corr = _corr_from_args(args, T.size)
        T, S = _apply_transform(T, corr.matrix(), args.transform)
        if args.transform != "none":
            corr = correlation_model(S)
        P = pvalues_from_stats(T, args.sided)
    grid = _tests_from_args(args, P.size)
    opts = _engine_opts(args)
    result = evaluate(P, corr, grid, args.method, args.sided, args.seed, opts, args.level)
    inputs = _inputs_doc(P, corr, grid, args.method, args.sided, args.seed, opts, args.level)
    return _result_doc("test", inputs, result)


def cmd_glm(args) -> dict:
    y = read_vector(args.y)
    x = read_matrix(args.x)
    z = read_matrix(args.z) if args.z else None
    if x.shape[0] != y.size or (z is not None and z.shape[0] != y.size):
        raise DimensionMismatchError("y, x and z must have the same number of rows")
    sigma = args.sigma if args.sigma == "estimate" else float(args.sigma)
    ds = GlmDataset(y, x, z, args.model, sigma)
    fit = fit_statistics(ds)
    if args.fit == "joint":
        T, S = fit.t_j, fit.sigma_tj
    elif args.fit == "marginal":
        T, S = fit.t_m, fit.sigma_tm
    else:
        T, S = _apply_transform(fit.t_m, fit.sigma_tm, "dt")
    T, S = _apply_transform(T, S, args.transform)
    corr = correlation_model(S)
    P = pvalues_from_stats(T, args.sided)
    grid = _tests_from_args(args, P.size)
    opts = _engine_opts(args)
    result = evaluate(P, corr, grid, args.method, args.sided, args.seed, opts, args.level)
    innov = _apply_transform(fit.t_j, fit.sigma_tj, "it")[0]
    scale = np.maximum(np.abs(fit.t_m), 1e-300)
    result["statistics"] = {
        "t": T.tolist(), "sigma_t": S.tolist(), "fit": args.fit, "transform": args.transform,
        "sigma_hat": fit.sigma_hat,
        "it_identity_max_rel_error": float(np.max(np.abs(innov - fit.t_m) / scale)),
    }
    inputs = _inputs_doc(P, corr, grid, args.method, args.sided, args.seed, opts, args.level)
    return _result_doc("glm", inputs, result)


def cmd_verify(args) -> dict:
    doc = read_json(args.result)
    if doc.get("schema") != SCHEMA or "inputs" not in doc:
        raise InputError(f"{args.result} is not a schema-{SCHEMA} result document")
    inp = doc["inputs"]
    corr = CorrelationModel.from_dict(inp["correlation"])
    n = corr.n
    grid = AdaptationGrid.from_list(inp["tests"], n)
    again = evaluate(inp["pvalues"], corr, grid, inp["method"], inp["sided"], inp["seed"],
                     inp["engine"], inp.get("level", 0.05))
    stored = doc["result"]["pvalue"]
    diff = abs(again["pvalue"] - stored)
    return {"schema": SCHEMA, "command": "verify", "file": args.result,
            "stored_pvalue": stored, "recomputed_pvalue": again["pvalue"],
            "abs_diff": diff, "ok": bool(diff <= 1e-12)}


def cmd_boundary(args) -> tuple[str, dict]:
    n = args.n
    grid = _tests_from_args(args, n)
    bs = [float(v) for v in args.b.split(",")]
    header = ["i"]
    cols = []
    for f, t in grid.entries:
        for b in bs:
            header.append(f"{_label(f, t)}@b={b:g}")
            cols.append(rejection_boundary(f, t, n, b))
    rows = [[i + 1, *[float(c[i]) for c in cols]] for i in range(n)]
    return _csv_text(header, rows), {"n": n, "b": bs, "tests": grid.to_list()}


def cmd_snr(args) -> tuple[str, dict]:
    if args.mu:
        mu = read_vector(args.mu)
    else:
        if args.n is None:
            raise UsageError("give --mu or --n with --signals")
        mu = np.zeros(args.n)
        for j in (int(v) for v in args.signals.split(",") if v.strip()):
            if not 1 <= j <= args.n:
                raise DimensionMismatchError(f"signal position {j} outside 1..{args.n}")
            mu[j - 1] = args.amplitude
    corr = _corr_from_args(args, mu.size)
    S = corr.matrix()
    if args.sweep_banded:
        rows = []
        for b in range(1, mu.size + 1):
            _, m, j = snr_report(mu, S, TransformKind("banded", b))
            rows.append([b, m, j + 1])
        text = _csv_text(["b_n", "max_snr", "argmax"], rows)
    else:
        kinds = [TransformKind.parse(k) for k in args.transforms.split(",")]
        vecs = [snr_report(mu, S, k)[0] for k in kinds]
        rows = [[i + 1, *[float(v[i]) for v in vecs]] for i in range(mu.size)]
        text = _csv_text(["i", *[k.label for k in kinds]], rows)
    return text, {"n": int(mu.size), "correlation": corr.to_dict(),
                  "sweep_banded": bool(args.sweep_banded), "transforms": args.transforms}


def _study_config(args) -> StudyConfig:
    if args.seed is None:
        raise UsageError("study commands require --seed")
    d = read_json(args.config)
    d = dict(d.get("config", d))
    d.pop("schema", None)
    d["seed"] = args.seed
    d["threads"] = args.threads
    if args.sims is not None:
        d["null_sims"] = args.sims
    if args.method is not None:
        d["method"] = args.method
    if args.sided is not None:
        d["sided"] = args.sided
    return StudyConfig.from_dict(d)


def cmd_simulate(args) -> tuple[str, dict]:
    cfg = _study_config(args)
    rows = run_type1_study(cfg)
    text = _csv_text(["test", "alpha", "empirical_rate", "mc_std_error"],
                     [[r["test"], r["alpha"], r["empirical_rate"], r["mc_std_error"]]
                      for r in rows])
    return text, cfg.to_dict()


def cmd_power(args) -> tuple[str, dict]:
    cfg = _study_config(args)
    rows = run_power_study(cfg)
    text = _csv_text(["test", "grid_value", "power", "mc_std_error"],
                     [[r["test"], r["grid_value"], r["power"], r["mc_std_error"]]
                      for r in rows])
    return text, cfg.to_dict()


# ---------------------------------------------------------------------------
# parser

def _add_engine(p, seed_required=False):
    # study commands take these from the config unless given explicitly
    p.add_argument("--method", default=None if seed_required else "auto",
                   choices=["auto", "iid", "equal", "wam", "loess", "mc"])
    p.add_argument("--sided", default=None if seed_required else "two",
                   choices=["one", "two"])
    p.add_argument("--seed", type=int, default=None if seed_required else 0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--sims", type=int, default=None if seed_required else 100_000)
    if not seed_required:
        p.add_argument("--quad-nodes", dest="quad_nodes", type=int, default=64)


def _add_testspec(p):
    p.add_argument("--family", default="hc",
                   help="hc, hc2008, bj, rbj, ks, phi(s), bonferroni(a), fdr(a)")
    p.add_argument("--s", type=float, default=None, help="phi-divergence index")
    p.add_argument("--k0", type=int, default=1)
    p.add_argument("--k1", type=int, default=None)
    p.add_argument("--alpha0", type=float, default=0.0)
    p.add_argument("--alpha1", type=float, default=1.0)
    p.add_argument("--grid", help="JSON list of omnibus entries")
    p.add_argument("--level", type=float, default=0.05)


def _add_corr(p):
    p.add_argument("--corr", help="correlation matrix CSV")
    p.add_argument("--corr-spec", dest="corr_spec",
                   help="identity, equal:<rho>, poly:<gamma>, exp:<gamma>")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ggof", description="gGOF signal-detection tests")
    ap.add_argument("--version", action="version", version=_version())
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="test p-values or Gaussian statistics")
    p.add_argument("--pvalues")
    p.add_argument("--stats")
    _add_corr(p)
    _add_testspec(p)
    _add_engine(p)
    p.add_argument("--transform", default="none", help="none, dt, it, banded:<b>")
    p.add_argument("--out")

    p = sub.add_parser("glm", help="test regression data")
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--z")
    p.add_argument("--model", default="linear", choices=["linear", "logistic"])
    p.add_argument("--sigma", default="1.0", help="error sd or 'estimate'")
    p.add_argument("--fit", default="marginal", choices=["joint", "marginal", "decorrelated"])
    p.add_argument("--transform", default="none")
    _add_testspec(p)
    _add_engine(p)
    p.add_argument("--out")

    p = sub.add_parser("boundary", help="rejection boundaries as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--b", required=True, help="comma-separated thresholds")
    _add_testspec(p)
    p.add_argument("--out")

    p = sub.add_parser("snr", help="SNRs before and after transformations as CSV")
    p.add_argument("--mu")
    p.add_argument("--n", type=int)
    p.add_argument("--signals", default="", help="one-based signal positions")
    p.add_argument("--amplitude", type=float, default=1.0)
    _add_corr(p)
    p.add_argument("--transforms", default="none,dt,it")
    p.add_argument("--sweep-banded", dest="sweep_banded", action="store_true")
    p.add_argument("--out")

    for name, helptext in (("power", "power study"), ("simulate", "type-I error study")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        _add_engine(p, seed_required=True)
        p.add_argument("--out")

    p = sub.add_parser("verify", help="recompute a result document")
    p.add_argument("result")
    return ap


_JSON_COMMANDS = {"test": cmd_test, "glm": cmd_glm, "verify": cmd_verify}
_CSV_COMMANDS = {"boundary": cmd_boundary, "snr": cmd_snr, "power": cmd_power,
                 "simulate": cmd_simulate}


def _fail(code: int, kind: str, exc) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    """Entry point; returns the exit code."""
    level = os.environ.get("GGOF_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.time()
    try:
        args = build_parser().parse_args(argv)
        log.info("running %s", args.command)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command in _JSON_COMMANDS:
                doc = _JSON_COMMANDS[args.command](args)
                if args.command != "verify":
                    doc["manifest"] = _manifest(args.command, doc["inputs"], args.seed, t0,
                                                caught)
                text = json.dumps(doc, indent=2) + "\n"
                _write_text(text, getattr(args, "out", None))
                bad = _has_nan(doc.get("result", doc)) or (
                    args.command == "verify" and not doc["ok"])
            else:
                text, config = _CSV_COMMANDS[args.command](args)
                man = _manifest(args.command, config, getattr(args, "seed", None), t0, caught)
                _write_text(text, args.out)
                if args.out and args.out != "-":
                    with open(args.out + ".manifest.json", "w") as fh:
                        json.dump({"schema": SCHEMA, "manifest": man}, fh, indent=2)
                bad = "nan" in text.lower()
        for w in caught:
            log.warning("%s: %s", w.category.__name__, w.message)
        return EXIT_FAIL if bad else EXIT_OK
    except UsageError as exc:
        return _fail(EXIT_FAIL, "usage", exc)
    except DimensionMismatchError as exc:
        return _fail(EXIT_DIM, "dimension_mismatch", exc)
    except SingularMatrixError as exc:
        return _fail(EXIT_PD, "not_positive_definite", exc)
    except InputError as exc:
        return _fail(EXIT_IO, "unreadable_input", exc)
    except (GgofError, ValueError, KeyError) as exc:
        return _fail(EXIT_FAIL, "error", exc)


if __name__ == "__main__":
    sys.exit(main())
