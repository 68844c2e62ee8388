"""Command-line surface: panel file parsing, run configuration and reports.

Panel files are long-format CSV with columns ``unit_id, time, y, w_1..w_p,
v_1..v_q``.  Run configurations are flat ``key = value`` text files; command
line flags override them.  Reports are ``key: value`` text with a fixed key
order so reruns with the same inputs and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import math
import re
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .kotlarski import IdentificationError, KotlarskiSample, estimate_moments
from .lasso_panel import ConfigError as LassoConfigError
from .lasso_panel import LassoConfig
from .linops import InputError
from .panel_moments import (
    AlphaMean,
    AlphaQuadratic,
    BetaCombination,
    PanelDataset,
    alpha_support_violations,
    s2_iid,
    s2_nonstationary,
)
from .score_test import PartitionError, make_folds, panel_score_test
from .teacher_va import (
    AdmissibilityError,
    AnalyticFunctional,
    RelevanceError,
    analytic_moment,
    orthogonalize,
    variance_auxiliary,
)

EXIT_CODES = {
    "input_error": 2,
    "config_error": 3,
    "identification_error": 4,
    "runtime_error": 5,
}


class CliError(Exception):
    def __init__(self, category: str, message: str, module: str = "cli_io") -> None:
        super().__init__(message)
        self.category = category
        self.module = module


class PanelFormatError(CliError):
    def __init__(self, message: str) -> None:
        super().__init__("input_error", message, "cli_io.parse_panel")


# -- panel files ---------------------------------------------------------------

_W_COL = re.compile(r"^w_(\d+)$")
_V_COL = re.compile(r"^v_(\d+)$")


def parse_panel(path: str | Path) -> PanelDataset:
    """Read a long-format panel file; units sorted by id, rows by time."""
    path = Path(path)
    if not path.is_file():
        raise PanelFormatError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PanelFormatError(f"{path}: empty file (header row required)") from None
        for required in ("unit_id", "time", "y"):
            if required not in header:
                raise PanelFormatError(f"{path}:1: missing column '{required}'")
        if len(set(header)) != len(header):
            raise PanelFormatError(f"{path}:1: duplicate column names")
        w_cols = sorted((int(m.group(1)), i) for i, h in enumerate(header) if (m := _W_COL.match(h)))
        v_cols = sorted((int(m.group(1)), i) for i, h in enumerate(header) if (m := _V_COL.match(h)))
        if not v_cols:
            raise PanelFormatError(f"{path}:1: no v_* columns")
        if not w_cols:
            raise PanelFormatError(f"{path}:1: no w_* columns")
        for name, cols in (("w", w_cols), ("v", v_cols)):
            if [k for k, _ in cols] != list(range(1, len(cols) + 1)):
                raise PanelFormatError(f"{path}:1: {name}_* columns must be numbered 1..{len(cols)}")
        unknown = [h for h in header if h not in ("unit_id", "time", "y") and not _W_COL.match(h) and not _V_COL.match(h)]
        if unknown:
            raise PanelFormatError(f"{path}:1: unknown columns {unknown}")
        i_unit, i_time, i_y = header.index("unit_id"), header.index("time"), header.index("y")
        rows: dict[str, dict[int, tuple[float, list[float], list[float], int]]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PanelFormatError(f"{path}:{line_no}: expected {len(header)} cells, found {len(row)}")
            cells = [c.strip() for c in row]
            for name, c in zip(header, cells):
                if c == "":
                    raise PanelFormatError(f"{path}:{line_no}: empty cell in column '{name}'")
            unit = cells[i_unit]
            try:
                t = int(cells[i_time])
            except ValueError:
                raise PanelFormatError(f"{path}:{line_no}: time '{cells[i_time]}' is not an integer") from None

            def num(idx: int) -> float:
                try:
                    v = float(cells[idx])
                except ValueError:
                    raise PanelFormatError(f"{path}:{line_no}: non-numeric cell '{cells[idx]}' in column '{header[idx]}'") from None
                if not math.isfinite(v):
                    raise PanelFormatError(f"{path}:{line_no}: non-finite value in column '{header[idx]}'")
                return v

            rec = (num(i_y), [num(i) for _, i in w_cols], [num(i) for _, i in v_cols], line_no)
            per_unit = rows.setdefault(unit, {})
            if t in per_unit:
                raise PanelFormatError(
                    f"{path}:{line_no}: duplicate (unit_id, time) = ({unit}, {t}); first seen on line {per_unit[t][3]}"
                )
            per_unit[t] = rec
    if not rows:
        raise PanelFormatError(f"{path}: no data rows")
    units = sorted(rows)
    T = max(len(v) for v in rows.values())
    times = list(range(1, T + 1))
    for u in units:
        if sorted(rows[u]) != times:
            first = min(r[3] for r in rows[u].values())
            raise PanelFormatError(
                f"{path}:{first}: ragged unit '{u}' has times {sorted(rows[u])}, expected 1..{T}"
            )
    Y = np.array([[rows[u][t][0] for t in times] for u in units])
    W = np.array([[rows[u][t][1] for t in times] for u in units])
    V = np.array([[rows[u][t][2] for t in times] for u in units])
    return PanelDataset(Y, W, V, tuple(units))


def write_panel(data: PanelDataset, path: str | Path) -> None:
    ids = data.unit_ids or tuple(f"u{i + 1}" for i in range(data.n))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "time", "y"] + [f"w_{j + 1}" for j in range(data.p)] + [f"v_{j + 1}" for j in range(data.q)])
        for i, u in enumerate(ids):
            for t in range(data.T):
                w.writerow(
                    [u, t + 1, repr(float(data.Y[i, t]))]
                    + [repr(float(x)) for x in data.W[i, t]]
                    + [repr(float(x)) for x in data.V[i, t]]
                )


def bundled_fixture() -> Path:
    """Path of the bundled synthetic natality-like panel."""
    return Path(str(resources.files("lrmoments") / "data" / "natality_synthetic.csv"))


# -- run configuration ---------------------------------------------------------

CONFIG_KEYS = {
    "target": str,
    "C1": str,
    "C2": str,
    "Omega": str,
    "S2": str,
    "psi0": str,
    "zeta": float,
    "folds": int,
    "seed": int,
    "lasso_c": float,
    "lasso_K": int,
    "nu": float,
    "nu_M": float,
    "nu_B": float,
    "center": str,
    "out": str,
    "data": str,
    "threads": int,
    "K": int,
    "beta0": float,
    "theta": float,
    "r_coeffs": str,
    "exp_t0": float,
    "mu_y": float,
    "sigma2_alpha": float,
    "n": int,
    "reps": int,
    "levels": str,
    "deltas": str,
    "statistics": str,
    "n_z": int,
    "n_alpha": int,
    "ks": int,
    "timings": str,
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise CliError("config_error", f"config file {path} not found")
        return cls.from_text(path.read_text(), path.parent.resolve(), str(path))

    @classmethod
    def from_text(cls, text: str, base_dir: Path | None = None, name: str = "<config>") -> "RunConfig":
        values: dict = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError("config_error", f"{name}:{line_no}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg_set(values, key, value, f"{name}:{line_no}")
        return cls(values, base_dir or Path.cwd())

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def path(self, key: str) -> Path | None:
        v = self.values.get(key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else (self.base_dir / p).resolve()


def cfg_set(values: dict, key: str, value, where: str = "") -> None:
    if key not in CONFIG_KEYS:
        raise CliError("config_error", f"{where + ': ' if where else ''}unknown config key '{key}'")
    try:
        values[key] = CONFIG_KEYS[key](value)
    except ValueError:
        raise CliError("config_error", f"{where + ': ' if where else ''}invalid value {value!r} for '{key}'") from None


def parse_matrix(text: str, base_dir: Path) -> np.ndarray:
    """``"1,0;0,1"`` (rows separated by ``;``) or ``@path`` to a file with one row per line."""
    text = text.strip()
    if text.startswith("@"):
        p = Path(text[1:])
        p = p if p.is_absolute() else base_dir / p
        if not p.is_file():
            raise CliError("config_error", f"matrix file {p} not found")
        text = ";".join(line.strip() for line in p.read_text().splitlines() if line.strip())
    try:
        rows = [[float(x) for x in re.split(r"[,\s]+", r.strip()) if x] for r in text.split(";") if r.strip()]
    except ValueError:
        raise CliError("config_error", f"cannot parse matrix {text!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise CliError("config_error", f"matrix {text!r} is empty or ragged")
    return np.array(rows)


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in re.split(r"[,\s]+", text.strip()) if x]
    except ValueError:
        raise CliError("config_error", f"cannot parse number list {text!r}") from None


# -- reports ---------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(fmt(v) for v in np.asarray(x).reshape(-1).tolist()) + "]"
    return str(x)


class Report:
    def __init__(self, command: str) -> None:
        self.lines: list[tuple[str, str]] = [("report", "lrmoments"), ("version", __version__), ("command", command)]

    def add(self, key: str, value) -> None:
        self.lines.append((key, fmt(value)))

    def text(self) -> str:
        return "".join(f"{k}: {v}\n" for k, v in self.lines)


# -- commands ----------------------------------------------------------------------


def _lasso_config(cfg: RunConfig) -> LassoConfig:
    kw = {}
    if cfg.get("lasso_c") is not None:
        kw["c"] = cfg.get("lasso_c")
    if cfg.get("lasso_K") is not None:
        kw["K"] = cfg.get("lasso_K")
    try:
        return LassoConfig(**kw)
    except LassoConfigError as exc:
        raise CliError("config_error", str(exc), "lasso_panel") from None


def _panel_target(command: str, cfg: RunConfig, data: PanelDataset):
    base = cfg.base_dir
    if command == "fit-beta":
        C1 = parse_matrix(cfg.get("C1"), base).reshape(data.p, -1) if cfg.get("C1") else np.eye(data.p)[:, :1]
        if C1.shape[0] != data.p:
            raise CliError("config_error", f"C1 must have {data.p} rows")
        return BetaCombination(C1)
    if command == "fit-ame":
        C2 = parse_matrix(cfg.get("C2"), base).reshape(data.q, -1) if cfg.get("C2") else np.eye(data.q)[:, -1:]
        return AlphaMean(C2)
    omega = parse_matrix(cfg.get("Omega"), base) if cfg.get("Omega") else np.diag(np.eye(data.q)[-1])
    s2_spec = cfg.get("S2", "iid")
    if s2_spec == "iid":
        S2 = s2_iid(data.T)
    elif s2_spec == "nonstationary":
        S2 = s2_nonstationary(data.T)
    else:
        S2 = parse_matrix(s2_spec, base)
    return AlphaQuadratic(omega, S2)


def _data_path(cfg: RunConfig) -> Path:
    p = cfg.path("data")
    if p is None:
        raise CliError("config_error", "no data file given (--data or 'data =' in the config)")
    return p


def cmd_panel(command: str, cfg: RunConfig) -> Report:
    data = parse_panel(_data_path(cfg))
    try:
        target = _panel_target(command, cfg, data)
    except InputError as exc:
        raise CliError("config_error", str(exc), "panel_moments") from None
    psi0 = parse_floats(cfg.get("psi0", "0"))
    if len(psi0) == 1:
        psi0 = psi0 * target.k
    if len(psi0) != target.k:
        raise CliError("config_error", f"psi0 must have {target.k} entries")
    L = cfg.get("folds", 4)
    seed = cfg.get("seed", 0)
    zeta = cfg.get("zeta", 0.05)
    if not 0.0 < zeta < 1.0:
        raise CliError("config_error", "zeta must lie in (0, 1)")
    try:
        folds = make_folds(data.n, L, seed)
    except PartitionError as exc:
        raise CliError("config_error", str(exc), "score_test") from None
    center = str(cfg.get("center", "true")).lower() in ("1", "true", "yes")
    res = panel_score_test(
        data,
        folds,
        target,
        np.asarray(psi0),
        config=_lasso_config(cfg),
        zeta=zeta,
        nu=cfg.get("nu"),
        nu_M=cfg.get("nu_M"),
        nu_B=cfg.get("nu_B"),
        center=center,
    )
    rep = Report(command)
    rep.add("target", type(target).__name__)
    rep.add("n", data.n)
    rep.add("T", data.T)
    rep.add("p", data.p)
    rep.add("q", data.q)
    rep.add("folds", L)
    rep.add("seed", seed)
    rep.add("psi0", psi0)
    rep.add("psi_hat", res.psi_hat)
    rep.add("psi_hat_per_fold", res.per_fold_psi)
    rep.add("statistic", res.test.statistic)
    rep.add("rank", res.test.rank)
    rep.add("p_value", res.test.p_value)
    rep.add("critical_value", res.test.critical_value)
    rep.add("reject", res.test.reject)
    rep.add("zeta", zeta)
    rep.add("nu", res.test.nu_used)
    rep.add("weighting_centered", center)
    rep.add("moment_mean", res.test.moment_mean)
    if res.region is not None:
        rep.add("ci_level", res.region.level)
        rep.add("ci", " U ".join(fmt(list(iv)) for iv in res.region.intervals) if res.region.intervals else "empty")
    diags = list(res.diagnostics)
    if command == "fit-ame":
        bad = alpha_support_violations(data, target)
        if bad.size:
            diags.append(f"{bad.size} units violate C2'HV = C2'")
    if command in ("fit-beta", "fit-ame"):
        flagged = data.order_condition_violations()
        if flagged.size:
            diags.append(f"{flagged.size} units have rank(V) >= T")
    rep.add("diagnostics", "; ".join(diags) if diags else "none")
    return rep


def _read_columns(path: Path, names: Sequence[str]) -> list[np.ndarray]:
    if not path.is_file():
        raise CliError("input_error", f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        idx = []
        for nm in names:
            if nm not in header:
                raise CliError("input_error", f"{path}:1: missing column '{nm}'")
            idx.append(header.index(nm))
        cols: list[list[float]] = [[] for _ in names]
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            for c, i in zip(cols, idx):
                try:
                    c.append(float(row[i]))
                except (ValueError, IndexError):
                    raise CliError("input_error", f"{path}:{line_no}: bad value in column '{header[i]}'") from None
    return [np.array(c) for c in cols]


def cmd_kotlarski(cfg: RunConfig) -> Report:
    y1, y2 = _read_columns(_data_path(cfg), ["y1", "y2"])
    beta0 = cfg.get("beta0")
    if beta0 is None:
        raise CliError("config_error", "kotlarski-moments needs beta0")
    K = cfg.get("K", 2)
    try:
        est = estimate_moments(KotlarskiSample(y1, y2), beta0, K)
    except IdentificationError as exc:
        raise CliError("identification_error", str(exc), "kotlarski") from None
    rep = Report("kotlarski-moments")
    rep.add("n", y1.size)
    rep.add("beta0", beta0)
    rep.add("K", K)
    rep.add("psi_hat", est.psi_hat)
    rep.add("std_error", est.standard_errors())
    rep.add("slopes", est.slopes)
    return rep


def cmd_tva(cfg: RunConfig) -> Report:
    (y,) = _read_columns(_data_path(cfg), ["y"])
    theta = cfg.get("theta")
    if theta is None or theta <= 0:
        raise CliError("config_error", "tva-moment needs theta > 0")
    if cfg.get("exp_t0") is not None:
        t0 = cfg.get("exp_t0")
        functional = AnalyticFunctional(lambda j: t0**j / math.factorial(j))
        label = f"exp({fmt(t0)} alpha)"
    elif cfg.get("r_coeffs") is not None:
        functional = AnalyticFunctional(parse_floats(cfg.get("r_coeffs")))
        label = "polynomial"
    else:
        raise CliError("config_error", "tva-moment needs r_coeffs or exp_t0")
    try:
        mv = analytic_moment(functional, y, theta)
        rep = Report("tva-moment")
        rep.add("n", y.size)
        rep.add("functional", label)
        rep.add("theta", theta)
        rep.add("J", mv.J)
        psi_hat = float(mv.value.mean())
        rep.add("psi_hat_g0", psi_hat)
        rep.add("max_tail_term", float(mv.tail_bound.max()))
        if cfg.get("sigma2_alpha") is not None:
            mu = cfg.get("mu_y", float(y.mean()))
            om = orthogonalize(functional, variance_auxiliary(mu, cfg.get("sigma2_alpha")), y, theta, psi_hat)
            g = om(y)
            rep.add("Gamma0", om.Gamma0)
            rep.add("lr_moment_mean", float(g.mean()))
            rep.add("lr_std_error", float(g.std() / math.sqrt(y.size)))
            rep.add("diagnostics", "; ".join(om.diagnostics) if om.diagnostics else "none")
    except (AdmissibilityError, RelevanceError) as exc:
        raise CliError("identification_error", str(exc), "teacher_va") from None
    return rep


def _mc_config(cfg: RunConfig):
    from .mc.harness import ALL_STATISTICS, ExperimentConfig

    kw = dict(
        n=cfg.get("n", 250),
        reps=cfg.get("reps", 10),
        seed=cfg.get("seed", 0),
        L=cfg.get("folds", 4),
        threads=cfg.get("threads", 1),
    )
    if cfg.get("beta0") is not None:
        kw["beta0"] = cfg.get("beta0")
    if cfg.get("levels") is not None:
        kw["levels"] = tuple(parse_floats(cfg.get("levels")))
    if cfg.get("statistics") is not None:
        kw["statistics"] = tuple(s for s in re.split(r"[,\s]+", cfg.get("statistics")) if s)
    else:
        kw["statistics"] = ALL_STATISTICS
    for k in ("n_z", "n_alpha", "ks"):
        if cfg.get(k) is not None:
            kw[k] = cfg.get(k)
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise CliError("config_error", str(exc), "mc_harness") from None


def _write_mc_outputs(cfg: RunConfig, config, outputs: dict[str, str]) -> None:
    from .mc.harness import manifest

    out = cfg.path("out")
    if out is None:
        return
    out_dir = out.parent
    stem = out.stem
    for name, text in outputs.items():
        (out_dir / f"{stem}_{name}.csv").write_text(text)
    (out_dir / f"{stem}_manifest.json").write_text(manifest(config, outputs))


def cmd_mc_size(cfg: RunConfig) -> Report:
    from .mc.harness import run_size

    config = _mc_config(cfg)
    try:
        run = run_size(config)
    except RuntimeError as exc:
        raise CliError("runtime_error", str(exc), "mc_harness") from None
    rep = Report("mc-size")
    for k, v in config.echo().items():
        if k != "threads":
            rep.add(f"config.{k}", v)
    rep.add("failures", run.table.failures)
    rep.add("annihilation_share", run.table.annihilation_share)
    for r in run.table.rows:
        rep.add(f"rate.{r.statistic}.{r.level:g}", r.rate)
        rep.add(f"se.{r.statistic}.{r.level:g}", r.se)
    _write_mc_outputs(cfg, config, {"size": run.table.to_csv()})
    return rep


def cmd_mc_power(cfg: RunConfig) -> Report:
    from .mc.harness import default_deltas, run_power, run_size

    config = _mc_config(cfg)
    deltas = tuple(parse_floats(cfg.get("deltas"))) if cfg.get("deltas") else default_deltas()
    try:
        null = run_size(config)
        curves = run_power(config, deltas, null)
    except RuntimeError as exc:
        raise CliError("runtime_error", str(exc), "mc_harness") from None
    rep = Report("mc-power")
    for k, v in config.echo().items():
        if k != "threads":
            rep.add(f"config.{k}", v)
    rep.add("deltas", list(deltas))
    for (nm, lv), vals in curves.power.items():
        rep.add(f"critical.{nm}.{lv:g}", curves.critical_values[(nm, lv)])
        rep.add(f"power.{nm}.{lv:g}", list(vals))
    _write_mc_outputs(cfg, config, {"size": null.table.to_csv(), "power": curves.to_csv()})
    return rep


COMMANDS: dict[str, Callable[[RunConfig], Report]] = {
    "fit-beta": lambda c: cmd_panel("fit-beta", c),
    "fit-ame": lambda c: cmd_panel("fit-ame", c),
    "fit-variance": lambda c: cmd_panel("fit-variance", c),
    "kotlarski-moments": cmd_kotlarski,
    "tva-moment": cmd_tva,
    "mc-size": cmd_mc_size,
    "mc-power": cmd_mc_power,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrmoments", description="Locally robust moment estimation and testing")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--data")
    ap.add_argument("--config")
    ap.add_argument("--target", help="alias for the command's panel target: beta, ame or variance")
    ap.add_argument("--psi0")
    ap.add_argument("--zeta", type=float)
    ap.add_argument("--folds", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra config entries")
    ap.add_argument("--timings", action="store_true", help="append wall-clock timing (breaks byte-identity)")
    return ap


def run(argv: Sequence[str] | None = None) -> tuple[int, str]:
    """Execute a command; returns ``(exit_code, report_or_error_text)``."""
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        if args.target is not None:
            expected = {"beta": "fit-beta", "ame": "fit-ame", "variance": "fit-variance"}.get(args.target)
            if expected is None:
                raise CliError("config_error", f"unknown target '{args.target}'")
            if expected != args.command:
                raise CliError("config_error", f"--target {args.target} conflicts with command {args.command}")
        for flag in ("data", "psi0", "zeta", "folds", "seed", "out", "threads"):
            v = getattr(args, flag)
            if v is not None:
                cfg_set(cfg.values, flag, v, f"--{flag}")
                if flag in ("data", "out"):
                    cfg.values[flag] = str(Path(v).resolve())
        for item in args.set:
            if "=" not in item:
                raise CliError("config_error", f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            cfg_set(cfg.values, k.strip(), v.strip(), "--set")
        start = time.perf_counter()
        report = COMMANDS[args.command](cfg)
        if args.timings:
            report.add("elapsed_seconds", round(time.perf_counter() - start, 3))
        text = report.text()
        out = cfg.path("out")
        if out is not None and args.command in ("fit-beta", "fit-ame", "fit-variance", "kotlarski-moments", "tva-moment"):
            out.write_text(text)
        return 0, text
    except CliError as exc:
        return EXIT_CODES[exc.category], f"error: category={exc.category} module={exc.module} message={exc}\n"
    except InputError as exc:
        return EXIT_CODES["input_error"], f"error: category=input_error module=linops message={exc}\n"


def main(argv: Sequence[str] | None = None) -> int:
    code, text = run(argv)
    (sys.stdout if code == 0 else sys.stderr).write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
