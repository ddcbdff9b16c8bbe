"""Command-line front end: ``oicap bounds|simulate|oracle``.

Each command evaluates one row per (budget, a) pair and writes UTF-8 CSV:
``#`` metadata lines echoing the resolved configuration, a fixed header and
then the rows, ordered by budget and then ``a``. Floats use 17 significant
digits so the output round-trips exactly.

Exit codes: 0 on success (rows with failed validity checks or a
non-converged oracle are still written, with flags and an ``error``
column), 2 for configuration errors, 3 for internal numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import __version__
from . import gaussian_capacity as gc
from . import poisson_capacity as pc
from .channels import DEFAULT_GEOM_P, ChannelSpec, make_aux_gaussian, make_aux_poisson
from .errors import OicapError, ValidityViolated
from .mi_oracle import (
    DiscreteInput,
    ba_capacity,
    best_duality_numeric_bound,
    default_x_grid,
    mi_exact,
)
from .montecarlo import simulate_map

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# slack added to every link of the oracle sandwich, on top of the BA tolerance
SANDWICH_PAD = 1e-9

BOUNDS_COLUMNS = (
    [
        "channel", "epsilon", "log_inv_eps", "a", "lambda", "geom_p",
        "upper", "lower", "asymptote",
        "upper_over_eps", "lower_over_eps", "asymptote_over_eps", "log_upper_over_eps",
        "upper_ratio", "lower_ratio",
        "upper_valid", "lower_valid", "upper_flags", "lower_flags",
    ]
    + [f"gaussian_upper_{t}_over_eps" for t in gc.UPPER_TERMS]
    + [f"poisson_upper_{t}_over_eps" for t in pc.UPPER_TERMS]
    + [f"lower_{t}_over_eps" for t in gc.LOWER_TERMS]
    + ["error"]
)

SIMULATE_COLUMNS = [
    "channel", "epsilon", "log_inv_eps", "a", "lambda",
    "amplitude", "mass_high", "threshold", "seed", "z",
    "n_trials", "n_low", "n_high", "errors",
    "pe_exact", "pe_hat", "ci_lo", "ci_hi", "agree", "error",
]

ORACLE_COLUMNS = [
    "channel", "epsilon", "log_inv_eps", "a", "lambda", "geom_p", "grid_size",
    "lower", "mi_binary", "ba_capacity", "ba_gap", "ba_multiplier", "ba_iterations",
    "ba_mean", "duality_numeric", "duality_mu", "upper", "upper_valid",
    "sandwich_ok", "error",
]


class ConfigError(Exception):
    """Invalid configuration; reported with exit code 2."""


@dataclass
class SweepConfig:
    """Resolved configuration of one CLI run.

    Exactly one of ``epsilon_list`` and ``L_list`` is set; ``L`` is
    ``log(1/epsilon)``.
    """

    channel: str = "gaussian"
    epsilon_list: Optional[list] = None
    L_list: Optional[list] = None
    a_list: Optional[list] = None
    lam: Optional[float] = None
    geom_p: float = DEFAULT_GEOM_P
    oracle: bool = False
    mc_trials: int = 0
    seed: int = 0
    output_path: Optional[str] = None
    z: float = 3.0
    ba_tol: float = 1e-9
    grid: Optional[list] = None

    def validate(self, command: str):
        if self.channel not in ("gaussian", "poisson"):
            raise ConfigError(f"channel must be gaussian or poisson, got {self.channel!r}")
        if (self.epsilon_list is None) == (self.L_list is None):
            raise ConfigError("give exactly one of epsilon_list (--eps) or L_list (--logeps)")
        budgets = self.epsilon_list if self.epsilon_list is not None else self.L_list
        if not budgets:
            raise ConfigError("the budget list is empty")
        if self.epsilon_list is not None and not all(0.0 < e < 1.0 for e in budgets):
            raise ConfigError("every epsilon must lie in (0, 1)")
        if self.L_list is not None and not all(math.isfinite(v) and v > 0.0 for v in budgets):
            raise ConfigError("every L must be positive and finite")
        if not self.a_list:
            raise ConfigError("a_list (--a) must be nonempty")
        if not all(math.isfinite(a) and a > 0.0 for a in self.a_list):
            raise ConfigError("every a must be positive")
        if self.channel == "poisson":
            if self.lam is None or not (math.isfinite(self.lam) and self.lam > 0.0):
                raise ConfigError("the poisson channel needs a positive lambda")
            if not 0.0 < self.geom_p < 1.0:
                raise ConfigError("geom_p must lie in (0, 1)")
        if command == "simulate" and self.mc_trials < 1:
            raise ConfigError("simulate needs mc_trials (--trials) >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if not (math.isfinite(self.z) and self.z > 0.0):
            raise ConfigError("z must be positive")
        if not self.ba_tol > 0.0:
            raise ConfigError("ba_tol must be positive")
        if command == "oracle":
            if not self.oracle:
                raise ConfigError("the oracle command needs oracle=true")
            if self.grid is not None:
                g = self.grid
                if not g or g[0] != 0.0 or any(b <= a for a, b in zip(g, g[1:])):
                    raise ConfigError("grid must start at 0 and be strictly increasing")

    def budgets(self):
        """``(epsilon or None, L or None, sort key)`` for each budget."""
        if self.epsilon_list is not None:
            return [(e, None, e) for e in self.epsilon_list]
        return [(None, v, v) for v in self.L_list]

    def as_items(self):
        """``(config key, value text)`` pairs for the metadata lines."""
        key_of = {attr: key for key, (attr, _) in _KEYS.items()}
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, list):
                v = ",".join(_fmt(x) for x in v)
            out.append((key_of[f.name], _fmt(v)))
        return out


# ------------------------------------------------------------ config parsing


def _float_list(text: str):
    items = [t.strip() for t in str(text).split(",")]
    if items == [""]:
        return []
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise ConfigError(f"not a list of numbers: {text!r}") from exc


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError as exc:
        raise ConfigError(f"not an integer: {text!r}") from exc


def _float(text: str) -> float:
    try:
        return float(str(text).strip())
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


_KEYS = {
    "channel": ("channel", lambda s: s.strip().lower()),
    "epsilon_list": ("epsilon_list", _float_list),
    "L_list": ("L_list", _float_list),
    "a_list": ("a_list", _float_list),
    "lambda": ("lam", _float),
    "geom_p": ("geom_p", _float),
    "oracle": ("oracle", _bool),
    "mc_trials": ("mc_trials", _int),
    "seed": ("seed", _int),
    "output_path": ("output_path", lambda s: s.strip()),
    "z": ("z", _float),
    "ba_tol": ("ba_tol", _float),
    "grid": ("grid", _float_list),
}


def read_config_file(path: str) -> dict:
    """Parse a flat ``key=value`` file; blank lines and ``#`` comments are skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    out = {}
    for no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(command: str, args: argparse.Namespace) -> SweepConfig:
    raw = read_config_file(args.config) if args.config else {}
    flags = {
        "channel": args.channel,
        "epsilon_list": args.eps,
        "L_list": args.logeps,
        "a_list": args.a,
        "lambda": args.lam,
        "geom_p": args.geom_p,
        "mc_trials": args.trials,
        "seed": args.seed,
        "output_path": args.out,
    }
    # a budget flag replaces whichever budget list the file gave
    if args.eps is not None or args.logeps is not None:
        raw.pop("epsilon_list", None)
        raw.pop("L_list", None)
    raw.update({k: v for k, v in flags.items() if v is not None})
    if command == "oracle":
        raw.setdefault("oracle", "true")
    cfg = SweepConfig()
    for key, value in raw.items():
        attr, conv = _KEYS[key]
        setattr(cfg, attr, conv(value))
    cfg.validate(command)
    return cfg


# ----------------------------------------------------------------- formatting


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def _flags(validity: dict) -> str:
    return ";".join(f"{k}={_fmt(bool(v))}" for k, v in validity.items())


def _ratio(log_num: float, den: float) -> float:
    if math.isnan(log_num) or not den > 0.0:
        return math.nan
    x = log_num - math.log(den)
    return math.exp(x) if x < 709.0 else math.inf


def _budget_kwargs(eps, L):
    return {"epsilon": eps} if eps is not None else {"log_inv_eps": L}


def _eps_L(eps, L):
    if eps is not None:
        return eps, -math.log(eps)
    return math.exp(-L), L


# ------------------------------------------------------------------ row logic


def _upper_report(cfg, eps, L, a):
    """Upper bound report and its validity, keeping flagged reports."""
    if cfg.channel == "gaussian":
        params = gc.GaussianBoundParams(eps, a) if eps is not None else gc.GaussianBoundParams.from_log(L, a)
        return gc.upper_bound(params)
    if eps is not None:
        params = pc.PoissonBoundParams(eps, a, cfg.lam, cfg.geom_p)
    else:
        params = pc.PoissonBoundParams.from_log(L, a, cfg.lam, cfg.geom_p)
    try:
        return pc.upper_bound_poisson(params)
    except ValidityViolated as exc:
        return exc.report


def _binary_input(cfg, eps, L, a):
    kw = _budget_kwargs(eps, L)
    if cfg.channel == "gaussian":
        return gc.binary_input_gaussian(a_g=a, **kw)
    return pc.binary_input_poisson(a_p=a, lam=cfg.lam, **kw)


def _lower_report(cfg, inp):
    if cfg.channel == "gaussian":
        return gc.fano_lower_bound(inp)
    return pc.fano_lower_bound_poisson(inp, cfg.lam)


def _asymptote_over_eps(cfg, L):
    if cfg.channel == "gaussian":
        return gc.asymptote_gaussian_over_eps(L)
    return pc.asymptote_poisson_over_eps(L)


def _base(cfg, eps, L, a):
    e, l = _eps_L(eps, L)
    return {
        "channel": cfg.channel,
        "epsilon": e,
        "log_inv_eps": l,
        "a": a,
        "lambda": cfg.lam if cfg.channel == "poisson" else None,
        "geom_p": cfg.geom_p if cfg.channel == "poisson" else None,
    }


def bounds_row(cfg, eps, L, a) -> dict:
    row = _base(cfg, eps, L, a)
    try:
        e, l = _eps_L(eps, L)
        up = _upper_report(cfg, eps, L, a)
        low = _lower_report(cfg, _binary_input(cfg, eps, L, a))
        asym = _asymptote_over_eps(cfg, l)
        row.update(
            {
                "upper": up.value,
                "lower": low.value,
                "asymptote": e * asym,
                "upper_over_eps": up.value_over_eps,
                "lower_over_eps": low.value_over_eps,
                "asymptote_over_eps": asym,
                "log_upper_over_eps": up.log_value_over_eps,
                "upper_ratio": _ratio(up.log_value_over_eps, asym),
                "lower_ratio": low.value_over_eps / asym,
                "upper_valid": up.valid,
                "lower_valid": low.valid,
                "upper_flags": _flags(up.validity),
                "lower_flags": _flags(low.validity),
            }
        )
        for t, v in up.terms_over_eps.items():
            row[f"{cfg.channel}_upper_{t}_over_eps"] = v
        for t, v in low.terms_over_eps.items():
            row[f"lower_{t}_over_eps"] = v
    except OicapError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def simulate_row(cfg, eps, L, a) -> dict:
    row = _base(cfg, eps, L, a)
    row.pop("geom_p")
    try:
        inp = _binary_input(cfg, eps, L, a)
        if cfg.channel == "gaussian":
            ch = ChannelSpec.gaussian()
            thr = gc.map_threshold_gaussian(inp)
            pe = gc.pe_exact_gaussian(inp)
        else:
            ch = ChannelSpec.poisson(cfg.lam)
            thr = pc.map_threshold_poisson(inp, cfg.lam)
            pe = pc.pe_exact_poisson(inp, cfg.lam)
        res = simulate_map(ch, inp, thr, cfg.mc_trials, cfg.seed, cfg.z)
        row.update(
            {
                "amplitude": inp.amplitude,
                "mass_high": inp.mass_high,
                "threshold": thr,
                "seed": res.seed,
                "z": res.z,
                "n_trials": res.n_trials,
                "n_low": res.n_low,
                "n_high": res.n_high,
                "errors": res.errors,
                "pe_exact": pe,
                "pe_hat": res.pe_hat,
                "ci_lo": res.ci_lo,
                "ci_hi": res.ci_hi,
                "agree": res.ci_lo <= pe <= res.ci_hi,
            }
        )
    except OicapError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _restricted_to_grid(inp, grid):
    """The two-point input if its amplitude is a grid point, else the point mass at 0."""
    if np.any(grid == inp.amplitude):
        return DiscreteInput.from_binary(inp), True
    return DiscreteInput(np.zeros(1), np.ones(1)), False


def oracle_row(cfg, eps, L, a) -> dict:
    row = _base(cfg, eps, L, a)
    try:
        e, l = _eps_L(eps, L)
        if not e > 1e-300:
            raise OicapError("budget too small for the grid oracle")
        inp = _binary_input(cfg, eps, L, a)
        up = _upper_report(cfg, eps, L, a)
        if cfg.channel == "gaussian":
            ch = ChannelSpec.gaussian()
            aux = make_aux_gaussian(a * math.sqrt(l))
        else:
            ch = ChannelSpec.poisson(cfg.lam)
            eta = up.params_echo.get("eta", 0)
            aux = make_aux_poisson(cfg.lam, eta, cfg.geom_p) if eta > cfg.lam else None
        grid = np.asarray(cfg.grid, float) if cfg.grid is not None else default_x_grid(e, inp.amplitude)
        di, on_grid = _restricted_to_grid(inp, grid)
        lower = _lower_report(cfg, inp).value if on_grid else 0.0
        mi = mi_exact(ch, di)
        row.update(
            {
                "grid_size": int(grid.size),
                "lower": lower,
                "mi_binary": mi,
                "upper": up.value,
                "upper_valid": up.valid,
            }
        )
        nb = math.nan
        if aux is not None:
            nb, mu = best_duality_numeric_bound(ch, aux, e, grid)
            row.update({"duality_numeric": nb, "duality_mu": mu})
        ba = ba_capacity(ch, grid, e, tol=cfg.ba_tol)
        c = ba.capacity_estimate
        row.update(
            {
                "ba_capacity": c,
                "ba_gap": ba.gap,
                "ba_multiplier": ba.multiplier,
                "ba_iterations": ba.iterations,
                "ba_mean": ba.input.mean,
            }
        )
        pad = SANDWICH_PAD + cfg.ba_tol
        ok = lower <= mi + pad and mi <= c + pad
        if not math.isnan(nb):
            ok = ok and c <= nb + pad
        if up.valid:
            top = nb if not math.isnan(nb) else c
            ok = ok and top <= up.value * (1.0 + SANDWICH_PAD) + pad
        row["sandwich_ok"] = ok
    except OicapError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


COMMANDS = {
    "bounds": (bounds_row, BOUNDS_COLUMNS),
    "simulate": (simulate_row, SIMULATE_COLUMNS),
    "oracle": (oracle_row, ORACLE_COLUMNS),
}


def _workers(n_tasks: int) -> int:
    cap = os.environ.get("OICAP_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def run(command: str, cfg: SweepConfig) -> str:
    """Evaluate every row of ``command`` and return the CSV text."""
    row_fn, columns = COMMANDS[command]
    points = sorted(
        ((key, a, eps, L) for eps, L, key in cfg.budgets() for a in cfg.a_list),
        key=lambda t: (t[0], t[1]),
    )
    with ThreadPoolExecutor(max_workers=_workers(len(points))) as pool:
        rows = list(pool.map(lambda t: row_fn(cfg, t[2], t[3], t[1]), points))

    buf = io.StringIO()
    buf.write(f"# oicap {command}\n")
    buf.write(f"# version={__version__}\n")
    for key, value in cfg.as_items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--channel", choices=("gaussian", "poisson"))
    common.add_argument("--eps", help="comma-separated budgets epsilon")
    common.add_argument("--logeps", help="comma-separated L = log(1/epsilon)")
    common.add_argument("--a", help="comma-separated exponent parameters")
    common.add_argument("--lambda", dest="lam", help="Poisson dark current")
    common.add_argument("--geom-p", dest="geom_p", help="geometric tail parameter (Poisson)")
    common.add_argument("--trials", help="Monte-Carlo trials per row")
    common.add_argument("--seed", help="random seed")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--config", help="key=value configuration file")
    parser = argparse.ArgumentParser(
        prog="oicap", description="Capacity bounds for optical intensity channels."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bounds", parents=[common], help="closed-form upper and lower bounds")
    sub.add_parser("simulate", parents=[common], help="Monte-Carlo check of the MAP error")
    sub.add_parser("oracle", parents=[common], help="mutual information, BA and duality checks")
    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = build_config(args.command, args)
    except ConfigError as exc:
        print(f"oicap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = run(args.command, cfg)
    except Exception as exc:  # anything not caught per row is systemic
        print(f"oicap: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.output_path:
        try:
            with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"oicap: cannot write {cfg.output_path!r}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
