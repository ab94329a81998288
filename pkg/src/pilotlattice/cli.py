"""Command-line front end.

Every subcommand reads an INI configuration (``--config``) and emits one table
as CSV (17 significant digits) or JSON lines.  Exit status: 0 on success,
1 on configuration errors, 2 when two independent checks disagree.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .covariance import (
    ChannelProfile,
    GridConfig,
    Profile,
    channel_covariance,
    diagonalization_error,
    integration_error,
    truncation_rank,
)
from .estimator import NoiseDataStats
from .lattice import (
    ConsistencyError,
    FeasibilityRegion,
    LatticeError,
    LatticeSpec,
    check_condition_analytic,
    check_condition_fft,
    lower_bound,
    lower_bound_asymptotic,
    mask_2dfft,
    mask_from_lattice,
    search_lattices,
)
from .montecarlo import SimConfig, empirical_mse


class ConfigError(ValueError):
    pass


class Config:
    """Typed access to an INI file; errors name the offending section and key."""

    def __init__(self, text: str, source: str = "<config>"):
        self.source = source
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";;"))
        self.parser.optionxform = str
        try:
            self.parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    @classmethod
    def from_path(cls, path) -> "Config":
        try:
            return cls(Path(path).read_text(), str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def _raw(self, section, key, default):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        if default is _REQUIRED:
            raise ConfigError(f"{self.source}: missing [{section}] {key}")
        return default

    def _convert(self, section, key, raw, conv):
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: [{section}] {key} = {raw!r}: {exc}") from exc

    def get(self, section, key, conv=str, default=None):
        raw = self._raw(section, key, default)
        if raw is default:
            return default
        return self._convert(section, key, raw, conv)

    def require(self, section, key, conv=str):
        return self._convert(section, key, self._raw(section, key, _REQUIRED), conv)

    def list(self, section, key, conv=float, default=None):
        raw = self._raw(section, key, default)
        if raw is default:
            return default
        items = [self._convert(section, key, tok, conv) for tok in raw.replace(",", " ").split()]
        if not items:
            raise ConfigError(f"{self.source}: [{section}] {key} is empty")
        return items


_REQUIRED = object()


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _matrix(text: str) -> tuple:
    vals = [int(v) for v in text.replace(",", " ").split()]
    if len(vals) != 4:
        raise ValueError("sampling matrix needs four integers 'a1 b1 a2 b2'")
    return ((vals[0], vals[1]), (vals[2], vals[3]))


def _vector(text: str) -> tuple:
    vals = [int(v) for v in text.replace(",", " ").split()]
    if len(vals) != 2:
        raise ValueError("bias needs two integers")
    return tuple(vals)


def _guard(section, fn):
    try:
        return fn()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{section}] {exc}") from exc


def read_grid(cfg: Config) -> GridConfig:
    return _guard(
        "grid",
        lambda: GridConfig(
            cfg.require("grid", "M", int),
            cfg.require("grid", "N", int),
            cfg.require("grid", "T_seconds", float),
            cfg.require("grid", "F_hz", float),
        ),
    )


def _profile(cfg: Config, key: str, width_key: str, peak: float) -> Profile:
    shape = cfg.get("channel", key, str, "rectangular")
    width = cfg.get("channel", width_key, float)
    return _guard("channel", lambda: Profile(shape, peak=peak, width=width))


def read_channel(cfg: Config, tau_D=None, nu_D=None) -> ChannelProfile:
    tau_D = cfg.require("channel", "tau_D_seconds", float) if tau_D is None else tau_D
    nu_D = cfg.require("channel", "nu_D_hz", float) if nu_D is None else nu_D
    S0 = cfg.get("channel", "S0", float, 1.0)
    delay = _profile(cfg, "delay_profile", "delay_width_seconds", S0)
    doppler = _profile(cfg, "doppler_profile", "doppler_width_hz", 1.0)
    return _guard("channel", lambda: ChannelProfile(tau_D, nu_D, delay, doppler))


def read_stats(cfg: Config) -> NoiseDataStats:
    return _guard(
        "stats",
        lambda: NoiseDataStats(
            cfg.get("stats", "sigma_n2", float, 1.0),
            cfg.get("stats", "sigma_d2", float, 0.0),
            cfg.get("stats", "beta", float),
        ),
    )


def read_region(cfg: Config, grid: GridConfig, profile: ChannelProfile) -> FeasibilityRegion:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r_tau = truncation_rank(grid.M, grid.M * grid.F * profile.tau_D)
        r_nu = truncation_rank(grid.N, grid.N * grid.T * profile.nu_D)
    r_tau = cfg.get("rank", "r_tau", int, r_tau)
    r_nu = cfg.get("rank", "r_nu", int, r_nu)
    inclusive = cfg.get("rank", "inclusive", _bool, False)
    return _guard("rank", lambda: FeasibilityRegion(r_tau, r_nu, inclusive))


def read_lattices(cfg: Config) -> list[LatticeSpec]:
    raw = cfg.require("lattice", "V")
    biases = cfg.get("lattice", "bias", str, "")
    mats = [cfg._convert("lattice", "V", chunk, _matrix) for chunk in raw.split(";") if chunk.strip()]
    bias_list = [cfg._convert("lattice", "bias", c, _vector) for c in biases.split(";") if c.strip()]
    if not bias_list:
        bias_list = [(0, 0)] * len(mats)
    if len(bias_list) != len(mats):
        raise ConfigError("[lattice] bias must list one vector per sampling matrix")
    return [_guard("lattice", lambda V=V, r=r: LatticeSpec(V, r)) for V, r in zip(mats, bias_list)]


# -- output -------------------------------------------------------------------


def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return value


def format_table(columns: list[str], rows: list[dict], fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    else:
        for row in rows:
            buf.write(json.dumps({c: _json_value(row[c]) for c in columns}) + "\n")
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def read_csv_table(text: str) -> tuple[list[str], list[dict]]:
    """Parse a table written by :func:`format_table`; numeric cells become int/float."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for rec in reader:
        rows.append({c: _parse_cell(v) for c, v in zip(header, rec)})
    return header, rows


def _parse_cell(text: str):
    if text in ("true", "false"):
        return text == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


# -- commands -----------------------------------------------------------------


def cmd_approx_error(cfg: Config, seed: int):
    panel = cfg.get("approx_error", "panel", str, "dimension")
    if panel == "dimension":
        dims = cfg.list("approx_error", "dims", int, [32, 64, 128, 256, 512])
        product = cfg.get("approx_error", "spread_product", float)
        ratio = cfg.get("approx_error", "spread_ratio", float)
        if (product is None) == (ratio is None):
            raise ConfigError("[approx_error] give exactly one of spread_product or spread_ratio")
        rows = []
        for dim in dims:
            if dim < 1:
                raise ConfigError(f"[approx_error] dims: {dim} is not a positive dimension")
            p = product if product is not None else ratio * dim
            if not 0 < p <= dim:
                raise ConfigError(f"[approx_error] spread product {p} outside (0, {dim}]")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                err = diagonalization_error(dim, p)
            rows.append({"dim": dim, "spread_product": float(p), "rel_error": err})
        return ["dim", "spread_product", "rel_error"], rows
    if panel == "integration":
        grid = read_grid(cfg)
        deltas = cfg.list("approx_error", "delta_D", float, [1e-4, 1e-3, 1e-2])
        rows = []
        for delta in deltas:
            if not 0 < delta < 1:
                raise ConfigError(f"[approx_error] delta_D: {delta} outside (0, 1)")
            # equal normalized spreads F*tau_D = T*nu_D
            tau = np.sqrt(delta * grid.T / grid.F)
            nu = np.sqrt(delta * grid.F / grid.T)
            profile = read_channel(cfg, tau, nu)
            rows.append({"delta_D": delta, "rel_error": integration_error(profile, grid)})
        return ["delta_D", "rel_error"], rows
    raise ConfigError(f"[approx_error] panel must be 'dimension' or 'integration', got {panel!r}")


def lattice_check_report(spec: LatticeSpec, grid: GridConfig, region: FeasibilityRegion) -> dict:
    try:
        pattern = mask_from_lattice(spec, grid)
    except LatticeError as exc:
        raise ConfigError(str(exc)) from exc
    analytic = check_condition_analytic(spec, grid, region)
    fft = check_condition_fft(pattern, region)
    if analytic.feasible != fft.feasible or analytic.offsets() != fft.offsets():
        raise ConsistencyError(
            f"{spec.label()}: analytic={analytic.feasible} fft={fft.feasible}, "
            f"violations {sorted(analytic.offsets())} vs {sorted(fft.offsets())}"
        )
    return {
        "lattice": spec.label(),
        "K": pattern.K,
        "L": spec.L,
        "analytic": "PASS" if analytic else "FAIL",
        "fft": "PASS" if fft else "FAIL",
        "violations": [[i, j, mag] for i, j, mag in fft.violations],
        "magnitude": np.abs(mask_2dfft(pattern)).tolist(),
        "region": {"r_tau": region.r_tau, "r_nu": region.r_nu, "inclusive": region.inclusive},
    }


def cmd_lattice_check(cfg: Config, seed: int):
    grid = read_grid(cfg)
    region = read_region(cfg, grid, read_channel(cfg))
    rows = []
    reports = []
    for spec in read_lattices(cfg):
        rep = lattice_check_report(spec, grid, region)
        reports.append(rep)
        bad = {(v[0] % grid.M, v[1] % grid.N) for v in rep["violations"]}
        in_region = {(r[2], r[3]) for r in region.residues(grid)} | {(0, 0)}
        for m in range(grid.M):
            for n in range(grid.N):
                rows.append(
                    {
                        "lattice": rep["lattice"],
                        "m_tilde": m,
                        "n_tilde": n,
                        "magnitude": float(rep["magnitude"][m][n]),
                        "in_region": (m, n) in in_region,
                        "violation": (m, n) in bad,
                    }
                )
    for rep in reports:
        print(
            f"{rep['lattice']}: K={rep['K']} L={rep['L']} analytic={rep['analytic']} "
            f"fft={rep['fft']} violations={[(v[0], v[1]) for v in rep['violations']]}",
            file=sys.stderr,
        )
    return ["lattice", "m_tilde", "n_tilde", "magnitude", "in_region", "violation"], rows, reports


def cmd_lattice_search(cfg: Config, seed: int):
    grid = read_grid(cfg)
    profile = read_channel(cfg)
    stats = read_stats(cfg)
    region = read_region(cfg, grid, profile)
    L = cfg.require("lattice", "L", int)
    max_entry = cfg.get("lattice", "max_entry", int)
    try:
        specs = search_lattices(grid, L, region, max_entry)
    except ValueError as exc:
        raise ConfigError(f"[lattice] {exc}") from exc
    bound = lower_bound(grid, profile, stats, region.r_tau, region.r_nu)
    rows = [
        {
            "a1": s.V[0][0],
            "b1": s.V[0][1],
            "a2": s.V[1][0],
            "b2": s.V[1][1],
            "L": s.L,
            "K": s.K(grid),
            "bound": bound,
        }
        for s in specs
    ]
    return ["a1", "b1", "a2", "b2", "L", "K", "bound"], rows


def cmd_bound(cfg: Config, seed: int):
    grid = read_grid(cfg)
    profile = read_channel(cfg)
    stats = read_stats(cfg)
    region = read_region(cfg, grid, profile)
    rows = [
        {
            "convention": "product",
            "D": float(region.r_tau * region.r_nu),
            "bound": lower_bound(grid, profile, stats, region.r_tau, region.r_nu, "product"),
        },
        {
            "convention": "sum",
            "D": float(region.r_tau + region.r_nu),
            "bound": lower_bound(grid, profile, stats, region.r_tau, region.r_nu, "sum"),
        },
        {
            "convention": "asymptotic",
            "D": grid.size * grid.TF * profile.spread,
            "bound": lower_bound_asymptotic(grid, profile, stats),
        },
    ]
    return ["convention", "D", "bound"], rows


def cmd_mse(cfg: Config, seed: int):
    grid = read_grid(cfg)
    profile = read_channel(cfg)
    stats = read_stats(cfg)
    alpha_db = cfg.get("mse", "alpha_db", float)
    sigma_p2 = 1.0
    if alpha_db is not None:
        # explicit pilot SNR replaces the power budget
        sigma_p2 = stats.sigma_n2 * 10 ** (alpha_db / 10)
        stats = NoiseDataStats(stats.sigma_n2, stats.sigma_d2, None)
    sim = _guard(
        "mse",
        lambda: SimConfig(
            trials=cfg.get("mse", "trials", int, 1000),
            seed=seed,
            constellation=cfg.get("mse", "constellation", str, "ones"),
        ),
    )
    include = cfg.get("mse", "include_data_term", _bool, False)
    method = cfg.get("mse", "covariance", str, "sinc")
    if method not in ("sinc", "exact"):
        raise ConfigError(f"[mse] covariance must be 'sinc' or 'exact', got {method!r}")
    C_g = channel_covariance(profile, grid, method)
    rows = []
    for spec in read_lattices(cfg):
        try:
            pattern = mask_from_lattice(spec, grid, sigma_p2)
        except LatticeError as exc:
            raise ConfigError(str(exc)) from exc
        res = empirical_mse(pattern, C_g, stats, sim, include, pattern_id=spec.label())
        row = res.to_record()
        row["status"] = "OK" if abs(res.empirical - res.theoretical) <= 3 * res.stderr else "DEVIATES"
        rows.append(row)
    cols = ["pattern_id", "K", "alpha_db", "trials", "empirical", "theoretical", "stderr", "seed", "status"]
    return cols, rows


COMMANDS = {
    "approx-error": cmd_approx_error,
    "lattice-check": cmd_lattice_check,
    "lattice-search": cmd_lattice_search,
    "bound": cmd_bound,
    "mse": cmd_mse,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pilotlattice", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="INI configuration file")
        p.add_argument("--out", type=Path, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit RNG seed")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = Config.from_path(args.config)
        result = COMMANDS[args.command](cfg, args.seed)
        columns, rows = result[0], result[1]
        if args.command == "lattice-check" and args.format == "json":
            text = "".join(json.dumps(rep) + "\n" for rep in result[2])
        else:
            text = format_table(columns, rows, args.format)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except ConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
