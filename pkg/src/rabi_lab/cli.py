"""Command-line front end: parameter handling, runs, CSV/JSON artifacts.

Subcommands: floquet (quasi-frequency and Fourier table), resonances (all
seven detunings at one drive strength), curves (figure-ready sweeps),
dynamics (packet-averaged polarization trace plus splitting report), oracle
(exact Fock-space trace plus fragment analysis), compare (aligned
semiclassical/exact series with deviation columns).

Flags override values from an optional flat-JSON --config file; unknown
config keys are rejected.  Exit codes: 0 success, 1 invalid parameters,
2 numerical failure (the error class name is printed on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, floquet, io, oracle, resonances, semiclassics
from .errors import PeaksUnresolved, RabiLabError, ValidationError

__all__ = ["RunConfig", "run", "main"]

_COMMON_KEYS = {"out", "nmax"}
_COMMAND_KEYS = {
    "floquet": {"mu", "delta"} | _COMMON_KEYS,
    "resonances": {"mu", "kinds"} | _COMMON_KEYS,
    "curves": {"kinds", "mu_grid"} | _COMMON_KEYS,
    "dynamics": {"mu", "delta", "epsilon", "t_end", "dt"} | _COMMON_KEYS,
    "oracle": {"mu", "delta", "nbar", "cutoff", "t_end", "dt"} | _COMMON_KEYS,
    "compare": {"mu", "delta", "nbar", "cutoff", "t_end", "dt"} | _COMMON_KEYS,
}
_REQUIRED_KEYS = {
    "floquet": {"mu", "delta"},
    "resonances": {"mu"},
    "curves": {"mu_grid"},
    "dynamics": {"mu", "delta", "epsilon"},
    "oracle": {"mu", "delta", "nbar"},
    "compare": {"mu", "delta", "nbar"},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run request: command, flat parameter map, output path."""

    command: str
    parameters: dict
    output_path: str


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); bad flags are validation
        raise ValidationError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rabi-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rabi-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(cmd, *specs):
        p = sub.add_parser(cmd)
        p.add_argument("--config", type=str, default=None, help="flat JSON parameter file")
        p.add_argument("--out", type=str, default=None, help=f"output CSV path (default {cmd}.csv)")
        p.add_argument("--nmax", type=int, default=None, help="Fourier truncation order")
        for name, typ, helptext in specs:
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None, help=helptext)
        return p

    add("floquet", ("mu", float, "interaction strength"), ("delta", float, "detuning"))
    add("resonances", ("mu", float, "interaction strength"), ("kinds", str, "comma list (default all)"))
    add("curves", ("kinds", str, "comma list (default all)"), ("mu_grid", str, "comma list or lo:hi:n"))
    add(
        "dynamics",
        ("mu", float, "interaction strength"),
        ("delta", float, "detuning"),
        ("epsilon", float, "inverse mean excitation number"),
        ("t_end", float, "horizon (default 3 collapse times)"),
        ("dt", float, "sampling step (default 0.25)"),
    )
    for cmd in ("oracle", "compare"):
        add(
            cmd,
            ("mu", float, "interaction strength"),
            ("delta", float, "detuning"),
            ("nbar", float, "mean photon number"),
            ("cutoff", int, "Fock-space dimension (default from nbar)"),
            ("t_end", float, "horizon"),
            ("dt", float, "sampling step (default 0.25)"),
        )
    return parser


def _load_config_file(path: str, command: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config file must hold a flat JSON object")
    file_command = raw.pop("command", command)
    if file_command != command:
        raise ValidationError(
            f"config file is for command {file_command!r}, invoked with {command!r}"
        )
    allowed = _COMMAND_KEYS[command]
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ValidationError(f"unknown config keys for {command}: {', '.join(unknown)}")
    return raw


def parse_args(argv=None) -> RunConfig:
    """Parse flags (and an optional config file) into a RunConfig."""
    ns = _build_parser().parse_args(argv)
    command = ns.command
    params: dict = {}
    if ns.config:
        params.update(_load_config_file(ns.config, command))
    for key in _COMMAND_KEYS[command] - {"out"}:
        value = getattr(ns, key, None)
        if value is not None:
            params[key] = value  # flags override the file
    missing = sorted(_REQUIRED_KEYS[command] - set(params))
    if missing:
        raise ValidationError(f"{command} requires: {', '.join('--' + m for m in missing)}")
    out = ns.out or params.pop("out", None) or f"{command}.csv"
    params.pop("out", None)
    return RunConfig(command=command, parameters=params, output_path=str(out))


def _parse_kinds(spec) -> list[resonances.ResonanceKind]:
    if spec is None:
        return list(resonances.ResonanceKind)
    try:
        return [resonances.ResonanceKind(tok.strip().upper()) for tok in str(spec).split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"unknown resonance kind in {spec!r}") from exc


def _parse_mu_grid(spec) -> list[float]:
    text = str(spec)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid spec {text!r} must be lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValidationError("grid needs at least one point")
        return [float(x) for x in np.linspace(lo, hi, n)]
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse mu grid {text!r}") from exc


def _nmax(params) -> int:
    return int(params.get("nmax", floquet.DEFAULT_N_MAX))


def _fourier_table_path(path: str) -> str:
    stem, dot, ext = path.rpartition(".")
    return f"{stem}.fourier.{ext}" if dot else f"{path}.fourier"


def _run_floquet(cfg: RunConfig) -> None:
    p = cfg.parameters
    sol = floquet.solve_floquet(
        floquet.FloquetParams(delta=float(p["delta"]), mu=float(p["mu"]), n_max=_nmax(p))
    )
    nm = sol.params.n_max
    meta = {
        "command": "floquet",
        "mu": sol.params.mu,
        "delta": sol.params.delta,
        "n_max": nm,
    }
    io.write_table(
        cfg.output_path,
        {
            "mu": [sol.params.mu],
            "delta": [sol.params.delta],
            "Omega": [sol.rabi_frequency],
            "convergence_gap": [sol.convergence_gap],
            "r0_condition": [sol.r0_condition],
        },
        meta,
    )
    ks, ns, comps, re, im = [], [], [], [], []
    for k in floquet.K_ORDER:
        for n in range(-nm, nm + 1):
            for a in (1, 2, 3):
                val = sol.fourier_table[k + 1, n + nm, a - 1]
                ks.append(k)
                ns.append(n)
                comps.append(a)
                re.append(val.real)
                im.append(val.imag)
    io.write_table(
        _fourier_table_path(cfg.output_path),
        {"k": ks, "n": ns, "a": comps, "re_rt": re, "im_rt": im},
        meta,
    )
    io.write_sidecar(
        cfg.output_path,
        meta
        | {
            "rabi_frequency": sol.rabi_frequency,
            "convergence_gap": sol.convergence_gap,
            "r0_condition": sol.r0_condition,
            "fourier_table": _fourier_table_path(cfg.output_path),
            "r0_matrix": [[[z.real, z.imag] for z in row] for row in sol.r0_matrix],
            "r0_inverse": [[[z.real, z.imag] for z in row] for row in sol.r0_inverse],
        },
    )


def _run_resonances(cfg: RunConfig) -> None:
    p = cfg.parameters
    mu = float(p["mu"])
    kinds = _parse_kinds(p.get("kinds"))
    results = [resonances.find_resonance(k, mu, n_max=_nmax(p)) for k in kinds]
    meta = {"command": "resonances", "mu": mu, "n_max": _nmax(p)}
    io.write_table(
        cfg.output_path,
        {
            "kind": [r.kind.value for r in results],
            "mu": [r.mu for r in results],
            "delta_res": [r.delta_res for r in results],
            "value_at_res": [r.value_at_res for r in results],
            "bracket_lo": [r.bracket[0] for r in results],
            "bracket_hi": [r.bracket[1] for r in results],
            "evaluations": [r.objective_evaluations for r in results],
        },
        meta,
    )
    io.write_sidecar(cfg.output_path, meta | {"kinds": [r.kind.value for r in results]})


def _run_curves(cfg: RunConfig) -> None:
    p = cfg.parameters
    kinds = _parse_kinds(p.get("kinds"))
    grid = _parse_mu_grid(p["mu_grid"])
    rows = resonances.resonance_curves(kinds, grid, n_max=_nmax(p))
    meta = {
        "command": "curves",
        "kinds": [k.value for k in kinds],
        "mu_grid": grid,
        "n_max": _nmax(p),
    }
    io.write_table(
        cfg.output_path,
        {key: [row[key] for row in rows] for key in ("kind", "mu", "delta_res", "value_at_res", "normalized_value", "status")},
        meta,
    )
    failures = sorted({row["status"] for row in rows if row["status"] != "ok"})
    io.write_sidecar(cfg.output_path, meta | {"failure_kinds": failures})


def _run_dynamics(cfg: RunConfig) -> None:
    p = cfg.parameters
    sol = floquet.solve_floquet(
        floquet.FloquetParams(delta=float(p["delta"]), mu=float(p["mu"]), n_max=_nmax(p))
    )
    packet = semiclassics.WavePacket(epsilon=float(p["epsilon"]))
    t_c = semiclassics.collapse_time(sol, packet)
    t_end = float(p.get("t_end") or 3.0 * t_c)
    dt = float(p.get("dt") or 0.25)
    times = np.arange(0.0, t_end + 0.5 * dt, dt)
    trace = semiclassics.polarization_trace(sol, packet, times)
    split = semiclassics.splitting(sol, packet)
    meta = {
        "command": "dynamics",
        "mu": sol.params.mu,
        "delta": sol.params.delta,
        "epsilon": packet.epsilon,
        "n_max": sol.params.n_max,
        "collapse_time": t_c,
    }
    io.write_table(
        cfg.output_path,
        {
            "t": trace.times,
            "s1": trace.s_expectation[:, 0],
            "s2": trace.s_expectation[:, 1],
            "s3": trace.s_expectation[:, 2],
            "envelope": trace.envelope,
            "purity": trace.purity,
        },
        meta,
    )
    io.write_sidecar(
        cfg.output_path,
        meta
        | {
            "velocity": [split.velocity.real, split.velocity.imag],
            "direction": list(split.direction),
            "weights": list(split.weights),
            "observed_drift_factor": semiclassics.OBSERVED_DRIFT_FACTOR,
        },
    )


def _fock_config(p, default_t_end, dt) -> oracle.FockConfig:
    return oracle.FockConfig.from_interaction(
        mu=float(p["mu"]),
        delta=float(p["delta"]),
        n_bar=float(p["nbar"]),
        cutoff=int(p["cutoff"]) if p.get("cutoff") is not None else None,
        dt=dt,
        t_end=default_t_end,
    )


def _run_oracle(cfg: RunConfig) -> None:
    p = cfg.parameters
    dt = float(p.get("dt") or 0.25)
    t_end = float(p.get("t_end") or 100.0)
    config = _fock_config(p, t_end, dt)
    trace = oracle.evolve(config, p=(0.0, 0.0, 1.0))
    meta = {
        "command": "oracle",
        "mu": config.mu,
        "delta": config.nu - config.omega,
        "nbar": config.n_bar,
        "cutoff": config.cutoff,
        "g": config.g,
        "dt": config.dt,
        "t_end": config.t_end,
    }
    io.write_table(
        cfg.output_path,
        {
            "t": trace.times,
            "sigma1": trace.sigma_expectations[:, 0],
            "sigma2": trace.sigma_expectations[:, 1],
            "sigma3": trace.sigma_expectations[:, 2],
            "purity": trace.purity,
            "norm_drift": trace.norm_drift,
            "top_occupation": trace.top_occupation,
            "re_a": trace.field_a.real,
            "im_a": trace.field_a.imag,
            "n_photon": trace.photon_number,
        },
        meta,
    )
    fragments: dict = {"status": "ok"}
    try:
        fr = oracle.fragment_analysis(config, p=(0.0, 0.0, 1.0), times=[t_end])
        fragments |= {
            "time": t_end,
            "centers": [[c.real, c.imag] for c in fr.peak_centers[0]],
            "weights": list(fr.peak_weights[0]),
            "separation": float(fr.separation[0]),
        }
    except PeaksUnresolved as exc:
        fragments = {"status": "PeaksUnresolved", "detail": str(exc)}
    io.write_sidecar(
        cfg.output_path,
        meta
        | {
            "energy_drift": trace.energy_drift,
            "coherent_tail": trace.coherent_tail,
            "fragments": fragments,
        },
    )


def _run_compare(cfg: RunConfig) -> None:
    p = cfg.parameters
    mu, delta, nbar = float(p["mu"]), float(p["delta"]), float(p["nbar"])
    sol = floquet.solve_floquet(floquet.FloquetParams(delta=delta, mu=mu, n_max=_nmax(p)))
    packet = semiclassics.WavePacket(epsilon=1.0 / nbar)
    t_c = semiclassics.collapse_time(sol, packet)
    dt = float(p.get("dt") or 0.25)
    t_end = float(p.get("t_end") or 2.0 * t_c)
    config = _fock_config(p, t_end, dt)
    quantum = oracle.evolve(config, p=(0.0, 0.0, 1.0))
    semi = semiclassics.polarization_trace(sol, packet, quantum.times)

    dev = np.abs(quantum.sigma_expectations - semi.s_expectation)
    dev_purity = np.abs(quantum.purity - semi.purity)
    meta = {
        "command": "compare",
        "mu": mu,
        "delta": delta,
        "nbar": nbar,
        "cutoff": config.cutoff,
        "dt": dt,
        "t_end": t_end,
        "collapse_time": t_c,
    }
    io.write_table(
        cfg.output_path,
        {
            "t": quantum.times,
            "s3_oracle": quantum.sigma_expectations[:, 2],
            "s3_semiclassical": semi.s_expectation[:, 2],
            "dev_s3": dev[:, 2],
            "purity_oracle": quantum.purity,
            "purity_semiclassical": semi.purity,
            "dev_purity": dev_purity,
            "envelope": semi.envelope,
        },
        meta,
    )

    window = quantum.times <= 2.0 * t_c
    summary = {
        "max_dev_s3": float(np.max(dev[window, 2])),
        "max_dev_purity_after_collapse": float(
            np.max(dev_purity[window & (semi.envelope < np.exp(-1.0))], initial=0.0)
        ),
        "collapse_time_semiclassical": t_c,
    }
    try:
        rabi_period = 2.0 * np.pi / sol.rabi_frequency
        summary["envelope_time_oracle"] = oracle.envelope_crossing_time(
            quantum.times, quantum.sigma_expectations[:, 2], rabi_period
        )
        summary["envelope_time_ratio"] = summary["envelope_time_oracle"] / t_c
    except (ValidationError, ZeroDivisionError):
        summary["envelope_time_oracle"] = None

    split = semiclassics.splitting(sol, packet)
    fragments: dict = {"status": "skipped (horizon below 2.8 collapse times)"}
    if t_end >= 2.8 * t_c:
        try:
            fr = oracle.fragment_analysis(config, p=(0.0, 0.0, 1.0), times=[t_end])
            nominal = 2.0 * abs(split.velocity) * t_end / np.sqrt(packet.epsilon)
            fragments = {
                "status": "ok",
                "time": t_end,
                "weights": list(fr.peak_weights[0]),
                "separation": float(fr.separation[0]),
                "nominal_separation": nominal,
                "observed_over_nominal": float(fr.separation[0] / nominal),
            }
        except PeaksUnresolved as exc:
            fragments = {"status": "PeaksUnresolved", "detail": str(exc)}
    io.write_sidecar(cfg.output_path, meta | summary | {"fragments": fragments})


_RUNNERS = {
    "floquet": _run_floquet,
    "resonances": _run_resonances,
    "curves": _run_curves,
    "dynamics": _run_dynamics,
    "oracle": _run_oracle,
    "compare": _run_compare,
}


def run(config: RunConfig) -> int:
    """Execute a validated RunConfig, writing the CSV and its JSON sidecar."""
    if config.command not in _RUNNERS:
        raise ValidationError(f"unknown command {config.command!r}")
    io.ensure_parent(config.output_path)
    _RUNNERS[config.command](config)
    return 0


def main(argv=None) -> int:
    try:
        config = parse_args(argv)
        status = run(config)
    except ValidationError as exc:
        print(f"error: ValidationError: {exc}", file=sys.stderr)
        return 1
    except RabiLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {config.output_path} and {io.sidecar_path(config.output_path)}")
    return status


if __name__ == "__main__":
    sys.exit(main())
