"""Command-line interface: simulations in, CSV + JSON (+ PNG figures) out.

Every command writes delimited curves (or tables), a JSON run report with
the resolved configuration and its hash, and by default a rendered figure
next to the data.  Outputs are byte-identical for identical (config,
seed) regardless of worker count; for that reason wall-clock timing goes
to the log, never into the report files.

Exit codes: 0 success, 2 configuration/validation, 3 numerical
non-convergence, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, charge, ingest, kinetics, plotting
from .config import ConfigError, RunConfig, schema_documentation
from .curves import CurveSeries, read_csv, write_csv, write_table
from .ensemble import (
    FULL,
    IDEAL,
    analytic_T,
    compute_eta,
    ensemble_polarization,
    resonance_curve,
    resonance_enhancement,
    spinlock_lifetime,
    spinlock_reference_t1,
    stretched_exponent_slope,
)
from .fitting import (
    fit_lorentzian,
    fit_rate_pair,
    fit_resonance,
    fit_simple_exponential,
    fit_stretched,
    lorentzian_model,
    simple_exponential_model,
    stretched_model,
    stretched_population_diffs,
)
from .oracle import IntegrationError, golden_rule_rate, oracle_decay_rate
from .units import angular_from_mhz, group_axis, make_frame, mhz_from_angular, ppm_to_density


class NumericalError(RuntimeError):
    """A solver or fitter failed to converge."""


_TIME_UNITS = ("us", "ms", "ns", "s")


def _log(args, message):
    if args.verbose:
        print(message, file=sys.stderr)


def _load_config(args) -> RunConfig:
    if args.config:
        return RunConfig.from_file(args.config)
    return RunConfig()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _base_meta(command, cfg: RunConfig, seed):
    return {
        "generator": f"spinbath {__version__}",
        "command": command,
        "config_sha256": cfg.sha256(),
        "seed": "none" if seed is None else str(seed),
    }


def _write_report(out: Path, command, cfg: RunConfig, seed, results, outputs):
    report = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": cfg.as_dict(),
        "config_sha256": cfg.sha256(),
        "results": results,
        "outputs": outputs,
    }
    path = out / f"{command}.json"
    with open(path, "w", newline="\n") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _fit_payload(fit):
    payload = fit.as_dict()
    if not fit.converged:
        raise NumericalError(f"fit did not converge: {fit.message or 'iteration limit'}")
    return payload


def cmd_decay(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    params = cfg.bath_params()
    workers = args.threads if args.threads else cfg["run.workers"]
    delta = angular_from_mhz(cfg["decay.delta_mhz"])

    eta = compute_eta(delta, params, samples=cfg["decay.eta_samples"], seed=args.seed)
    t_char = analytic_T(params, eta.value)
    grid = np.geomspace(cfg["decay.t_min_over_t1"], cfg["decay.t_max_over_t1"], cfg["decay.n_times"]) * t_char
    times = np.insert(grid, 0, 0.0)
    _log(args, f"decay: eta={eta.value:.5f} analytic T={t_char:.3f} us, {cfg['decay.n_configs']} configs")

    curve = ensemble_polarization(
        params,
        delta,
        times,
        n_configs=cfg["decay.n_configs"],
        seed=args.seed,
        workers=workers,
        bootstrap=cfg["decay.bootstrap"],
    )
    fit = fit_stretched(curve, fix_amplitude=cfg["decay.fit_amplitude"] == "fixed")
    slope = stretched_exponent_slope(curve)

    meta = _base_meta("decay", cfg, args.seed)
    csv_path = out / "decay.csv"
    write_csv(curve, csv_path, header_meta=meta)
    outputs = {"curve": csv_path.name}

    if not args.no_plot:
        t1 = fit.params[-1]
        amp = fit.params[0] if len(fit.params) == 2 else 1.0
        fx = np.geomspace(max(times[1], 1e-9), times[-1], 200)
        plotting.save_curve(
            curve,
            out / "decay.png",
            title="ensemble polarization",
            xlabel="t (us)",
            ylabel="P(t)",
            logx=True,
            fit_x=fx,
            fit_y=stretched_model(fx, (amp, t1)),
            fit_label=f"stretched fit, T1 = {t1:.1f} us",
        )
        outputs["figure"] = "decay.png"

    results = {
        "eta": {"value": eta.value, "stderr": eta.stderr},
        "analytic_t1_us": t_char,
        "stretched_fit": _fit_payload(fit),
        "loglog_slope": slope,
    }
    _write_report(out, "decay", cfg, args.seed, results, outputs)
    return 0


def cmd_resonance(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    params = cfg.bath_params()
    deltas_mhz = np.linspace(
        cfg["resonance.delta_min_mhz"], cfg["resonance.delta_max_mhz"], cfg["resonance.n_points"]
    )
    curve = resonance_curve(
        angular_from_mhz(deltas_mhz), params, samples=cfg["resonance.eta_samples"], seed=args.seed
    )
    curve_mhz = CurveSeries(
        x=deltas_mhz, y=curve.y, sigma=curve.sigma, x_unit="MHz", y_unit="1/us", meta=curve.meta
    )
    lorentz = fit_lorentzian(curve_mhz)
    ratio = resonance_enhancement(params, samples=cfg["resonance.eta_samples"], seed=args.seed)

    meta = _base_meta("resonance", cfg, args.seed)
    meta["frequency_convention"] = "(2pi) MHz"
    csv_path = out / "resonance.csv"
    write_csv(curve_mhz, csv_path, header_meta=meta)
    outputs = {"curve": csv_path.name}

    if not args.no_plot:
        fx = np.linspace(deltas_mhz[0], deltas_mhz[-1], 300)
        plotting.save_curve(
            curve_mhz,
            out / "resonance.png",
            title="two-group resonance",
            xlabel="group splitting (MHz)",
            ylabel="1/T1 (1/us)",
            fit_x=fx,
            fit_y=lorentzian_model(fx, lorentz.params),
            fit_label=f"Lorentzian, FWHM = {lorentz.params[2]:.1f} MHz",
        )
        outputs["figure"] = "resonance.png"

    results = {
        "lorentzian_fit": _fit_payload(lorentz),
        "enhancement_ratio": ratio,
        "fwhm_mhz": float(lorentz.params[2]),
    }
    _write_report(out, "resonance", cfg, args.seed, results, outputs)
    return 0


def cmd_spinlock(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    params = cfg.bath_params()
    delta_mhz = cfg["spinlock.delta_mhz"]
    delta = None if delta_mhz is None else angular_from_mhz(delta_mhz)
    omegas_mhz = np.linspace(
        cfg["spinlock.omega_min_mhz"], cfg["spinlock.omega_max_mhz"], cfg["spinlock.n_points"]
    )
    samples = cfg["spinlock.eta_samples"]
    t_ref = spinlock_reference_t1(params, samples=samples, seed=args.seed, delta=delta)
    values = np.array(
        [
            spinlock_lifetime(
                angular_from_mhz(om), params, mode=args.mode, samples=samples, seed=args.seed, delta=delta
            )
            for om in omegas_mhz
        ]
    )
    curve = CurveSeries(x=omegas_mhz, y=values, x_unit="MHz", y_unit="us", meta={"mode": args.mode})

    meta = _base_meta("spinlock", cfg, args.seed)
    meta["frequency_convention"] = "(2pi) MHz"
    csv_path = out / "spinlock.csv"
    write_csv(curve, csv_path, header_meta=meta)
    outputs = {"curve": csv_path.name}

    if not args.no_plot:
        plotting.save_curve(
            curve,
            out / "spinlock.png",
            title=f"spin-lock lifetime ({args.mode} mode)",
            xlabel="drive strength (MHz)",
            ylabel="T1_rho (us)",
        )
        outputs["figure"] = "spinlock.png"

    results = {
        "mode": args.mode,
        "reference_t1_us": t_ref,
        "max_improvement": float(values.max() / t_ref),
        "ideal_improvement": 12.0,
    }
    _write_report(out, "spinlock", cfg, args.seed, results, outputs)
    return 0


def cmd_kinetics(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    g1 = cfg["kinetics.gamma1_khz"]  # kHz == 1/ms with t in ms
    g2 = cfg["kinetics.gamma2_khz"]
    times = np.linspace(0.0, cfg["kinetics.t_max_ms"], cfg["kinetics.n_times"])
    if cfg["kinetics.model"] == "stretched":
        d1, d2 = kinetics.population_diffs_stretched(g1, g2, times)
    else:
        d1, d2 = kinetics.population_diffs_analytic(g1, g2, times)

    meta = _base_meta("kinetics", cfg, None)
    meta["rate_convention"] = "plain kHz (1/ms)"
    c1 = CurveSeries(x=times, y=d1, x_unit="ms", y_unit="", meta={"observable": "p_minus1 - p_0"})
    c2 = CurveSeries(x=times, y=d2, x_unit="ms", y_unit="", meta={"observable": "p_0 - p_plus1"})
    write_csv(c1, out / "kinetics_d1.csv", header_meta=meta)
    write_csv(c2, out / "kinetics_d2.csv", header_meta=meta)
    outputs = {"d1": "kinetics_d1.csv", "d2": "kinetics_d2.csv"}

    if not args.no_plot:
        plotting.save_multicurve(
            [("P(-1) - P(0)", c1), ("P(0) - P(+1)", c2)],
            out / "kinetics.png",
            title=f"population differences ({cfg['kinetics.model']})",
            xlabel="t (ms)",
            ylabel="population difference",
        )
        outputs["figure"] = "kinetics.png"

    peak = None
    if g1 > g2:
        peak = float(np.log(3.0 * g1 / (g1 + 2.0 * g2)) / (2.0 * g1 - 2.0 * g2))
    results = {
        "gamma1_khz": g1,
        "gamma2_khz": g2,
        "model": cfg["kinetics.model"],
        "d2_peak_time_ms_exponential": peak,
    }
    _write_report(out, "kinetics", cfg, None, results, outputs)
    return 0


def cmd_oracle(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    gamma_f = angular_from_mhz(cfg["oracle.gamma_f_mhz"])
    frame = make_frame(np.array([0.0, 0.0, 1.0]))
    r_list, dw_list, formula, fitted, ratios, flags = [], [], [], [], [], []
    for r_nm in cfg["oracle.r_nm"]:
        for dw_units in cfg["oracle.detuning_over_gamma_f"]:
            detuning = dw_units * gamma_f
            r_vec = np.array([0.0, 0.0, r_nm])
            res = oracle_decay_rate(
                r_vec, frame, frame, detuning, gamma_f, n_times=cfg["oracle.n_times"]
            )
            ref = golden_rule_rate(r_nm, -1.0, 0.0, detuning, gamma_f)
            r_list.append(r_nm)
            dw_list.append(dw_units)
            formula.append(ref)
            fitted.append(res.rate)
            ratios.append(res.rate / ref)
            flags.append(1.0 if res.exponential else 0.0)
            _log(args, f"oracle: r={r_nm} nm, detuning={dw_units} gamma_f -> ratio {res.rate/ref:.4f}")

    meta = _base_meta("oracle", cfg, None)
    table_path = out / "oracle.csv"
    write_table(
        table_path,
        {
            "r_nm": np.array(r_list),
            "detuning_over_gamma_f": np.array(dw_list),
            "formula_rate_per_us": np.array(formula),
            "propagated_rate_per_us": np.array(fitted),
            "ratio": np.array(ratios),
            "exponential": np.array(flags),
        },
        header_meta=meta,
    )
    outputs = {"table": table_path.name}

    if not args.no_plot:
        series = CurveSeries(
            x=np.arange(len(ratios), dtype=float), y=np.array(ratios), x_unit="", y_unit=""
        )
        plotting.save_curve(
            series,
            out / "oracle.png",
            title="propagated / closed-form rate",
            xlabel="grid point",
            ylabel="ratio",
        )
        outputs["figure"] = "oracle.png"

    results = {
        "max_abs_ratio_error": float(np.max(np.abs(np.array(ratios) - 1.0))),
        "points": len(ratios),
    }
    _write_report(out, "oracle", cfg, None, results, outputs)
    return 0


def cmd_charge(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    hop_time_us = cfg["charge.hop_time_ns"] * 1e-3
    diffusivity = charge.hop_diffusivity(cfg["charge.hop_distance_nm"], hop_time_us)
    grid0 = charge.init_profile(
        depletion_amp=cfg["charge.depletion_amp"],
        depletion_width=cfg["charge.depletion_width_nm"],
        surplus_amp=cfg["charge.surplus_amp"],
        surplus_width=cfg["charge.surplus_width_nm"],
        pitch=cfg["charge.pitch_nm"],
        extent=cfg["charge.extent_nm"],
    )
    times = np.linspace(0.0, cfg["charge.t_max_us"], cfg["charge.n_times"])
    recovery = charge.center_recovery(grid0, diffusivity, times)
    try:
        t_half = charge.half_recovery_time(recovery)
    except ValueError:
        t_half = None

    meta = _base_meta("charge", cfg, None)
    meta["diffusivity_nm2_us"] = repr(diffusivity)
    meta["kernel_convention"] = "heat kernel, variance grows by 2 D t per axis"
    csv_path = out / "charge.csv"
    write_csv(recovery, csv_path, header_meta=meta)
    outputs = {"recovery": csv_path.name}

    snapshots = []
    for t_snap in cfg["charge.snapshot_times_us"]:
        state = charge.evolve(grid0, diffusivity, t_snap)
        name = f"charge_grid_t{t_snap:g}us.csv"
        header = "\n".join(
            f"# {k}: {v}"
            for k, v in {**meta, "snapshot_time_us": repr(float(t_snap)), "pitch_nm": repr(grid0.pitch)}.items()
        )
        np.savetxt(out / name, state.values, delimiter=",", header=header, comments="")
        snapshots.append(name)
    outputs["snapshots"] = snapshots

    if not args.no_plot:
        plotting.save_curve(
            recovery,
            out / "charge.png",
            title="centre charge-differential recovery",
            xlabel="t (us)",
            ylabel="|dn(0)| / |dn0(0)|",
        )
        plotting.save_heatmap(
            grid0.values, grid0.pitch, out / "charge_grid.png", title="initial charge differential"
        )
        outputs["figure"] = "charge.png"
        outputs["grid_figure"] = "charge_grid.png"

    results = {
        "diffusivity_nm2_us": diffusivity,
        "hop_time_ns": cfg["charge.hop_time_ns"],
        "half_recovery_time_us": t_half,
        "initial_integral": grid0.integral(),
    }
    _write_report(out, "charge", cfg, None, results, outputs)
    return 0


def _check_units(data: CurveSeries, expected, what):
    if data.x_unit not in expected:
        raise ConfigError(
            f"{what} expects x units in {sorted(expected)}, got {data.x_unit!r}; refusing mismatched units"
        )


def cmd_fit(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    seed = args.seed

    if args.raw:
        if args.model not in ("stretched", "exponential"):
            raise ConfigError("--raw ingestion applies to decay models only")
        t, f_no, f_pi, t_unit, _ = ingest.read_raw_csv(args.input)
        data = ingest.ingest_differential(
            t, f_no, f_pi, normalization=cfg["fit.normalization"], t_unit=t_unit
        )
    else:
        data = read_csv(args.input)

    results = {}
    fx = fy = None
    if args.model == "stretched":
        _check_units(data, _TIME_UNITS, "stretched decay fit")
        fit = fit_stretched(data, fix_amplitude=cfg["fit.fix_amplitude"])
        results["model"] = "A * exp(-sqrt(t/T1))"
        results["t1"] = {"value": float(fit.params[-1]), "unit": data.x_unit}
        theta = fit.params if len(fit.params) == 2 else np.array([1.0, fit.params[0]])
        fx = np.linspace(data.x[0], data.x[-1], 300)
        fy = stretched_model(fx, theta)
    elif args.model == "exponential":
        _check_units(data, _TIME_UNITS, "exponential decay fit")
        fit = fit_simple_exponential(data)
        results["model"] = "A * exp(-t/tau)"
        fx = np.linspace(data.x[0], data.x[-1], 300)
        fy = simple_exponential_model(fx, fit.params)
    elif args.model == "lorentzian":
        _check_units(data, {"MHz"}, "resonance line fit")
        fit = fit_lorentzian(data)
        results["model"] = "offset + A / (1 + (2(x-x0)/fwhm)^2)"
        results["fwhm_mhz"] = float(fit.params[2])
        fx = np.linspace(data.x[0], data.x[-1], 300)
        fy = lorentzian_model(fx, fit.params)
    elif args.model == "rates":
        if not args.input2:
            raise ConfigError("--model rates needs --input2 with the second population difference")
        data2 = read_csv(args.input2)
        _check_units(data, _TIME_UNITS, "rate-pair fit")
        if data2.x_unit != data.x_unit:
            raise ConfigError("both rate-pair inputs must share time units; refusing mismatched units")
        fit = fit_rate_pair(data, data2)
        results["model"] = "stretched population differences"
        results["rate_unit"] = f"1/{data.x_unit}"
        fx = np.linspace(data.x[0], data.x[-1], 300)
        fy = stretched_population_diffs(fx, fit.params[0], fit.params[1])[0]
    elif args.model == "resonance":
        if seed is None:
            raise ConfigError("--model resonance is stochastic; provide --seed")
        _check_units(data, {"MHz"}, "resonance model fit")
        params0 = cfg.bath_params()
        samples = cfg["fit.eta_samples"]

        def model_fn(deltas_mhz, density, gamma_f):
            from dataclasses import replace

            p = replace(params0, density=density, gamma_f=gamma_f)
            return resonance_curve(angular_from_mhz(deltas_mhz), p, samples=samples, seed=seed).y

        fit = fit_resonance(data, model_fn, params0.density, params0.gamma_f)
        results["model"] = "fluctuator-bath resonance curve"
        results["density_ppm"] = {
            "value": float(fit.params[0] / ppm_to_density(1.0)),
            "sigma": float(fit.sigma[0] / ppm_to_density(1.0)),
        }
        results["gamma_f_mhz"] = {
            "value": float(mhz_from_angular(fit.params[1])),
            "sigma": float(mhz_from_angular(fit.sigma[1])),
        }
        fx = np.linspace(data.x[0], data.x[-1], 60)
        fy = model_fn(fx, fit.params[0], fit.params[1])
    elif args.model == "hoptime":
        _check_units(data, {"us"}, "hop-time fit")
        hop = charge.fit_hop_time(
            data,
            hop_distance=cfg["charge.hop_distance_nm"],
            profile_kwargs={
                "depletion_amp": cfg["charge.depletion_amp"],
                "depletion_width": cfg["charge.depletion_width_nm"],
                "surplus_amp": cfg["charge.surplus_amp"],
                "surplus_width": cfg["charge.surplus_width_nm"],
                "pitch": cfg["charge.pitch_nm"],
                "extent": cfg["charge.extent_nm"],
            },
        )
        if not hop.identifiable:
            raise NumericalError("hop-time fit is not identifiable on this input")
        results = {
            "model": "2D diffusion centre recovery",
            "hop_time_ns": hop.hop_time * 1e3,
            "hop_time_sigma_ns": hop.uncertainty * 1e3,
            "residual": hop.residual,
        }
        outputs = {}
        if not args.no_plot:
            d = charge.hop_diffusivity(cfg["charge.hop_distance_nm"], hop.hop_time)
            grid0 = charge.init_profile(
                depletion_amp=cfg["charge.depletion_amp"],
                depletion_width=cfg["charge.depletion_width_nm"],
                surplus_amp=cfg["charge.surplus_amp"],
                surplus_width=cfg["charge.surplus_width_nm"],
                pitch=cfg["charge.pitch_nm"],
                extent=cfg["charge.extent_nm"],
            )
            model_curve = charge.center_recovery(grid0, d, data.x)
            plotting.save_curve(
                data,
                out / "fit.png",
                title=f"hop-time fit: {hop.hop_time*1e3:.1f} ns",
                xlabel="t (us)",
                ylabel="normalized centre signal",
                fit_x=model_curve.x,
                fit_y=model_curve.y,
            )
            outputs["figure"] = "fit.png"
        _write_report(out, "fit", cfg, seed, results, outputs)
        return 0
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown model {args.model!r}")

    results["fit"] = _fit_payload(fit)
    outputs = {}
    if fx is not None and not args.no_plot:
        plotting.save_curve(
            data,
            out / "fit.png",
            title=f"{args.model} fit",
            xlabel=data.x_unit,
            ylabel=data.y_unit or "value",
            fit_x=fx,
            fit_y=fy,
        )
        outputs["figure"] = "fit.png"
    _write_report(out, "fit", cfg, seed, results, outputs)
    return 0


def _add_common(parser, needs_seed):
    parser.add_argument("--config", help="configuration file (key = value lines)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=0, help="worker threads (0: use run.workers)")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    if needs_seed:
        parser.add_argument("--seed", type=int, required=True, help="random seed (required)")
    else:
        parser.add_argument("--seed", type=int, default=None, help="random seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spinbath",
        description="Depolarization of dense dipolar spin ensembles with fluctuator defects.",
    )
    parser.add_argument("--version", action="version", version=f"spinbath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decay", help="ensemble polarization decay P(t)")
    _add_common(p, needs_seed=True)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("resonance", help="depolarization rate vs two-group splitting")
    _add_common(p, needs_seed=True)
    p.set_defaults(func=cmd_resonance)

    p = sub.add_parser("spinlock", help="driven-basis lifetime vs drive strength")
    _add_common(p, needs_seed=True)
    p.add_argument("--mode", choices=[IDEAL, FULL], default=FULL, help="lifetime model")
    p.set_defaults(func=cmd_spinlock)

    p = sub.add_parser("kinetics", help="three-level population differences")
    _add_common(p, needs_seed=False)
    p.set_defaults(func=cmd_kinetics)

    p = sub.add_parser("oracle", help="closed-form rates vs master-equation propagation")
    _add_common(p, needs_seed=False)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("charge", help="2D charge-differential diffusion")
    _add_common(p, needs_seed=False)
    p.set_defaults(func=cmd_charge)

    p = sub.add_parser("fit", help="fit a model to a CSV curve")
    _add_common(p, needs_seed=False)
    p.add_argument(
        "--model",
        required=True,
        choices=["stretched", "exponential", "lorentzian", "rates", "resonance", "hoptime"],
    )
    p.add_argument("--input", required=True, help="input curve CSV")
    p.add_argument("--input2", help="second curve (rates model)")
    p.add_argument("--raw", action="store_true", help="input is raw differential readout counts")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("schema", help="print the configuration schema")
    p.set_defaults(func=lambda args: (print(schema_documentation()), 0)[1])
    return parser


def _error(category, message):
    print(json.dumps({"error": {"category": category, "message": str(message)}}), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except (ConfigError, ValueError) as err:
        _error("config", err)
        return 2
    except (NumericalError, IntegrationError) as err:
        _error("numerical", err)
        return 3
    except OSError as err:
        _error("io", err)
        return 4
    if getattr(args, "verbose", False):
        print(f"{args.command}: done in {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
