"""Run configuration: flat ``section.key = value`` text files with a schema.

Unknown keys are rejected, every value is type-checked, and the resolved
configuration (defaults plus overrides) is echoed into all outputs along
with its SHA-256 hash so runs are attributable and reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .units import GROUP_LABELS, angular_from_mhz, ppm_to_density
from .ensemble import PAIRWISE, SINGLE, BathParams


class ConfigError(ValueError):
    """Malformed configuration file or value."""


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _parse_int(text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_float_list(text):
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_auto_float(text):
    if text.strip().lower() == "auto":
        return None
    return _parse_float(text)


def _parse_none_float(text):
    if text.strip().lower() == "none":
        return None
    return _parse_float(text)


def _enum(*choices):
    def parse(text):
        if text not in choices:
            raise ConfigError(f"expected one of {choices}, got {text!r}")
        return text

    return parse


# key -> (parser, default-as-text, documentation)
SCHEMA = {
    "bath.density_ppm": (_parse_float, "16.0", "fluctuator concentration, ppm of lattice sites"),
    "bath.gamma_f_mhz": (_parse_float, "3.3", "fluctuator relaxation rate, (2pi) MHz"),
    "bath.linewidth_mhz": (_parse_float, "9.0", "inhomogeneous FWHM, (2pi) MHz"),
    "bath.r_min_nm": (_parse_float, "0.5", "inner cutoff of the bath shell, nm"),
    "bath.r_max_nm": (_parse_auto_float, "auto", "outer cutoff, nm, or 'auto' for the tail rule"),
    "bath.group_weights": (_parse_float_list, "0.25,0.25,0.25,0.25", "orientation-group probabilities A,B,C,D"),
    "bath.probe_group": (_enum(*GROUP_LABELS), "B", "orientation group of the probed spins"),
    "bath.partner_group": (_enum(*GROUP_LABELS), "C", "group tuned through resonance with the probe"),
    "bath.disorder_convention": (
        _enum(PAIRWISE, SINGLE),
        PAIRWISE,
        "pair mismatch model: difference of two on-site draws, or one draw of FWHM W",
    ),
    "decay.delta_mhz": (_parse_float, "0.0", "probe/partner group splitting, (2pi) MHz"),
    "decay.n_configs": (_parse_int, "10000", "bath configurations in the ensemble average"),
    "decay.n_times": (_parse_int, "40", "points on the logarithmic time grid"),
    "decay.t_min_over_t1": (_parse_float, "0.01", "grid start relative to the analytic timescale"),
    "decay.t_max_over_t1": (_parse_float, "10.0", "grid end relative to the analytic timescale"),
    "decay.eta_samples": (_parse_int, "200000", "Monte Carlo samples for the exchange average"),
    "decay.fit_amplitude": (_enum("free", "fixed"), "free", "stretched-fit amplitude handling"),
    "decay.bootstrap": (_parse_int, "200", "bootstrap resamples for curve uncertainties"),
    "resonance.delta_min_mhz": (_parse_float, "-60.0", "splitting scan start, (2pi) MHz"),
    "resonance.delta_max_mhz": (_parse_float, "60.0", "splitting scan end, (2pi) MHz"),
    "resonance.n_points": (_parse_int, "41", "splitting scan points"),
    "resonance.eta_samples": (_parse_int, "200000", "Monte Carlo samples per curve"),
    "spinlock.omega_min_mhz": (_parse_float, "1.0", "drive-strength scan start, (2pi) MHz"),
    "spinlock.omega_max_mhz": (_parse_float, "30.0", "drive-strength scan end, (2pi) MHz"),
    "spinlock.n_points": (_parse_int, "16", "drive-strength scan points"),
    "spinlock.eta_samples": (_parse_int, "200000", "Monte Carlo samples per point"),
    "spinlock.delta_mhz": (_parse_none_float, "none", "partner-group splitting, (2pi) MHz, or 'none'"),
    "kinetics.gamma1_khz": (_parse_float, "10.6", "single-quantum decay rate, kHz"),
    "kinetics.gamma2_khz": (_parse_float, "1.1", "double-quantum decay rate, kHz"),
    "kinetics.t_max_ms": (_parse_float, "0.6", "time grid end, ms"),
    "kinetics.n_times": (_parse_int, "60", "time grid points"),
    "kinetics.model": (_enum("stretched", "exponential"), "stretched", "population-difference closed form"),
    "oracle.gamma_f_mhz": (_parse_float, "3.3", "fluctuator relaxation rate, (2pi) MHz"),
    "oracle.r_nm": (_parse_float_list, "6,8,10", "pair separations, nm"),
    "oracle.detuning_over_gamma_f": (_parse_float_list, "0,2,4", "pair mismatches in units of gamma_f"),
    "oracle.n_times": (_parse_int, "40", "propagation sample times per point"),
    "charge.hop_time_ns": (_parse_float, "10.0", "electron hopping time, ns"),
    "charge.hop_distance_nm": (_parse_float, "5.0", "electron hopping distance, nm"),
    "charge.depletion_amp": (_parse_float, "1.0", "central depletion amplitude"),
    "charge.depletion_width_nm": (_parse_float, "800.0", "Gaussian width of the depletion dip, nm"),
    "charge.surplus_amp": (
        lambda text: "balance" if text.strip().lower() == "balance" else _parse_float(text),
        "balance",
        "surplus amplitude, or 'balance' for zero net charge",
    ),
    "charge.surplus_width_nm": (_parse_float, "2000.0", "Gaussian width of the surplus ring, nm"),
    "charge.pitch_nm": (_parse_float, "100.0", "grid pixel pitch, nm"),
    "charge.extent_nm": (_parse_auto_float, "auto", "domain size, nm, or 'auto' (10x surplus width)"),
    "charge.t_max_us": (_parse_float, "400.0", "recovery curve end time, us"),
    "charge.n_times": (_parse_int, "25", "recovery curve points"),
    "charge.snapshot_times_us": (_parse_float_list, "0,100,400", "grid snapshot export times, us"),
    "fit.normalization": (_enum("earliest", "equilibrium"), "earliest", "differential-readout normalization"),
    "fit.fix_amplitude": (_parse_bool, "false", "pin the stretched-fit amplitude to 1"),
    "fit.eta_samples": (_parse_int, "100000", "Monte Carlo samples inside the resonance model"),
    "run.workers": (_parse_int, "1", "default worker count (CLI --threads overrides)"),
}


def parse_config_text(text) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


class RunConfig:
    """Resolved, validated configuration."""

    def __init__(self, overrides: dict[str, str] | None = None):
        overrides = dict(overrides or {})
        unknown = sorted(set(overrides) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        self.text_values: dict[str, str] = {}
        self.values: dict[str, object] = {}
        for key, (parser, default, _) in SCHEMA.items():
            text = overrides.get(key, default)
            try:
                self.values[key] = parser(text)
            except ConfigError as err:
                raise ConfigError(f"{key}: {err}") from None
            self.text_values[key] = text
        weights = self.values["bath.group_weights"]
        if len(weights) != 4 or abs(sum(weights) - 1.0) > 1e-9 or min(weights) < 0:
            raise ConfigError("bath.group_weights must be four nonnegative numbers summing to 1")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls(parse_config_text(fh.read()))

    def __getitem__(self, key):
        return self.values[key]

    def canonical_text(self) -> str:
        return "".join(f"{k} = {self.text_values[k]}\n" for k in sorted(self.text_values))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def as_dict(self) -> dict[str, str]:
        return dict(sorted(self.text_values.items()))

    def bath_params(self) -> BathParams:
        r_max = self["bath.r_max_nm"]
        return BathParams(
            density=ppm_to_density(self["bath.density_ppm"]),
            gamma_f=angular_from_mhz(self["bath.gamma_f_mhz"]),
            linewidth=angular_from_mhz(self["bath.linewidth_mhz"]),
            r_min=self["bath.r_min_nm"],
            r_max=r_max,
            group_weights=tuple(self["bath.group_weights"]),
            probe_group=self["bath.probe_group"],
            partner_group=self["bath.partner_group"],
            disorder_convention=self["bath.disorder_convention"],
        )


def schema_documentation() -> str:
    """Human-readable schema listing: key, default, description."""
    width = max(len(k) for k in SCHEMA)
    lines = []
    for key, (_, default, doc) in SCHEMA.items():
        lines.append(f"{key:<{width}}  default: {default:<22}  {doc}")
    return "\n".join(lines)
