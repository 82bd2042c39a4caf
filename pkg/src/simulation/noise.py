"""
Measurement noise applied to simulated slab concentrations.

A true concentration goes through three stages:

1. scatter: theta ~ Normal(true, scatter_var)
2. outliers: with probability p_out, theta' ~ Uniform(theta - x_shift, theta + x_shift), else theta' = theta
3. laboratory error: measured ~ Normal(theta', reported_sd^2), reported_sd = max(sigma_min, theta' * factor)
"""
import math

import numpy as np

from src.common.settings import Settings
from src.common.validators import (
    validate_boolean,
    validate_integer,
    validate_non_negative,
    validate_optional_positive,
    validate_positive,
    validate_probability,
)


class NoiseSettings(Settings):
    """
    Settings of the simulator noise model.

    Keys:
        scatter_var ((Bq/kg)^2): Variance of the scatter around the true value.
        p_out: Probability that a slab is an outlier.
        x_shift (Bq/kg): Half-width of the outlier shift, None for 3 * sqrt(scatter_var).
        sigma_min (Bq/kg): Smallest standard deviation a laboratory reports.
        epsilon: Nominal analytical uncertainty.
        y_scat: Nominal error multiplier.
        reported_sd_factor: Relative reported sd, 0.045 reproduces the published tables.
        use_nominal_sd_rule: Use epsilon * y_scat instead of reported_sd_factor.
        measurement_noise: When False, measured = theta' and 226Ra equals the supported level.
        seed: Seed of the generator used when none is passed.
    """
    default_settings = {
        'scatter_var': 10.0,
        'p_out': 0.05,
        'x_shift': None,
        'sigma_min': 1.0,
        'epsilon': 0.01,
        'y_scat': 1.5,
        'reported_sd_factor': 0.045,
        'use_nominal_sd_rule': False,
        'measurement_noise': True,
        'seed': 0,
    }

    _validators = {
        'scatter_var': validate_non_negative('scatter_var'),
        'p_out': validate_probability('p_out'),
        'x_shift': validate_optional_positive('x_shift'),
        'sigma_min': validate_positive('sigma_min'),
        'epsilon': validate_positive('epsilon'),
        'y_scat': validate_positive('y_scat'),
        'reported_sd_factor': validate_positive('reported_sd_factor'),
        'use_nominal_sd_rule': validate_boolean('use_nominal_sd_rule'),
        'measurement_noise': validate_boolean('measurement_noise'),
        'seed': validate_integer('seed', minimum=0),
    }

    _actuators = {
        'scatter_var': float,
        'sigma_min': float,
        'reported_sd_factor': float,
    }

    @property
    def outlier_shift(self):
        if self.x_shift is not None:
            return float(self.x_shift)
        return 3.0 * math.sqrt(self.scatter_var)

    @property
    def sd_factor(self):
        return self.epsilon * self.y_scat if self.use_nominal_sd_rule else self.reported_sd_factor


def noiseless_settings(**overrides):
    """NoiseSettings with scatter, outliers and measurement noise all disabled."""
    return NoiseSettings({'scatter_var': 0.0, 'p_out': 0.0, 'measurement_noise': False, **overrides})


def reported_sd(value, cfg=None):
    """
    Standard deviation a laboratory reports for a measured activity.

    Args:
        value (float or array): Activity, Bq/kg.
        cfg (NoiseSettings, optional): Defaults to NoiseSettings().

    Returns:
        float or numpy.ndarray: max(sigma_min, value * factor), Bq/kg.
    """
    cfg = cfg or NoiseSettings()
    sd = np.maximum(cfg.sigma_min, np.asarray(value, dtype=float) * cfg.sd_factor)
    return float(sd) if sd.ndim == 0 else sd


def perturb_measurement(true_conc, cfg, rng):
    """
    Applies scatter, outliers and laboratory error to true concentrations.

    Every stage draws for every value, so the stream consumed from rng does not
    depend on which slabs end up as outliers.

    Args:
        true_conc (float or array): True concentrations, Bq/kg.
        cfg (NoiseSettings): The noise model.
        rng (numpy.random.Generator): Source of randomness.

    Returns:
        tuple: (measured, reported_sd), floats for a scalar input, arrays otherwise.
    """
    true_conc = np.asarray(true_conc, dtype=float)
    shape = true_conc.shape

    theta = rng.normal(true_conc, math.sqrt(cfg.scatter_var), size=shape)
    is_outlier = rng.random(size=shape) < cfg.p_out
    shift = cfg.outlier_shift
    shifted = rng.uniform(theta - shift, theta + shift, size=shape)
    theta = np.where(is_outlier, shifted, theta)

    sd = np.asarray(reported_sd(theta, cfg))
    if cfg.measurement_noise:
        measured = rng.normal(theta, sd, size=shape)
    else:
        measured = theta

    if true_conc.ndim == 0:
        return float(measured), float(sd)
    return measured, sd
