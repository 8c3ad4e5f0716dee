"""Per-channel quadratic display power models.

A display's power draw for a full-screen channel intensity x is modeled as
0.5 * alpha * x**2 + beta * x + gamma, summed over the three channels and all
pixels. Models are fit from intensity/power measurements in sRGB and can be
refit in another working space over a rescaled unit cube.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import lsq_linear

from .colorspace import ColorSpace, convert_array
from .errors import ConfigError, DataError, FitError
from .image import ImageBuffer

__all__ = [
    "ChannelPowerParams",
    "ChannelScaling",
    "PowerModel",
    "MeasurementSample",
    "channel_names",
    "image_power",
    "fit_from_measurements",
    "refit_in_space",
    "load_measurements_csv",
    "save_model_json",
    "load_model_json",
]

# Quadratic coefficients this small are effectively linear channels; the
# bound keeps constrained refits inside the valid parameter space.
MIN_ALPHA = 1e-6


@dataclass(frozen=True)
class ChannelPowerParams:
    """Coefficients of 0.5*alpha*x**2 + beta*x + gamma for one channel."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.alpha <= 0:
            raise ValueError("alpha must be strictly positive (convex power curve)")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class ChannelScaling:
    """Affine map between a working space's native units and the unit cube.

    unit = (native - offset) / scale, recorded when a model is refit over a
    lattice of converted sRGB colors.
    """

    offset: tuple[float, float, float]
    scale: tuple[float, float, float]

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.scale):
            raise ValueError("scale components must be strictly positive")

    def to_unit(self, native: np.ndarray) -> np.ndarray:
        return (np.asarray(native, dtype=np.float64) - np.array(self.offset)) / np.array(
            self.scale
        )

    def to_native(self, unit: np.ndarray) -> np.ndarray:
        return np.asarray(unit, dtype=np.float64) * np.array(self.scale) + np.array(
            self.offset
        )


@dataclass(frozen=True)
class PowerModel:
    """Three channel parameter sets tagged with the space they apply in.

    For non-RGB spaces, ``scaling`` maps native coordinates onto the unit
    cube the coefficients were fit over. ``note`` records provenance (e.g.
    measured device vs synthetic), ``r_squared`` the refit quality, and
    ``fit_rmse`` per-channel residuals from a measurement fit.
    """

    channels: tuple[ChannelPowerParams, ChannelPowerParams, ChannelPowerParams]
    space: ColorSpace = ColorSpace.SRGB
    scaling: ChannelScaling | None = None
    note: str = ""
    r_squared: float | None = None
    fit_rmse: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        if len(self.channels) != 3:
            raise ValueError("a power model needs exactly three channels")
        if self.space != ColorSpace.SRGB and self.scaling is None:
            raise ValueError("non-sRGB models must record their channel scaling")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([c.alpha for c in self.channels])

    @property
    def betas(self) -> np.ndarray:
        return np.array([c.beta for c in self.channels])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([c.gamma for c in self.channels])

    def unit_coords(self, native: np.ndarray) -> np.ndarray:
        """Map native-space coordinates to the unit cube the model lives in."""
        if self.scaling is None:
            return np.asarray(native, dtype=np.float64)
        return self.scaling.to_unit(native)

    def native_coords(self, unit: np.ndarray) -> np.ndarray:
        if self.scaling is None:
            return np.asarray(unit, dtype=np.float64)
        return self.scaling.to_native(unit)

    def power_of_units(self, unit: np.ndarray) -> np.ndarray:
        """Summed channel power for (..., 3) unit-cube coordinates."""
        u = np.asarray(unit, dtype=np.float64)
        return (0.5 * self.alphas * u**2 + self.betas * u + self.gammas).sum(axis=-1)


@dataclass(frozen=True)
class MeasurementSample:
    """One calibration reading: a channel driven at an intensity, power in watts."""

    channel: str
    intensity: float
    power_w: float

    def __post_init__(self) -> None:
        if self.channel not in ("r", "g", "b"):
            raise ValueError(f"unknown channel {self.channel!r}, expected r, g or b")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must lie in [0, 1]")
        if not math.isfinite(self.power_w) or self.power_w < 0:
            raise ValueError("power must be finite and non-negative")


def channel_names(space: ColorSpace) -> tuple[str, str, str]:
    return {
        ColorSpace.SRGB: ("r", "g", "b"),
        ColorSpace.LINEAR_RGB: ("r", "g", "b"),
        ColorSpace.XYZ: ("x", "y", "z"),
        ColorSpace.LAB: ("l", "a", "b"),
        ColorSpace.UVW: ("u", "v", "w"),
        ColorSpace.HSL: ("h", "s", "l"),
    }[space]


def image_power(model: PowerModel, img: ImageBuffer) -> float:
    """Total modeled power of a buffer, in watts.

    The buffer must be tagged with the model's space. Power is additive over
    pixels; a solid 1x1 black sRGB frame costs exactly the three gammas.
    """
    if img.space != model.space:
        raise ConfigError(
            f"image is in {img.space.value} but the model applies in {model.space.value}"
        )
    units = model.unit_coords(img.flat())
    return float(model.power_of_units(units).sum())


def fit_from_measurements(samples) -> PowerModel:
    """Least-squares fit of per-channel quadratics to calibration samples.

    Each channel needs at least three samples at three distinct intensities.
    Returns an sRGB model with per-channel residual RMS attached.
    """
    by_channel: dict[str, list[MeasurementSample]] = {"r": [], "g": [], "b": []}
    for s in samples:
        by_channel[s.channel].append(s)

    params = []
    rmse = []
    for name in ("r", "g", "b"):
        chan = by_channel[name]
        intensities = np.array([s.intensity for s in chan])
        if len(chan) < 3 or len(np.unique(intensities)) < 3:
            raise FitError(
                f"channel {name!r} needs at least 3 samples at 3 distinct intensities"
            )
        powers = np.array([s.power_w for s in chan])
        design = np.column_stack(
            [intensities**2 / 2.0, intensities, np.ones_like(intensities)]
        )
        coef, *_ = np.linalg.lstsq(design, powers, rcond=None)
        alpha, beta, gamma = coef
        # Exact-zero true coefficients fit to +-1e-16; snap those, but treat
        # anything materially invalid as a real failure.
        if abs(gamma) < 1e-9:
            gamma = 0.0
        if alpha <= 0:
            raise FitError(
                f"channel {name!r} fit produced non-convex power (alpha={alpha:.3g})"
            )
        if gamma < 0:
            raise FitError(
                f"channel {name!r} fit produced negative idle power (gamma={gamma:.3g})"
            )
        params.append(ChannelPowerParams(alpha, beta, gamma))
        rmse.append(float(np.sqrt(np.mean((design @ coef - powers) ** 2))))

    return PowerModel(
        channels=tuple(params),
        space=ColorSpace.SRGB,
        note="fit from measurements",
        fit_rmse=tuple(rmse),
    )


def refit_in_space(
    model: PowerModel, to: ColorSpace, grid_steps: int = 16
) -> PowerModel:
    """Refit an sRGB model as a diagonal quadratic in another working space.

    A grid_steps**3 lattice of sRGB colors is converted to the target space,
    each channel is rescaled to [0, 1] over the lattice bounding box (the
    rescale is recorded on the returned model), and a diagonal quadratic is
    least-squares fitted to the true sRGB power at the lattice points.

    The fit is bound-constrained (alpha >= MIN_ALPHA, shared intercept >= 0)
    because power along chroma axes of perceptual spaces is typically concave
    and an unconstrained fit would leave the valid parameter space. The loss
    of fidelity is reported through ``r_squared``, never hidden.
    """
    if model.space != ColorSpace.SRGB:
        raise ConfigError("refit_in_space expects an sRGB source model")
    if to == ColorSpace.SRGB:
        return model
    if to not in (ColorSpace.LAB, ColorSpace.UVW):
        raise ConfigError(f"unsupported working space {to.value}")
    if grid_steps < 4:
        raise ConfigError("grid_steps must be at least 4")

    axis = np.linspace(0.0, 1.0, grid_steps)
    r, g, b = np.meshgrid(axis, axis, axis, indexing="ij")
    lattice = np.stack([r.ravel(), g.ravel(), b.ravel()], axis=1)
    power = model.power_of_units(lattice)

    coords = convert_array(lattice, ColorSpace.SRGB, to)
    offset = coords.min(axis=0)
    scale = coords.max(axis=0) - offset
    if np.any(scale <= 0):
        raise FitError(f"degenerate channel range when refitting in {to.value}")
    t = (coords - offset) / scale

    design = np.column_stack(
        [t[:, 0] ** 2 / 2, t[:, 0], t[:, 1] ** 2 / 2, t[:, 1], t[:, 2] ** 2 / 2, t[:, 2],
         np.ones(len(t))]
    )
    lower = np.array([MIN_ALPHA, -np.inf] * 3 + [0.0])
    upper = np.full(7, np.inf)
    result = lsq_linear(design, power, bounds=(lower, upper), method="bvls")
    if not result.success:
        raise FitError(f"constrained refit in {to.value} did not converge")
    coef = result.x

    residual = design @ coef - power
    ss_tot = float(((power - power.mean()) ** 2).sum())
    r_squared = 1.0 - float((residual**2).sum()) / ss_tot if ss_tot > 0 else 1.0

    intercept = max(coef[6], 0.0)
    params = tuple(
        ChannelPowerParams(max(coef[2 * i], MIN_ALPHA), coef[2 * i + 1], intercept / 3.0)
        for i in range(3)
    )
    return PowerModel(
        channels=params,
        space=to,
        scaling=ChannelScaling(tuple(offset), tuple(scale)),
        note=f"{model.note} (refit in {to.value})".strip(),
        r_squared=r_squared,
    )


def load_measurements_csv(path) -> list[MeasurementSample]:
    """Read calibration samples from a CSV with columns channel,code,power_w.

    Codes are 8-bit drive levels 0..255 and are mapped to intensities by /255.
    """
    path = Path(path)
    samples = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {
            "channel",
            "code",
            "power_w",
        }:
            raise DataError(
                f"{path}: expected header channel,code,power_w, got {reader.fieldnames}"
            )
        for i, row in enumerate(reader, start=2):
            try:
                code = float(row["code"])
                if not 0 <= code <= 255:
                    raise ValueError("code outside 0..255")
                samples.append(
                    MeasurementSample(
                        channel=row["channel"].strip().lower(),
                        intensity=code / 255.0,
                        power_w=float(row["power_w"]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{i}: bad measurement row: {exc}") from exc
    if not samples:
        raise DataError(f"{path}: no measurement rows")
    return samples


def _model_to_dict(model: PowerModel) -> dict:
    doc = {
        "space": model.space.value,
        "channels": [
            {"channel": name, "alpha": c.alpha, "beta": c.beta, "gamma": c.gamma}
            for name, c in zip(channel_names(model.space), model.channels)
        ],
        "note": model.note,
    }
    if model.scaling is not None:
        doc["scaling"] = {
            "offset": list(model.scaling.offset),
            "scale": list(model.scaling.scale),
        }
    if model.r_squared is not None:
        doc["r_squared"] = model.r_squared
    if model.fit_rmse is not None:
        doc["fit_rmse"] = list(model.fit_rmse)
    return doc


def save_model_json(model: PowerModel, path) -> None:
    Path(path).write_text(json.dumps(_model_to_dict(model), indent=2, sort_keys=True) + "\n")


def load_model_json(path) -> PowerModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    try:
        space = ColorSpace(doc["space"])
        chans = tuple(
            ChannelPowerParams(c["alpha"], c["beta"], c["gamma"])
            for c in doc["channels"]
        )
        scaling = None
        if "scaling" in doc:
            scaling = ChannelScaling(
                tuple(doc["scaling"]["offset"]), tuple(doc["scaling"]["scale"])
            )
        return PowerModel(
            channels=chans,
            space=space,
            scaling=scaling,
            note=doc.get("note", ""),
            r_squared=doc.get("r_squared"),
            fit_rmse=tuple(doc["fit_rmse"]) if "fit_rmse" in doc else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed power model: {exc}") from exc
