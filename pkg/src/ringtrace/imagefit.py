"""Synthetic ring images and the seven-parameter elliptical ring fit.

The model is an elliptical annulus with a Gaussian radial profile:
I(x, y) = background + amplitude * exp(-(r_ell - 1)^2 rho^2 / (2 sigma^2)),
with r_ell the normalized elliptical radius and rho = sqrt(a b) the
geometric-mean ring radius that converts the dimensionless radial offset to
a physical distance. Free parameters: amplitude, background, center (x0,
y0), semi-axes (a, b) and sigma — seven in total, no orientation (the
ellipse axes are pinned to the image axes).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError

#: camera pixel pitch (um) and imaging magnification of the reference system
DEFAULT_PIXEL_PITCH_UM = 24.0
DEFAULT_MAGNIFICATION = 8.6


@dataclass(frozen=True)
class RingModel:
    amplitude: float   # counts above background at the ring peak
    background: float  # counts
    x0_cm: float       # ring centre, object plane
    y0_cm: float
    a_cm: float        # semi-axis along x
    b_cm: float        # semi-axis along y
    sigma_cm: float    # Gaussian radial width

    def __post_init__(self):
        if self.amplitude <= 0 or self.sigma_cm <= 0:
            raise ValueError("amplitude and sigma must be positive")
        if self.a_cm <= 0 or self.b_cm <= 0:
            raise ValueError("semi-axes must be positive")

    @property
    def eccentricity(self) -> float:
        lo, hi = sorted((self.a_cm, self.b_cm))
        return math.sqrt(max(0.0, 1.0 - (lo / hi) ** 2))

    @property
    def mean_radius_cm(self) -> float:
        return math.sqrt(self.a_cm * self.b_cm)


@dataclass(frozen=True)
class ImageGrid:
    pixels: np.ndarray  # (height, width), counts
    pixel_pitch_um: float = DEFAULT_PIXEL_PITCH_UM
    magnification: float = DEFAULT_MAGNIFICATION

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("pixels must be a non-empty 2-d array")
        if not np.all(np.isfinite(px)) or np.any(px < 0):
            raise ValueError("intensities must be finite and non-negative")
        object.__setattr__(self, "pixels", px)

    @property
    def pixel_size_cm(self) -> float:
        """Pixel size referred back to the ring plane (the imaging system
        demagnifies the ring onto the sensor by `magnification`)."""
        return self.pixel_pitch_um * 1e-4 * self.magnification

    def coordinates(self):
        """Object-plane pixel-centre coordinate arrays (x, y), cm."""
        h, w = self.pixels.shape
        s = self.pixel_size_cm
        x = (np.arange(w) - (w - 1) / 2.0) * s
        y = (np.arange(h) - (h - 1) / 2.0) * s
        return np.meshgrid(x, y)


def model_intensity(model: RingModel, x, y):
    """Ring intensity at object-plane coordinates (cm); vectorized."""
    r_ell = np.sqrt(
        ((np.asarray(x) - model.x0_cm) / model.a_cm) ** 2
        + ((np.asarray(y) - model.y0_cm) / model.b_cm) ** 2
    )
    rho = model.mean_radius_cm
    return model.background + model.amplitude * np.exp(
        -((r_ell - 1.0) ** 2) * rho * rho / (2.0 * model.sigma_cm ** 2)
    )


def synthesize(
    model: RingModel,
    width: int = 200,
    height: int = 200,
    pixel_pitch_um: float = DEFAULT_PIXEL_PITCH_UM,
    magnification: float = DEFAULT_MAGNIFICATION,
    seed: int | None = None,
    poisson: bool = True,
    read_noise: float = 5.0,
) -> ImageGrid:
    """Camera-like realization of the ring model (deterministic per seed)."""
    if width <= 0 or height <= 0:
        raise ValueError("grid dimensions must be positive")
    grid = ImageGrid(
        pixels=np.zeros((height, width)),
        pixel_pitch_um=pixel_pitch_um,
        magnification=magnification,
    )
    x, y = grid.coordinates()
    half_x = (width - 1) / 2.0 * grid.pixel_size_cm
    half_y = (height - 1) / 2.0 * grid.pixel_size_cm
    reach = max(model.a_cm, model.b_cm) + 4.0 * model.sigma_cm
    if (
        abs(model.x0_cm) + reach > half_x
        or abs(model.y0_cm) + reach > half_y
    ):
        warnings.warn("ring extends beyond the image bounds", stacklevel=2)
    mean = model_intensity(model, x, y)
    if seed is None and (poisson or read_noise > 0):
        raise ValueError("noisy synthesis requires a seed for reproducibility")
    if not poisson and read_noise == 0:
        return replace(grid, pixels=mean)
    rng = np.random.default_rng(seed)
    img = rng.poisson(mean).astype(float) if poisson else mean.copy()
    if read_noise > 0:
        img = img + rng.normal(0.0, read_noise, size=img.shape)
    return replace(grid, pixels=np.clip(img, 0.0, None))


def fit_initialization(image: ImageGrid) -> RingModel:
    """Moment-based starting model: background from the border, centre from
    the above-background centroid, radius and width from the radial
    histogram."""
    px = image.pixels
    border = np.concatenate([px[0, :], px[-1, :], px[:, 0], px[:, -1]])
    background = float(np.median(border))
    noise = float(np.std(border))
    peak = float(np.max(px))
    if peak - background < 3.0 * max(noise, 1e-12):
        raise FitError("no ring-like feature above the background")
    x, y = image.coordinates()
    excess = np.clip(px - background, 0.0, None)
    cut = 0.25 * (peak - background)
    mask = excess > cut
    w = excess * mask
    x0 = float(np.sum(x * w) / np.sum(w))
    y0 = float(np.sum(y * w) / np.sum(w))
    r = np.hypot(x - x0, y - y0)
    nbins = 80
    edges = np.linspace(0.0, float(np.max(r)), nbins + 1)
    prof, _ = np.histogram(r, bins=edges, weights=excess)
    cnt, _ = np.histogram(r, bins=edges)
    prof = prof / np.maximum(cnt, 1)
    k = int(np.argmax(prof))
    radius = 0.5 * (edges[k] + edges[k + 1])
    half = 0.5 * prof[k]
    above = np.nonzero(prof >= half)[0]
    fwhm = max(edges[above[-1] + 1] - edges[above[0]], edges[1] - edges[0])
    sigma = fwhm / 2.3548
    if radius <= 0:
        raise FitError("degenerate radial profile")
    h, width_px = px.shape
    if radius + 2 * sigma > min(
        (width_px - 1) / 2 * image.pixel_size_cm,
        (h - 1) / 2 * image.pixel_size_cm,
    ):
        warnings.warn("ring feature touches the image border", stacklevel=2)
    return RingModel(
        amplitude=max(peak - background, 1e-9),
        background=background,
        x0_cm=x0,
        y0_cm=y0,
        a_cm=radius,
        b_cm=radius,
        sigma_cm=max(sigma, image.pixel_size_cm),
    )


@dataclass(frozen=True)
class RingFit:
    model: RingModel
    eccentricity: float
    stat_error: float   # standard error of the eccentricity
    residual_rms: float # per-pixel RMS of the converged residual


def _pack(model: RingModel) -> np.ndarray:
    return np.array(
        [
            math.log(model.amplitude),
            model.background,
            model.x0_cm,
            model.y0_cm,
            math.log(model.a_cm),
            math.log(model.b_cm),
            math.log(model.sigma_cm),
        ]
    )


def _unpack(p: np.ndarray) -> RingModel:
    return RingModel(
        amplitude=math.exp(p[0]),
        background=p[1],
        x0_cm=p[2],
        y0_cm=p[3],
        a_cm=math.exp(p[4]),
        b_cm=math.exp(p[5]),
        sigma_cm=math.exp(p[6]),
    )


def fit_ring(image: ImageGrid, init: RingModel | None = None) -> RingFit:
    """Least-squares fit of the seven-parameter ring model.

    Positive parameters are fit in log space (implicit positivity bounds).
    The eccentricity standard error comes from linear propagation of the
    (a, b) covariance through e = sqrt(1 - (min/max)^2).
    """
    if init is None:
        init = fit_initialization(image)
    x, y = image.coordinates()
    data = image.pixels.ravel()

    def residuals(p):
        return (model_intensity(_unpack(p), x, y).ravel() - data)

    res = least_squares(
        residuals,
        _pack(init),
        method="lm",
        xtol=1e-12,
        ftol=1e-10,
        max_nfev=500 * 8,
    )
    model = _unpack(res.x)
    if not res.success:
        raise FitError(
            f"ring fit did not converge: {res.message}",
            best_model=model,
        )
    dof = max(data.size - 7, 1)
    variance = float(np.sum(res.fun ** 2)) / dof
    jtj = res.jac.T @ res.jac
    try:
        cov = variance * np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = variance * np.linalg.pinv(jtj)
    # d ecc / d log a, d ecc / d log b for e = sqrt(1 - (min/max)^2)
    a, b = model.a_cm, model.b_cm
    lo, hi = min(a, b), max(a, b)
    ecc = model.eccentricity
    if ecc > 1e-12:
        g = (lo / hi) ** 2 / ecc  # |d e / d log(min)| = |d e / d log(max)|
        grad = np.zeros(7)
        ia, ib = (4, 5) if a <= b else (5, 4)
        grad[ia] = -g
        grad[ib] = g
        stat = math.sqrt(max(0.0, float(grad @ cov @ grad)))
    else:
        # at e = 0 the map is non-differentiable; quote the axis-ratio scale
        stat = math.sqrt(max(0.0, cov[4, 4] + cov[5, 5] - 2 * cov[4, 5]))
    return RingFit(
        model=model,
        eccentricity=ecc,
        stat_error=stat,
        residual_rms=math.sqrt(float(np.mean(res.fun ** 2))),
    )


def repeated_measurement_error(fits: list[RingFit]) -> tuple[float, float]:
    """(mean, standard deviation) of eccentricity across repeated fits."""
    if len(fits) < 3:
        raise ValueError("need at least 3 fits to estimate a spread")
    eccs = np.array([f.eccentricity for f in fits])
    return float(np.mean(eccs)), float(np.std(eccs, ddof=1))


# ---------------------------------------------------------------------------
# image I/O: 16-bit binary PGM and plain CSV

def write_pgm(image: ImageGrid, path: str | Path):
    px = np.clip(np.rint(image.pixels), 0, 65535).astype(">u2")
    h, w = px.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(px.tobytes())


def read_pgm(path: str | Path, pixel_pitch_um: float = DEFAULT_PIXEL_PITCH_UM,
             magnification: float = DEFAULT_MAGNIFICATION) -> ImageGrid:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"not a binary PGM file: {path}")
        fields = []
        while len(fields) < 3:
            line = fh.readline()
            if not line:
                raise ValueError(f"truncated PGM header: {path}")
            if line.startswith(b"#"):
                continue
            fields += line.split()
        w, h, maxval = (int(v) for v in fields[:3])
        dtype = ">u2" if maxval > 255 else "u1"
        raw = np.frombuffer(fh.read(), dtype=dtype, count=w * h)
    return ImageGrid(
        pixels=raw.reshape(h, w).astype(float),
        pixel_pitch_um=pixel_pitch_um,
        magnification=magnification,
    )


def write_csv(image: ImageGrid, path: str | Path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(image.pixels.tolist())


def read_csv(path: str | Path, pixel_pitch_um: float = DEFAULT_PIXEL_PITCH_UM,
             magnification: float = DEFAULT_MAGNIFICATION) -> ImageGrid:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row:
                rows.append([float(v) for v in row])
    return ImageGrid(
        pixels=np.array(rows),
        pixel_pitch_um=pixel_pitch_um,
        magnification=magnification,
    )
