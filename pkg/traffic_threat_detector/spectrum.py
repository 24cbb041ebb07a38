"""
Empirical spectral density (ESD) diagnostics for trained weight matrices.

For a weight W of shape N x M (N >= M after transposing), the ESD is the
set of eigenvalues of W^T W / N, computed from the singular values of W.
The tail of the ESD is fitted with a power law p(x) ~ x^-alpha for
x >= x_min: alpha is the continuous maximum-likelihood estimate and x_min
is the candidate that minimizes the Kolmogorov-Smirnov distance between
the tail and the fitted law.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from torch import nn

from .constants import MIN_ALPHA_TAIL
from .errors import FitFailed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    xmin: float
    ks_distance: float
    n_tail: int


@dataclass(frozen=True)
class LayerSpectrum:
    name: str
    shape: tuple[int, int]
    eigenvalues: np.ndarray
    lambda_max: float
    fit: PowerLawFit | None

    @property
    def alpha(self) -> float | None:
        return self.fit.alpha if self.fit is not None else None

    @property
    def quality(self) -> str | None:
        return alpha_quality(self.alpha) if self.alpha is not None else None


@dataclass(frozen=True)
class SpectrumReport:
    layers: tuple[LayerSpectrum, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "layer": layer.name,
                    "n_eigs": layer.eigenvalues.size,
                    "alpha": layer.alpha,
                    "lambda_max": layer.lambda_max,
                    "xmin": layer.fit.xmin if layer.fit else None,
                    "ks_distance": layer.fit.ks_distance if layer.fit else None,
                    "quality": layer.quality,
                }
                for layer in self.layers
            ],
            columns=["layer", "n_eigs", "alpha", "lambda_max", "xmin", "ks_distance", "quality"],
        )


def alpha_quality(alpha: float) -> str:
    if 2.0 <= alpha <= 4.0:
        return "good"
    if 1.5 <= alpha < 2.0 or 4.0 < alpha <= 6.0:
        return "fair"
    if alpha > 6.0:
        return "poor"
    return "unstable"


def eigenvalues(weight: torch.Tensor) -> np.ndarray:
    """Ascending eigenvalues of W^T W / N for a 2-D weight, with N the larger dimension."""
    if weight.dim() != 2:
        raise ValueError(f"Expected a 2-D weight, got shape {tuple(weight.shape)}")
    matrix = weight.detach().to(torch.float64)
    if matrix.shape[0] < matrix.shape[1]:
        matrix = matrix.T
    singular = torch.linalg.svdvals(matrix)
    return np.sort((singular**2 / matrix.shape[0]).cpu().numpy())


def fit_power_law(values: np.ndarray, min_tail: int = MIN_ALPHA_TAIL) -> PowerLawFit:
    """
    Fits the tail exponent of a sample by continuous MLE with a KS-selected x_min.

    Every distinct positive value leaving at least ``min_tail`` values in the
    tail is tried as x_min; the fit with the smallest KS distance wins, ties
    going to the smaller x_min.

    A tail whose values are all equal up to rounding has no slope and is skipped.

    :raises FitFailed: If no candidate leaves ``min_tail`` distinct-valued tail points.
    """
    sample = np.sort(np.asarray(values, dtype=np.float64))
    sample = sample[sample > 0]
    best: PowerLawFit | None = None
    for xmin in np.unique(sample):
        tail = sample[sample >= xmin]
        n = tail.size
        if n < min_tail:
            break
        log_sum = np.log(tail / xmin).sum()
        if log_sum <= 0 or np.isclose(tail[-1], xmin, rtol=1e-9, atol=0.0):
            continue
        alpha = 1.0 + n / log_sum
        theoretical = 1.0 - (tail / xmin) ** (1.0 - alpha)
        empirical_hi = np.arange(1, n + 1) / n
        empirical_lo = np.arange(0, n) / n
        distance = float(max(np.abs(empirical_hi - theoretical).max(), np.abs(theoretical - empirical_lo).max()))
        if best is None or distance < best.ks_distance:
            best = PowerLawFit(alpha=float(alpha), xmin=float(xmin), ks_distance=distance, n_tail=int(n))
    if best is None:
        raise FitFailed(f"No power-law tail with at least {min_tail} points in {sample.size} positive values")
    return best


def esd_alpha(model: nn.Module) -> SpectrumReport:
    """
    Fits a power law to the ESD of every 2-D weight of a model.

    Layers whose fit fails are reported with no alpha, and a warning is
    logged. Parameters are visited in ``named_parameters`` order.
    """
    layers = []
    for name, param in model.named_parameters():
        if param.dim() != 2 or min(param.shape) < 2:
            continue
        eigs = eigenvalues(param)
        try:
            fit = fit_power_law(eigs)
        except FitFailed as e:
            logger.warning(f"FitFailed for {name}: {e}")
            fit = None
        layers.append(
            LayerSpectrum(
                name=name,
                shape=(int(param.shape[0]), int(param.shape[1])),
                eigenvalues=eigs,
                lambda_max=float(eigs[-1]),
                fit=fit,
            )
        )
    if not layers:
        raise FitFailed("Model has no 2-D weight with both dimensions >= 2")
    return SpectrumReport(layers=tuple(layers))


def esd_histogram(values: np.ndarray, bins: int = 100, log_scale: bool = False) -> pd.DataFrame:
    """
    Density histogram of an ESD with columns bin_left, bin_right, density.

    With ``log_scale`` the bins are equally wide in log10(lambda) and
    non-positive eigenvalues are dropped.
    """
    sample = np.asarray(values, dtype=np.float64)
    if log_scale:
        sample = np.log10(sample[sample > 0])
    density, edges = np.histogram(sample, bins=bins, density=True)
    if log_scale:
        edges = 10**edges
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "density": density})


def spectrum_csv(report: SpectrumReport, path: Path | str) -> None:
    report.to_frame().to_csv(path, index=False, lineterminator="\n")


def esd_histograms_csv(report: SpectrumReport, path: Path | str, bins: int = 100) -> None:
    """Linear and log-linear histograms of every layer in one long-format CSV."""
    frames = []
    for layer in report.layers:
        for scale, log_scale in (("linear", False), ("log", True)):
            frame = esd_histogram(layer.eigenvalues, bins=bins, log_scale=log_scale)
            frame.insert(0, "scale", scale)
            frame.insert(0, "layer", layer.name)
            frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, lineterminator="\n")
