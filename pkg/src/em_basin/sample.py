"""Finite-sample EM: the operator M_n, the Q objective, and the iterate runner."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .model import Dataset, MixtureModel, Region, in_D_tilde
from .population import gamma_contraction

DEFAULT_MAX_ITER = 500
DEFAULT_STEP_TOL = 1e-10
DEFAULT_R = 6.0
_CHUNK = 256


def _points(data) -> np.ndarray:
    return data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float)


def sample_em_step(theta, data, sigma: float) -> np.ndarray:
    """``M_n(theta) = (2/n) sum y_i w(<y_i, theta>/sigma^2) - (1/n) sum y_i``.

    Computed as ``(1/n) sum (2 w_i - 1) y_i`` so that ``M_n(0) = 0`` exactly.
    ``theta`` may be a stack of row vectors, giving one update per row.
    """
    y = _points(data)
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    th = np.atleast_2d(theta)
    if th.shape[1] != y.shape[1]:
        raise ValueError(f"theta has dimension {th.shape[1]}, data has {y.shape[1]}")
    n = y.shape[0]
    out = np.empty(th.shape)
    for start in range(0, len(th), _CHUNK):
        sl = slice(start, start + _CHUNK)
        weights = 2.0 * np.asarray(kernels.omega(y @ th[sl].T / sigma**2)) - 1.0
        out[sl] = weights.T @ y / n
    return out[0] if single else out


def _responsibility_gap(theta, y, sigma):
    return 1.0 - 2.0 * np.asarray(kernels.omega(y @ np.asarray(theta, dtype=float) / sigma**2))


def q_objective(theta_prime, theta, data, sigma: float) -> float:
    """Sample average of ``Q_y(theta' | theta)`` (per unit noise variance).

    ``-||theta'||^2/2 - (1 - 2 w(<theta, y>/sigma^2)) <theta', y> - ||y||^2/2``.
    """
    y = _points(data)
    tp = np.asarray(theta_prime, dtype=float)
    gap = _responsibility_gap(theta, y, sigma)
    return float(-0.5 * tp @ tp - np.mean(gap * (y @ tp)) - 0.5 * np.mean(np.sum(y * y, axis=1)))


def q_gradient(theta_prime, theta, data, sigma: float) -> np.ndarray:
    y = _points(data)
    gap = _responsibility_gap(theta, y, sigma)
    return -np.asarray(theta_prime, dtype=float) - gap @ y / y.shape[0]


def sign_aligned_error(theta, model: MixtureModel):
    """``min(||theta - theta_star||, ||theta + theta_star||)``; rows are handled elementwise."""
    th = np.asarray(theta, dtype=float)
    plus = np.linalg.norm(th - model.theta_star, axis=-1)
    minus = np.linalg.norm(th + model.theta_star, axis=-1)
    out = np.minimum(plus, minus)
    return float(out) if np.ndim(out) == 0 else out


def iterate_envelope(t: int, err0: float, gamma: float, floor: float) -> float:
    """``gamma^t err0 + floor``: the geometric error envelope of the EM iterates."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"envelope requires gamma in [0, 1), got {gamma}")
    if floor < 0:
        raise ValueError("floor must be non-negative")
    return gamma**t * err0 + floor


def deviation_floor(model: MixtureModel, r: float, n: int, gamma: float, c4: float, delta: float = 0.05) -> float:
    """``c4 r ||theta*|| sqrt(||theta*||^2 + sigma^2) sqrt(d log(1/delta) / n) / (1 - gamma)``."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    nrm = model.norm
    return (
        c4 * r * nrm * math.sqrt(nrm**2 + model.sigma**2)
        * math.sqrt(model.d * math.log(1.0 / delta) / n) / (1.0 - gamma)
    )


@dataclass
class EmTrace:
    iterates: np.ndarray
    errors: np.ndarray
    raw_errors: np.ndarray
    in_region: np.ndarray
    stop_reason: str
    seed: int | None
    n: int
    model_fingerprint: str | None
    region_r: float = DEFAULT_R
    gamma_theoretical: float | None = None
    label: dict = field(default_factory=dict)

    @property
    def ratios(self) -> np.ndarray:
        """``errors[k+1] / errors[k]``; nan where ``errors[k]`` is 0."""
        e = self.errors
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(e[:-1] > 0, e[1:] / np.where(e[:-1] > 0, e[:-1], 1.0), np.nan)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])

    @property
    def steps(self) -> int:
        return len(self.iterates) - 1

    def to_csv(self, path=None) -> str:
        """Columns ``t, theta_1..theta_d, error, ratio, in_region``.

        Floats are written with ``repr`` so reruns are byte-identical.
        Returns the text; also writes it when ``path`` is given.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.iterates.shape[1]
        w.writerow(["t", *[f"theta_{j + 1}" for j in range(d)], "error", "ratio", "in_region"])
        ratios = self.ratios
        for t, theta in enumerate(self.iterates):
            ratio = "" if t == 0 or not np.isfinite(ratios[t - 1]) else repr(float(ratios[t - 1]))
            w.writerow([
                t, *[repr(float(v)) for v in theta], repr(float(self.errors[t])), ratio,
                int(bool(self.in_region[t])),
            ])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def summary(self) -> dict:
        return {
            "stop_reason": self.stop_reason,
            "steps": self.steps,
            "final_error": self.final_error,
            "final_theta": self.final.tolist(),
            "n": self.n,
            "seed": self.seed,
            "model_fingerprint": self.model_fingerprint,
            "gamma_theoretical": self.gamma_theoretical,
            "all_in_region": bool(np.all(self.in_region)),
            **self.label,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def run_em(
    theta0,
    data,
    sigma: float,
    model: MixtureModel,
    max_iter: int = DEFAULT_MAX_ITER,
    step_tol: float = DEFAULT_STEP_TOL,
    r: float = DEFAULT_R,
) -> EmTrace:
    """Iterate ``theta <- M_n(theta)`` from ``theta0``.

    Stops once ``||theta_{t+1} - theta_t|| <= step_tol ||theta_star||`` or after
    ``max_iter`` updates. ``model`` is used only for diagnostics: the
    sign-aligned errors, membership in D~_{1/2,r}, and the step scale.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if step_tol < 0:
        raise ValueError("step_tol must be non-negative")
    y = _points(data)
    theta = np.asarray(theta0, dtype=float).copy()
    if theta.shape != (y.shape[1],):
        raise ValueError("theta0 dimension does not match the data")
    iterates = [theta]
    stop = "max_iter"
    scale = step_tol * model.norm
    for _ in range(max_iter):
        nxt = sample_em_step(theta, y, sigma)
        if not np.all(np.isfinite(nxt)):
            stop = "diverged"
            break
        iterates.append(nxt)
        if np.linalg.norm(nxt - theta) <= scale:
            stop = "step_tol"
            break
        theta = nxt
    its = np.array(iterates)
    region = Region(0.5, r)
    gamma = gamma_contraction(model.snr(), r)
    is_ds = isinstance(data, Dataset)
    return EmTrace(
        iterates=its,
        errors=np.atleast_1d(sign_aligned_error(its, model)),
        raw_errors=np.linalg.norm(its - model.theta_star, axis=1),
        in_region=np.atleast_1d(in_D_tilde(its, model, region)),
        stop_reason=stop,
        seed=data.seed if is_ds else None,
        n=y.shape[0],
        model_fingerprint=data.model_fingerprint if is_ds else model.fingerprint(),
        region_r=r,
        gamma_theoretical=gamma,
    )
