"""The symmetric two-component mixture, its basin regions, and seeded sampling.

Random streams come from Philox, a counter-based generator, keyed by
``(seed, *stream)`` through :class:`numpy.random.SeedSequence`. Every draw in
the package is therefore a pure function of its seed and stream key,
whatever order or thread the work runs in.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Relative slack on region boundaries so that points such as a * theta_star
# or r * theta_star, built in floating point, count as members.
_BOUNDARY_RTOL = 1e-12


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for ``seed`` and the sub-stream ``stream``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *key: int) -> int:
    """Stable 63-bit child seed of ``seed`` for the sub-key ``key``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Y ~ N(theta_star, sigma^2 I) / 2 + N(-theta_star, sigma^2 I) / 2."""

    theta_star: np.ndarray
    sigma: float

    def __post_init__(self):
        theta = np.array(self.theta_star, dtype=float).reshape(-1)
        if theta.size == 0 or not np.all(np.isfinite(theta)):
            raise ValueError("theta_star must be a non-empty finite vector")
        if not np.linalg.norm(theta) > 0:
            raise ValueError("theta_star must be non-zero")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def from_snr(cls, d: int, s: float, sigma: float = 1.0) -> "MixtureModel":
        """Center along the first axis with ``||theta_star|| = s * sigma``."""
        if d < 1:
            raise ValueError("d must be at least 1")
        theta = np.zeros(d)
        theta[0] = s * sigma
        return cls(theta, sigma)

    @property
    def d(self) -> int:
        return self.theta_star.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.theta_star))

    def snr(self) -> float:
        return self.norm / self.sigma

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.theta_star.astype("<f8").tobytes())
        h.update(np.float64(self.sigma).astype("<f8").tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"theta_star": self.theta_star.tolist(), "sigma": self.sigma, "d": self.d}


@dataclass(frozen=True)
class Region:
    """Parameters of the half-space H_a, the ball B_r and D_{a,r} = H_a & B_r."""

    a: float
    r: float

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"region requires a in (0, 1), got a={self.a}")
        if not self.r >= 1.0:
            raise ValueError(f"region requires r >= 1, got r={self.r}")


def _as_points(theta, model: MixtureModel) -> tuple[np.ndarray, bool]:
    arr = np.asarray(theta, dtype=float)
    single = arr.ndim == 1
    arr2 = np.atleast_2d(arr)
    if arr2.ndim != 2 or arr2.shape[1] != model.d:
        raise ValueError(f"expected vectors of dimension {model.d}, got shape {arr.shape}")
    return arr2, single


def _ret(mask: np.ndarray, single: bool):
    return bool(mask[0]) if single else mask


def _inner(theta, model):
    pts, single = _as_points(theta, model)
    return pts @ model.theta_star, pts, single


def in_half_space(theta, model: MixtureModel, a: float):
    """<theta, theta_star> >= a ||theta_star||^2 (boundary inclusive)."""
    ip, _, single = _inner(theta, model)
    nn = model.norm**2
    return _ret(ip >= a * nn - _BOUNDARY_RTOL * nn, single)


def in_ball(theta, model: MixtureModel, r: float):
    """||theta|| <= r ||theta_star|| (boundary inclusive)."""
    pts, single = _as_points(theta, model)
    bound = r * model.norm
    return _ret(np.linalg.norm(pts, axis=1) <= bound * (1.0 + _BOUNDARY_RTOL), single)


def in_D(theta, model: MixtureModel, region: Region):
    hs = np.atleast_1d(in_half_space(theta, model, region.a))
    ball = np.atleast_1d(in_ball(theta, model, region.r))
    return _ret(hs & ball, np.asarray(theta).ndim == 1)


def in_D_tilde(theta, model: MixtureModel, region: Region):
    """Sign-symmetrized basin: |<theta, theta_star>| >= a ||theta_star||^2 inside B_r."""
    ip, _, single = _inner(theta, model)
    nn = model.norm**2
    hs = np.abs(ip) >= region.a * nn - _BOUNDARY_RTOL * nn
    ball = np.atleast_1d(in_ball(theta, model, region.r))
    return _ret(hs & ball, single)


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None
    seed: int | None
    model_fingerprint: str | None
    sigma: float | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be an n x d matrix with n >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("every row must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.int8).reshape(-1)
            if lab.size != pts.shape[0]:
                raise ValueError("labels must have one entry per row")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path) -> Path:
        """Write ``y1..yd[,label]`` CSV plus a ``.json`` sidecar; returns the CSV path."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = [f"y{j + 1}" for j in range(self.d)]
        if self.labels is not None:
            header.append("label")
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i, row in enumerate(self.points):
                vals = [repr(float(v)) for v in row]
                if self.labels is not None:
                    vals.append(str(int(self.labels[i])))
                w.writerow(vals)
        sidecar = {
            "n": self.n,
            "d": self.d,
            "sigma": self.sigma,
            "seed": self.seed,
            "model_fingerprint": self.model_fingerprint,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        has_label = header[-1] == "label"
        d = len(header) - int(has_label)
        if d < 1 or any(h != f"y{j + 1}" for j, h in enumerate(header[:d])):
            raise ValueError(f"unexpected CSV header {header}")
        points = np.array([[float(v) for v in row[:d]] for row in body])
        labels = np.array([int(row[d]) for row in body]) if has_label else None
        meta = {}
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
        return cls(points, labels, meta.get("seed"), meta.get("model_fingerprint"), meta.get("sigma"))


def sample_dataset(model: MixtureModel, n: int, seed: int) -> Dataset:
    """n iid draws ``eta_i theta_star + sigma z_i`` with Rademacher eta_i."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed, 0)
    labels = np.where(rng.integers(0, 2, size=n) == 1, 1, -1).astype(np.int8)
    noise = rng.standard_normal((n, model.d))
    points = labels[:, None] * model.theta_star[None, :] + model.sigma * noise
    return Dataset(points, labels, int(seed), model.fingerprint(), model.sigma)


def center_data(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("points must be an n x d matrix with n >= 1")
    mean = pts.mean(axis=0)
    return pts - mean, mean


# -- probe points inside D_{a,r} -------------------------------------------------

_MIN_ACCEPTANCE = 1e-6
_BLOCK = 256


def _unit(model: MixtureModel) -> np.ndarray:
    return model.theta_star / model.norm


def _orthogonal_directions(model: MixtureModel, rng: np.random.Generator, k: int) -> np.ndarray:
    u = _unit(model)
    g = rng.standard_normal((k, model.d))
    g -= (g @ u)[:, None] * u[None, :]
    norms = np.linalg.norm(g, axis=1)
    good = norms > 1e-12
    g[good] /= norms[good, None]
    g[~good] = 0.0
    return g


def _from_coordinates(model, p, rho, dirs) -> np.ndarray:
    """Point with ``<theta, u> = p ||theta_star||`` and ``||theta|| = rho ||theta_star||``."""
    q = np.sqrt(np.maximum(rho * rho - p * p, 0.0))
    if model.d == 1:
        q = np.zeros_like(q)
    return model.norm * (p[:, None] * _unit(model)[None, :] + q[:, None] * dirs)


def anchor_points(model: MixtureModel, region: Region) -> np.ndarray:
    """theta_star, the corners of D_{a,r} and points on the axis segment [a, r]."""
    a, r = region.a, region.r
    inside_a = a + 1e-9 * (1.0 - a)
    inside_r = r * (1.0 - 1e-12)
    p = [1.0, inside_a, inside_r, inside_a]
    rho = [1.0, inside_a, inside_r, inside_r]
    seg = np.linspace(inside_a, inside_r, 6)[1:-1]
    p += list(seg)
    rho += list(seg)
    p, rho = np.array(p), np.array(rho)
    dirs = _orthogonal_directions(model, make_rng(0, 7), len(p))
    return _from_coordinates(model, p, rho, dirs)


def rejection_acceptance(model: MixtureModel, region: Region, draws: int, seed: int) -> float:
    """Fraction of uniform draws from B_r that land in D_{a,r}."""
    pts = _uniform_ball(model, region.r, draws, make_rng(seed, 1, 0))
    return float(np.mean(in_D(pts, model, region)))


def _uniform_ball(model, r, k, rng) -> np.ndarray:
    g = rng.standard_normal((k, model.d))
    g /= np.linalg.norm(g, axis=1)[:, None]
    radius = r * model.norm * rng.random(k) ** (1.0 / model.d)
    return g * radius[:, None]


def _rejection_block(model, region, k, seed, block) -> np.ndarray:
    rng = make_rng(seed, 1, block + 1)
    out = []
    got = 0
    while got < k:
        cand = _uniform_ball(model, region.r, 4 * k, rng)
        keep = cand[in_D(cand, model, region)]
        out.append(keep)
        got += len(keep)
    return np.concatenate(out)[:k]


def _stratified_block(model, region, k, seed, block) -> np.ndarray:
    """k points with jittered-stratified axis and radius coordinates."""
    rng = make_rng(seed, 2, block)
    a, r = region.a, region.r
    m = max(1, int(math.ceil(math.sqrt(k))))
    cells = np.arange(m * m)
    rng.shuffle(cells)
    cells = cells[:k]
    u1 = (cells // m + rng.random(k)) / m
    u2 = (cells % m + rng.random(k)) / m
    p = a + (r - a) * u1
    rho = p + (r - p) * u2
    if model.d == 1:
        rho = p
    dirs = _orthogonal_directions(model, rng, k)
    pts = _from_coordinates(model, p, rho, dirs)
    return pts[in_D(pts, model, region)]


def sample_region_points(
    model: MixtureModel, region: Region, count: int, seed: int, mode: str = "stratified-axis"
) -> np.ndarray:
    """``count`` points of D_{a,r}.

    ``uniform-rejection`` draws uniformly from B_r and keeps the points in
    H_a. ``stratified-axis`` starts with the anchors (theta_star, corners,
    the axis segment) and fills the rest with points stratified over the
    normalized axis coordinate ``<theta, theta_star> / ||theta_star||^2`` and
    radius ``||theta|| / ||theta_star||``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if mode == "uniform-rejection":
        if model.d > 64:
            raise ValueError("rejection mode supports d <= 64")
        acc = rejection_acceptance(model, region, 20000, seed)
        if acc < _MIN_ACCEPTANCE:
            raise ValueError(
                f"estimated acceptance {acc:.2e} is below {_MIN_ACCEPTANCE:g}; "
                "use mode='stratified-axis'"
            )
        blocks = [
            _rejection_block(model, region, min(_BLOCK, count - start), seed, i)
            for i, start in enumerate(range(0, count, _BLOCK))
        ]
        return np.concatenate(blocks)[:count]
    if mode == "stratified-axis":
        anchors = anchor_points(model, region)
        if count <= len(anchors):
            return anchors[:count]
        rest = count - len(anchors)
        pts = _stratified_block(model, region, rest, seed, 0)
        out = np.concatenate([anchors, pts])
        # boundary round-off can reject a handful of points
        top_up = 1
        while len(out) < count:
            extra = _stratified_block(model, region, count - len(out), seed, top_up)
            out = np.concatenate([out, extra])
            top_up += 1
        return out[:count]
    raise ValueError(f"unknown mode {mode!r}")


def probe_points(model: MixtureModel, region: Region, count: int, seed: int) -> np.ndarray:
    """Mixed probe set for sup/inf scans over D_{a,r}.

    Anchors first, then alternating blocks of stratified and rejection
    points. Each block depends only on ``(seed, block index)``, so the set
    for a smaller ``count`` is a prefix of the set for a larger one.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    out = [anchor_points(model, region)]
    total = len(out[0])
    use_rejection = model.d <= 64 and rejection_acceptance(model, region, 4000, seed) >= 1e-3
    block = 0
    while total < count:
        if block % 2 == 1 and use_rejection:
            pts = _rejection_block(model, region, _BLOCK, seed, block)
        else:
            pts = _stratified_block(model, region, _BLOCK, seed, block)
        out.append(pts)
        total += len(pts)
        block += 1
    return np.concatenate(out)[:count]
