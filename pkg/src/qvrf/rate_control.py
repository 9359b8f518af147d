"""Regulator selection: Lagrange sets, regulator vectors and the sqrt(lambda) line.

Costs follow the usual learned-compression convention ``bpp + lambda * MSE``
with MSE measured on 8-bit pixel values (equivalently ``lambda * 255**2`` times
the MSE of images scaled to [0, 1]).

Because the transform is fixed, the summed objective over a Lagrange set
separates into one univariate problem per lambda; each is solved by a
golden-section search over ``log a`` and checked against a log-spaced grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import codec
from .entropy_model import A_MAX, A_MIN
from .errors import ConfigurationError, NonMonotoneRegulatorsError, SingularFitError

LAMBDAS = (0.0018, 0.0035, 0.0067, 0.0130, 0.0250, 0.0483, 0.0932, 0.1800)
LAMBDAS_EXTENDED = LAMBDAS + (0.36, 0.72, 1.44)
GOLDEN_ITERATIONS = 40
ORACLE_POINTS = 64
ORACLE_TOLERANCE = 1e-3
COST_MODES = ("actual", "estimate")

INV_PHI = (math.sqrt(5) - 1) / 2


def check_lambdas(lambdas, min_size: int = 2) -> tuple:
    lams = tuple(float(v) for v in lambdas)
    if len(lams) < min_size:
        raise ConfigurationError(f"need at least {min_size} lambda values, got {len(lams)}")
    if any(not (math.isfinite(v) and v > 0) for v in lams):
        raise ConfigurationError("lambda values must be positive and finite")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ConfigurationError("lambda values must be strictly increasing")
    return lams


@dataclass(frozen=True)
class RegulatorVector:
    """Regulators ``a_j`` paired one-to-one with increasing lambdas ``lambda_j``."""

    lambdas: tuple
    values: tuple

    def __post_init__(self):
        lams = check_lambdas(self.lambdas, min_size=1)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(lams):
            raise ConfigurationError("one regulator per lambda is required")
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise ConfigurationError("regulators must be positive and finite")
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "values", vals)

    @property
    def lambda_ref(self) -> float:
        return self.lambdas[0]

    @property
    def monotone(self) -> bool:
        return all(b > a for a, b in zip(self.values, self.values[1:]))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(zip(self.lambdas, self.values))


@dataclass(frozen=True)
class LinearFit:
    """``sqrt(lambda / lambda_ref) = slope * a + intercept``."""

    slope: float
    intercept: float
    r_squared: float
    lambda_ref: float


def init_regulators(lambdas) -> RegulatorVector:
    """``a_j = sqrt(lambda_j / lambda_ref)``, so the first regulator is exactly 1."""
    lams = check_lambdas(lambdas, min_size=1)
    ref = lams[0]
    return RegulatorVector(lams, tuple(1.0 if v == ref else math.sqrt(v / ref) for v in lams))


class Calibration:
    """A set of images with their rate and distortion memoized per ``a``.

    ``cost_mode="actual"`` counts the bytes of the real container;
    ``"estimate"`` replaces the latent segment by the sum of ``-log2`` table
    masses and skips the range coder.
    """

    def __init__(self, images, cost_mode: str = "actual", block: int = codec.BLOCK):
        if cost_mode not in COST_MODES:
            raise ConfigurationError(f"cost_mode must be one of {COST_MODES}")
        images = [np.asarray(im) for im in images]
        if not images:
            raise ConfigurationError("calibration needs at least one image")
        self.images = images
        self.cost_mode = cost_mode
        self._prepared = [codec.prepare(im, block) for im in images]
        self._memo: dict[float, tuple[float, float]] = {}
        self.evaluations = 0

    def rate_distortion(self, a: float) -> tuple[float, float]:
        """Mean total bpp and mean pixel MSE over the images at ``a``."""
        a = codec.as_float32(a)
        hit = self._memo.get(a)
        if hit is not None:
            return hit
        self.evaluations += 1
        rates, dists = [], []
        for img, prep in zip(self.images, self._prepared):
            if self.cost_mode == "actual":
                enc = codec.encode_prepared(prep, a)
                bits = 8 * len(enc.bitstream)
            else:
                enc = codec.encode_prepared(prep, a, entropy_code=False)
                bits = enc.latent_bits_estimate + 8 * (codec.HEADER_SIZE + len(prep.side))
            rates.append(bits / prep.pixels)
            diff = enc.reconstruction.astype(np.float64) - img
            dists.append(float(np.mean(diff * diff)))
        out = (float(np.mean(rates)), float(np.mean(dists)))
        self._memo[a] = out
        return out

    def cost(self, a: float, lam: float) -> float:
        rate, dist = self.rate_distortion(a)
        return rate + lam * dist


def _as_calibration(calib, cost_mode: str) -> Calibration:
    if isinstance(calib, Calibration):
        return calib
    return Calibration(calib, cost_mode)


def rd_cost(images, a: float, lam: float, cost_mode: str = "actual") -> float:
    """Mean ``bpp + lam * MSE`` over ``images`` (or a :class:`Calibration`) at ``a``."""
    return _as_calibration(images, cost_mode).cost(a, lam)


def golden_section(f, lo: float, hi: float, iterations: int = GOLDEN_ITERATIONS):
    """Minimize ``f`` on ``[lo, hi]``; returns the best evaluated ``(x, f(x))``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = min((fc, c), (fd, d))
    for _ in range(iterations):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            best = min(best, (fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            best = min(best, (fd, d))
    return best[1], best[0]


def log_grid(points: int, a_min: float = A_MIN, a_max: float = A_MAX) -> np.ndarray:
    return np.exp(np.linspace(math.log(a_min), math.log(a_max), points))


@dataclass
class RegulatorResult:
    lam: float
    a: float
    cost: float
    grid_a: float
    grid_cost: float
    fallback: bool = False
    evaluations: int = field(default=0, repr=False)


def optimize_regulator(lam: float, calib, a_min: float = A_MIN, a_max: float = A_MAX,
                       iterations: int = GOLDEN_ITERATIONS, grid_points: int = ORACLE_POINTS,
                       tolerance: float = ORACLE_TOLERANCE,
                       cost_mode: str = "actual") -> RegulatorResult:
    """Regulator minimizing ``bpp + lam * MSE`` on the calibration images.

    Golden-section search runs over ``log a``.  Its answer is checked against
    a ``grid_points`` log-spaced grid; if it is worse than the grid minimum by
    more than ``tolerance`` (relative), the cost is not unimodal and the grid
    argmin is returned with ``fallback=True``.
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"lambda must be positive, got {lam}")
    calib = _as_calibration(calib, cost_mode)
    before = calib.evaluations

    def cost(u):
        return calib.cost(math.exp(u), lam)

    u, c = golden_section(cost, math.log(a_min), math.log(a_max), iterations)
    a_star = codec.as_float32(math.exp(u))
    grid = log_grid(grid_points, a_min, a_max)
    costs = np.array([calib.cost(a, lam) for a in grid])
    i = int(np.argmin(costs))
    grid_a, grid_c = codec.as_float32(grid[i]), float(costs[i])
    fallback = c > grid_c * (1 + tolerance)
    if fallback:
        a_star, c = grid_a, grid_c
    return RegulatorResult(lam, a_star, c, grid_a, grid_c, fallback, calib.evaluations - before)


def optimize_vector(lambdas, calib, strict: bool = True, cost_mode: str = "actual",
                    **kwargs) -> RegulatorVector:
    """One optimized regulator per lambda.

    A result that is not strictly increasing raises
    :class:`NonMonotoneRegulatorsError` when ``strict``; otherwise it is
    returned with a warning.
    """
    lams = check_lambdas(lambdas, min_size=1)
    calib = _as_calibration(calib, cost_mode)
    results = [optimize_regulator(lam, calib, **kwargs) for lam in lams]
    vec = RegulatorVector(lams, tuple(r.a for r in results))
    if not vec.monotone:
        if strict:
            raise NonMonotoneRegulatorsError(lams, vec.values)
        warnings.warn(str(NonMonotoneRegulatorsError(lams, vec.values)), stacklevel=2)
    return vec


def fit_sqrt_lambda_line(vector: RegulatorVector, lambda_ref: float | None = None) -> LinearFit:
    """Least-squares line of ``sqrt(lambda / lambda_ref)`` against ``a``.

    ``lambda_ref`` defaults to the smallest lambda of the vector.
    """
    ref = vector.lambda_ref if lambda_ref is None else float(lambda_ref)
    if not ref > 0:
        raise ConfigurationError(f"lambda_ref must be positive, got {lambda_ref}")
    if len(vector) < 2:
        raise SingularFitError("a line fit needs at least two points")
    a = np.asarray(vector.values)
    y = np.sqrt(np.asarray(vector.lambdas) / ref)
    da = a - a.mean()
    sxx = float(da @ da)
    if sxx <= 0.0 or np.ptp(a) == 0.0:
        raise SingularFitError("all regulators are equal; the line is undetermined")
    slope = float(da @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * a.mean())
    resid = y - (slope * a + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return LinearFit(slope, intercept, min(1.0, max(0.0, r2)), ref)


def lambda_to_regulator(lam: float, fit: LinearFit, a_min: float = A_MIN,
                        a_max: float = A_MAX) -> float:
    """Invert the fitted line and clamp into ``[a_min, a_max]``."""
    if not lam > 0:
        raise ConfigurationError(f"lambda must be positive, got {lam}")
    if not fit.slope > 0:
        raise ConfigurationError(f"fit slope {fit.slope} is not positive")
    a = (math.sqrt(lam / fit.lambda_ref) - fit.intercept) / fit.slope
    return min(a_max, max(a_min, a))


def regulator_to_lambda(a: float, fit: LinearFit) -> float:
    s = fit.slope * a + fit.intercept
    if s <= 0:
        raise ConfigurationError(f"a={a} maps to a non-positive sqrt(lambda) under the fit")
    return fit.lambda_ref * s * s


def write_fit_config(path, vector: RegulatorVector, fit: LinearFit):
    with open(path, "w") as f:
        for lam, a in vector:
            f.write(f"{lam!r} {a!r}\n")
        f.write(f"slope={fit.slope!r} intercept={fit.intercept!r} r2={fit.r_squared!r} "
                f"lambda_ref={fit.lambda_ref!r}\n")


def read_fit_config(path) -> tuple[RegulatorVector, LinearFit]:
    pairs = []
    footer = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                if "=" in line:
                    footer = dict(tok.split("=", 1) for tok in line.split())
                    footer = {k: float(v) for k, v in footer.items()}
                else:
                    lam, a = line.split()
                    pairs.append((float(lam), float(a)))
            except ValueError:
                raise ConfigurationError(f"{path}:{lineno}: cannot parse {line!r}") from None
    if footer is None or not {"slope", "intercept", "r2"} <= footer.keys():
        raise ConfigurationError(f"{path}: missing 'slope= intercept= r2=' footer")
    if not pairs:
        raise ConfigurationError(f"{path}: no 'lambda a' lines")
    vec = RegulatorVector(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
    ref = footer.get("lambda_ref", vec.lambda_ref)
    return vec, LinearFit(footer["slope"], footer["intercept"], footer["r2"], ref)
