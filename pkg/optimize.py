"""
Output-entropy minimization
===========================

Seeded multistart Nelder-Mead over

* unitaries on Alice's leg, U = expm(iH) with H assembled from d^2 reals;
* CPTP maps on Alice's leg, via a (d * d_env) x d isometry whose d x d blocks
  are the Kraus operators.

The identity (and, for CPTP maps, the reset pre-processing and the best
unitary) are always among the starting points, so the result is never worse
than those analytic encoders. Also holds the bisection for the crossover
curve mu~(p) where unitary encoding and the reset pre-processing carry the
same information.
"""

import json
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.linalg import expm
from scipy.optimize import bisect, minimize

from channels import CorrelatedPauliSpec, KrausMap, correlated_apply_matrix
from holevo import analytic_capacity_quasi, transferred_info_preprocessed
from qmat import (
    DimensionError,
    ParameterRangeError,
    ValidationError,
    as_matrix,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)

XATOL = 1e-6
DEGENERACY_TOL = 1e-12
ROOT_ZERO_TOL = 1e-12
THREADS_ENV = "DENSECODE_THREADS"

_FIELD_TYPES = {"restarts": int, "max_iters": int, "ftol": float, "seed": int}

_restart_mode = threading.local()


def worker_count() -> int:
    """Thread cap from DENSECODE_THREADS, default 1"""
    raw = os.getenv(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        count = int(raw)
        if count < 1:
            raise ValueError(raw)
    except ValueError:
        logger.warning(f"⚠️ ignoring invalid {THREADS_ENV}={raw!r}, using 1 thread")
        return 1
    return count


@contextmanager
def serial_restarts():
    """Run optimizer restarts in the calling thread, for callers that already own a pool"""
    previous = getattr(_restart_mode, "serial", False)
    _restart_mode.serial = True
    try:
        yield
    finally:
        _restart_mode.serial = previous


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    max_iters: int = 2000
    ftol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if int(self.restarts) < 1:
            raise ParameterRangeError(f"restarts must be positive, got {self.restarts}")
        if int(self.max_iters) < 1:
            raise ParameterRangeError(f"max_iters must be positive, got {self.max_iters}")
        if not self.ftol > 0:
            raise ParameterRangeError(f"ftol must be positive, got {self.ftol}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterRangeError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def from_dict(cls, obj: dict) -> "OptimizerConfig":
        if not isinstance(obj, dict):
            raise ValidationError(f"optimizer config must be a JSON object, got {type(obj).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown optimizer config fields: {sorted(unknown)}")
        try:
            settings = {name: _FIELD_TYPES[name](value) for name, value in obj.items()}
        except (TypeError, ValueError) as e:
            raise ValidationError(f"bad optimizer config value: {e}") from e
        return cls(**settings)

    @classmethod
    def from_json_file(cls, path) -> "OptimizerConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class OptimResult:
    entropy_bits: float
    parameters: np.ndarray
    encoder: KrausMap
    converged: bool
    evaluations: int
    restart_index: int = 0
    resampled: int = 0


def _check_setup(channel: CorrelatedPauliSpec, rho) -> np.ndarray:
    m = as_matrix(rho)
    d = channel.d
    dims = tuple(getattr(rho, "dims", (d, d)))
    if dims != (d, d) or m.shape != (d * d, d * d):
        raise DimensionError(f"state dims {dims} do not match channel legs ({d}, {d})")
    return m


def hermitian_from_params(x, d: int) -> np.ndarray:
    """d diagonal reals, then real parts and imaginary parts of the upper triangle"""
    x = np.asarray(x, dtype=float)
    h = np.zeros((d, d), dtype=complex)
    h[np.diag_indices(d)] = x[:d]
    upper = np.triu_indices(d, 1)
    k = len(upper[0])
    off = x[d:d + k] + 1j * x[d + k:d + 2 * k]
    h[upper] = off
    h[upper[1], upper[0]] = off.conj()
    return h


def unitary_from_params(x, d: int) -> np.ndarray:
    return expm(1j * hermitian_from_params(x, d))


def isometry_from_params(x, d: int, d_env: int):
    """
    Orthonormalize the columns of the parameter matrix.

    Column phases are fixed so that R has a positive diagonal; a matrix that
    already has orthonormal columns comes back unchanged. Returns None when
    the columns are (numerically) linearly dependent.
    """
    x = np.asarray(x, dtype=float)
    n = d * d_env * d
    mat = (x[:n] + 1j * x[n:2 * n]).reshape(d * d_env, d)
    q, r = np.linalg.qr(mat)
    diag = np.diag(r)
    if np.min(np.abs(diag)) < DEGENERACY_TOL:
        return None
    return q * (diag / np.abs(diag))[np.newaxis, :]


def params_from_kraus(operators, d: int, d_env: int) -> np.ndarray:
    mat = np.zeros((d * d_env, d), dtype=complex)
    for k, e in enumerate(operators):
        mat[k * d:(k + 1) * d, :] = as_matrix(e)
    return np.concatenate([mat.real.ravel(), mat.imag.ravel()])


def _kraus_blocks(iso: np.ndarray, d: int, d_env: int) -> list:
    return [iso[k * d:(k + 1) * d, :] for k in range(d_env)]


class _UnitaryObjective:
    def __init__(self, channel: CorrelatedPauliSpec, rho_matrix: np.ndarray):
        self.channel = channel
        self.rho = rho_matrix
        self.d = channel.d
        self.eye = np.eye(self.d)

    def __call__(self, x) -> float:
        big = np.kron(unitary_from_params(x, self.d), self.eye)
        return von_neumann_entropy(correlated_apply_matrix(self.channel, big @ self.rho @ big.conj().T))


class _CPTPObjective:
    def __init__(self, channel: CorrelatedPauliSpec, rho_matrix: np.ndarray, d_env: int):
        self.channel = channel
        self.rho = rho_matrix
        self.d = channel.d
        self.d_env = d_env
        self.eye = np.eye(self.d)

    def __call__(self, x) -> float:
        iso = isometry_from_params(x, self.d, self.d_env)
        if iso is None:
            return math.inf
        encoded = np.zeros_like(self.rho)
        for e in _kraus_blocks(iso, self.d, self.d_env):
            big = np.kron(e, self.eye)
            encoded += big @ self.rho @ big.conj().T
        return von_neumann_entropy(correlated_apply_matrix(self.channel, encoded))


def _local_search(objective, x0: np.ndarray, cfg: OptimizerConfig):
    return minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"maxiter": cfg.max_iters, "fatol": cfg.ftol, "xatol": XATOL, "adaptive": True},
    )


def _multistart(objective, starts: list, cfg: OptimizerConfig):
    """Run every start, return (index, result) of the lowest entropy, ties to the lowest index"""
    workers = 1 if getattr(_restart_mode, "serial", False) else min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x0: _local_search(objective, x0, cfg), starts))
    else:
        results = [_local_search(objective, x0, cfg) for x0 in starts]

    for i, res in enumerate(results):
        logger.debug(f"restart {i}: entropy {res.fun:.12f} after {res.nfev} evaluations ({res.message})")

    best = min(range(len(results)), key=lambda i: (results[i].fun, i))
    evaluations = int(sum(res.nfev for res in results))
    return best, results[best], evaluations


def minimize_unitary(channel: CorrelatedPauliSpec, rho, cfg: OptimizerConfig = None) -> OptimResult:
    """
    Search U minimizing S(Lambda((U (x) I) rho (U^dagger (x) I))).

    Args:
        channel (CorrelatedPauliSpec): two-leg channel
        rho: bipartite resource state
        cfg (OptimizerConfig): restarts, iteration cap, tolerance and seed

    Returns:
        OptimResult: best unitary over all restarts; restart 0 starts at U = I
    """
    cfg = cfg or OptimizerConfig()
    m = _check_setup(channel, rho)
    d = channel.d
    rng = np.random.default_rng(cfg.seed)

    starts = [np.zeros(d * d)]
    starts += [rng.uniform(-np.pi, np.pi, size=d * d) for _ in range(cfg.restarts - 1)]

    objective = _UnitaryObjective(channel, m)
    index, res, evaluations = _multistart(objective, starts, cfg)
    x = np.asarray(res.x, dtype=float)
    u = unitary_from_params(x, d)
    if not res.success:
        logger.warning(f"⚠️ unitary search did not converge within {cfg.max_iters} iterations")
    return OptimResult(
        entropy_bits=objective(x),
        parameters=x,
        encoder=KrausMap.from_unitary(u, label="u_min"),
        converged=bool(res.success),
        evaluations=evaluations,
        restart_index=index,
    )


def minimize_cptp(channel: CorrelatedPauliSpec, rho, d_env: int = None, cfg: OptimizerConfig = None) -> OptimResult:
    """
    Search a pre-processing map Gamma minimizing S(Lambda(Gamma(rho))).

    Fixed starting points: the identity, the reset map (when d_env allows its
    Kraus rank) and the best unitary from ``minimize_unitary``. The remaining
    restarts are random; degenerate draws are resampled, at most
    10 * restarts times in total.
    """
    cfg = cfg or OptimizerConfig()
    m = _check_setup(channel, rho)
    d = channel.d
    d_env = d * d if d_env is None else int(d_env)
    if d_env < 1:
        raise ParameterRangeError(f"d_env must be positive, got {d_env}")

    unitary_best = minimize_unitary(channel, m, cfg)
    fixed = [KrausMap.identity(d), unitary_best.encoder]
    reset = KrausMap.reset(d)
    if reset.rank <= d_env:
        fixed.insert(1, reset)
    starts = [params_from_kraus(k.operators, d, d_env) for k in fixed]

    rng = np.random.default_rng(cfg.seed)
    n_params = 2 * d * d * d_env
    resampled = 0
    budget = 10 * cfg.restarts
    for _ in range(max(cfg.restarts - len(fixed), 0)):
        x0 = rng.normal(size=n_params)
        while isometry_from_params(x0, d, d_env) is None and resampled < budget:
            resampled += 1
            x0 = rng.normal(size=n_params)
        if isometry_from_params(x0, d, d_env) is None:
            logger.warning("⚠️ resampling budget exhausted, dropping remaining random restarts")
            break
        starts.append(x0)

    objective = _CPTPObjective(channel, m, d_env)
    index, res, evaluations = _multistart(objective, starts, cfg)
    x = np.asarray(res.x, dtype=float)
    iso = isometry_from_params(x, d, d_env)
    if not res.success:
        logger.warning(f"⚠️ CPTP search did not converge within {cfg.max_iters} iterations")
    return OptimResult(
        entropy_bits=objective(x),
        parameters=x,
        encoder=KrausMap(tuple(_kraus_blocks(iso, d, d_env)), label="gamma_min"),
        converged=bool(res.success),
        evaluations=evaluations + unitary_best.evaluations,
        restart_index=index,
        resampled=resampled,
    )


@dataclass(frozen=True)
class CrossoverResult:
    p: float
    mu_tilde: float
    f_at_zero: float
    f_at_one: float

    def as_dict(self) -> dict:
        return {"p": self.p, "mu_tilde": self.mu_tilde}


def capacity_gap(mu: float, p: float) -> float:
    """C_un - C_reset for a Bell state over the quasi-classical channel"""
    return analytic_capacity_quasi(1.0, mu, p) - transferred_info_preprocessed(p)


def crossover_mu(p: float, tol: float = 1e-4) -> CrossoverResult:
    """
    Correlation degree where unitary encoding and the reset pre-processing
    carry the same information.

    Args:
        p (float): noise parameter in (0, 1)
        tol (float): bisection interval width

    Returns:
        CrossoverResult: ``mu_tilde`` is None when the gap has no sign change
        on [0, 1]
    """
    if not 0.0 < p < 1.0:
        raise ParameterRangeError(f"crossover needs 0 < p < 1, got {p}")
    f0 = capacity_gap(0.0, p)
    f1 = capacity_gap(1.0, p)
    if abs(f0) <= ROOT_ZERO_TOL:
        mu_tilde = 0.0
    elif abs(f1) <= ROOT_ZERO_TOL:
        mu_tilde = 1.0
    elif f0 * f1 > 0.0:
        mu_tilde = None
    else:
        mu_tilde = float(bisect(capacity_gap, 0.0, 1.0, args=(p,), xtol=tol))
    return CrossoverResult(p=float(p), mu_tilde=mu_tilde, f_at_zero=f0, f_at_one=f1)


def crossover_curve(p_values, tol: float = 1e-4) -> list:
    return [crossover_mu(float(p), tol) for p in p_values]


def p_crossings(mu: float, p_values, tol: float = 1e-6) -> list:
    """
    Noise parameters where C_un - C_reset changes sign at fixed mu.

    The sampled p grid brackets each crossing, bisection refines it.
    """
    p_values = np.asarray(p_values, dtype=float)
    gaps = np.array([capacity_gap(mu, p) for p in p_values])
    roots = []
    for i in range(len(p_values) - 1):
        if gaps[i] == 0.0:
            roots.append(float(p_values[i]))
        elif gaps[i] * gaps[i + 1] < 0.0:
            roots.append(float(bisect(lambda p: capacity_gap(mu, p), p_values[i], p_values[i + 1], xtol=tol)))
    return roots
