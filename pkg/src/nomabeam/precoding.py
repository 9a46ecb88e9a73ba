"""
Baseline beamformers (MRC, ZF), power recovery for fixed beam directions, SINR
evaluation and verification of beamforming solutions.

SINR of user ``k`` (users ordered by ascending channel norm)::

    SINR_k = p_k |h_k^H u_k|^2 / (sum_{i>k} p_i |h_k^H u_i|^2 + sigma^2)

User ``k`` removes the signals of the weaker users ``i < k`` with SIC, so only the
stronger users ``i > k`` interfere.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from scipy.linalg import solve_triangular

from .channel import ChannelSet
from .errors import DegenerateOutputError, ShapeMismatchError, SingularDiagonalError, ZFUndefinedError

logger = logging.getLogger(__name__)

# Relative slack on the SINR floors when judging feasibility
FEASIBILITY_RTOL = 1e-6
# Unit norm tolerance of direction columns
UNIT_NORM_TOL = 1e-9
# Absolute slack of the SIC power-order chain
SIC_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class DirectionMatrix:
    """Beam directions, one unit-norm complex column per user."""
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=np.complex128)
        if u.ndim != 2:
            raise ShapeMismatchError(f"direction matrix must be 2-dimensional, got shape {u.shape}")
        norms = np.linalg.norm(u, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise DegenerateOutputError(
                f"direction columns must have unit norm, got norms {norms.tolist()}"
            )
        u.setflags(write=False)
        object.__setattr__(self, 'u', u)

    @classmethod
    def normalized(cls, w: np.ndarray, min_norm: float = 0.0) -> 'DirectionMatrix':
        """Scales every column of ``w`` to unit norm. Columns with a norm not above
        ``min_norm`` cannot be normalized."""
        w = np.asarray(w, dtype=np.complex128)
        norms = np.linalg.norm(w, axis=0)
        degenerate = np.flatnonzero(~(norms > min_norm))
        if degenerate.size:
            raise DegenerateOutputError(
                f"column(s) {degenerate.tolist()} have norm below {min_norm:g} and cannot be normalized"
            )
        return cls(w / norms)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def k(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True, eq=False)
class SinrSpec:
    """Per-user minimum SINR targets on a linear scale."""
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=np.float64).reshape(-1)
        if gamma.size < 1 or not np.all(gamma > 0) or not np.all(np.isfinite(gamma)):
            raise ValueError(f"SINR targets must be positive and finite, got {gamma.tolist()}")
        gamma.setflags(write=False)
        object.__setattr__(self, 'gamma', gamma)

    @classmethod
    def uniform(cls, k: int, gamma_db: float) -> 'SinrSpec':
        """Equal target for all ``k`` users, given in dB."""
        return cls(np.full(k, db_to_linear(gamma_db)))

    @classmethod
    def from_db(cls, gamma_db: Union[float, Iterable[float]]) -> 'SinrSpec':
        return cls(db_to_linear(np.asarray(gamma_db, dtype=np.float64)))

    @property
    def gamma_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.gamma)

    @property
    def k(self) -> int:
        return self.gamma.size

    def scaled(self, factor: float) -> 'SinrSpec':
        return SinrSpec(self.gamma * factor)


@dataclass(frozen=True, eq=False)
class PowerReport:
    """Powers recovered for fixed directions, with the resulting SINR and checks."""
    p: np.ndarray
    total: float
    achieved_sinr: np.ndarray
    sic_order: np.ndarray
    feasible: bool

    @property
    def sic_order_ok(self) -> bool:
        return bool(np.all(self.sic_order))


def db_to_linear(value_db):
    linear = np.power(10.0, np.asarray(value_db, dtype=np.float64) / 10.0)
    return float(linear) if linear.ndim == 0 else linear


def _gains(c: ChannelSet, u: np.ndarray) -> np.ndarray:
    """Matrix of |h_k^H u_i|^2, row k = receiving user, column i = beam."""
    return np.abs(c.h.conj().T @ u) ** 2


def _check_shapes(c: ChannelSet, u: np.ndarray, k: Optional[int] = None):
    if u.shape != (c.n, c.k):
        raise ShapeMismatchError(f"expected a {c.n} x {c.k} beamforming matrix, got {u.shape}")
    if k is not None and k != c.k:
        raise ShapeMismatchError(f"expected {c.k} per-user values, got {k}")


def _as_directions(u: Union[DirectionMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(u, DirectionMatrix):
        return u.u
    return np.asarray(u, dtype=np.complex128)


def mrc_directions(c: ChannelSet) -> DirectionMatrix:
    """Matched filter directions u_k = h_k / ||h_k||."""
    return DirectionMatrix(c.h / c.column_norms())


def zf_directions(c: ChannelSet) -> DirectionMatrix:
    """Zero-forcing directions: normalized columns of H (H^H H)^-1, which null the
    beam of every user at all other users."""
    if c.n < c.k:
        raise ZFUndefinedError(f"{c.n} antennas cannot null {c.k} users")
    if np.linalg.matrix_rank(c.h) < c.k:
        raise ZFUndefinedError("channel matrix is rank deficient")
    gram = c.h.conj().T @ c.h
    # F G = H with Hermitian G, solved as G^T F^T = H^T
    f = np.linalg.solve(gram.T, c.h.T).T
    return DirectionMatrix.normalized(f)


def psi_matrix(c: ChannelSet, u: Union[DirectionMatrix, np.ndarray], gamma: SinrSpec) -> np.ndarray:
    """Upper-triangular K x K system matrix of the power recovery Psi p = sigma^2 1.

    [Psi]_kk = |h_k^H u_k|^2 / gamma_k and [Psi]_ki = -|h_k^H u_i|^2 for i > k.
    """
    u = _as_directions(u)
    _check_shapes(c, u, gamma.k)
    gains = _gains(c, u)
    return np.diag(np.diag(gains) / gamma.gamma) - np.triu(gains, 1)


def sinr_of(c: ChannelSet, w: np.ndarray) -> np.ndarray:
    """SINR of every user for un-normalized beamformers w_k = sqrt(p_k) u_k."""
    w = np.asarray(w, dtype=np.complex128)
    _check_shapes(c, w)
    gains = _gains(c, w)
    interference = np.triu(gains, 1).sum(axis=1)
    return np.diag(gains) / (interference + c.sigma2)


def sinr_with_powers(c: ChannelSet, u: Union[DirectionMatrix, np.ndarray], p: np.ndarray) -> np.ndarray:
    """SINR of every user for directions ``u`` and powers ``p``."""
    u = _as_directions(u)
    p = np.asarray(p, dtype=np.float64)
    _check_shapes(c, u, p.size)
    received = _gains(c, u) * p[np.newaxis, :]
    interference = np.triu(received, 1).sum(axis=1)
    return np.diag(received) / (interference + c.sigma2)


def check_sic_order(c: ChannelSet, u: Union[DirectionMatrix, np.ndarray], p: np.ndarray) -> np.ndarray:
    """For every user k, whether p_i |h_k^H u_i|^2 is non-increasing in i, i.e.
    whether user k sees the beams in an order it can cancel successively."""
    u = _as_directions(u)
    p = np.asarray(p, dtype=np.float64)
    _check_shapes(c, u, p.size)
    received = _gains(c, u) * p[np.newaxis, :]
    return np.all(received[:, 1:] <= received[:, :-1] + SIC_ATOL, axis=1)


def power_allocation(c: ChannelSet, u: Union[DirectionMatrix, np.ndarray], gamma: SinrSpec) -> PowerReport:
    """Smallest powers meeting every SINR floor with equality for fixed directions.

    Solves Psi p = sigma^2 1 by back-substitution, starting at user K which sees
    no interference.
    """
    u = _as_directions(u)
    psi = psi_matrix(c, u, gamma)
    diagonal = np.diag(psi)
    singular = np.flatnonzero(~(diagonal > 0))
    if singular.size:
        raise SingularDiagonalError(
            f"user(s) {singular.tolist()} receive no power from their own beam (|h_k^H u_k| = 0)"
        )
    p = solve_triangular(psi, np.full(c.k, c.sigma2), lower=False, check_finite=False)
    # Positive diagonal, non-positive upper triangle and positive right-hand side
    if np.any(p < 0):
        raise ArithmeticError(f"back-substitution produced negative powers {p.tolist()}")

    achieved = sinr_with_powers(c, u, p)
    sic_order = check_sic_order(c, u, p)
    feasible = bool(
        np.all(np.isfinite(p))
        and np.all(achieved >= gamma.gamma * (1.0 - FEASIBILITY_RTOL))
    )
    return PowerReport(
        p=p,
        total=float(np.sum(p)),
        achieved_sinr=achieved,
        sic_order=sic_order,
        feasible=feasible,
    )


def verify_solution(c: ChannelSet, u: Union[DirectionMatrix, np.ndarray], gamma: SinrSpec) -> PowerReport:
    """Checks whether beam directions (e.g. predicted by a network) can meet the SINR
    targets, and at which total power."""
    if not isinstance(u, DirectionMatrix):
        u = DirectionMatrix(u)
    report = power_allocation(c, u, gamma)
    logger.debug(
        f"Verified directions: total power {report.total:.6g}, feasible={report.feasible}, "
        f"SIC order={report.sic_order.tolist()}"
    )
    return report


__all__ = [
    'DirectionMatrix',
    'SinrSpec',
    'PowerReport',
    'db_to_linear',
    'mrc_directions',
    'zf_directions',
    'psi_matrix',
    'sinr_of',
    'sinr_with_powers',
    'check_sic_order',
    'power_allocation',
    'verify_solution',
]
