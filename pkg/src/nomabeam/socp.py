"""
Minimum transmit power beamforming as a second-order cone program.

The SINR constraint of user ``k``::

    gamma_k (sum_{i>k} |h_k^H w_i|^2 + sigma^2) <= |h_k^H w_k|^2

becomes a second-order cone once the common phase of every ``w_k`` is fixed such
that ``h_k^H w_k`` is real::

    || [h_k^H w_{k+1}, ..., h_k^H w_K, sigma] ||_2 <= Re(h_k^H w_k) / sqrt(gamma_k)
    Im(h_k^H w_k) = 0

The complex beamformers are lifted to real variables and the quadratic objective
is handled as an epigraph ``||vec(W)||_2 <= t``, which leaves a linear-objective
cone program for the interior-point solver of :mod:`cvxopt`.

Layout of the real variable vector (length ``2NK + 1``)::

    x = [t, Re(w_1), Im(w_1), Re(w_2), Im(w_2), ..., Re(w_K), Im(w_K)]
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

import numpy as np
from cvxopt import matrix, solvers
from pydantic import BaseModel, Field, validator

from .channel import ChannelSet, SolverStatus
from .errors import ChannelError
from .precoding import SinrSpec, power_allocation

logger = logging.getLogger(__name__)


class SolverOptions(BaseModel):
    """Options of the interior-point solver."""
    tol_gap: float = Field(
        1e-8,
        description="Tolerance on the (absolute and relative) duality gap."
    )
    tol_feas: float = Field(
        1e-8,
        description="Tolerance on the primal and dual residuals."
    )
    max_iter: int = Field(
        100,
        description="Maximum number of interior-point iterations."
    )
    verbose: bool = Field(
        False,
        description="When True, the solver prints its iteration log."
    )
    polish: bool = Field(
        True,
        description="When True, the powers of the optimal directions are recomputed with the "
        "triangular power recovery, which makes every SINR constraint hold with equality."
    )
    accept_factor: float = Field(
        1e3,
        description="A run which stops without certificate is still accepted as optimal when "
        "gap and residuals are within this factor of the tolerances."
    )

    @validator('tol_gap', 'tol_feas', 'accept_factor')
    def check_positive(cls, value, field):
        if not value > 0:
            raise ValueError(f"{field.name} must be positive")
        return value

    @validator('max_iter')
    def check_max_iter(cls, value):
        if value < 1:
            raise ValueError("max_iter must be at least 1")
        return value

    def cvxopt_options(self) -> Dict:
        return {
            'show_progress': self.verbose,
            'maxiters': self.max_iter,
            'abstol': self.tol_gap,
            'reltol': self.tol_gap,
            'feastol': self.tol_feas,
        }


@dataclass(frozen=True, eq=False)
class ConeProgram:
    """Real cone program ``min c^T x  s.t.  G x + s = h, s in Q, A x = b``.

    The cones are stacked in ``G``/``h`` in the order of ``cone_dims``: first the SINR
    cone of every user (user 1 first), then the epigraph cone.
    """
    n: int
    k: int
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cone_dims: Tuple[int, ...]
    A: np.ndarray
    b: np.ndarray

    @property
    def variable_count(self) -> int:
        return self.c.size

    @property
    def sinr_cone_dims(self) -> Tuple[int, ...]:
        return self.cone_dims[:self.k]

    @property
    def epigraph_cone_dim(self) -> int:
        return self.cone_dims[-1]

    def cone_block(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """Rows of ``G`` and ``h`` belonging to cone ``index``."""
        start = sum(self.cone_dims[:index])
        stop = start + self.cone_dims[index]
        return self.G[start:stop], self.h[start:stop]


@dataclass(frozen=True)
class SolverResiduals:
    primal: float = float('nan')
    dual: float = float('nan')
    gap: float = float('nan')


@dataclass(frozen=True, eq=False)
class BeamSolution:
    """Beamformers ``w_k = sqrt(p_k) u_k`` with the outcome of the solver."""
    w: np.ndarray
    u: np.ndarray
    p: np.ndarray
    total_power: float
    status: SolverStatus
    iterations: int = 0
    residuals: SolverResiduals = field(default_factory=SolverResiduals)
    unrotated: Tuple[int, ...] = ()

    @classmethod
    def from_beamformers(cls, w: np.ndarray, status: SolverStatus, **kwargs) -> 'BeamSolution':
        w = np.asarray(w, dtype=np.complex128)
        norms = np.linalg.norm(w, axis=0)
        safe = np.where(norms > 0, norms, 1.0)
        p = norms ** 2
        return cls(
            w=w,
            u=w / safe,
            p=p,
            total_power=float(np.sum(p)),
            status=status,
            **kwargs
        )

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


def _offset(n: int, user: int) -> int:
    return 1 + 2 * n * user


def _inner_rows(c: ChannelSet, receiver: int, beam: int) -> Tuple[np.ndarray, np.ndarray]:
    """Real rows mapping x onto Re(h_r^H w_b) and Im(h_r^H w_b)."""
    n = c.n
    size = 2 * n * c.k + 1
    h_re = c.h[:, receiver].real
    h_im = c.h[:, receiver].imag
    offset = _offset(n, beam)
    re_row = np.zeros(size)
    im_row = np.zeros(size)
    # (h_re - i h_im)^T (w_re + i w_im)
    re_row[offset:offset + n] = h_re
    re_row[offset + n:offset + 2 * n] = h_im
    im_row[offset:offset + n] = -h_im
    im_row[offset + n:offset + 2 * n] = h_re
    return re_row, im_row


def build_cone_program(c: ChannelSet, gamma: SinrSpec) -> ConeProgram:
    """Lifts the power minimization for channel ``c`` and targets ``gamma`` to a real
    cone program."""
    if gamma.k != c.k:
        raise ChannelError(f"{gamma.k} SINR targets given for {c.k} users")
    n, k = c.n, c.k
    size = 2 * n * k + 1

    g_blocks: List[np.ndarray] = []
    h_blocks: List[np.ndarray] = []
    cone_dims: List[int] = []
    eq_rows: List[np.ndarray] = []
    for user in range(k):
        re_own, im_own = _inner_rows(c, user, user)
        rows = [re_own / np.sqrt(gamma.gamma[user])]
        for beam in range(user + 1, k):
            rows.extend(_inner_rows(c, user, beam))
        rows.append(np.zeros(size))
        offsets = np.zeros(len(rows))
        offsets[-1] = c.sigma
        # s = h - G x lies in the cone
        g_blocks.append(-np.vstack(rows))
        h_blocks.append(offsets)
        cone_dims.append(len(rows))
        eq_rows.append(im_own)

    # Epigraph ||vec(W)|| <= t
    g_blocks.append(-np.eye(size))
    h_blocks.append(np.zeros(size))
    cone_dims.append(size)

    objective = np.zeros(size)
    objective[0] = 1.0
    program = ConeProgram(
        n=n,
        k=k,
        c=objective,
        G=np.vstack(g_blocks),
        h=np.concatenate(h_blocks),
        cone_dims=tuple(cone_dims),
        A=np.vstack(eq_rows),
        b=np.zeros(k),
    )
    if not (np.all(np.isfinite(program.G)) and np.all(np.isfinite(program.h))):
        raise ChannelError("cone program has non-finite coefficients")
    return program


def _unlift(x: np.ndarray, n: int, k: int) -> np.ndarray:
    w = np.empty((n, k), dtype=np.complex128)
    for user in range(k):
        offset = _offset(n, user)
        w[:, user] = x[offset:offset + n] + 1j * x[offset + n:offset + 2 * n]
    return w


def _value(result: Dict, key: str) -> float:
    value = result.get(key)
    return float('nan') if value is None else float(value)


def _classify(result: Dict, opts: SolverOptions) -> SolverStatus:
    status = result['status']
    if status == 'optimal':
        return SolverStatus.OPTIMAL
    if status == 'primal infeasible':
        return SolverStatus.INFEASIBLE
    if status == 'unknown' and result.get('x') is not None:
        # Stalled close to the optimum: accept when all measures are small
        primal = _value(result, 'primal infeasibility')
        dual = _value(result, 'dual infeasibility')
        gap = _value(result, 'relative gap')
        if np.isnan(gap):
            gap = _value(result, 'gap')
        if max(primal, dual) <= opts.accept_factor * opts.tol_feas \
                and gap <= opts.accept_factor * opts.tol_gap:
            return SolverStatus.OPTIMAL
    # 'dual infeasible' cannot happen for a program bounded below by zero
    return SolverStatus.NUMERICAL_FAILURE


def phase_normalize(sol: BeamSolution, c: ChannelSet) -> BeamSolution:
    """Rotates every beamformer such that h_k^H w_k is real and non-negative. The
    magnitudes |h_k^H w_i|, and with them all SINRs and the total power, are kept.

    Columns with h_k^H w_k = 0 have no defined phase; they are left unchanged and
    listed in ``unrotated``.
    """
    inner = np.einsum('nk,nk->k', c.h.conj(), sol.w)
    magnitude = np.abs(inner)
    unrotated = tuple(int(index) for index in np.flatnonzero(magnitude == 0))
    phase = np.ones(c.k, dtype=np.complex128)
    rotate = magnitude > 0
    phase[rotate] = inner[rotate].conj() / magnitude[rotate]
    if unrotated:
        logger.debug(f"Phase of user(s) {list(unrotated)} undefined, columns left unchanged")
    return replace(
        sol,
        w=sol.w * phase[np.newaxis, :],
        u=sol.u * phase[np.newaxis, :],
        unrotated=unrotated,
    )


def _polish(sol: BeamSolution, c: ChannelSet, gamma: SinrSpec) -> BeamSolution:
    if np.any(sol.p <= 0):
        return sol
    report = power_allocation(c, sol.u, gamma)
    if not np.all(np.isfinite(report.p)):
        return sol
    w = sol.u * np.sqrt(report.p)[np.newaxis, :]
    return replace(sol, w=w, p=report.p, total_power=report.total)


def solve_power_min(c: ChannelSet, gamma: SinrSpec, opts: SolverOptions = None) -> BeamSolution:
    """Minimum total power beamformers meeting every SINR target.

    Optimal solutions are phase normalized and, unless ``opts.polish`` is off, meet
    their SINR targets with equality.
    """
    opts = opts or SolverOptions()
    program = build_cone_program(c, gamma)
    dims = {'l': 0, 'q': list(program.cone_dims), 's': []}
    result = solvers.conelp(
        matrix(program.c),
        matrix(np.ascontiguousarray(program.G)),
        matrix(program.h),
        dims,
        matrix(np.ascontiguousarray(program.A)),
        matrix(program.b),
        options=opts.cvxopt_options()
    )
    status = _classify(result, opts)
    residuals = SolverResiduals(
        primal=_value(result, 'primal infeasibility'),
        dual=_value(result, 'dual infeasibility'),
        gap=_value(result, 'relative gap'),
    )
    iterations = int(result.get('iterations') or 0)
    logger.debug(
        f"Cone program ({program.variable_count} variables): solver status '{result['status']}' "
        f"after {iterations} iterations, residuals {residuals}"
    )

    if status != SolverStatus.OPTIMAL:
        return BeamSolution.from_beamformers(
            np.zeros((c.n, c.k), dtype=np.complex128),
            status,
            iterations=iterations,
            residuals=residuals
        )

    x = np.array(result['x']).reshape(-1)
    sol = BeamSolution.from_beamformers(
        _unlift(x, c.n, c.k),
        status,
        iterations=iterations,
        residuals=residuals
    )
    sol = phase_normalize(sol, c)
    if opts.polish:
        sol = _polish(sol, c, gamma)
    return sol


def closed_form_k1(h: np.ndarray, gamma: float, sigma2: float) -> BeamSolution:
    """Single user solution: matched filter direction and p = gamma sigma^2 / ||h||^2."""
    h = np.asarray(h, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(h)
    if not norm > 0:
        raise ChannelError("closed form solution needs a non-zero channel")
    u = (h / norm)[:, np.newaxis]
    p = np.array([gamma * sigma2 / norm ** 2])
    return BeamSolution(
        w=u * np.sqrt(p),
        u=u,
        p=p,
        total_power=float(p[0]),
        status=SolverStatus.OPTIMAL,
    )


class Labeler:
    """Dataset labeler: solves the power minimization for an equal SINR target given
    in dB. Instances are picklable and can be shipped to worker processes."""

    def __init__(self, opts: SolverOptions = None):
        self.opts = opts or SolverOptions()

    def __call__(self, c: ChannelSet, gamma_db: float) -> BeamSolution:
        return solve_power_min(c, SinrSpec.uniform(c.k, gamma_db), self.opts)


__all__ = [
    'SolverOptions',
    'ConeProgram',
    'SolverResiduals',
    'BeamSolution',
    'build_cone_program',
    'solve_power_min',
    'phase_normalize',
    'closed_form_k1',
    'Labeler',
]
