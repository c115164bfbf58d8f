"""Prior phase distributions built from the initial many-body state.

The densities returned by :func:`g_from_coefficients` and :func:`g_general`
use the phase variable in which a coefficient table ``x_Q`` contributes
``|sum_Q x_Q exp(-i Q phi)|**2``; a coherent state with ``alpha = |alpha|
exp(i Theta)`` then peaks at ``phi = Theta``.  The fringe factors of
:mod:`fockphase.engine` are written as ``cos(u + theta - phi)``, which runs
the phase the other way round, so a prior must pass through
:func:`engine_prior` (a reflection ``phi -> -phi``) before it is combined
with detection events.  ``tests/test_priors.py`` pins this against a direct
many-body calculation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import InvalidSpecError, TruncationError
from .model import PhaseDistribution, canonical_angle

DEFAULT_PRIOR_M = 4096
TAIL_TOL = 1e-12
COEFF_NORM_TOL = 1e-9


@dataclass(frozen=True)
class NumberSuperposition:
    """Coefficients ``x_Q`` for ``|N_a + Q, N_b - Q>``, Q from ``q_min`` upward."""

    coeffs: np.ndarray
    q_min: int = 0
    n_a: Optional[int] = None
    n_b: Optional[int] = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise InvalidSpecError("coefficient table must be a non-empty 1-D array")
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > COEFF_NORM_TOL:
            raise InvalidSpecError(f"coefficients not normalized (sum |x_Q|^2 = {norm:.12g})")
        if self.n_a is not None and self.n_b is not None:
            q_max = max(abs(self.q_min), abs(self.q_min + c.size - 1))
            if q_max > min(self.n_a, self.n_b) / 10:
                raise InvalidSpecError("population spread too wide: need Q_max <= min(N_a, N_b)/10")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_sparse(cls, entries: dict, **kw) -> "NumberSuperposition":
        """Dense table from ``{Q: amplitude}``; the result is normalized on load."""
        if not entries:
            raise InvalidSpecError("empty coefficient table")
        qs = sorted(entries)
        dense = np.zeros(qs[-1] - qs[0] + 1, dtype=complex)
        for q in qs:
            dense[q - qs[0]] = entries[q]
        norm = math.sqrt(float(np.sum(np.abs(dense) ** 2)))
        if norm == 0:
            raise InvalidSpecError("all coefficients are zero")
        return cls(dense / norm, q_min=qs[0], **kw)


@dataclass(frozen=True)
class CoherentSpec:
    modulus: float
    phase: float = 0.0
    q_max: Optional[int] = None

    def __post_init__(self):
        if not self.modulus >= 0:
            raise InvalidSpecError("coherent modulus must be nonnegative")
        object.__setattr__(self, "phase", canonical_angle(self.phase))

    def truncation(self) -> int:
        """Smallest ``Q_max`` whose dropped Poisson tail is below the tolerance."""
        mean = self.modulus**2
        if mean == 0:
            return 0
        q = int(mean)
        while poisson.sf(q, mean) >= TAIL_TOL:
            q += 1
        return q


def uniform_prior(M: int = DEFAULT_PRIOR_M) -> PhaseDistribution:
    return PhaseDistribution.uniform(M)


def _fourier_density(coeffs: np.ndarray, M: int) -> np.ndarray:
    """``|sum_q c_q exp(-i q phi_j)|**2`` on the M-point grid (q offset dropped)."""
    if coeffs.size > M:
        raise InvalidSpecError(f"Q window ({coeffs.size}) exceeds the grid size M={M}")
    # forward FFT has exactly the exp(-2πi q j / M) kernel
    return np.abs(np.fft.fft(coeffs, n=M)) ** 2


def g_from_coefficients(coeffs, M: int = DEFAULT_PRIOR_M) -> PhaseDistribution:
    """Phase density ``c |sum_Q x_Q e^{-iQ phi}|^2`` of a number-difference superposition.

    ``coeffs`` may be a :class:`NumberSuperposition` or a plain array.  The
    Q offset of the window only contributes a unimodular factor and drops
    out of the modulus.
    """
    if isinstance(coeffs, NumberSuperposition):
        c = coeffs.coeffs
    else:
        c = np.asarray(coeffs, dtype=complex)
    if M < 16:
        raise InvalidSpecError("phase grid needs at least 16 points")
    if c.size == 0 or not np.any(np.abs(c) > 0):
        raise InvalidSpecError("all coefficients are zero")
    return PhaseDistribution.from_unnormalized(_fourier_density(c, M))


def coherent_coefficients(spec: CoherentSpec) -> np.ndarray:
    """``x_Q = exp(-|a|^2/2) a^Q / sqrt(Q!)`` for Q = 0..Q_max, via logs."""
    q_max = spec.truncation() if spec.q_max is None else int(spec.q_max)
    mean = spec.modulus**2
    if mean > 0 and poisson.sf(q_max, mean) >= TAIL_TOL:
        raise TruncationError(
            f"Q_max={q_max} drops {poisson.sf(q_max, mean):.3g} of the weight (limit {TAIL_TOL})"
        )
    q = np.arange(q_max + 1)
    if spec.modulus == 0:
        out = np.zeros(q_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mod = -0.5 * mean + q * math.log(spec.modulus) - 0.5 * gammaln(q + 1)
    return np.exp(log_mod) * np.exp(1j * q * spec.phase)


def coherent_prior(spec: CoherentSpec, M: int = DEFAULT_PRIOR_M) -> PhaseDistribution:
    return g_from_coefficients(coherent_coefficients(spec), M)


def g_general(table, M: int = DEFAULT_PRIOR_M) -> PhaseDistribution:
    """Incoherent sum over total number N of per-N densities.

    ``table`` maps each total N to its Q-coefficients ``x_{N/2+Q, N/2-Q}``
    (a 1-D array, or a ``(coeffs, q_min)`` pair).  Each slice contributes
    its unnormalized ``|sum_Q x e^{-iQ phi}|^2``, so slices are weighted by
    their share of the total norm.
    """
    if not table:
        raise InvalidSpecError("empty (N, Q) table")
    total = np.zeros(M)
    norm = 0.0
    for _, entry in sorted(table.items()):
        c = np.asarray(entry[0] if isinstance(entry, tuple) else entry, dtype=complex)
        total += _fourier_density(c, M) if c.size else 0.0
        norm += float(np.sum(np.abs(c) ** 2))
    if abs(norm - 1.0) > COEFF_NORM_TOL:
        raise InvalidSpecError(f"(N, Q) table not normalized (sum |x|^2 = {norm:.12g})")
    return PhaseDistribution.from_unnormalized(total)


def engine_prior(dist: PhaseDistribution) -> PhaseDistribution:
    """Re-express a prior from :func:`g_from_coefficients` in the engine's phase variable."""
    return dist.reflected()


def load_coefficients_csv(path) -> NumberSuperposition:
    """Read a ``Q,re,im`` CSV (header row required) into a normalized table."""
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"Q", "re", "im"} - set(reader.fieldnames or ())
        if missing:
            raise InvalidSpecError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            entries[int(row["Q"])] = complex(float(row["re"]), float(row["im"]))
    return NumberSuperposition.from_sparse(entries)


__all__ = [
    "NumberSuperposition",
    "CoherentSpec",
    "uniform_prior",
    "g_from_coefficients",
    "coherent_coefficients",
    "coherent_prior",
    "g_general",
    "engine_prior",
    "load_coefficients_csv",
]
