"""Exact sequence probabilities on double (and triple) Fock states.

Detections sit at distinct points, so the product of local one-body
operators normal-orders without correction terms.  Each event then
contributes a ``K x K`` matrix ``W[m', m]`` (creation mode ``m'``,
annihilation mode ``m``) and the expectation value is::

    sum over mode choices of  prod_i W_i[m'_i, m_i] * <a'^dag ... a ...>

where the Fock expectation is nonzero only when the creation side uses each
mode as often as the annihilation side, and then equals
``prod_m (N_m)_{c_m}`` (falling factorials).  :func:`transfer_dp` sums the
choices with a dynamic program over the two count vectors; the ``power``
weight mode replaces ``(N)_c`` by ``N**c`` and is what the phase integral
computes.

Spin projector matrices carry no factor 1/2 (same convention as
:mod:`fockphase.engine`), so the physical probability of a spin-result
pattern is the returned value times ``2**-n_spin``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CapExceededError, InvalidSpecError, ZeroProbabilityRecordError
from .model import CondensateSpec, DetectionEvent, RegionLayout

MAX_P_THREE_MODE = 15
MAX_P_BRUTE = 10
MAX_N_DENSE = 4000

FALLING = "falling"
POWER = "power"


@dataclass(frozen=True)
class OracleResult:
    """Exact value plus ``scaled = value / N**P`` (an O(1) number)."""

    value: float
    mode: str
    P: int
    populations: tuple
    scaled: float

    @property
    def n_a(self) -> int:
        return self.populations[0]

    @property
    def n_b(self) -> int:
        return self.populations[1]


def elementary_symmetric(z: Sequence[complex]) -> np.ndarray:
    """Coefficients ``e_0..e_P`` of ``prod_i (1 + z_i t)``."""
    z = np.asarray(z, dtype=complex)
    e = np.zeros(z.size + 1, dtype=complex)
    e[0] = 1.0
    for i, zi in enumerate(z):
        # descending update so e[m-1] is still the previous row
        e[1 : i + 2] = e[1 : i + 2] + zi * e[0 : i + 1]
    return e


def log_weight(counts: Sequence[int], populations: Sequence[int], mode: str) -> float:
    """``log prod_m (N_m)_{c_m}`` or ``log prod_m N_m**c_m``; ``-inf`` when zero."""
    total = 0.0
    for c, n in zip(counts, populations):
        if c == 0:
            continue
        if n == 0 or (mode == FALLING and c > n):
            return -math.inf
        total += c * math.log(n)
        if mode == FALLING:
            # log((N)_c / N**c) stays accurate for N up to 1e9 and beyond
            total += math.fsum(math.log1p(-j / n) for j in range(1, c))
    return total


def _orbitals(e: DetectionEvent, spec: CondensateSpec) -> np.ndarray:
    """Single-particle amplitudes of each mode at the event point (common phase dropped)."""
    if spec.modes == 3:
        if e.u_bc is None:
            raise InvalidSpecError("three-mode events need u_ab and u_bc")
        return np.exp(1j * np.array([e.u + e.u_bc, e.u_bc, 0.0]))
    if spec.pair is not None:
        if e.site is None:
            raise InvalidSpecError("tabulated modes need site-indexed events")
        return np.array([spec.pair.phi_a[e.site], spec.pair.phi_b[e.site]])
    return np.array([np.exp(1j * e.u), 1.0 + 0j])


def _internal_kernel(e: DetectionEvent, spec: CondensateSpec) -> np.ndarray:
    K = spec.modes
    if e.kind == "spin":
        if not spec.spinful:
            raise InvalidSpecError("spin events need a spinful condensate")
        off = e.eta * np.exp(1j * e.theta)
        return np.array([[1.0, np.conj(off)], [off, 1.0]])
    if spec.spinful:
        # alpha and beta particles are distinguishable to a spin-blind detector
        return np.eye(K, dtype=complex)
    return np.ones((K, K), dtype=complex)


def transfer_matrix(e: DetectionEvent, spec: CondensateSpec) -> np.ndarray:
    phi = _orbitals(e, spec)
    return np.conj(phi)[:, None] * phi[None, :] * _internal_kernel(e, spec)


def transverse_spin_matrix(phi_a: complex, phi_b: complex, theta: float) -> np.ndarray:
    """Matrix of the local transverse spin ``sigma_theta`` (pure transfer, no density part)."""
    phi = np.array([phi_a, phi_b], dtype=complex)
    kern = np.array([[0.0, np.exp(-1j * theta)], [np.exp(1j * theta), 0.0]])
    return np.conj(phi)[:, None] * phi[None, :] * kern


def transfer_matrices(events: Sequence[DetectionEvent], spec: CondensateSpec) -> list:
    return [transfer_matrix(e, spec) for e in events]


def transfer_dp(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of matrix-entry products grouped by balanced mode counts.

    Returns ``d`` with ``d[c_0, ..., c_{K-2}]`` the summed weight of all
    choice sequences whose annihilation and creation sides both use mode
    ``m`` exactly ``c_m`` times (the last mode's count is implied).
    """
    matrices = list(matrices)
    P = len(matrices)
    K = matrices[0].shape[0] if matrices else 2
    free = K - 1
    shape = (P + 1,) * (2 * free)
    D = np.zeros(shape, dtype=complex)
    D[(0,) * (2 * free)] = 1.0
    for W in matrices:
        new = np.zeros_like(D)
        for mp in range(K):
            for m in range(K):
                w = W[mp, m]
                if w == 0:
                    continue
                shifted = D
                # counts stay below P until the last step, so roll never wraps live entries
                if m < free:
                    shifted = np.roll(shifted, 1, axis=m)
                if mp < free:
                    shifted = np.roll(shifted, 1, axis=free + mp)
                new += w * shifted
        D = new
    if free == 1:
        return np.diagonal(D).copy()
    idx = np.arange(P + 1)
    return D[idx[:, None], idx[None, :], idx[:, None], idx[None, :]]


def _contract(diag: np.ndarray, populations: Sequence[int], P: int, mode: str, log_ref: float) -> float:
    """``sum_c diag[c] * weight(c) * exp(-log_ref)`` over admissible count vectors."""
    total = 0.0
    for c in itertools.product(range(P + 1), repeat=diag.ndim):
        last = P - sum(c)
        if last < 0:
            continue
        lw = log_weight(tuple(c) + (last,), populations, mode)
        if lw == -math.inf:
            continue
        total += diag[c].real * math.exp(lw - log_ref)
    return total


def _result(scaled: float, populations, P: int, mode: str) -> OracleResult:
    N = sum(populations)
    value = scaled * float(N) ** P
    return OracleResult(float(value), mode, P, tuple(populations), float(scaled))


def _check(events, spec: CondensateSpec):
    sites = [e.site for e in events if e.site is not None]
    if len(sites) != len(set(sites)):
        raise InvalidSpecError("detections must sit at distinct points")
    if spec.modes == 3 and len(events) > MAX_P_THREE_MODE:
        raise CapExceededError(f"three-mode oracle is capped at P={MAX_P_THREE_MODE}")


def exact_sequence_probability(events: Sequence[DetectionEvent], spec: CondensateSpec,
                               mode: str = FALLING, method: str = "dp") -> OracleResult:
    """Many-body expectation of the detection record on the Fock state ``spec``.

    ``method`` selects the route: ``"dp"`` (transfer dynamic program, any
    event kind), ``"esp"`` (elementary symmetric polynomials; two plane
    waves, rank-one events only) or ``"brute"`` (explicit sum over all
    ``K**(2P)`` choices, P <= 10).  All three agree to rounding.
    """
    if mode not in (FALLING, POWER):
        raise InvalidSpecError(f"unknown weight mode {mode!r}")
    events = list(events)
    _check(events, spec)
    P = len(events)
    pops = spec.populations
    log_ref = P * math.log(spec.N)
    if method == "dp":
        diag = transfer_dp(transfer_matrices(events, spec))
        return _result(_contract(diag, pops, P, mode, log_ref), pops, P, mode)
    if method == "esp":
        return _result(_esp_scaled(events, spec, mode, log_ref), pops, P, mode)
    if method == "brute":
        return _result(_brute_scaled(events, spec, mode, log_ref), pops, P, mode)
    raise InvalidSpecError(f"unknown method {method!r}")


def _esp_scaled(events, spec: CondensateSpec, mode: str, log_ref: float) -> float:
    if spec.modes != 2 or spec.pair is not None:
        raise InvalidSpecError("the symmetric-polynomial route needs two plane-wave modes")
    z = []
    for e in events:
        if e.kind == "spin":
            # annihilation amplitudes (1, eta e^{-i theta}) on top of the orbital phases
            z.append(np.exp(1j * (e.u + e.theta)) * e.eta)
        elif spec.spinful:
            raise InvalidSpecError("spin-blind events are not rank one")
        else:
            z.append(np.exp(1j * e.u))
    ez = elementary_symmetric(z)
    P = len(events)
    total = 0.0
    for c in range(P + 1):
        lw = log_weight((c, P - c), spec.populations, mode)
        if lw > -math.inf:
            total += abs(ez[c]) ** 2 * math.exp(lw - log_ref)
    return total


def _brute_scaled(events, spec: CondensateSpec, mode: str, log_ref: float) -> float:
    P = len(events)
    if P > MAX_P_BRUTE:
        raise CapExceededError(f"brute-force expansion is capped at P={MAX_P_BRUTE}")
    W = np.array(transfer_matrices(events, spec)) if P else np.zeros((0, spec.modes, spec.modes))
    K = spec.modes
    choices = np.array(list(itertools.product(range(K), repeat=P)), dtype=int).reshape(-1, P)
    counts = np.stack([(choices == m).sum(axis=1) for m in range(K)], axis=1)
    rows = np.arange(P)
    total = 0j
    for ann, cnt in zip(choices, counts):
        lw = log_weight(cnt, spec.populations, mode)
        if lw == -math.inf:
            continue
        # every creation sequence, kept only if its counts match the annihilation side
        match = np.all(counts == cnt, axis=1)
        prods = np.prod(W[rows, choices[match], ann], axis=1)
        total += prods.sum() * math.exp(lw - log_ref)
    return total.real


def twomode_spin_sequential(events: Sequence[DetectionEvent], n_a: int, n_b: int,
                            ordering: str = "normal") -> float:
    """Dense two-mode cross-check for spin records on one shared orbital.

    ``ordering="normal"`` applies, event by event, the operator that
    removes one particle with spin ``eta`` along ``theta``,
    ``C = (a + eta e^{-i theta} b) / sqrt(2)``, to ``|N_a, N_b>`` and
    returns the squared norm, i.e. ``<prod_i P_i>`` with the projectors
    ``(n + eta sigma_theta)/2`` at distinct points.  It equals
    ``exact_sequence_probability(...).value * 2**-P``.

    ``ordering="operator"`` multiplies the ``(N+1)``-dimensional matrices
    of ``(n + eta sigma_theta)/2`` built from the *total* mode operators,
    first event applied first.  That is the coincident-point product: it
    keeps the self-contraction terms that distinct detection points do not
    have, so it only matches the normal-ordered value after normalization
    in special cases (e.g. N = 2).
    """
    N = n_a + n_b
    if N > MAX_N_DENSE:
        raise CapExceededError(f"dense two-mode oracle is capped at N={MAX_N_DENSE}")
    for e in events:
        if e.kind != "spin" or e.site is not None or e.u != 0.0:
            raise InvalidSpecError("dense oracle handles spin events on a shared orbital only")
    if ordering == "normal":
        return _dense_normal(events, n_a, n_b)
    if ordering == "operator":
        return _dense_operator(events, n_a, n_b)
    raise InvalidSpecError(f"unknown ordering {ordering!r}")


def _dense_normal(events, n_a: int, n_b: int) -> float:
    # psi[j]: amplitude with j particles left in mode a; total left = remaining
    psi = np.zeros(n_a + 1, dtype=complex)
    psi[n_a] = 1.0
    remaining = n_a + n_b
    j = np.arange(n_a + 1)
    for e in events:
        if remaining == 0:
            return 0.0
        cb = e.eta * np.exp(-1j * e.theta)
        new = np.zeros_like(psi)
        new[:-1] += np.sqrt(j[1:]) * psi[1:]
        nb = np.clip(remaining - j, 0, None)
        new += cb * np.sqrt(nb) * psi
        psi = new / math.sqrt(2.0)
        remaining -= 1
    return float(np.vdot(psi, psi).real)


def _dense_operator(events, n_a: int, n_b: int) -> float:
    N = n_a + n_b
    j = np.arange(N + 1)  # a-occupation on the fixed-N manifold
    lower = np.sqrt(j[1:] * (N - j[1:] + 1.0))  # <j-1| b^dag a |j>
    v = np.zeros(N + 1, dtype=complex)
    v[n_a] = 1.0
    start = v.copy()
    for e in events:
        sig = np.zeros_like(v)
        sig[:-1] += np.exp(1j * e.theta) * lower * v[1:]
        sig[1:] += np.exp(-1j * e.theta) * lower * v[:-1]
        v = 0.5 * (N * v + e.eta * sig)
    return float(np.vdot(start, v).real)


def remote_orientation_exact(events: Sequence[DetectionEvent], target, theta: float,
                             spec: CondensateSpec, layout: Optional[RegionLayout] = None) -> float:
    """Conditional transverse spin density ``<prod P_i sigma_theta(r*)> / <prod P_i>``.

    ``target`` is a site index for tabulated modes (or a layout) and the
    reduced coordinate ``u*`` for plane waves.  Falling-factorial weights,
    so this is exact at any population.
    """
    if layout is not None:
        spec = CondensateSpec(spec.n_a, spec.n_b, pair=layout.mode_pair(), spinful=True)
    if not spec.spinful or spec.modes != 2:
        raise InvalidSpecError("remote orientation needs a spinful two-mode condensate")
    events = list(events)
    if spec.pair is not None:
        target = int(target)
        if any(e.site == target for e in events):
            raise InvalidSpecError("target point coincides with a measured point")
        pa, pb = spec.pair.phi_a[target], spec.pair.phi_b[target]
    else:
        pa, pb = np.exp(1j * float(target)), 1.0
    _check(events, spec)
    mats = transfer_matrices(events, spec)
    P = len(events)
    pops = spec.populations
    ref = (P + 1) * math.log(spec.N)
    den = _contract(transfer_dp(mats), pops, P, FALLING, ref)
    if not den > 0:
        raise ZeroProbabilityRecordError("record is impossible on this Fock state")
    num = _contract(transfer_dp(mats + [transverse_spin_matrix(pa, pb, theta)]), pops, P + 1,
                    FALLING, ref)
    return num / den
