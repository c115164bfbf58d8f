"""Phase-integral engine: fringe factors, quadrature, posteriors, sampling.

Every detection contributes a factor that is a first-degree trigonometric
polynomial in the relative phase(s).  For two modes::

    f(phi) = c0 + Re(c1 * exp(-i phi))        # = 1 + x eta cos(u + theta - phi)

and for three plane-wave modes::

    f(phi, phi') = 1 + Re(c_ab e^{i phi} + c_bc e^{i phi'} + c_ca e^{-i(phi + phi')})

Factors are normalized to unit mean over the phase (for plane waves), so the
probability of the empty record is 1 and ``N**P`` times a sequence
probability is the many-body expectation value with ``sqrt(N +- n)``
replaced by ``sqrt(N)``.  Spin factors carry no 1/2: summing a factor over
``eta = +-1`` gives 2, and :func:`pattern_probability` divides it back out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidSpecError, QuadratureDegreeError, ZeroProbabilityRecordError
from .model import (
    TWO_PI,
    CondensateSpec,
    DetectionEvent,
    GeneralModePair,
    MeasurementRecord,
    PhaseDistribution,
)

MIN_MASS = 1e-300
UNDEFINED_MEAN_L = 1e-12
DEFAULT_CANDIDATES = 1024
DEFAULT_CANDIDATES_3 = 32
DEFAULT_M_2D = 128


def default_grid(P: int) -> int:
    """Posterior grid size for a 1-D run of ``P`` events."""
    return max(4096, 2 * P + 2)


@dataclass(frozen=True)
class EventFactorModel:
    """What the fringe factors need to know about the condensate.

    ``x`` is the two-mode contrast; ``x3`` the three-mode contrasts
    ``3 sqrt(N_i N_j)/N`` for (ab, bc, ca); ``weights`` the population
    fractions used with tabulated modes.
    """

    modes: int = 2
    x: float = 1.0
    x3: tuple = (1.0, 1.0, 1.0)
    pair: Optional[GeneralModePair] = None
    weights: tuple = (0.5, 0.5)
    spinful: bool = False

    def __post_init__(self):
        if self.modes not in (2, 3):
            raise InvalidSpecError("only two or three modes are supported")
        if self.modes == 2 and not 0.0 <= self.x <= 1.0:
            raise InvalidSpecError("two-mode contrast must lie in [0, 1]")
        if self.modes == 3 and any(not 0.0 <= c <= 1.5 for c in self.x3):
            raise InvalidSpecError("three-mode contrasts must lie in [0, 3/2]")

    @classmethod
    def from_spec(cls, spec: CondensateSpec) -> "EventFactorModel":
        if spec.modes == 3:
            return cls(modes=3, x3=spec.contrasts3)
        n = spec.N
        return cls(
            modes=2,
            x=spec.x,
            pair=spec.pair,
            weights=(spec.n_a / n, spec.n_b / n),
            spinful=spec.spinful,
        )

    @property
    def dim(self) -> int:
        return self.modes - 1


def _coefficient_arrays(model: EventFactorModel, kind: str, u=0.0, theta=0.0, eta=1,
                        site=None, u_bc=None):
    """Vectorized factor coefficients; arguments broadcast against each other."""
    if model.modes == 3:
        if kind != "position" or u_bc is None:
            raise InvalidSpecError("three-mode events are position events with u_ab and u_bc")
        u = np.asarray(u, dtype=float)
        u_bc = np.asarray(u_bc, dtype=float)
        xab, xbc, xca = model.x3
        return (
            (2.0 / 3.0) * xab * np.exp(1j * u),
            (2.0 / 3.0) * xbc * np.exp(1j * u_bc),
            (2.0 / 3.0) * xca * np.exp(-1j * (u + u_bc)),
        )
    if kind == "spin" and not model.spinful:
        raise InvalidSpecError("spin events need a spinful condensate")
    # spin-blind detection of alpha/beta particles has no cross term
    gain = model.x if (kind == "spin" or not model.spinful) else 0.0
    eta = np.asarray(eta)
    if model.pair is None:
        if site is not None:
            raise InvalidSpecError("site-indexed event on plane-wave modes")
        c1 = gain * eta * np.exp(1j * (np.asarray(u) + theta))
        return np.ones(np.shape(c1)), c1
    if site is None:
        raise InvalidSpecError("tabulated modes need site-indexed events")
    pa = model.pair.phi_a[site]
    pb = model.pair.phi_b[site]
    wa, wb = model.weights
    c0 = wa * np.abs(pa) ** 2 + wb * np.abs(pb) ** 2
    c1 = gain * eta * pa * np.conj(pb) * np.exp(1j * theta)
    return c0 + 0.0 * np.real(c1), c1


def event_coefficients(e: DetectionEvent, model: EventFactorModel):
    """Trigonometric coefficients of one event's factor.

    Two modes: ``(c0, c1)``.  Three modes: ``(c_ab, c_bc, c_ca)``.
    """
    out = _coefficient_arrays(model, e.kind, e.u, e.theta, e.eta, e.site, e.u_bc)
    if model.modes == 3:
        return tuple(complex(c) for c in out)
    return float(out[0]), complex(out[1])


def event_factor(e: DetectionEvent, phi, model: EventFactorModel):
    """Two-mode fringe factor at phase ``phi`` (scalar or array)."""
    if model.modes != 2:
        raise InvalidSpecError("use event_factor3 for three modes")
    c0, c1 = event_coefficients(e, model)
    return c0 + np.real(c1 * np.exp(-1j * np.asarray(phi)))


def event_factor3(e: DetectionEvent, phi, phi2, model: EventFactorModel):
    """Three-mode fringe factor, unit mean over both phases."""
    if model.modes != 3:
        raise InvalidSpecError("event_factor3 needs a three-mode model")
    cab, cbc, cca = event_coefficients(e, model)
    phi = np.asarray(phi)
    phi2 = np.asarray(phi2)
    return 1.0 + np.real(
        cab * np.exp(1j * phi) + cbc * np.exp(1j * phi2) + cca * np.exp(-1j * (phi + phi2))
    )


@lru_cache(maxsize=32)
def _phasors(M: int, dim: int):
    """Unit phasors ``exp(i phi)`` (and ``exp(i phi')``) on the grid."""
    g = np.exp(1j * TWO_PI * np.arange(M) / M)
    if dim == 1:
        out = (g,)
    else:
        out = (g[:, None] * np.ones(M)[None, :], np.ones(M)[:, None] * g[None, :])
    for a in out:
        a.setflags(write=False)
    return out


def factor_on_grid(e: DetectionEvent, model: EventFactorModel, M: int) -> np.ndarray:
    if model.modes == 2:
        (z,) = _phasors(M, 1)
        c0, c1 = event_coefficients(e, model)
        f = c0 + np.real(c1 * np.conj(z))
    else:
        z1, z2 = _phasors(M, 2)
        cab, cbc, cca = event_coefficients(e, model)
        f = 1.0 + np.real(cab * z1 + cbc * z2 + cca * np.conj(z1 * z2))
    # dark fringes can round to -1e-16
    return np.maximum(f, 0.0)


def _check_dims(dist: PhaseDistribution, model: EventFactorModel):
    if dist.dim != model.dim:
        raise InvalidSpecError(f"{model.modes}-mode model needs a {model.dim}-D phase grid")


def log_sequence_probability(events: Sequence[DetectionEvent], prior: PhaseDistribution,
                             model: EventFactorModel) -> float:
    """Natural log of :func:`sequence_probability`, accumulated with rescaling."""
    _check_dims(prior, model)
    events = list(events)
    if prior.M < len(events) + 1:
        raise QuadratureDegreeError(
            f"grid of {prior.M} points cannot integrate {len(events)} factors exactly"
        )
    acc = prior.values.copy()
    log_scale = 0.0
    for e in events:
        acc *= factor_on_grid(e, model, prior.M)
        peak = acc.max()
        if peak <= 0:
            return -math.inf
        # keep the running product O(1) so long records neither overflow nor underflow
        acc /= peak
        log_scale += math.log(peak)
    total = acc.sum() * prior.cell
    return log_scale + math.log(total) if total > 0 else -math.inf


def sequence_probability(events: Sequence[DetectionEvent], prior: PhaseDistribution,
                         model: EventFactorModel) -> float:
    """Phase average of the product of fringe factors (empty record -> 1).

    With a uniform prior and ``M >= P + 1`` grid points per dimension the
    grid sum is the exact integral, because the integrand is a
    trigonometric polynomial of degree at most ``P``.
    """
    return math.exp(log_sequence_probability(events, prior, model))


def pattern_probability(events: Sequence[DetectionEvent], prior: PhaseDistribution,
                        model: EventFactorModel) -> float:
    """Probability of the spin results in ``events`` given their axes and positions."""
    n_spin = sum(1 for e in events if e.kind == "spin")
    return math.exp(log_sequence_probability(events, prior, model) - n_spin * math.log(2.0))


def posterior_update(dist: PhaseDistribution, e: DetectionEvent,
                     model: EventFactorModel) -> PhaseDistribution:
    _check_dims(dist, model)
    v = dist.values * factor_on_grid(e, model, dist.M)
    mass = v.sum() * dist.cell
    if not mass > MIN_MASS:
        raise ZeroProbabilityRecordError(f"event {e} has zero probability under the current phase")
    return PhaseDistribution(v / mass)


def posterior(dist: PhaseDistribution, events: Sequence[DetectionEvent],
              model: EventFactorModel) -> PhaseDistribution:
    for e in events:
        dist = posterior_update(dist, e, model)
    return dist


def phase_moments(dist: PhaseDistribution):
    """Averages of the phasors that appear in the factors.

    1-D: ``(E[e^{-i phi}],)``.  2-D: ``(E[e^{i phi}], E[e^{i phi'}], E[e^{-i(phi+phi')}])``.
    """
    if dist.dim == 1:
        (z,) = _phasors(dist.M, 1)
        return (np.sum(dist.values * np.conj(z)) * dist.cell,)
    z1, z2 = _phasors(dist.M, 2)
    w = dist.values * dist.cell
    return (np.sum(w * z1), np.sum(w * z2), np.sum(w * np.conj(z1 * z2)))


def _predict(coeffs, moments, modes: int):
    if modes == 2:
        c0, c1 = coeffs
        return c0 + np.real(c1 * moments[0])
    return 1.0 + np.real(sum(c * m for c, m in zip(coeffs, moments)))


def predictive_density(dist: PhaseDistribution, candidates: Sequence[DetectionEvent],
                       model: EventFactorModel) -> np.ndarray:
    """Next-event density ``int dist(phi) f_c(phi) dphi`` for each candidate.

    Because each factor is linear in the first phasor moments, the grid
    integral reduces to those moments; the result equals the direct grid
    quadrature to rounding.
    """
    candidates = list(candidates)
    if not candidates:
        raise InvalidSpecError("empty candidate list")
    if len({c.kind for c in candidates}) > 1:
        raise InvalidSpecError("candidates must share one kind")
    _check_dims(dist, model)
    moments = phase_moments(dist)
    return np.array([_predict(event_coefficients(c, model), moments, model.modes)
                     for c in candidates])


class CircularStats(NamedTuple):
    mean: float
    resultant: float
    std: float


def circular_stats(dist: PhaseDistribution, combo: tuple = (1, 0)) -> CircularStats:
    """Circular mean, resultant length and circular std of a phase density.

    For 2-D densities ``combo = (p, q)`` selects the angle ``p phi + q phi'``.
    The mean is NaN when the resultant length is below 1e-12.
    """
    if dist.dim == 1:
        (z,) = _phasors(dist.M, 1)
        m = np.sum(dist.values * z) * dist.cell
    else:
        p, q = combo
        z1, z2 = _phasors(dist.M, 2)
        m = np.sum(dist.values * z1**p * z2**q) * dist.cell
    L = min(1.0, float(abs(m)))
    mean = float(np.mod(np.angle(m), TWO_PI)) if L >= UNDEFINED_MEAN_L else math.nan
    std = math.sqrt(-2.0 * math.log(L)) if L > 0 else math.inf
    return CircularStats(mean, L, std)


def candidate_events(model: EventFactorModel, spec: Optional[CondensateSpec] = None,
                     n_candidates: Optional[int] = None, sites=None) -> dict:
    """Default candidate positions for sampling, as a dict of equal-length arrays.

    Keys are ``u`` (plane waves, plus ``u_bc`` for three modes) or ``site``
    (tabulated modes).  Plane waves sharing one wavevector have a single
    candidate ``u = 0``.
    """
    if model.modes == 3:
        n = n_candidates or DEFAULT_CANDIDATES_3
        g = np.arange(n) * TWO_PI / n
        a, b = np.meshgrid(g, g, indexing="ij")
        return {"u": a.ravel(), "u_bc": b.ravel()}
    if model.pair is not None:
        idx = np.arange(model.pair.n_sites) if sites is None else np.asarray(sites, dtype=int)
        return {"site": idx}
    if spec is not None and spec.same_orbital:
        return {"u": np.zeros(1)}
    n = n_candidates or DEFAULT_CANDIDATES
    return {"u": np.arange(n) * TWO_PI / n}


def sample_record(seed: int, P: int, policy, prior: PhaseDistribution, model: EventFactorModel,
                  kind: str = "position", candidates: Optional[dict] = None,
                  spec: Optional[CondensateSpec] = None) -> MeasurementRecord:
    """Draw ``P`` events one at a time from the current predictive density.

    ``candidates`` is a dict of arrays as returned by
    :func:`candidate_events`.  Spin runs pair every candidate with
    ``eta = +-1`` and take the axis from ``policy.next_angle(posterior,
    step)``.  The draw is an inverse-CDF lookup on the discrete candidate
    set, so a record is a pure function of ``seed``.
    """
    rng = np.random.default_rng(seed)
    if candidates is None:
        candidates = candidate_events(model, spec)
    cand = {k: np.asarray(v) for k, v in candidates.items()}
    n = len(next(iter(cand.values())))
    if kind == "spin":
        cand = {k: np.concatenate([v, v]) for k, v in cand.items()}
        etas = np.concatenate([np.ones(n, dtype=int), -np.ones(n, dtype=int)])
    else:
        etas = np.ones(n, dtype=int)
    dist = prior
    events, snaps = [], []
    for step in range(P):
        theta = float(policy.next_angle(dist, step)) if kind == "spin" else 0.0
        coeffs = _coefficient_arrays(model, kind, theta=theta, eta=etas, **cand)
        weights = np.clip(_predict(coeffs, phase_moments(dist), model.modes), 0.0, None)
        cdf = np.cumsum(weights)
        if not cdf[-1] > 0:
            raise ZeroProbabilityRecordError("no candidate has positive probability")
        pick = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cdf.size - 1)
        e = DetectionEvent(kind, theta=theta, eta=int(etas[pick]),
                           **{k: v[pick].item() for k, v in cand.items()})
        dist = posterior_update(dist, e, model)
        events.append(e)
        snaps.append(dist)
    name = getattr(policy, "name", "none") if kind == "spin" else "candidate-grid"
    return MeasurementRecord(events, snaps, seed, name, prior)
