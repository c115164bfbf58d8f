"""Domain types for double (and triple) Fock-state condensates.

Everything here is an immutable value object.  Arrays held by the objects
are copied on construction and marked read-only, so instances can be shared
between workers without defensive copies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidSpecError

TWO_PI = 2.0 * math.pi
NORM_TOL = 1e-9


def canonical_angle(angle):
    """Map an angle (scalar or array) into ``[0, 2π)``; ``2π`` itself maps to 0."""
    out = np.mod(angle, TWO_PI)
    # np.mod can round a tiny negative input up to exactly 2π
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _frozen(arr, dtype=None) -> np.ndarray:
    a = np.array(arr, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def __sub__(self, other):  # type: ignore[override]
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def dot(self, other) -> float:
        return self.x * other[0] + self.y * other[1] + self.z * other[2]


def as_vec3(v) -> Vec3:
    if isinstance(v, Vec3):
        vec = v
    else:
        vals = [float(c) for c in v]
        if len(vals) != 3:
            raise InvalidSpecError(f"expected 3 components, got {len(vals)}")
        vec = Vec3(*vals)
    if not all(math.isfinite(c) for c in vec):
        raise InvalidSpecError(f"non-finite vector component in {vec}")
    return vec


def contrast_ratio(n_a: int, n_b: int) -> float:
    """Fringe visibility ``2 sqrt(N_a N_b) / (N_a + N_b)`` of two modes."""
    if n_a < 0 or n_b < 0:
        raise InvalidSpecError("populations must be nonnegative")
    total = n_a + n_b
    if total < 1:
        raise InvalidSpecError("empty condensate: both populations are zero")
    # sqrt of the product keeps the N_a == N_b case exactly at 1.0
    return min(1.0, 2.0 * math.sqrt(n_a * n_b) / total)


def reduce_position(r, k_a, k_b) -> float:
    """Reduced interference coordinate ``((k_a - k_b) . r) mod 2π``."""
    dk = as_vec3(k_a) - as_vec3(k_b)
    return canonical_angle(dk.dot(as_vec3(r)))


@dataclass(frozen=True)
class GeneralModePair:
    """Two tabulated single-particle wavefunctions on a shared site grid.

    ``cell`` is the volume of one site, so normalization reads
    ``sum(|phi|**2) * cell == 1``.
    """

    phi_a: np.ndarray
    phi_b: np.ndarray
    cell: float = 1.0
    positions: Optional[np.ndarray] = None

    def __post_init__(self):
        a = _frozen(self.phi_a, complex)
        b = _frozen(self.phi_b, complex)
        if a.ndim != 1 or a.shape != b.shape:
            raise InvalidSpecError("phi_a and phi_b must be 1-D tables on the same grid")
        if not self.cell > 0:
            raise InvalidSpecError("cell volume must be positive")
        for name, phi in (("phi_a", a), ("phi_b", b)):
            norm = float(np.sum(np.abs(phi) ** 2) * self.cell)
            if abs(norm - 1.0) > NORM_TOL:
                raise InvalidSpecError(f"{name} is not normalized (norm = {norm:.12g})")
        object.__setattr__(self, "phi_a", a)
        object.__setattr__(self, "phi_b", b)
        if self.positions is not None:
            pos = _frozen(self.positions, float)
            if pos.shape[0] != a.shape[0]:
                raise InvalidSpecError("positions table does not match the site count")
            object.__setattr__(self, "positions", pos)

    @property
    def n_sites(self) -> int:
        return self.phi_a.shape[0]

    @property
    def overlap(self) -> np.ndarray:
        """``|phi_a(r) phi_b(r)|`` per site."""
        return np.abs(self.phi_a * self.phi_b)

    @property
    def xi(self) -> np.ndarray:
        """Local relative phase ``arg(phi_a / phi_b)``; NaN where either vanishes."""
        prod = self.phi_a * np.conj(self.phi_b)
        out = canonical_angle(np.angle(prod))
        return np.where(np.abs(prod) > 0, out, np.nan)


@dataclass(frozen=True)
class Region:
    n_sites: int
    phi_a: complex
    phi_b: complex


@dataclass(frozen=True)
class RegionLayout:
    """Disjoint regions with piecewise-constant wavefunction values.

    Sites are laid out region by region in insertion order.  The layout is
    turned into a :class:`GeneralModePair` so that region experiments run on
    the same code path as arbitrary tabulated modes.
    """

    regions: dict
    cell: float = 1.0

    def __post_init__(self):
        regs = {}
        for name, reg in self.regions.items():
            if not isinstance(reg, Region):
                reg = Region(int(reg[0]), complex(reg[1]), complex(reg[2]))
            if reg.n_sites < 1:
                raise InvalidSpecError(f"region {name!r} has no sites")
            regs[name] = reg
        object.__setattr__(self, "regions", regs)
        for label, attr in (("phi_a", "phi_a"), ("phi_b", "phi_b")):
            norm = sum(abs(getattr(r, attr)) ** 2 * r.n_sites for r in regs.values()) * self.cell
            if abs(norm - 1.0) > NORM_TOL:
                raise InvalidSpecError(f"layout {label} is not normalized (norm = {norm:.12g})")

    @classmethod
    def normalized(cls, weights: dict, cell: float = 1.0) -> "RegionLayout":
        """Build a layout from ``name -> (n_sites, amp_a, amp_b)`` by rescaling amplitudes."""
        na = sum(abs(complex(w[1])) ** 2 * int(w[0]) for w in weights.values()) * cell
        nb = sum(abs(complex(w[2])) ** 2 * int(w[0]) for w in weights.values()) * cell
        regs = {
            name: Region(int(w[0]), complex(w[1]) / math.sqrt(na), complex(w[2]) / math.sqrt(nb))
            for name, w in weights.items()
        }
        return cls(regs, cell)

    def sites(self, name: str) -> np.ndarray:
        start = 0
        for key, reg in self.regions.items():
            if key == name:
                return np.arange(start, start + reg.n_sites)
            start += reg.n_sites
        raise KeyError(name)

    def mode_pair(self) -> GeneralModePair:
        pa = np.concatenate([np.full(r.n_sites, r.phi_a) for r in self.regions.values()])
        pb = np.concatenate([np.full(r.n_sites, r.phi_b) for r in self.regions.values()])
        return GeneralModePair(pa, pb, self.cell)


@dataclass(frozen=True)
class CondensateSpec:
    """Populations and mode descriptors of the initial Fock state.

    Plane-wave modes are given by wavevectors; tabulated modes by a
    :class:`GeneralModePair` (two-mode only).  With ``spinful=True`` mode
    *a* carries internal state alpha and mode *b* internal state beta.
    """

    n_a: int
    n_b: int
    n_c: Optional[int] = None
    k_a: Vec3 = Vec3(0.0, 0.0, 0.0)
    k_b: Vec3 = Vec3(0.0, 0.0, 0.0)
    k_c: Optional[Vec3] = None
    pair: Optional[GeneralModePair] = None
    spinful: bool = False

    def __post_init__(self):
        pops = [self.n_a, self.n_b] + ([] if self.n_c is None else [self.n_c])
        for p in pops:
            if int(p) != p or p < 0:
                raise InvalidSpecError("populations must be nonnegative integers")
        if sum(pops) < 1:
            raise InvalidSpecError("empty condensate: total population is zero")
        object.__setattr__(self, "k_a", as_vec3(self.k_a))
        object.__setattr__(self, "k_b", as_vec3(self.k_b))
        if self.n_c is not None:
            object.__setattr__(self, "k_c", as_vec3(self.k_c if self.k_c is not None else (0, 0, 0)))
            if self.pair is not None:
                raise InvalidSpecError("tabulated modes are supported for two modes only")
            if self.spinful:
                raise InvalidSpecError("spin measurements are defined for two modes only")

    @property
    def modes(self) -> int:
        return 2 if self.n_c is None else 3

    @property
    def populations(self) -> tuple:
        if self.n_c is None:
            return (self.n_a, self.n_b)
        return (self.n_a, self.n_b, self.n_c)

    @property
    def N(self) -> int:
        return int(sum(self.populations))

    @property
    def x(self) -> float:
        return contrast_ratio(self.n_a, self.n_b)

    @property
    def contrasts3(self) -> tuple:
        """Three-mode contrasts ``3 sqrt(N_i N_j) / N`` for the pairs ab, bc, ca."""
        if self.n_c is None:
            raise InvalidSpecError("not a three-mode spec")
        n = self.N
        return (
            3.0 * math.sqrt(self.n_a * self.n_b) / n,
            3.0 * math.sqrt(self.n_b * self.n_c) / n,
            3.0 * math.sqrt(self.n_c * self.n_a) / n,
        )

    @property
    def same_orbital(self) -> bool:
        """True when plane-wave modes share one wavevector (no spatial fringes)."""
        return self.pair is None and self.k_a == self.k_b

    def reduce(self, r) -> float:
        return reduce_position(r, self.k_a, self.k_b)


@dataclass(frozen=True)
class DetectionEvent:
    """One detection.

    ``u`` is the reduced coordinate for plane waves (``u_ab`` for three
    modes, with ``u_bc`` alongside), ``site`` indexes a tabulated grid.
    Position events always carry ``eta=+1`` and ``theta=0``.
    """

    kind: str = "position"
    u: float = 0.0
    theta: float = 0.0
    eta: int = 1
    site: Optional[int] = None
    u_bc: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("position", "spin"):
            raise InvalidSpecError(f"unknown event kind {self.kind!r}")
        if self.kind == "position":
            if self.eta != 1 or self.theta != 0.0:
                raise InvalidSpecError("position events fix eta=+1 and theta=0")
        elif self.eta not in (1, -1):
            raise InvalidSpecError("spin results must be +1 or -1")
        object.__setattr__(self, "eta", int(self.eta))
        object.__setattr__(self, "u", canonical_angle(float(self.u)))
        object.__setattr__(self, "theta", canonical_angle(float(self.theta)))
        if self.u_bc is not None:
            object.__setattr__(self, "u_bc", canonical_angle(float(self.u_bc)))
        if self.site is not None:
            object.__setattr__(self, "site", int(self.site))

    @property
    def u_ca(self) -> float:
        if self.u_bc is None:
            raise InvalidSpecError("event carries no three-mode coordinates")
        return canonical_angle(-(self.u + self.u_bc))


def three_mode_event(u_ab: float, u_bc: float, u_ca: Optional[float] = None) -> DetectionEvent:
    """Position event for three plane waves; ``u_ca`` is checked if supplied."""
    if u_ca is not None:
        resid = canonical_angle(u_ab + u_bc + u_ca)
        if min(resid, TWO_PI - resid) > 1e-9:
            raise InvalidSpecError("reduced coordinates must satisfy u_ab + u_bc + u_ca = 0 mod 2π")
    return DetectionEvent("position", u=u_ab, u_bc=u_bc)


@dataclass(frozen=True)
class PhaseDistribution:
    """Density on the uniform grid ``phi_j = 2π j / M`` (1-D) or its square (2-D)."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values, float)
        if v.ndim not in (1, 2) or (v.ndim == 2 and v.shape[0] != v.shape[1]):
            raise InvalidSpecError("phase density must be 1-D or square 2-D")
        if v.shape[0] < 16:
            raise InvalidSpecError("phase grid needs at least 16 points per dimension")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidSpecError("phase density must be finite and nonnegative")
        object.__setattr__(self, "values", v)
        if abs(self.mass() - 1.0) > 1e-12:
            raise InvalidSpecError(f"phase density not normalized (mass = {self.mass():.15g})")

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def step(self) -> float:
        return TWO_PI / self.M

    @property
    def cell(self) -> float:
        return self.step**self.dim

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.M) * self.step

    def mass(self) -> float:
        return float(self.values.sum() * self.cell)

    @classmethod
    def from_unnormalized(cls, values) -> "PhaseDistribution":
        v = np.asarray(values, dtype=float)
        mass = v.sum() * (TWO_PI / v.shape[0]) ** v.ndim
        if not mass > 0:
            raise InvalidSpecError("density has no mass")
        return cls(v / mass)

    @classmethod
    def uniform(cls, M: int, dim: int = 1) -> "PhaseDistribution":
        return cls(np.full((M,) * dim, 1.0 / TWO_PI**dim))

    @classmethod
    def point_mass(cls, M: int, phi: float) -> "PhaseDistribution":
        """All mass on the grid point nearest to ``phi`` (1-D)."""
        v = np.zeros(M)
        v[int(round(canonical_angle(phi) / (TWO_PI / M))) % M] = M / TWO_PI
        return cls(v)

    def reflected(self) -> "PhaseDistribution":
        """The density of ``-phi`` (grid index ``j -> -j mod M`` on every axis)."""
        v = self.values
        for ax in range(v.ndim):
            v = np.roll(np.flip(v, axis=ax), 1, axis=ax)
        return PhaseDistribution(v)

    def rotated(self, shift: int) -> "PhaseDistribution":
        """Circular shift by ``shift`` grid cells (1-D)."""
        return PhaseDistribution(np.roll(self.values, shift))


@dataclass(frozen=True)
class MeasurementRecord:
    """Ordered events plus the posterior after each of them."""

    events: tuple
    snapshots: tuple
    seed: Optional[int]
    policy: str
    prior: PhaseDistribution = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if len(self.events) != len(self.snapshots):
            raise InvalidSpecError("one posterior snapshot is required per event")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def final(self) -> PhaseDistribution:
        return self.snapshots[-1] if self.snapshots else self.prior

