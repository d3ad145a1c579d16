"""Potential sequences V_n for the operator families H = V + Delta.

Phases on the circle are held as 64-bit fixed-point integers (units of
2**-64 of a turn).  Unsigned 64-bit arithmetic wraps modulo 2**64, which is
exactly reduction mod 1, so n**2 * omega + n*y + x is evaluated without any
rounding no matter how large n gets.  Only the final conversion to an angle
rounds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from math import comb

import mpmath
import numpy as np

FIXED_BITS = 64
ONE = 1 << FIXED_BITS
MASK = ONE - 1
_TO_TURNS = 2.0 ** -FIXED_BITS
TWO_PI = 2.0 * math.pi

# Past this many doublings the 53-bit mantissa of a double omega is exhausted.
DOUBLING_WARN_STEP = 50


def _golden_fixed() -> int:
    # (sqrt(5) - 1)/2 * 2**64, correctly rounded, from an integer square root
    k = 80
    s = math.isqrt(5 << (2 * k))
    num = (s - (1 << k)) << (FIXED_BITS - 1)
    return ((num + (1 << (k - 1))) >> k) & MASK


GOLDEN_FIXED = _golden_fixed()


def to_fixed(r) -> int:
    """Fixed-point representation of frac(r); accepts float, int, str, Decimal, Fraction."""
    if isinstance(r, str):
        token = r.strip().lower()
        if token in ("golden", "golden-mean"):
            return GOLDEN_FIXED
        r = Decimal(token)
    f = Fraction(r) % 1
    return round(f * ONE) & MASK


def fixed_to_float(v: int) -> float:
    return (v & MASK) * _TO_TURNS


def fixed_to_decimal(v: int) -> str:
    """Exact decimal expansion of v / 2**64 (terminates; at most 64 digits)."""
    v &= MASK
    if v == 0:
        return "0"
    digits = str(v * 5 ** FIXED_BITS).rjust(FIXED_BITS, "0")
    return ("0." + digits).rstrip("0")


@dataclass(frozen=True)
class Frequency:
    """Frequency omega reduced mod 1, stored as an exact fixed-point fraction."""

    fixed: int

    def __post_init__(self):
        object.__setattr__(self, "fixed", self.fixed & MASK)

    @classmethod
    def from_real(cls, r) -> "Frequency":
        return cls(to_fixed(r))

    @classmethod
    def golden(cls) -> "Frequency":
        return cls(GOLDEN_FIXED)

    @property
    def omega(self) -> float:
        return fixed_to_float(self.fixed)

    def __str__(self):
        return fixed_to_decimal(self.fixed)


@dataclass(frozen=True)
class PhasePoint:
    """Point (x, y) of the 2-torus, fixed-point coordinates."""

    xf: int = 0
    yf: int = 0

    def __post_init__(self):
        object.__setattr__(self, "xf", self.xf & MASK)
        object.__setattr__(self, "yf", self.yf & MASK)

    @classmethod
    def from_reals(cls, x=0.0, y=0.0) -> "PhasePoint":
        return cls(to_fixed(x), to_fixed(y))

    @property
    def x(self) -> float:
        return fixed_to_float(self.xf)

    @property
    def y(self) -> float:
        return fixed_to_float(self.yf)

    def flipped(self) -> "PhasePoint":
        """(x + 1/2, y): conjugates the skew-shift and Harper windows to their negatives."""
        return PhasePoint(self.xf + (ONE >> 1), self.yf)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


class Family(str, Enum):
    HARPER = "harper"
    SKEW_SHIFT = "skew-shift"
    SKEW_SHIFT_ORDER = "skew-shift-order"
    POWER_BETA = "power-beta"
    DOUBLING_MAP = "doubling-map"
    CAT_MAP = "cat-map"
    CONSTANT = "constant"
    IID_RANDOM = "iid-random"


# families whose window [a, a+N) is the window [0, N) of a shifted phase
SHIFTABLE = frozenset(
    {
        Family.HARPER,
        Family.SKEW_SHIFT,
        Family.SKEW_SHIFT_ORDER,
        Family.DOUBLING_MAP,
        Family.CAT_MAP,
        Family.CONSTANT,
    }
)
ONE_SIDED = frozenset({Family.POWER_BETA, Family.DOUBLING_MAP})


@dataclass(frozen=True)
class PotentialSpec:
    """A named rule producing V_n.

    Cosine families give V_n = 2*lam*cos(2*pi*theta_n) with

    * harper:            theta_n = n*omega + x
    * skew-shift:        theta_n = n**2*omega + n*y + x
    * skew-shift-order:  theta_n = n**k*omega + sum_{2<=i<k} c_i n**i + n*y + x
    * doubling-map:      theta_n = 2**n * (omega/2 + x)     (n >= 0)
    * cat-map:           theta_n = first coordinate of A**n (x, y)

    power-beta uses V_n = 2*lam*cos(n**beta) with no 2*pi factor, constant is
    V_n = c, and iid-random draws V_n = lam * U[low, high] from a counter-based
    generator keyed by (seed, n).
    """

    family: Family
    lam: float = 1.0
    omega: Frequency = field(default_factory=Frequency.golden)
    phase: PhasePoint = field(default_factory=PhasePoint)
    order: int = 2
    extra: tuple[int, ...] = ()
    beta: float = 2.5
    matrix: tuple[int, int, int, int] = (2, 1, 1, 1)
    c: float = 0.0
    low: float = -2.0
    high: float = 2.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        fam = self.family
        if fam is Family.SKEW_SHIFT_ORDER:
            if self.order < 2:
                raise ValueError("skew-shift order must be >= 2")
            extra = tuple(int(v) & MASK for v in self.extra)
            if len(extra) > max(self.order - 2, 0):
                raise ValueError(f"order {self.order} takes at most {self.order - 2} extra coefficients")
            extra = extra + (0,) * (self.order - 2 - len(extra))
            object.__setattr__(self, "extra", extra)
        if fam is Family.POWER_BETA:
            if not self.beta > 1:
                raise ValueError("power-beta needs beta > 1")
            if float(self.beta).is_integer():
                raise ValueError("power-beta needs non-integer beta")
        if fam is Family.CAT_MAP:
            a, b, c, d = (int(v) for v in self.matrix)
            object.__setattr__(self, "matrix", (a, b, c, d))
            if a * d - b * c != 1:
                raise ValueError("cat-map matrix must have determinant 1")
            if abs(a + d) <= 2:
                warnings.warn("cat-map matrix is not hyperbolic (|trace| <= 2)", stacklevel=2)
        if fam is Family.IID_RANDOM:
            if not (-2.0 <= self.low < self.high <= 2.0):
                raise ValueError("iid-random bounds must satisfy -2 <= low < high <= 2")

    @property
    def bound(self) -> float:
        """Sup-norm bound on |V_n|."""
        if self.family is Family.CONSTANT:
            return abs(self.c)
        if self.family is Family.IID_RANDOM:
            return abs(self.lam) * max(abs(self.low), abs(self.high))
        return 2.0 * abs(self.lam)


def harper(lam=1.0, x=0.0, omega=None) -> PotentialSpec:
    om = Frequency.golden() if omega is None else _as_frequency(omega)
    return PotentialSpec(Family.HARPER, lam=lam, omega=om, phase=PhasePoint.from_reals(x, 0.0))


def skew_shift(lam=1.0, x=0.0, y=0.0, omega=None) -> PotentialSpec:
    om = Frequency.golden() if omega is None else _as_frequency(omega)
    return PotentialSpec(Family.SKEW_SHIFT, lam=lam, omega=om, phase=PhasePoint.from_reals(x, y))


def constant(c=0.0) -> PotentialSpec:
    return PotentialSpec(Family.CONSTANT, c=c)


def _as_frequency(omega) -> Frequency:
    return omega if isinstance(omega, Frequency) else Frequency.from_real(omega)


# --------------------------------------------------------------------------
# scalar path (Python integers, exact)


def _check_index(spec: PotentialSpec, n: int) -> None:
    if spec.family in ONE_SIDED and n < 0:
        raise ValueError(f"{spec.family.value} potential is one-sided; got n={n}")


def _poly_phase(spec: PotentialSpec, n: int) -> int:
    """theta_n in fixed point for the polynomial (Harper/skew-shift) families."""
    fam = spec.family
    x, y, w = spec.phase.xf, spec.phase.yf, spec.omega.fixed
    if fam is Family.HARPER:
        return (n * w + x) & MASK
    if fam is Family.SKEW_SHIFT:
        return (n * n * w + n * y + x) & MASK
    total = pow(n, spec.order) * w + n * y + x
    for i, ci in enumerate(spec.extra, start=2):
        total += ci * n**i
    return total & MASK


def _doubling_phase(spec: PotentialSpec, n: int) -> Fraction:
    if n > DOUBLING_WARN_STEP:
        warnings.warn(
            f"doubling-map step {n} exceeds {DOUBLING_WARN_STEP}: base-point precision exhausted",
            stacklevel=3,
        )
    base = (spec.omega.fixed + 2 * spec.phase.xf) % (ONE << 1)  # units of 2**-65
    return Fraction((base << n) % (ONE << 1), ONE << 1) if n < 200 else Fraction(0)


def _cat_point(spec: PotentialSpec, n: int) -> int:
    a, b, c, d = spec.matrix
    if n < 0:
        a, b, c, d, n = d, -b, -c, a, -n
    # exponentiation by squaring, entries mod 2**64
    ra, rb, rc, rd = 1, 0, 0, 1
    pa, pb, pc, pd = a, b, c, d
    while n:
        if n & 1:
            ra, rb, rc, rd = (
                (ra * pa + rb * pc) & MASK,
                (ra * pb + rb * pd) & MASK,
                (rc * pa + rd * pc) & MASK,
                (rc * pb + rd * pd) & MASK,
            )
        pa, pb, pc, pd = (
            (pa * pa + pb * pc) & MASK,
            (pa * pb + pb * pd) & MASK,
            (pc * pa + pd * pc) & MASK,
            (pc * pb + pd * pd) & MASK,
        )
        n >>= 1
    return (ra * spec.phase.xf + rb * spec.phase.yf) & MASK


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _uniform_key(seed: int) -> int:
    return _splitmix64(seed & MASK)


def _fixed_cos(theta: int, lam: float) -> float:
    # signed representative keeps the angle in [-pi, pi)
    t = theta - ONE if theta >= (ONE >> 1) else theta
    return 2.0 * lam * math.cos(TWO_PI * (t * _TO_TURNS))


def potential_value(spec: PotentialSpec, n: int) -> float:
    """V_n for the given family."""
    n = int(n)
    _check_index(spec, n)
    fam = spec.family
    if fam in (Family.HARPER, Family.SKEW_SHIFT, Family.SKEW_SHIFT_ORDER):
        return _fixed_cos(_poly_phase(spec, n), spec.lam)
    if fam is Family.CAT_MAP:
        return _fixed_cos(_cat_point(spec, n), spec.lam)
    if fam is Family.DOUBLING_MAP:
        f = _doubling_phase(spec, n)
        t = f - 1 if f >= Fraction(1, 2) else f
        return 2.0 * spec.lam * math.cos(TWO_PI * float(t))
    if fam is Family.POWER_BETA:
        with mpmath.workdps(40):
            return 2.0 * spec.lam * float(mpmath.cos(mpmath.power(n, mpmath.mpf(spec.beta))))
    if fam is Family.CONSTANT:
        return float(spec.c)
    if fam is Family.IID_RANDOM:
        u = (_splitmix64(_uniform_key(spec.seed) ^ (n & MASK)) >> 11) * 2.0**-53
        return spec.lam * (spec.low + (spec.high - spec.low) * u)
    raise AssertionError(fam)


# --------------------------------------------------------------------------
# vector path (numpy uint64, wraps mod 2**64 exactly)


def _u64(v: int) -> np.uint64:
    return np.uint64(v & MASK)


def _fixed_cos_array(theta: np.ndarray, lam: float) -> np.ndarray:
    turns = theta.view(np.int64).astype(np.float64) * _TO_TURNS
    return 2.0 * lam * np.cos(TWO_PI * turns)


def _splitmix64_array(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def phase_window(spec: PotentialSpec, n0: int, N: int) -> np.ndarray:
    """Fixed-point phases theta_{n0..n0+N-1} (uint64) for the polynomial families."""
    n = (np.arange(N, dtype=np.int64) + np.int64(n0)).view(np.uint64)
    x, y, w = _u64(spec.phase.xf), _u64(spec.phase.yf), _u64(spec.omega.fixed)
    if spec.family is Family.HARPER:
        return n * w + x
    if spec.family is Family.SKEW_SHIFT:
        # theta_{n+1} - theta_n = (2n+1) omega + y: the second difference is the
        # constant 2*omega; evaluating the closed form in wrapping arithmetic
        # gives the same integers without a serial dependence
        return n * n * w + n * y + x
    if spec.family is Family.SKEW_SHIFT_ORDER:
        total = n * y + x
        npow = n * n
        for ci in spec.extra:
            total = total + npow * _u64(ci)
            npow = npow * n
        return total + npow * w
    raise ValueError(f"{spec.family.value} has no polynomial phase")


def potential_window(spec: PotentialSpec, n0: int, N: int) -> np.ndarray:
    """[V_{n0}, ..., V_{n0+N-1}]."""
    if N < 1:
        raise ValueError("window length must be >= 1")
    n0 = int(n0)
    _check_index(spec, n0)
    fam = spec.family
    if fam in (Family.HARPER, Family.SKEW_SHIFT, Family.SKEW_SHIFT_ORDER):
        return _fixed_cos_array(phase_window(spec, n0, N), spec.lam)
    if fam is Family.CONSTANT:
        return np.full(N, float(spec.c))
    if fam is Family.IID_RANDOM:
        n = (np.arange(N, dtype=np.int64) + np.int64(n0)).view(np.uint64)
        u = (_splitmix64_array(n ^ _u64(_uniform_key(spec.seed))) >> np.uint64(11)).astype(np.float64)
        u *= 2.0**-53
        return spec.lam * (spec.low + (spec.high - spec.low) * u)
    if fam is Family.CAT_MAP:
        a, b, c, d = (_u64(v) for v in spec.matrix)
        out = np.empty(N, dtype=np.uint64)
        start = _cat_state(spec, n0)
        px, py = np.uint64(start[0]), np.uint64(start[1])
        with np.errstate(over="ignore"):
            for i in range(N):
                out[i] = px
                px, py = a * px + b * py, c * px + d * py
        return _fixed_cos_array(out, spec.lam)
    if fam is Family.DOUBLING_MAP:
        return np.array([potential_value(spec, n) for n in range(n0, n0 + N)])
    if fam is Family.POWER_BETA:
        return np.array([potential_value(spec, n) for n in range(n0, n0 + N)])
    raise AssertionError(fam)


def _cat_state(spec: PotentialSpec, n: int) -> tuple[int, int]:
    x = _cat_point(spec, n)
    swapped = replace(spec, phase=PhasePoint(spec.phase.yf, spec.phase.xf), matrix=_swap(spec.matrix))
    return x, _cat_point(swapped, n)


def _swap(m):
    # conjugating by the coordinate swap exposes the second row as a first row
    a, b, c, d = m
    return (d, c, b, a)


# --------------------------------------------------------------------------


def shifted_spec(spec: PotentialSpec, a: int) -> PotentialSpec:
    """Spec whose sequence is V_{n+a}: the phase moved by a steps of the family's map."""
    a = int(a)
    fam = spec.family
    if fam not in SHIFTABLE:
        raise ValueError(f"{fam.value} has no underlying dynamics to shift")
    if a == 0 or fam is Family.CONSTANT:
        return spec
    x, y, w = spec.phase.xf, spec.phase.yf, spec.omega.fixed
    if fam is Family.HARPER:
        return replace(spec, phase=PhasePoint(x + a * w, y))
    if fam is Family.SKEW_SHIFT:
        # T(x, y) = (x + y + omega, y + 2 omega), iterated a times
        return replace(spec, phase=PhasePoint(x + a * y + a * a * w, y + 2 * a * w))
    if fam is Family.SKEW_SHIFT_ORDER:
        coeffs = [x, y, *spec.extra, w]
        k = spec.order
        new = [sum(coeffs[i] * comb(i, m) * a ** (i - m) for i in range(m, k + 1)) & MASK for m in range(k + 1)]
        return replace(spec, phase=PhasePoint(new[0], new[1]), extra=tuple(new[2:k]))
    if fam is Family.CAT_MAP:
        nx, ny = _cat_state(spec, a)
        return replace(spec, phase=PhasePoint(nx, ny))
    if fam is Family.DOUBLING_MAP:
        if a < 0:
            raise ValueError("doubling map is not invertible; shift must be >= 0")
        base = (w + 2 * x) % (ONE << 1)
        moved = (base << a) % (ONE << 1)  # even for a >= 1, so it fits 64 bits
        return replace(spec, omega=Frequency(0), phase=PhasePoint(moved >> 1, y))
    raise AssertionError(fam)


# --------------------------------------------------------------------------
# flat key-value serialization

_FAMILY_KEYS = {
    Family.HARPER: ("lambda", "omega", "x"),
    Family.SKEW_SHIFT: ("lambda", "omega", "x", "y"),
    Family.SKEW_SHIFT_ORDER: ("lambda", "omega", "x", "y", "order", "extra"),
    Family.POWER_BETA: ("lambda", "beta"),
    Family.DOUBLING_MAP: ("lambda", "omega", "x"),
    Family.CAT_MAP: ("lambda", "x", "y", "matrix"),
    Family.CONSTANT: ("c",),
    Family.IID_RANDOM: ("lambda", "low", "high", "seed"),
}
ALL_KEYS = frozenset({"family"}.union(*_FAMILY_KEYS.values()))


def spec_to_config(spec: PotentialSpec) -> dict[str, str]:
    """Flat string mapping; reals are written losslessly."""
    values = {
        "lambda": repr(float(spec.lam)),
        "omega": fixed_to_decimal(spec.omega.fixed),
        "x": fixed_to_decimal(spec.phase.xf),
        "y": fixed_to_decimal(spec.phase.yf),
        "order": str(spec.order),
        "extra": ",".join(fixed_to_decimal(v) for v in spec.extra),
        "beta": repr(float(spec.beta)),
        "matrix": ",".join(str(v) for v in spec.matrix),
        "c": repr(float(spec.c)),
        "low": repr(float(spec.low)),
        "high": repr(float(spec.high)),
        "seed": str(spec.seed),
    }
    out = {"family": spec.family.value}
    out.update({k: values[k] for k in _FAMILY_KEYS[spec.family]})
    return out


def spec_from_config(section: dict[str, str]) -> PotentialSpec:
    """Inverse of spec_to_config; missing keys take the dataclass defaults."""
    section = {k.strip().lower(): str(v).strip() for k, v in section.items()}
    if "family" not in section:
        raise ValueError("potential section needs a 'family' key")
    fam = Family(section["family"].lower())
    allowed = set(_FAMILY_KEYS[fam]) | {"family"}
    unknown = set(section) - allowed
    if unknown:
        raise ValueError(f"keys {sorted(unknown)} not valid for family {fam.value}")
    kw: dict = {"family": fam}
    if "lambda" in section:
        kw["lam"] = float(section["lambda"])
    if "omega" in section:
        kw["omega"] = Frequency(to_fixed(section["omega"]))
    if "x" in section or "y" in section:
        kw["phase"] = PhasePoint(to_fixed(section.get("x", "0")), to_fixed(section.get("y", "0")))
    if "order" in section:
        kw["order"] = int(section["order"])
    if section.get("extra"):
        kw["extra"] = tuple(to_fixed(v) for v in section["extra"].split(","))
    if "beta" in section:
        kw["beta"] = float(section["beta"])
    if "matrix" in section:
        entries = tuple(int(v) for v in section["matrix"].split(","))
        if len(entries) != 4:
            raise ValueError("matrix needs 4 comma-separated integers a,b,c,d")
        kw["matrix"] = entries
    for key in ("c", "low", "high"):
        if key in section:
            kw[key] = float(section[key])
    if "seed" in section:
        kw["seed"] = int(section["seed"])
    return PotentialSpec(**kw)
