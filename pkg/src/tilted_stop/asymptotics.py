"""Large-n behaviour for parametric tilt sequences q_n = a n^alpha (log n)^beta.

:func:`classify` maps a sequence to one of nine regimes (labelled i..ix),
each with its asymptotically optimal cutoff rule and limiting success
probability.  :func:`expected_lr_asymptotic` gives the leading-order mean of
the left-to-right minimum count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import DomainError

INV_E = math.exp(-1.0)
FLOOR_SLACK = 1e-12

REGIMES = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix")


@dataclass(frozen=True)
class QSequenceSpec:
    """q_n = a * n**alpha * (log n)**beta for n >= 2, and q_1 = a."""

    a: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self) -> None:
        for name in ("a", "alpha", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.a <= 0:
            raise DomainError(f"a must be positive, got {self.a!r}")

    def q(self, n: int) -> float:
        if n < 1:
            raise DomainError("n must be ≥ 1")
        if n == 1:
            return self.a
        try:
            q = self.a * float(n) ** self.alpha * math.log(n) ** self.beta
        except OverflowError:
            q = math.inf
        if not (0.0 < q < math.inf):
            # extreme exponents: only the log of q_n is representable
            log_q = math.log(self.a) + self.alpha * math.log(n)
            log_q += self.beta * math.log(math.log(n))
            q = math.exp(max(-700.0, min(700.0, log_q)))
        return q


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _clamp(m: int, n: int) -> int:
    return max(0, min(n - 1, m))


def regime_vii_window(a: float) -> int:
    """The integer L >= 2 with 1/L <= a < 1/(L-1), for 0 < a < 1."""
    if not 0 < a < 1:
        raise DomainError(f"the step window needs 0 < a < 1, got {a!r}")
    L = max(2, math.ceil(1.0 / a))
    # 1/a is rounded; settle the boundary on the products instead
    while a * L < 1.0:
        L += 1
    while L > 2 and a * (L - 1) >= 1.0:
        L -= 1
    return L


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    limit_prob: float
    mstar_rule: str
    spec: QSequenceSpec
    L: Optional[int] = None
    notes: str = ""
    limit_fraction: float = field(default=0.0)

    def m_rec(self, n: int) -> int:
        """Concrete cutoff recommended at finite n, clamped to [0, n-1]."""
        if n < 1:
            raise DomainError("n must be ≥ 1")
        if n == 1:
            return 0
        q = self.spec.q(n)
        r = self.regime
        if r in ("i", "ii", "iii"):
            m = 0
        elif r in ("iv", "v"):
            m = _round_half_up(n * math.exp(-1.0 / q))
        elif r == "vi":
            m = n - _round_half_up(n / q)
        elif r == "vii":
            m = n - self.L
        else:
            m = n - 1
        return _clamp(m, n)

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime,
            "L": self.L,
            "limit_prob": self.limit_prob,
            "mstar_rule": self.mstar_rule,
            "limit_fraction": self.limit_fraction,
            "notes": self.notes,
            "a": self.spec.a,
            "alpha": self.spec.alpha,
            "beta": self.spec.beta,
        }
        return out


def classify(spec: QSequenceSpec) -> RegimeReport:
    a, alpha, beta = spec.a, spec.alpha, spec.beta

    def report(regime, limit, rule, L=None, notes="", fraction=0.0):
        return RegimeReport(regime, limit, rule, spec, L, notes, fraction)

    if alpha < 0 or (alpha == 0 and beta < -1):
        return report("i", 1.0, "M* = 0", notes="choose the first item")
    if alpha == 0 and beta == -1:
        if a < 1:
            return report("ii", math.exp(-a), "M* = 0", notes="choose the first item")
        if a == 1:
            return report(
                "iii",
                INV_E,
                "M* = 0 (recommended)",
                notes=(
                    "not unique: any fixed M* = k, or M* -> infinity with "
                    "log M* / log n -> 0, is also asymptotically optimal"
                ),
            )
        return report("iv", INV_E, "M* = round(n exp(-1/q_n)), q_n log(n/M*) ~ 1")
    if alpha == 0 and -1 < beta < 0:
        return report("iv", INV_E, "M* = round(n exp(-1/q_n)), q_n log(n/M*) ~ 1")
    if alpha == 0 and beta == 0:
        return report(
            "v", INV_E, "M* = round(n exp(-1/q))", fraction=math.exp(-1.0 / a)
        )
    if (alpha == 0 and beta > 0) or 0 < alpha < 1 or (alpha == 1 and beta < 0):
        return report("vi", INV_E, "M* = n - round(n/q_n)", fraction=1.0)
    if alpha == 1 and beta == 0:
        if a < 1:
            L = regime_vii_window(a)
            return report(
                "vii", a * L / (1.0 + a) ** L, f"M* = n - {L}", L=L, fraction=1.0
            )
        return report(
            "viii", a / (1.0 + a), "M* = n - 1", notes="choose the last item",
            fraction=1.0,
        )
    return report("ix", 1.0, "M* = n - 1", notes="choose the last item", fraction=1.0)


def limiting_probability_floor_check(report: RegimeReport) -> bool:
    """Is the limiting success probability at least 1/e?"""
    return report.limit_prob >= INV_E - FLOOR_SLACK


def expected_lr_asymptotic(spec: QSequenceSpec, n: int) -> float:
    """Leading-order mean number of left-to-right minima at size n."""
    if n < 2:
        raise DomainError("the asymptotic mean needs n ≥ 2")
    a, alpha, beta = spec.a, spec.alpha, spec.beta
    q = spec.q(n)
    if alpha < 0 or (alpha == 0 and beta < -1):
        return 1.0
    if alpha == 0 and beta == -1:
        return 1.0 + a
    if alpha == 0 and -1 < beta <= 0:
        return q * math.log(n)
    if (alpha == 0 and beta > 0) or 0 < alpha < 1 or (alpha == 1 and beta < 0):
        return q * math.log((n + q) / (1.0 + q))
    if alpha == 1 and beta == 0:
        return a * math.log((1.0 + a) / a) * n
    return float(n)
