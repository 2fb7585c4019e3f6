"""Variables, bad events, the dependency graph and the derived LLL parameters.

Probabilities are kept as :class:`fractions.Fraction` whenever the caller
supplies rationals; floats are accepted everywhere and compared with a relative
tolerance of ``FLOAT_TOL``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Callable, Mapping, Sequence

from .errors import InputError

FLOAT_TOL = 1e-9

Prob = Fraction | float


def is_exact(value) -> bool:
    return isinstance(value, Rational)


def exact_rational(value) -> Fraction | None:
    """``value`` as a Fraction when it is rational with a small denominator."""
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float) and math.isfinite(value):
        num, den = value.as_integer_ratio()
        if den <= 64:
            return Fraction(num, den)
    return None


def snap_ceil(value: float) -> int:
    nearest = round(value)
    if abs(value - nearest) < FLOAT_TOL:
        return int(nearest)
    return math.ceil(value)


@dataclass(frozen=True)
class Variable:
    id: int
    domain: tuple[tuple[Any, Prob], ...]

    def __post_init__(self):
        if not self.domain:
            raise InputError(f"variable {self.id} has an empty domain")
        total = 0
        for _, p in self.domain:
            if not p > 0:
                raise InputError(f"variable {self.id} has a non-positive probability")
            total += p
        if abs(total - 1) > 1e-12:
            raise InputError(f"variable {self.id}: probabilities sum to {total}")

    @classmethod
    def uniform(cls, id: int, values: Sequence = (0, 1)) -> "Variable":
        p = Fraction(1, len(values))
        return cls(id, tuple((v, p) for v in values))

    @property
    def values(self) -> tuple:
        return tuple(v for v, _ in self.domain)

    @property
    def probs(self) -> tuple:
        return tuple(p for _, p in self.domain)

    def __len__(self):
        return len(self.domain)


@dataclass(frozen=True, eq=False)
class BadEvent:
    """A bad event determined by the variables in ``scope``.

    ``happens`` receives a mapping (or a list indexed by variable id) holding
    at least the scope values.  ``cond_prob`` receives a dict of fixed values,
    which may mention variables outside the scope, and returns the conditional
    probability of the event given those values.
    """

    id: int
    scope: frozenset[int]
    happens: Callable[[Any], bool]
    cond_prob: Callable[[Mapping[int, Any]], Prob]
    dt_complexity: int | None = None
    name: str | None = None

    @property
    def vbl(self) -> tuple[int, ...]:
        return tuple(sorted(self.scope))

    def probability(self) -> Prob:
        return self.cond_prob({})

    def __repr__(self):
        return f"BadEvent({self.name or self.id}, scope={self.vbl})"


def enumerated_cond_prob(scope, predicate, variables: Sequence[Variable]):
    """Build a conditional-probability oracle by enumerating unfixed scope values."""
    vbl = tuple(sorted(scope))

    def cond_prob(fixed):
        free = [p for p in vbl if p not in fixed]
        values = dict((p, fixed[p]) for p in vbl if p in fixed)
        total = 0
        for combo in itertools.product(*(variables[p].domain for p in free)):
            weight = 1
            for p, (v, q) in zip(free, combo):
                values[p] = v
                weight = weight * q
            if predicate(values):
                total = total + weight
        return total

    return cond_prob


def predicate_event(id: int, scope, predicate, variables, dt_complexity=None, name=None) -> BadEvent:
    """A BadEvent whose conditional probabilities come from brute-force enumeration."""
    scope = frozenset(scope)
    return BadEvent(
        id,
        scope,
        predicate,
        enumerated_cond_prob(scope, predicate, variables),
        dt_complexity=dt_complexity,
        name=name,
    )


@dataclass(frozen=True, eq=False)
class EventSystem:
    variables: tuple[Variable, ...]
    events: tuple[BadEvent, ...]
    gamma_adjacency: tuple[frozenset[int], ...]
    var_events: tuple[frozenset[int], ...] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def m(self) -> int:
        return len(self.events)

    @property
    def D(self) -> int:
        return max((len(v) for v in self.variables), default=1)

    def gamma(self, a: int) -> frozenset[int]:
        return self.gamma_adjacency[a]

    def gamma_plus(self, a: int) -> frozenset[int]:
        return self.gamma_adjacency[a] | {a}

    def touching(self, var_subset) -> frozenset[int]:
        """Events whose scope intersects ``var_subset``."""
        out = set()
        for p in var_subset:
            out |= self.var_events[p]
        return frozenset(out)

    def adjacent(self, a: int, b: int) -> bool:
        return b in self.gamma_adjacency[a]

    def happening(self, values) -> list[int]:
        return [e.id for e in self.events if e.happens(values)]


def build_event_system(variables: Sequence[Variable], events: Sequence[BadEvent]) -> EventSystem:
    """Assemble an :class:`EventSystem` and its dependency graph.

    Variable and event ids must be dense and match their list positions.
    """
    variables = tuple(variables)
    events = tuple(events)
    for i, v in enumerate(variables):
        if v.id != i:
            raise InputError(f"variable at position {i} has id {v.id}")
    var_events = [set() for _ in variables]
    for i, e in enumerate(events):
        if e.id != i:
            raise InputError(f"event at position {i} has id {e.id}")
        for p in e.scope:
            if not 0 <= p < len(variables):
                raise InputError(f"event {e.id} references unknown variable {p}")
            var_events[p].add(i)
    adjacency = []
    for e in events:
        nbrs = set()
        for p in e.scope:
            nbrs |= var_events[p]
        nbrs.discard(e.id)
        adjacency.append(frozenset(nbrs))
    return EventSystem(variables, events, tuple(adjacency), tuple(frozenset(s) for s in var_events))


def _check_x(system: EventSystem, x) -> tuple:
    x = tuple(x)
    if len(x) != system.m:
        raise InputError(f"x has {len(x)} entries for {system.m} events")
    for a, xa in enumerate(x):
        if not 0 < xa < 1:
            raise InputError(f"x({a}) = {xa} is outside (0, 1)")
    return x


def _check_epsilon(epsilon):
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")


def x_prime(system: EventSystem, x) -> tuple:
    out = []
    for a in range(system.m):
        v = x[a]
        for b in sorted(system.gamma(a)):
            v = v * (1 - x[b])
        out.append(v)
    return tuple(out)


def power_at_most(base, lhs, exponent) -> bool:
    """Decide ``lhs <= base ** exponent`` (exactly when all three are rational)."""
    e = exact_rational(exponent)
    if is_exact(base) and is_exact(lhs) and e is not None:
        base, lhs = Fraction(base), Fraction(lhs)
        if lhs <= 0:
            return True
        # lhs <= base^(p/q)  <=>  lhs^q <= base^p
        return lhs ** e.denominator <= base ** e.numerator
    bound = float(base) ** float(exponent)
    return float(lhs) <= bound * (1 + FLOAT_TOL)


@dataclass(frozen=True)
class EventSlack:
    event: int
    probability: Prob
    bound: float
    ok: bool


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    epsilon: Any
    entries: tuple[EventSlack, ...]

    def violations(self) -> list[EventSlack]:
        return [e for e in self.entries if not e.ok]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "epsilon": float(self.epsilon),
            "events": [
                {"event": e.event, "probability": float(e.probability), "bound": e.bound, "ok": e.ok}
                for e in self.entries
            ],
        }


def validate_lll_condition(system: EventSystem, x, epsilon) -> ValidationReport:
    """Check ``Pr[A] <= x'(A)^(1+epsilon)`` for every event.

    ``Pr[A]`` is read from each event's conditional-probability oracle with
    nothing fixed.
    """
    x = _check_x(system, x)
    _check_epsilon(epsilon)
    xp = x_prime(system, x)
    exponent = 1 + (exact_rational(epsilon) if exact_rational(epsilon) is not None else epsilon)
    entries = []
    for e in system.events:
        pr = e.cond_prob({})
        ok = power_at_most(xp[e.id], pr, exponent)
        entries.append(EventSlack(e.id, pr, float(xp[e.id]) ** float(exponent), ok))
    return ValidationReport(all(s.ok for s in entries), epsilon, tuple(entries))


@dataclass(frozen=True)
class LLLParams:
    x: tuple
    epsilon: Any
    x_prime: tuple
    w: tuple[float, ...]
    heavy_set: frozenset[int]
    M: Any
    gamma: float
    w_min: float
    D: int
    split_size: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.x)

    @property
    def table_width(self) -> int:
        """Columns per variable: ceil(2*gamma / w_min) + 1."""
        if not self.x:
            return 1
        return snap_ceil(2 * self.gamma / self.w_min) + 1

    @property
    def max_rounds(self) -> int:
        if not self.x:
            return 1
        return max(1, snap_ceil(self.gamma / self.w_min))

    @property
    def enumeration_bound(self) -> float:
        return float(self.M) ** (2 * (1 + 1 / float(self.epsilon)))

    def _exact_ratio(self, xprod):
        eps = exact_rational(self.epsilon)
        if xprod is None or eps is None or not is_exact(self.M) or not is_exact(xprod):
            return None
        return eps

    def at_least_gamma(self, weight: float, xprod=None) -> bool:
        """Whether a tree of the given weight (product of x' values) reaches gamma."""
        if abs(weight - self.gamma) > 1e-6:
            return weight > self.gamma
        eps = self._exact_ratio(xprod)
        if eps is None:
            return weight >= self.gamma - FLOAT_TOL
        # -log2 P >= log2 M / eps  <=>  (1/P)^p >= M^q
        inv = 1 / Fraction(xprod)
        return inv ** eps.numerator >= Fraction(self.M) ** eps.denominator

    def at_most_two_gamma(self, weight: float, xprod=None) -> bool:
        if abs(weight - 2 * self.gamma) > 1e-6:
            return weight < 2 * self.gamma
        eps = self._exact_ratio(xprod)
        if eps is None:
            return weight <= 2 * self.gamma + FLOAT_TOL
        inv = 1 / Fraction(xprod)
        return inv ** eps.numerator <= Fraction(self.M) ** (2 * eps.denominator)

    @property
    def window_top(self) -> float:
        """Upper edge of the F2 weight window: gamma + max(gamma, heaviest w in the heavy set).

        This is 2*gamma whenever every heavy event weighs at most gamma, which
        always holds for epsilon < 1 (w(A) <= log2(4m) < log2(M)/epsilon).
        For larger epsilon a least-weight occurring tree of weight >= gamma can
        reach gamma + w(v) through a single heavy root child v.
        """
        top = max((self.w[a] for a in self.heavy_set), default=0.0)
        return self.gamma + max(self.gamma, top)

    def in_window(self, weight: float, xprod=None) -> bool:
        if not self.at_least_gamma(weight, xprod):
            return False
        top = self.window_top
        if top <= 2 * self.gamma + FLOAT_TOL:
            return self.at_most_two_gamma(weight, xprod)
        return weight <= top + FLOAT_TOL

    def to_json(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "M": float(self.M),
            "gamma": self.gamma,
            "w_min": self.w_min,
            "D": self.D,
            "m": self.m,
            "heavy": len(self.heavy_set),
            "table_width": self.table_width,
        }


def derive_params(system: EventSystem, x, epsilon, split_sizes=None) -> LLLParams:
    """Compute x', weights, the heavy set, M, gamma and w_min.

    ``split_sizes[A]`` replaces the ``2|vbl(A)|`` factor in the definition of
    M; by default that factor is used unchanged.  Validation of the LLL
    condition is left to the caller.
    """
    x = _check_x(system, x)
    _check_epsilon(epsilon)
    if split_sizes is None:
        split_sizes = tuple(2 * len(e.scope) for e in system.events)
    split_sizes = tuple(split_sizes)
    xp = x_prime(system, x)
    m = system.m
    w = tuple(-math.log2(v) for v in xp)
    threshold = Fraction(1, 4 * m) if m else 0
    heavy = frozenset(a for a in range(m) if xp[a] >= threshold)
    total = 0
    for a in sorted(heavy):
        if is_exact(x[a]):
            total += 4 * split_sizes[a] / Fraction(xp[a]) * Fraction(x[a]) / (1 - Fraction(x[a]))
        else:
            total += 4 * split_sizes[a] / float(xp[a]) * float(x[a]) / (1 - float(x[a]))
    M = max(system.n, 4 * m, total)
    if isinstance(M, Fraction) and M.denominator == 1:
        M = int(M)
    gamma = math.log2(M) / float(epsilon) if M > 0 else 0.0
    w_min = min(w) if w else math.inf
    return LLLParams(
        x=x,
        epsilon=epsilon,
        x_prime=xp,
        w=w,
        heavy_set=heavy,
        M=M,
        gamma=gamma,
        w_min=w_min,
        D=system.D,
        split_size=split_sizes,
    )
