"""
Formal S-Matrix Words

Words in formal S-matrices S(g)^{+1/-1} whose arguments are rational
combinations of named time profiles. A small rewrite system built on
causal factorization,

    S(f + g + h) = S(f + g) S(g)^-1 S(g + h)    when f is later than h,

normalizes words and records every step together with the support facts
that licensed it. Proofs are traces that reduce lhs * rhs^-1 to the
empty word; replay re-derives every fact from the actual profiles.
"""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

# Handle both direct execution and package imports
try:
    from .exceptions import DomainError, ProofFailure
    from .time_profiles import (
        Interval, Rational, TimeProfile, as_fraction, causally_later, is_time_cutoff,
        psi_decomposition,
    )
except ImportError:
    from exceptions import DomainError, ProofFailure
    from time_profiles import (
        Interval, Rational, TimeProfile, as_fraction, causally_later, is_time_cutoff,
        psi_decomposition,
    )

logger = logging.getLogger(__name__)

DEFAULT_STEP_BUDGET = 10000
DEFAULT_SEARCH_DEPTH = 2
SEARCH_NODE_LIMIT = 5000

Licensing = Callable[[TimeProfile, TimeProfile], bool]


# --- Profile expressions -----------------------------------------------------

@dataclass(frozen=True)
class Atom:
    """Named exact profile."""
    name: str
    profile: TimeProfile

    def translate(self, shift: Rational) -> "Atom":
        shift = as_fraction(shift)
        if shift == 0:
            return self
        return Atom(f"{self.name}@{shift}", self.profile.translate(shift))


def _format_coefficient(k: Fraction, name: str, first: bool) -> str:
    sign = "-" if k < 0 else ("" if first else "+")
    magnitude = abs(k)
    body = name if magnitude == 1 else f"{magnitude}*{name}"
    return sign + body


@dataclass(frozen=True)
class ProfileExpr:
    """Formal rational combination of atoms; ``profile`` is its evaluation."""
    terms: Tuple[Tuple[Atom, Fraction], ...] = ()
    profile: TimeProfile = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        combined: Dict[str, Tuple[Atom, Fraction]] = {}
        for atom, k in self.terms:
            k = as_fraction(k)
            if atom.name in combined:
                known, total = combined[atom.name]
                if known.profile != atom.profile:
                    raise DomainError(f"Atom {atom.name!r} used with two different profiles")
                combined[atom.name] = (known, total + k)
            else:
                combined[atom.name] = (atom, k)
        terms = tuple(sorted(((a, k) for a, k in combined.values() if k != 0),
                             key=lambda term: term[0].name))
        object.__setattr__(self, "terms", terms)
        profile = TimeProfile.zero()
        for atom, k in terms:
            profile = profile + atom.profile.scale(k)
        object.__setattr__(self, "profile", profile)

    @classmethod
    def of(cls, atom: Atom, coefficient: Rational = 1) -> "ProfileExpr":
        return cls(((atom, as_fraction(coefficient)),))

    def coefficient(self, name: str) -> Fraction:
        for atom, k in self.terms:
            if atom.name == name:
                return k
        return Fraction(0)

    def __add__(self, other: "ProfileExpr") -> "ProfileExpr":
        return ProfileExpr(self.terms + other.terms)

    def __neg__(self) -> "ProfileExpr":
        return self.scale(-1)

    def __sub__(self, other: "ProfileExpr") -> "ProfileExpr":
        return self + (-other)

    def scale(self, factor: Rational) -> "ProfileExpr":
        k = as_fraction(factor)
        return ProfileExpr(tuple((a, k * c) for a, c in self.terms))

    def translate(self, shift: Rational) -> "ProfileExpr":
        return ProfileExpr(tuple((a.translate(shift), k) for a, k in self.terms))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return "".join(_format_coefficient(k, a.name, i == 0) for i, (a, k) in enumerate(self.terms))


@dataclass(frozen=True, eq=False)
class Letter:
    """S(expr) or S(expr)^-1; letters compare by the evaluated profile."""
    expr: ProfileExpr
    exponent: int = 1

    def __post_init__(self):
        if self.exponent not in (1, -1):
            raise DomainError(f"Letter exponent must be +1 or -1, got {self.exponent}")

    def inverse(self) -> "Letter":
        return Letter(self.expr, -self.exponent)

    def translate(self, shift: Rational) -> "Letter":
        return Letter(self.expr.translate(shift), self.exponent)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Letter) and self.exponent == other.exponent
                and self.expr.profile == other.expr.profile)

    def __hash__(self) -> int:
        return hash((self.expr.profile, self.exponent))

    def __str__(self) -> str:
        return f"S({self.expr})" + ("" if self.exponent == 1 else "^-1")


@dataclass(frozen=True)
class SWord:
    """Ordered product of letters; the empty word is the unit."""
    letters: Tuple[Letter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(self.letters))

    def __mul__(self, other: "SWord") -> "SWord":
        return SWord(self.letters + other.letters)

    def inverse(self) -> "SWord":
        return SWord(tuple(letter.inverse() for letter in reversed(self.letters)))

    def translate(self, shift: Rational) -> "SWord":
        return SWord(tuple(letter.translate(shift) for letter in self.letters))

    def is_empty(self) -> bool:
        return not self.letters

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return " ".join(str(letter) for letter in self.letters) if self.letters else "1"


def s_matrix(expr: ProfileExpr) -> SWord:
    return SWord((Letter(expr, 1),))


def relative_s_matrix(g: ProfileExpr, f: ProfileExpr) -> SWord:
    """S_g(f) = S(g)^-1 S(g + f)."""
    return SWord((Letter(g, -1), Letter(g + f, 1)))


# --- Rules -----------------------------------------------------------------

@dataclass(frozen=True)
class SupportFact:
    """``later`` lies strictly after ``earlier`` in time."""
    later: str
    earlier: str
    later_support: Optional[Interval]
    earlier_support: Optional[Interval]

    @classmethod
    def of(cls, later: ProfileExpr, earlier: ProfileExpr) -> "SupportFact":
        return cls(str(later), str(earlier), later.profile.support(), earlier.profile.support())

    def __str__(self) -> str:
        def span(s):
            return "[]" if s is None else str(s)
        return f"{self.later}{span(self.later_support)} > {self.earlier}{span(self.earlier_support)}"


@dataclass(frozen=True)
class Application:
    """Result of firing a rule: replacement for letters [start, stop)."""
    start: int
    stop: int
    replacement: Tuple[Letter, ...]
    facts: Tuple[SupportFact, ...] = ()
    params: Tuple = ()


class Rule:
    """A rewrite rule; ``search_only`` rules never fire during normalization."""
    name = ""
    search_only = False

    def apply(self, letters: Sequence[Letter], i: int, licensed: Licensing,
              params: Tuple = ()) -> Optional[Application]:
        raise NotImplementedError


class UnitDeletion(Rule):
    name = "unit-deletion"

    def apply(self, letters, i, licensed, params=()):
        if letters[i].expr.profile.is_zero():
            return Application(i, i + 1, ())
        return None


class InverseCancellation(Rule):
    name = "inverse-cancellation"

    def apply(self, letters, i, licensed, params=()):
        if i + 1 < len(letters) and letters[i] == letters[i + 1].inverse():
            return Application(i, i + 2, ())
        return None


def _triple(letters, i, signs) -> Optional[Tuple[ProfileExpr, ProfileExpr, ProfileExpr]]:
    if i + 2 >= len(letters):
        return None
    window = letters[i:i + 3]
    if tuple(letter.exponent for letter in window) != signs:
        return None
    return tuple(letter.expr for letter in window)


class CausalMerge(Rule):
    """S(a) S(b)^-1 S(c) -> S(a - b + c) when a - b is later than c - b."""
    name = "causal-merge"

    def apply(self, letters, i, licensed, params=()):
        triple = _triple(letters, i, (1, -1, 1))
        if triple is None:
            return None
        a, b, c = triple
        f, h = a - b, c - b
        if not licensed(f.profile, h.profile):
            return None
        return Application(i, i + 3, (Letter(a - b + c, 1),), (SupportFact.of(f, h),))


class InverseMerge(Rule):
    """S(a)^-1 S(b) S(c)^-1 -> S(a - b + c)^-1 when c - b is later than a - b."""
    name = "inverse-merge"

    def apply(self, letters, i, licensed, params=()):
        triple = _triple(letters, i, (-1, 1, -1))
        if triple is None:
            return None
        a, b, c = triple
        f, h = c - b, a - b
        if not licensed(f.profile, h.profile):
            return None
        return Application(i, i + 3, (Letter(a - b + c, -1),), (SupportFact.of(f, h),))


class RelativeReduction(Rule):
    """S(a)^-1 S(b) -> S(a - kX)^-1 S(b - kX) for a common term kX later than b - a."""
    name = "relative-reduction"

    def apply(self, letters, i, licensed, params=()):
        if i + 1 >= len(letters) or (letters[i].exponent, letters[i + 1].exponent) != (-1, 1):
            return None
        a, b = letters[i].expr, letters[i + 1].expr
        difference = b - a
        for atom, k in a.terms:
            if params and params != (atom.name,):
                continue
            if b.coefficient(atom.name) != k:
                continue
            term = ProfileExpr.of(atom, k)
            if licensed(term.profile, difference.profile):
                return Application(i, i + 2, (Letter(a - term, -1), Letter(b - term, 1)),
                                   (SupportFact.of(term, difference),), (atom.name,))
        return None


class CausalSplit(Rule):
    """S(p) -> S(p - h) S(p - f - h)^-1 S(p - f), and its inverse, for f later than h."""
    name = "causal-split"
    search_only = True

    def apply(self, letters, i, licensed, params=()):
        if len(params) != 2:
            return None
        f, h = params
        if not licensed(f.profile, h.profile):
            return None
        p = letters[i].expr
        if letters[i].exponent == 1:
            replacement = (Letter(p - h, 1), Letter(p - f - h, -1), Letter(p - f, 1))
        else:
            replacement = (Letter(p - f, -1), Letter(p - f - h, 1), Letter(p - h, -1))
        return Application(i, i + 1, replacement, (SupportFact.of(f, h),), (f, h))


@dataclass(frozen=True)
class RuleTable:
    """Rules in firing priority and the causal licensing predicate."""
    rules: Tuple[Rule, ...]
    licensing: Licensing = causally_later

    def rule(self, name: str) -> Rule:
        for rule in self.rules:
            if rule.name == name:
                return rule
        raise ProofFailure(f"Unknown rule {name!r}")

    @property
    def normalizing(self) -> Tuple[Rule, ...]:
        return tuple(r for r in self.rules if not r.search_only)


SOUND_RULES = RuleTable((UnitDeletion(), InverseCancellation(), CausalMerge(), InverseMerge(),
                         RelativeReduction(), CausalSplit()))


def corrupted_rule_table() -> RuleTable:
    """Negative control: every causal licensing is inverted."""
    return RuleTable(SOUND_RULES.rules, licensing=lambda f, h: causally_later(h, f))


# --- Traces ----------------------------------------------------------------

@dataclass(frozen=True)
class RewriteStep:
    index: int
    rule: str
    start: int
    stop: int
    before: SWord
    after: SWord
    facts: Tuple[SupportFact, ...] = ()
    params: Tuple = ()

    def to_line(self) -> str:
        facts = "; ".join(str(f) for f in self.facts) or "-"
        return f"{self.index}\t{self.rule}\t{self.start}:{self.stop}\t{self.before}\t{self.after}\t{facts}"


@dataclass
class ProofTrace:
    start: SWord
    steps: List[RewriteStep] = field(default_factory=list)
    name: str = ""

    @property
    def end(self) -> SWord:
        return self.steps[-1].after if self.steps else self.start

    def to_text(self) -> str:
        lines = [f"# start\t{self.start}"]
        lines.extend(step.to_line() for step in self.steps)
        lines.append(f"# end\t{self.end}")
        return "\n".join(lines) + "\n"

    def __len__(self) -> int:
        return len(self.steps)


def _fire(word: SWord, rule: Rule, application: Application, index: int) -> RewriteStep:
    letters = word.letters
    after = SWord(letters[:application.start] + application.replacement + letters[application.stop:])
    return RewriteStep(index, rule.name, application.start, application.stop, word, after,
                       application.facts, application.params)


def _renumber(steps: Sequence[RewriteStep]) -> List[RewriteStep]:
    return [replace(step, index=k) for k, step in enumerate(steps)]


def normalize(word: SWord, table: RuleTable = SOUND_RULES,
              step_budget: int = DEFAULT_STEP_BUDGET) -> Tuple[SWord, ProofTrace]:
    """Apply rules leftmost first, in table order at each position, until none fires."""
    trace = ProofTrace(start=word)
    current = word
    while True:
        step = None
        for i in range(len(current)):
            for rule in table.normalizing:
                application = rule.apply(current.letters, i, table.licensing)
                if application is not None:
                    step = _fire(current, rule, application, len(trace.steps))
                    break
            if step is not None:
                break
        if step is None:
            return current, trace
        trace.steps.append(step)
        current = step.after
        if len(trace.steps) >= step_budget:
            raise ProofFailure(f"Step budget {step_budget} exhausted while normalizing",
                               residual=str(current))


def replay(trace: ProofTrace, table: RuleTable = SOUND_RULES) -> SWord:
    """Re-apply every step and re-derive its support facts; returns the end word."""
    current = trace.start
    for step in trace.steps:
        if current.letters != step.before.letters:
            raise ProofFailure(f"Step {step.index} starts from {step.before}, trace is at {current}",
                               residual=str(current))
        rule = table.rule(step.rule)
        application = rule.apply(current.letters, step.start, table.licensing, step.params)
        if application is None or application.stop != step.stop:
            raise ProofFailure(f"Step {step.index} ({step.rule}) is not licensed", residual=str(current))
        redone = _fire(current, rule, application, step.index)
        if redone.after.letters != step.after.letters:
            raise ProofFailure(f"Step {step.index} ({step.rule}) yields {redone.after}, recorded {step.after}",
                               residual=str(current))
        if tuple(map(str, redone.facts)) != tuple(map(str, step.facts)):
            raise ProofFailure(f"Step {step.index} ({step.rule}) support facts do not re-verify",
                               residual=str(current))
        current = redone.after
    return current


# --- Proof search ----------------------------------------------------------

def _split_candidates(letter: Letter, licensed: Licensing) -> List[Tuple[ProfileExpr, ProfileExpr]]:
    pieces: List[ProfileExpr] = []
    for atom, k in letter.expr.terms:
        pieces.append(ProfileExpr.of(atom, k))
        for suffix, part in (("<0", atom.profile.chop_past()), (">0", atom.profile.chop_future())):
            if not part.is_zero() and part != atom.profile:
                pieces.append(ProfileExpr.of(Atom(atom.name + suffix, part), k))
    pairs = []
    for f in pieces:
        for h in pieces:
            if f is h or f.profile.is_zero() or h.profile.is_zero():
                continue
            if licensed(f.profile, h.profile):
                pairs.append((f, h))
    return pairs


def _center_cancellation(lhs: SWord) -> ProofTrace:
    trace = ProofTrace(start=lhs * lhs.inverse())
    current = trace.start
    rule = SOUND_RULES.rule("inverse-cancellation")
    for k in range(len(lhs)):
        centre = len(lhs) - 1 - k
        step = _fire(current, rule, Application(centre, centre + 2, ()), k)
        trace.steps.append(step)
        current = step.after
    return trace


def prove_equal(lhs: SWord, rhs: SWord, depth: int = DEFAULT_SEARCH_DEPTH,
                table: RuleTable = SOUND_RULES, step_budget: int = DEFAULT_STEP_BUDGET,
                name: str = "") -> ProofTrace:
    """Reduce lhs * rhs^-1 to the empty word; raises ProofFailure when inconclusive."""
    if depth < 0:
        raise DomainError(f"Search depth must be >= 0, got {depth}")
    if lhs.letters == rhs.letters:
        trace = _center_cancellation(lhs)
        trace.name = name
        return trace

    goal = lhs * rhs.inverse()
    try:
        reduced, trace = normalize(goal, table, step_budget)
    except ProofFailure as e:
        logger.debug(f"normalization of {name or 'goal'} hit the budget: {e}")
        reduced, trace = None, None
    if reduced is not None and reduced.is_empty():
        trace.name = name
        logger.debug(f"{name or 'goal'}: closed by normalization in {len(trace)} steps")
        return trace

    if reduced is not None and depth > 0:
        nodes = [0]
        split = table.rule("causal-split")

        def search(word: SWord, steps: List[RewriteStep], remaining: int) -> Optional[List[RewriteStep]]:
            for i, letter in enumerate(word.letters):
                for f, h in _split_candidates(letter, table.licensing):
                    nodes[0] += 1
                    if nodes[0] > SEARCH_NODE_LIMIT:
                        return None
                    application = split.apply(word.letters, i, table.licensing, (f, h))
                    if application is None:
                        continue
                    step = _fire(word, split, application, 0)
                    try:
                        result, tail = normalize(step.after, table, step_budget)
                    except ProofFailure:
                        continue
                    found = steps + [step] + tail.steps
                    if result.is_empty():
                        return found
                    if remaining > 1:
                        deeper = search(result, found, remaining - 1)
                        if deeper is not None:
                            return deeper
            return None

        found = search(reduced, list(trace.steps), depth)
        if found is not None:
            logger.debug(f"{name or 'goal'}: closed by split search after {nodes[0]} candidates")
            return ProofTrace(start=goal, steps=_renumber(found), name=name)

    residual = str(reduced) if reduced is not None else str(goal)
    raise ProofFailure(f"Could not reduce {name or 'goal'} to the unit (depth {depth})", residual=residual)


# --- Identity corpus -------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    name: str
    lhs: SWord
    rhs: SWord


def _expr(*atoms: Atom) -> ProfileExpr:
    total = ProfileExpr()
    for atom in atoms:
        total = total + ProfileExpr.of(atom)
    return total


def factorization_atoms(epsilon: Rational) -> Tuple[Atom, Atom, Atom]:
    """(f, g, h) with f later than h and a broad background g."""
    eps = as_fraction(epsilon)
    f = Atom("f", TimeProfile.polyline([(eps, 0), (3 * eps / 2, 1), (2 * eps, 0)]))
    g = Atom("g", TimeProfile.trapezoid(3 * eps, 4 * eps))
    h = Atom("h", TimeProfile.polyline([(-2 * eps, 0), (-3 * eps / 2, 1), (-eps, 0)]))
    return f, g, h


def factorization_identities(epsilon: Rational) -> List[Identity]:
    f, g, h = factorization_atoms(epsilon)
    F, G, H = _expr(f), _expr(g), _expr(h)
    identities = [
        Identity("causal-factorization", s_matrix(F + G + H),
                 s_matrix(F + G) * s_matrix(G).inverse() * s_matrix(G + H)),
        Identity("relative-additivity", relative_s_matrix(G, F + H),
                 relative_s_matrix(G, F) * relative_s_matrix(G, H)),
        Identity("later-background-drop", relative_s_matrix(G + F, H), relative_s_matrix(G, H)),
        Identity("relative-conjugation", relative_s_matrix(G + H, F),
                 relative_s_matrix(G, H).inverse() * relative_s_matrix(G, F) * relative_s_matrix(G, H)),
    ]
    return identities


def time_slice_identity(epsilon: Rational) -> Identity:
    """S_g(f) = S_{g chi}(g chi_-)^-1 S_{g chi}(f) S_{g chi}(g chi_-) for f in the slice.

    g is 1 on the support of chi, so g chi = chi and g chi_- is the past
    part of g - chi.
    """
    eps = as_fraction(epsilon)
    chi = TimeProfile.chi(eps)
    g = TimeProfile.trapezoid(3 * eps, 4 * eps)
    rest = g - chi
    X = _expr(Atom("chi", chi))
    GM = _expr(Atom("gm", rest.chop_past()))
    GP = _expr(Atom("gp", rest.chop_future()))
    F = _expr(Atom("f", TimeProfile.polyline([(-eps / 2, 0), (0, 1), (eps / 2, 0)])))
    lhs = relative_s_matrix(X + GM + GP, F)
    rhs = relative_s_matrix(X, GM).inverse() * relative_s_matrix(X, F) * relative_s_matrix(X, GM)
    return Identity("time-slice", lhs, rhs)


def cocycle_identity(t: Rational, s: Rational, epsilon: Rational) -> Identity:
    """U(t + s) = U(t) alpha_t(U(s)) with U(tau) = S_chi(psi^-_tau)."""
    t, s = as_fraction(t), as_fraction(s)
    chi = TimeProfile.chi(epsilon)
    _, past_t = psi_decomposition(chi, t)
    _, past_s = psi_decomposition(chi, s)
    _, past_ts = psi_decomposition(chi, t + s)
    X = ProfileExpr.of(Atom("chi", chi))
    lhs = relative_s_matrix(X, ProfileExpr.of(Atom("r", past_ts)))
    rhs = (relative_s_matrix(X, ProfileExpr.of(Atom("p", past_t)))
           * relative_s_matrix(X, ProfileExpr.of(Atom("q", past_s))).translate(t))
    return Identity(f"cocycle(t={t},s={s})", lhs, rhs)


def chi_equivalence_identity(chi: TimeProfile, chi_prime: TimeProfile, t: Rational,
                             epsilon: Rational) -> Identity:
    """U'(t) = V^-1 U(t) alpha_t(V) with V = S_chi(sigma^-), sigma^- the past part of chi' - chi."""
    t = as_fraction(t)
    for label, profile in (("chi", chi), ("chi'", chi_prime)):
        if not is_time_cutoff(profile, epsilon):
            raise DomainError(f"{label} is not a time-slice cutoff for epsilon={epsilon}")
    _, past = psi_decomposition(chi, t)
    _, past_prime = psi_decomposition(chi_prime, t)
    sigma = chi_prime - chi
    X = ProfileExpr.of(Atom("chi", chi))
    SP = ProfileExpr.of(Atom("sp", sigma.chop_future()))
    SM = ProfileExpr.of(Atom("sm", sigma.chop_past()))
    lhs = relative_s_matrix(X + SP + SM, ProfileExpr.of(Atom("p'", past_prime)))
    v = relative_s_matrix(X, SM)
    rhs = v.inverse() * relative_s_matrix(X, ProfileExpr.of(Atom("p", past))) * v.translate(t)
    return Identity(f"chi-equivalence(t={t})", lhs, rhs)


def alternative_cutoff(epsilon: Rational) -> TimeProfile:
    """Cutoff that is 1 on [-eps, eps] with outer breakpoints at +-3 eps / 2."""
    eps = as_fraction(epsilon)
    return TimeProfile.trapezoid(eps, 3 * eps / 2)


COCYCLE_CASES = (("1/4", "1/4"), ("1/4", "-1/8"), ("1/3", "1/6"))


def identity_corpus(epsilon: Rational = 1) -> List[Identity]:
    """Every identity the engine is expected to prove."""
    eps = as_fraction(epsilon)
    corpus = factorization_identities(eps)
    corpus.append(time_slice_identity(eps))
    for t, s in COCYCLE_CASES:
        corpus.append(cocycle_identity(as_fraction(t) * eps, as_fraction(s) * eps, eps))
    chi, chi_prime = TimeProfile.chi(eps), alternative_cutoff(eps)
    t = eps / 4
    forward = chi_equivalence_identity(chi, chi_prime, t, eps)
    swapped = chi_equivalence_identity(chi_prime, chi, t, eps)
    corpus.append(forward)
    corpus.append(Identity(swapped.name + "-swapped", swapped.lhs, swapped.rhs))
    return corpus


def cocycle_check(t: Rational, s: Rational, epsilon: Rational = 1,
                  depth: int = DEFAULT_SEARCH_DEPTH, table: RuleTable = SOUND_RULES) -> ProofTrace:
    identity = cocycle_identity(t, s, epsilon)
    trace = prove_equal(identity.lhs, identity.rhs, depth, table, name=identity.name)
    replay(trace)
    return trace


def chi_equivalence_check(chi: TimeProfile, chi_prime: TimeProfile, t: Rational,
                          epsilon: Rational = 1, depth: int = DEFAULT_SEARCH_DEPTH,
                          table: RuleTable = SOUND_RULES) -> ProofTrace:
    identity = chi_equivalence_identity(chi, chi_prime, t, epsilon)
    trace = prove_equal(identity.lhs, identity.rhs, depth, table, name=identity.name)
    replay(trace)
    return trace


@dataclass(frozen=True)
class VerificationResult:
    name: str
    passed: bool
    steps: int
    trace: Optional[ProofTrace] = None
    error: Optional[str] = None


def verify_corpus(identities: Sequence[Identity], depth: int = DEFAULT_SEARCH_DEPTH,
                  table: RuleTable = SOUND_RULES,
                  step_budget: int = DEFAULT_STEP_BUDGET) -> List[VerificationResult]:
    """Prove each identity with ``table`` and replay the trace against the sound rules."""
    results = []
    for identity in identities:
        try:
            trace = prove_equal(identity.lhs, identity.rhs, depth, table, step_budget, identity.name)
            replay(trace)
            results.append(VerificationResult(identity.name, True, len(trace), trace))
            logger.info(f"identity {identity.name}: proved in {len(trace)} steps")
        except ProofFailure as e:
            results.append(VerificationResult(identity.name, False, 0, None, str(e)))
            logger.info(f"identity {identity.name}: FAILED ({e})")
    return results


# --- Randomized expansion --------------------------------------------------

def random_atom(rng: np.random.Generator, name: str, lower: int, upper: int,
                denominator: int = 4) -> Atom:
    """Trapezoid atom with rational breakpoints inside [lower, upper]."""
    grid = sorted(rng.choice(np.arange(lower * denominator, upper * denominator + 1), 4, replace=False))
    xs = [Fraction(int(x), denominator) for x in grid]
    height = Fraction(int(rng.integers(1, 4)))
    return Atom(name, TimeProfile.polyline([(xs[0], 0), (xs[1], height), (xs[2], height), (xs[3], 0)]))


def random_word(rng: np.random.Generator, length: int) -> SWord:
    """All-positive word of broad, overlapping letters."""
    letters = []
    for k in range(length):
        base = ProfileExpr.of(random_atom(rng, f"w{k}", -6, 6))
        letters.append(Letter(base + ProfileExpr.of(random_atom(rng, f"v{k}", -6, 6)), 1))
    return SWord(tuple(letters))


def random_expansion(word: SWord, rng: np.random.Generator, steps: int) -> SWord:
    """Apply ``steps`` licensed splits to original letters and insert S(q) S(q)^-1 pairs between blocks."""
    blocks: List[Tuple[Letter, ...]] = [(letter,) for letter in word.letters]
    split = SOUND_RULES.rule("causal-split")
    for k in range(steps):
        candidates = [i for i, block in enumerate(blocks) if len(block) == 1 and block[0].exponent == 1]
        if candidates and rng.random() < 0.6:
            i = int(rng.choice(candidates))
            h = ProfileExpr.of(random_atom(rng, f"h{k}", -5, -1))
            f = ProfileExpr.of(random_atom(rng, f"f{k}", 1, 5))
            application = split.apply(blocks[i], 0, causally_later, (f, h))
            blocks[i] = application.replacement
        else:
            q = Letter(ProfileExpr.of(random_atom(rng, f"q{k}", -4, 4)), 1)
            position = int(rng.integers(0, len(blocks) + 1))
            blocks.insert(position, (q, q.inverse()))
    return SWord(tuple(letter for block in blocks for letter in block))
