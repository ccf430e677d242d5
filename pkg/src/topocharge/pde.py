"""PDE records and restriction of expressions to the solution surface.

A PDE ``G = 0`` carries a solved form ``leading = rhs`` used to evaluate
expressions on solutions: every occurrence of the leading derivative and
its differential consequences is replaced by the corresponding total
derivative of ``rhs``, iterated to a fixed point.

The substitution also supports a ledger mode which records every
replacement as ``coefficient * D^K G``, yielding the operator ``R(G)`` of
a divergence-type identity constructively: the invariant

    e  ==  substitute(e) + expand(R)

holds exactly off solutions, where ``expand`` maps the formal jet ``G_K``
back to ``D^K`` of the defining expression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .jetexpr import (
    JetExpr,
    Rat,
    ZERO_MI,
    _merge_pow,
    divergence,
    substitute_depvar,
    total_derivative,
    total_derivative_mi,
)
from .parsing import SymbolTable, default_symbols

G_DEP = "G"


class SubstitutionDepthExceeded(RuntimeError):
    """Fixed point not reached; the leading derivative is mis-declared."""


class PdeError(ValueError):
    pass


@dataclass(frozen=True)
class DivForm:
    """First-order divergence presentation: factor * (D_k u_t - Div F) == G."""

    k_axis: int
    F: tuple
    factor: JetExpr


@dataclass(frozen=True)
class PdeSpec:
    name: str
    dim: int
    G: JetExpr
    leading: tuple  # jet key, e.g. ("u", (1, 1, 0, 0))
    rhs: JetExpr
    factor: JetExpr  # unit with G == factor * (leading - rhs)
    div_form: DivForm | None = None
    symbols: SymbolTable = field(default_factory=default_symbols)

    def __post_init__(self):
        dep, mi = self.leading
        lead_expr = JetExpr.jet(dep, mi)
        if not (self.G - self.factor * (lead_expr - self.rhs)).is_zero():
            raise PdeError(
                f"{self.name}: G does not equal factor*(leading - rhs) canonically"
            )
        for key in self.rhs.jet_keys():
            if key[0] == dep and all(a >= b for a, b in zip(key[1], mi)):
                raise PdeError(
                    f"{self.name}: rhs contains the leading derivative or a "
                    f"differential consequence ({key})"
                )
        if self.div_form is not None:
            ut = JetExpr.jet(dep, (1, 0, 0, 0))
            lhs = total_derivative(ut, self.div_form.k_axis)
            div = divergence(list(self.div_form.F), self.dim)
            if not (self.G - self.div_form.factor * (lhs - div)).is_zero():
                raise PdeError(f"{self.name}: declared divergence form does not match G")

    def ut_flux(self) -> tuple:
        """The spatial-flux vector u_t k_hat - F of the divergence form."""
        if self.div_form is None:
            raise PdeError(f"{self.name} has no first-order divergence form")
        ut = JetExpr.jet("u", (1, 0, 0, 0))
        comps = []
        for i in range(1, self.dim + 1):
            comp = ut if i == self.div_form.k_axis else JetExpr.zero()
            comps.append(comp - self.div_form.F[i - 1])
        return tuple(comps)


def substitute_on_solutions(
    e: JetExpr, pde: PdeSpec, max_steps: int = 200_000
) -> JetExpr:
    result, _ = substitute_with_ledger(e, pde, max_steps=max_steps, ledger=False)
    return result


def substitute_with_ledger(
    e: JetExpr, pde: PdeSpec, max_steps: int = 200_000, ledger: bool = True
) -> tuple[JetExpr, JetExpr]:
    """Restrict to solutions; optionally return R with e == e|_E + expand(R).

    R is a JetExpr linear in jets of the formal dependent variable ``G``;
    ``G_K`` stands for ``D^K G``.
    """
    dep, lead_mi = pde.leading
    inv_factor = JetExpr.number(1) / pde.factor
    dcache: dict[tuple, JetExpr] = {ZERO_MI: pde.rhs}
    ledger_pairs: list[tuple[Rat, tuple]] = []
    done: dict[tuple, Rat] = {}
    pending = list(e.terms)
    steps = 0
    while pending:
        mono, coeff = pending.pop()
        hit = None
        for key, _p in mono[1]:
            if key[0] == dep and all(a >= b for a, b in zip(key[1], lead_mi)):
                hit = key
                break
        if hit is None:
            c0 = done.get(mono, Rat(0)) + coeff
            if c0:
                done[mono] = c0
            else:
                done.pop(mono, None)
            continue
        steps += 1
        if steps > max_steps:
            raise SubstitutionDepthExceeded(
                f"{pde.name}: substitution did not reach a fixed point in "
                f"{max_steps} steps"
            )
        K = tuple(a - b for a, b in zip(hit[1], lead_mi))
        repl = dcache.get(K)
        if repl is None:
            repl = total_derivative_mi(pde.rhs, K)
            dcache[K] = repl
        rest = (mono[0], _merge_pow(mono[1], hit, -1), mono[2], mono[3])
        rest_expr = JetExpr(((rest, coeff),))
        pending.extend((rest_expr * repl).terms)
        if ledger:
            g_term = rest_expr * inv_factor * JetExpr.jet(G_DEP, K)
            ledger_pairs.extend((c, m) for m, c in g_term.terms)
    result = JetExpr(tuple(sorted(done.items(), key=lambda it: it[0])))
    r_expr = JetExpr.from_pairs(ledger_pairs) if ledger else JetExpr.zero()
    return result, r_expr


def expand_r_operator(r: JetExpr, pde: PdeSpec) -> JetExpr:
    """Replace formal jets G_K by D^K of the PDE's defining expression."""
    return substitute_depvar(r, G_DEP, pde.G)
