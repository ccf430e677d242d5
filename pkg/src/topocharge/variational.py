"""Euler operators, total-divergence tests, and divergence inversion.

The inversion works by exact linear algebra over a bounded polynomial
ansatz.  Candidate monomials are generated from the target by repeatedly
lowering spatial derivative indices and raising explicit-variable powers
(one-step antiderivatives), closed under the new monomials produced by
differentiating the candidates.  Ties between witnesses are broken by
solving in a fixed monomial order with free coefficients pinned to zero,
which makes the output deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .jetexpr import (
    JetExpr,
    Rat,
    T,
    _merge_pow,
    mi_bump,
    mi_order,
    total_derivative,
    total_derivative_mi,
    divergence,
)


class AnsatzExhausted(RuntimeError):
    """No witness exists within the current degree/order/round bounds."""


@dataclass(frozen=True)
class DivergenceWitness:
    components: tuple
    role: str  # "spatial" or "spacetime"
    residual: JetExpr

    def __iter__(self):
        return iter(self.components)


# -- Euler operators ---------------------------------------------------------


def euler_u(e: JetExpr, dep: str = "u") -> JetExpr:
    """Full variational derivative: sum over J of (-D)^J d e/d u_J."""
    from .jetexpr import diff_jet

    out = JetExpr.zero()
    for key in sorted(e.jet_keys()):
        if key[0] != dep:
            continue
        partial = diff_jet(e, key)
        sign = -1 if mi_order(key[1]) % 2 else 1
        out = out + sign * total_derivative_mi(partial, key[1])
    return out


def spatial_euler(e: JetExpr, dep: str = "u", t_order: int = 0) -> JetExpr:
    """Spatial Euler operator for the field ``d_t^t_order dep``.

    Pure time derivatives of the dependent variable count as independent
    fields, so only jets with exactly `t_order` time derivatives
    contribute, and only spatial total derivatives are applied.
    """
    from .jetexpr import diff_jet

    out = JetExpr.zero()
    for key in sorted(e.jet_keys()):
        if key[0] != dep or key[1][T] != t_order:
            continue
        spatial_mi = (0,) + key[1][1:]
        partial = diff_jet(e, key)
        sign = -1 if mi_order(spatial_mi) % 2 else 1
        out = out + sign * total_derivative_mi(partial, spatial_mi)
    return out


def _fun_spatial_euler(e: JetExpr, name: str, sig: tuple, t_orders: tuple) -> JetExpr:
    """Spatial Euler operator for an arbitrary-function field."""
    from .jetexpr import diff_fun

    out = JetExpr.zero()
    for key in sorted(e.fun_keys()):
        if key[0] != name:
            continue
        orders = key[2]
        key_t = tuple(o for ax, o in zip(sig, orders) if ax == T)
        if key_t != t_orders:
            continue
        mi = [0, 0, 0, 0]
        for ax, o in zip(sig, orders):
            if ax != T:
                mi[ax] += o
        partial = diff_fun(e, key)
        sign = -1 if mi_order(mi) % 2 else 1
        out = out + sign * total_derivative_mi(partial, tuple(mi))
    return out


def spatial_euler_residuals(e: JetExpr) -> dict:
    """All field-wise spatial Euler images; a divergence iff all vanish."""
    residuals = {}
    dep_fields = {(k[0], k[1][T]) for k in e.jet_keys()}
    for dep, t_ord in sorted(dep_fields):
        r = spatial_euler(e, dep, t_ord)
        if not r.is_zero():
            residuals[(dep, t_ord)] = r
    fun_fields = set()
    for key in e.fun_keys():
        name, sig, orders, _rule = key
        spatial_sig = [ax for ax in sig if ax != T]
        if not spatial_sig:
            continue  # time-only functions ride along as coefficients
        t_orders = tuple(o for ax, o in zip(sig, orders) if ax == T)
        fun_fields.add((name, sig, t_orders))
    for name, sig, t_orders in sorted(fun_fields):
        r = _fun_spatial_euler(e, name, sig, t_orders)
        if not r.is_zero():
            residuals[(name, t_orders)] = r
    return residuals


def is_total_spatial_divergence(e: JetExpr, dim: int) -> bool:
    """True iff every field-wise spatial Euler operator annihilates `e`."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return not spatial_euler_residuals(e)


# -- exact sparse linear solve ----------------------------------------------


def solve_linear(rows: Iterable[tuple[dict, Rat]], ncols: int) -> list[Rat] | None:
    """Solve a sparse exact linear system; free unknowns are set to zero.

    `rows` yields (coefficients-by-column, rhs) pairs.  Returns the
    solution vector, or None when the system is inconsistent.
    """
    pivots: dict[int, tuple[dict, Rat]] = {}
    for row, rhs in rows:
        row = {c: v for c, v in row.items() if v}
        consumed = False
        while row:
            c = min(row)
            if c in pivots:
                prow, prhs = pivots[c]
                factor = row.pop(c)
                for pc, pv in prow.items():
                    if pc == c:
                        continue
                    nv = row.get(pc, Rat(0)) - factor * pv
                    if nv:
                        row[pc] = nv
                    else:
                        row.pop(pc, None)
                rhs = rhs - factor * prhs
            else:
                lead = row[c]
                prow = {k: v / lead for k, v in row.items()}
                pivots[c] = (prow, rhs / lead)
                consumed = True
                break
        if not consumed and rhs:
            return None
    solution = [Rat(0)] * ncols
    for c in sorted(pivots, reverse=True):
        prow, prhs = pivots[c]
        val = prhs
        for pc, pv in prow.items():
            if pc != c:
                val -= pv * solution[pc]
        solution[c] = val
    return solution


# -- ansatz pools ------------------------------------------------------------


def _mono_expr(mono: tuple) -> JetExpr:
    return JetExpr(((mono, Rat(1)),))


def _mono_max_order(mono: tuple) -> int:
    return max((mi_order(k[1]) for k, _ in mono[1]), default=0)


def _mono_var_degree(mono: tuple) -> int:
    return sum(e for _, e in mono[0])


def one_step_antiderivatives(mono: tuple, axis: int, var_bounds: Mapping[int, int]) -> list[tuple]:
    """Monomials m with D_axis(m) containing `mono` (up to coefficient)."""
    out = []
    varpows, jetpows, funpows, parampows = mono
    for k, _e in jetpows:
        if k[1][axis] >= 1:
            lowered = (k[0], mi_bump(k[1], axis, -1))
            nj = _merge_pow(_merge_pow(jetpows, k, -1), lowered, 1)
            out.append((varpows, nj, funpows, parampows))
    for k, _e in funpows:
        if axis in k[1]:
            slot = k[1].index(axis)
            if k[2][slot] >= 1:
                lk = (k[0], k[1], mi_bump(k[2], slot, -1), k[3])
                nf = _merge_pow(_merge_pow(funpows, k, -1), lk, 1)
                out.append((varpows, jetpows, nf, parampows))
    cur = dict(varpows).get(axis, 0)
    if cur < var_bounds.get(axis, 0):
        nv = _merge_pow(varpows, axis, 1)
        out.append((nv, jetpows, funpows, parampows))
    return out


def build_pools(
    target: JetExpr,
    axes: Sequence[int],
    order_bound: int,
    var_bounds: Mapping[int, int] | int,
    rounds: int = 3,
    cap: int = 6000,
) -> dict[int, list]:
    """Candidate witness monomials per direction, closed under differentiation."""
    if isinstance(var_bounds, int):
        var_bounds = {d: var_bounds for d in axes}
    pools: dict[int, set] = {d: set() for d in axes}
    frontier = {m for m, _ in target.terms}
    for _ in range(rounds):
        new_by_dir = {d: set() for d in axes}
        for m in frontier:
            for d in axes:
                for cand in one_step_antiderivatives(m, d, var_bounds):
                    if _mono_max_order(cand) > order_bound:
                        continue
                    if cand not in pools[d]:
                        new_by_dir[d].add(cand)
        if not any(new_by_dir.values()):
            break
        seen = set(frontier)
        next_frontier = set()
        for d in axes:
            pools[d] |= new_by_dir[d]
            for cand in new_by_dir[d]:
                for mm, _ in total_derivative(_mono_expr(cand), d).terms:
                    if mm not in seen:
                        seen.add(mm)
                        next_frontier.add(mm)
        frontier = next_frontier
        if sum(len(p) for p in pools.values()) > cap:
            raise AnsatzExhausted(
                f"ansatz pool exceeded {cap} monomials; raise bounds explicitly"
            )
    return {d: sorted(pools[d]) for d in axes}


def invert_divergence(
    e: JetExpr,
    dim: int,
    degree_bound: int | None = None,
    order_bound: int | None = None,
    var_bounds: Mapping[int, int] | int | None = None,
    rounds: int = 3,
) -> DivergenceWitness:
    """Write `e` as an exact spatial divergence Div(X, Y, ...).

    Raises AnsatzExhausted when no witness exists within the bounds; that
    signals the ansatz was too small, not that `e` is not a divergence.
    """
    if e.is_zero():
        return DivergenceWitness((JetExpr.zero(),) * dim, "spatial", JetExpr.zero())
    axes = list(range(1, dim + 1))
    if order_bound is None:
        order_bound = max(e.max_order() - 1, 0)
    if degree_bound is None:
        degree_bound = e.jet_degree()
    if var_bounds is None:
        var_bounds = {d: e.var_degree(d) + 1 for d in axes}

    pools = build_pools(e, axes, order_bound, var_bounds, rounds)
    columns: list[tuple[int, tuple]] = []
    for d in axes:
        columns.extend((d, m) for m in pools[d] if sum(x for _, x in m[1]) <= degree_bound)
    if not columns:
        raise AnsatzExhausted("empty ansatz pool")

    rows_by_mono: dict[tuple, dict] = {}
    for col, (d, m) in enumerate(columns):
        image = total_derivative(_mono_expr(m), d)
        for mm, c in image.terms:
            rows_by_mono.setdefault(mm, {})[col] = rows_by_mono.get(mm, {}).get(col, Rat(0)) + c
    target = dict(e.terms)
    all_monos = sorted(set(rows_by_mono) | set(target))
    rows = [(rows_by_mono.get(mm, {}), target.get(mm, Rat(0))) for mm in all_monos]

    sol = solve_linear(rows, len(columns))
    if sol is None:
        raise AnsatzExhausted(
            "no witness within bounds "
            f"(order<={order_bound}, degree<={degree_bound}, vars<={var_bounds}, "
            f"rounds={rounds})"
        )
    comps = [JetExpr.zero() for _ in axes]
    by_axis: dict[int, list] = {d: [] for d in axes}
    for (d, m), c in zip(columns, sol):
        if c:
            by_axis[d].append((c, m))
    for i, d in enumerate(axes):
        comps[i] = JetExpr.from_pairs(by_axis[d])
    residual = divergence(comps, dim) - e
    if not residual.is_zero():
        raise AssertionError("divergence inversion produced a nonzero residual")
    return DivergenceWitness(tuple(comps), "spatial", residual)


def invert_divergence_auto(e: JetExpr, dim: int) -> DivergenceWitness:
    """invert_divergence with automatic bound escalation, tightest first."""
    if e.is_zero():
        return DivergenceWitness((JetExpr.zero(),) * dim, "spatial", JetExpr.zero())
    last: Exception | None = None
    axes = list(range(1, dim + 1))
    order0 = max(e.max_order() - 1, 0)
    base_vars = {d: e.var_degree(d) for d in axes}
    schedule = [
        (order0, 0, 2),
        (order0, 0, 3),
        (order0, 1, 3),
        (order0 + 1, 1, 3),
        (order0 + 1, 2, 4),
    ]
    for order_bound, var_extra, rounds in schedule:
        try:
            return invert_divergence(
                e,
                dim,
                order_bound=order_bound,
                var_bounds={d: base_vars[d] + var_extra for d in axes},
                rounds=rounds,
            )
        except AnsatzExhausted as exc:
            last = exc
    raise AnsatzExhausted(f"divergence inversion failed after escalation: {last}")
