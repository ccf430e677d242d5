"""Conservation-law verification and reduction to spatial-flux form.

Implements the splitting of a conserved current in an arbitrary function
f(t), the trivializing potentials Psi_i, the spatial-flux vector

    Gamma = sum_j (-D_t)^j Phi_j,

and the extraction of exact off-solution divergence-type identities
T_i = Div Psi_i + R(G) with R assembled constructively from the
substitution ledger.
"""

from __future__ import annotations

from dataclasses import dataclass

from .jetexpr import (
    JetExpr,
    Rat,
    T,
    divergence,
    total_derivative,
)
from .pde import PdeSpec, expand_r_operator, substitute_on_solutions, substitute_with_ledger
from .variational import euler_u


class NotAMultiplier(ValueError):
    def __init__(self, message: str, residual: JetExpr):
        super().__init__(message)
        self.residual = residual


class NonlinearInArbFun(ValueError):
    pass


class MixedArbFuns(ValueError):
    pass


class CurrentVerificationError(ValueError):
    def __init__(self, message: str, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class Multiplier:
    Q: JetExpr


@dataclass(frozen=True)
class CurrentFamily:
    """Conserved current expanded in f(t): T = sum T_i f^(i), Phi likewise."""

    dim: int
    fun: tuple | None  # (name, sig, rule) of the time function, None if constant
    T_coeffs: tuple  # T_0 .. T_N
    Flux_coeffs: tuple  # Phi_0 .. Phi_{N+1}, each a dim-vector of JetExpr

    @property
    def N(self) -> int:
        return len(self.T_coeffs) - 1

    def assemble(self) -> tuple[JetExpr, tuple]:
        """Recombine into full (T, Phi) with formal f^(i) factors."""
        if self.fun is None:
            return self.T_coeffs[0], self.Flux_coeffs[0]
        from .jetexpr import arbfun_key

        name, sig, rule = self.fun
        T_full = JetExpr.zero()
        Phi_full = [JetExpr.zero()] * self.dim
        for i, Ti in enumerate(self.T_coeffs):
            fi = JetExpr.arbfun(arbfun_key(name, sig, (i,), rule))
            T_full = T_full + Ti * fi
        for i, Phi_i in enumerate(self.Flux_coeffs):
            fi = JetExpr.arbfun(arbfun_key(name, sig, (i,), rule))
            Phi_full = [a + b * fi for a, b in zip(Phi_full, Phi_i)]
        return T_full, tuple(Phi_full)


@dataclass(frozen=True)
class FluxVector:
    Gamma: tuple
    dim: int
    source: CurrentFamily | None = None
    nontrivial_up_to_order: object = None  # int order bound or "u_t-certificate"


@dataclass(frozen=True)
class DivergenceIdentity:
    """Exact off-solution identity  T = Div(Psi) + R(G)."""

    T: JetExpr
    Psi: tuple
    R: JetExpr  # linear in jets of the formal variable "G"


# -- multipliers --------------------------------------------------------------


def verify_multiplier(pde: PdeSpec, Q: JetExpr) -> Multiplier:
    """Check that Q*G is a total spacetime divergence (Euler residual zero)."""
    residual = euler_u(Q * pde.G)
    if not residual.is_zero():
        raise NotAMultiplier(
            f"euler_u(Q*G) != 0 for {pde.name}; residual has "
            f"{len(residual.terms)} terms",
            residual,
        )
    return Multiplier(Q)


# -- currents ------------------------------------------------------------------


def current_divergence(pde: PdeSpec, T_expr: JetExpr, Phi: tuple) -> JetExpr:
    return total_derivative(T_expr, T) + divergence(list(Phi), pde.dim)


def verify_current(pde: PdeSpec, T_expr: JetExpr, Phi: tuple) -> JetExpr:
    """Residual of D_t T + Div Phi on solutions (zero expression == verified)."""
    return substitute_on_solutions(current_divergence(pde, T_expr, Phi), pde)


def verify_family(pde: PdeSpec, cur: CurrentFamily) -> dict[int, JetExpr]:
    """Residuals of the split relations, keyed by the f^(i) they multiply.

    Entry i holds  (D_t T_i + T_{i-1} + Div Phi_i)|_E  with the obvious
    conventions at the ends; all must vanish for a conservation law.
    """
    residuals = {}
    N = cur.N
    for i in range(N + 2):
        e = divergence(list(cur.Flux_coeffs[i]), cur.dim)
        if i <= N:
            e = e + total_derivative(cur.T_coeffs[i], T)
        if i >= 1 and i - 1 <= N:
            e = e + cur.T_coeffs[i - 1]
        r = substitute_on_solutions(e, pde)
        if not r.is_zero():
            residuals[i] = r
    return residuals


def split_by_arbitrary_function(
    pde: PdeSpec, T_expr: JetExpr, Phi: tuple, check: bool = True
) -> CurrentFamily:
    """Extract the coefficient lists (T_i), (Phi_i) of a current linear in f(t)."""
    names = {}
    for e in (T_expr, *Phi):
        for key in e.fun_keys():
            if key[1] == (T,):
                names[key[0]] = (key[0], key[1], key[3])
    if len(names) > 1:
        raise MixedArbFuns(f"more than one time-dependent arbitrary function: {sorted(names)}")

    if not names:
        family = CurrentFamily(
            pde.dim,
            None,
            (T_expr,),
            (tuple(Phi), (JetExpr.zero(),) * pde.dim),
        )
    else:
        (fun_name, sig, rule) = next(iter(names.values()))
        for e in (T_expr, *Phi):
            for mono, _c in e.terms:
                deg = sum(p for k, p in mono[2] if k[0] == fun_name)
                if deg != 1:
                    raise NonlinearInArbFun(
                        f"current is not linear-homogeneous in {fun_name}(t)"
                    )
        N = max(
            (k[2][0] for k in T_expr.fun_keys() if k[0] == fun_name),
            default=0,
        )
        max_phi = max(
            (k[2][0] for comp in Phi for k in comp.fun_keys() if k[0] == fun_name),
            default=0,
        )
        N = max(N, max_phi - 1)
        T_coeffs = tuple(T_expr.coefficient_of_fun_order(fun_name, i) for i in range(N + 1))
        Flux_coeffs = tuple(
            tuple(comp.coefficient_of_fun_order(fun_name, i) for comp in Phi)
            for i in range(N + 2)
        )
        family = CurrentFamily(pde.dim, (fun_name, sig, rule), T_coeffs, Flux_coeffs)

    if check:
        residuals = verify_family(pde, family)
        if residuals:
            raise CurrentVerificationError(
                f"current fails the split relations for f^(i), i in "
                f"{sorted(residuals)}",
                residuals,
            )
    return family


# -- reduction mechanics ---------------------------------------------------------


def _alternating_dt(vec: tuple, j: int) -> tuple:
    """(-D_t)^j applied componentwise."""
    out = vec
    for _ in range(j):
        out = tuple(-total_derivative(c, T) for c in out)
    return out


def trivializing_potentials(cur: CurrentFamily) -> list[tuple]:
    """Psi_i = -sum_{j=0}^{N-i} (-D_t)^j Phi_{i+j+1},  i = 0..N."""
    out = []
    for i in range(cur.N + 1):
        psi = (JetExpr.zero(),) * cur.dim
        for j in range(cur.N - i + 1):
            term = _alternating_dt(cur.Flux_coeffs[i + j + 1], j)
            psi = tuple(a - b for a, b in zip(psi, term))
        out.append(psi)
    return out


def reduce_to_spatial_flux(
    cur: CurrentFamily, pde: PdeSpec, certify: bool = True, order_bound: int | None = None
) -> FluxVector:
    """Gamma = sum_j (-D_t)^j Phi_j with Div Gamma|_E = 0 checked."""
    gamma = (JetExpr.zero(),) * cur.dim
    for j in range(cur.N + 2):
        term = _alternating_dt(cur.Flux_coeffs[j], j)
        gamma = tuple(a + b for a, b in zip(gamma, term))
    residual = substitute_on_solutions(divergence(list(gamma), cur.dim), pde)
    if not residual.is_zero():
        raise CurrentVerificationError(
            "Div Gamma does not vanish on solutions", {0: residual}
        )
    cert = nontriviality_certificate(gamma, pde, order_bound) if certify else None
    return FluxVector(gamma, cur.dim, cur, cert)


def divergence_identity(pde: PdeSpec, cur: CurrentFamily, i: int) -> DivergenceIdentity:
    """Exact off-solution identity T_i = Div Psi_i + R(G)."""
    if not 0 <= i <= cur.N:
        raise ValueError(f"index {i} outside 0..{cur.N}")
    psi = trivializing_potentials(cur)[i]
    bare = cur.T_coeffs[i] - divergence(list(psi), cur.dim)
    residual, r_expr = substitute_with_ledger(bare, pde)
    if not residual.is_zero():
        raise CurrentVerificationError(
            f"T_{i} - Div Psi_{i} does not vanish on solutions", {i: residual}
        )
    identity = DivergenceIdentity(cur.T_coeffs[i], psi, r_expr)
    check = cur.T_coeffs[i] - divergence(list(psi), cur.dim) - expand_r_operator(r_expr, pde)
    if not check.is_zero():
        raise AssertionError("divergence identity failed the exact off-solution check")
    return identity


# -- non-triviality ------------------------------------------------------------


def nontriviality_certificate(
    gamma: tuple, pde: PdeSpec, order_bound: int | None = None
) -> object:
    """Certify that Gamma is not a curl on solutions.

    Returns "u_t-certificate" for fluxes of the form u_t k_hat - F with F
    free of time derivatives (the jet-counting argument), otherwise the
    order bound up to which a curl ansatz search failed.
    """
    dim = pde.dim
    ut_key = ("u", (1, 0, 0, 0))
    for k_axis in range(1, dim + 1):
        ok = True
        for idx, comp in enumerate(gamma, start=1):
            f_part = comp - JetExpr.jet("u", (1, 0, 0, 0)) if idx == k_axis else comp
            if any(k[1][T] > 0 for k in f_part.jet_keys()):
                ok = False
                break
        if ok:
            return "u_t-certificate"
    if dim == 1:
        # No curls in one dimension; non-triviality just means Gamma|_E != 0.
        g = substitute_on_solutions(gamma[0], pde)
        return "nonzero-flux" if not g.is_zero() else "trivial"
    from .variational import AnsatzExhausted

    if order_bound is None:
        order_bound = max(c.max_order() for c in gamma)
    certified = None
    for bound in range(min(2, order_bound), order_bound + 1):
        try:
            witness = curl_witness_on_solutions(gamma, pde, bound)
        except AnsatzExhausted:
            break
        if witness is not None:
            return "trivial"
        certified = bound
    return certified


def _curl_components(theta: JetExpr | tuple, dim: int) -> tuple:
    if dim == 2:
        return (total_derivative(theta, 2), -total_derivative(theta, 1))
    wx, wy, wz = theta
    return (
        total_derivative(wz, 2) - total_derivative(wy, 3),
        total_derivative(wx, 3) - total_derivative(wz, 1),
        total_derivative(wy, 1) - total_derivative(wx, 2),
    )


def curl_witness_on_solutions(
    gamma: tuple, pde: PdeSpec, order_bound: int, rounds: int = 2, cap: int = 4000
):
    """Search for a skew potential with Gamma|_E = curl(theta)|_E.

    The ansatz for each potential component is drawn from antiderivative
    closures of the flux components it feeds.  Returns the potential
    (scalar in 2D, 3-vector in 3D) or None, which certifies
    non-triviality up to `order_bound`.
    """
    from .variational import build_pools, solve_linear

    dim = pde.dim
    if dim == 2:
        npots = 1
        feeds = {0: ((0, 2), (1, 1))}  # w from y-antiderivatives of G^x, x- of G^y
    elif dim == 3:
        npots = 3
        feeds = {
            0: ((1, 3), (2, 2)),  # wx appears in Gamma^y via D_z, Gamma^z via D_y
            1: ((0, 3), (2, 1)),
            2: ((0, 2), (1, 1)),
        }
    else:
        raise ValueError("curl witness search needs dim 2 or 3")

    g_sub = tuple(substitute_on_solutions(c, pde) for c in gamma)
    columns: list[tuple[int, tuple]] = []
    for pot in range(npots):
        pool = set()
        for comp_idx, axis in feeds[pot]:
            comp = g_sub[comp_idx]
            if comp.is_zero():
                continue
            pools = build_pools(
                comp,
                [axis],
                order_bound,
                {axis: comp.var_degree(axis) + 1},
                rounds,
                cap,
            )
            pool |= set(pools[axis])
        columns.extend((pot, m) for m in sorted(pool))
    if not columns:
        return None if any(not c.is_zero() for c in g_sub) else tuple(
            JetExpr.zero() for _ in range(npots)
        )

    rows_by_mono: dict[tuple, dict] = {}
    targets = [dict(c.terms) for c in g_sub]
    monos_per_comp = [set(t) for t in targets]
    for col, (pot, m) in enumerate(columns):
        theta: list[JetExpr] = [JetExpr.zero()] * npots
        theta[pot] = JetExpr(((m, Rat(1)),))
        curl = _curl_components(theta[0] if dim == 2 else tuple(theta), dim)
        for comp_idx, comp in enumerate(curl):
            comp = substitute_on_solutions(comp, pde)
            for mm, c in comp.terms:
                rows_by_mono.setdefault((comp_idx, mm), {})[col] = c
                monos_per_comp[comp_idx].add(mm)
    rows = []
    for comp_idx in range(dim):
        for mm in sorted(monos_per_comp[comp_idx]):
            rows.append(
                (
                    rows_by_mono.get((comp_idx, mm), {}),
                    targets[comp_idx].get(mm, Rat(0)),
                )
            )
    sol = solve_linear(rows, len(columns))
    if sol is None:
        return None
    comps = [JetExpr.zero()] * npots
    pairs: dict[int, list] = {p: [] for p in range(npots)}
    for (pot, m), c in zip(columns, sol):
        if c:
            pairs[pot].append((c, m))
    for pot in range(npots):
        comps[pot] = JetExpr.from_pairs(pairs[pot])
    return comps[0] if dim == 2 else tuple(comps)
