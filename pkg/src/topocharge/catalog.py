"""Catalog of example PDEs with verified multipliers, currents, and charges.

Entries ship as YAML documents (one per PDE) in ``catalog_data/``.  Every
listed object is verified while loading: multipliers through the Euler
test, currents through the split relations on solutions, identities as
exact off-solution statements, charges through Div Gamma|_E = 0.  A load
failure raises CatalogCorrupt carrying the failing object and residual.

Fluxes a source document omits are reconstructed by divergence inversion
from the split relations.  Transcription defects in the source are never
guessed over silently: the corrected object carries a ``repair`` note
recording the printed form and the fix.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

import yaml

from .conservation import (
    CurrentFamily,
    CurrentVerificationError,
    DivergenceIdentity,
    FluxVector,
    NotAMultiplier,
    current_divergence,
    divergence_identity,
    reduce_to_spatial_flux,
    split_by_arbitrary_function,
    substitute_on_solutions,
    verify_family,
    verify_multiplier,
)
from .jetexpr import (
    JetExpr,
    T,
    biharmonic_rule,
    param_key,
    substitute_params,
    total_derivative,
)
from .parsing import SymbolTable, default_symbols, parse_expr
from .pde import DivForm, PdeSpec
from .potential import PotentialSystem, build_potential_system
from .printing import to_source
from .variational import AnsatzExhausted, invert_divergence_auto

ENTRY_FILES = (
    "kdv_lagrangian.yaml",
    "kp.yaml",
    "umkp.yaml",
    "shear.yaml",
    "nv.yaml",
    "vorticity.yaml",
)

ALIASES = {"kdv": "kdv_lagrangian", "zzk": "shear", "novikov_veselov": "nv"}


class CatalogCorrupt(RuntimeError):
    def __init__(self, entry: str, obj: str, message: str, residual=None):
        super().__init__(f"{entry}/{obj}: {message}")
        self.entry = entry
        self.object_id = obj
        self.residual = residual


class ConstraintViolation(ValueError):
    pass


@dataclass(frozen=True)
class CatalogMultiplier:
    id: str
    case: str
    Q: JetExpr
    note: str = ""
    repair: str = ""


@dataclass(frozen=True)
class CatalogCurrent:
    id: str
    case: str
    multiplier_id: str
    pairing: JetExpr
    T: JetExpr
    Phi: tuple
    family: CurrentFamily
    reconstructed: bool = False
    pairing_exact: bool = True
    repair: str = ""
    note: str = ""


@dataclass(frozen=True)
class CatalogIdentity:
    id: str
    current_id: str
    index: int
    identity: DivergenceIdentity
    expected_R: JetExpr | None
    note: str = ""
    repair: str = ""


@dataclass(frozen=True)
class CatalogCharge:
    id: str
    current_id: str
    flux: FluxVector
    note: str = ""
    repair: str = ""


@dataclass(frozen=True)
class CatalogPotentialSystem:
    id: str
    charge_id: str
    system: PotentialSystem


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    title: str
    dim: int
    symbols: SymbolTable
    pde: PdeSpec
    cases: dict
    case_pdes: dict
    multipliers: list
    currents: list
    identities: list
    charges: list
    potential_systems: list
    constraints: tuple = ()
    note: str = ""

    def pde_for_case(self, case: str) -> PdeSpec:
        return self.case_pdes[case]

    def multiplier(self, obj_id: str) -> CatalogMultiplier:
        return _find(self.multipliers, obj_id, self.name)

    def current(self, obj_id: str) -> CatalogCurrent:
        return _find(self.currents, obj_id, self.name)

    def identity(self, obj_id: str) -> CatalogIdentity:
        return _find(self.identities, obj_id, self.name)

    def charge(self, obj_id: str) -> CatalogCharge:
        return _find(self.charges, obj_id, self.name)

    def repairs(self) -> list[tuple[str, str]]:
        out = []
        for group in (self.multipliers, self.currents, self.identities, self.charges):
            for obj in group:
                if obj.repair:
                    out.append((obj.id, obj.repair))
        return out


def _find(seq, obj_id: str, entry: str):
    for obj in seq:
        if obj.id == obj_id:
            return obj
    raise KeyError(f"{entry}: no object {obj_id!r}")


# -- loading -------------------------------------------------------------------


def _read_yaml(name: str) -> dict:
    ref = resources.files("topocharge").joinpath("catalog_data").joinpath(name)
    with ref.open("r", encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def _build_symbols(doc: dict) -> SymbolTable:
    sym = default_symbols().with_deps("G")
    for name, spec in (doc.get("params") or {}).items():
        square = spec.get("square") if isinstance(spec, dict) else None
        sym = sym.with_param(name, None if square is None else Fraction(square))
    for name, spec in (doc.get("arbfuns") or {}).items():
        sig = tuple("txyz".index(ch) for ch in spec["sig"])
        rule = ()
        if spec.get("rule") == "biharmonic":
            rule = biharmonic_rule(0)
        sym = sym.with_arbfun(name, sig, rule)
    return sym


def _parse_binding_value(value, dim: int, sym: SymbolTable, name: str):
    """A case binding: rational text, sqrt(p/q), or an expression in params."""
    text = str(value).strip()
    if text.startswith("sqrt(") and text.endswith(")"):
        square = Fraction(text[5:-1])
        return JetExpr.param(param_key(name, square))
    return parse_expr(text, dim, sym)


def _case_bindings(doc: dict, dim: int, base_sym: SymbolTable) -> dict:
    cases = {"generic": {}}
    for case_name, raw in (doc.get("cases") or {}).items():
        sym = base_sym
        bindings = {}
        for pname, value in (raw or {}).items():
            expr = _parse_binding_value(value, dim, sym, pname)
            bindings[pname] = expr
            # later bindings in the same case may reference this one
            keys = expr.param_keys()
            for k in keys:
                if k[0] == pname and k[1] != ():
                    sym = sym.with_param(pname, k[1])
        cases[case_name] = bindings
    return cases


def _bind(e: JetExpr, bindings: dict) -> JetExpr:
    return substitute_params(e, bindings) if bindings else e


def _case_pde(name: str, dim: int, doc: dict, sym: SymbolTable, bindings: dict) -> PdeSpec:
    P = lambda s: _bind(parse_expr(s, dim, sym), bindings)
    G = P(doc["G"])
    leading = parse_expr(doc["leading"], dim, sym)
    ((mono, coeff),) = leading.terms
    ((jet_key, exp),) = mono[1]
    if exp != 1 or coeff != 1 or mono[0] or mono[2] or mono[3]:
        raise ValueError(f"{name}: leading must be a bare jet coordinate")
    div_form = None
    if doc.get("div_form"):
        df = doc["div_form"]
        div_form = DivForm(
            "txyz".index(df["k"]),
            tuple(P(s) for s in df["F"]),
            P(df.get("factor", "1")),
        )
    return PdeSpec(
        name,
        dim,
        G,
        jet_key,
        P(doc["rhs"]),
        P(doc.get("factor", "1")),
        div_form,
        sym,
    )


def _reconstruct_fluxes(pde: PdeSpec, fun: tuple, T_coeffs: tuple, cQ: JetExpr) -> tuple:
    """Solve Div Phi_i = cQ_i G - D_t T_i - T_{i-1} for each coefficient flux."""
    fun_name = fun[0]
    n_q = max((k[2][0] for k in cQ.fun_keys() if k[0] == fun_name), default=0)
    N = max(len(T_coeffs) - 1, n_q - 1)
    T_list = list(T_coeffs) + [JetExpr.zero()] * (N + 1 - len(T_coeffs))
    fluxes = []
    for i in range(N + 2):
        Qi = cQ.coefficient_of_fun_order(fun_name, i)
        target = Qi * pde.G
        if i <= N:
            target = target - total_derivative(T_list[i], T)
        if i >= 1:
            target = target - T_list[i - 1]
        witness = invert_divergence_auto(target, pde.dim)
        fluxes.append(witness.components)
    return tuple(T_list), tuple(fluxes)


def _build_entry(doc: dict, verify: bool = True, overlay: dict | None = None,
                 user_params: dict | None = None) -> CatalogEntry:
    name = doc["name"]
    dim = int(doc["dim"])
    sym = _build_symbols(doc)
    cases = _case_bindings(doc, dim, sym)

    if overlay is not None:
        # instantiate(): a single binding replaces the case system; objects
        # are kept when their case equations hold under the user binding.
        _check_constraints(name, doc, dim, overlay)
        kept_cases = {
            cn: b for cn, b in cases.items() if _case_consistent(b, overlay)
        }
        cases = {cn: dict(overlay) for cn in kept_cases}
        cases.setdefault("generic", dict(overlay))

    case_pdes = {cn: _case_pde(name, dim, doc, sym, b) for cn, b in cases.items()}
    pde = case_pdes["generic"]
    P = lambda s, b: _bind(parse_expr(str(s), dim, sym), b)

    multipliers = []
    for m in doc.get("multipliers") or []:
        case = m.get("case", "generic")
        if case not in cases:
            continue
        Q = P(m["Q"], cases[case])
        if verify:
            try:
                verify_multiplier(case_pdes[case], Q)
            except NotAMultiplier as exc:
                raise CatalogCorrupt(name, m["id"], str(exc), exc.residual) from None
        multipliers.append(
            CatalogMultiplier(m["id"], case, Q, m.get("note", ""), m.get("repair", ""))
        )

    currents = []
    for c in doc.get("currents") or []:
        case = c.get("case", "generic")
        if case not in cases:
            continue
        cpde = case_pdes[case]
        bindings = cases[case]
        pairing = P(c.get("pairing", "1"), bindings)
        mult = _find(multipliers, c["multiplier"], name)
        cQ = pairing * mult.Q
        T_expr = P(c["T"], bindings)
        reconstructed = False
        if c.get("Phi") == "reconstruct":
            fam0 = split_by_arbitrary_function(cpde, T_expr, (JetExpr.zero(),) * dim, check=False)
            try:
                T_coeffs, flux_coeffs = _reconstruct_fluxes(cpde, fam0.fun or ("f", (T,), ()), fam0.T_coeffs, cQ)
            except AnsatzExhausted as exc:
                raise CatalogCorrupt(name, c["id"], f"flux reconstruction failed: {exc}") from None
            family = CurrentFamily(dim, fam0.fun or ("f", (T,), ()), T_coeffs, flux_coeffs)
            T_expr, Phi = family.assemble()
            reconstructed = True
        else:
            Phi = tuple(P(s, bindings) for s in c["Phi"])
            family = split_by_arbitrary_function(cpde, T_expr, Phi, check=False)
        pairing_exact = True
        if verify:
            residuals = verify_family(cpde, family)
            if residuals:
                raise CatalogCorrupt(
                    name, c["id"],
                    "split relations fail for f^(i), i in " + str(sorted(residuals)),
                    residuals,
                )
            exact = current_divergence(cpde, T_expr, Phi) - cQ * cpde.G
            if not exact.is_zero():
                pairing_exact = False
                on_sol = substitute_on_solutions(exact, cpde)
                if not on_sol.is_zero():
                    raise CatalogCorrupt(
                        name, c["id"], "multiplier pairing fails on solutions", on_sol
                    )
        currents.append(
            CatalogCurrent(
                c["id"], case, c["multiplier"], pairing, T_expr, Phi, family,
                reconstructed, pairing_exact, c.get("repair", ""), c.get("note", ""),
            )
        )

    identities = []
    for ident in doc.get("identities") or []:
        try:
            cur = _find(currents, ident["current"], name)
        except KeyError:
            continue  # source current excluded by the active instantiation
        if cur.case not in cases:
            continue
        cpde = case_pdes[cur.case]
        idx = int(ident.get("index", 0))
        try:
            result = divergence_identity(cpde, cur.family, idx)
        except (CurrentVerificationError, AssertionError) as exc:
            raise CatalogCorrupt(name, ident["id"], str(exc)) from None
        expected = None
        if ident.get("R"):
            expected = P(ident["R"], cases[cur.case])
            if verify and result.R != expected:
                raise CatalogCorrupt(
                    name, ident["id"],
                    f"R(G) mismatch: computed {to_source(result.R)}, "
                    f"expected {to_source(expected)}",
                    result.R - expected,
                )
        if verify and ident.get("R_touches"):
            have = {k[1][T] for k in result.R.jet_keys() if k[0] == "G"}
            want = {int(i) for i in ident["R_touches"]}
            if not want <= have:
                raise CatalogCorrupt(
                    name, ident["id"],
                    f"R(G) touches D_t^i G for i in {sorted(have)}, expected {sorted(want)}",
                )
        identities.append(
            CatalogIdentity(
                ident["id"], ident["current"], idx, result, expected,
                ident.get("note", ""), ident.get("repair", ""),
            )
        )

    charges = []
    for ch in doc.get("charges") or []:
        try:
            cur = _find(currents, ch["current"], name)
        except KeyError:
            continue
        if cur.case not in cases:
            continue
        cpde = case_pdes[cur.case]
        certify = bool(ch.get("certify", True)) and verify
        try:
            flux = reduce_to_spatial_flux(cur.family, cpde, certify=certify)
        except CurrentVerificationError as exc:
            raise CatalogCorrupt(name, ch["id"], str(exc), exc.residuals) from None
        if verify and ch.get("printed_gamma"):
            printed = tuple(P(s, cases[cur.case]) for s in ch["printed_gamma"])
            if printed != flux.Gamma:
                diff = tuple(a - b for a, b in zip(printed, flux.Gamma))
                raise CatalogCorrupt(
                    name, ch["id"],
                    "derived Gamma differs from the recorded printed form: "
                    + "; ".join(to_source(d) for d in diff),
                )
        charges.append(
            CatalogCharge(ch["id"], ch["current"], flux, ch.get("note", ""), ch.get("repair", ""))
        )

    systems = []
    for psdoc in doc.get("potential_systems") or []:
        try:
            charge = _find(charges, psdoc["charge"], name)
        except KeyError:
            continue
        system = build_potential_system(charge.flux)
        systems.append(CatalogPotentialSystem(psdoc["id"], psdoc["charge"], system))

    return CatalogEntry(
        name,
        doc.get("title", name),
        dim,
        sym,
        pde,
        cases,
        case_pdes,
        multipliers,
        currents,
        identities,
        charges,
        systems,
        tuple(doc.get("constraints") or ()),
        doc.get("note", ""),
    )


def _check_constraints(name: str, doc: dict, dim: int, overlay: dict) -> None:
    """Reject bindings that violate declared squares or constraint relations."""
    for pname, spec in (doc.get("params") or {}).items():
        square = spec.get("square") if isinstance(spec, dict) else None
        if square is None or pname not in overlay:
            continue
        probe = overlay[pname] * overlay[pname] - JetExpr.number(Fraction(square))
        if not probe.is_zero():
            raise ConstraintViolation(
                f"{name}: parameter {pname!r} must satisfy {pname}^2 = {square}"
            )
    # Extra constraints are parsed with the square rewrites stripped so the
    # relation itself survives to be tested; undetermined (still symbolic)
    # probes are not violations.
    plain = default_symbols().with_deps("G")
    for pname in (doc.get("params") or {}):
        plain = plain.with_param(pname, None)
    for text in doc.get("constraints") or []:
        probe = _bind(parse_expr(text, dim, plain), overlay)
        if not probe.param_keys() and not probe.is_zero():
            raise ConstraintViolation(
                f"{name}: constraint {text!r} violated ({to_source(probe)} != 0)"
            )


def _case_consistent(case_bindings: dict, overlay: dict) -> bool:
    """Do the user bindings imply this case's defining equations?

    The case value may reference free parameters (resolved through the
    user bindings) but its own adjoined root constants stay fixed.
    """
    for pname, val in case_bindings.items():
        lhs = substitute_params(JetExpr.param(param_key(pname)), overlay)
        rhs = substitute_params(val, overlay, only_free=True)
        if not (lhs - rhs).is_zero():
            return False
    return True


_CACHE: dict[str, CatalogEntry] = {}


def load_catalog(verify: bool = True) -> list[CatalogEntry]:
    """All six entries, each fully verified at load; results are cached."""
    out = []
    for fname in ENTRY_FILES:
        key = fname if verify else f"{fname}!raw"
        if key not in _CACHE:
            _CACHE[key] = _build_entry(_read_yaml(fname), verify=verify)
        out.append(_CACHE[key])
    return out


def get_entry(name: str, verify: bool = True) -> CatalogEntry:
    name = ALIASES.get(name, name)
    fname = f"{name}.yaml"
    if fname not in ENTRY_FILES:
        raise KeyError(f"unknown catalog entry {name!r}")
    key = fname if verify else f"{fname}!raw"
    if key not in _CACHE:
        _CACHE[key] = _build_entry(_read_yaml(fname), verify=verify)
    return _CACHE[key]


def load_entry_file(path, verify: bool = True) -> CatalogEntry:
    """Build a user-supplied entry from a document in the catalog format."""
    from pathlib import Path

    with Path(path).open("r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return _build_entry(doc, verify=verify)


def instantiate(name: str, params: dict) -> CatalogEntry:
    """Bind parameters to exact values and re-verify the whole entry.

    Values are rational text ("1", "-1/2"), "sqrt(p/q)" for adjoined
    roots, or expressions in previously bound parameters.
    """
    name = ALIASES.get(name, name)
    doc = _read_yaml(f"{name}.yaml")
    sym = _build_symbols(doc)
    dim = int(doc["dim"])
    overlay: dict[str, JetExpr] = {}
    known = set((doc.get("params") or {}).keys())
    for pname, value in params.items():
        if pname not in known:
            raise ConstraintViolation(f"{name}: unknown parameter {pname!r}")
        expr = _parse_binding_value(value, dim, sym, pname)
        overlay[pname] = substitute_params(expr, overlay)
    return _build_entry(doc, verify=True, overlay=overlay)
