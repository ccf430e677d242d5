"""Render JetExpr values in the expression grammar (round-trips with parsing)."""

from __future__ import annotations

from fractions import Fraction

from .jetexpr import AXES, ZERO_MI, JetExpr, mi_str


def _pow_str(base: str, exp: int) -> str:
    return base if exp == 1 else f"{base}^{exp}"


def fun_name(key: tuple) -> str:
    name, sig, orders, _rule = key
    if len(sig) == 1 and sig[0] == 0:
        return name + "'" * orders[0]
    sub = "".join(AXES[ax] * n for ax, n in zip(sig, orders))
    return name + (f"_{sub}" if sub else "")


def jet_name(key: tuple) -> str:
    dep, mi = key
    return dep if mi == ZERO_MI else f"{dep}_{mi_str(mi)}"


def _term_str(mono: tuple, coeff: Fraction) -> tuple[bool, str]:
    """Return (negative, body) for one canonical term."""
    num: list[str] = []
    den: list[str] = []
    varpows, jetpows, funpows, parampows = mono
    c = abs(coeff)
    if c.numerator != 1 or (not varpows and not jetpows and not funpows and not parampows):
        num.append(str(c.numerator))
    if c.denominator != 1:
        den.append(str(c.denominator))
    for axis, e in varpows:
        num.append(_pow_str(AXES[axis], e))
    for key, e in jetpows:
        num.append(_pow_str(jet_name(key), e))
    for key, e in funpows:
        num.append(_pow_str(fun_name(key), e))
    for key, e in parampows:
        if e > 0:
            num.append(_pow_str(key[0], e))
        else:
            den.append(_pow_str(key[0], -e))
    if not num:
        num.append("1")
    body = "*".join(num)
    for d in den:
        body += f"/{d}"
    return coeff < 0, body


def to_source(e: JetExpr) -> str:
    """Canonical textual form, parseable by :func:`topocharge.parsing.parse_expr`."""
    if e.is_zero():
        return "0"
    parts: list[str] = []
    for i, (mono, coeff) in enumerate(e.terms):
        neg, body = _term_str(mono, coeff)
        if i == 0:
            parts.append(f"-{body}" if neg else body)
        else:
            parts.append(f"- {body}" if neg else f"+ {body}")
    return " ".join(parts)


def vector_source(components) -> str:
    return "(" + ", ".join(to_source(c) for c in components) + ")"
