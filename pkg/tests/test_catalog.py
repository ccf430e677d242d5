"""Catalog self-verification, typo repairs, and parameter instantiation."""

import pytest

from topocharge.catalog import (
    CatalogCorrupt,
    ConstraintViolation,
    _build_entry,
    _read_yaml,
    get_entry,
    instantiate,
    load_catalog,
)
from topocharge.conservation import current_divergence, verify_current
from topocharge.parsing import parse_expr
from topocharge.pde import substitute_on_solutions


@pytest.fixture(scope="module")
def entries():
    return {e.name: e for e in load_catalog()}


class TestLoad:
    def test_six_entries(self, entries):
        assert sorted(entries) == [
            "kdv_lagrangian", "kp", "nv", "shear", "umkp", "vorticity",
        ]

    def test_kp_inventory(self, entries):
        kp = entries["kp"]
        assert len(kp.multipliers) == 4
        assert len(kp.currents) == 4
        assert len(kp.charges) == 4
        assert len(kp.potential_systems) == 4

    def test_kdv_inventory(self, entries):
        kdv = entries["kdv_lagrangian"]
        assert [m.id for m in kdv.multipliers] == ["multiplier-f"]
        assert len(kdv.currents) == 1

    def test_alias(self):
        assert get_entry("kdv").name == "kdv_lagrangian"

    def test_every_current_verifies(self, entries):
        for entry in entries.values():
            for c in entry.currents:
                pde = entry.pde_for_case(c.case)
                assert verify_current(pde, c.T, c.Phi).is_zero(), (entry.name, c.id)

    def test_pairing_exactness(self, entries):
        for entry in entries.values():
            for c in entry.currents:
                pde = entry.pde_for_case(c.case)
                Q = entry.multiplier(c.multiplier_id).Q
                exact = current_divergence(pde, c.T, c.Phi) - c.pairing * Q * pde.G
                if c.pairing_exact:
                    assert exact.is_zero(), (entry.name, c.id)
                else:
                    assert substitute_on_solutions(exact, pde).is_zero()

    def test_umkp_fluxes_reconstructed(self, entries):
        umkp = entries["umkp"]
        recon = [c.id for c in umkp.currents if c.reconstructed]
        assert recon == ["current-1", "current-2", "current-3", "current-4"]

    def test_charge_certificates(self, entries):
        for entry in entries.values():
            for ch in entry.charges:
                assert ch.flux.nontrivial_up_to_order not in (None, "trivial"), (
                    entry.name, ch.id,
                )


class TestRepairs:
    def test_repairs_recorded(self, entries):
        recorded = {
            (name, obj_id)
            for name, entry in entries.items()
            for obj_id, _note in entry.repairs()
        }
        assert ("nv", "current-2") in recorded
        assert ("nv", "current-3") in recorded
        assert ("kp", "charge-3") in recorded
        assert ("umkp", "multiplier-q4") in recorded
        for name, entry in entries.items():
            for obj_id, note in entry.repairs():
                assert note.strip(), (name, obj_id)

    def test_nv_current2_unrepaired_variants_fail(self, entries):
        nv = entries["nv"]
        pde = nv.pde
        # variant A: the printed run without the inserted "+"
        # (the merged term -u_tx*u_xy*alpha*u_xx^2*u_xy)
        bad_x = parse_expr(
            "(-u_tx*u_xy*alpha*u_xx^2*u_xy - beta*u_xy^2*u_yy + u_xyy^2"
            " + 2*u_xx*u_xxxy)*f - x*(u_xx*u_xy + u_xxxy/alpha)*f'",
            2, nv.symbols,
        )
        good = nv.current("current-2")
        residual = verify_current(pde, good.T, (bad_x, good.Phi[1]))
        assert not residual.is_zero()
        # variant B: u_xxx/alpha kept in the printed f' x-flux slot
        bad_x2 = good.Phi[0] + parse_expr("u_xxx/alpha*f'", 2, nv.symbols)
        bad_y2 = good.Phi[1] - parse_expr("u_xxx/alpha*f'", 2, nv.symbols)
        residual = verify_current(pde, good.T, (bad_x2, bad_y2))
        assert not residual.is_zero()

    def test_umkp_q4_printed_form_fails(self, entries):
        from topocharge.conservation import NotAMultiplier, verify_multiplier

        umkp = entries["umkp"]
        pde = umkp.pde_for_case("integrable")
        printed = parse_expr(
            "(2/3*u_t + 4/3*alpha*u_x*u_y - 8/9*u_x^3 + 8/3*u_xxx)*f"
            " - 2/3*alpha*x*u_x*f' + (1/3*y^2 - 1/3*alpha*x*y)*f'' + 1/18*y^3*f'''",
            2, umkp.symbols,
        )
        from topocharge.catalog import _bind

        printed = _bind(printed, umkp.cases["integrable"])
        with pytest.raises(NotAMultiplier):
            verify_multiplier(pde, printed)


class TestCorruption:
    def test_broken_current_raises(self):
        doc = _read_yaml("kdv_lagrangian.yaml")
        doc["currents"][0]["Phi"] = ["(u_t + 1/2*u_x^2 - u_xxx)*f"]
        with pytest.raises(CatalogCorrupt) as err:
            _build_entry(doc)
        assert err.value.object_id == "current-1"

    def test_broken_multiplier_raises(self):
        doc = _read_yaml("kdv_lagrangian.yaml")
        doc["multipliers"][0]["Q"] = "u*f"
        with pytest.raises(CatalogCorrupt):
            _build_entry(doc)

    def test_wrong_expected_r_raises(self):
        doc = _read_yaml("kp.yaml")
        for ident in doc["identities"]:
            if ident["id"] == "id-1":
                ident["R"] = "sigma*y^2*G"
        with pytest.raises(CatalogCorrupt) as err:
            _build_entry(doc)
        assert err.value.object_id == "id-1"


class TestInstantiate:
    def test_kp_sigma(self):
        for sigma in ("1", "-1"):
            entry = instantiate("kp", {"sigma": sigma})
            assert len(entry.currents) == 4

    def test_kp_sigma_violation(self):
        with pytest.raises(ConstraintViolation):
            instantiate("kp", {"sigma": "2"})

    def test_unknown_param(self):
        with pytest.raises(ConstraintViolation):
            instantiate("kp", {"gamma": "1"})

    def test_umkp_degenerate_still_verifies(self):
        entry = instantiate("umkp", {"alpha": "0", "beta": "0", "sigma": "1"})
        assert {m.id for m in entry.multipliers} == {
            "multiplier-f", "multiplier-yf", "multiplier-q1",
        }

    def test_umkp_gardner_case(self):
        entry = instantiate("umkp", {"alpha": "sqrt(2/3)", "beta": "2*alpha", "sigma": "1"})
        assert "multiplier-q2" in {m.id for m in entry.multipliers}
        assert "multiplier-q3" not in {m.id for m in entry.multipliers}

    def test_umkp_integrable_case(self):
        entry = instantiate("umkp", {"alpha": "sqrt(2)", "beta": "0", "sigma": "1"})
        ids = {m.id for m in entry.multipliers}
        assert {"multiplier-q3", "multiplier-q4"} <= ids

    def test_vorticity_inviscid_gates_xf_yf(self):
        inviscid = instantiate("vorticity", {"mu": "0"})
        assert {m.id for m in inviscid.multipliers} == {
            "multiplier-f", "multiplier-xf", "multiplier-yf",
        }
        viscous = instantiate("vorticity", {"mu": "1/100"})
        assert {m.id for m in viscous.multipliers} == {"multiplier-f"}
