import pytest
import sympy as sp

from waveequiv.expr import T, U, V1, V2, V3, X, Y, formal_function, is_zero
from waveequiv.family import FamilyMember, signature
from waveequiv.cases import (
    CATALOG, LINEARIZABLE, MIRROR_PAIRS, NOT_LINEARIZABLE, ROW_IDS, UNCOVERED,
    CaseSpec, classify, constraint_residuals, mirror_shapes, restriction_flags,
    row_generator_set, row_instance, verify_case,
)
from waveequiv.generators import EXT, build_general, generic_free_data, solve_wave_determining


FULL = X + Y + T + U + V1 + V2 + V3


class TestConstraintResiduals:
    def test_restricted_shape_passes(self):
        case = CaseSpec(frozenset({"f_v3"}))
        gs = row_generator_set("3.1")
        assert constraint_residuals(case, gs) == []

    def test_unrestricted_shape_fails_with_y_slope(self):
        case = CaseSpec(frozenset({"f_v3"}))
        gs = solve_wave_determining(build_general(generic_free_data()))
        residuals = constraint_residuals(case, gs)
        assert residuals
        xi1_y = formal_function("xi1", 4, (0, 1, 0, 0))(X, Y, T, U)
        assert any(res.has(xi1_y) for _, res in residuals)

    def test_no_restriction_no_residuals(self):
        case = CaseSpec(frozenset())
        gs = solve_wave_determining(build_general(generic_free_data()))
        assert constraint_residuals(case, gs) == []


class TestVerifyCase:
    @pytest.mark.parametrize("row_id", ROW_IDS)
    def test_row_passes(self, row_id):
        rep = verify_case(row_id)
        assert rep.shapes_hold, rep.residuals
        assert rep.passed

    def test_unrestricted_row_has_no_constraints(self):
        rep = verify_case("3")
        assert rep.constraints_checked == ()
        assert rep.generic_violates is None

    def test_negative_rows_force_affine_eta(self):
        for row_id in ROW_IDS:
            if CATALOG[row_id].verdict == NOT_LINEARIZABLE:
                rep = verify_case(row_id)
                assert rep.eta_uu_zero is True

    def test_restricted_rows_reject_generic_data(self):
        for row_id in ROW_IDS:
            if CATALOG[row_id].vanishing:
                assert verify_case(row_id).generic_violates is True

    def test_unknown_row(self):
        with pytest.raises(Exception, match="unknown catalog row"):
            verify_case("9.9")

    def test_witness_eta_keeps_nonlinear_freedom_on_linearizable_rows(self):
        # on positive rows the exhibited eta (or a coordinate map) still has
        # room to depend on u nonlinearly; spot-check the u-shift rows
        gs = row_generator_set("3.1.1")
        assert not is_zero(sp.diff(gs.xi2, U))
        gs = row_generator_set("3.2")
        assert not is_zero(sp.diff(gs.eta, U, 2))


class TestClassify:
    def test_fully_general_member(self):
        sig = signature(FamilyMember(FULL, FULL, FULL))
        out = classify(sig)
        assert out.row_id == "3"
        assert out.verdict == LINEARIZABLE
        assert set(out.witnesses) == {"xi1_u != 0", "xi2_u != 0", "eta_uu != 0"}

    def test_f_without_uy_ut(self):
        f = X + Y + T + U + V1
        sig = signature(FamilyMember(f, FULL, FULL))
        out = classify(sig)
        assert out.row_id == "3.1.2"
        assert out.shapes["xi1"] == ("x",)
        assert out.shapes["xi2"] == ("y", "t")
        assert out.verdict == LINEARIZABLE
        assert out.witnesses == ("eta_uu != 0",)

    def test_fluxes_without_ut_and_no_source(self):
        fg = X + Y + T + U + V1 + V2
        out = classify(signature(FamilyMember(fg, fg, 0)))
        assert out.row_id == "3.2.1"
        assert out.verdict == NOT_LINEARIZABLE

    def test_plane_wave_member(self):
        out = classify(signature(FamilyMember(V1, 0, 0)))
        assert out.row_id == "3.1.3-mirror"
        assert out.verdict == NOT_LINEARIZABLE
        # the classification must mention that u-dependent maps escape the pattern
        assert any("u_t" in note for note in out.notes)

    def test_uncovered_pattern(self):
        f = X + Y + T + U + V1 + V3  # free of u_y only
        out = classify(signature(FamilyMember(f, FULL, FULL)))
        assert out.verdict == UNCOVERED
        assert not out.covered
        assert "3" in out.nearest

    def test_source_without_ut(self):
        fg = X + Y + T + U + V1 + V2
        h = X + U + V1 + V2
        out = classify(signature(FamilyMember(fg, fg, h)))
        assert out.row_id == "3.2.2"
        assert out.verdict == NOT_LINEARIZABLE


class TestCorollary:
    def test_no_ut_anywhere_means_not_linearizable(self):
        # every catalog row whose pattern removes u_t from f, g and h
        hit = []
        for row in CATALOG.values():
            if {"f_v3", "g_v3"} <= row.vanishing and ("h" in row.vanishing or "h_v3" in row.vanishing):
                hit.append(row.row_id)
                assert row.verdict == NOT_LINEARIZABLE
        assert sorted(hit) == ["3.1.3-mirror", "3.2.1", "3.2.2"]

    def test_classify_agrees_on_synthesized_members(self):
        fg = X + Y + T + U + V1 + V2
        members = [
            FamilyMember(fg, fg, 0),                      # no source
            FamilyMember(X + U + V1, Y + U + V2, 0),      # tighter fluxes
            FamilyMember(fg, fg, X + U + V1 + V2),        # source without u_t
        ]
        for m in members:
            out = classify(signature(m))
            assert out.verdict == NOT_LINEARIZABLE, m


class TestMirrorSymmetry:
    @pytest.mark.parametrize("left,right", MIRROR_PAIRS)
    def test_shapes_mirror(self, left, right):
        lrow, rrow = CATALOG[left], CATALOG[right]
        mirrored = mirror_shapes(lrow.shapes)
        for name in ("xi1", "xi2", "xi3"):
            assert mirrored[name] == rrow.shapes[name]
        assert lrow.verdict == rrow.verdict

    @pytest.mark.parametrize("left,right", MIRROR_PAIRS)
    def test_witnesses_mirror(self, left, right):
        swap = {"xi1_u != 0": "xi2_u != 0", "xi2_u != 0": "xi1_u != 0"}
        lw = {swap.get(w, w) for w in CATALOG[left].witnesses}
        assert lw == set(CATALOG[right].witnesses)


def test_restriction_flags_for_zero_fluxes():
    sig = signature(FamilyMember(V1, 0, 0))
    assert restriction_flags(sig) == frozenset({"f_v2", "f_v3", "g_v1", "g_v3", "h"})


def test_catalog_row_count_and_mirrors_present():
    assert len(ROW_IDS) == 12
    assert {"3", "3.1", "3.2", "3.1.1", "3.2.1", "3.1.2", "3.1.3", "3.2.2"} <= set(ROW_IDS)
