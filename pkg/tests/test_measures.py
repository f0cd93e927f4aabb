import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import HALF
from rwqc import fock, measures
from rwqc.errors import NumericalFault, ValidationError
from rwqc.spectrum import BogoliubovData, CosmologyParams, ModeParams, bogoliubov

gammas = st.floats(0.0, 0.95)
chis = st.floats(0.0, 1.0)
log_param = st.floats(min_value=math.log(1e-2), max_value=math.log(1e2)).map(math.exp)
CANON_MODE = ModeParams(1.0, 1.0)
CANON_COSMO = CosmologyParams(10.0, 10.0)


def mp_i_pmk(chi, g, terms=80):
    """I_pmk from the two spectra summed in 60-digit arithmetic."""
    mpmath.mp.dps = 60
    g, c2 = mpmath.mpf(g), mpmath.mpf(chi) ** 2
    s2, ia = 1 - c2, 1 - g
    h = lambda x: -x * mpmath.log(x, 2) if x > 0 else 0  # noqa: E731
    s_pk = sum(h(g ** n * ia * (c2 + (n + 1) * s2 * ia)) for n in range(terms))
    s_k = sum(h(ia * (g ** n * c2 + (n * g ** (n - 1) if n else 0) * s2 * ia)) for n in range(terms))
    return h(c2) + h(s2) + s_pk - s_k


class TestSeries:
    def test_geometric(self):
        res = measures.sum_series(lambda n: 0.5 ** n, tol=1e-14)
        assert res.value == pytest.approx(2.0, rel=1e-13)
        assert res.tail_bound <= 1e-14 * res.value

    def test_finite_support(self):
        res = measures.sum_series(lambda n: np.where(n < 2, 1.0, 0.0))
        assert res.value == 2.0 and res.tail_bound == 0.0

    def test_rejects_negative_terms(self):
        with pytest.raises(NumericalFault):
            measures.sum_series(lambda n: -np.ones(n.shape))

    def test_tighter_tol_uses_more_terms(self):
        f = lambda n: (n + 1) * 0.8 ** n  # noqa: E731
        loose, tight = measures.sum_series(f, 1e-6), measures.sum_series(f, 1e-12)
        assert tight.terms_used > loose.terms_used
        assert tight.value == pytest.approx(25.0, rel=1e-11)


class TestPartialTransposeSpectra:
    @given(gammas, chis)
    def test_pk_spectrum_sums_to_one(self, g, chi):
        w = measures.pt_spectrum_pk(chi, BogoliubovData.from_gamma_sq(g), 4000)
        assert w.sum() == pytest.approx(1.0, abs=1e-10)

    @given(gammas, chis)
    def test_pmk_spectrum_nonnegative(self, g, chi):
        w = measures.pt_spectrum_pmk(chi, BogoliubovData.from_gamma_sq(g), 2000)
        assert w.min() >= -1e-15
        assert w.sum() == pytest.approx(1.0, abs=1e-10)

    def test_pk_spectrum_matches_oracle(self):
        bog = bogoliubov(CANON_MODE, CANON_COSMO)
        state = fock.build_joint_state(CANON_MODE, bog)
        dense = np.sort(fock.pt_eigenvalues(fock.partial_trace(state, ("qubit", "boson"))))
        closed = np.sort(measures.pt_spectrum_pk(HALF, bog, state.cutoff))
        # the dense block at the cutoff edge is incomplete; compare the bulk
        assert np.allclose(dense[:5], closed[:5], atol=1e-12)
        assert np.allclose(dense[-5:], closed[-5:], atol=1e-12)

    @given(gammas)
    def test_antiboson_sum_is_one(self, g):
        total = measures.antiboson_pt_trace_sum(0.6, BogoliubovData.from_gamma_sq(g))
        assert total.value == pytest.approx(1.0, abs=1e-10)


class TestNegativity:
    def test_canonical(self):
        bog = bogoliubov(CANON_MODE, CANON_COSMO)
        assert measures.negativity_pk(HALF, bog) == pytest.approx(0.70486171626, abs=1e-10)

    @given(chis)
    def test_flat_limit(self, chi):
        n = measures.negativity_pk(chi, BogoliubovData.from_gamma_sq(0.0))
        expected = math.log2(1 + 2 * chi * math.sqrt(max(0.0, 1 - chi * chi)))
        assert n == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("chi", [0.0, 1.0])
    def test_product_state(self, chi):
        assert measures.negativity_pk(chi, BogoliubovData.from_gamma_sq(0.4)) == 0.0

    @given(gammas, chis)
    def test_antiboson_never_entangled(self, g, chi):
        assert measures.negativity_pmk(chi, BogoliubovData.from_gamma_sq(g)) == 0.0

    @given(st.floats(0.0, 0.9), st.floats(0.05, 0.95))
    def test_decreases_with_gamma(self, g, chi):
        lo = measures.negativity_pk(chi, BogoliubovData.from_gamma_sq(g))
        hi = measures.negativity_pk(chi, BogoliubovData.from_gamma_sq(min(0.95, g + 0.03)))
        assert hi <= lo + 1e-12


class TestEntropies:
    def test_canonical(self):
        e = measures.entropies(HALF, bogoliubov(CANON_MODE, CANON_COSMO))
        assert e.S_p == 1.0
        assert e.S_k == pytest.approx(1.85539902877, abs=1e-10)
        assert e.S_pk == pytest.approx(1.30603802798, abs=1e-10)
        assert (e.S_mk, e.S_pmk) == (e.S_pk, e.S_k)

    def test_binary_entropy(self):
        assert measures.binary_entropy(0.5) == 1.0
        assert measures.binary_entropy(0.0) == 0.0
        assert measures.binary_entropy(0.1) == pytest.approx(0.4689955935892812)

    @given(gammas, chis)
    def test_matches_oracle(self, g, chi):
        assume(g <= 0.9)
        bog = BogoliubovData.from_gamma_sq(g)
        e = measures.entropies(chi, bog)
        ref = fock.oracle_report(ModeParams(1.0, 1.0, chi), bog)
        for f in ("S_p", "S_k", "S_mk", "S_pk", "S_pmk"):
            assert getattr(e, f) == pytest.approx(getattr(ref, f), abs=1e-8)

    @given(gammas, chis)
    def test_subadditivity(self, g, chi):
        e = measures.entropies(chi, BogoliubovData.from_gamma_sq(g))
        assert e.S_pk <= e.S_p + e.S_k + 1e-12
        assert abs(e.S_p - e.S_k) <= e.S_pk + 1e-12


class TestMutualInformation:
    @given(gammas, chis)
    def test_monogamy(self, g, chi):
        bog = BogoliubovData.from_gamma_sq(g)
        i_pk = measures.mutual_information(chi, bog, "pk")
        i_pmk = measures.mutual_information(chi, bog, "pmk")
        assert i_pk + i_pmk == pytest.approx(2 * measures.binary_entropy(chi * chi), abs=1e-8)

    @pytest.mark.parametrize("chi", [0.0, 1.0])
    def test_trigger_needs_initial_correlation(self, chi):
        bog = BogoliubovData.from_gamma_sq(0.5)
        assert measures.mutual_information(chi, bog, "pmk") == 0.0
        assert measures.mutual_information(chi, bog, "pk") == 0.0

    @given(st.floats(1e-300, 0.95), st.floats(0.01, 0.99))
    def test_trigger_positive(self, g, chi):
        assert measures.mutual_information(chi, BogoliubovData.from_gamma_sq(g), "pmk") > 0

    @pytest.mark.parametrize("g", [1e-40, 1e-12, 1e-5, 5e-3, 2e-2])
    @pytest.mark.parametrize("chi", [0.1, HALF, 0.97])
    def test_small_gamma_against_high_precision(self, g, chi):
        got = measures.mutual_information(chi, BogoliubovData.from_gamma_sq(g), "pmk")
        assert got == pytest.approx(float(mp_i_pmk(chi, g)), rel=1e-10)

    def test_pair_selectors(self):
        bog = BogoliubovData.from_gamma_sq(0.3)
        a = measures.mutual_information(0.4, bog, ("qubit", "antiboson"))
        assert a == measures.mutual_information(0.4, bog, "qubit-antiboson")
        with pytest.raises(ValidationError):
            measures.mutual_information(0.4, bog, "boson-antiboson")


class TestAsymptote:
    def test_values(self):
        assert measures.asymptote("N_pk", HALF) == pytest.approx(1.0)
        assert measures.asymptote("I_pk", HALF) == pytest.approx(2.0)
        assert measures.asymptote("I_pmk", HALF) == 0.0
        assert measures.asymptote("N_pmk", 0.3) == 0.0

    def test_boson_entropy_limit_is_qubit_entropy(self):
        # gamma^2 -> 0 leaves the initial Bell-type pair, whose boson is maximally mixed
        limit = measures.asymptote("S_k", HALF)
        e = measures.entropies(HALF, BogoliubovData.from_gamma_sq(1e-30))
        assert limit == pytest.approx(e.S_k, abs=1e-12) == pytest.approx(1.0)

    def test_unknown(self):
        with pytest.raises(ValidationError, match="asymptote"):
            measures.asymptote("N_k", HALF)

    @pytest.mark.parametrize("quantity", ["N_pk", "I_pk", "I_pmk", "S_k", "S_pk"])
    def test_reached_at_large_momentum(self, quantity):
        rep = measures.report(ModeParams(1.0, 1e3), CANON_COSMO)
        assert getattr(rep, quantity) == pytest.approx(measures.asymptote(quantity, HALF), abs=1e-10)


class TestReport:
    def test_canonical(self):
        rep = measures.report(CANON_MODE, CANON_COSMO)
        assert rep.gamma_sq == pytest.approx(0.233438786893425, rel=1e-13)
        assert rep.I_pmk == pytest.approx(0.45063899921, abs=1e-10)
        assert abs(rep.monogamy_residual) < 1e-8
        assert rep.terms_used > 3 and rep.tail_bound < 1e-9

    @given(log_param, log_param, log_param, log_param, chis)
    def test_monogamy_residual(self, eps, rho, m, k, chi):
        rep = measures.report(ModeParams(m, k, chi), CosmologyParams(eps, rho))
        assert abs(rep.monogamy_residual) < 1e-8

    def test_to_dict_keys(self):
        d = measures.report(CANON_MODE, CANON_COSMO).to_dict()
        assert {"N_pk", "S_pmk", "terms_used", "tail_bound"} <= set(d)

    def test_flat(self):
        rep = measures.report(ModeParams(1.0, 1.0, 0.3), CosmologyParams(0.0, 1.0))
        assert rep.N_pk == pytest.approx(math.log2(1 + 2 * 0.3 * math.sqrt(1 - 0.09)))
        assert rep.I_pmk == 0.0
