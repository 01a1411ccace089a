"""Analysis constants, schedules, and exact combinatorial identities.

Numeric reference values were recomputed independently from the defining
formulas (direct evaluation, no shared code) and frozen here.
"""

import math
from fractions import Fraction

import pytest

from zosparse.theory import (
    BASELINE_CONSTANT,
    InfeasibleParametersError,
    TheoryParams,
    check_conditional_membership,
    check_egamma,
    check_egamma_grid,
    check_partition_probability,
    closed_form_maximizer,
    compute_C1,
    compute_C2,
    delta_label,
    delta_noise,
    explicit_schedule,
    falling_factorial,
    lambda1,
    lambda2,
    partition_probability_suite,
    practical_schedule,
    ratio_test_margin,
    step_mass,
    theoretical_lower_bound,
    theoretical_schedule,
    verify_schedule_conditions,
)

DEFAULTS = TheoryParams()


class TestFallingFactorial:
    def test_known_values(self):
        assert falling_factorial(5, 3) == 60
        assert falling_factorial(5, 5) == 120
        assert falling_factorial(10, 1) == 10

    def test_zero_terms_is_one(self):
        assert falling_factorial(5, 0) == 1
        assert falling_factorial(0, 0) == 1

    def test_overlong_product_hits_zero(self):
        assert falling_factorial(3, 4) == 0


class TestTheoryParams:
    def test_defaults_are_valid(self):
        p = TheoryParams()
        assert p.D == 18 and p.delta == 0.5 and p.phi == 0.64 and p.theta == 0.08

    def test_rejects_bad_alpha_rho(self):
        with pytest.raises(ValueError):
            TheoryParams(rho=0.5, alpha=0.5)

    def test_rejects_out_of_range_probabilities(self):
        with pytest.raises(ValueError):
            TheoryParams(delta=1.0)
        with pytest.raises(ValueError):
            TheoryParams(phi=0.0)

    def test_rejects_small_divisor(self):
        with pytest.raises(ValueError):
            TheoryParams(D=1)

    def test_budget_split_sums_to_geometric_slice(self):
        p = DEFAULTS
        for r in (1, 2, 5):
            total = delta_label(p, r) + delta_noise(p, r)
            assert total == pytest.approx((1 - p.phi) * p.phi ** (r - 1) * p.delta)


class TestFeasibility:
    def test_first_step_mass_frozen_value(self):
        # Independent recomputation: 18 * 0.2208 * ln(3/0.0368) / ln(3/0.023552)
        x1 = step_mass(DEFAULTS, DEFAULTS.D, 1)
        assert x1 == pytest.approx(2.7508614459690537, abs=1e-12)

    def test_defaults_pass_all_conditions(self):
        report = verify_schedule_conditions(DEFAULTS)
        assert report.growth_ok and report.base_ok and report.amplification_ok
        assert report.all_ok

    def test_amplification_frozen_value(self):
        report = verify_schedule_conditions(DEFAULTS)
        assert report.amplification == pytest.approx(1.0317026943761873, abs=1e-12)
        assert report.amplification > 1.0

    def test_small_divisor_heavy_noise_fails(self):
        p = TheoryParams(D=2, delta=0.9, phi=0.01, theta=0.5)
        report = verify_schedule_conditions(p)
        assert not report.base_ok
        assert not report.all_ok

    def test_lower_bound_first_term(self):
        p = DEFAULTS
        report = verify_schedule_conditions(p)
        denominator = (1 - p.theta) * (1 - p.phi) * p.phi**2 * p.delta
        expected = report.amplification / denominator
        assert theoretical_lower_bound(p, 1) == pytest.approx(expected)
        assert theoretical_lower_bound(p, 1) <= p.D

    def test_lower_bound_is_doubly_exponential(self):
        b1 = theoretical_lower_bound(DEFAULTS, 1)
        b2 = theoretical_lower_bound(DEFAULTS, 2)
        b3 = theoretical_lower_bound(DEFAULTS, 3)
        assert b2 / b1 < b3 / b2  # ratios themselves grow

    def test_lower_bound_rejects_bad_round(self):
        with pytest.raises(ValueError):
            theoretical_lower_bound(DEFAULTS, 0)


class TestSchedules:
    def test_practical_first_three_terms(self):
        sched = practical_schedule(20)
        assert [sched.value(r) for r in (1, 2, 3)] == [20, 89, 839]

    def test_practical_exact_integer_growth(self):
        # floor(89^1.5) computed exactly: isqrt(89^3) = isqrt(704969) = 839.
        assert math.isqrt(89**3) == 839
        sched = practical_schedule(839)
        assert sched.value(2) == math.isqrt(839**3) == 24302

    def test_practical_stalls_at_two(self):
        sched = practical_schedule(2)
        assert [sched.value(r) for r in (1, 2, 3, 4)] == [2, 2, 2, 2]

    def test_practical_rejects_degenerate_start(self):
        with pytest.raises(ValueError):
            practical_schedule(1)

    def test_lazy_extension_is_cheap(self):
        sched = practical_schedule(20)
        assert sched.value(6) > sched.value(5) > sched.value(4)
        assert len(sched.terms) == 6

    def test_theoretical_first_three_terms(self):
        sched = theoretical_schedule(DEFAULTS, length=3)
        assert [sched.value(r) for r in (1, 2, 3)] == [18, 29, 48]

    def test_theoretical_terms_nondecreasing(self):
        sched = theoretical_schedule(DEFAULTS, length=10)
        terms = [sched.value(r) for r in range(1, 11)]
        assert all(a <= b for a, b in zip(terms, terms[1:]))

    def test_theoretical_respects_lower_bound(self):
        sched = theoretical_schedule(DEFAULTS, length=10)
        for r in range(1, 11):
            assert sched.value(r) >= theoretical_lower_bound(DEFAULTS, r)

    def test_theoretical_step_mass_monotone(self):
        sched = theoretical_schedule(DEFAULTS, length=10)
        masses = [step_mass(DEFAULTS, sched.value(r), r) for r in range(1, 11)]
        assert all(a <= b for a, b in zip(masses, masses[1:]))

    def test_theoretical_rejects_infeasible(self):
        p = TheoryParams(D=2, delta=0.9, phi=0.01, theta=0.5)
        with pytest.raises(InfeasibleParametersError) as excinfo:
            theoretical_schedule(p)
        assert "x1" in str(excinfo.value)
        assert excinfo.value.report.all_ok is False

    def test_explicit_replays_and_holds_last(self):
        sched = explicit_schedule([4, 9, 30])
        assert [sched.value(r) for r in (1, 2, 3, 4, 10)] == [4, 9, 30, 30, 30]

    def test_explicit_rejects_bad_values(self):
        with pytest.raises(ValueError):
            explicit_schedule([])
        with pytest.raises(ValueError):
            explicit_schedule([4, 1])


class TestConstants:
    def test_c1_bracket(self):
        c1 = compute_C1()
        assert 2.2886 <= c1 <= 2.2905
        assert c1 < 2.29

    def test_c1_matches_closed_form_argmax(self):
        argmax = closed_form_maximizer()
        assert argmax == pytest.approx(0.648887, abs=1e-3)
        assert ratio_test_margin(argmax) == pytest.approx(compute_C1(), abs=1e-9)

    def test_margin_is_below_peak_away_from_argmax(self):
        peak = compute_C1()
        argmax = closed_form_maximizer()
        for offset in (-0.3, -0.1, 0.1, 0.3):
            assert ratio_test_margin(argmax + offset) < peak

    def test_c2_bracket(self):
        c2 = compute_C2()
        assert 134.78 <= c2 <= 134.98

    def test_c2_improvement_factor(self):
        assert BASELINE_CONSTANT / compute_C2() >= 4000.0

    def test_c2_formula_decomposition(self):
        p = DEFAULTS
        scale = math.sqrt(2 * math.log(3 / (p.theta * (1 - p.phi) * p.delta)))
        assert compute_C2(p) == pytest.approx((compute_C1() * p.D + 1 / p.D) * scale)


class TestNoiseFloors:
    def test_lambda1_known_value(self):
        assert lambda1(3, 10, 2.0) == pytest.approx(663.0)

    def test_lambda1_rejects_empty_probe_set(self):
        with pytest.raises(ValueError):
            lambda1(0, 10, 1.0)

    def test_lambda2_known_value(self):
        # 2 * 1.5 * [2.0 * (16 + 4 + 0.5) * 4] = 492
        assert lambda2(4, 1.5, 2.0) == pytest.approx(492.0)


class TestIsolationInequality:
    def test_trivial_when_s_is_one(self):
        # Empty product on the left: 1 >= e^{-gamma} always.
        assert check_egamma(10, 1, Fraction(1, 2))
        assert check_egamma(200, 1, Fraction(9, 10))

    def test_dense_support_case(self):
        assert check_egamma(10, 10, Fraction(9, 10))

    def test_exact_fraction_at_floor_boundary(self):
        # gamma*d/s = 1 exactly; binary 0.3 would floor to 0 instead.
        assert check_egamma(10, 3, Fraction(3, 10))

    def test_rejects_out_of_range_gamma(self):
        with pytest.raises(ValueError):
            check_egamma(10, 2, 0)
        with pytest.raises(ValueError):
            check_egamma(10, 2, 1)

    def test_grid_covers_and_passes(self):
        checked, failures = check_egamma_grid()
        assert checked == 33885
        assert failures == []


class TestPartitionProbability:
    def test_pair_example(self):
        empirical, formula, equal = check_partition_probability(4, 2, 1, {1, 2}, 1)
        assert formula == Fraction(1, 3)
        assert empirical == Fraction(1, 3)
        assert equal

    def test_singleton_h_is_group_density(self):
        empirical, formula, equal = check_partition_probability(5, 2, 1, {3}, 3)
        assert formula == Fraction(2, 5)
        assert equal

    def test_full_h_impossible_event(self):
        # |S| = 2 cannot intersect all of {1..4} in exactly one index.
        empirical, formula, equal = check_partition_probability(4, 2, 1, {1, 2, 3, 4}, 2)
        assert empirical == 0
        assert formula == 0
        assert equal

    def test_ragged_last_group(self):
        # d=5, n=2: group 3 has a single member, so (1/5) * (4)_1/(4)_1.
        empirical, formula, equal = check_partition_probability(5, 2, 3, {1, 4}, 4)
        assert equal
        assert formula == Fraction(1, 5)

    def test_rejects_large_d(self):
        with pytest.raises(ValueError):
            check_partition_probability(9, 2, 1, {1}, 1)

    def test_rejects_j_outside_h(self):
        with pytest.raises(ValueError):
            check_partition_probability(4, 2, 1, {1, 2}, 3)

    def test_conditional_membership_with_j_present(self):
        empirical, formula, equal = check_conditional_membership(4, 2, 1, {1}, {1}, 2)
        assert formula == Fraction(1, 3)
        assert equal

    def test_conditional_membership_empty_j(self):
        empirical, formula, equal = check_conditional_membership(4, 2, 1, {1}, set(), 2)
        assert formula == Fraction(2, 3)
        assert equal

    def test_conditional_membership_rejects_impossible_event(self):
        # Group 1 of d=4, n=4 is everything; S cap {1} = empty never happens.
        with pytest.raises(ValueError):
            check_conditional_membership(4, 4, 1, {1}, set(), 2)

    def test_suite_small_sizes_all_equal(self):
        checked, failures = partition_probability_suite(max_d=4, max_h=2)
        assert checked > 0
        assert failures == []
