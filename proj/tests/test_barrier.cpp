#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "fnpar/barrier.hpp"
#include "fnpar/error.hpp"

using namespace fnpar;

namespace {

const Grid kGrid(1, 12.0, 481);

const EllipticOperator& lap() {
    static const EllipticOperator op = EllipticOperator::laplacian(1);
    return op;
}
const EllipticOperator& pminus() {
    static const EllipticOperator op = EllipticOperator::pucci_minus(1, 1.0, 2.0);
    return op;
}
const EllipticOperator& pplus() {
    static const EllipticOperator op = EllipticOperator::pucci_plus(1, 1.0, 2.0);
    return op;
}

const EigenPair& pair_of(const EllipticOperator& op) {
    static std::map<std::string, EigenPair> cache;
    auto it = cache.find(op.name());
    if (it == cache.end()) it = cache.emplace(op.name(), power_iterate(op, kGrid)).first;
    return it->second;
}

EigenPair fake_pair(const Grid& g, double alpha) {
    EigenPair e(GridField::sample(g, [](std::span<const double> y) { return std::exp(-0.25 * y[0] * y[0]); }));
    e.alpha = alpha;
    e.converged = true;
    e.fit = {0.25, 1.0, 10};
    return e;
}

}  // namespace

TEST(Exponents, ClosedFormAndIdentities) {
    const auto ab = barrier_exponents(4.0, 4.0, 0.5, 0.5);
    EXPECT_DOUBLE_EQ(ab[0], 0.5 - 5.0 / 15.0);
    EXPECT_DOUBLE_EQ(ab[1], 0.5 - 5.0 / 15.0);
    EXPECT_THROW(barrier_exponents(1.0, 1.0, 0.5, 0.5), Error);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> e(1.0, 8.0), al(0.05, 3.0);
    for (int k = 0; k < 1000; ++k) {
        const double p = e(rng), q = e(rng), a1 = al(rng), a2 = al(rng);
        if (p * q <= 1.0 + 1e-6) continue;
        const auto [a, b] = barrier_exponents(p, q, a1, a2);
        const auto r = exponent_identity_residuals(p, q, a1, a2, a, b);
        const double scale = std::max({1.0, std::abs(a) * q, std::abs(b) * p, a1 * q, a2 * p});
        EXPECT_LE(std::abs(r[0]), 1e-12 * scale);
        EXPECT_LE(std::abs(r[1]), 1e-12 * scale);
    }
}

TEST(Epsilon, DocumentedExamples) {
    const EpsilonChoice c = select_epsilon(2.0, 2.0, 1.0, 1.0, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(c.epsilon, 0.9);
    EXPECT_TRUE(c.constraint1_ok && c.constraint2_ok);
    EXPECT_DOUBLE_EQ(select_epsilon(2.0, 2.0, 0.25, 1.0, 4.0, 1.0).epsilon, 0.05625);
    EXPECT_DOUBLE_EQ(select_epsilon(3.0, 2.0, 1.0, 1.0, 4.0, 1.0, 1.0).epsilon, 0.5);
}

TEST(Epsilon, UnitExponentRecordsConstraint) {
    const EpsilonChoice ok = select_epsilon(1.0, 3.0, 0.5, 0.25, 0.4, 1.0);
    EXPECT_TRUE(ok.constraint1_ok);
    EXPECT_DOUBLE_EQ(ok.epsilon, 0.9 * 0.5);
    const EpsilonChoice bad = select_epsilon(1.0, 3.0, 0.3, 0.25, 0.4, 1.0);
    EXPECT_FALSE(bad.constraint1_ok);
    EXPECT_TRUE(bad.constraint2_ok);
}

TEST(Epsilon, Errors) {
    try {
        select_epsilon(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
    }
    try {
        select_epsilon(2.0, 2.0, 1.0, 1.0, HUGE_VAL, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateRatio);
    }
    EXPECT_THROW(select_epsilon(2.0, 2.0, -1.0, 1.0, 1.0, 1.0), Error);
}

TEST(Admissibility, LaplacianPairAtFour) {
    const AdmissibilityFlags f = check_admissibility(4.0, 4.0, lap(), lap(), pair_of(lap()), pair_of(lap()), 0.01);
    EXPECT_TRUE(f.pq_gt_one && f.p_q_ge_one && f.ellipticity_exponents && f.exponent_thresholds);
    EXPECT_TRUE(f.ratio1_bounded_envelope && f.ratio2_bounded_envelope);
    EXPECT_TRUE(f.admissible());
}

TEST(Admissibility, FailingHypotheses) {
    const EigenPair& e = pair_of(lap());
    const AdmissibilityFlags one = check_admissibility(1.0, 1.0, lap(), lap(), e, e);
    EXPECT_FALSE(one.pq_gt_one);
    EXPECT_FALSE(one.admissible());

    const AdmissibilityFlags weak = check_admissibility(1.5, 1.5, pminus(), pplus(), pair_of(pminus()), pair_of(pplus()));
    EXPECT_FALSE(weak.ellipticity_exponents);
    EXPECT_FALSE(weak.admissible());

    // p = q = 3 sits on the critical curve for the Laplacian; the margin keeps it uncertified.
    const AdmissibilityFlags critical = check_admissibility(3.0, 3.0, lap(), lap(), e, e, 0.01);
    EXPECT_FALSE(critical.exponent_margin_ok);
    EXPECT_FALSE(critical.admissible());

    EigenPair unconverged = e;
    unconverged.converged = false;
    EXPECT_THROW(check_admissibility(4.0, 4.0, lap(), lap(), unconverged, e), Error);
}

TEST(Certificate, LaplacianResidualsAndControls) {
    const EigenPair& e = pair_of(lap());
    const BarrierCertificate c = build_certificate(4.0, 4.0, lap(), lap(), e, e);
    ASSERT_TRUE(c.valid());
    EXPECT_EQ(c.epsilon, c.epsilon_tilde);
    EXPECT_EQ(c.t_samples, (std::vector<double>{0.0, 0.5, 1.0, 2.0, 5.0, 10.0}));
    EXPECT_GE(c.residual_min[0], -1e-3);
    EXPECT_GE(c.residual_min[1], -1e-3);
    EXPECT_TRUE(c.ratio_bounds_consistent());
    const auto id = exponent_identity_residuals(c.p, c.q, c.alpha1, c.alpha2, c.a, c.b);
    EXPECT_LE(std::abs(id[0]), 1e-12);
    EXPECT_LE(std::abs(id[1]), 1e-12);
    // The chosen amplitude satisfies the nodewise inequalities on the profile grid.
    for (std::size_t k : kGrid.interior_nodes()) {
        const double p1 = e.psi[k];
        EXPECT_GE(c.epsilon * c.a * p1, std::pow(c.epsilon, 4.0) * std::pow(p1, 4.0));
    }

    BarrierOptions half;
    half.epsilon_override = 0.5 * c.epsilon;
    EXPECT_TRUE(build_certificate(4.0, 4.0, lap(), lap(), e, e, half).valid());

    BarrierOptions big;
    big.epsilon_override = 10.0 * c.epsilon;
    const BarrierCertificate inflated = build_certificate(4.0, 4.0, lap(), lap(), e, e, big);
    EXPECT_FALSE(inflated.residual_ok);
    EXPECT_FALSE(inflated.valid());
    EXPECT_LT(std::min(inflated.residual_min[0], inflated.residual_min[1]), -1e-3);
}

TEST(Certificate, UncoupledResidualIsNonnegative) {
    const EigenPair& e1 = pair_of(pminus());
    const EigenPair& e2 = pair_of(pplus());
    BarrierOptions o;
    o.coupled = false;
    o.epsilon_override = 37.0;  // any amplitude works without the coupling
    const BarrierCertificate c = build_certificate(4.0, 4.0, pminus(), pplus(), e1, e2, o);
    EXPECT_GE(c.residual_min[0], -1e-3);
    EXPECT_GE(c.residual_min[1], -1e-3);
}

TEST(Certificate, PucciPairValid) {
    const BarrierCertificate c = build_certificate(4.0, 4.0, pminus(), pplus(), pair_of(pminus()), pair_of(pplus()));
    EXPECT_TRUE(c.valid());
    EXPECT_TRUE(c.ratio_bounds_consistent());
    EXPECT_GT(c.a, 0.01);
    EXPECT_GT(c.b, 0.01);
}

TEST(Certificate, RejectsInadmissibleAndMismatchedGrids) {
    EXPECT_THROW(build_certificate(2.0, 2.0, lap(), lap(), pair_of(lap()), pair_of(lap())), Error);
    const EigenPair a = fake_pair(Grid(1, 12.0, 481), 0.5);
    const EigenPair b = fake_pair(Grid(1, 10.0, 401), 0.5);
    try {
        draft_certificate(4.0, 4.0, lap(), lap(), a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Coverage);
    }
}

TEST(BarrierField, MatchesDefinition) {
    const EigenPair& e = pair_of(lap());
    const GridField u0 = barrier_field(e, 0.3, 0.2, 0.0, kGrid);
    for (std::size_t k = 0; k < kGrid.size(); ++k) EXPECT_DOUBLE_EQ(u0[k], 0.3 * e.psi[k]);
    const GridField u1 = barrier_field(e, 0.3, 0.2, 1.0, kGrid);
    const GridField phi = self_similar_field(e, 2.0, kGrid);
    for (std::size_t k = 0; k < kGrid.size(); ++k) EXPECT_NEAR(u1[k], 0.3 * std::pow(2.0, 0.2) * phi[k], 1e-15);
}

TEST(Runs, CertifiedZeroAndLargeData) {
    const EigenPair& e = pair_of(lap());
    const BarrierCertificate c = build_certificate(4.0, 4.0, lap(), lap(), e, e);
    ASSERT_TRUE(c.valid());
    const SystemProblem pr{lap(), lap(), 4.0, 4.0};

    const BarrierRunReport ok = certify_global(c, e, e, pr, StepControl{}, 10.0);
    EXPECT_FALSE(ok.blown_up);
    EXPECT_NEAR(ok.t_reached, 10.0, 1e-9);
    EXPECT_LE(ok.max_ordering_violation, 1e-3);
    EXPECT_DOUBLE_EQ(ok.decay_exponent_predicted, c.a - c.alpha1);

    StepControl ctl;
    ctl.t_end = 10.0;
    const BarrierRunReport zero = run_from_barrier(c, e, e, pr, ctl, 0.0);
    EXPECT_FALSE(zero.blown_up);
    EXPECT_EQ(zero.max_ordering_violation, 0.0);
    EXPECT_EQ(zero.final_sup_norms[0], 0.0);

    const BarrierRunReport large = run_from_barrier(c, e, e, pr, ctl, 50.0);
    EXPECT_TRUE(large.blown_up);
    EXPECT_TRUE(large.blowup_time.has_value());

    BarrierCertificate invalid = c;
    invalid.residual_ok = false;
    EXPECT_THROW(certify_global(invalid, e, e, pr, StepControl{}, 10.0), Error);
}
