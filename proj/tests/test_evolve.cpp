#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fnpar/error.hpp"
#include "fnpar/evolve.hpp"

using namespace fnpar;

namespace {

double heat_kernel(double x, double t) { return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t); }

GridField gaussian(const Grid& g, double amp, double width = 1.0) {
    GridField f = GridField::sample(
        g, [&](std::span<const double> x) { return amp * std::exp(-x[0] * x[0] / (2.0 * width * width)); });
    f.apply_dirichlet();
    return f;
}

GridField random_bumps(std::mt19937_64& rng, const Grid& g, double lo = 0.0) {
    std::uniform_real_distribution<double> c(-3.0, 3.0), a(lo, 1.0), w(0.3, 2.0);
    double bumps[4][3];
    for (auto& b : bumps) {
        b[0] = c(rng);
        b[1] = a(rng);
        b[2] = w(rng);
    }
    GridField f = GridField::sample(g, [&](std::span<const double> x) {
        double v = 0.0;
        for (const auto& b : bumps) v += b[1] * std::exp(-(x[0] - b[0]) * (x[0] - b[0]) / b[2]);
        return v;
    });
    f.apply_dirichlet();
    return f;
}

}  // namespace

TEST(Semigroup, HeatKernelOracle) {
    const Grid g(1, 10.0, 401);
    const GridField f0 = GridField::sample(g, [](std::span<const double> x) { return heat_kernel(x[0], 0.5); });
    const GridField f1 = semigroup_evolve(f0, EllipticOperator::laplacian(1), 0.5);
    const GridField exact = GridField::sample(g, [](std::span<const double> x) { return heat_kernel(x[0], 1.0); });
    EXPECT_LE(sup_norm_diff(f1, exact), 1e-3);
}

TEST(Semigroup, ConstantsAndZeroStep) {
    const Grid g(1, 2.0, 21);
    const GridField c(g, std::vector<double>(21, 3.25), Boundary::Frozen);
    const auto op = EllipticOperator::pucci_minus(1, 1.0, 2.0);
    EXPECT_EQ(semigroup_evolve(c, op, 0.3).values, c.values);
    std::mt19937_64 rng(1);
    const GridField r = random_bumps(rng, g);
    EXPECT_EQ(semigroup_step(r, op, 0.0).values, r.values);
    EXPECT_EQ(semigroup_evolve(r, op, 0.0).values, r.values);
}

TEST(Semigroup, RejectsUnstableStep) {
    const Grid g(1, 2.0, 21);
    const GridField f(g);
    const auto op = EllipticOperator::pucci_plus(1, 1.0, 2.0);
    const double limit = cfl_limit(g, 2.0);
    EXPECT_NO_THROW(semigroup_step(f, op, limit));
    try {
        semigroup_step(f, op, 1.01 * limit);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::StepRejected);
    }
    EXPECT_THROW(semigroup_step(f, op, -1e-3), Error);
}

TEST(Semigroup, ChooseDtRespectsCapAndSafety) {
    const Grid g(2, 1.0, 21);
    EXPECT_DOUBLE_EQ(cfl_limit(g, 2.0), 0.01 / 8.0);
    StepControl ctl;
    EXPECT_DOUBLE_EQ(choose_dt(g, 2.0, ctl), 0.9 * 0.01 / 8.0);
    ctl.dt_cap = 1e-4;
    EXPECT_DOUBLE_EQ(choose_dt(g, 2.0, ctl), 1e-4);
}

TEST(Semigroup, NonexpansionExamples) {
    const Grid g(1, 5.0, 101);
    const auto op = EllipticOperator::pucci_minus(1, 1.0, 2.0);
    std::mt19937_64 rng(2);
    const GridField phi = random_bumps(rng, g);
    EXPECT_EQ(semigroup_nonexpansion_check(phi, phi, op, 0.1), 0.0);

    GridField phic(g, Boundary::Frozen), shifted(g, Boundary::Frozen);
    for (std::size_t k = 0; k < g.size(); ++k) {
        phic[k] = phi[k];
        shifted[k] = phi[k] + 0.75;
    }
    EXPECT_NEAR(semigroup_nonexpansion_check(phic, shifted, op, 0.1), 1.0, 1e-12);

    for (int trial = 0; trial < 10; ++trial) {
        const GridField a = random_bumps(rng, g);
        const GridField b = random_bumps(rng, g);
        EXPECT_LE(semigroup_nonexpansion_check(a, b, op, 0.2), 1.0 + 1e-8);
    }
}

TEST(Semigroup, ShiftEquivarianceAndOrder) {
    const Grid g(1, 5.0, 101);
    std::mt19937_64 rng(3);
    for (const auto& op : {EllipticOperator::pucci_plus(1, 1.0, 2.0), EllipticOperator::barenblatt(1, 0.5)}) {
        GridField phi = random_bumps(rng, g);
        phi.boundary = Boundary::Frozen;
        GridField plus = phi;
        for (double& v : plus.values) v += 1.5;
        const GridField s0 = semigroup_evolve(phi, op, 0.1);
        const GridField s1 = semigroup_evolve(plus, op, 0.1);
        for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(s1[k], s0[k] + 1.5, 1e-12);

        const GridField lo = random_bumps(rng, g);
        GridField hi = lo;
        const GridField extra = random_bumps(rng, g);
        for (std::size_t k = 0; k < g.size(); ++k) hi[k] += extra[k];
        const GridField slo = semigroup_evolve(lo, op, 0.1);
        const GridField shi = semigroup_evolve(hi, op, 0.1);
        for (std::size_t k = 0; k < g.size(); ++k) EXPECT_LE(slo[k], shi[k] + 1e-10);
    }
}

TEST(System, ZeroStateStaysZero) {
    const Grid g(1, 3.0, 61);
    SystemProblem pr{EllipticOperator::laplacian(1), EllipticOperator::laplacian(1), 2.0, 3.0};
    StepControl ctl;
    ctl.t_end = 0.2;
    const Trajectory tr = evolve_system(pr, SystemState(GridField(g), GridField(g)), ctl);
    EXPECT_EQ(sup_norm(tr.final_state().u1), 0.0);
    EXPECT_EQ(sup_norm(tr.final_state().u2), 0.0);
    EXPECT_FALSE(tr.final_state().blown_up);
    EXPECT_NEAR(tr.final_state().t, 0.2, 1e-12);
}

TEST(System, LaplacianBlowsUpAtPEqualsTwo) {
    const Grid g(1, 12.0, 481);
    SystemProblem pr{EllipticOperator::laplacian(1), EllipticOperator::laplacian(1), 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 5.0;
    const Trajectory tr = evolve_system(pr, SystemState(gaussian(g, 5.0), gaussian(g, 5.0)), ctl, 1000);
    const SystemState& s = tr.final_state();
    ASSERT_TRUE(s.blown_up);
    ASSERT_TRUE(s.blowup_time.has_value());
    EXPECT_GT(*s.blowup_time, 0.0);
    EXPECT_LT(*s.blowup_time, ctl.t_end);
    EXPECT_THROW(system_step(s, pr, 1e-4, ctl), Error);
}

TEST(System, SourceFreeMatchesSemigroup) {
    const Grid g(1, 4.0, 81);
    std::mt19937_64 rng(4);
    const GridField a = random_bumps(rng, g), b = random_bumps(rng, g);
    const auto op1 = EllipticOperator::pucci_plus(1, 1.0, 2.0);
    const auto op2 = EllipticOperator::barenblatt(1, 0.25);
    SystemProblem pr{op1, op2, 3.0, 2.0, false};
    const double dt = 0.9 * cfl_limit(g, pr.Lambda_max());
    SystemState s(a, b);
    GridField sa = a, sb = b;
    for (int n = 0; n < 50; ++n) {
        s = system_step(s, pr, dt, StepControl{});
        sa = semigroup_step(sa, op1, dt);
        sb = semigroup_step(sb, op2, dt);
    }
    EXPECT_EQ(s.u1.values, sa.values);
    EXPECT_EQ(s.u2.values, sb.values);
    EXPECT_NEAR(s.t, 50 * dt, 1e-15);
}

TEST(System, RejectsBadInputs) {
    const Grid g(1, 3.0, 61);
    SystemProblem pr{EllipticOperator::laplacian(1), EllipticOperator::laplacian(1), 0.5, 2.0};
    EXPECT_THROW(system_step(SystemState(GridField(g), GridField(g)), pr, 1e-4, StepControl{}), Error);
    EXPECT_THROW(SystemState(GridField(g), GridField(Grid(1, 3.0, 63))), Error);
    SystemState blown{GridField(g), GridField(g)};
    blown.blown_up = true;
    pr.p = 2.0;
    try {
        system_step(blown, pr, 1e-4, StepControl{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidState);
    }
}

TEST(System, NonnegativeDataStayNonnegative) {
    const Grid g(1, 5.0, 101);
    std::mt19937_64 rng(5);
    SystemProblem pr{EllipticOperator::pucci_plus(1, 1.0, 2.0), EllipticOperator::pucci_minus(1, 1.0, 2.0), 2.0, 3.0};
    StepControl ctl;
    ctl.t_end = 0.3;
    double worst = 0.0;
    evolve_system(pr, SystemState(random_bumps(rng, g), random_bumps(rng, g)), ctl, 1, [&](const SystemState& s) {
        for (const GridField* f : {&s.u1, &s.u2}) {
            for (double v : f->values) worst = std::min(worst, v);
        }
    });
    EXPECT_GE(worst, -1e-8);
}

TEST(System, BlowupMonotoneInInitialData) {
    const Grid g(1, 12.0, 241);
    SystemProblem pr{EllipticOperator::laplacian(1), EllipticOperator::laplacian(1), 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 3.0;
    const auto run = [&](double amp) {
        return evolve_system(pr, SystemState(gaussian(g, amp), gaussian(g, amp)), ctl, 100000).final_state();
    };
    const SystemState small = run(5.0);
    const SystemState large = run(8.0);
    ASSERT_TRUE(small.blown_up);
    ASSERT_TRUE(large.blown_up);
    EXPECT_LE(*large.blowup_time, *small.blowup_time);
}

TEST(Comparison, IdenticalAndZeroBelow) {
    const Grid g(1, 5.0, 101);
    std::mt19937_64 rng(6);
    SystemProblem pr{EllipticOperator::pucci_minus(1, 1.0, 2.0), EllipticOperator::pucci_plus(1, 1.0, 2.0), 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 0.2;
    const Trajectory a = evolve_system(pr, SystemState(random_bumps(rng, g), random_bumps(rng, g)), ctl, 10);
    EXPECT_EQ(comparison_check(a, a).max_violation, 0.0);

    GridField n1 = random_bumps(rng, g), n2 = random_bumps(rng, g);
    for (double& v : n1.values) v = -v;
    for (double& v : n2.values) v = -v;
    const Trajectory sub = evolve_system(pr, SystemState(n1, n2), ctl, 10);
    const Trajectory zero = evolve_system(pr, SystemState(GridField(g), GridField(g)), ctl, 10);
    const ComparisonReport r = comparison_check(sub, zero);
    EXPECT_EQ(r.max_violation, 0.0);
    EXPECT_EQ(r.component, 0);

    StepControl shorter = ctl;
    shorter.t_end = 0.1;
    const Trajectory other = evolve_system(pr, SystemState(GridField(g), GridField(g)), shorter, 10);
    EXPECT_THROW(comparison_check(a, other), Error);
}

TEST(Comparison, OrderedPucciPairs) {
    const Grid g(1, 5.0, 101);
    std::mt19937_64 rng(7);
    SystemProblem pr{EllipticOperator::pucci_minus(1, 1.0, 2.0), EllipticOperator::pucci_plus(1, 1.0, 2.0), 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 0.2;
    for (int trial = 0; trial < 5; ++trial) {
        const GridField a1 = random_bumps(rng, g), a2 = random_bumps(rng, g);
        GridField b1 = a1, b2 = a2;
        const GridField e1 = random_bumps(rng, g), e2 = random_bumps(rng, g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            b1[k] += e1[k];
            b2[k] += e2[k];
        }
        const Trajectory sub = evolve_system(pr, SystemState(a1, a2), ctl, 5);
        const Trajectory sup = evolve_system(pr, SystemState(b1, b2), ctl, 5);
        ASSERT_FALSE(sup.final_state().blown_up);
        EXPECT_LE(comparison_check(sub, sup).max_violation, 1e-6);
    }
}

TEST(Duhamel, ZeroDataAndUncoupled) {
    const Grid g(1, 4.0, 81);
    SystemProblem pr{EllipticOperator::laplacian(1), EllipticOperator::pucci_plus(1, 1.0, 2.0), 2.0, 2.0};
    const DuhamelResult z = duhamel_fixed_point(GridField(g), GridField(g), pr, 0.05, 1e-10, 5);
    EXPECT_EQ(z.iterations, 1);
    EXPECT_EQ(sup_norm(z.trajectory.final_state().u1), 0.0);

    std::mt19937_64 rng(8);
    const GridField a = random_bumps(rng, g), b = random_bumps(rng, g);
    pr.coupled = false;
    const DuhamelResult u = duhamel_fixed_point(a, b, pr, 0.05, 1e-10, 5);
    EXPECT_EQ(u.iterations, 1);
    const double dt = u.trajectory.times[1] - u.trajectory.times[0];
    GridField sa = a, sb = b;
    for (std::size_t n = 1; n < u.trajectory.times.size(); ++n) {
        sa = semigroup_step(sa, pr.op1, dt);
        sb = semigroup_step(sb, pr.op2, dt);
    }
    EXPECT_EQ(u.trajectory.final_state().u1.values, sa.values);
    EXPECT_EQ(u.trajectory.final_state().u2.values, sb.values);
}

TEST(Duhamel, ContractsAndMatchesDirectStepping) {
    const Grid g(1, 8.0, 321);
    SystemProblem pr{EllipticOperator::laplacian(1), EllipticOperator::laplacian(1), 2.0, 2.0};
    const GridField u0 = gaussian(g, 1.0);
    const DuhamelResult d = duhamel_fixed_point(u0, u0, pr, 0.05, 1e-8, 20);
    EXPECT_LT(d.contraction_factor, 1.0);
    EXPECT_LE(d.iterations, 20);
    StepControl ctl;
    ctl.t_end = 0.05;
    const Trajectory direct = evolve_system(pr, SystemState(u0, u0), ctl);
    ASSERT_EQ(direct.snapshots.size(), d.trajectory.snapshots.size());
    double dist = 0.0;
    for (std::size_t n = 0; n < direct.snapshots.size(); ++n) {
        dist = std::max(dist, sup_norm_diff(direct.snapshots[n].u1, d.trajectory.snapshots[n].u1));
    }
    EXPECT_LE(dist, 5e-3);
}

TEST(Duhamel, DivergesForLongHorizon) {
    const Grid g(1, 4.0, 41);
    SystemProblem pr{EllipticOperator::laplacian(1), EllipticOperator::laplacian(1), 3.0, 3.0};
    const GridField u0 = gaussian(g, 20.0);
    try {
        duhamel_fixed_point(u0, u0, pr, 1.0, 1e-10, 30);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FixedPointDiverged);
    }
}

TEST(Rescale, NuZeroIsExactAndZeroSolution) {
    const Grid g(1, 5.0, 101);
    std::mt19937_64 rng(9);
    SystemProblem pr{EllipticOperator::pucci_minus(1, 1.0, 2.0), EllipticOperator::pucci_plus(1, 1.0, 2.0), 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 0.2;
    const Trajectory tr = evolve_system(pr, SystemState(random_bumps(rng, g), random_bumps(rng, g)), ctl, 7);
    EXPECT_EQ(exponential_rescale_check(tr, pr, 0.0, ctl), 0.0);
    const Trajectory z = evolve_system(pr, SystemState(GridField(g), GridField(g)), ctl, 7);
    EXPECT_EQ(exponential_rescale_check(z, pr, 1.0, ctl), 0.0);
    EXPECT_LE(exponential_rescale_check(tr, pr, 1.0, ctl), 1e-3);
}
