#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "fnpar/error.hpp"
#include "fnpar/harness.hpp"
#include "fnpar/kernels.hpp"

namespace fnpar::harness {

bool SelfcheckReport::pass() const {
    for (const auto& l : lines) {
        if (!l.pass) return false;
    }
    return !lines.empty();
}

std::string SelfcheckReport::text() const {
    std::ostringstream os;
    std::size_t passed = 0;
    for (const auto& l : lines) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s  %-28s measured=%.6e  bound=%.6e", l.pass ? "PASS" : "FAIL", l.name.c_str(),
                      l.measured, l.bound);
        os << buf;
        if (!l.note.empty()) os << "  (" << l.note << ")";
        os << '\n';
        passed += l.pass ? 1 : 0;
    }
    os << "selfcheck: " << passed << "/" << lines.size() << " passed; " << (pass() ? "OK" : "FAILED") << '\n';
    return os.str();
}

namespace {

SymMatrix random_sym(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SymMatrix x(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) x.set(i, j, u(rng));
    }
    return x;
}

std::vector<EllipticOperator> shipped_operators() {
    using op::Combine;
    return {EllipticOperator::laplacian(3),
            EllipticOperator::pucci_plus(3, 1.0, 2.0),
            EllipticOperator::pucci_minus(3, 1.0, 2.0),
            EllipticOperator::barenblatt(3, 0.5),
            EllipticOperator::minmax_2d(),
            EllipticOperator::composite(Combine::Max, {EllipticOperator::laplacian(2),
                                                       EllipticOperator::linear_trace(SymMatrix::identity(2) * 2.0)})};
}

// Steps u_t = -F(D^2 u) with dt = safety * h^2/(2 N Lambda) straight through the kernel, so an unstable
// safety factor shows up as growth instead of a rejected step.
GridField raw_evolve(GridField f, const EllipticOperator& op, double t_total, double safety) {
    const double dt_nominal = safety * cfl_limit(f.grid, op.Lambda());
    const auto steps = static_cast<std::size_t>(std::ceil(t_total / dt_nominal - 1e-9));
    const double dt = t_total / static_cast<double>(steps);
    GridField next(f.grid, f.boundary);
    for (std::size_t s = 0; s < steps; ++s) {
        kernels::explicit_step(op, f, kernels::StepTerms{.dt = dt}, next);
        std::swap(f, next);
    }
    return f;
}

CheckLine check_sandwich(std::mt19937_64& rng) {
    CheckLine l{"operator-sandwich", false, 0.0, 1e-10, "1000 random pairs per shipped kind"};
    const std::array<double, 3> point{0.0, 0.0, 0.0};
    for (const auto& op : shipped_operators()) {
        const std::span<const double> x(point.data(), static_cast<std::size_t>(op.dim()));
        for (int k = 0; k < 1000; ++k) {
            const SymMatrix a = random_sym(rng, op.dim());
            const SymMatrix b = random_sym(rng, op.dim());
            const double diff = op.eval(x, a) - op.eval(x, b);
            const double lo = pucci_minus(a - b, op.lambda(), op.Lambda());
            const double hi = pucci_plus(a - b, op.lambda(), op.Lambda());
            l.measured = std::max({l.measured, lo - diff, diff - hi});
        }
    }
    l.pass = l.measured <= l.bound;
    return l;
}

CheckLine check_duality(std::mt19937_64& rng) {
    CheckLine l{"pucci-duality", false, 0.0, 1e-12, "P+(-X) = -P-(X)"};
    for (int k = 0; k < 1000; ++k) {
        const SymMatrix a = random_sym(rng, 1 + k % 4);
        l.measured = std::max(l.measured, std::abs(pucci_plus(a * -1.0, 1.0, 2.0) + pucci_minus(a, 1.0, 2.0)));
    }
    l.pass = l.measured <= l.bound;
    return l;
}

CheckLine check_homogeneity(std::mt19937_64& rng) {
    CheckLine l{"operator-homogeneity", false, 0.0, 1e-12, "relative"};
    std::uniform_real_distribution<double> mu(0.0, 10.0);
    const std::array<double, 3> point{0.0, 0.0, 0.0};
    for (const auto& op : shipped_operators()) {
        const std::span<const double> x(point.data(), static_cast<std::size_t>(op.dim()));
        for (int k = 0; k < 200; ++k) {
            const SymMatrix a = random_sym(rng, op.dim());
            const double m = mu(rng);
            const double lhs = op.eval(x, a * m);
            const double rhs = m * op.eval(x, a);
            l.measured = std::max(l.measured, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        }
    }
    l.pass = l.measured <= l.bound;
    return l;
}

CheckLine check_quadratic(std::mt19937_64& rng) {
    CheckLine l{"hessian-quadratic-exactness", false, 0.0, 1e-9, "N=2 random quadratic"};
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double c11 = u(rng), c12 = u(rng), c22 = u(rng), b1 = u(rng), b2 = u(rng);
    const Grid g(2, 1.0, 21);
    const GridField f = GridField::sample(g, [&](std::span<const double> x) {
        return c11 * x[0] * x[0] + c12 * x[0] * x[1] + c22 * x[1] * x[1] + b1 * x[0] + b2 * x[1];
    });
    for (std::size_t k : g.interior_nodes()) {
        const SymMatrix h = hessian_at(f, k);
        l.measured = std::max({l.measured, std::abs(h(0, 0) - 2.0 * c11), std::abs(h(0, 1) - c12),
                               std::abs(h(1, 1) - 2.0 * c22)});
    }
    l.pass = l.measured <= l.bound;
    return l;
}

double heat_kernel(double x, double t) { return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t); }

CheckLine check_heat_kernel(double safety) {
    CheckLine l{"heat-kernel-oracle", false, 0.0, 1e-3, "N=1 h=0.05 R=10, t 0.5 -> 1.0"};
    const Grid g(1, 10.0, 401);
    const GridField f0 = GridField::sample(g, [](std::span<const double> x) { return heat_kernel(x[0], 0.5); });
    const GridField f1 = raw_evolve(f0, EllipticOperator::laplacian(1), 0.5, safety);
    const GridField exact = GridField::sample(g, [](std::span<const double> x) { return heat_kernel(x[0], 1.0); });
    l.measured = sup_norm_diff(f1, exact);
    l.pass = std::isfinite(l.measured) && l.measured <= l.bound;
    return l;
}

GridField random_bumps(std::mt19937_64& rng, const Grid& g) {
    std::uniform_real_distribution<double> c(-3.0, 3.0), a(0.1, 1.0), w(0.5, 2.0);
    std::array<std::array<double, 3>, 4> bumps{};
    for (auto& b : bumps) b = {c(rng), a(rng), w(rng)};
    GridField f = GridField::sample(g, [&](std::span<const double> x) {
        double v = 0.0;
        for (const auto& b : bumps) v += b[1] * std::exp(-(x[0] - b[0]) * (x[0] - b[0]) / b[2]);
        return v;
    });
    f.apply_dirichlet();
    return f;
}

CheckLine check_nonexpansion(std::mt19937_64& rng, double safety) {
    CheckLine l{"semigroup-nonexpansion", false, 0.0, 1.0 + 1e-8, "P-(1,2), N=1, t=0.1"};
    const Grid g(1, 6.0, 121);
    const EllipticOperator op = EllipticOperator::pucci_minus(1, 1.0, 2.0);
    const GridField a = random_bumps(rng, g);
    const GridField b = random_bumps(rng, g);
    const GridField sa = raw_evolve(a, op, 0.1, safety);
    const GridField sb = raw_evolve(b, op, 0.1, safety);
    l.measured = sup_norm_diff(sa, sb) / sup_norm_diff(a, b);
    l.pass = std::isfinite(l.measured) && l.measured <= l.bound;
    return l;
}

CheckLine check_positivity(std::mt19937_64& rng, double safety) {
    CheckLine l{"discrete-positivity", false, 0.0, 1e-12, "P+/P- system p=q=2, t=0.1; measured = max negative part"};
    const Grid g(1, 6.0, 121);
    const EllipticOperator op1 = EllipticOperator::pucci_plus(1, 1.0, 2.0);
    const EllipticOperator op2 = EllipticOperator::pucci_minus(1, 1.0, 2.0);
    GridField u1 = random_bumps(rng, g), u2 = random_bumps(rng, g);
    const double dt_nominal = safety * cfl_limit(g, 2.0);
    const auto steps = static_cast<std::size_t>(std::ceil(0.1 / dt_nominal - 1e-9));
    const double dt = 0.1 / static_cast<double>(steps);
    GridField n1(g), n2(g);
    for (std::size_t s = 0; s < steps; ++s) {
        kernels::explicit_step(op1, u1, kernels::StepTerms{.dt = dt, .source = &u2, .source_power = 2.0}, n1);
        kernels::explicit_step(op2, u2, kernels::StepTerms{.dt = dt, .source = &u1, .source_power = 2.0}, n2);
        std::swap(u1, n1);
        std::swap(u2, n2);
    }
    for (const GridField* f : {&u1, &u2}) {
        for (double v : f->values) l.measured = std::max(l.measured, std::isfinite(v) ? -v : HUGE_VAL);
    }
    l.pass = l.measured <= l.bound;
    return l;
}

CheckLine check_exponent_identities(std::mt19937_64& rng) {
    CheckLine l{"exponent-identities", false, 0.0, 1e-12, "a, b linear system"};
    std::uniform_real_distribution<double> e(1.0, 6.0), al(0.1, 2.0);
    for (int k = 0; k < 1000; ++k) {
        const double p = e(rng), q = e(rng), a1 = al(rng), a2 = al(rng);
        if (!(p * q > 1.0 + 1e-6)) continue;
        const auto ab = barrier_exponents(p, q, a1, a2);
        const auto r = exponent_identity_residuals(p, q, a1, a2, ab[0], ab[1]);
        const double scale = std::max({1.0, std::abs(ab[0]) * q, std::abs(ab[1]) * p, a1 * q, a2 * p});
        l.measured = std::max({l.measured, std::abs(r[0]) / scale, std::abs(r[1]) / scale});
    }
    l.pass = l.measured <= l.bound;
    return l;
}

CheckLine check_eigen_anchor(double safety) {
    CheckLine l{"laplacian-eigenvalue", false, 0.0, 0.025, "|alpha - 1/2|, N=1 R=12 h=0.05"};
    try {
        PowerIterationOptions o;
        o.cfl_safety = safety;
        const EigenPair e = power_iterate(EllipticOperator::laplacian(1), Grid(1, 12.0, 481), o);
        l.measured = std::abs(e.alpha - 0.5);
        l.pass = e.converged && l.measured <= l.bound;
    } catch (const Error& e) {
        l.measured = HUGE_VAL;
        l.note = e.what();
    }
    return l;
}

}  // namespace

SelfcheckReport selfcheck(std::uint64_t seed, double cfl_safety) {
    require(cfl_safety > 0.0, ErrorKind::InvalidArgument, "cfl_safety must be positive");
    std::mt19937_64 rng(seed);
    SelfcheckReport r;
    r.lines.push_back(check_sandwich(rng));
    r.lines.push_back(check_duality(rng));
    r.lines.push_back(check_homogeneity(rng));
    r.lines.push_back(check_quadratic(rng));
    r.lines.push_back(check_heat_kernel(cfl_safety));
    r.lines.push_back(check_nonexpansion(rng, cfl_safety));
    r.lines.push_back(check_positivity(rng, cfl_safety));
    r.lines.push_back(check_exponent_identities(rng));
    r.lines.push_back(check_eigen_anchor(cfl_safety));
    return r;
}

}  // namespace fnpar::harness
