// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Tolerances are fixed here and never adjusted to fit results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fnpar/barrier.hpp"
#include "fnpar/error.hpp"
#include "fnpar/evolve.hpp"
#include "fnpar/harness.hpp"
#include "fnpar/selfsim.hpp"

using namespace fnpar;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const Grid kProfileGrid(1, 12.0, 481);  // h = 0.05

const EllipticOperator kLap = EllipticOperator::laplacian(1);
const EllipticOperator kPminus = EllipticOperator::pucci_minus(1, 1.0, 2.0);
const EllipticOperator kPplus = EllipticOperator::pucci_plus(1, 1.0, 2.0);

struct Profiles {
    EigenPair lap;
    EigenPair pminus;
    EigenPair pplus;
    double lap_seconds;
};

Profiles& profiles() {
    static Profiles p = [] {
        const auto t0 = std::chrono::steady_clock::now();
        EigenPair lap = power_iterate(kLap, kProfileGrid);
        const double s = seconds_since(t0);
        return Profiles{lap, power_iterate(kPminus, kProfileGrid), power_iterate(kPplus, kProfileGrid), s};
    }();
    return p;
}

GridField gaussian(const Grid& g, double amp, double width = 1.0) {
    GridField f = GridField::sample(
        g, [&](std::span<const double> x) { return amp * std::exp(-x[0] * x[0] / (2.0 * width * width)); });
    f.apply_dirichlet();
    return f;
}

double heat_kernel(double x, double t) { return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t); }

Outcome heat_kernel_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g(1, 10.0, 401);
    const GridField f0 = GridField::sample(g, [](std::span<const double> x) { return heat_kernel(x[0], 0.5); });
    const GridField f1 = semigroup_evolve(f0, kLap, 0.5);
    const GridField exact = GridField::sample(g, [](std::span<const double> x) { return heat_kernel(x[0], 1.0); });
    const double err = sup_norm_diff(f1, exact);
    const double s = seconds_since(t0);
    return {err <= 1e-3 && s <= 10.0, fmt("sup error %.3e (<= 1e-3), %.2f s (<= 10 s)", err, s)};
}

Outcome eigenvalue_anchor() {
    const Profiles& p = profiles();
    const double a = p.lap.alpha;
    return {p.lap.converged && a >= 0.475 && a <= 0.525 && p.lap_seconds <= 60.0,
            fmt("alpha(-Lap) = %.5f in [0.475, 0.525], converged %d, %.2f s (<= 60 s)", a, p.lap.converged,
                p.lap_seconds)};
}

Outcome pucci_bracket() {
    const Profiles& p = profiles();
    const double am = p.pminus.alpha, al = p.lap.alpha, ap = p.pplus.alpha;
    const bool ok = p.pminus.converged && p.pplus.converged && am >= 0.25 - 0.01 && am <= 0.5 && ap >= 0.5 &&
                    ap <= 1.0 + 0.01 && al - am > 0.0 && ap - al > 0.0;
    return {ok, fmt("alpha(P-) = %.5f, alpha(-Lap) = %.5f, alpha(P+) = %.5f; gaps %.4f, %.4f", am, al, ap, al - am,
                    ap - al)};
}

Outcome envelopes() {
    const Profiles& p = profiles();
    const EllipticOperator composite = EllipticOperator::composite(
        op::Combine::Max, {kLap, EllipticOperator::linear_trace(SymMatrix::identity(1) * 2.0)});
    const EllipticOperator barenblatt = EllipticOperator::barenblatt(1, 1.0 / 3.0);
    const EigenPair ec = power_iterate(composite, kProfileGrid);
    const EigenPair eb = power_iterate(barenblatt, kProfileGrid);
    struct Row {
        const char* name;
        const EigenPair* pair;
        double lambda;
        double Lambda;
    };
    const Row rows[] = {{"laplacian", &p.lap, 1.0, 2.0},
                        {"pucci-minus", &p.pminus, 1.0, 2.0},
                        {"pucci-plus", &p.pplus, 1.0, 2.0},
                        {"composite-max", &ec, 1.0, 2.0},
                        {"barenblatt(1/3)", &eb, barenblatt.lambda(), barenblatt.Lambda()}};
    bool ok = true;
    std::string d;
    for (const Row& r : rows) {
        const EnvelopeReport e = envelope_check(*r.pair, r.lambda, r.Lambda);
        ok = ok && e.pass && r.pair->converged;
        d += fmt("%s%s delta_fit %.4f in [%.4f, %.4f] %s", d.empty() ? "" : "; ", r.name, e.delta_fit,
                 e.envelope.delta_upper, e.envelope.delta_lower, e.pass ? "ok" : "FAIL");
    }
    return {ok, d};
}

GridField random_bumps(std::mt19937_64& rng, const Grid& g) {
    std::uniform_real_distribution<double> c(-3.0, 3.0), a(0.0, 1.0), w(0.3, 2.0);
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

Outcome comparison_suite() {
    const Grid g(1, 8.0, 321);
    const SystemProblem pr{kPminus, kPplus, 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 0.25;
    std::mt19937_64 rng(20240501);
    double worst = 0.0;
    int blown = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const GridField a1 = random_bumps(rng, g), a2 = random_bumps(rng, g);
        GridField b1 = a1, b2 = a2;
        const GridField e1 = random_bumps(rng, g), e2 = random_bumps(rng, g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            b1[k] += e1[k];
            b2[k] += e2[k];
        }
        const Trajectory sub = evolve_system(pr, SystemState(a1, a2), ctl, 1);
        const Trajectory sup = evolve_system(pr, SystemState(b1, b2), ctl, 1);
        blown += sup.final_state().blown_up ? 1 : 0;
        worst = std::max(worst, comparison_check(sub, sup).max_violation);
    }
    return {worst <= 1e-6 && blown == 0, fmt("max violation %.3e over 20 pairs (<= 1e-6), blown-up runs %d", worst, blown)};
}

Outcome duhamel() {
    const Grid g(1, 8.0, 321);
    const SystemProblem pr{kLap, kLap, 2.0, 2.0};
    const GridField u0 = gaussian(g, 1.0);
    const double dt0 = choose_dt(g, pr.Lambda_max(), StepControl{});
    const auto distance = [&](double dt, DuhamelResult& d) {
        d = duhamel_fixed_point(u0, u0, pr, 0.05, 1e-8, 20, dt);
        StepControl ctl;
        ctl.t_end = 0.05;
        ctl.dt_cap = d.trajectory.times[1] - d.trajectory.times[0];
        ctl.cfl_safety = 1.0;
        const Trajectory direct = evolve_system(pr, SystemState(u0, u0), ctl);
        double dist = 0.0;
        const std::size_t n = std::min(direct.snapshots.size(), d.trajectory.snapshots.size());
        for (std::size_t k = 0; k < n; ++k) {
            dist = std::max({dist, sup_norm_diff(direct.snapshots[k].u1, d.trajectory.snapshots[k].u1),
                             sup_norm_diff(direct.snapshots[k].u2, d.trajectory.snapshots[k].u2)});
        }
        if (direct.snapshots.size() != d.trajectory.snapshots.size()) dist = HUGE_VAL;
        return dist;
    };
    DuhamelResult coarse, fine;
    const double d1 = distance(dt0, coarse);
    const double d2 = distance(0.5 * dt0, fine);
    const double order = std::log2(d1 / d2);
    const bool ok = coarse.contraction_factor < 1.0 && coarse.iterations <= 20 && d1 <= 5e-3 && order >= 0.9;
    return {ok, fmt("contraction %.3e (< 1), iterations %d (<= 20), distance %.3e (<= 5e-3), halving order %.3f "
                    "(>= 0.9)",
                    coarse.contraction_factor, coarse.iterations, d1, order)};
}

struct BarrierResult {
    bool ok;
    std::string detail;
};

BarrierResult barrier_pipeline(const char* name, const EllipticOperator& op1, const EllipticOperator& op2,
                               const EigenPair& e1, const EigenPair& e2) {
    const BarrierCertificate c = build_certificate(4.0, 4.0, op1, op2, e1, e2);
    const auto id = exponent_identity_residuals(4.0, 4.0, c.alpha1, c.alpha2, c.a, c.b);
    const double id_err = std::max(std::abs(id[0]), std::abs(id[1]));
    const double threshold = 5.0 / 15.0;
    bool ok = c.valid() && id_err <= 1e-12 && c.residual_min[0] >= -1e-3 && c.residual_min[1] >= -1e-3 &&
              c.conditions.ellipticity_exponents && threshold < c.alpha1 && threshold < c.alpha2;
    std::string d = fmt("%s: a %.4f b %.4f eps %.4g identities %.1e residual min (%.2e, %.2e)", name, c.a, c.b,
                        c.epsilon, id_err, c.residual_min[0], c.residual_min[1]);
    if (c.valid()) {
        try {
            const BarrierRunReport r = certify_global(c, e1, e2, SystemProblem{op1, op2, 4.0, 4.0}, StepControl{}, 50.0);
            ok = ok && !r.blown_up && r.t_reached >= 50.0 - 1e-9 && r.max_ordering_violation <= 1e-3;
            d += fmt(" run to T=%.0f ordering violation %.2e", r.t_reached, r.max_ordering_violation);
        } catch (const Error& e) {
            ok = false;
            d += std::string(" run failed: ") + e.what();
        }
    }
    return {ok, d};
}

Outcome barrier_certificates() {
    Profiles& p = profiles();
    const BarrierResult lap = barrier_pipeline("laplacian", kLap, kLap, p.lap, p.lap);
    const BarrierResult pucci = barrier_pipeline("pucci(P-,P+)", kPminus, kPplus, p.pminus, p.pplus);
    return {lap.ok && pucci.ok, lap.detail + "; " + pucci.detail};
}

Outcome dichotomy() {
    Profiles& p = profiles();
    const SystemProblem two{kLap, kLap, 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 5.0;
    const GridField u0 = gaussian(kProfileGrid, 5.0);
    const SystemState s = evolve_system(two, SystemState(u0, u0), ctl, 1u << 30).final_state();
    const bool blowup_ok = s.blown_up && s.blowup_time && std::isfinite(*s.blowup_time);

    const BarrierCertificate c = build_certificate(4.0, 4.0, kLap, kLap, p.lap, p.lap);
    bool cert_ok = c.valid();
    if (cert_ok) {
        const BarrierRunReport r = certify_global(c, p.lap, p.lap, SystemProblem{kLap, kLap, 4.0, 4.0}, StepControl{}, 50.0);
        cert_ok = !r.blown_up && r.max_ordering_violation <= 1e-3;
    }

    const auto cfg = harness::load_config(std::filesystem::path(FNPAR_SOURCE_DIR) / "configs" / "sweep_laplacian.ini");
    const auto records = harness::run_sweep(cfg, p.lap, p.lap, 0);
    const harness::SweepSummary sum = harness::summarize(records, 1);
    std::size_t off_side = 0;
    for (const auto& r : records) {
        if (r.outcome == "certified-global" && !(r.eh_value < 0.5)) ++off_side;
    }
    const bool sweep_ok = off_side == 0 && sum.certified > 0 && sum.consistent();
    return {blowup_ok && cert_ok && sweep_ok,
            fmt("p=q=2 blow-up t* = %.4f; p=q=4 certified %d; sweep %zu cells, %zu certified-global, %zu off the "
                "supercritical side, %zu/%zu blow-up-side cells blew up",
                s.blowup_time.value_or(NAN), cert_ok, sum.cells, sum.certified, off_side, sum.blowup_side_blown_up,
                sum.blowup_side_cells)};
}

Outcome exponential_rescale() {
    const Grid g(1, 8.0, 321);
    const SystemProblem pr{kPminus, kPplus, 2.0, 2.0};
    StepControl ctl;
    ctl.t_end = 0.2;
    const GridField a = gaussian(g, 0.5), b = gaussian(g, 0.3, 1.5);
    const Trajectory tr = evolve_system(pr, SystemState(a, b), ctl, 1);
    const double g1 = exponential_rescale_check(tr, pr, 1.0, ctl);
    const double g0 = exponential_rescale_check(tr, pr, 0.0, ctl);
    return {g1 <= 1e-3 && g0 == 0.0, fmt("nu=1 gap %.3e (<= 1e-3), nu=0 gap %.1e (== 0)", g1, g0)};
}

Outcome homogeneity() {
    const Grid g(1, 8.0, 161);
    PowerIterationOptions o;
    o.max_tau = 20.0;
    o.initial = GridField::sample(g, [](std::span<const double> y) { return std::exp(-0.3 * y[0] * y[0]); });
    double hist_err = 0.0;
    for (const auto& op : {kPminus, kPplus}) {
        const EigenPair base = power_iterate(op, g, o);
        for (double c : {1e-4, 3.0, 1e5}) {
            PowerIterationOptions s = o;
            for (double& v : s.initial->values) v *= c;
            const EigenPair scaled = power_iterate(op, g, s);
            if (scaled.alpha_history.size() != base.alpha_history.size()) hist_err = HUGE_VAL;
            for (std::size_t k = 0; k < std::min(base.alpha_history.size(), scaled.alpha_history.size()); ++k) {
                hist_err = std::max(hist_err, std::abs(scaled.alpha_history[k] - base.alpha_history[k]));
            }
        }
    }

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0), mu(0.0, 20.0);
    const std::vector<EllipticOperator> ops{
        EllipticOperator::laplacian(2), EllipticOperator::pucci_plus(2, 1.0, 2.0), EllipticOperator::pucci_minus(2, 1.0, 2.0),
        EllipticOperator::barenblatt(2, 0.5), EllipticOperator::minmax_2d()};
    double hom_err = 0.0;
    for (const auto& op : ops) {
        for (int k = 0; k < 2000; ++k) {
            SymMatrix x(2);
            x.set(0, 0, u(rng));
            x.set(0, 1, u(rng));
            x.set(1, 1, u(rng));
            const double m = mu(rng);
            const double rhs = m * op.eval(x);
            hom_err = std::max(hom_err, std::abs(op.eval(x * m) - rhs) / std::max(1.0, std::abs(rhs)));
        }
    }
    return {hist_err <= 1e-10 && hom_err <= 1e-12,
            fmt("alpha history drift %.2e (<= 1e-10), operator homogeneity %.2e (<= 1e-12)", hist_err, hom_err)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"heat-kernel-oracle", heat_kernel_oracle},
        {"eigenvalue-anchor", eigenvalue_anchor},
        {"pucci-bracket", pucci_bracket},
        {"gaussian-envelopes", envelopes},
        {"comparison-principle", comparison_suite},
        {"duhamel-fixed-point", duhamel},
        {"barrier-certificate", barrier_certificates},
        {"fujita-dichotomy", dichotomy},
        {"exponential-rescale", exponential_rescale},
        {"homogeneity-scaling", homogeneity},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2zu %-22s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("acceptance: %zu/%zu passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
