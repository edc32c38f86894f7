#include "fnpar/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fnpar/error.hpp"
#include "fnpar/kernels.hpp"

namespace fnpar {

std::array<double, 2> barrier_exponents(double p, double q, double alpha1, double alpha2) {
    require(p * q > 1.0, ErrorKind::InvalidArgument, "barrier exponents need pq > 1");
    const double d = p * q - 1.0;
    return {alpha1 - (p + 1.0) / d, alpha2 - (q + 1.0) / d};
}

std::array<double, 2> exponent_identity_residuals(double p, double q, double alpha1, double alpha2, double a,
                                                  double b) {
    return {a - 1.0 - alpha1 - b * p + alpha2 * p, b - 1.0 - alpha2 - a * q + alpha1 * q};
}

AdmissibilityFlags check_admissibility(double p, double q, const EllipticOperator& op1, const EllipticOperator& op2,
                                       const EigenPair& pair1, const EigenPair& pair2, double margin) {
    require(pair1.converged && pair2.converged, ErrorKind::InvalidArgument, "eigenpairs must be converged");
    require(std::isfinite(p) && std::isfinite(q), ErrorKind::InvalidArgument, "exponents must be finite");
    AdmissibilityFlags f;
    f.pq_gt_one = p * q > 1.0;
    f.p_q_ge_one = p >= 1.0 && q >= 1.0;
    f.ellipticity_exponents = p > op2.Lambda() / op1.lambda() && q > op1.Lambda() / op2.lambda();
    if (f.pq_gt_one) {
        const auto [a, b] = barrier_exponents(p, q, pair1.alpha, pair2.alpha);
        f.exponent_thresholds = a > 0.0 && b > 0.0;
        f.exponent_margin_ok = a > margin && b > margin;
    }
    f.ratio1_bounded_envelope = p / (4.0 * op2.Lambda()) > 1.0 / (4.0 * op1.lambda());
    f.ratio2_bounded_envelope = q / (4.0 * op1.Lambda()) > 1.0 / (4.0 * op2.lambda());
    f.ratio1_bounded_fit = p * pair2.fit.delta >= pair1.fit.delta;
    f.ratio2_bounded_fit = q * pair1.fit.delta >= pair2.fit.delta;
    return f;
}

EpsilonChoice select_epsilon(double p, double q, double a, double b, double r1, double r2, double safety) {
    require(p >= 1.0 && q >= 1.0, ErrorKind::InvalidArgument, "select_epsilon needs p, q >= 1");
    if (p == 1.0 && q == 1.0) fail(ErrorKind::Unsupported, "p = q = 1 admits no amplitude (pq > 1 fails)");
    require(a > 0.0 && b > 0.0, ErrorKind::InvalidArgument, "select_epsilon needs a, b > 0");
    require(safety > 0.0 && safety <= 1.0, ErrorKind::InvalidArgument, "safety must lie in (0, 1]");
    if (!std::isfinite(r1) || !std::isfinite(r2)) fail(ErrorKind::DegenerateRatio, "profile ratio bound is infinite");
    require(r1 >= 0.0 && r2 >= 0.0, ErrorKind::InvalidArgument, "ratio bounds must be nonnegative");

    EpsilonChoice c;
    double eps = std::numeric_limits<double>::infinity();
    if (p == 1.0) {
        c.constraint1_ok = a >= r1;
    } else if (r1 > 0.0) {
        eps = std::min(eps, std::pow(a / r1, 1.0 / (p - 1.0)));
    }
    if (q == 1.0) {
        c.constraint2_ok = b >= r2;
    } else if (r2 > 0.0) {
        eps = std::min(eps, std::pow(b / r2, 1.0 / (q - 1.0)));
    }
    require(std::isfinite(eps), ErrorKind::DegenerateRatio, "both ratio bounds vanish; amplitude is unconstrained");
    c.epsilon = safety * eps;
    return c;
}

namespace {

GridField powered(const GridField& f, double power) {
    GridField out(f.grid, f.boundary);
    for (std::size_t k = 0; k < f.values.size(); ++k) out.values[k] = kernels::signed_power(f.values[k], power);
    return out;
}

// sup over the fitting window of (Cu2 e^{-du2 y^2})^p / (Cl1 e^{-dl1 y^2}).
double envelope_ratio_bound(const Envelope& upper, const Envelope& lower, double p, const Grid& g) {
    double best = 0.0;
    for (std::size_t k : fitting_window(g)) {
        const double r2 = g.radius_sq(k);
        const double v = std::pow(upper.C_upper, p) / lower.C_lower * std::exp((lower.delta_lower - p * upper.delta_upper) * r2);
        best = std::max(best, v);
    }
    return best;
}

double window_ratio(const GridField& num, const GridField& den) {
    double best = 0.0;
    for (std::size_t k : fitting_window(num.grid)) {
        if (den.values[k] > 0.0) best = std::max(best, num.values[k] / den.values[k]);
    }
    return best;
}

}  // namespace

BarrierCertificate draft_certificate(double p, double q, const EllipticOperator& op1, const EllipticOperator& op2,
                                     const EigenPair& pair1, const EigenPair& pair2, const BarrierOptions& opts) {
    if (pair1.psi.grid != pair2.psi.grid) {
        fail(ErrorKind::Coverage, "the two profiles must share one grid for the barrier lattice");
    }
    BarrierCertificate c;
    c.p = p;
    c.q = q;
    c.alpha1 = pair1.alpha;
    c.alpha2 = pair2.alpha;
    c.conditions = check_admissibility(p, q, op1, op2, pair1, pair2, opts.exponent_margin);
    if (!c.conditions.admissible()) {
        fail(ErrorKind::InvalidArgument, "barrier hypotheses fail for p = " + std::to_string(p) +
                                             ", q = " + std::to_string(q));
    }
    const auto ab = barrier_exponents(p, q, c.alpha1, c.alpha2);
    c.a = ab[0];
    c.b = ab[1];
    const GridField num1 = powered(pair2.psi, p);
    const GridField num2 = powered(pair1.psi, q);
    c.ratio_bounds = {sup_ratio(num1, pair1.psi).value, sup_ratio(num2, pair2.psi).value};
    c.window_ratio_bounds = {window_ratio(num1, pair1.psi), window_ratio(num2, pair2.psi)};
    const Envelope e1 = envelope_check(pair1, op1.lambda(), op1.Lambda()).envelope;
    const Envelope e2 = envelope_check(pair2, op2.lambda(), op2.Lambda()).envelope;
    c.envelope_bounds = {envelope_ratio_bound(e2, e1, p, pair1.psi.grid),
                         envelope_ratio_bound(e1, e2, q, pair1.psi.grid)};
    c.epsilon_choice = select_epsilon(p, q, c.a, c.b, c.ratio_bounds[0], c.ratio_bounds[1], opts.epsilon_safety);
    c.epsilon = opts.epsilon_override.value_or(c.epsilon_choice.epsilon);
    require(c.epsilon > 0.0 && std::isfinite(c.epsilon), ErrorKind::InvalidArgument, "epsilon must be positive");
    c.epsilon_tilde = c.epsilon;
    return c;
}

GridField barrier_field(const EigenPair& pair, double epsilon, double exponent, double t, const Grid& grid) {
    require(t >= 0.0, ErrorKind::InvalidArgument, "barrier time must be nonnegative");
    GridField f = self_similar_field(pair, t + 1.0, grid);
    const double amp = epsilon * std::pow(t + 1.0, exponent);
    for (double& v : f.values) v *= amp;
    return f;
}

ResidualReport barrier_residual(const BarrierCertificate& cert, const EigenPair& pair1, const EigenPair& pair2,
                                const EllipticOperator& op1, const EllipticOperator& op2,
                                const std::vector<double>& t_samples, double dt_t, bool coupled) {
    if (pair1.psi.grid != pair2.psi.grid) {
        fail(ErrorKind::Coverage, "the two profiles must share one grid for the barrier lattice");
    }
    require(!t_samples.empty(), ErrorKind::InvalidArgument, "need at least one time sample");
    require(dt_t > 0.0 && dt_t < 1.0, ErrorKind::InvalidArgument, "dt_t must lie in (0, 1)");

    ResidualReport rep;
    rep.minimum = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    const EigenPair* pairs[2] = {&pair1, &pair2};
    const EllipticOperator* ops[2] = {&op1, &op2};
    const double expo[2] = {cert.a, cert.b};
    const double power[2] = {cert.p, cert.q};
    const double eps[2] = {cert.epsilon, cert.epsilon_tilde};

    for (double t : t_samples) {
        require(t >= 0.0, ErrorKind::InvalidArgument, "time samples must be nonnegative");
        const double s = t + 1.0;
        const Grid lattice = self_similar_lattice(pair1, s);
        std::array<GridField, 2> ubar{GridField(lattice), GridField(lattice)};
        std::array<GridField, 2> ubar_t{GridField(lattice), GridField(lattice)};
        for (int i = 0; i < 2; ++i) {
            const GridField phi = self_similar_field(*pairs[i], s, lattice);
            const GridField phi_t = self_similar_time_derivative(*pairs[i], s, lattice, dt_t);
            const double amp = eps[i] * std::pow(s, expo[i]);
            const double amp_t = eps[i] * expo[i] * std::pow(s, expo[i] - 1.0);
            for (std::size_t k = 0; k < lattice.size(); ++k) {
                ubar[i].values[k] = amp * phi.values[k];
                ubar_t[i].values[k] = amp_t * phi.values[k] + amp * phi_t.values[k];
            }
        }
        std::array<double, 2> local{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        std::vector<double> fx(lattice.size());
        for (int i = 0; i < 2; ++i) {
            kernels::operator_field(*ops[i], ubar[i], fx);
            const GridField& other = ubar[1 - i];
            for (std::size_t k = 0; k < lattice.size(); ++k) {
                if (!lattice.is_interior(k)) continue;
                double r = ubar_t[i].values[k] + fx[k];
                if (coupled) r -= kernels::signed_power(other.values[k], power[i]);
                local[i] = std::min(local[i], r);
            }
            rep.minimum[i] = std::min(rep.minimum[i], local[i]);
        }
        rep.per_time.push_back(local);
    }
    return rep;
}

BarrierCertificate build_certificate(double p, double q, const EllipticOperator& op1, const EllipticOperator& op2,
                                     const EigenPair& pair1, const EigenPair& pair2, const BarrierOptions& opts) {
    BarrierCertificate c = draft_certificate(p, q, op1, op2, pair1, pair2, opts);
    const ResidualReport r = barrier_residual(c, pair1, pair2, op1, op2, opts.t_samples, opts.dt_t, opts.coupled);
    c.t_samples = opts.t_samples;
    c.residual_min = r.minimum;
    c.residual_checked = true;
    c.residual_ok = r.minimum[0] >= -opts.residual_tol && r.minimum[1] >= -opts.residual_tol;
    return c;
}

BarrierRunReport run_from_barrier(const BarrierCertificate& cert, const EigenPair& pair1, const EigenPair& pair2,
                                  const SystemProblem& problem, const StepControl& ctl, double scale,
                                  std::optional<Grid> grid, std::size_t samples) {
    require(scale >= 0.0 && std::isfinite(scale), ErrorKind::InvalidArgument, "scale must be finite and >= 0");
    require(samples >= 1, ErrorKind::InvalidArgument, "need at least one comparison sample");
    const Grid g = grid ? *grid : pair1.psi.grid;
    require(problem.op1.dim() == g.dim(), ErrorKind::InvalidArgument, "operator and grid dimensions differ");

    GridField u10 = barrier_field(pair1, cert.epsilon * scale, cert.a, 0.0, g);
    GridField u20 = barrier_field(pair2, cert.epsilon_tilde * scale, cert.b, 0.0, g);
    u10.apply_dirichlet();
    u20.apply_dirichlet();

    BarrierRunReport rep;
    rep.dt = choose_dt(g, problem.Lambda_max(), ctl);
    rep.decay_exponent_predicted = cert.a - cert.alpha1;
    const auto steps = static_cast<std::size_t>(std::ceil(ctl.t_end / rep.dt));
    const std::size_t stride = std::max<std::size_t>(1, steps / samples);

    std::vector<double> log_t, log_u;
    const auto observe = [&](const SystemState& s) {
        ++rep.samples;
        const GridField b1 = barrier_field(pair1, cert.epsilon, cert.a, s.t, g);
        const GridField b2 = barrier_field(pair2, cert.epsilon_tilde, cert.b, s.t, g);
        const double v = std::max(kernels::max_difference(s.u1.values, b1.values),
                                  kernels::max_difference(s.u2.values, b2.values));
        if (v > rep.max_ordering_violation) {
            rep.max_ordering_violation = v;
            rep.ordering_violation_t = s.t;
        }
        if (s.t >= 0.5 * ctl.t_end && s.sup_norms[0] > 0.0 && std::isfinite(s.sup_norms[0])) {
            log_t.push_back(std::log(s.t + 1.0));
            log_u.push_back(std::log(s.sup_norms[0]));
        }
    };
    const Trajectory traj = evolve_system(problem, SystemState(u10, u20, 0.0), ctl, stride, observe);
    const SystemState& last = traj.final_state();
    rep.blown_up = last.blown_up;
    rep.blowup_time = last.blowup_time;
    rep.t_reached = last.t;
    rep.final_sup_norms = last.sup_norms;

    if (log_t.size() >= 2) {
        const double n = static_cast<double>(log_t.size());
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < log_t.size(); ++i) {
            sx += log_t[i];
            sy += log_u[i];
            sxx += log_t[i] * log_t[i];
            sxy += log_t[i] * log_u[i];
        }
        const double denom = n * sxx - sx * sx;
        if (denom > 0.0) rep.decay_exponent_fit = (n * sxy - sx * sy) / denom;
    }
    return rep;
}

BarrierRunReport certify_global(const BarrierCertificate& cert, const EigenPair& pair1, const EigenPair& pair2,
                                const SystemProblem& problem, StepControl ctl, double T_long,
                                std::optional<Grid> grid) {
    require(cert.valid(), ErrorKind::InvalidArgument, "certify_global needs a certificate whose residual check passed");
    require(T_long > 0.0, ErrorKind::InvalidArgument, "T_long must be positive");
    ctl.t_end = T_long;
    BarrierRunReport rep = run_from_barrier(cert, pair1, pair2, problem, ctl, 1.0, grid);
    if (rep.blown_up) {
        const Grid g = grid ? *grid : pair1.psi.grid;
        std::ostringstream msg;
        msg << "certified data blew up at t = " << rep.blowup_time.value_or(rep.t_reached) << " (h = " << g.spacing()
            << ", dt = " << rep.dt << ", R = " << g.radius() << ")";
        fail(ErrorKind::CertificateContradiction, msg.str());
    }
    return rep;
}

}  // namespace fnpar
