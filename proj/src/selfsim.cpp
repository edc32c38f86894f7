#include "fnpar/selfsim.hpp"

#include <cmath>
#include <limits>

#include "fnpar/error.hpp"
#include "fnpar/kernels.hpp"

namespace fnpar {

double rescaled_cfl_limit(const Grid& grid, double Lambda) {
    require(Lambda > 0.0, ErrorKind::InvalidArgument, "Lambda must be positive");
    const double h = grid.spacing();
    const double n = grid.dim();
    return 1.0 / (2.0 * n * Lambda / (h * h) + n * 0.5 * grid.radius() / h);
}

GridField rescaled_step(const GridField& w, const EllipticOperator& op, double dtau, bool drift) {
    require(std::isfinite(dtau) && dtau >= 0.0, ErrorKind::InvalidArgument, "dtau must be finite and nonnegative");
    const double limit = rescaled_cfl_limit(w.grid, op.Lambda());
    if (dtau > limit * (1.0 + 1e-12)) {
        fail(ErrorKind::StepRejected, "dtau = " + std::to_string(dtau) + " exceeds the rescaled-flow limit " +
                                          std::to_string(limit));
    }
    GridField src = w;
    src.boundary = Boundary::DirichletZero;
    GridField out(w.grid, Boundary::DirichletZero);
    kernels::explicit_step(
        op, src,
        kernels::StepTerms{.dt = dtau, .drift_scale = drift ? 0.5 : 0.0, .drift_centered_diffusion = op.lambda()}, out);
    return out;
}

std::vector<std::size_t> fitting_window(const Grid& grid) {
    const double lo = 0.2 * grid.radius();
    const double hi = 0.8 * grid.radius();
    std::vector<std::size_t> nodes;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!grid.is_interior(k)) continue;
        const double r = std::sqrt(grid.radius_sq(k));
        if (r >= lo - 1e-12 && r <= hi + 1e-12) nodes.push_back(k);
    }
    return nodes;
}

GaussianFit fit_gaussian(const GridField& psi) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t n = 0;
    for (std::size_t k : fitting_window(psi.grid)) {
        if (!(psi.values[k] > 0.0)) continue;
        const double x = psi.grid.radius_sq(k);
        const double y = std::log(psi.values[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    require(n >= 2, ErrorKind::InvalidArgument, "fitting window holds fewer than two positive nodes");
    const double denom = n * sxx - sx * sx;
    require(denom > 0.0, ErrorKind::InvalidArgument, "fitting window is degenerate");
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    return GaussianFit{-slope, std::exp(intercept), n};
}

namespace {

Envelope envelope_constants(const GridField& psi, double delta_u, double delta_l) {
    const auto window = fitting_window(psi.grid);
    require(!window.empty(), ErrorKind::InvalidArgument, "fitting window is empty");
    Envelope e{delta_u, 0.0, delta_l, std::numeric_limits<double>::infinity()};
    for (std::size_t k : window) {
        const double r2 = psi.grid.radius_sq(k);
        e.C_upper = std::max(e.C_upper, psi.values[k] * std::exp(delta_u * r2));
        e.C_lower = std::min(e.C_lower, psi.values[k] * std::exp(delta_l * r2));
    }
    return e;
}

GridField initial_guess(const Grid& grid) {
    GridField w = GridField::sample(grid, [&](std::span<const double> y) {
        double r2 = 0.0;
        for (double v : y) r2 += v * v;
        return std::exp(-0.25 * r2);
    });
    w.apply_dirichlet();
    return w;
}

}  // namespace

EigenPair power_iterate(const EllipticOperator& op, const Grid& grid, const PowerIterationOptions& opts) {
    require(op.dim() == grid.dim(), ErrorKind::InvalidArgument, "operator and grid dimensions differ");
    require(opts.tol > 0.0 && opts.renorm_interval > 0.0 && opts.max_tau > 0.0, ErrorKind::InvalidArgument,
            "power iteration needs positive tol, renorm_interval and max_tau");

    GridField w = opts.initial ? *opts.initial : initial_guess(grid);
    require(w.grid == grid, ErrorKind::InvalidArgument, "initial guess lives on a different grid");
    w.boundary = Boundary::DirichletZero;
    w.apply_dirichlet();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        require(w.values[k] >= 0.0, ErrorKind::InvalidArgument, "initial guess must be nonnegative");
    }
    double norm = kernels::max_abs(w.values);
    require(norm > 0.0 && std::isfinite(norm), ErrorKind::InvalidArgument, "initial guess must be nonzero");

    const double limit = rescaled_cfl_limit(grid, op.Lambda());
    const auto steps = static_cast<std::size_t>(std::ceil(opts.renorm_interval / (opts.cfl_safety * limit)));
    const double dtau = opts.renorm_interval / static_cast<double>(steps);
    const kernels::StepTerms terms{.dt = dtau, .drift_scale = 0.5, .drift_centered_diffusion = op.lambda()};

    EigenPair pair{GridField(grid)};
    GridField next(grid, Boundary::DirichletZero);
    while (pair.tau < opts.max_tau) {
        for (std::size_t s = 0; s < steps; ++s) {
            kernels::explicit_step(op, w, terms, next);
            std::swap(w, next);
        }
        pair.tau += opts.renorm_interval;
        const double new_norm = kernels::max_abs(w.values);
        if (!(new_norm > 0.0) || !std::isfinite(new_norm)) {
            fail(ErrorKind::DegenerateProfile, "profile vanished or overflowed during power iteration");
        }
        pair.alpha_history.push_back(-std::log(new_norm / norm) / opts.renorm_interval);
        const double inv = 1.0 / new_norm;
        for (double& v : w.values) v *= inv;
        norm = 1.0;

        const std::size_t k = pair.alpha_history.size();
        if (k >= 2 && pair.tau >= opts.min_tau &&
            std::abs(pair.alpha_history[k - 1] - pair.alpha_history[k - 2]) < opts.tol) {
            pair.converged = true;
            break;
        }
    }

    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid.is_interior(k) && !(w.values[k] > 0.0)) {
            fail(ErrorKind::DegenerateProfile,
                 "profile lost positivity at an interior node; refine the grid or enlarge R");
        }
    }
    pair.alpha = pair.alpha_history.back();
    pair.psi = std::move(w);
    pair.fit = fit_gaussian(pair.psi);
    pair.envelope = envelope_constants(pair.psi, 0.9 / (4.0 * op.Lambda()), 1.1 / (4.0 * op.lambda()));
    return pair;
}

EnvelopeReport envelope_check(const EigenPair& pair, double lambda, double Lambda, double upper_slack,
                              double lower_slack) {
    require(lambda > 0.0 && lambda <= Lambda, ErrorKind::InvalidArgument, "need 0 < lambda <= Lambda");
    EnvelopeReport r;
    r.envelope = envelope_constants(pair.psi, upper_slack / (4.0 * Lambda), lower_slack / (4.0 * lambda));
    r.delta_fit = fit_gaussian(pair.psi).delta;
    r.upper_ok = r.delta_fit >= r.envelope.delta_upper && r.envelope.C_upper > 0.0 && std::isfinite(r.envelope.C_upper);
    r.lower_ok = r.delta_fit <= r.envelope.delta_lower && r.envelope.C_lower > 0.0;
    r.pass = r.upper_ok && r.lower_ok;
    return r;
}

Grid self_similar_lattice(const EigenPair& pair, double t) {
    require(t > 0.0, ErrorKind::InvalidArgument, "self-similar time must be positive");
    const Grid& g = pair.psi.grid;
    return Grid(g.dim(), g.radius() * std::sqrt(t), g.points());
}

namespace {

double profile_at(const EigenPair& pair, std::span<const double> y) {
    const Grid& g = pair.psi.grid;
    const double inner = g.radius() - g.spacing();
    double r2 = 0.0;
    bool inside = true;
    for (double v : y) {
        r2 += v * v;
        inside = inside && std::abs(v) <= inner;
    }
    if (inside) return interpolate(pair.psi, y);
    return pair.fit.C * std::exp(-pair.fit.delta * r2);
}

}  // namespace

GridField self_similar_field(const EigenPair& pair, double t, std::optional<Grid> grid) {
    require(t > 0.0, ErrorKind::InvalidArgument, "self-similar time must be positive");
    const Grid g = grid ? *grid : pair.psi.grid;
    require(g.dim() == pair.psi.grid.dim(), ErrorKind::InvalidArgument, "grid dimension differs from the profile");
    const double amp = std::pow(t, -pair.alpha);
    const double inv_sqrt_t = 1.0 / std::sqrt(t);
    if (t == 1.0 && g == pair.psi.grid) return pair.psi;
    GridField out(g);
    std::array<double, Grid::kMaxDim> y{};
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto x = g.point(k);
        for (int d = 0; d < g.dim(); ++d) y[d] = x[d] * inv_sqrt_t;
        out.values[k] = amp * profile_at(pair, std::span<const double>(y.data(), static_cast<std::size_t>(g.dim())));
    }
    return out;
}

GridField self_similar_time_derivative(const EigenPair& pair, double t, const Grid& grid, double dt_t) {
    require(dt_t > 0.0 && t - dt_t > 0.0, ErrorKind::InvalidArgument, "need 0 < dt_t < t");
    const GridField plus = self_similar_field(pair, t + dt_t, grid);
    const GridField minus = self_similar_field(pair, t - dt_t, grid);
    GridField out(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) out.values[k] = (plus.values[k] - minus.values[k]) / (2.0 * dt_t);
    return out;
}

double self_similar_residual(const EigenPair& pair, const EllipticOperator& op, double t, double dt_t) {
    const Grid lattice = self_similar_lattice(pair, t);
    const GridField phi = self_similar_field(pair, t, lattice);
    const GridField phi_t = self_similar_time_derivative(pair, t, lattice, dt_t);
    std::vector<double> f(lattice.size());
    kernels::operator_field(op, phi, f);
    double worst = 0.0;
    for (std::size_t k = 0; k < lattice.size(); ++k) {
        if (lattice.is_interior(k)) worst = std::max(worst, std::abs(phi_t.values[k] + f[k]));
    }
    return worst;
}

}  // namespace fnpar
