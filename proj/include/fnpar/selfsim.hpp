#pragma once

#include <optional>
#include <vector>

#include "fnpar/grid.hpp"
#include "fnpar/operators.hpp"

namespace fnpar {

/// Two-sided Gaussian bounds C_l exp(-delta_l |y|^2) <= psi(y) <= C_u exp(-delta_u |y|^2).
struct Envelope {
    double delta_upper = 0.0;
    double C_upper = 0.0;
    double delta_lower = 0.0;
    double C_lower = 0.0;
};

/// log psi ~ log C - delta |y|^2 by least squares over the fitting window.
struct GaussianFit {
    double delta = 0.0;
    double C = 0.0;
    std::size_t nodes = 0;
};

struct EigenPair {
    double alpha = 0.0;
    GridField psi;
    bool converged = false;
    std::vector<double> alpha_history;
    double tau = 0.0;  // rescaled time spent
    Envelope envelope;
    GaussianFit fit;

    explicit EigenPair(GridField profile) : psi(std::move(profile)) {}
};

struct PowerIterationOptions {
    double tol = 1e-4;
    double max_tau = 200.0;
    double renorm_interval = 0.5;
    double min_tau = 2.0;
    double cfl_safety = 0.9;
    /// Initial guess; exp(-|y|^2 / 4) when absent.
    std::optional<GridField> initial;
};

/// Stable step of w_t = -F(D^2 w) + (1/2) y.Dw: 1 / (2 N Lambda / h^2 + N (R/2) / h).
double rescaled_cfl_limit(const Grid& grid, double Lambda);

/// One explicit step of the rescaled flow; the drift uses hybrid differencing (centered where that stays
/// monotone for diffusion lambda, upwind elsewhere). Dirichlet-zero boundary.
GridField rescaled_step(const GridField& w, const EllipticOperator& op, double dtau, bool drift = true);

/// Normalized power iteration on the rescaled flow. Positive homogeneity lets the profile be
/// rescaled to sup-norm 1 after each interval; the decay rate over an interval estimates alpha.
EigenPair power_iterate(const EllipticOperator& op, const Grid& grid, const PowerIterationOptions& opts = {});

/// Window 0.2 R <= |y| <= 0.8 R on interior nodes with positive values.
std::vector<std::size_t> fitting_window(const Grid& grid);
GaussianFit fit_gaussian(const GridField& psi);

struct EnvelopeReport {
    Envelope envelope;
    double delta_fit = 0.0;
    bool upper_ok = false;  // psi decays at least as fast as exp(-delta_u |y|^2)
    bool lower_ok = false;  // psi decays no faster than exp(-delta_l |y|^2)
    bool pass = false;
};

/// Checks the two-sided Gaussian bounds at delta_u = 0.9/(4 Lambda), delta_l = 1.1/(4 lambda).
EnvelopeReport envelope_check(const EigenPair& pair, double lambda, double Lambda, double upper_slack = 0.9,
                              double lower_slack = 1.1);

/// The profile grid dilated by sqrt(t): its nodes are the images x = sqrt(t) y of the profile nodes.
Grid self_similar_lattice(const EigenPair& pair, double t);

/// phi(x, t) = t^{-alpha} psi(x / sqrt(t)) on `grid` (the profile grid when absent); psi is interpolated
/// linearly and continued by the fitted Gaussian outside the profile box.
GridField self_similar_field(const EigenPair& pair, double t, std::optional<Grid> grid = std::nullopt);

/// d/dt phi by a centered difference of half-width dt_t.
GridField self_similar_time_derivative(const EigenPair& pair, double t, const Grid& grid, double dt_t = 1e-3);

/// max over interior lattice nodes of |phi_t + F(D^2 phi)| at time t.
double self_similar_residual(const EigenPair& pair, const EllipticOperator& op, double t, double dt_t = 1e-3);

}  // namespace fnpar
