#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fnpar/evolve.hpp"
#include "fnpar/selfsim.hpp"

namespace fnpar {

/// Hypothesis checks for the barrier construction.
struct AdmissibilityFlags {
    bool pq_gt_one = false;
    bool p_q_ge_one = false;
    bool ellipticity_exponents = false;  // p > Lambda2/lambda1 and q > Lambda1/lambda2
    bool exponent_thresholds = false;    // a > 0 and b > 0
    bool exponent_margin_ok = false;     // a > margin and b > margin
    bool ratio1_bounded_envelope = false;  // psi2^p / psi1 from the envelope rates p/(4 Lambda2) > 1/(4 lambda1)
    bool ratio2_bounded_envelope = false;  // psi1^q / psi2 likewise
    bool ratio1_bounded_fit = false;       // p * delta_fit(psi2) >= delta_fit(psi1)
    bool ratio2_bounded_fit = false;

    bool admissible() const {
        return pq_gt_one && p_q_ge_one && ellipticity_exponents && exponent_thresholds && exponent_margin_ok &&
               ratio1_bounded_fit && ratio2_bounded_fit;
    }
};

/// a = alpha1 - (p+1)/(pq-1), b = alpha2 - (q+1)/(pq-1).
std::array<double, 2> barrier_exponents(double p, double q, double alpha1, double alpha2);

/// (a - 1 - alpha1 - b p + alpha2 p, b - 1 - alpha2 - a q + alpha1 q); both vanish in exact arithmetic.
std::array<double, 2> exponent_identity_residuals(double p, double q, double alpha1, double alpha2, double a,
                                                  double b);

/// `margin` guards the thresholds against the discretization error of the computed alphas.
AdmissibilityFlags check_admissibility(double p, double q, const EllipticOperator& op1, const EllipticOperator& op2,
                                       const EigenPair& pair1, const EigenPair& pair2, double margin = 0.0);

struct EpsilonChoice {
    double epsilon = 0.0;
    bool constraint1_ok = true;  // a >= eps^{p-1} r1
    bool constraint2_ok = true;  // b >= eps^{q-1} r2
};

/// Largest safe amplitude: safety * min((a/r1)^{1/(p-1)}, (b/r2)^{1/(q-1)}). An exponent equal to one makes
/// its constraint independent of epsilon; it is then recorded rather than solved.
EpsilonChoice select_epsilon(double p, double q, double a, double b, double r1, double r2, double safety = 0.9);

struct BarrierCertificate {
    double p = 0.0;
    double q = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double a = 0.0;
    double b = 0.0;
    double epsilon = 0.0;
    double epsilon_tilde = 0.0;               // always equal to epsilon
    std::array<double, 2> ratio_bounds{};     // sup psi2^p/psi1, sup psi1^q/psi2 on the profile grid
    std::array<double, 2> window_ratio_bounds{};  // the same sups restricted to the fitting window
    std::array<double, 2> envelope_bounds{};      // sups of the envelope bounds over the fitting window
    std::array<double, 2> residual_min{};
    std::vector<double> t_samples;
    AdmissibilityFlags conditions;
    EpsilonChoice epsilon_choice;
    bool residual_checked = false;
    bool residual_ok = false;

    /// Window ratios within 10% of the envelope bound (the envelope constants are fitted on that window).
    bool ratio_bounds_consistent() const {
        return window_ratio_bounds[0] <= 1.1 * envelope_bounds[0] && window_ratio_bounds[1] <= 1.1 * envelope_bounds[1];
    }
    bool valid() const {
        return conditions.admissible() && epsilon_choice.constraint1_ok && epsilon_choice.constraint2_ok &&
               residual_checked && residual_ok;
    }
};

struct BarrierOptions {
    double epsilon_safety = 0.9;
    /// Required lower bound on a and b; absorbs the discretization error of the computed alphas.
    double exponent_margin = 0.01;
    double residual_tol = 1e-3;
    double dt_t = 1e-3;
    std::vector<double> t_samples{0.0, 0.5, 1.0, 2.0, 5.0, 10.0};
    /// Replaces the selected amplitude (negative controls, monotonicity checks).
    std::optional<double> epsilon_override;
    /// Drops the coupling terms from the residual.
    bool coupled = true;
};

/// Computes exponents, ratio bounds, flags and epsilon. Throws unless admissible; the two profiles must
/// share a grid.
BarrierCertificate draft_certificate(double p, double q, const EllipticOperator& op1, const EllipticOperator& op2,
                                     const EigenPair& pair1, const EigenPair& pair2, const BarrierOptions& opts = {});

/// u_bar(x, t) = eps (t+1)^e phi(x, t+1) sampled on `grid`.
GridField barrier_field(const EigenPair& pair, double epsilon, double exponent, double t, const Grid& grid);

struct ResidualReport {
    std::array<double, 2> minimum{};
    std::vector<std::array<double, 2>> per_time;  // one entry per t sample
};

/// min over interior nodes and samples of u1bar_t + F1(D^2 u1bar) - |u2bar|^{p-1} u2bar (and the second
/// component). Each sample is evaluated on the profile lattice dilated by sqrt(t+1), where the drift of the
/// profile equation is reproduced by the centered time difference.
ResidualReport barrier_residual(const BarrierCertificate& cert, const EigenPair& pair1, const EigenPair& pair2,
                                const EllipticOperator& op1, const EllipticOperator& op2,
                                const std::vector<double>& t_samples, double dt_t = 1e-3, bool coupled = true);

/// draft_certificate followed by barrier_residual; the result is valid() when the residual minima clear -tol.
BarrierCertificate build_certificate(double p, double q, const EllipticOperator& op1, const EllipticOperator& op2,
                                     const EigenPair& pair1, const EigenPair& pair2, const BarrierOptions& opts = {});

struct BarrierRunReport {
    bool blown_up = false;
    std::optional<double> blowup_time;
    double t_reached = 0.0;
    double max_ordering_violation = 0.0;  // max (u_i - u_i_bar)^+ over sampled times
    double ordering_violation_t = 0.0;
    std::size_t samples = 0;
    std::array<double, 2> final_sup_norms{};
    double decay_exponent_fit = 0.0;        // slope of log ||u1|| against log(t+1) over the second half
    double decay_exponent_predicted = 0.0;  // a - alpha1
    double dt = 0.0;
};

/// Evolves the system from scale * u_bar(., 0) on `grid` (the profile grid when absent) to t_end and
/// compares against u_bar at roughly `samples` evenly spaced times.
BarrierRunReport run_from_barrier(const BarrierCertificate& cert, const EigenPair& pair1, const EigenPair& pair2,
                                  const SystemProblem& problem, const StepControl& ctl, double scale = 1.0,
                                  std::optional<Grid> grid = std::nullopt, std::size_t samples = 200);

/// run_from_barrier at scale 1 to T_long. Requires a valid certificate; blow-up throws
/// certificate-contradiction with the discretization parameters.
BarrierRunReport certify_global(const BarrierCertificate& cert, const EigenPair& pair1, const EigenPair& pair2,
                                const SystemProblem& problem, StepControl ctl, double T_long,
                                std::optional<Grid> grid = std::nullopt);

}  // namespace fnpar
