#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "fnpar/grid.hpp"
#include "fnpar/operators.hpp"

namespace fnpar {

struct StepControl {
    double cfl_safety = 0.9;
    std::optional<double> dt_cap;
    double blowup_threshold = 1e6;
    double t_end = 1.0;
};

/// Largest stable explicit Euler step h^2 / (2 N Lambda) of u_t = -F(D^2 u).
double cfl_limit(const Grid& grid, double Lambda);
/// cfl_safety * cfl_limit, further capped by dt_cap.
double choose_dt(const Grid& grid, double Lambda, const StepControl& ctl);

struct SystemState {
    GridField u1;
    GridField u2;
    double t = 0.0;
    bool blown_up = false;
    std::optional<double> blowup_time;
    std::array<double, 2> sup_norms{0.0, 0.0};

    SystemState(GridField a, GridField b, double time = 0.0);
};

/// u1_t + F1(D^2 u1) = |u2|^{p-1} u2,  u2_t + F2(D^2 u2) = |u1|^{q-1} u1.
struct SystemProblem {
    EllipticOperator op1;
    EllipticOperator op2;
    double p = 1.0;
    double q = 1.0;
    /// false drops both source terms (two decoupled homogeneous flows).
    bool coupled = true;

    double Lambda_max() const { return std::max(op1.Lambda(), op2.Lambda()); }
};

/// One explicit Euler step of u_t = -F(D^2 u). Rejects dt above the stability limit.
GridField semigroup_step(const GridField& f, const EllipticOperator& op, double dt);
/// S(t_total) f by CFL-limited steps (last step shortened to land on t_total).
GridField semigroup_evolve(const GridField& f, const EllipticOperator& op, double t_total,
                           const StepControl& ctl = {});

/// ||S(t)phi - S(t)psi|| / ||phi - psi||, 0 when the inputs coincide.
double semigroup_nonexpansion_check(const GridField& phi, const GridField& psi, const EllipticOperator& op,
                                    double t_total, const StepControl& ctl = {});

/// Forward Euler step of the coupled system with explicit sources; flags blow-up past the threshold.
SystemState system_step(const SystemState& s, const SystemProblem& problem, double dt, const StepControl& ctl);

struct Trajectory {
    std::vector<SystemState> snapshots;
    std::vector<std::size_t> snapshot_steps;  // step index of each snapshot
    std::vector<double> times;                // every mesh time, times[0] = initial time
    std::vector<double> steps;                // steps[n] is the dt taken from times[n] to times[n+1]

    const SystemState& final_state() const { return snapshots.back(); }
};

using SnapshotObserver = std::function<void(const SystemState&)>;

/// Steps from `initial` to ctl.t_end (or until blow-up), keeping every `stride`-th state and the last.
Trajectory evolve_system(const SystemProblem& problem, SystemState initial, const StepControl& ctl,
                         std::size_t stride = 1, const SnapshotObserver& observer = {});

struct DuhamelResult {
    Trajectory trajectory;  // one snapshot per mesh time
    int iterations = 0;
    double contraction_factor = 0.0;
    std::vector<double> gaps;  // sup-in-time gap after each application of the map
};

/// Picard iteration on the mild formulation
///   v1(t) = S1(t) u10 + int_0^t S1(t - s) |v2(s)|^{p-1} v2(s) ds  (and symmetrically for v2)
/// on the uniform mesh of step dt (CFL step when absent) with trapezoid quadrature.
DuhamelResult duhamel_fixed_point(const GridField& u10, const GridField& u20, const SystemProblem& problem, double T,
                                  double tol, int max_iter, std::optional<double> dt = std::nullopt);

struct ComparisonReport {
    double max_violation = 0.0;  // max over i, t, x of (sub_i - sup_i)^+
    int component = 0;           // 1 or 2 where attained, 0 when no violation
    double t = 0.0;
    std::size_t node = 0;
};

ComparisonReport comparison_check(const Trajectory& sub, const Trajectory& sup);

/// Evolves w_t + F(D^2 w) + nu w = e^{(p-1) nu t} |w2|^{p-1} w2 (and the q-analogue) on the trajectory's
/// time mesh and returns max over snapshots of ||e^{-nu t} u_i(t) - w_i(t)||.
double exponential_rescale_check(const Trajectory& traj, const SystemProblem& problem, double nu,
                                 const StepControl& ctl);

}  // namespace fnpar
