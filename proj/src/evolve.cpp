#include "fnpar/evolve.hpp"

#include <cmath>
#include <limits>

#include "fnpar/error.hpp"
#include "fnpar/kernels.hpp"

namespace fnpar {

namespace {

constexpr double kCflSlack = 1e-12;

void check_dt(const Grid& grid, double Lambda, double dt) {
    require(std::isfinite(dt) && dt >= 0.0, ErrorKind::InvalidArgument, "time step must be finite and nonnegative");
    const double limit = cfl_limit(grid, Lambda);
    if (dt > limit * (1.0 + kCflSlack)) {
        fail(ErrorKind::StepRejected, "dt = " + std::to_string(dt) + " exceeds the stability limit h^2/(2 N Lambda) = " +
                                          std::to_string(limit));
    }
}

void check_exponents(const SystemProblem& problem) {
    require(problem.p >= 1.0 && problem.q >= 1.0, ErrorKind::InvalidArgument, "exponents must satisfy p, q >= 1");
}

void refresh_norms(SystemState& s, const StepControl& ctl) {
    s.sup_norms = {kernels::max_abs(s.u1.values), kernels::max_abs(s.u2.values)};
    const double m = std::max(s.sup_norms[0], s.sup_norms[1]);
    if (!std::isfinite(m) || m > ctl.blowup_threshold) {
        s.blown_up = true;
        s.blowup_time = s.t;
    }
}

// Number of uniform steps covering `span` with steps no longer than `dt_max`.
std::size_t step_count(double span, double dt_max) {
    return static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt_max - 1e-9)));
}

}  // namespace

double cfl_limit(const Grid& grid, double Lambda) {
    require(Lambda > 0.0, ErrorKind::InvalidArgument, "Lambda must be positive");
    return grid.spacing() * grid.spacing() / (2.0 * grid.dim() * Lambda);
}

double choose_dt(const Grid& grid, double Lambda, const StepControl& ctl) {
    require(ctl.cfl_safety > 0.0, ErrorKind::InvalidArgument, "cfl_safety must be positive");
    double dt = ctl.cfl_safety * cfl_limit(grid, Lambda);
    if (ctl.dt_cap) {
        require(*ctl.dt_cap > 0.0, ErrorKind::InvalidArgument, "dt_cap must be positive");
        dt = std::min(dt, *ctl.dt_cap);
    }
    return dt;
}

SystemState::SystemState(GridField a, GridField b, double time) : u1(std::move(a)), u2(std::move(b)), t(time) {
    require(u1.grid == u2.grid, ErrorKind::InvalidArgument, "system components must share a grid");
    sup_norms = {kernels::max_abs(u1.values), kernels::max_abs(u2.values)};
}

GridField semigroup_step(const GridField& f, const EllipticOperator& op, double dt) {
    check_dt(f.grid, op.Lambda(), dt);
    GridField out(f.grid, f.boundary);
    kernels::explicit_step(op, f, kernels::StepTerms{.dt = dt}, out);
    return out;
}

GridField semigroup_evolve(const GridField& f, const EllipticOperator& op, double t_total, const StepControl& ctl) {
    require(t_total >= 0.0, ErrorKind::InvalidArgument, "evolution time must be nonnegative");
    if (t_total == 0.0) return f;
    const std::size_t steps = step_count(t_total, choose_dt(f.grid, op.Lambda(), ctl));
    const double dt = t_total / static_cast<double>(steps);
    check_dt(f.grid, op.Lambda(), dt);
    GridField cur = f;
    GridField next(f.grid, f.boundary);
    for (std::size_t n = 0; n < steps; ++n) {
        kernels::explicit_step(op, cur, kernels::StepTerms{.dt = dt}, next);
        std::swap(cur, next);
    }
    return cur;
}

double semigroup_nonexpansion_check(const GridField& phi, const GridField& psi, const EllipticOperator& op,
                                    double t_total, const StepControl& ctl) {
    require(phi.grid == psi.grid, ErrorKind::InvalidArgument, "fields live on different grids");
    const double before = sup_norm_diff(phi, psi);
    if (before == 0.0) return 0.0;
    const double after = sup_norm_diff(semigroup_evolve(phi, op, t_total, ctl), semigroup_evolve(psi, op, t_total, ctl));
    return after / before;
}

SystemState system_step(const SystemState& s, const SystemProblem& problem, double dt, const StepControl& ctl) {
    require(!s.blown_up, ErrorKind::InvalidState, "cannot step a blown-up state");
    check_exponents(problem);
    require(problem.op1.dim() == s.u1.grid.dim() && problem.op2.dim() == s.u1.grid.dim(),
            ErrorKind::InvalidArgument, "operator and grid dimensions differ");
    check_dt(s.u1.grid, problem.Lambda_max(), dt);

    const kernels::StepTerms t1{.dt = dt, .source = problem.coupled ? &s.u2 : nullptr, .source_power = problem.p};
    const kernels::StepTerms t2{.dt = dt, .source = problem.coupled ? &s.u1 : nullptr, .source_power = problem.q};
    GridField n1(s.u1.grid, s.u1.boundary);
    GridField n2(s.u2.grid, s.u2.boundary);
    kernels::explicit_step(problem.op1, s.u1, t1, n1);
    kernels::explicit_step(problem.op2, s.u2, t2, n2);

    SystemState next(std::move(n1), std::move(n2), s.t + dt);
    refresh_norms(next, ctl);
    return next;
}

Trajectory evolve_system(const SystemProblem& problem, SystemState initial, const StepControl& ctl, std::size_t stride,
                         const SnapshotObserver& observer) {
    require(stride >= 1, ErrorKind::InvalidArgument, "snapshot stride must be >= 1");
    require(!initial.blown_up, ErrorKind::InvalidState, "initial state is already blown up");
    require(ctl.t_end >= initial.t, ErrorKind::InvalidArgument, "t_end precedes the initial time");
    refresh_norms(initial, ctl);

    const double dt_nominal = choose_dt(initial.u1.grid, problem.Lambda_max(), ctl);
    Trajectory traj;
    traj.times.push_back(initial.t);
    traj.snapshots.push_back(initial);
    traj.snapshot_steps.push_back(0);
    if (observer) observer(initial);
    if (initial.blown_up) return traj;

    SystemState cur = std::move(initial);
    std::size_t step = 0;
    while (true) {
        const double remaining = ctl.t_end - cur.t;
        if (remaining <= 1e-12 * std::max(1.0, ctl.t_end)) break;
        const double dt = std::min(dt_nominal, remaining);
        cur = system_step(cur, problem, dt, ctl);
        ++step;
        traj.times.push_back(cur.t);
        traj.steps.push_back(dt);
        const bool last = cur.blown_up || ctl.t_end - cur.t <= 1e-12 * std::max(1.0, ctl.t_end);
        if (step % stride == 0 || last) {
            traj.snapshots.push_back(cur);
            traj.snapshot_steps.push_back(step);
            if (observer) observer(cur);
        }
        if (cur.blown_up) break;
    }
    return traj;
}

DuhamelResult duhamel_fixed_point(const GridField& u10, const GridField& u20, const SystemProblem& problem, double T,
                                  double tol, int max_iter, std::optional<double> dt_request) {
    check_exponents(problem);
    require(u10.grid == u20.grid, ErrorKind::InvalidArgument, "initial data live on different grids");
    require(T > 0.0 && tol > 0.0 && max_iter >= 1, ErrorKind::InvalidArgument, "need T > 0, tol > 0, max_iter >= 1");

    const Grid& grid = u10.grid;
    const double Lambda = problem.Lambda_max();
    const double dt_max = dt_request ? *dt_request : choose_dt(grid, Lambda, StepControl{});
    const std::size_t steps = step_count(T, dt_max);
    const double dt = T / static_cast<double>(steps);
    check_dt(grid, Lambda, dt);

    auto flow = [&](const EllipticOperator& op, const GridField& f) {
        GridField out(f.grid, f.boundary);
        kernels::explicit_step(op, f, kernels::StepTerms{.dt = dt}, out);
        return out;
    };
    auto orbit = [&](const EllipticOperator& op, const GridField& f0) {
        std::vector<GridField> o{f0};
        for (std::size_t n = 0; n < steps; ++n) o.push_back(flow(op, o.back()));
        return o;
    };
    const std::vector<GridField> base1 = orbit(problem.op1, u10);
    const std::vector<GridField> base2 = orbit(problem.op2, u20);

    // Psi[v](t_n) = S(t_n) u0 + sum_m w_{n,m} S(t_n - t_m) g(v(t_m)), trapezoid weights.
    auto apply_map = [&](const EllipticOperator& op, const std::vector<GridField>& base,
                         const std::vector<GridField>& other, double power) {
        std::vector<GridField> out = base;
        if (!problem.coupled) return out;
        const std::size_t size = grid.size();
        for (std::size_t m = 0; m < steps; ++m) {
            GridField g(grid, other[m].boundary);
            for (std::size_t k = 0; k < size; ++k) g.values[k] = kernels::signed_power(other[m].values[k], power);
            if (m > 0) {
                for (std::size_t k = 0; k < size; ++k) out[m].values[k] += 0.5 * dt * g.values[k];
            }
            // s = 0 is an endpoint of every later integral; interior nodes carry full weight
            const double w = (m == 0) ? 0.5 * dt : dt;
            for (std::size_t n = m + 1; n <= steps; ++n) {
                g = flow(op, g);
                for (std::size_t k = 0; k < size; ++k) out[n].values[k] += w * g.values[k];
            }
        }
        for (std::size_t k = 0; k < size; ++k) {
            out[steps].values[k] += 0.5 * dt * kernels::signed_power(other[steps].values[k], power);
        }
        return out;
    };

    std::vector<GridField> v1 = base1;
    std::vector<GridField> v2 = base2;
    DuhamelResult result;
    bool converged = false;
    for (int k = 1; k <= max_iter; ++k) {
        std::vector<GridField> n1 = apply_map(problem.op1, base1, v2, problem.p);
        std::vector<GridField> n2 = apply_map(problem.op2, base2, v1, problem.q);
        double gap = 0.0;
        double scale = 0.0;
        for (std::size_t n = 0; n <= steps; ++n) {
            gap = std::max({gap, sup_norm_diff(n1[n], v1[n]), sup_norm_diff(n2[n], v2[n])});
            scale = std::max({scale, sup_norm(n1[n]), sup_norm(n2[n])});
        }
        v1 = std::move(n1);
        v2 = std::move(n2);
        result.gaps.push_back(gap);
        result.iterations = k;
        if (!std::isfinite(gap)) fail(ErrorKind::FixedPointDiverged, "Picard iterates became non-finite; shrink T");

        const std::size_t g = result.gaps.size();
        // Ratios are only meaningful while the gap sits above the rounding floor.
        if (g >= 2 && result.gaps[g - 2] > 1e-13 * std::max(1.0, scale)) {
            result.contraction_factor = std::max(result.contraction_factor, gap / result.gaps[g - 2]);
        }
        if (gap < tol) {
            converged = true;
            break;
        }
        if (g >= 3 && result.gaps[g - 1] >= result.gaps[g - 2] && result.gaps[g - 2] >= result.gaps[g - 3]) {
            fail(ErrorKind::FixedPointDiverged, "Picard gaps stopped shrinking (factor >= 1); shrink T");
        }
    }
    if (!converged) {
        fail(ErrorKind::FixedPointDiverged,
             "no convergence to tol after " + std::to_string(max_iter) + " iterations; shrink T");
    }

    Trajectory& traj = result.trajectory;
    for (std::size_t n = 0; n <= steps; ++n) {
        const double t = dt * static_cast<double>(n);
        traj.times.push_back(t);
        if (n > 0) traj.steps.push_back(dt);
        traj.snapshots.emplace_back(v1[n], v2[n], t);
        traj.snapshot_steps.push_back(n);
    }
    return result;
}

ComparisonReport comparison_check(const Trajectory& sub, const Trajectory& sup) {
    require(sub.snapshots.size() == sup.snapshots.size(), ErrorKind::InvalidArgument,
            "trajectories have different snapshot counts");
    ComparisonReport report;
    for (std::size_t s = 0; s < sub.snapshots.size(); ++s) {
        const SystemState& a = sub.snapshots[s];
        const SystemState& b = sup.snapshots[s];
        require(a.u1.grid == b.u1.grid, ErrorKind::InvalidArgument, "trajectories live on different grids");
        require(std::abs(a.t - b.t) <= 1e-12 * std::max(1.0, std::abs(a.t)), ErrorKind::InvalidArgument,
                "trajectories use different time meshes");
        const GridField* pairs[2][2] = {{&a.u1, &b.u1}, {&a.u2, &b.u2}};
        for (int c = 0; c < 2; ++c) {
            const auto& lo = pairs[c][0]->values;
            const auto& hi = pairs[c][1]->values;
            for (std::size_t k = 0; k < lo.size(); ++k) {
                const double v = lo[k] - hi[k];
                if (v > report.max_violation) report = {v, c + 1, a.t, k};
            }
        }
    }
    return report;
}

double exponential_rescale_check(const Trajectory& traj, const SystemProblem& problem, double nu,
                                 const StepControl& ctl) {
    require(!traj.snapshots.empty(), ErrorKind::InvalidArgument, "empty trajectory");
    require(traj.steps.size() + 1 == traj.times.size(), ErrorKind::InvalidArgument,
            "trajectory step record is incomplete");
    require(!traj.final_state().blown_up, ErrorKind::InvalidState, "trajectory blew up");
    check_exponents(problem);

    const SystemState& first = traj.snapshots.front();
    GridField w1 = first.u1;
    GridField w2 = first.u2;
    GridField n1(w1.grid, w1.boundary);
    GridField n2(w2.grid, w2.boundary);

    auto gap_at = [&](const SystemState& s) {
        const double scale = std::exp(-nu * (s.t - first.t));
        double g = 0.0;
        for (std::size_t k = 0; k < w1.values.size(); ++k) {
            g = std::max(g, std::abs(scale * s.u1.values[k] - w1.values[k]));
            g = std::max(g, std::abs(scale * s.u2.values[k] - w2.values[k]));
        }
        return g;
    };

    double worst = gap_at(first);
    std::size_t next_snapshot = 1;
    for (std::size_t n = 0; n + 1 < traj.times.size(); ++n) {
        const double t = traj.times[n] - first.t;
        const double dt = traj.steps[n];
        check_dt(w1.grid, problem.Lambda_max(), dt);
        const kernels::StepTerms t1{.dt = dt,
                                    .decay = nu,
                                    .source = problem.coupled ? &w2 : nullptr,
                                    .source_power = problem.p,
                                    .source_scale = std::exp((problem.p - 1.0) * nu * t)};
        const kernels::StepTerms t2{.dt = dt,
                                    .decay = nu,
                                    .source = problem.coupled ? &w1 : nullptr,
                                    .source_power = problem.q,
                                    .source_scale = std::exp((problem.q - 1.0) * nu * t)};
        kernels::explicit_step(problem.op1, w1, t1, n1);
        kernels::explicit_step(problem.op2, w2, t2, n2);
        std::swap(w1, n1);
        std::swap(w2, n2);
        if (!kernels::all_finite(w1.values) || !kernels::all_finite(w2.values) ||
            std::max(kernels::max_abs(w1.values), kernels::max_abs(w2.values)) > ctl.blowup_threshold) {
            fail(ErrorKind::InvalidState, "transformed system escaped the blow-up threshold");
        }
        while (next_snapshot < traj.snapshots.size() && traj.snapshot_steps[next_snapshot] == n + 1) {
            worst = std::max(worst, gap_at(traj.snapshots[next_snapshot]));
            ++next_snapshot;
        }
    }
    return worst;
}

}  // namespace fnpar
