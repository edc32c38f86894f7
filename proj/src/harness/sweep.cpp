#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include <omp.h>

#include "fnpar/error.hpp"
#include "fnpar/harness.hpp"

namespace fnpar::harness {

double eh_value(double p, double q) {
    require(p * q > 1.0, ErrorKind::InvalidArgument, "the curve value needs pq > 1");
    return (std::max(p, q) + 1.0) / (p * q - 1.0);
}

std::string eh_side(double p, double q, int dim) {
    const double v = eh_value(p, q);
    const double half = 0.5 * dim;
    if (std::abs(v - half) <= 1e-12 * std::max(1.0, half)) return "critical";
    return v > half ? "blowup-side" : "global-side";
}

SweepRecord sweep_cell(const RunConfig& cfg, double p, double q, const EigenPair& pair1, const EigenPair& pair2) {
    SweepRecord rec;
    rec.p = p;
    rec.q = q;
    rec.alpha1 = pair1.alpha;
    rec.alpha2 = pair2.alpha;
    rec.evolve_outcome = "error";
    rec.certificate = "skipped";
    rec.outcome = "error";
    try {
        require(p >= 1.0 && q >= 1.0 && p * q > 1.0, ErrorKind::InvalidArgument, "cell needs p, q >= 1 and pq > 1");
        rec.eh_value = eh_value(p, q);
        rec.eh_side = eh_side(p, q, cfg.dim);
        const auto ab = barrier_exponents(p, q, pair1.alpha, pair2.alpha);
        rec.a = ab[0];
        rec.b = ab[1];

        const EllipticOperator op1 = cfg.op1();
        const EllipticOperator op2 = cfg.op2();
        const SystemProblem problem{op1, op2, p, q};
        const Grid g = cfg.grid();
        const auto gaussian = [&](double amp) {
            GridField f = GridField::sample(g, [&](std::span<const double> x) {
                double r2 = 0.0;
                for (double v : x) r2 += v * v;
                return amp * std::exp(-r2 / (2.0 * cfg.initial.width * cfg.initial.width));
            });
            f.apply_dirichlet();
            return f;
        };
        const Trajectory traj =
            evolve_system(problem, SystemState(gaussian(cfg.initial.amplitude), gaussian(cfg.initial.amplitude2)),
                          cfg.control, std::numeric_limits<std::size_t>::max());
        const SystemState& last = traj.final_state();
        rec.evolve_outcome = last.blown_up ? "blown-up" : "global-to-T";
        rec.t_star = last.blowup_time;

        rec.admissible = check_admissibility(p, q, op1, op2, pair1, pair2, cfg.certify.exponent_margin).admissible();
        // The certificate column reports the certification stage only; admissibility has its own column.
        if (!cfg.certify.enabled) {
            rec.certificate = "skipped";
        } else if (!rec.admissible) {
            rec.certificate = "not-admissible";
        } else {
            try {
                const BarrierCertificate cert = build_certificate(p, q, op1, op2, pair1, pair2, cfg.barrier_options());
                rec.epsilon = cert.epsilon;
                rec.residual_min = cert.residual_min;
                if (!cert.valid()) {
                    rec.certificate = "rejected";
                } else {
                    const BarrierRunReport run = certify_global(cert, pair1, pair2, problem, cfg.control, cfg.certify.T_long);
                    rec.ordering_violation = run.max_ordering_violation;
                    rec.certificate = run.max_ordering_violation <= cfg.certify.residual_tol ? "certified" : "rejected";
                }
            } catch (const Error& e) {
                rec.certificate = e.kind() == ErrorKind::CertificateContradiction ? "contradiction" : "error";
                rec.error = e.what();
            }
        }
        rec.outcome = rec.certificate == "certified" ? "certified-global" : rec.evolve_outcome;
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.outcome = "error";
    }
    return rec;
}

std::vector<SweepRecord> run_sweep(const RunConfig& cfg, const EigenPair& pair1, const EigenPair& pair2, int workers) {
    require(cfg.sweep_p && cfg.sweep_q, ErrorKind::InvalidArgument, "sweep ranges are missing");
    std::vector<std::pair<double, double>> cells;
    for (double p : cfg.sweep_p->values()) {
        for (double q : cfg.sweep_q->values()) cells.emplace_back(p, q);
    }
    std::vector<SweepRecord> out(cells.size());
    if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, static_cast<int>(cells.size()));

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        // Cells are the unit of parallelism; keep the stencil kernels serial inside a worker.
        omp_set_num_threads(1);
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            out[i] = sweep_cell(cfg, cells[i].first, cells[i].second, pair1, pair2);
        }
    };
    if (workers <= 1) {
        worker();
        return out;
    }
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();
    return out;
}

SweepSummary summarize(const std::vector<SweepRecord>& records, int dim) {
    SweepSummary s;
    for (const auto& r : records) {
        ++s.cells;
        if (r.outcome == "error") {
            ++s.errors;
            continue;
        }
        const bool blowup_side = r.eh_side == "blowup-side" || r.eh_side == "critical";
        if (blowup_side) ++s.blowup_side_cells;
        if (r.evolve_outcome == "blown-up") {
            ++s.blown_up;
            if (blowup_side) ++s.blowup_side_blown_up;
        } else if (r.evolve_outcome == "global-to-T") {
            ++s.global_to_T;
        }
        if (r.outcome == "certified-global") {
            ++s.certified;
            if (r.eh_side != "global-side" || !(eh_value(r.p, r.q) < 0.5 * dim)) ++s.certified_off_global_side;
            if (!r.admissible) ++s.certified_where_inadmissible;
        }
    }
    return s;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRecord>& records) {
    std::ostringstream os;
    os << "# fnpar sweep records v1\n";
    os << "p,q,eh_value,eh_side,alpha1,alpha2,a,b,admissible,evolve_outcome,t_star,certificate,epsilon,"
          "residual_min1,residual_min2,ordering_violation,outcome,error\n";
    for (const auto& r : records) {
        os << num(r.p) << ',' << num(r.q) << ',' << num(r.eh_value) << ',' << r.eh_side << ',' << num(r.alpha1) << ','
           << num(r.alpha2) << ',' << num(r.a) << ',' << num(r.b) << ',' << (r.admissible ? "true" : "false") << ','
           << r.evolve_outcome << ',' << (r.t_star ? num(*r.t_star) : std::string()) << ',' << r.certificate << ','
           << num(r.epsilon) << ',' << num(r.residual_min[0]) << ',' << num(r.residual_min[1]) << ','
           << num(r.ordering_violation) << ',' << r.outcome << ',' << quoted(r.error) << '\n';
    }
    return os.str();
}

}  // namespace fnpar::harness
