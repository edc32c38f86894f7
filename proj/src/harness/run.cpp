#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "fnpar/error.hpp"
#include "fnpar/harness.hpp"

#ifndef FNPAR_VERSION
#define FNPAR_VERSION "0.0.0"
#endif

namespace fnpar::harness {

using nlohmann::json;

namespace {

class RunWriter {
public:
    explicit RunWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_ / "fields", ec);
        if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir_.string() + ": " + ec.message());
        logs_.open(dir_ / "logs.jsonl", std::ios::binary | std::ios::trunc);
        if (!logs_) fail(ErrorKind::Io, "cannot open " + (dir_ / "logs.jsonl").string());
    }

    void text(const std::string& rel, const std::string& content) {
        std::ofstream out(dir_ / rel, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) fail(ErrorKind::Io, "cannot write " + (dir_ / rel).string());
        files_.push_back(rel);
    }

    /// Writes fields/<stem>.bin (and .csv when asked); returns the binary's relative path.
    std::string field(const std::string& stem, const GridField& f, bool csv) {
        const std::string bin = "fields/" + stem + ".bin";
        write_binary(f, dir_ / bin);
        files_.push_back(bin);
        if (csv) {
            const std::string c = "fields/" + stem + ".csv";
            write_csv(f, dir_ / c);
            files_.push_back(c);
        }
        return bin;
    }

    void log(const json& j) { logs_ << j.dump() << '\n'; }

    std::vector<std::filesystem::path> finish(const RunConfig& cfg, int exit_code, double wall) {
        logs_.close();
        files_.push_back("logs.jsonl");
        json m;
        m["tool"] = "fnpar";
        m["version"] = FNPAR_VERSION;
        m["mode"] = to_string(cfg.mode);
        m["seed"] = cfg.seed;
        m["workers"] = cfg.workers;
        m["exit_code"] = exit_code;
        m["wall_time_s"] = wall;
        m["config"] = cfg.echo;
        m["effective"] = {{"dim", cfg.dim},
                          {"op1", cfg.op1_spec},
                          {"op2", cfg.op2_spec},
                          {"radius", cfg.radius},
                          {"points", cfg.points},
                          {"p", cfg.p},
                          {"q", cfg.q},
                          {"cfl_safety", cfg.control.cfl_safety},
                          {"t_end", cfg.control.t_end},
                          {"blowup_threshold", cfg.control.blowup_threshold}};
        json files = json::array();
        std::vector<std::filesystem::path> out;
        for (const auto& rel : files_) {
            const auto path = dir_ / rel;
            files.push_back({{"path", rel}, {"sha256", sha256_file(path)}, {"bytes", std::filesystem::file_size(path)}});
            out.emplace_back(rel);
        }
        m["files"] = files;
        std::ofstream mf(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        mf << m.dump(2) << '\n';
        if (!mf) fail(ErrorKind::Io, "cannot write manifest");
        out.emplace_back("manifest.json");
        return out;
    }

private:
    std::filesystem::path dir_;
    std::ofstream logs_;
    std::vector<std::string> files_;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

GridField gaussian_data(const Grid& g, double amplitude, double width) {
    GridField f = GridField::sample(g, [&](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return amplitude * std::exp(-r2 / (2.0 * width * width));
    });
    f.apply_dirichlet();
    return f;
}

struct Pairs {
    EigenPair first;
    EigenPair second;
};

/// Both eigenpairs, computed concurrently; the second reuses the first when the specs coincide.
Pairs compute_pairs(const RunConfig& cfg) {
    const Grid g = cfg.grid();
    const auto opts = cfg.power_options();
    auto f1 = std::async(std::launch::async, [&] { return power_iterate(cfg.op1(), g, opts); });
    if (cfg.op2_spec == cfg.op1_spec) {
        EigenPair e = f1.get();
        return {e, e};
    }
    auto f2 = std::async(std::launch::async, [&] { return power_iterate(cfg.op2(), g, opts); });
    return {f1.get(), f2.get()};
}

json pair_log(const char* event, int component, const EigenPair& e) {
    return {{"event", event}, {"component", component}, {"alpha", e.alpha}, {"converged", e.converged}, {"tau", e.tau}};
}

std::array<std::string, 2> write_profiles(RunWriter& w, const RunConfig& cfg, const Pairs& pairs) {
    std::array<std::string, 2> hashes;
    const EigenPair* ps[2] = {&pairs.first, &pairs.second};
    const std::string names[2] = {cfg.op1().name(), cfg.op2().name()};
    for (int i = 0; i < 2; ++i) {
        const std::string stem = "psi" + std::to_string(i + 1);
        const std::string bin = w.field(stem, ps[i]->psi, cfg.write_csv_fields);
        hashes[i] = sha256_hex(to_binary(ps[i]->psi));
        w.text("eigen" + std::to_string(i + 1) + ".json", eigenpair_json(*ps[i], names[i], bin, hashes[i]));
        w.log(pair_log("eigenpair", i + 1, *ps[i]));
    }
    return hashes;
}

int run_evolve(const RunConfig& cfg, RunWriter& w, const LineSink& say) {
    const Grid g = cfg.grid();
    const SystemProblem problem{cfg.op1(), cfg.op2(), cfg.p, cfg.q};
    std::optional<GridField> u10, u20;
    switch (cfg.initial.kind) {
        case InitialKind::Gaussian:
            u10 = gaussian_data(g, cfg.initial.amplitude, cfg.initial.width);
            u20 = gaussian_data(g, cfg.initial.amplitude2, cfg.initial.width);
            break;
        case InitialKind::File:
            u10 = cfg.initial.file1.extension() == ".csv" ? read_csv(cfg.initial.file1) : read_binary(cfg.initial.file1);
            u20 = cfg.initial.file2.extension() == ".csv" ? read_csv(cfg.initial.file2) : read_binary(cfg.initial.file2);
            require(u10->grid == g && u20->grid == g, ErrorKind::InvalidArgument,
                    "initial.file1/file2 grids must match the [grid] section");
            break;
        case InitialKind::Barrier: {
            const Pairs pairs = compute_pairs(cfg);
            write_profiles(w, cfg, pairs);
            const BarrierCertificate c =
                draft_certificate(cfg.p, cfg.q, problem.op1, problem.op2, pairs.first, pairs.second, cfg.barrier_options());
            u10 = barrier_field(pairs.first, c.epsilon * cfg.initial.amplitude, c.a, 0.0, g);
            u20 = barrier_field(pairs.second, c.epsilon_tilde * cfg.initial.amplitude2, c.b, 0.0, g);
            u10->apply_dirichlet();
            u20->apply_dirichlet();
            break;
        }
    }
    const std::size_t stride = cfg.snapshot_stride == 0 ? std::numeric_limits<std::size_t>::max() : cfg.snapshot_stride;
    std::size_t index = 0;
    const auto observe = [&](const SystemState& s) {
        w.log({{"event", "snapshot"}, {"index", index}, {"t", s.t}, {"sup_norms", s.sup_norms}, {"blown_up", s.blown_up}});
        if (cfg.snapshot_stride > 0) {
            char stem[32];
            std::snprintf(stem, sizeof stem, "%06zu", index);
            w.field(std::string("u1_") + stem, s.u1, false);
            w.field(std::string("u2_") + stem, s.u2, false);
        }
        ++index;
    };
    const Trajectory traj = evolve_system(problem, SystemState(*u10, *u20), cfg.control, stride, observe);
    const SystemState& last = traj.final_state();
    w.field("u1_final", last.u1, cfg.write_csv_fields);
    w.field("u2_final", last.u2, cfg.write_csv_fields);

    std::ostringstream csv;
    csv << "# fnpar evolve records v1\n";
    csv << "p,q,t_end,t_reached,steps,blown_up,t_star,sup1,sup2,outcome\n";
    csv << num(cfg.p) << ',' << num(cfg.q) << ',' << num(cfg.control.t_end) << ',' << num(last.t) << ','
        << traj.times.size() - 1 << ',' << (last.blown_up ? "true" : "false") << ','
        << (last.blowup_time ? num(*last.blowup_time) : std::string()) << ',' << num(last.sup_norms[0]) << ','
        << num(last.sup_norms[1]) << ',' << (last.blown_up ? "blown-up" : "global-to-T") << '\n';
    w.text("records.csv", csv.str());
    say(last.blown_up ? "evolve: blown-up at t* = " + num(*last.blowup_time)
                      : "evolve: global-to-T, t = " + num(last.t) + ", sup norms " + num(last.sup_norms[0]) + ", " +
                            num(last.sup_norms[1]));
    return 0;
}

int run_eigen(const RunConfig& cfg, RunWriter& w, const LineSink& say) {
    const Pairs pairs = compute_pairs(cfg);
    write_profiles(w, cfg, pairs);
    std::ostringstream csv;
    csv << "# fnpar eigen records v1\n";
    csv << "component,operator,alpha,converged,tau,delta_fit,C_fit,envelope_pass,delta_upper,C_upper,delta_lower,C_lower\n";
    const EigenPair* ps[2] = {&pairs.first, &pairs.second};
    const EllipticOperator ops[2] = {cfg.op1(), cfg.op2()};
    bool ok = true;
    for (int i = 0; i < 2; ++i) {
        const EnvelopeReport env = envelope_check(*ps[i], ops[i].lambda(), ops[i].Lambda());
        ok = ok && ps[i]->converged;
        csv << i + 1 << ',' << ops[i].name() << ',' << num(ps[i]->alpha) << ',' << (ps[i]->converged ? "true" : "false")
            << ',' << num(ps[i]->tau) << ',' << num(ps[i]->fit.delta) << ',' << num(ps[i]->fit.C) << ','
            << (env.pass ? "true" : "false") << ',' << num(env.envelope.delta_upper) << ','
            << num(env.envelope.C_upper) << ',' << num(env.envelope.delta_lower) << ',' << num(env.envelope.C_lower)
            << '\n';
        say("eigen: " + ops[i].name() + " alpha = " + num(ps[i]->alpha) + (ps[i]->converged ? "" : " (not converged)") +
            ", envelope " + (env.pass ? "pass" : "fail"));
    }
    w.text("records.csv", csv.str());
    return ok ? 0 : 1;
}

int run_certify(const RunConfig& cfg, RunWriter& w, const LineSink& say) {
    const Pairs pairs = compute_pairs(cfg);
    const auto hashes = write_profiles(w, cfg, pairs);
    const SystemProblem problem{cfg.op1(), cfg.op2(), cfg.p, cfg.q};
    const BarrierCertificate cert =
        build_certificate(cfg.p, cfg.q, problem.op1, problem.op2, pairs.first, pairs.second, cfg.barrier_options());
    std::optional<BarrierRunReport> rep;
    std::string status = cert.valid() ? "certified" : "rejected";
    if (cert.valid()) {
        rep = certify_global(cert, pairs.first, pairs.second, problem, cfg.control, cfg.certify.T_long);
        if (rep->max_ordering_violation > cfg.certify.residual_tol) status = "rejected";
    }
    w.text("certificate.json", certificate_json(cert, hashes, rep));
    w.log({{"event", "certificate"}, {"status", status}, {"epsilon", cert.epsilon}, {"a", cert.a}, {"b", cert.b}});

    std::ostringstream csv;
    csv << "# fnpar certify records v1\n";
    csv << "p,q,alpha1,alpha2,a,b,epsilon,residual_min1,residual_min2,T_long,ordering_violation,decay_fit,"
           "decay_predicted,status\n";
    csv << num(cert.p) << ',' << num(cert.q) << ',' << num(cert.alpha1) << ',' << num(cert.alpha2) << ','
        << num(cert.a) << ',' << num(cert.b) << ',' << num(cert.epsilon) << ',' << num(cert.residual_min[0]) << ','
        << num(cert.residual_min[1]) << ',' << num(cfg.certify.T_long) << ','
        << (rep ? num(rep->max_ordering_violation) : std::string()) << ','
        << (rep ? num(rep->decay_exponent_fit) : std::string()) << ','
        << (rep ? num(rep->decay_exponent_predicted) : std::string()) << ',' << status << '\n';
    w.text("records.csv", csv.str());
    say("certify: " + status + " (a = " + num(cert.a) + ", b = " + num(cert.b) + ", epsilon = " + num(cert.epsilon) +
        ", residual minima " + num(cert.residual_min[0]) + ", " + num(cert.residual_min[1]) + ")");
    return status == "certified" ? 0 : 1;
}

int run_sweep_mode(const RunConfig& cfg, RunWriter& w, const LineSink& say) {
    const Pairs pairs = compute_pairs(cfg);
    write_profiles(w, cfg, pairs);
    const auto records = run_sweep(cfg, pairs.first, pairs.second, cfg.workers);
    for (const auto& r : records) {
        json j{{"event", "cell"}, {"p", r.p}, {"q", r.q}, {"outcome", r.outcome}, {"certificate", r.certificate}};
        if (r.t_star) j["t_star"] = *r.t_star;
        if (!r.error.empty()) j["error"] = r.error;
        w.log(j);
    }
    w.text("records.csv", sweep_csv(records));
    const SweepSummary s = summarize(records, cfg.dim);
    const json summary{{"cells", s.cells},
                       {"blown_up", s.blown_up},
                       {"global_to_T", s.global_to_T},
                       {"certified_global", s.certified},
                       {"errors", s.errors},
                       {"blowup_side_cells", s.blowup_side_cells},
                       {"blowup_side_blown_up", s.blowup_side_blown_up},
                       {"certified_off_global_side", s.certified_off_global_side},
                       {"certified_where_inadmissible", s.certified_where_inadmissible},
                       {"consistent", s.consistent()}};
    w.text("summary.json", summary.dump(2) + "\n");
    say("sweep: " + std::to_string(s.cells) + " cells, " + std::to_string(s.blown_up) + " blown-up, " +
        std::to_string(s.certified) + " certified-global, " + std::to_string(s.errors) + " errors; " +
        (s.consistent() ? "consistent with the curve" : "INCONSISTENT with the curve"));
    return s.consistent() ? 0 : 1;
}

int run_selfcheck(const RunConfig& cfg, RunWriter& w, const LineSink& say) {
    const SelfcheckReport r = selfcheck(cfg.seed, cfg.control.cfl_safety);
    const std::string text = r.text();
    w.text("selfcheck.txt", text);
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) say(line);
    return r.pass() ? 0 : 1;
}

}  // namespace

RunResult run(const RunConfig& cfg, const LineSink& console) {
    const LineSink say = console ? console : [](const std::string&) {};
    const auto start = std::chrono::steady_clock::now();
    RunWriter w(cfg.out_dir);
    w.log({{"event", "start"}, {"mode", to_string(cfg.mode)}, {"seed", cfg.seed}});
    int code = 0;
    switch (cfg.mode) {
        case Mode::Evolve: code = run_evolve(cfg, w, say); break;
        case Mode::Eigen: code = run_eigen(cfg, w, say); break;
        case Mode::Certify: code = run_certify(cfg, w, say); break;
        case Mode::Sweep: code = run_sweep_mode(cfg, w, say); break;
        case Mode::Selfcheck: code = run_selfcheck(cfg, w, say); break;
    }
    w.log({{"event", "end"}, {"exit_code", code}});
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    RunResult res;
    res.exit_code = code;
    res.out_dir = cfg.out_dir;
    res.files = w.finish(cfg, code, wall);
    return res;
}

}  // namespace fnpar::harness
