#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fnpar/error.hpp"
#include "fnpar/harness.hpp"

namespace h = fnpar::harness;

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fnpar: weakly coupled fully nonlinear parabolic systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int workers = -1;
    long long seed = -1;
    double cfl_safety = 0.0;

    const auto common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config,-c", config_path, "run configuration (sectioned key=value)")
                        ->check(CLI::ExistingFile);
        if (config_required) opt->required();
        sub->add_option("--out,-o", out_dir, "output directory (env FNPAR_OUT)");
        sub->add_option("--workers,-j", workers, "worker threads, 0 = all cores (env FNPAR_WORKERS)")
            ->check(CLI::Range(0, 1024));
        sub->add_option("--seed", seed, "seed for randomized checks")->check(CLI::NonNegativeNumber);
    };
    for (const char* name : {"evolve", "eigen", "certify", "sweep"}) {
        common(app.add_subcommand(name, std::string("run the ") + name + " pipeline"), true);
    }
    auto* self = app.add_subcommand("selfcheck", "run the invariant suite");
    common(self, false);
    self->add_option("--cfl-safety", cfl_safety, "explicit-step safety factor for the stepping checks")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    const std::string mode = app.get_subcommands().front()->get_name();

    try {
        h::RunConfig cfg = config_path.empty() ? h::RunConfig{} : h::load_config(config_path);
        cfg.mode = h::parse_mode(mode);

        if (auto e = env("FNPAR_OUT")) cfg.out_dir = *e;
        if (auto e = env("FNPAR_WORKERS")) {
            try {
                cfg.workers = std::stoi(*e);
            } catch (const std::exception&) {
                std::cerr << "fnpar: FNPAR_WORKERS must be an integer\n";
                return 2;
            }
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (workers >= 0) cfg.workers = workers;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (cfl_safety > 0.0) cfg.control.cfl_safety = cfl_safety;
        if (cfg.mode == h::Mode::Sweep && !cfg.sweep_p) {
            cfg.sweep_p = h::SweepRange{cfg.p, cfg.p, 1};
            cfg.sweep_q = h::SweepRange{cfg.q, cfg.q, 1};
        }

        const h::RunResult res = h::run(cfg, [](const std::string& line) { std::cout << line << '\n'; });
        std::cout << "wrote " << res.files.size() << " files to " << res.out_dir.string() << '\n';
        return res.exit_code;
    } catch (const fnpar::Error& e) {
        std::cerr << "fnpar " << mode << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fnpar " << mode << ": unexpected failure: " << e.what() << '\n';
        return 3;
    }
}
