#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fnpar/barrier.hpp"
#include "fnpar/evolve.hpp"
#include "fnpar/selfsim.hpp"

namespace fnpar::harness {

enum class Mode { Evolve, Eigen, Certify, Sweep, Selfcheck };

std::string to_string(Mode m);
Mode parse_mode(const std::string& text);

struct SweepRange {
    double min = 0.0;
    double max = 0.0;
    int steps = 1;

    /// `steps` evenly spaced values from min to max inclusive (just min when steps == 1).
    std::vector<double> values() const;
};

enum class InitialKind { Gaussian, Barrier, File };

struct InitialSpec {
    InitialKind kind = InitialKind::Gaussian;
    double amplitude = 1.0;   // u_i0 = amplitude_i exp(-|x|^2 / (2 width^2)); barrier data is scaled by it
    double amplitude2 = 1.0;
    double width = 1.0;
    std::filesystem::path file1;
    std::filesystem::path file2;
};

struct EigenSettings {
    double tol = 1e-4;
    double max_tau = 200.0;
    double renorm_interval = 0.5;
    double min_tau = 2.0;
    double cfl_safety = 0.9;
};

struct CertifySettings {
    double T_long = 50.0;
    double exponent_margin = 0.01;
    double epsilon_safety = 0.9;
    double residual_tol = 1e-3;
    bool enabled = true;  // sweep: attempt a certificate on admissible cells
};

struct RunConfig {
    Mode mode = Mode::Evolve;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "fnpar-out";
    int workers = 0;  // 0 = hardware concurrency

    int dim = 1;
    std::string op1_spec = "laplacian";
    std::string op2_spec = "laplacian";
    double radius = 12.0;
    int points = 481;

    double p = 2.0;
    double q = 2.0;
    std::optional<SweepRange> sweep_p;
    std::optional<SweepRange> sweep_q;

    InitialSpec initial;
    StepControl control;
    std::size_t snapshot_stride = 0;  // 0 = final state only
    bool write_csv_fields = true;

    EigenSettings eigen;
    CertifySettings certify;

    /// Flat "section.key" -> value echo of the parsed file, for the manifest.
    std::map<std::string, std::string> echo;

    Grid grid() const { return Grid(dim, radius, points); }
    EllipticOperator op1() const;
    EllipticOperator op2() const;
    PowerIterationOptions power_options() const;
    BarrierOptions barrier_options() const;
};

/// Parses the sectioned key-value format; errors carry the offending field path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// ---- sweep ----

struct SweepRecord {
    double p = 0.0;
    double q = 0.0;
    double eh_value = 0.0;       // (max{p,q}+1)/(pq-1)
    std::string eh_side;         // blowup-side | critical | global-side
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double a = 0.0;              // alpha1 - (p+1)/(pq-1)
    double b = 0.0;
    bool admissible = false;
    std::string evolve_outcome;  // blown-up | global-to-T | error
    std::optional<double> t_star;
    std::string certificate;     // certified | not-admissible | rejected | contradiction | skipped | error
    double epsilon = 0.0;
    std::array<double, 2> residual_min{};
    double ordering_violation = 0.0;
    std::string outcome;         // certified-global | blown-up | global-to-T | error
    std::string error;
};

struct SweepSummary {
    std::size_t cells = 0;
    std::size_t blown_up = 0;
    std::size_t global_to_T = 0;
    std::size_t certified = 0;
    std::size_t errors = 0;
    std::size_t certified_off_global_side = 0;  // must be zero
    std::size_t blowup_side_blown_up = 0;
    std::size_t blowup_side_cells = 0;
    std::size_t certified_where_inadmissible = 0;  // must be zero
    bool consistent() const { return certified_off_global_side == 0 && certified_where_inadmissible == 0; }
};

double eh_value(double p, double q);
/// Side of the curve (max{p,q}+1)/(pq-1) = N/2, with exact equality reported as critical.
std::string eh_side(double p, double q, int dim);

/// Evaluates one cell; solver errors are recorded in-row.
SweepRecord sweep_cell(const RunConfig& cfg, double p, double q, const EigenPair& pair1, const EigenPair& pair2);

/// All cells in row-major (p outer, q inner) order, independent of worker count.
std::vector<SweepRecord> run_sweep(const RunConfig& cfg, const EigenPair& pair1, const EigenPair& pair2, int workers);

SweepSummary summarize(const std::vector<SweepRecord>& records, int dim);

/// Versioned CSV with a leading comment line.
std::string sweep_csv(const std::vector<SweepRecord>& records);

// ---- selfcheck ----

struct CheckLine {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
    std::string note;
};

struct SelfcheckReport {
    std::vector<CheckLine> lines;
    bool pass() const;
    /// Deterministic text: one PASS/FAIL line per check, then a verdict.
    std::string text() const;
};

/// Invariant suite; cfl_safety drives the stepping checks (values above 1 are expected to fail).
SelfcheckReport selfcheck(std::uint64_t seed, double cfl_safety = 0.9);

// ---- runs ----

struct RunResult {
    int exit_code = 0;
    std::filesystem::path out_dir;
    std::vector<std::filesystem::path> files;  // relative to out_dir, as listed in the manifest
};

using LineSink = std::function<void(const std::string&)>;

/// Executes cfg.mode and writes manifest.json, records.csv, logs.jsonl and fields/ under cfg.out_dir.
RunResult run(const RunConfig& cfg, const LineSink& console = {});

// ---- artifacts ----

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string eigenpair_json(const EigenPair& pair, const std::string& op_name, const std::string& profile_file,
                           const std::string& profile_hash);
std::string certificate_json(const BarrierCertificate& cert, const std::array<std::string, 2>& profile_hashes,
                             const std::optional<BarrierRunReport>& run);

}  // namespace fnpar::harness
