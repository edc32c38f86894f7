#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fnpar/error.hpp"
#include "fnpar/harness.hpp"

namespace fnpar::harness {

namespace pt = boost::property_tree;

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Evolve: return "evolve";
        case Mode::Eigen: return "eigen";
        case Mode::Certify: return "certify";
        case Mode::Sweep: return "sweep";
        case Mode::Selfcheck: return "selfcheck";
    }
    return "unknown";
}

Mode parse_mode(const std::string& text) {
    if (text == "evolve") return Mode::Evolve;
    if (text == "eigen") return Mode::Eigen;
    if (text == "certify") return Mode::Certify;
    if (text == "sweep") return Mode::Sweep;
    if (text == "selfcheck") return Mode::Selfcheck;
    fail(ErrorKind::Parse, "mode: unknown mode '" + text + "' (expected evolve|eigen|certify|sweep|selfcheck)");
}

std::vector<double> SweepRange::values() const {
    std::vector<double> v;
    if (steps == 1) return {min};
    for (int i = 0; i < steps; ++i) v.push_back(min + (max - min) * i / (steps - 1));
    return v;
}

EllipticOperator RunConfig::op1() const { return parse_operator(op1_spec, dim); }
EllipticOperator RunConfig::op2() const { return parse_operator(op2_spec, dim); }

PowerIterationOptions RunConfig::power_options() const {
    PowerIterationOptions o;
    o.tol = eigen.tol;
    o.max_tau = eigen.max_tau;
    o.renorm_interval = eigen.renorm_interval;
    o.min_tau = eigen.min_tau;
    o.cfl_safety = eigen.cfl_safety;
    return o;
}

BarrierOptions RunConfig::barrier_options() const {
    BarrierOptions o;
    o.exponent_margin = certify.exponent_margin;
    o.epsilon_safety = certify.epsilon_safety;
    o.residual_tol = certify.residual_tol;
    return o;
}

namespace {

// Accepted keys per section; "" is the top level.
const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"", {"mode", "seed", "out", "workers"}},
        {"operators", {"dim", "op1", "op2"}},
        {"grid", {"radius", "points", "spacing"}},
        {"exponents", {"p", "q"}},
        {"sweep", {"p_min", "p_max", "p_steps", "q_min", "q_max", "q_steps"}},
        {"initial", {"kind", "amplitude", "amplitude2", "width", "file1", "file2"}},
        {"control", {"cfl_safety", "dt_cap", "blowup_threshold", "t_end", "snapshot_stride", "csv_fields"}},
        {"eigen", {"tol", "max_tau", "renorm_interval", "min_tau", "cfl_safety"}},
        {"certify", {"T_long", "exponent_margin", "epsilon_safety", "residual_tol", "enabled"}},
    };
    return s;
}

[[noreturn]] void field_error(const std::string& path, const std::string& msg) {
    fail(ErrorKind::Parse, path + ": " + msg);
}

class Reader {
public:
    explicit Reader(const pt::ptree& root) : root_(root) {}

    std::optional<std::string> raw(const std::string& path) const {
        const auto v = root_.get_optional<std::string>(pt::ptree::path_type(path, '.'));
        if (!v) return std::nullopt;
        return *v;
    }

    double number(const std::string& path, double fallback) const {
        const auto s = raw(path);
        if (!s) return fallback;
        double v = 0.0;
        const auto* end = s->data() + s->size();
        const auto [ptr, ec] = std::from_chars(s->data(), end, v);
        if (ec != std::errc() || ptr != end || !std::isfinite(v)) field_error(path, "expected a finite number, got '" + *s + "'");
        return v;
    }

    long long integer(const std::string& path, long long fallback) const {
        const auto s = raw(path);
        if (!s) return fallback;
        long long v = 0;
        const auto* end = s->data() + s->size();
        const auto [ptr, ec] = std::from_chars(s->data(), end, v);
        if (ec != std::errc() || ptr != end) field_error(path, "expected an integer, got '" + *s + "'");
        return v;
    }

    bool boolean(const std::string& path, bool fallback) const {
        const auto s = raw(path);
        if (!s) return fallback;
        if (*s == "true" || *s == "1" || *s == "yes") return true;
        if (*s == "false" || *s == "0" || *s == "no") return false;
        field_error(path, "expected true|false, got '" + *s + "'");
    }

private:
    const pt::ptree& root_;
};

void check_schema(const pt::ptree& root, std::map<std::string, std::string>& echo) {
    const auto& s = schema();
    for (const auto& [key, node] : root) {
        if (node.empty()) {
            if (!s.at("").count(key)) field_error(key, "unknown key");
            echo[key] = node.data();
            continue;
        }
        const auto sec = s.find(key);
        if (sec == s.end() || key.empty()) field_error(key, "unknown section");
        for (const auto& [k, leaf] : node) {
            if (!sec->second.count(k)) field_error(key + "." + k, "unknown key");
            echo[key + "." + k] = leaf.data();
        }
    }
}

SweepRange read_range(const Reader& r, const std::string& axis) {
    SweepRange range;
    const std::string base = "sweep." + axis;
    range.min = r.number(base + "_min", 0.0);
    range.max = r.number(base + "_max", range.min);
    const long long steps = r.integer(base + "_steps", 1);
    if (steps < 1 || steps > 1000) field_error(base + "_steps", "must lie in [1, 1000]");
    range.steps = static_cast<int>(steps);
    if (range.min < 1.0) field_error(base + "_min", "exponents must be >= 1");
    if (range.max < range.min) field_error(base + "_max", "must be >= " + base + "_min");
    return range;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorKind::Parse, "line " + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig c;
    check_schema(root, c.echo);
    const Reader r(root);

    if (auto m = r.raw("mode")) c.mode = parse_mode(*m);
    const long long seed = r.integer("seed", 0);
    if (seed < 0) field_error("seed", "must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
    if (auto o = r.raw("out")) c.out_dir = *o;
    const long long workers = r.integer("workers", 0);
    if (workers < 0 || workers > 1024) field_error("workers", "must lie in [0, 1024]");
    c.workers = static_cast<int>(workers);

    const long long dim = r.integer("operators.dim", 1);
    if (dim < 1 || dim > Grid::kMaxDim) field_error("operators.dim", "must lie in [1, 3]");
    c.dim = static_cast<int>(dim);
    if (auto s = r.raw("operators.op1")) c.op1_spec = *s;
    if (auto s = r.raw("operators.op2")) c.op2_spec = *s;
    for (const auto& [key, spec] : {std::pair{"operators.op1", &c.op1_spec}, std::pair{"operators.op2", &c.op2_spec}}) {
        try {
            (void)parse_operator(*spec, c.dim);
        } catch (const Error& e) {
            field_error(key, e.what());
        }
    }

    c.radius = r.number("grid.radius", c.radius);
    if (!(c.radius > 0.0)) field_error("grid.radius", "must be positive");
    if (r.raw("grid.spacing") && r.raw("grid.points")) field_error("grid.spacing", "give either points or spacing");
    if (r.raw("grid.spacing")) {
        const double h = r.number("grid.spacing", 0.0);
        if (!(h > 0.0)) field_error("grid.spacing", "must be positive");
        try {
            c.points = Grid::with_spacing(c.dim, c.radius, h).points();
        } catch (const Error& e) {
            field_error("grid.spacing", e.what());
        }
    } else {
        const long long m = r.integer("grid.points", c.points);
        if (m < 3 || m % 2 == 0 || m > 1'000'001) field_error("grid.points", "must be an odd integer >= 3");
        c.points = static_cast<int>(m);
    }
    try {
        (void)c.grid();
    } catch (const Error& e) {
        field_error("grid", e.what());
    }

    c.p = r.number("exponents.p", c.p);
    c.q = r.number("exponents.q", c.q);
    if (c.p < 1.0) field_error("exponents.p", "must be >= 1 (got " + *r.raw("exponents.p") + ")");
    if (c.q < 1.0) field_error("exponents.q", "must be >= 1 (got " + *r.raw("exponents.q") + ")");
    const bool coupled_mode = c.mode == Mode::Evolve || c.mode == Mode::Certify;
    if (coupled_mode && !(c.p * c.q > 1.0)) field_error("exponents", "coupled modes need pq > 1");
    if (root.get_child_optional("sweep")) {
        c.sweep_p = read_range(r, "p");
        c.sweep_q = read_range(r, "q");
    }
    if (c.mode == Mode::Sweep && !c.sweep_p) {
        c.sweep_p = SweepRange{c.p, c.p, 1};
        c.sweep_q = SweepRange{c.q, c.q, 1};
    }

    if (auto k = r.raw("initial.kind")) {
        if (*k == "gaussian") c.initial.kind = InitialKind::Gaussian;
        else if (*k == "barrier") c.initial.kind = InitialKind::Barrier;
        else if (*k == "file") c.initial.kind = InitialKind::File;
        else field_error("initial.kind", "expected gaussian|barrier|file, got '" + *k + "'");
    }
    c.initial.amplitude = r.number("initial.amplitude", c.initial.amplitude);
    c.initial.amplitude2 = r.number("initial.amplitude2", c.initial.amplitude);
    c.initial.width = r.number("initial.width", c.initial.width);
    if (!(c.initial.width > 0.0)) field_error("initial.width", "must be positive");
    if (auto f = r.raw("initial.file1")) c.initial.file1 = *f;
    if (auto f = r.raw("initial.file2")) c.initial.file2 = *f;
    if (c.initial.kind == InitialKind::File && (c.initial.file1.empty() || c.initial.file2.empty())) {
        field_error("initial.file1", "file initial data needs file1 and file2");
    }

    c.control.cfl_safety = r.number("control.cfl_safety", c.control.cfl_safety);
    if (!(c.control.cfl_safety > 0.0)) field_error("control.cfl_safety", "must be positive");
    if (r.raw("control.dt_cap")) {
        c.control.dt_cap = r.number("control.dt_cap", 0.0);
        if (!(*c.control.dt_cap > 0.0)) field_error("control.dt_cap", "must be positive");
    }
    c.control.blowup_threshold = r.number("control.blowup_threshold", c.control.blowup_threshold);
    if (!(c.control.blowup_threshold > 0.0)) field_error("control.blowup_threshold", "must be positive");
    c.control.t_end = r.number("control.t_end", c.control.t_end);
    if (!(c.control.t_end > 0.0)) field_error("control.t_end", "must be positive");
    const long long stride = r.integer("control.snapshot_stride", 0);
    if (stride < 0) field_error("control.snapshot_stride", "must be nonnegative");
    c.snapshot_stride = static_cast<std::size_t>(stride);
    c.write_csv_fields = r.boolean("control.csv_fields", c.write_csv_fields);

    c.eigen.tol = r.number("eigen.tol", c.eigen.tol);
    c.eigen.max_tau = r.number("eigen.max_tau", c.eigen.max_tau);
    c.eigen.renorm_interval = r.number("eigen.renorm_interval", c.eigen.renorm_interval);
    c.eigen.min_tau = r.number("eigen.min_tau", c.eigen.min_tau);
    c.eigen.cfl_safety = r.number("eigen.cfl_safety", c.eigen.cfl_safety);
    for (const char* key : {"eigen.tol", "eigen.max_tau", "eigen.renorm_interval", "eigen.cfl_safety"}) {
        if (!(r.number(key, 1.0) > 0.0)) field_error(key, "must be positive");
    }
    if (c.eigen.cfl_safety > 1.0) field_error("eigen.cfl_safety", "must not exceed 1");

    c.certify.T_long = r.number("certify.T_long", c.certify.T_long);
    c.certify.exponent_margin = r.number("certify.exponent_margin", c.certify.exponent_margin);
    c.certify.epsilon_safety = r.number("certify.epsilon_safety", c.certify.epsilon_safety);
    c.certify.residual_tol = r.number("certify.residual_tol", c.certify.residual_tol);
    c.certify.enabled = r.boolean("certify.enabled", c.certify.enabled);
    if (!(c.certify.T_long > 0.0)) field_error("certify.T_long", "must be positive");
    if (c.certify.exponent_margin < 0.0) field_error("certify.exponent_margin", "must be nonnegative");
    if (!(c.certify.epsilon_safety > 0.0 && c.certify.epsilon_safety <= 1.0)) {
        field_error("certify.epsilon_safety", "must lie in (0, 1]");
    }
    if (!(c.certify.residual_tol >= 0.0)) field_error("certify.residual_tol", "must be nonnegative");
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace fnpar::harness
