#include "fnpar/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fnpar/error.hpp"
#include "fnpar/spectrum.hpp"

namespace fnpar {

SymMatrix::SymMatrix(int dim) : dim_(dim) {
    require(dim >= 1 && dim <= kMaxDim, ErrorKind::InvalidArgument,
            "SymMatrix dimension must be in [1, " + std::to_string(kMaxDim) + "], got " + std::to_string(dim));
}

SymMatrix::SymMatrix(int dim, std::span<const double> row_major) : SymMatrix(dim) {
    require(row_major.size() == static_cast<std::size_t>(dim * dim), ErrorKind::InvalidArgument,
            "SymMatrix expects dim*dim entries");
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            const double v = row_major[i * dim + j];
            require(std::isfinite(v), ErrorKind::InvalidArgument, "SymMatrix entries must be finite");
            require(v == row_major[j * dim + i], ErrorKind::InvalidArgument, "matrix is not symmetric");
            a_[i * kMaxDim + j] = v;
        }
    }
}

SymMatrix SymMatrix::identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.set(i, i, 1.0);
    return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix m(static_cast<int>(diag.size()));
    for (int i = 0; i < m.dim(); ++i) m.set(i, i, diag[i]);
    return m;
}

double SymMatrix::trace() const noexcept {
    double t = 0.0;
    for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
}

SymMatrix SymMatrix::operator+(const SymMatrix& other) const {
    require(other.dim_ == dim_, ErrorKind::InvalidArgument, "dimension mismatch");
    SymMatrix r(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] + other.a_[k];
    return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& other) const {
    require(other.dim_ == dim_, ErrorKind::InvalidArgument, "dimension mismatch");
    SymMatrix r(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] - other.a_[k];
    return r;
}

SymMatrix SymMatrix::operator*(double s) const {
    SymMatrix r(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] * s;
    return r;
}

namespace detail {

namespace {

// Cyclic Jacobi; the rotation pass stops once the off-diagonal Frobenius mass drops below tolerance.
void jacobi(int n, double* a, double* v) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v[i * n + j] = (i == j) ? 1.0 : 0.0;

    double frob = 0.0;
    for (int k = 0; k < n * n; ++k) frob += a[k] * a[k];
    const double tol = 1e-12 * std::max(1.0, std::sqrt(frob));

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += 2.0 * a[i * n + j] * a[i * n + j];
        if (std::sqrt(off) <= tol) return;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for (int k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

}  // namespace

Spectrum spectrum(const SymMatrix& x) {
    Spectrum s;
    s.n = x.dim();
    if (s.n == 1) {
        s.v[0] = x(0, 0);
        return s;
    }
    if (s.n == 2) {
        const double mean = 0.5 * (x(0, 0) + x(1, 1));
        const double r = std::hypot(0.5 * (x(0, 0) - x(1, 1)), x(0, 1));
        s.v[0] = mean - r;
        s.v[1] = mean + r;
        return s;
    }
    double a[16];
    double v[16];
    const int n = std::min(s.n, SymMatrix::kMaxDim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[i * n + j] = x(i, j);
    jacobi(n, a, v);
    for (int i = 0; i < n; ++i) s.v[i] = a[i * n + i];
    std::sort(s.v.begin(), s.v.begin() + n);
    return s;
}

double eval_unchecked(const EllipticOperator& op, const SymMatrix& x) {
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, op::LinearTrace>) {
                double s = 0.0;
                for (int i = 0; i < x.dim(); ++i)
                    for (int j = 0; j < x.dim(); ++j) s += k.a(i, j) * x(i, j);
                return -s;
            } else if constexpr (std::is_same_v<T, op::PucciPlus>) {
                return pucci_plus_unchecked(spectrum(x), op.lambda(), op.Lambda());
            } else if constexpr (std::is_same_v<T, op::PucciMinus>) {
                return pucci_minus_unchecked(spectrum(x), op.lambda(), op.Lambda());
            } else if constexpr (std::is_same_v<T, op::Barenblatt>) {
                const double tr = x.trace();
                return std::max(-tr / (1.0 - k.gamma), -tr / (1.0 + k.gamma));
            } else if constexpr (std::is_same_v<T, op::MinMax2d>) {
                const double tr = x.trace();
                return std::min(std::max(-tr, -2.0 * tr), -x(0, 0) - 2.0 * x(1, 1));
            } else {
                double acc = eval_unchecked(k.children.front(), x);
                for (std::size_t c = 1; c < k.children.size(); ++c) {
                    const double v = eval_unchecked(k.children[c], x);
                    acc = (k.mode == op::Combine::Max) ? std::max(acc, v) : std::min(acc, v);
                }
                return acc;
            }
        },
        op.kind());
}

}  // namespace detail

std::vector<double> sym_eigenvalues(const SymMatrix& x) {
    const detail::Spectrum s = detail::spectrum(x);
    return {s.v.begin(), s.v.begin() + s.n};
}

SymEigen sym_eigen(const SymMatrix& x) {
    const int n = std::min(x.dim(), SymMatrix::kMaxDim);
    double a[16];
    double v[16];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[i * n + j] = x(i, j);
    if (n == 1) {
        v[0] = 1.0;
    } else {
        detail::jacobi(n, a, v);
    }
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int l, int r) { return a[l * n + l] < a[r * n + r]; });

    SymEigen out;
    out.values.resize(n);
    out.vectors.resize(n * n);
    for (int k = 0; k < n; ++k) {
        out.values[k] = a[order[k] * n + order[k]];
        for (int i = 0; i < n; ++i) out.vectors[i * n + k] = v[i * n + order[k]];
    }
    return out;
}

namespace {

void check_constants(double lambda, double Lambda) {
    require(std::isfinite(lambda) && std::isfinite(Lambda) && lambda > 0.0 && lambda <= Lambda,
            ErrorKind::InvalidArgument, "ellipticity constants must satisfy 0 < lambda <= Lambda");
}

}  // namespace

double pucci_plus(const SymMatrix& x, double lambda, double Lambda) {
    check_constants(lambda, Lambda);
    return detail::pucci_plus_unchecked(detail::spectrum(x), lambda, Lambda);
}

double pucci_minus(const SymMatrix& x, double lambda, double Lambda) {
    check_constants(lambda, Lambda);
    return detail::pucci_minus_unchecked(detail::spectrum(x), lambda, Lambda);
}

EllipticOperator::EllipticOperator(Kind kind, int dim, double lambda, double Lambda)
    : kind_(std::move(kind)), dim_(dim), lambda_(lambda), Lambda_(Lambda) {
    require(dim >= 1 && dim <= SymMatrix::kMaxDim, ErrorKind::InvalidArgument, "operator dimension out of range");
    check_constants(lambda, Lambda);
}

EllipticOperator EllipticOperator::laplacian(int dim) { return linear_trace(SymMatrix::identity(dim)); }

EllipticOperator EllipticOperator::linear_trace(const SymMatrix& a) {
    const auto e = sym_eigenvalues(a);
    require(e.front() > 0.0, ErrorKind::InvalidArgument, "linear-trace coefficient must be positive definite");
    return EllipticOperator(op::LinearTrace{a}, a.dim(), e.front(), e.back());
}

EllipticOperator EllipticOperator::pucci_plus(int dim, double lambda, double Lambda) {
    return EllipticOperator(op::PucciPlus{}, dim, lambda, Lambda);
}

EllipticOperator EllipticOperator::pucci_minus(int dim, double lambda, double Lambda) {
    return EllipticOperator(op::PucciMinus{}, dim, lambda, Lambda);
}

EllipticOperator EllipticOperator::barenblatt(int dim, double gamma) {
    require(gamma > 0.0 && gamma < 1.0, ErrorKind::InvalidArgument, "barenblatt requires 0 < gamma < 1");
    return EllipticOperator(op::Barenblatt{gamma}, dim, 1.0 / (1.0 + gamma), 1.0 / (1.0 - gamma));
}

EllipticOperator EllipticOperator::minmax_2d() { return EllipticOperator(op::MinMax2d{}, 2, 1.0, 2.0); }

EllipticOperator EllipticOperator::composite(op::Combine mode, std::vector<EllipticOperator> children) {
    require(!children.empty(), ErrorKind::InvalidArgument, "composite needs at least one child");
    const int dim = children.front().dim();
    double lo = children.front().lambda();
    double hi = children.front().Lambda();
    for (const auto& c : children) {
        require(c.dim() == dim, ErrorKind::InvalidArgument, "composite children must share a dimension");
        lo = std::min(lo, c.lambda());
        hi = std::max(hi, c.Lambda());
    }
    return EllipticOperator(op::Composite{mode, std::move(children)}, dim, lo, hi);
}

bool EllipticOperator::is_linear() const {
    return std::visit(
        [&](const auto& k) -> bool {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, op::LinearTrace>) return true;
            if constexpr (std::is_same_v<T, op::PucciPlus> || std::is_same_v<T, op::PucciMinus>)
                return lambda_ == Lambda_;
            return false;
        },
        kind_);
}

bool EllipticOperator::is_convex() const {
    return std::visit(
        [&](const auto& k) -> bool {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, op::LinearTrace> || std::is_same_v<T, op::PucciPlus> ||
                          std::is_same_v<T, op::Barenblatt>)
                return true;
            if constexpr (std::is_same_v<T, op::PucciMinus>) return lambda_ == Lambda_;
            if constexpr (std::is_same_v<T, op::Composite>) {
                if (k.mode != op::Combine::Max) return false;
                return std::all_of(k.children.begin(), k.children.end(),
                                   [](const EllipticOperator& c) { return c.is_convex(); });
            }
            return false;
        },
        kind_);
}

double EllipticOperator::eval(std::span<const double> /*x*/, const SymMatrix& hessian) const {
    require(hessian.dim() == dim_, ErrorKind::InvalidArgument,
            "Hessian dimension " + std::to_string(hessian.dim()) + " does not match operator dimension " +
                std::to_string(dim_));
    return detail::eval_unchecked(*this, hessian);
}

std::string EllipticOperator::name() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, op::LinearTrace>) {
                bool identity = true;
                for (int i = 0; i < dim_; ++i)
                    for (int j = 0; j < dim_; ++j) identity = identity && k.a(i, j) == (i == j ? 1.0 : 0.0);
                if (identity) {
                    os << "laplacian";
                } else {
                    os << "linear-trace(";
                    for (int i = 0; i < dim_; ++i) os << (i ? "," : "") << k.a(i, i);
                    os << ")";
                }
            } else if constexpr (std::is_same_v<T, op::PucciPlus>) {
                os << "pucci-plus(" << lambda_ << "," << Lambda_ << ")";
            } else if constexpr (std::is_same_v<T, op::PucciMinus>) {
                os << "pucci-minus(" << lambda_ << "," << Lambda_ << ")";
            } else if constexpr (std::is_same_v<T, op::Barenblatt>) {
                os << "barenblatt(" << k.gamma << ")";
            } else if constexpr (std::is_same_v<T, op::MinMax2d>) {
                os << "minmax-2d";
            } else {
                os << (k.mode == op::Combine::Max ? "max{" : "min{");
                for (std::size_t i = 0; i < k.children.size(); ++i) os << (i ? "," : "") << k.children[i].name();
                os << "}";
            }
        },
        kind_);
    return os.str();
}

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            fail(ErrorKind::Parse, "operator parameter '" + key + "': not a number list: " + text);
        }
    }
    if (out.empty()) fail(ErrorKind::Parse, "operator parameter '" + key + "' is empty");
    return out;
}

}  // namespace

EllipticOperator parse_operator(const std::string& text, int dim) {
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    if (kind.empty()) fail(ErrorKind::Parse, "empty operator specification");

    std::vector<std::pair<std::string, std::string>> params;
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) fail(ErrorKind::Parse, "expected key=value, got '" + tok + "'");
        params.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    std::vector<bool> used(params.size(), false);
    auto get = [&](const std::string& key) -> const std::string* {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].first == key) {
                used[i] = true;
                return &params[i].second;
            }
        }
        return nullptr;
    };
    auto number = [&](const std::string& key) {
        const std::string* v = get(key);
        if (!v) fail(ErrorKind::Parse, "operator '" + kind + "' requires parameter '" + key + "'");
        return parse_list(*v, key).front();
    };

    auto build = [&]() -> EllipticOperator {
        try {
            if (kind == "laplacian") return EllipticOperator::laplacian(dim);
            if (kind == "linear-trace") {
                const std::string* d = get("diag");
                if (!d) return EllipticOperator::laplacian(dim);
                const auto diag = parse_list(*d, "diag");
                if (static_cast<int>(diag.size()) != dim)
                    fail(ErrorKind::Parse, "linear-trace diag needs " + std::to_string(dim) + " entries");
                return EllipticOperator::linear_trace(SymMatrix::diagonal(diag));
            }
            if (kind == "pucci-plus") return EllipticOperator::pucci_plus(dim, number("lambda"), number("Lambda"));
            if (kind == "pucci-minus") return EllipticOperator::pucci_minus(dim, number("lambda"), number("Lambda"));
            if (kind == "barenblatt") return EllipticOperator::barenblatt(dim, number("gamma"));
            if (kind == "minmax-2d") {
                if (dim != 2) fail(ErrorKind::InvalidArgument, "minmax-2d is only defined for N = 2");
                return EllipticOperator::minmax_2d();
            }
            if (kind == "composite") {
                const std::string* mode = get("mode");
                const std::string* traces = get("traces");
                if (!mode || !traces) fail(ErrorKind::Parse, "composite requires mode=max|min and traces=c1,c2,...");
                if (*mode != "max" && *mode != "min") fail(ErrorKind::Parse, "composite mode must be max or min");
                std::vector<EllipticOperator> children;
                for (double c : parse_list(*traces, "traces")) {
                    children.push_back(EllipticOperator::linear_trace(SymMatrix::identity(dim) * c));
                }
                return EllipticOperator::composite(*mode == "max" ? op::Combine::Max : op::Combine::Min,
                                                   std::move(children));
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Parse) throw;
            fail(ErrorKind::Parse, "operator '" + text + "': " + e.what());
        }
        fail(ErrorKind::Parse, "unknown operator kind '" + kind + "'");
    };
    EllipticOperator result = build();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!used[i]) fail(ErrorKind::Parse, "operator '" + kind + "' does not take parameter '" + params[i].first + "'");
    }
    return result;
}

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::StepRejected: return "step-rejected";
        case ErrorKind::InvalidState: return "invalid-state";
        case ErrorKind::FixedPointDiverged: return "fixed-point-diverged";
        case ErrorKind::DegenerateRatio: return "degenerate-ratio";
        case ErrorKind::DegenerateProfile: return "degenerate-profile";
        case ErrorKind::Coverage: return "coverage";
        case ErrorKind::CertificateContradiction: return "certificate-contradiction";
        case ErrorKind::Unsupported: return "unsupported";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::Io: return "io-error";
    }
    return "error";
}

}  // namespace fnpar
