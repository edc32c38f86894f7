#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fnpar {

/// Real symmetric N x N matrix, N <= kMaxDim, stored densely in place.
class SymMatrix {
public:
    static constexpr int kMaxDim = 4;

    explicit SymMatrix(int dim);
    /// Row-major entries; throws InvalidArgument when not exactly symmetric.
    SymMatrix(int dim, std::span<const double> row_major);

    static SymMatrix identity(int dim);
    static SymMatrix diagonal(std::span<const double> diag);

    int dim() const noexcept { return dim_; }
    double operator()(int i, int j) const noexcept { return a_[i * kMaxDim + j]; }
    /// Writes both (i,j) and (j,i).
    void set(int i, int j, double value) noexcept {
        a_[i * kMaxDim + j] = value;
        a_[j * kMaxDim + i] = value;
    }

    double trace() const noexcept;
    SymMatrix operator+(const SymMatrix& other) const;
    SymMatrix operator-(const SymMatrix& other) const;
    SymMatrix operator*(double s) const;
    SymMatrix operator-() const { return *this * -1.0; }

private:
    int dim_;
    std::array<double, kMaxDim * kMaxDim> a_{};
};

struct SymEigen {
    std::vector<double> values;   // nondecreasing
    std::vector<double> vectors;  // column k is the eigenvector for values[k], row-major dim x dim
};

/// Eigenvalues in nondecreasing order. Closed form for N <= 2, cyclic Jacobi otherwise.
std::vector<double> sym_eigenvalues(const SymMatrix& x);
SymEigen sym_eigen(const SymMatrix& x);

/// max{ tr[-A X] : lambda I <= A <= Lambda I }
double pucci_plus(const SymMatrix& x, double lambda, double Lambda);
/// min{ tr[-A X] : lambda I <= A <= Lambda I }
double pucci_minus(const SymMatrix& x, double lambda, double Lambda);

namespace op {

struct LinearTrace {
    SymMatrix a;  // symmetric positive definite coefficient
};
struct PucciPlus {};
struct PucciMinus {};
struct Barenblatt {
    double gamma;
};
struct MinMax2d {};

enum class Combine { Max, Min };

}  // namespace op

class EllipticOperator;

namespace op {
struct Composite {
    Combine mode;
    std::vector<EllipticOperator> children;
};
}  // namespace op

/// Uniformly elliptic, positively homogeneous F(x, X) with ellipticity constants (lambda, Lambda).
///
/// Sign convention follows the parabolic form u_t + F(D^2 u) = 0, so the Laplacian is F(X) = -tr X.
/// All shipped kinds are x-independent; the point argument is kept in the signature.
class EllipticOperator {
public:
    using Kind = std::variant<op::LinearTrace, op::PucciPlus, op::PucciMinus, op::Barenblatt, op::MinMax2d,
                              op::Composite>;

    static EllipticOperator laplacian(int dim);
    static EllipticOperator linear_trace(const SymMatrix& a);
    static EllipticOperator pucci_plus(int dim, double lambda, double Lambda);
    static EllipticOperator pucci_minus(int dim, double lambda, double Lambda);
    static EllipticOperator barenblatt(int dim, double gamma);
    static EllipticOperator minmax_2d();
    static EllipticOperator composite(op::Combine mode, std::vector<EllipticOperator> children);

    int dim() const noexcept { return dim_; }
    double lambda() const noexcept { return lambda_; }
    double Lambda() const noexcept { return Lambda_; }
    bool x_dependent() const noexcept { return false; }
    const Kind& kind() const noexcept { return kind_; }

    /// Convex in X (pucci-plus, barenblatt, linear kinds and max-composites of convex children).
    bool is_convex() const;
    bool is_linear() const;

    double eval(std::span<const double> x, const SymMatrix& hessian) const;
    double eval(const SymMatrix& hessian) const { return eval({}, hessian); }

    /// Short human-readable name, e.g. "pucci-minus(1,2)".
    std::string name() const;

private:
    EllipticOperator(Kind kind, int dim, double lambda, double Lambda);

    Kind kind_;
    int dim_;
    double lambda_;
    double Lambda_;
};

/// Parses "kind key=value ..." as used in run configs, e.g. "pucci-minus lambda=1 Lambda=2".
/// Accepted kinds: laplacian, linear-trace (diag=a,b,..), pucci-plus, pucci-minus, barenblatt (gamma),
/// minmax-2d, composite (mode=max|min traces=c1,c2,..: combination of linear-trace(c I)).
EllipticOperator parse_operator(const std::string& text, int dim);

}  // namespace fnpar
