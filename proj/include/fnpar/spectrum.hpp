#pragma once

// Allocation-free helpers shared by the operator evaluation and the stencil kernels.

#include <algorithm>
#include <array>

#include "fnpar/operators.hpp"

namespace fnpar::detail {

struct Spectrum {
    std::array<double, SymMatrix::kMaxDim> v{};
    int n = 0;
};

Spectrum spectrum(const SymMatrix& x);

inline double pucci_plus_unchecked(const Spectrum& s, double lambda, double Lambda) {
    double pos = 0.0;
    double neg = 0.0;
    for (int k = 0; k < s.n; ++k) {
        pos += std::max(s.v[k], 0.0);
        neg += std::max(-s.v[k], 0.0);
    }
    return -lambda * pos + Lambda * neg;
}

inline double pucci_minus_unchecked(const Spectrum& s, double lambda, double Lambda) {
    double pos = 0.0;
    double neg = 0.0;
    for (int k = 0; k < s.n; ++k) {
        pos += std::max(s.v[k], 0.0);
        neg += std::max(-s.v[k], 0.0);
    }
    return -Lambda * pos + lambda * neg;
}

/// F(X) without the dimension check; callers guarantee X.dim() == op.dim().
double eval_unchecked(const EllipticOperator& op, const SymMatrix& x);

}  // namespace fnpar::detail
