#include "fnpar/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <limits>

#include "fnpar/error.hpp"
#include "fnpar/spectrum.hpp"

namespace fnpar::kernels {

namespace {

// Below this size the thread fork costs more than the stencil sweep.
constexpr std::ptrdiff_t kParallelThreshold = 2048;

void check_step_args(const EllipticOperator& op, const GridField& f, const StepTerms& terms, const GridField& out) {
    require(op.dim() == f.grid.dim(), ErrorKind::InvalidArgument, "operator and grid dimensions differ");
    require(out.grid == f.grid, ErrorKind::InvalidArgument, "output field lives on a different grid");
    require(&out != &f, ErrorKind::InvalidArgument, "explicit_step cannot run in place");
    if (terms.source) {
        require(terms.source->grid == f.grid, ErrorKind::InvalidArgument, "source lives on a different grid");
    }
}

struct NodeView {
    bool interior;
    std::array<double, Grid::kMaxDim> y;
};

inline NodeView node_view(const Grid& g, std::size_t flat) {
    NodeView nv{true, {}};
    std::size_t rem = flat;
    for (int k = 0; k < g.dim(); ++k) {
        const int i = static_cast<int>(rem / g.stride(k));
        rem %= g.stride(k);
        nv.interior = nv.interior && i >= 1 && i <= g.points() - 2;
        nv.y[k] = g.coord(i);
    }
    return nv;
}

// Same arithmetic as hessian_at, without the bounds checks.
inline SymMatrix stencil_hessian(const Grid& g, const double* v, std::size_t flat, double inv_h2) {
    const int n = g.dim();
    SymMatrix hess(n);
    for (int j = 0; j < n; ++j) {
        const std::size_t sj = g.stride(j);
        hess.set(j, j, (v[flat + sj] - 2.0 * v[flat] + v[flat - sj]) * inv_h2);
        for (int k = j + 1; k < n; ++k) {
            const std::size_t sk = g.stride(k);
            const double cross = v[flat + sj + sk] + v[flat - sj - sk] - v[flat + sj - sk] - v[flat - sj + sk];
            hess.set(j, k, cross * 0.25 * inv_h2);
        }
    }
    return hess;
}

// Same arithmetic as gradient_upwind_at / gradient_hybrid_at with drift = scale * y.
inline double stencil_drift(const Grid& g, const double* v, std::size_t flat, const NodeView& nv, double scale,
                            double diffusion, double h, double inv_h) {
    double acc = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
        const double d = scale * nv.y[k];
        const std::size_t s = g.stride(k);
        if (diffusion > 0.0 && std::abs(d) * h <= 2.0 * diffusion) {
            acc += d * (v[flat + s] - v[flat - s]) * (0.5 * inv_h);
        } else if (d > 0.0) {
            acc += d * (v[flat + s] - v[flat]) * inv_h;
        } else if (d < 0.0) {
            acc += d * (v[flat] - v[flat - s]) * inv_h;
        }
    }
    return acc;
}

inline double assemble(double f_value, double op_value, double drift_value, std::size_t flat,
                       const StepTerms& terms) {
    double rhs = -op_value;
    if (terms.drift_scale != 0.0) rhs += drift_value;
    if (terms.decay != 0.0) rhs -= terms.decay * f_value;
    if (terms.source) rhs += terms.source_scale * signed_power(terms.source->values[flat], terms.source_power);
    return f_value + terms.dt * rhs;
}

}  // namespace

double signed_power(double u, double p) {
    if (p == 1.0) return u;
    if (p == 2.0) return u * std::abs(u);
    return std::copysign(std::pow(std::abs(u), p), u);
}

void explicit_step(const EllipticOperator& op, const GridField& f, const StepTerms& terms, GridField& out) {
    check_step_args(op, f, terms, out);
    out.boundary = f.boundary;
    const Grid& g = f.grid;
    const double* v = f.values.data();
    double* o = out.values.data();
    const double inv_h = 1.0 / g.spacing();
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    const bool frozen = f.boundary == Boundary::Frozen;
    const auto n = static_cast<std::ptrdiff_t>(g.size());

#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto flat = static_cast<std::size_t>(i);
        const NodeView nv = node_view(g, flat);
        if (!nv.interior) {
            o[flat] = frozen ? v[flat] : 0.0;
            continue;
        }
        const double fx = detail::eval_unchecked(op, stencil_hessian(g, v, flat, inv_h2));
        const double drift =
            terms.drift_scale != 0.0
                ? stencil_drift(g, v, flat, nv, terms.drift_scale, terms.drift_centered_diffusion, g.spacing(), inv_h)
                : 0.0;
        o[flat] = assemble(v[flat], fx, drift, flat, terms);
    }
}

void operator_field(const EllipticOperator& op, const GridField& f, std::span<double> out) {
    require(op.dim() == f.grid.dim(), ErrorKind::InvalidArgument, "operator and grid dimensions differ");
    require(out.size() == f.values.size(), ErrorKind::InvalidArgument, "output span has the wrong size");
    const Grid& g = f.grid;
    const double* v = f.values.data();
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    const auto n = static_cast<std::ptrdiff_t>(g.size());

#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto flat = static_cast<std::size_t>(i);
        const NodeView nv = node_view(g, flat);
        out[flat] = nv.interior ? detail::eval_unchecked(op, stencil_hessian(g, v, flat, inv_h2)) : 0.0;
    }
}

double max_abs(std::span<const double> values) {
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    double m = 0.0;
    bool finite = true;
#pragma omp parallel for schedule(static) reduction(max : m) reduction(&& : finite) if (n > kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double a = std::abs(values[i]);
        finite = finite && std::isfinite(a);
        m = std::max(m, a);
    }
    return finite ? m : std::numeric_limits<double>::infinity();
}

double max_difference(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::InvalidArgument, "max_difference needs equal lengths");
    const auto n = static_cast<std::ptrdiff_t>(a.size());
    double m = -std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(max : m) if (n > kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < n; ++i) m = std::max(m, a[i] - b[i]);
    return m;
}

bool all_finite(std::span<const double> values) {
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    bool finite = true;
#pragma omp parallel for schedule(static) reduction(&& : finite) if (n > kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < n; ++i) finite = finite && std::isfinite(values[i]);
    return finite;
}

namespace reference {

void explicit_step(const EllipticOperator& op, const GridField& f, const StepTerms& terms, GridField& out) {
    check_step_args(op, f, terms, out);
    out.boundary = f.boundary;
    const Grid& g = f.grid;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.is_interior(k)) {
            out.values[k] = f.boundary == Boundary::Frozen ? f.values[k] : 0.0;
            continue;
        }
        const auto p = g.point(k);
        const std::span<const double> x(p.data(), static_cast<std::size_t>(g.dim()));
        const double fx = op.eval(x, hessian_at(f, k));
        double drift = 0.0;
        if (terms.drift_scale != 0.0) {
            std::array<double, Grid::kMaxDim> d{};
            for (int j = 0; j < g.dim(); ++j) d[j] = terms.drift_scale * p[j];
            const std::span<const double> ds(d.data(), x.size());
            drift = terms.drift_centered_diffusion > 0.0 ? gradient_hybrid_at(f, k, ds, terms.drift_centered_diffusion)
                                                         : gradient_upwind_at(f, k, ds);
        }
        out.values[k] = assemble(f.values[k], fx, drift, k, terms);
    }
}

void operator_field(const EllipticOperator& op, const GridField& f, std::span<double> out) {
    require(out.size() == f.values.size(), ErrorKind::InvalidArgument, "output span has the wrong size");
    const Grid& g = f.grid;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.is_interior(k)) {
            out[k] = 0.0;
            continue;
        }
        const auto p = g.point(k);
        out[k] = op.eval(std::span<const double>(p.data(), static_cast<std::size_t>(g.dim())), hessian_at(f, k));
    }
}

double max_abs(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(v));
    }
    return m;
}

}  // namespace reference

}  // namespace fnpar::kernels
