#pragma once

// Node-parallel stencil kernels. Every kernel has a serial counterpart in kernels::reference that
// goes through the checked per-node API (hessian_at, gradient_upwind_at, EllipticOperator::eval);
// the two produce bitwise-identical output and the tests hold them to that.

#include <span>

#include "fnpar/grid.hpp"
#include "fnpar/operators.hpp"

namespace fnpar::kernels {

/// Right-hand side terms of one explicit step
///   out = f + dt * ( -F(D^2 f) + drift_scale * y.Df - decay * f + source_scale * |s|^{power-1} s )
/// evaluated on interior nodes; boundary nodes are zeroed (dirichlet-zero) or copied (frozen).
struct StepTerms {
    double dt = 0.0;
    double drift_scale = 0.0;
    /// > 0 selects hybrid drift differencing (centered where |drift| h <= 2 * this diffusion floor);
    /// 0 keeps pure upwinding.
    double drift_centered_diffusion = 0.0;
    double decay = 0.0;
    const GridField* source = nullptr;
    double source_power = 1.0;
    double source_scale = 1.0;
};

/// sign(u) |u|^p
double signed_power(double u, double p);

void explicit_step(const EllipticOperator& op, const GridField& f, const StepTerms& terms, GridField& out);

/// out[k] = F(D^2 f)(k) on interior nodes, 0 on the boundary layer.
void operator_field(const EllipticOperator& op, const GridField& f, std::span<double> out);

double max_abs(std::span<const double> values);
/// max(a - b) over all entries (may be negative).
double max_difference(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> values);

namespace reference {

void explicit_step(const EllipticOperator& op, const GridField& f, const StepTerms& terms, GridField& out);
void operator_field(const EllipticOperator& op, const GridField& f, std::span<double> out);
double max_abs(std::span<const double> values);

}  // namespace reference

}  // namespace fnpar::kernels
