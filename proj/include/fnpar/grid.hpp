#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fnpar/operators.hpp"

namespace fnpar {

/// Uniform box grid [-R, R]^N with M (odd) points per axis, so the origin is a node.
class Grid {
public:
    static constexpr int kMaxDim = 3;
    static constexpr std::size_t kMaxNodes = std::size_t{1} << 24;

    Grid(int dim, double radius, int points_per_axis);

    /// Grid with spacing as close as possible to h (M rounded up to the next odd count).
    static Grid with_spacing(int dim, double radius, double h);

    int dim() const noexcept { return dim_; }
    double radius() const noexcept { return radius_; }
    int points() const noexcept { return m_; }
    double spacing() const noexcept { return h_; }
    std::size_t size() const noexcept { return size_; }
    /// Flat-index stride of axis k (axis 0 varies slowest).
    std::size_t stride(int axis) const noexcept { return strides_[axis]; }

    std::array<int, kMaxDim> index_of(std::size_t flat) const noexcept;
    std::size_t flat(std::span<const int> index) const;
    double coord(int i) const noexcept { return -radius_ + h_ * i; }
    std::array<double, kMaxDim> point(std::size_t flat) const noexcept;
    double radius_sq(std::size_t flat) const noexcept;

    /// Interior = at least one layer away from the boundary on every axis.
    bool is_interior(std::size_t flat) const noexcept;
    std::vector<std::size_t> interior_nodes() const;

    bool operator==(const Grid& o) const noexcept { return dim_ == o.dim_ && m_ == o.m_ && radius_ == o.radius_; }
    bool operator!=(const Grid& o) const noexcept { return !(*this == o); }

private:
    int dim_;
    double radius_;
    int m_;
    double h_;
    std::size_t size_;
    std::array<std::size_t, kMaxDim> strides_{};
};

enum class Boundary { DirichletZero, Frozen };

/// Real function sampled on a Grid.
struct GridField {
    Grid grid;
    std::vector<double> values;
    Boundary boundary = Boundary::DirichletZero;

    explicit GridField(const Grid& g, Boundary b = Boundary::DirichletZero);
    GridField(const Grid& g, std::vector<double> v, Boundary b = Boundary::DirichletZero);

    template <class Fn>
    static GridField sample(const Grid& g, Fn&& fn, Boundary b = Boundary::DirichletZero) {
        GridField f(g, b);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const auto p = g.point(k);
            f.values[k] = fn(std::span<const double>(p.data(), static_cast<std::size_t>(g.dim())));
        }
        return f;
    }

    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }

    /// Zeroes the boundary layer (dirichlet-zero fields).
    void apply_dirichlet();
};

/// Centered second differences plus four-point cross differences; exact on quadratics.
SymMatrix hessian_at(const GridField& f, std::span<const int> node);
SymMatrix hessian_at(const GridField& f, std::size_t flat);

/// drift . Df with one-sided differences picked per component: forward where drift_k > 0, backward
/// where drift_k < 0. With the term entering u_t on the right-hand side this is the monotone choice.
double gradient_upwind_at(const GridField& f, std::span<const int> node, std::span<const double> drift);
double gradient_upwind_at(const GridField& f, std::size_t flat, std::span<const double> drift);

/// Hybrid differencing of drift . Df: centered on axes where |drift_k| h <= 2 diffusion (the cell-Peclet
/// bound under which centered differencing keeps a diffusion of at least `diffusion` monotone), upwind
/// elsewhere. Second order where the drift is resolved.
double gradient_hybrid_at(const GridField& f, std::size_t flat, std::span<const double> drift, double diffusion);

double sup_norm(const GridField& f);
double sup_norm_diff(const GridField& f, const GridField& g);

struct RatioResult {
    double value;
    double floor;
    std::size_t nodes;  // evaluation-set size after flooring
};

/// max f/g over interior nodes with g >= floor; DegenerateRatio when that set is empty.
RatioResult sup_ratio(const GridField& f, const GridField& g, double floor = 1e-12);

/// Linear (multi-linear for N > 1) interpolation; points outside the box return NaN.
double interpolate(const GridField& f, std::span<const double> x);

// Serialization. CSV: header "x1[,x2[,x3]],value", one node per row. Binary: little-endian
// uint32 dim, uint32 M, float64 R, then M^N float64 values with axis 0 slowest.
void write_csv(const GridField& f, const std::filesystem::path& path);
GridField read_csv(const std::filesystem::path& path, Boundary b = Boundary::DirichletZero);
void write_binary(const GridField& f, const std::filesystem::path& path);
std::vector<std::uint8_t> to_binary(const GridField& f);
GridField read_binary(const std::filesystem::path& path, Boundary b = Boundary::DirichletZero);
GridField from_binary(std::span<const std::uint8_t> bytes, Boundary b = Boundary::DirichletZero);

}  // namespace fnpar
