#include "fnpar/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fnpar/error.hpp"

namespace fnpar {

Grid::Grid(int dim, double radius, int points_per_axis) : dim_(dim), radius_(radius), m_(points_per_axis) {
    require(dim >= 1 && dim <= kMaxDim, ErrorKind::InvalidArgument, "grid dimension must be 1, 2 or 3");
    require(std::isfinite(radius) && radius > 0.0, ErrorKind::InvalidArgument, "grid radius must be positive");
    require(points_per_axis >= 3 && points_per_axis % 2 == 1, ErrorKind::InvalidArgument,
            "points per axis must be an odd integer >= 3, got " + std::to_string(points_per_axis));
    h_ = 2.0 * radius / (m_ - 1);
    size_ = 1;
    for (int k = 0; k < dim_; ++k) {
        require(size_ <= kMaxNodes / static_cast<std::size_t>(m_), ErrorKind::InvalidArgument,
                "grid exceeds the node budget");
        size_ *= static_cast<std::size_t>(m_);
    }
    std::size_t s = 1;
    for (int k = dim_ - 1; k >= 0; --k) {
        strides_[k] = s;
        s *= static_cast<std::size_t>(m_);
    }
}

Grid Grid::with_spacing(int dim, double radius, double h) {
    require(h > 0.0, ErrorKind::InvalidArgument, "grid spacing must be positive");
    int m = static_cast<int>(std::ceil(2.0 * radius / h - 1e-9)) + 1;
    if (m % 2 == 0) ++m;
    return Grid(dim, radius, m);
}

std::array<int, Grid::kMaxDim> Grid::index_of(std::size_t flat) const noexcept {
    std::array<int, kMaxDim> idx{};
    for (int k = 0; k < dim_; ++k) {
        idx[k] = static_cast<int>(flat / strides_[k]);
        flat %= strides_[k];
    }
    return idx;
}

std::size_t Grid::flat(std::span<const int> index) const {
    require(static_cast<int>(index.size()) == dim_, ErrorKind::InvalidArgument, "multi-index has wrong rank");
    std::size_t f = 0;
    for (int k = 0; k < dim_; ++k) {
        require(index[k] >= 0 && index[k] < m_, ErrorKind::InvalidArgument, "multi-index out of range");
        f += strides_[k] * static_cast<std::size_t>(index[k]);
    }
    return f;
}

std::array<double, Grid::kMaxDim> Grid::point(std::size_t flat) const noexcept {
    const auto idx = index_of(flat);
    std::array<double, kMaxDim> p{};
    for (int k = 0; k < dim_; ++k) p[k] = coord(idx[k]);
    return p;
}

double Grid::radius_sq(std::size_t flat) const noexcept {
    const auto p = point(flat);
    double r2 = 0.0;
    for (int k = 0; k < dim_; ++k) r2 += p[k] * p[k];
    return r2;
}

bool Grid::is_interior(std::size_t flat) const noexcept {
    const auto idx = index_of(flat);
    for (int k = 0; k < dim_; ++k) {
        if (idx[k] < 1 || idx[k] > m_ - 2) return false;
    }
    return true;
}

std::vector<std::size_t> Grid::interior_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < size_; ++k) {
        if (is_interior(k)) out.push_back(k);
    }
    return out;
}

GridField::GridField(const Grid& g, Boundary b) : grid(g), values(g.size(), 0.0), boundary(b) {}

GridField::GridField(const Grid& g, std::vector<double> v, Boundary b) : grid(g), values(std::move(v)), boundary(b) {
    require(values.size() == grid.size(), ErrorKind::InvalidArgument, "value count does not match grid size");
}

void GridField::apply_dirichlet() {
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!grid.is_interior(k)) values[k] = 0.0;
    }
}

SymMatrix hessian_at(const GridField& f, std::size_t flat) {
    const Grid& g = f.grid;
    require(flat < g.size() && g.is_interior(flat), ErrorKind::InvalidArgument, "hessian_at needs an interior node");
    const int n = g.dim();
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    const double* v = f.values.data();
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

SymMatrix hessian_at(const GridField& f, std::span<const int> node) { return hessian_at(f, f.grid.flat(node)); }

double gradient_upwind_at(const GridField& f, std::size_t flat, std::span<const double> drift) {
    const Grid& g = f.grid;
    require(flat < g.size() && g.is_interior(flat), ErrorKind::InvalidArgument,
            "gradient_upwind_at needs an interior node");
    require(static_cast<int>(drift.size()) == g.dim(), ErrorKind::InvalidArgument, "drift has wrong dimension");
    const double inv_h = 1.0 / g.spacing();
    const double* v = f.values.data();
    double acc = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
        const std::size_t s = g.stride(k);
        if (drift[k] > 0.0) {
            acc += drift[k] * (v[flat + s] - v[flat]) * inv_h;
        } else if (drift[k] < 0.0) {
            acc += drift[k] * (v[flat] - v[flat - s]) * inv_h;
        }
    }
    return acc;
}

double gradient_hybrid_at(const GridField& f, std::size_t flat, std::span<const double> drift, double diffusion) {
    const Grid& g = f.grid;
    require(flat < g.size() && g.is_interior(flat), ErrorKind::InvalidArgument,
            "gradient_hybrid_at needs an interior node");
    require(static_cast<int>(drift.size()) == g.dim(), ErrorKind::InvalidArgument, "drift has wrong dimension");
    const double h = g.spacing();
    const double inv_h = 1.0 / h;
    const double* v = f.values.data();
    double acc = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
        const std::size_t s = g.stride(k);
        if (std::abs(drift[k]) * h <= 2.0 * diffusion) {
            acc += drift[k] * (v[flat + s] - v[flat - s]) * (0.5 * inv_h);
        } else if (drift[k] > 0.0) {
            acc += drift[k] * (v[flat + s] - v[flat]) * inv_h;
        } else {
            acc += drift[k] * (v[flat] - v[flat - s]) * inv_h;
        }
    }
    return acc;
}

double gradient_upwind_at(const GridField& f, std::span<const int> node, std::span<const double> drift) {
    return gradient_upwind_at(f, f.grid.flat(node), drift);
}

double sup_norm(const GridField& f) {
    double m = 0.0;
    for (double v : f.values) {
        if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(v));
    }
    return m;
}

double sup_norm_diff(const GridField& f, const GridField& g) {
    require(f.grid == g.grid, ErrorKind::InvalidArgument, "fields live on different grids");
    double m = 0.0;
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        const double d = std::abs(f.values[k] - g.values[k]);
        if (!std::isfinite(d)) return std::numeric_limits<double>::infinity();
        m = std::max(m, d);
    }
    return m;
}

RatioResult sup_ratio(const GridField& f, const GridField& g, double floor) {
    require(f.grid == g.grid, ErrorKind::InvalidArgument, "fields live on different grids");
    require(floor > 0.0, ErrorKind::InvalidArgument, "ratio floor must be positive");
    RatioResult r{-std::numeric_limits<double>::infinity(), floor, 0};
    for (std::size_t k = 0; k < g.values.size(); ++k) {
        if (!g.grid.is_interior(k) || !(g.values[k] >= floor)) continue;
        r.value = std::max(r.value, f.values[k] / g.values[k]);
        ++r.nodes;
    }
    if (r.nodes == 0) fail(ErrorKind::DegenerateRatio, "no interior node with denominator above the floor");
    return r;
}

double interpolate(const GridField& f, std::span<const double> x) {
    const Grid& g = f.grid;
    require(static_cast<int>(x.size()) == g.dim(), ErrorKind::InvalidArgument, "point has wrong dimension");
    std::array<int, Grid::kMaxDim> base{};
    std::array<double, Grid::kMaxDim> frac{};
    for (int k = 0; k < g.dim(); ++k) {
        const double s = (x[k] + g.radius()) / g.spacing();
        if (!(s >= 0.0) || s > g.points() - 1) return std::numeric_limits<double>::quiet_NaN();
        int i = static_cast<int>(std::floor(s));
        if (i >= g.points() - 1) i = g.points() - 2;
        base[k] = i;
        frac[k] = s - i;
    }
    double acc = 0.0;
    const int corners = 1 << g.dim();
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int k = 0; k < g.dim(); ++k) {
            const int bit = (c >> k) & 1;
            w *= bit ? frac[k] : 1.0 - frac[k];
            flat += g.stride(k) * static_cast<std::size_t>(base[k] + bit);
        }
        if (w != 0.0) acc += w * f.values[flat];
    }
    return acc;
}

void write_csv(const GridField& f, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    const Grid& g = f.grid;
    for (int k = 0; k < g.dim(); ++k) out << "x" << (k + 1) << ",";
    out << "value\n";
    out << std::setprecision(17);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const auto p = g.point(n);
        for (int k = 0; k < g.dim(); ++k) out << p[k] << ",";
        out << f.values[n] << "\n";
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

GridField read_csv(const std::filesystem::path& path, Boundary b) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    const int dim = static_cast<int>(std::count(line.begin(), line.end(), ','));
    require(dim >= 1 && dim <= Grid::kMaxDim, ErrorKind::Parse, path.string() + ": bad CSV header");
    std::vector<double> first_coord;
    std::vector<double> vals;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                fail(ErrorKind::Parse, path.string() + ": non-numeric cell '" + cell + "'");
            }
        }
        require(static_cast<int>(row.size()) == dim + 1, ErrorKind::Parse, path.string() + ": ragged row");
        if (vals.empty()) first_coord.assign(row.begin(), row.end() - 1);
        vals.push_back(row.back());
    }
    const int m = static_cast<int>(std::lround(std::pow(static_cast<double>(vals.size()), 1.0 / dim)));
    std::size_t expect = 1;
    for (int k = 0; k < dim; ++k) expect *= static_cast<std::size_t>(m);
    require(expect == vals.size() && !first_coord.empty(), ErrorKind::Parse,
            path.string() + ": node count is not M^N");
    return GridField(Grid(dim, -first_coord.front(), m), std::move(vals), b);
}

namespace {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
    require(pos + sizeof(T) <= in.size(), ErrorKind::Parse, "binary field truncated");
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    pos += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

std::vector<std::uint8_t> to_binary(const GridField& f) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + 8 * f.values.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.dim()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.points()));
    put_le<double>(out, f.grid.radius());
    for (double v : f.values) put_le<double>(out, v);
    return out;
}

GridField from_binary(std::span<const std::uint8_t> bytes, Boundary b) {
    std::size_t pos = 0;
    const auto dim = get_le<std::uint32_t>(bytes, pos);
    const auto m = get_le<std::uint32_t>(bytes, pos);
    const auto r = get_le<double>(bytes, pos);
    require(dim >= 1 && dim <= Grid::kMaxDim && m >= 3 && m % 2 == 1 && m < (1u << 24), ErrorKind::Parse,
            "binary field has an invalid header");
    Grid g(static_cast<int>(dim), r, static_cast<int>(m));
    require(bytes.size() == pos + 8 * g.size(), ErrorKind::Parse, "binary field size does not match its header");
    std::vector<double> vals(g.size());
    for (auto& v : vals) v = get_le<double>(bytes, pos);
    return GridField(g, std::move(vals), b);
}

void write_binary(const GridField& f, const std::filesystem::path& path) {
    const auto bytes = to_binary(f);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

GridField read_binary(const std::filesystem::path& path, Boundary b) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_binary(bytes, b);
}

}  // namespace fnpar
