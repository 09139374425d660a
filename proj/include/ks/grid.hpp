#ifndef KS_GRID_HPP
#define KS_GRID_HPP

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ks/errors.hpp"
#include "ks/kernel.hpp"

namespace ks {

enum class DomainShape { square, disk };

inline const char* shape_name(DomainShape s) {
    return s == DomainShape::square ? "square" : "disk";
}

// Uniform N=2 lattice over the bounding box of the domain. Interior nodes are
// the lattice points strictly inside the domain at distance >= h/2 from the
// boundary; a nodal function lives on those nodes and is zero everywhere else.
// Node order is lexicographic by coordinates (x major).
class Grid {
public:
    static constexpr int dimension = 2;

    Grid(DomainShape shape, double size, int resolution)
        : shape_(shape), size_(size), resolution_(resolution) {
        require(resolution >= 3, errc::resolution_too_low, "resolution must be >= 3");
        require(size > 0.0, errc::invalid_argument, "domain size must be positive");
        box_side_ = (shape == DomainShape::square) ? size : 2.0 * size;
        h_ = box_side_ / (resolution - 1);
        lookup_.assign(static_cast<std::size_t>(resolution) * resolution, -1);
        const double half_h = 0.5 * h_;
        for (int ix = 0; ix < resolution; ++ix) {
            for (int iy = 0; iy < resolution; ++iy) {
                const double x = ix * h_, y = iy * h_;
                const double d = boundary_distance_at(x, y);
                if (d >= half_h * (1.0 - 1e-12)) {
                    lookup_[static_cast<std::size_t>(ix) * resolution + iy] =
                        static_cast<int>(nodes_.size());
                    nodes_.push_back({x, y});
                    lattice_.push_back({ix, iy});
                    dist_.push_back(d);
                }
            }
        }
        require(!nodes_.empty(), errc::resolution_too_low, "no interior nodes");
    }

    DomainShape shape() const { return shape_; }
    double size() const { return size_; }
    int resolution() const { return resolution_; }
    double h() const { return h_; }
    double box_side() const { return box_side_; }
    double cell_volume() const { return h_ * h_; }
    double domain_measure() const { return static_cast<double>(node_count()) * cell_volume(); }

    std::size_t node_count() const { return nodes_.size(); }
    const std::array<double, 2>& node(std::size_t i) const { return nodes_[i]; }
    const std::array<int, 2>& lattice(std::size_t i) const { return lattice_[i]; }
    double boundary_distance(std::size_t i) const { return dist_[i]; }

    // max distance from node i to the domain boundary (radius of the smallest
    // ball around the node containing the domain)
    double max_boundary_distance(std::size_t i) const {
        const double x = nodes_[i][0], y = nodes_[i][1];
        if (shape_ == DomainShape::disk) {
            const double c = size_;
            return size_ + std::hypot(x - c, y - c);
        }
        double m = 0.0;
        for (double cx : {0.0, size_})
            for (double cy : {0.0, size_}) m = std::max(m, std::hypot(x - cx, y - cy));
        return m;
    }

    int node_at(int ix, int iy) const {
        if (ix < 0 || iy < 0 || ix >= resolution_ || iy >= resolution_) return -1;
        return lookup_[static_cast<std::size_t>(ix) * resolution_ + iy];
    }

    bool contains(double x, double y) const {
        if (shape_ == DomainShape::square)
            return x > 0.0 && x < size_ && y > 0.0 && y < size_;
        return std::hypot(x - size_, y - size_) < size_;
    }

    double boundary_distance_at(double x, double y) const {
        if (shape_ == DomainShape::square) {
            const double d = std::min(std::min(x, size_ - x), std::min(y, size_ - y));
            return d;
        }
        return size_ - std::hypot(x - size_, y - size_);
    }

    bool same_as(const Grid& o) const {
        return shape_ == o.shape_ && size_ == o.size_ && resolution_ == o.resolution_;
    }

    std::string describe() const {
        return std::string(shape_name(shape_)) + "(size=" + detail::fmt_g(size_) +
               ",resolution=" + std::to_string(resolution_) + ")";
    }

private:
    DomainShape shape_;
    double size_;
    int resolution_;
    double box_side_;
    double h_;
    std::vector<std::array<double, 2>> nodes_;
    std::vector<std::array<int, 2>> lattice_;
    std::vector<double> dist_;
    std::vector<int> lookup_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_domain(DomainShape shape, double size, int resolution) {
    return std::make_shared<Grid>(shape, size, resolution);
}

struct NodalFunction {
    GridPtr grid;
    Eigen::VectorXd values;

    NodalFunction() = default;
    explicit NodalFunction(GridPtr g)
        : grid(std::move(g)), values(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->node_count()))) {}
    NodalFunction(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
        require(static_cast<std::size_t>(values.size()) == grid->node_count(), errc::grid_mismatch,
                "value vector does not match grid");
    }
};

inline void require_same_grid(const NodalFunction& a, const NodalFunction& b) {
    require(a.grid && b.grid && a.grid->same_as(*b.grid), errc::grid_mismatch,
            "nodal functions live on different grids");
}

// (sum_i |u_i|^q vol)^{1/q}, the rectangle rule matching the lumped-mass
// convention used throughout.
inline double lq_norm(const NodalFunction& u, double q) {
    require(q >= 1.0, errc::invalid_argument, "q must be >= 1");
    const double vol = u.grid->cell_volume();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.values.size(); ++i)
        acc += std::pow(std::abs(u.values[i]), q);
    return std::pow(acc * vol, 1.0 / q);
}

// Smooth compactly supported bump exp(-1/(1 - |x-x0|^2/w^2)) sampled at nodes.
inline NodalFunction make_bump(const GridPtr& grid, double cx, double cy, double width) {
    NodalFunction u(grid);
    for (std::size_t i = 0; i < grid->node_count(); ++i) {
        const auto& p = grid->node(i);
        const double z2 = (std::pow(p[0] - cx, 2) + std::pow(p[1] - cy, 2)) / (width * width);
        if (z2 < 1.0) u.values[static_cast<Eigen::Index>(i)] = std::exp(-1.0 / (1.0 - z2));
    }
    return u;
}

// Distance-to-boundary profile; the deterministic default initialization of
// the solvers.
inline NodalFunction make_distance_profile(const GridPtr& grid) {
    NodalFunction u(grid);
    for (std::size_t i = 0; i < grid->node_count(); ++i)
        u.values[static_cast<Eigen::Index>(i)] = grid->boundary_distance(i);
    return u;
}

} // namespace ks

#endif
