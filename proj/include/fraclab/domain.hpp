#pragma once

// Computational domain: tensor grids on an interval or an axis-aligned
// rectangle, the Dirichlet/Neumann labelling of boundary nodes, the
// distance to the boundary, and nodal scalar fields with trapezoid quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fraclab/error.hpp"

namespace fraclab {

using Point = std::array<double, 2>;

enum class DomainKind { interval, rectangle };

struct DomainSpec {
    DomainKind kind = DomainKind::interval;
    std::array<double, 2> extents{1.0, 1.0};
    std::array<int, 2> resolution{5, 5};

    [[nodiscard]] int dim() const { return kind == DomainKind::interval ? 1 : 2; }

    static DomainSpec interval(double length, int nodes) {
        return {DomainKind::interval, {length, 1.0}, {nodes, 1}};
    }
    static DomainSpec rectangle(double lx, double ly, int nx, int ny) {
        return {DomainKind::rectangle, {lx, ly}, {nx, ny}};
    }
};

enum class Face { left, right, bottom, top };

inline std::string_view face_name(Face f) {
    switch (f) {
        case Face::left: return "left";
        case Face::right: return "right";
        case Face::bottom: return "bottom";
        case Face::top: return "top";
    }
    return "?";
}

inline Face parse_face(std::string_view name) {
    if (name == "left") return Face::left;
    if (name == "right") return Face::right;
    if (name == "bottom") return Face::bottom;
    if (name == "top") return Face::top;
    throw ConfigError("unknown boundary face '" + std::string(name) + "' (expected left|right|bottom|top)");
}

/// Closed arclength sub-interval [begin, end] of a face, as fractions of its length.
struct FaceSegment {
    Face face = Face::left;
    double begin = 0.0;
    double end = 1.0;
};

/// Parses "left", "left:0.5" (first half) or "left:0.25-0.75".
inline FaceSegment parse_face_segment(std::string_view text) {
    FaceSegment seg;
    const auto colon = text.find(':');
    seg.face = parse_face(text.substr(0, colon));
    if (colon == std::string_view::npos) return seg;

    const std::string range(text.substr(colon + 1));
    const auto dash = range.find('-');
    try {
        if (dash == std::string::npos) {
            seg.end = std::stod(range);
        } else {
            seg.begin = std::stod(range.substr(0, dash));
            seg.end = std::stod(range.substr(dash + 1));
        }
    } catch (const std::exception&) {
        throw ConfigError("malformed face fraction in '" + std::string(text) + "'");
    }
    if (!(seg.begin >= 0.0 && seg.end <= 1.0 && seg.begin < seg.end)) {
        throw ConfigError("face fraction must satisfy 0 <= begin < end <= 1 in '" + std::string(text) + "'");
    }
    return seg;
}

/// Tensor-product grid with uniform spacing per axis. Node (i, j) has flat
/// index i + nx * j; in 1D j is always 0.
class Grid {
public:
    explicit Grid(const DomainSpec& spec) : spec_(spec) {
        const int d = spec.dim();
        for (int a = 0; a < d; ++a) {
            if (!(spec.extents[a] > 0.0) || !std::isfinite(spec.extents[a])) {
                throw ConfigError("domain extents must be strictly positive");
            }
            if (spec.resolution[a] < 4) {
                throw ConfigError("resolution must be at least 4 nodes per axis");
            }
        }
        n_ = {spec.resolution[0], d == 2 ? spec.resolution[1] : 1};
        h_ = {spec.extents[0] / (n_[0] - 1), d == 2 ? spec.extents[1] / (n_[1] - 1) : 1.0};

        axis_weights_[0] = trapezoid(n_[0], h_[0]);
        axis_weights_[1] = d == 2 ? trapezoid(n_[1], h_[1]) : Eigen::VectorXd::Ones(1);

        weights_.resize(size());
        for (int j = 0; j < n_[1]; ++j)
            for (int i = 0; i < n_[0]; ++i) weights_[index(i, j)] = axis_weights_[0][i] * axis_weights_[1][j];
    }

    [[nodiscard]] const DomainSpec& spec() const { return spec_; }
    [[nodiscard]] int dim() const { return spec_.dim(); }
    [[nodiscard]] int nx() const { return n_[0]; }
    [[nodiscard]] int ny() const { return n_[1]; }
    [[nodiscard]] int size() const { return n_[0] * n_[1]; }
    [[nodiscard]] double hx() const { return h_[0]; }
    [[nodiscard]] double hy() const { return h_[1]; }
    /// Smallest spacing over the active axes.
    [[nodiscard]] double h_min() const { return dim() == 2 ? std::min(h_[0], h_[1]) : h_[0]; }
    [[nodiscard]] double length(int axis) const { return spec_.extents[axis]; }

    [[nodiscard]] int index(int i, int j = 0) const { return i + n_[0] * j; }
    [[nodiscard]] int ix(int idx) const { return idx % n_[0]; }
    [[nodiscard]] int iy(int idx) const { return idx / n_[0]; }

    [[nodiscard]] Point coords(int idx) const {
        return {ix(idx) * h_[0], dim() == 2 ? iy(idx) * h_[1] : 0.0};
    }

    [[nodiscard]] const Eigen::VectorXd& quad_weights() const { return weights_; }
    /// One-dimensional trapezoid weights of an axis (axis 1 is {1} in 1D).
    [[nodiscard]] const Eigen::VectorXd& axis_weights(int axis) const { return axis_weights_[axis]; }

    [[nodiscard]] double measure() const {
        return dim() == 2 ? spec_.extents[0] * spec_.extents[1] : spec_.extents[0];
    }
    /// (N−1)-measure of ∂Ω; in 1D the counting measure of the two endpoints.
    [[nodiscard]] double boundary_measure() const {
        return dim() == 2 ? 2.0 * (spec_.extents[0] + spec_.extents[1]) : 2.0;
    }

    [[nodiscard]] bool on_face(int idx, Face f) const {
        switch (f) {
            case Face::left: return ix(idx) == 0;
            case Face::right: return ix(idx) == n_[0] - 1;
            case Face::bottom: return dim() == 2 && iy(idx) == 0;
            case Face::top: return dim() == 2 && iy(idx) == n_[1] - 1;
        }
        return false;
    }

    [[nodiscard]] bool is_boundary(int idx) const {
        return on_face(idx, Face::left) || on_face(idx, Face::right) || on_face(idx, Face::bottom) ||
               on_face(idx, Face::top);
    }

    [[nodiscard]] bool contains(const Point& p) const {
        const double eps = 1e-12;
        if (p[0] < -eps || p[0] > length(0) + eps) return false;
        return dim() == 1 || (p[1] >= -eps && p[1] <= length(1) + eps);
    }

    /// Exact distance from a point of the closed domain to ∂Ω.
    [[nodiscard]] double distance_to_boundary(const Point& p) const {
        double d = std::min(p[0], length(0) - p[0]);
        if (dim() == 2) d = std::min({d, p[1], length(1) - p[1]});
        return std::max(d, 0.0);
    }

private:
    static Eigen::VectorXd trapezoid(int n, double h) {
        Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
        w[0] = w[n - 1] = 0.5 * h;
        return w;
    }

    DomainSpec spec_;
    std::array<int, 2> n_{};
    std::array<double, 2> h_{};
    std::array<Eigen::VectorXd, 2> axis_weights_;
    Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr build_grid(const DomainSpec& spec) { return std::make_shared<const Grid>(spec); }

enum class NodeLabel : unsigned char { interior, dirichlet, neumann };

/// Labelling of boundary nodes into Σ_D and Σ_N. Nodes on the interface
/// between the two sets (segment endpoints, shared corners) are Dirichlet.
class BoundaryPartition {
public:
    BoundaryPartition(GridPtr grid, std::vector<FaceSegment> segments)
        : grid_(std::move(grid)), segments_(std::move(segments)) {
        if (segments_.empty()) {
            throw ConfigError("Dirichlet selection must be nonempty: Σ_D needs positive measure");
        }
        const Grid& g = *grid_;
        for (const auto& seg : segments_) {
            if (g.dim() == 1) {
                if (seg.face != Face::left && seg.face != Face::right)
                    throw ConfigError("interval domains only have left/right boundary points");
                if (seg.begin != 0.0 || seg.end != 1.0)
                    throw ConfigError("face fractions are meaningless on an interval");
            } else {
                check_alignment(seg);
            }
        }

        labels_.assign(g.size(), NodeLabel::interior);
        for (int idx = 0; idx < g.size(); ++idx) {
            if (!g.is_boundary(idx)) continue;
            labels_[idx] = selected(idx) ? NodeLabel::dirichlet : NodeLabel::neumann;
        }
        alpha_ = compute_alpha();
        if (!(alpha_ > 0.0)) throw ConfigError("Dirichlet selection has zero measure");
    }

    [[nodiscard]] const GridPtr& grid() const { return grid_; }
    [[nodiscard]] const std::vector<FaceSegment>& segments() const { return segments_; }
    [[nodiscard]] NodeLabel label(int idx) const { return labels_[idx]; }
    [[nodiscard]] const std::vector<NodeLabel>& labels() const { return labels_; }
    /// Total (N−1)-measure of Σ_D.
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] bool pure_dirichlet() const {
        return std::abs(alpha_ - grid_->boundary_measure()) <= 1e-12 * grid_->boundary_measure();
    }

    [[nodiscard]] int count(NodeLabel l) const {
        return static_cast<int>(std::count(labels_.begin(), labels_.end(), l));
    }

    /// Human-readable selection, e.g. "left:0-0.5,top".
    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        for (std::size_t k = 0; k < segments_.size(); ++k) {
            if (k) os << ',';
            os << face_name(segments_[k].face);
            if (segments_[k].begin != 0.0 || segments_[k].end != 1.0)
                os << ':' << segments_[k].begin << '-' << segments_[k].end;
        }
        return os.str();
    }

private:
    [[nodiscard]] double face_length(Face f) const {
        return (f == Face::left || f == Face::right) ? grid_->length(1) : grid_->length(0);
    }
    [[nodiscard]] double face_spacing(Face f) const {
        return (f == Face::left || f == Face::right) ? grid_->hy() : grid_->hx();
    }
    [[nodiscard]] double arclength(int idx, Face f) const {
        const Point p = grid_->coords(idx);
        return (f == Face::left || f == Face::right) ? p[1] : p[0];
    }

    void check_alignment(const FaceSegment& seg) const {
        const double len = face_length(seg.face);
        const double h = face_spacing(seg.face);
        for (double t : {seg.begin * len, seg.end * len}) {
            const double k = t / h;
            if (std::abs(k - std::round(k)) > 1e-9) {
                throw ConfigError("face fraction endpoints must fall on grid nodes (" +
                                  std::string(face_name(seg.face)) + ")");
            }
        }
    }

    [[nodiscard]] bool selected(int idx) const {
        for (const auto& seg : segments_) {
            if (!grid_->on_face(idx, seg.face)) continue;
            if (grid_->dim() == 1) return true;
            const double len = face_length(seg.face);
            const double t = arclength(idx, seg.face);
            const double tol = 1e-9 * len;
            if (t >= seg.begin * len - tol && t <= seg.end * len + tol) return true;
        }
        return false;
    }

    [[nodiscard]] double compute_alpha() const {
        if (grid_->dim() == 1) {
            bool left = false, right = false;
            for (const auto& seg : segments_) (seg.face == Face::left ? left : right) = true;
            return static_cast<double>(left) + static_cast<double>(right);
        }
        double total = 0.0;
        for (Face f : {Face::left, Face::right, Face::bottom, Face::top}) {
            std::vector<std::pair<double, double>> iv;
            for (const auto& seg : segments_)
                if (seg.face == f) iv.emplace_back(seg.begin, seg.end);
            std::sort(iv.begin(), iv.end());
            double covered = 0.0, cur_b = -1.0, cur_e = -1.0;
            for (auto [b, e] : iv) {
                if (b > cur_e) {
                    if (cur_e > cur_b) covered += cur_e - cur_b;
                    cur_b = b;
                    cur_e = e;
                } else {
                    cur_e = std::max(cur_e, e);
                }
            }
            if (cur_e > cur_b) covered += cur_e - cur_b;
            total += covered * face_length(f);
        }
        return total;
    }

    GridPtr grid_;
    std::vector<FaceSegment> segments_;
    std::vector<NodeLabel> labels_;
    double alpha_ = 0.0;
};

inline BoundaryPartition partition_boundary(const GridPtr& grid, std::vector<FaceSegment> dirichlet) {
    return BoundaryPartition(grid, std::move(dirichlet));
}

inline BoundaryPartition partition_boundary(const GridPtr& grid, const std::vector<std::string>& dirichlet) {
    std::vector<FaceSegment> segs;
    segs.reserve(dirichlet.size());
    for (const auto& s : dirichlet) segs.push_back(parse_face_segment(s));
    return BoundaryPartition(grid, std::move(segs));
}

/// Every boundary face Dirichlet.
inline BoundaryPartition dirichlet_everywhere(const GridPtr& grid) {
    if (grid->dim() == 1) return partition_boundary(grid, {FaceSegment{Face::left}, FaceSegment{Face::right}});
    return partition_boundary(grid, {FaceSegment{Face::left}, FaceSegment{Face::right}, FaceSegment{Face::bottom},
                                     FaceSegment{Face::top}});
}

/// Nodal scalar field on a grid.
struct GridFunction {
    GridPtr grid;
    Eigen::VectorXd values;

    GridFunction() = default;
    GridFunction(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid->size()) throw PreconditionError("GridFunction: size does not match grid");
    }

    static GridFunction zeros(const GridPtr& g) { return {g, Eigen::VectorXd::Zero(g->size())}; }
    static GridFunction constant(const GridPtr& g, double c) { return {g, Eigen::VectorXd::Constant(g->size(), c)}; }

    template <class F>
    static GridFunction sample(const GridPtr& g, F&& fn) {
        Eigen::VectorXd v(g->size());
        for (int i = 0; i < g->size(); ++i) v[i] = fn(g->coords(i));
        return {g, std::move(v)};
    }

    [[nodiscard]] double operator[](int i) const { return values[i]; }

    [[nodiscard]] double integral() const { return grid->quad_weights().dot(values); }
    [[nodiscard]] double inner(const GridFunction& o) const {
        return grid->quad_weights().dot(values.cwiseProduct(o.values));
    }
    [[nodiscard]] double lp_norm(double p) const {
        return std::pow(grid->quad_weights().dot(values.cwiseAbs().array().pow(p).matrix()), 1.0 / p);
    }
    [[nodiscard]] double l2_norm() const { return std::sqrt(inner(*this)); }
    [[nodiscard]] double max_abs() const { return values.cwiseAbs().maxCoeff(); }
    [[nodiscard]] bool finite() const { return values.allFinite(); }

    friend GridFunction operator+(const GridFunction& a, const GridFunction& b) {
        return {a.grid, a.values + b.values};
    }
    friend GridFunction operator-(const GridFunction& a, const GridFunction& b) {
        return {a.grid, a.values - b.values};
    }
    friend GridFunction operator*(double t, const GridFunction& a) { return {a.grid, t * a.values}; }
};

/// Per-node distance to ∂Ω.
struct DistanceField {
    GridPtr grid;
    Eigen::VectorXd d;

    [[nodiscard]] GridFunction as_function() const { return {grid, d}; }
};

inline DistanceField distance_field(const GridPtr& grid) {
    Eigen::VectorXd d(grid->size());
    for (int i = 0; i < grid->size(); ++i) {
        d[i] = grid->is_boundary(i) ? 0.0 : grid->distance_to_boundary(grid->coords(i));
    }
    return {grid, std::move(d)};
}

inline double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

/// Smooth bump exp(1 − 1/(1 − |x−c|²/R²)) supported in B_R(c); requires the
/// ball to be compactly contained in Ω.
inline GridFunction make_bump(const GridPtr& grid, const Point& center, double radius, double amplitude = 1.0) {
    if (!(radius > 0.0)) throw PreconditionError("make_bump: radius must be positive");
    Point c = center;
    if (grid->dim() == 1) c[1] = 0.0;
    if (!grid->contains(c) || !(grid->distance_to_boundary(c) > radius)) {
        throw PreconditionError("make_bump: ball is not compactly contained in the domain");
    }
    return GridFunction::sample(grid, [&](const Point& p) {
        const double t = distance(p, c) / radius;
        if (t >= 1.0) return 0.0;
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - t * t));
    });
}

}  // namespace fraclab
