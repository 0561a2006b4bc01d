#pragma once

#include "ugibbs/common.hpp"

#include "json.hpp"

#include <optional>

namespace ugibbs {

struct ToralAutomorphism {
    IMat matrix;
    int det_sign = 1;
    Mat unstable_basis;  // columns, unit length
    Mat stable_basis;
    Vec unstable_rates;  // |eigenvalue| per unstable column, descending
    Vec stable_rates;    // ascending
    Vec unstable_eigenvalues;  // signed, real case only
    Vec stable_eigenvalues;
    double base_entropy = 0.0;

    int dim() const { return static_cast<int>(matrix.rows()); }
    int unstable_dim() const { return static_cast<int>(unstable_basis.cols()); }
    Mat real_matrix() const { return matrix.cast<double>(); }
    // Columns [unstable | stable].
    Mat eigen_frame() const;
    Vec apply(const Vec& x) const;  // A x mod 1
};

ToralAutomorphism hyperbolic_split(const IMat& matrix);

struct PlaqueSpan {
    int cell = -1;
    double below = 0.0;  // leaf distance back to the plaque start
    double above = 0.0;  // leaf distance forward to the plaque end
    double length() const { return below + above; }
};

struct BoundarySegment {
    Eigen::Vector2d from;  // eigen-coordinates (u, s)
    Eigen::Vector2d to;
};

struct MarkovCheckReport {
    bool ok = true;
    double worst_unstable_cover = 0.0;  // positive means a gap
    double worst_stable_escape = 0.0;
    double worst_boundary_s = 0.0;
    double worst_boundary_u = 0.0;
    std::size_t samples = 0;
};

// Cells of the factor. Circle and Torus2 carry true Markov partitions; BoxCover is the
// itinerary box cover used on T^3.
class MarkovStructure {
public:
    enum class Kind { Circle, Torus2, BoxCover };

    static MarkovStructure circle(int degree);
    static MarkovStructure torus2(const ToralAutomorphism& a);
    static MarkovStructure box_cover(const ToralAutomorphism& a, int per_axis);

    Kind kind() const { return kind_; }
    bool is_markov() const { return kind_ != Kind::BoxCover; }
    int base_dim() const { return base_dim_; }
    int cell_count() const { return cell_count_; }
    const IMat& transition() const { return transition_; }
    double expansion() const { return expansion_; }
    double base_entropy() const { return base_entropy_; }
    // Unstable plaque lengths per cell (unstable-coordinate units).
    const Vec& plaque_lengths() const { return plaque_lengths_; }
    double pf_eigenvalue() const;
    const Vec& unstable_direction() const { return udir_; }

    // Unstable coordinate of a small base displacement.
    double unstable_coordinate(const Vec& displacement) const;
    Vec stable_coordinates(const Vec& displacement) const;
    // Base displacement for a move of dt along the unstable direction.
    Vec unstable_step(double dt) const { return udir_ * dt; }
    Vec wrap(const Vec& base) const;
    Vec displacement(const Vec& from, const Vec& to) const;  // wrapped to [-1/2,1/2)

    int locate(const Vec& base) const;
    PlaqueSpan unstable_span(const Vec& base) const;
    PlaqueSpan stable_span(const Vec& base) const;
    // Local product bracket [a,b]: the point of W^u(a) on W^s(b); nullopt if it leaves a's cell.
    std::optional<Vec> bracket(const Vec& a, const Vec& b) const;
    // Unstable-coordinate offset from a to [a,b].
    std::optional<double> bracket_offset(const Vec& a, const Vec& b) const;

    MarkovCheckReport check_markov(std::size_t samples, std::uint64_t seed) const;
    std::vector<BoundarySegment> boundary_s() const;
    std::vector<BoundarySegment> boundary_u() const;
    nlohmann::json to_json() const;

    const ToralAutomorphism* automorphism() const { return auto_ ? &*auto_ : nullptr; }
    int degree() const { return degree_; }
    int per_axis() const { return per_axis_; }

private:
    struct Rect {
        double u0, u1, h;  // [u0,u1] x [0,h] in eigen-coordinates
    };
    struct Local {
        int rect = -1;
        double u = 0.0, s = 0.0;
    };

    Local local(const Vec& base) const;
    int strip_of(int rect, double u) const;
    void build_strips();

    Kind kind_ = Kind::Circle;
    int base_dim_ = 1;
    int cell_count_ = 0;
    int degree_ = 0;
    int per_axis_ = 0;
    double expansion_ = 1.0;
    double base_entropy_ = 0.0;
    IMat transition_;
    Vec plaque_lengths_;
    Vec udir_;
    Mat to_eigen_;  // inverse of [unstable | stable]
    Mat frame_;
    std::optional<ToralAutomorphism> auto_;
    std::vector<Rect> rects_;
    std::vector<std::vector<double>> breaks_;  // per rect, strip boundaries including ends
    std::vector<int> cell_base_;  // first cell index per rect
    std::vector<int> strip_target_;  // rect hit by the image of each cell
    Eigen::Vector2d box_lo_, box_hi_;  // torus-coordinate bounding box of the rects
    Mat inverse_;  // A^{-1}
};

MarkovStructure build_markov_structure(const ToralAutomorphism& a);
MarkovStructure build_markov_structure(int circle_degree);

struct BoundaryNullReport {
    std::vector<double> deltas;
    std::vector<double> fractions;
    double slope = 0.0;
    double intercept = 0.0;
    bool ok = true;
};

// Fraction of sampled unstable segments lying within delta of the stable boundary.
BoundaryNullReport boundary_null_check(const MarkovStructure& ms, std::size_t n_lines,
                                       const std::vector<double>& deltas, std::uint64_t seed);

}  // namespace ugibbs
