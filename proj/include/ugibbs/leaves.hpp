#pragma once

#include "ugibbs/factor.hpp"

#include <string>

namespace ugibbs {

enum class ParameterKind { BaseCoordinate, AUnstableCoordinate };

// Piece of a strong-unstable leaf over one cell. Samples are ordered by sigma, a smooth
// coordinate along the leaf (base angle for skew products, A-unstable coordinate of the
// lifted point on tori); t is the factor unstable coordinate. Both are relative to the anchor.
struct UnstablePlaque {
    int cell_id = -1;
    Vec anchor;       // wrapped
    Vec base_anchor;  // factor point of the anchor
    double t_lo = 0.0, t_hi = 0.0;
    ParameterKind parameter_kind = ParameterKind::BaseCoordinate;
    std::vector<double> sigma;
    std::vector<double> t;
    std::vector<Vec> points;  // lifted near the anchor

    std::size_t size() const { return points.size(); }
    double length() const { return t_hi - t_lo; }
    Vec at_sigma(double s) const;      // cubic Lagrange on the four nearest samples
    double sigma_at_t(double tt) const;  // cubic inverse of t(sigma)
};

// Lift of f continuous in its argument (torus: A p + g(p); skew: lifted base map).
Vec lifted_map(const SystemModel& model, const Vec& p);
// Factor image of a base point.
Vec base_image(const FactorChart& chart, const Vec& b);
Vec base_at(const FactorChart& chart, const UnstablePlaque& pl, double t);
// Smooth leaf coordinate of lifted p relative to the anchor x.
double leaf_sigma(const FactorChart& chart, const Vec& x, const Vec& p);
// Factor-coordinate difference t(y) - t(x) for y on the local leaf of x, lifted near x.
double leaf_dt(const FactorChart& chart, const Vec& x, const Vec& y);
// Lifted leaf point at factor coordinate t (exact base angle on skew products).
Vec leaf_point_at_t(const FactorChart& chart, const UnstablePlaque& pl, double t);

// Leaf through x covering factor coordinates [t_minus, t_plus] around x. `past` is a backward
// orbit of x, most recent preimage first; without it one is computed with inverse_on_image.
UnstablePlaque grow_unstable_leaf(const FactorChart& chart, const Vec& x, double t_minus, double t_plus,
                                  int resolution);
UnstablePlaque grow_unstable_leaf_from(const FactorChart& chart, const Vec& x, const std::vector<Vec>& past,
                                       double t_minus, double t_plus, int resolution);

UnstablePlaque plaque_of(const FactorChart& chart, const Vec& x, int resolution = 64);
UnstablePlaque plaque_of_from(const FactorChart& chart, const Vec& x, const std::vector<Vec>& past,
                              int resolution = 64);

// Max over chords of |cs| / |u| in frame coordinates; throws ConeCheckFailed beyond the aperture.
double check_plaque_cone(const SystemModel& model, const UnstablePlaque& pl);

// Center-stable holonomy through the factor bracket: factor coordinate on `to` of the
// cs-plaque through the point at coordinate t_from on `from`.
double cs_holonomy_t(const FactorChart& chart, const UnstablePlaque& from, const UnstablePlaque& to, double t_from);
Vec cs_holonomy(const FactorChart& chart, const UnstablePlaque& from, const UnstablePlaque& to, double t_from);

struct ImagePiece {
    int cell = -1;
    double a = 0.0, b = 0.0;  // image factor coordinates relative to f(anchor)
    double weight = 0.0;      // share of the image length
};

// Cell pieces of the factor unstable segment base + [lo, hi] u.
std::vector<ImagePiece> split_line(const FactorChart& chart, const Vec& base, double lo, double hi);

// f(plaque) as an uncut plaque (cell -1) together with its split into cell pieces.
struct PlaqueImage {
    UnstablePlaque image;
    std::vector<ImagePiece> pieces;
};

PlaqueImage push_plaque(const FactorChart& chart, const UnstablePlaque& pl);
// Plaque over [a, b] of a longer plaque, re-anchored at `anchor_t` and resampled to R points.
UnstablePlaque restrict_plaque(const FactorChart& chart, const UnstablePlaque& src, int cell, double a, double b,
                               double anchor_t, int resolution);

void write_plaque_csv(const FactorChart& chart, const UnstablePlaque& pl, const std::string& path);

}  // namespace ugibbs
