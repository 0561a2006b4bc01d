#pragma once

#include "ugibbs/measures.hpp"

#include <complex>

namespace ugibbs {

struct SkeletonPoint {
    Vec point;               // lexicographically smallest point of the orbit
    int period = 0;          // minimal period
    std::vector<Vec> orbit;  // point, f(point), ...
    std::vector<std::complex<double>> multipliers;  // eigenvalues of Df^period, by decreasing modulus
    int contracting_count = 0;
    bool hyperbolic = false;  // every |multiplier| at least 1e-6 away from 1
    double stable_size_estimate = 0.0;
};

struct PeriodicSearch {
    std::vector<SkeletonPoint> orbits;  // sorted by period, then point
    std::vector<std::size_t> seeds;     // per period
    std::vector<std::size_t> divergent;  // per period: Newton runs that failed
    int max_period = 0;
};

// Periodic points of the factor are lifted (fiber grid on skew products) and refined by Newton on
// f^p - id. Roots are verified to 1e-10 and merged at 1e-8.
PeriodicSearch find_periodic(const FactorChart& chart, int max_period, int fiber_grid = 3);

// Periodic points of x -> A x mod 1 with A^p x = x: one per coset of Z^d / (A^p - I) Z^d.
std::vector<Vec> toral_periodic_points(const IMat& a, int p);

// Largest radius r_max 2^-j (r_max = 1, or 1/2 on tori) such that every point of the domain that
// far from x along E^cs converges to the orbit of the periodic point x.
double stable_size(const SystemModel& model, const Vec& x, int period);

BasinTarget basin_target(const SkeletonPoint& s, double u_radius = 0.05);

struct SkeletonOptions {
    int horizon = 200;
    int probes = 64;
    int probe_samples = 8;    // points per probe leaf
    int unstable_samples = 64;  // points on W^u(p_i) for the cross check
    double leaf_length = 0.05;
    double u_radius = 0.05;
};

// Greedy reduction to pairwise unconnected saddles: an orbit is dropped when samples of its
// unstable leaf enter the neighbourhood of an orbit already kept.
std::vector<SkeletonPoint> select_skeleton(const FactorChart& chart, const std::vector<SkeletonPoint>& orbits,
                                           const SkeletonOptions& opt = {});

enum class SkeletonStatus { Skeleton, Fail, Inconclusive };
const char* skeleton_status_name(SkeletonStatus s);

struct SkeletonReport {
    SkeletonStatus status = SkeletonStatus::Fail;
    std::vector<SkeletonPoint> points;
    std::vector<std::size_t> basin_hits;  // probes whose first hit is candidate i
    std::size_t probes = 0;
    std::size_t unresolved = 0;
    std::size_t cross_hits = 0;
    int horizon = 0;
};

SkeletonReport verify_skeleton(const FactorChart& chart, const std::vector<SkeletonPoint>& candidates,
                               std::uint64_t seed, const SkeletonOptions& opt = {});

struct ComponentStructure {
    std::size_t occupied = 0;
    int connected_components = 0;
    std::vector<std::int64_t> boxes;
    double leaf_fill = 0.0;
    std::vector<std::pair<int, double>> skeleton_fill;  // skeleton index, fill of the leaf through it
    std::vector<int> cycle;  // image of each connected piece under f, -1 if unclear
};

struct StructureOptions {
    int box_depth = 6;
    int leaf_points = 20000;
    int leaf_steps = 200;
    std::size_t map_samples = 4000;
};

struct StructureReport {
    std::vector<ComponentStructure> components;
    std::vector<int> shape;
    int box_depth = 0;
    double box_margin = 0.0;
    bool skeleton_inside = true;  // every skeleton point has an occupied box among its neighbours
};

StructureReport support_structure(const FactorChart& chart, const GibbsReport& gibbs,
                                  const std::vector<SkeletonPoint>& skeleton, const StructureOptions& opt = {});

nlohmann::json skeleton_json(const SkeletonReport& r);
nlohmann::json structure_json(const StructureReport& r);
// Runs of alternating 0 / 1 over box indices 0..total-1, starting with a 0-run.
std::vector<std::int64_t> run_length(const std::vector<std::int64_t>& sorted_boxes, std::int64_t total);

}  // namespace ugibbs
