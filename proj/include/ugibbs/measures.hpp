#pragma once

#include "ugibbs/leaves.hpp"

#include <cstdint>

namespace ugibbs {

// Factor data of the plaque a block of particles lives on. Zero length means atomic.
struct PlaqueGroup {
    int cell = -1;
    Vec base_anchor;
    double t_lo = 0.0, t_hi = 0.0;
    int generation = 0;
    double length() const { return t_hi - t_lo; }
};

// Weighted particle cloud. param is the factor coordinate of each particle on its group.
struct ParticleMeasure {
    int dim = 0;
    Mat points;  // dim x n, wrapped
    std::vector<double> weights;
    std::vector<double> param;
    std::vector<int> group;
    std::vector<int> label;
    std::vector<PlaqueGroup> groups;
    std::string provenance = "custom";

    std::size_t size() const { return weights.size(); }
    double total_weight() const;
    void normalize();
    // Appends `other` with its weights multiplied by `scale`.
    void append(const ParticleMeasure& other, double scale);
    void reserve(std::size_t n);
    ParticleMeasure subset(const std::vector<std::size_t>& idx) const;  // renormalized
    Vec base_point(const FactorChart& chart, std::size_t i) const;
    int cell(std::size_t i) const { return groups[group[i]].cell; }
};

ParticleMeasure dirac(const FactorChart& chart, const Vec& x);
// Uniform measure on a periodic orbit; each point is its own atomic group.
ParticleMeasure periodic_measure(const FactorChart& chart, const std::vector<Vec>& orbit);

// N particles stratified in the factor coordinate of the plaque (midpoints without jitter).
ParticleMeasure reference_measure(const FactorChart& chart, const UnstablePlaque& plaque, int n, std::uint64_t seed,
                                  bool jitter = true);

struct BranchWeights {
    int source_group = -1;
    std::vector<int> cells;
    std::vector<double> empirical;    // particle weight fractions per image piece
    std::vector<double> theoretical;  // image length ratios
};

struct PushResult {
    ParticleMeasure image;
    std::vector<BranchWeights> branches;
    std::size_t lost = 0;
};

// f_* mu with particles regrouped onto the cell pieces of their images.
PushResult push_forward(const FactorChart& chart, const ParticleMeasure& mu);

// Max relative spread, across plaques, of the branch weights per (source cell, target cell, order).
double branch_weight_spread(const FactorChart& chart, const std::vector<UnstablePlaque>& plaques);

struct CurvePoint {
    int n = 0;
    double distance = 0.0;  // weak distance between mu_n and mu_{2n}
};

struct CesaroOptions {
    int iterations = 2000;
    int particles = 500;  // per generation, split evenly over the walkers
    int walkers = 2;
    int resolution = 64;
    int depth = 6;
    bool jitter = true;
    bool curve = true;
};

struct CesaroResult {
    ParticleMeasure measure;
    std::vector<CurvePoint> curve;
};

// (1/n) sum_{j<n} f^j_* nu for the reference measure nu of the seed plaque, by random descent
// through the branch pieces weighted by their lengths.
CesaroResult cesaro_state(const FactorChart& chart, const UnstablePlaque& seed_plaque, const CesaroOptions& opt,
                          std::uint64_t seed);

// min(n, max_count) increasing indices spread over [0, n); all of them if n <= max_count.
std::vector<std::size_t> spread_subsample(std::size_t n, std::size_t max_count);

// Statistical floor: at least 5 particles per occupied cylinder.
bool passes_floor(std::size_t particles, std::size_t occupied);
// Sorted (word, probability) pairs.
std::vector<std::pair<std::int64_t, double>> word_histogram(const std::vector<std::int64_t>& words,
                                                            const std::vector<double>& weights);

// Coarse itinerary words of length `depth`.
std::vector<std::int64_t> cylinder_words(const FactorChart& chart, const ParticleMeasure& mu, int depth);
// L1 distance of cylinder histograms; DepthTooLarge below 5 particles per occupied cylinder.
double weak_distance(const FactorChart& chart, const ParticleMeasure& a, const ParticleMeasure& b, int depth);
// Largest depth <= max_depth passing the particle floor, or 0.
int feasible_depth(const FactorChart& chart, const ParticleMeasure& a, const ParticleMeasure& b, int max_depth);
// L1 distance of the base histogram to the factor's reference measure.
double base_histogram_distance(const FactorChart& chart, const ParticleMeasure& mu, int depth);

// Stable neighbourhood of a periodic orbit in frame coordinates.
struct BasinTarget {
    std::vector<Vec> orbit;
    double u_radius = 0.05;
    double cs_radius = 0.05;
};

bool in_basin_target(const SystemModel& model, const BasinTarget& target, const Vec& x);
// First target entered by the forward orbit within `horizon` steps, or -1.
int first_target(const SystemModel& model, const std::vector<BasinTarget>& targets, Vec x, int horizon);

struct ComponentOptions {
    int horizon = 200;
    std::size_t max_labelled = 20000;
    int box_depth = 6;
    int min_box_count = 5;
    int distance_depth = 6;
};

enum class GibbsStatus { Single, Multi, Unresolved };
const char* status_name(GibbsStatus s);

struct GibbsReport {
    GibbsStatus status = GibbsStatus::Unresolved;
    std::vector<ParticleMeasure> components;
    std::vector<int> component_target;  // skeleton index per component
    std::vector<double> component_mass;
    double unresolved_fraction = 0.0;
    std::vector<std::vector<double>> distances;
    int distance_depth = 0;
    std::vector<std::vector<std::int64_t>> support_boxes;
    double box_margin = std::numeric_limits<double>::infinity();  // min fiber gap between supports
    std::vector<CurvePoint> convergence_curve;
};

// Box index grid: 2^d bins on axis 0, 2^{floor(d/2)} on the other axes.
std::vector<int> box_shape(const SystemModel& model, int depth);
std::int64_t box_index(const SystemModel& model, const std::vector<int>& shape, const Vec& x);
std::vector<std::int64_t> occupied_boxes(const SystemModel& model, const ParticleMeasure& mu, int depth,
                                         int min_count);

GibbsReport ergodic_components(const FactorChart& chart, const ParticleMeasure& mu,
                               const std::vector<BasinTarget>& targets, const ComponentOptions& opt = {},
                               const ParticleMeasure* second_seed = nullptr);

void write_measure_csv(const ParticleMeasure& mu, const std::string& path);
nlohmann::json report_json(const GibbsReport& r);

}  // namespace ugibbs
