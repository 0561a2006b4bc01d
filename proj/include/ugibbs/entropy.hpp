#pragma once

#include "ugibbs/measures.hpp"

namespace ugibbs {

struct VolumeGrowth {
    double h_vol = 0.0;
    double stderr_ = 0.0;
    std::vector<double> log_length;  // n = 0..n_max
    double delta = 0.0;              // accepted maximal segment length
};

// Slope of log length(f^n D) over the last ceil(n_max/2) iterates. D is the seed plaque; lengths
// come from polylines of exact images with segment bound delta, halved until successive lengths
// agree to 0.5%. ResolutionExhausted when a polyline needs more than max_points vertices.
VolumeGrowth topological_u_entropy(const FactorChart& chart, const UnstablePlaque& disk, int n_max,
                                   std::size_t max_points = std::size_t{1} << 22);

struct ConditionalEntropy {
    double h_cond = 0.0;
    double stderr_ = 0.0;  // batch means over 10 chunks of groups
    std::size_t groups_used = 0;
    std::size_t groups_skipped = 0;
};

// mu-average of -log of the empirical conditional mass of f^{-1} xi^u(f x) on x's plaque.
// Plaques with fewer than `min_particles` particles, or a branch below 5 particles, are skipped;
// atomic groups contribute 0. InsufficientConditionals when nothing is usable.
ConditionalEntropy metric_u_entropy(const FactorChart& chart, const ParticleMeasure& mu, int min_particles = 200);

struct SymbolicEntropy {
    double h = 0.0;
    int depth = 0;
};

// Plug-in H_n - H_{n-1} of coarse itineraries at the largest n <= max_depth passing the floor.
SymbolicEntropy symbolic_entropy(const FactorChart& chart, const ParticleMeasure& mu, int max_depth = 8);

// Violation: h_cond > h_base + 3 stderr. Unavailable: the estimator raised (see EntropyRow::error).
enum class EntropyStatus { Equality, Strict, Violation, Unavailable };
const char* entropy_status_name(EntropyStatus s);

struct BatteryEntry {
    std::string name;
    ParticleMeasure measure;
    bool certified = false;  // negative cs exponents certified: compare with the symbolic entropy
};

struct EntropyRow {
    std::string name;
    ConditionalEntropy cond;
    EntropyStatus status = EntropyStatus::Strict;
    bool symbolic_checked = false;
    SymbolicEntropy symbolic;
    bool symbolic_agrees = false;
    std::string error;  // set when the estimator could not run
};

struct EntropyReport {
    double h_base = 0.0;
    double h_base_pf = 0.0;  // log of the Markov transition eigenvalue
    std::vector<EntropyRow> rows;
    std::size_t violations = 0;
    std::size_t unavailable = 0;
};

EntropyReport entropy_identities(const FactorChart& chart, const std::vector<BatteryEntry>& battery);

nlohmann::json entropy_json(const EntropyReport& r);
void write_entropy_csv(const EntropyReport& r, const std::string& path);
void write_growth_csv(const VolumeGrowth& g, const std::string& path);

}  // namespace ugibbs
