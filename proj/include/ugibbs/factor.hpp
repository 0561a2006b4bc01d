#pragma once

#include "ugibbs/systems.hpp"
#include "ugibbs/toral.hpp"

#include <memory>

namespace ugibbs {

// h with h o beta = (x k) o h, h(0) = 0, from k-ary itineraries.
class CircleConjugacy {
public:
    CircleConjugacy() = default;
    CircleConjugacy(const BaseMap& beta, int depth);

    double operator()(double theta) const;  // in [0,1)
    double lift(double x) const;             // monotone lift on R
    double inverse(double u) const;
    // nu_beta([lo, hi]) = Leb(h([lo, hi])) for a lifted interval lo <= hi.
    double measure(double lo, double hi) const { return lift(hi) - lift(lo); }
    double residual(std::size_t samples) const;
    // Index j of the arc [j/k, (j+1)/k) containing h(theta), from the branch boundaries.
    int arc(double theta) const;
    bool identity() const { return beta_.is_linear(); }
    int depth() const { return depth_; }
    const BaseMap& base_map() const { return beta_; }

private:
    double branch(int d, double y) const;

    BaseMap beta_;
    int depth_ = 40;
    std::vector<double> cuts_{0.0, 1.0};  // branch boundaries, lift(cuts_[j]) = j
};

CircleConjugacy circle_conjugacy(const BaseMap& beta, int depth = 40);

struct SemiConjugacy {
    enum class Kind { Identity, SkewItinerary, FranksSeries, CircleConjugacy };
    Kind kind = Kind::Identity;
    double tolerance = 0.0;
    int depth = 0;
    double displacement_sup = 0.0;
    int grid_n = 0;
    Mat grid;  // state_dim x grid_n^d displacement samples, for export only
    std::function<Vec(const Vec&)> evaluate;
    // Skew systems: evaluate with an explicit backward orbit, most recent preimage first.
    std::function<Vec(const Vec&, const std::vector<Vec>&)> evaluate_with_history;

    // Regular-grid displacement, stored as raw little-endian doubles with a JSON sidecar.
    void sample_grid(int n, int state_dim, const std::function<Vec(const Vec&, const Vec&)>& disp);
    void save(const std::string& stem) const;
};

const char* kind_name(SemiConjugacy::Kind k);

SemiConjugacy franks_semiconjugacy(const SystemModel& model, double tol);
SemiConjugacy skew_semiconjugacy(const SystemModel& model, int depth);

// sup |pi(f x) - A pi(x)| over sampled points of the torus.
double franks_residual(const SystemModel& model, const SemiConjugacy& pi, std::size_t samples, std::uint64_t seed);
// sup |pi(f x) - g0(pi(x))| over forward-orbit points whose pasts are known.
double skew_residual(const SystemModel& model, const SemiConjugacy& pi, std::size_t samples, std::uint64_t seed);

// Everything downstream needs from the factor: pi onto the base, the cells there, and the
// coarse partition used for itinerary cylinders.
struct FactorChart {
    std::shared_ptr<const SystemModel> model;
    std::shared_ptr<const MarkovStructure> cells;
    std::shared_ptr<const CircleConjugacy> conj;
    std::shared_ptr<const SemiConjugacy> pi;
    std::function<Vec(const Vec&)> base_point;
    double expansion = 1.0;
    int fiber_bins = 1;  // per disk, skew systems only

    double base_entropy() const { return cells->base_entropy(); }
    PlaqueSpan span(const Vec& x) const { return cells->unstable_span(base_point(x)); }
    int cell(const Vec& x) const { return cells->locate(base_point(x)); }
    // Unstable-coordinate difference t(y) - t(x) for nearby points.
    double dt(const Vec& x, const Vec& y) const {
        return cells->unstable_coordinate(cells->displacement(base_point(x), base_point(y)));
    }
    int coarse_count() const;
    int coarse_symbol(const Vec& x) const;
};

struct ChartOptions {
    int box_per_axis = 2;
    double franks_tol = 1e-6;
    int conj_depth = 40;
};

FactorChart make_chart(const SystemModel& model, const ChartOptions& opt = {});

}  // namespace ugibbs
