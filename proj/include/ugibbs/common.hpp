#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ugibbs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IMat = Eigen::MatrixXi;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ErrorCode {
    NotHyperbolic,
    NotUnimodular,
    UnsupportedDimension,
    ConstructionFailed,
    InvalidParameter,
    DomainEscape,
    NotExpanding,
    MismatchedEndpoints,
    ConeCheckFailed,
    NoConvergence,
    NotOnAttractor,
    InsufficientResolution,
    BracketOutOfCell,
    LostParticle,
    DepthTooLarge,
    DegenerateFrame,
    ResolutionExhausted,
    InsufficientConditionals,
    IncompatibleSystems,
    ConfigError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline double wrap01(double v) {
    double r = v - std::floor(v);
    return r >= 1.0 ? 0.0 : r;
}

// Representative of v mod 1 in [-1/2, 1/2).
inline double wrap_half(double v) { return v - std::floor(v + 0.5); }

// mt19937_64 with an explicit double conversion so streams match across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * uniform());
    }

private:
    std::mt19937_64 engine_;
};

// Derive an independent stream seed from a base seed and a label.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

void set_worker_count(unsigned n);
unsigned worker_count();

// Runs body(i) for i in [0, n). Callers write per-index slots and reduce in index order,
// which keeps results independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Ordinary least squares y = slope*x + intercept.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Kolmogorov-Smirnov statistic of samples in [0,1] against the uniform law.
double ks_uniform(std::vector<double> samples);

}  // namespace ugibbs
