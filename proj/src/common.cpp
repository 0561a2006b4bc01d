#include "ugibbs/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace ugibbs {

const char* error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotHyperbolic: return "NotHyperbolic";
        case ErrorCode::NotUnimodular: return "NotUnimodular";
        case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
        case ErrorCode::ConstructionFailed: return "ConstructionFailed";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::DomainEscape: return "DomainEscape";
        case ErrorCode::NotExpanding: return "NotExpanding";
        case ErrorCode::MismatchedEndpoints: return "MismatchedEndpoints";
        case ErrorCode::ConeCheckFailed: return "ConeCheckFailed";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::NotOnAttractor: return "NotOnAttractor";
        case ErrorCode::InsufficientResolution: return "InsufficientResolution";
        case ErrorCode::BracketOutOfCell: return "BracketOutOfCell";
        case ErrorCode::LostParticle: return "LostParticle";
        case ErrorCode::DepthTooLarge: return "DepthTooLarge";
        case ErrorCode::DegenerateFrame: return "DegenerateFrame";
        case ErrorCode::ResolutionExhausted: return "ResolutionExhausted";
        case ErrorCode::InsufficientConditionals: return "InsufficientConditionals";
        case ErrorCode::IncompatibleSystems: return "IncompatibleSystems";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_worker_count(unsigned n) { g_workers = std::max(1u, n); }
unsigned worker_count() { return g_workers; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    unsigned w = std::min<std::size_t>(worker_count(), n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n || failed) return;
                try {
                    body(i);
                } catch (...) {
                    bool expected = false;
                    if (failed.compare_exchange_strong(expected, true)) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    LinearFit fit;
    if (n < 2) return fit;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

double ks_uniform(std::vector<double> s) {
    if (s.empty()) return 1.0;
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double v = std::clamp(s[i], 0.0, 1.0);
        d = std::max({d, (i + 1) / n - v, v - i / n});
    }
    return d;
}

}  // namespace ugibbs
