#pragma once

#include "ugibbs/common.hpp"
#include "ugibbs/toral.hpp"

#include <array>
#include <map>
#include <optional>

namespace ugibbs {

enum class DomainKind { Torus, SolidTorus };

// b(theta) = sum_n (cx cos 2 pi n theta + sx sin 2 pi n theta, cy cos + sy sin), n = 1, 2, ...
struct TrigPoly2 {
    std::vector<std::array<double, 4>> terms;  // {cx, sx, cy, sy} per harmonic

    static TrigPoly2 circle(double radius);  // radius (cos, sin)
    static TrigPoly2 zero() { return {}; }

    template <typename Scalar>
    Eigen::Matrix<Scalar, 2, 1> eval(const Scalar& theta) const {
        using std::cos;
        using std::sin;
        Eigen::Matrix<Scalar, 2, 1> out(Scalar(0), Scalar(0));
        for (std::size_t n = 0; n < terms.size(); ++n) {
            const Scalar w = Scalar(kTwoPi * static_cast<double>(n + 1)) * theta;
            const auto& t = terms[n];
            out[0] += Scalar(t[0]) * cos(w) + Scalar(t[1]) * sin(w);
            out[1] += Scalar(t[2]) * cos(w) + Scalar(t[3]) * sin(w);
        }
        return out;
    }
    Eigen::Vector2d derivative(double theta) const;
    double sup_norm() const;
};

// Lifted degree-k circle map beta(theta) = k theta + c sin(2 pi theta)/(2 pi).
struct BaseMap {
    int degree = 3;
    double c = 0.0;

    template <typename Scalar>
    Scalar lift(const Scalar& theta) const {
        using std::sin;
        return Scalar(degree) * theta + Scalar(c / kTwoPi) * sin(Scalar(kTwoPi) * theta);
    }
    double operator()(double theta) const { return wrap01(lift(theta)); }
    double derivative(double theta) const { return degree + c * std::cos(kTwoPi * theta); }
    double min_derivative() const { return degree - std::abs(c); }
    double max_derivative() const { return degree + std::abs(c); }
    bool is_linear() const { return c == 0.0; }
    // All preimages in [0,1) of a base point.
    std::vector<double> preimages(double theta) const;
};

struct Disk {
    Eigen::Vector2d center;
    double radius = 1.0;
    double margin(const Eigen::Vector2d& x) const { return radius - (x - center).norm(); }
};

// Fiber data of a skew product (theta, x) -> (beta(theta), h_theta(x)).
struct SkewProduct {
    BaseMap beta;
    std::function<Eigen::Vector2d(double, const Eigen::Vector2d&)> fiber;
    std::function<Eigen::Matrix2d(double, const Eigen::Vector2d&)> fiber_dx;
    std::function<Eigen::Vector2d(double, const Eigen::Vector2d&)> fiber_dtheta;
    std::vector<Disk> disks;
    // Reference linear solenoid g0 used by the itinerary semiconjugacy.
    double ref_a = 0.5;
    TrigPoly2 ref_b;
};

struct FiberFamily {
    BaseMap base_map;
    double k = 3, a = 0.5, alpha = 0.7, eps = 0.015;
    double K = 0.0;  // max sampled ||D psi_t||
    double saddle_unstable = 4.0, saddle_stable = 0.3, saddle_scale = 0.6;
    bool saddle_path = true;
    TrigPoly2 b;
    std::vector<std::string> warnings;
};

struct SystemModel {
    std::string family;
    int state_dim = 3;
    int cs_dim = 2;
    int uu_dim = 1;
    DomainKind domain = DomainKind::SolidTorus;
    std::vector<bool> periodic;
    std::function<Vec(const Vec&)> map;
    std::function<std::optional<Vec>(const Vec&)> inverse_on_image;
    std::function<Mat(const Vec&)> derivative;
    std::function<Vec(const Vec&)> base_projection;
    double cone_aperture = 1.0;
    Mat frame;  // columns: uu reference directions, then cs reference directions
    bool embedding = false;
    double min_expansion = 1.0;
    std::vector<Disk> disks;
    std::optional<SkewProduct> skew;
    std::optional<ToralAutomorphism> linear;
    std::map<std::string, double> params;
    std::vector<std::string> warnings;

    Vec wrap(const Vec& x) const;
    Vec displacement(const Vec& from, const Vec& to) const;
    // Lift of x closest to ref (periodic coordinates shifted by integers).
    Vec unwrap_near(const Vec& x, const Vec& ref) const;
    double distance(const Vec& a, const Vec& b) const { return displacement(a, b).norm(); }
    double domain_margin(const Vec& x) const;  // >= 0 inside; torus: +inf
    int disk_of(const Vec& x) const;           // -1 for torus or outside
    Vec random_point(Rng& rng) const;
    // Point near the attractor: a random point pushed forward `steps` times.
    Vec random_attractor_point(Rng& rng, int steps = 30) const;
    Vec iterate(Vec x, int n) const;
};

SystemModel make_solenoid(int k, double a, const TrigPoly2& b);
// No domain or parameter checks; for constructing counterexamples.
SystemModel make_linear_skew(int k, double a, const TrigPoly2& b);

struct ModifiedSolenoidSpec {
    int k = 3;
    double a = 0.5;
    double alpha = 0.7;
    double eps = 0.015;
    double beta_c = 1.5;
    bool saddle_path = true;  // false: psi_t == phi
    double saddle_unstable = 4.0;
    double saddle_stable = 0.3;
    double saddle_scale = 0.6;
    TrigPoly2 b;  // defaults to 0.1 (sin 2 pi t, sin 4 pi t)
};
ModifiedSolenoidSpec default_modified_solenoid();
std::pair<SystemModel, FiberFamily> make_modified_solenoid(const ModifiedSolenoidSpec& spec);

struct TwoSolenoidSpec {
    int k = 3;
    double a = 0.5;
    double separation = 0.5;  // centers at (-separation, 0), (separation, 0)
    double radius = 0.45;
    double b_scale = 0.1;
    bool swap = false;
};
SystemModel make_two_solenoid(const TwoSolenoidSpec& spec);

SystemModel make_linear_torus(const ToralAutomorphism& a);

struct DerivedAnosovSpec {
    IMat matrix;
    double amplitude = 0.05;
    int direction = 1;                        // stable column index to perturb along (1 = kappa_2)
    Eigen::Vector3d wave = {1.0, 0.0, 0.0};  // integer wave vector m in sin(2 pi <m,x>)
    bool verify = true;
};
IMat default_da_matrix();
SystemModel make_derived_anosov(const DerivedAnosovSpec& spec);

struct ConeReport {
    bool pass = true;
    double min_expansion = 0.0;
    double max_omega = 0.0;
    double max_domination_ratio = 0.0;
    double max_cone_ratio = 0.0;  // < 1 means strict invariance on all samples
    double min_partial_volume = std::numeric_limits<double>::quiet_NaN();
    std::size_t samples = 0;
    Vec witness_point;
    Vec witness_vector;
};

ConeReport verify_partial_hyperbolicity(const SystemModel& model, std::size_t samples, std::uint64_t seed);
// Max entrywise deviation of the analytic derivative from central differences.
double derivative_fd_error(const SystemModel& model, std::size_t samples, std::uint64_t seed);
// Max |f(f^{-1}(y)) - y| over sampled attractor points.
double inverse_residual(const SystemModel& model, std::size_t samples, std::uint64_t seed);

}  // namespace ugibbs
