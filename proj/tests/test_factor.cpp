#include "doctest.h"
#include "ugibbs/factor.hpp"

#include <filesystem>
#include <fstream>

using namespace ugibbs;

namespace {

// Inverse branch j of a degree-k lift: the theta in [0,1] with lift(theta) = y + j.
double inverse_branch(const BaseMap& b, int j, double y) {
    double lo = 0.0, hi = 1.0;
    const double target = y + j;
    for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
        const double mid = 0.5 * (lo + hi);
        (b.lift(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double compose(const BaseMap& b, const std::vector<int>& word, double y) {
    for (auto it = word.rbegin(); it != word.rend(); ++it) y = inverse_branch(b, *it, y);
    return y;
}

// Maximal-entropy mass of [lo, hi] in [0,1] by counting nested inverse-branch cylinders;
// boundary cylinders at the last level count half.
double cylinder_mass(const BaseMap& b, std::vector<int>& word, double lo, double hi, int max_depth) {
    const double x0 = compose(b, word, 0.0), x1 = compose(b, word, 1.0);
    const double w = std::pow(static_cast<double>(b.degree), -static_cast<double>(word.size()));
    if (x1 <= lo || x0 >= hi) return 0.0;
    if (x0 >= lo && x1 <= hi) return w;
    if (static_cast<int>(word.size()) == max_depth) return 0.5 * w;
    double total = 0.0;
    for (int j = 0; j < b.degree; ++j) {
        word.push_back(j);
        total += cylinder_mass(b, word, lo, hi, max_depth);
        word.pop_back();
    }
    return total;
}

SystemModel cat_model() {
    IMat cat(2, 2);
    cat << 2, 1, 1, 1;
    return make_linear_torus(hyperbolic_split(cat));
}

}  // namespace

TEST_CASE("circle conjugacy mass of the saddle window matches cylinder counting") {
    auto spec = default_modified_solenoid();
    BaseMap beta{spec.k, spec.beta_c};
    auto h = circle_conjugacy(beta, 30);
    const double eps = spec.eps;
    std::vector<int> word;
    const double oracle = cylinder_mass(beta, word, 0.0, eps, 20) + cylinder_mass(beta, word, 1.0 - eps, 1.0, 20);
    const double nu = h.measure(-eps, eps);
    CHECK(std::abs(nu - oracle) <= 2.0 * std::pow(3.0, -20) + 1e-11);
    CHECK(nu <= 0.1);
    CHECK(nu > 0.0);
    CHECK(h.measure(0.0, 0.0) == 0.0);
}

TEST_CASE("circle conjugacy is monotone and conjugates to x3") {
    BaseMap beta{3, 1.5};
    auto h = circle_conjugacy(beta, 40);
    CHECK(h.residual(2000) < 1e-10);
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double u = h.lift(i / 1000.0);
        CHECK(u >= prev);
        prev = u;
    }
    CHECK(h(0.0) == 0.0);
    CHECK(h.lift(1.0) == doctest::Approx(1.0));
    for (double u : {0.1, 0.37, 0.8}) CHECK(h(h.inverse(u)) == doctest::Approx(u).epsilon(1e-12));
    CHECK_THROWS_AS(circle_conjugacy(BaseMap{3, 2.5}), Error);
}

TEST_CASE("linear base map gives the identity conjugacy") {
    auto h = circle_conjugacy(BaseMap{3, 0.0});
    CHECK(h.identity());
    CHECK(h(0.4321) == 0.4321);
    CHECK(h.measure(-0.015, 0.015) == doctest::Approx(0.03));
}

TEST_CASE("skew semiconjugacy residual is bounded by the truncation") {
    for (const auto& m : {make_solenoid(3, 0.5, TrigPoly2::circle(0.3)),
                          make_modified_solenoid(default_modified_solenoid()).first}) {
        auto pi = skew_semiconjugacy(m, 40);
        CHECK(pi.kind == SemiConjugacy::Kind::SkewItinerary);
        const double bound = 2.0 * std::pow(0.5, 40) * 0.3 + 1e-10;
        CHECK(skew_residual(m, pi, 200, 3) <= bound);
    }
}

TEST_CASE("skew semiconjugacy without history uses backward orbits") {
    auto m = make_solenoid(3, 0.5, TrigPoly2::circle(0.3));
    auto pi = skew_semiconjugacy(m, 30);
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        // For the reference solenoid itself pi is the identity on the attractor.
        Vec x = m.iterate(m.random_point(rng), 60);
        Vec p = pi.evaluate(x);
        CHECK(std::abs(wrap_half(p[0] - x[0])) < 1e-12);
        CHECK((p.tail<2>() - x.tail<2>()).norm() < 1e-8);
    }
    Vec out(3);
    out << 0.2, 0.95, 0.0;
    CHECK_THROWS_AS(pi.evaluate(out), Error);
}

TEST_CASE("Franks semiconjugacy for the derived-from-Anosov map") {
    DerivedAnosovSpec spec;
    spec.matrix = default_da_matrix();
    auto m = make_derived_anosov(spec);
    auto pi = franks_semiconjugacy(m, 1e-6);
    CHECK(pi.kind == SemiConjugacy::Kind::FranksSeries);
    CHECK(pi.depth >= 30);
    CHECK(franks_residual(m, pi, 300, 21) < 1e-6);
    CHECK(pi.displacement_sup > 0.0);
    CHECK(pi.displacement_sup < 0.2);

    const ToralAutomorphism& a = *m.linear;
    const Mat Einv = a.eigen_frame().inverse();
    Rng rng(8);

    SUBCASE("monotone along unstable leaves") {
        for (int rep = 0; rep < 5; ++rep) {
            const Vec y0 = m.random_point(rng);
            const Vec eu = a.unstable_basis.col(0);
            std::vector<Vec> seg;
            for (int i = 0; i <= 40; ++i) seg.push_back(m.iterate(y0 + (i * 2.5e-8) * eu, 6));
            const Vec p0 = pi.evaluate(seg[0]);
            double prev = -1.0;
            for (const auto& z : seg) {
                Vec d = pi.evaluate(z) - p0;
                for (int k = 0; k < 3; ++k) d[k] = wrap_half(d[k]);
                const double u = (Einv * d)[0];
                CHECK(u > prev - 2e-6);
                prev = u;
            }
            CHECK(prev > 1e-3);
        }
    }

    SUBCASE("center-stable leaves map into stable leaves") {
        const Vec es = a.stable_basis.col(1);
        for (int rep = 0; rep < 5; ++rep) {
            const Vec x = m.random_point(rng);
            const int n = 10;
            Vec y = m.iterate(x, n) + 1e-6 * es;
            for (int i = 0; i < n; ++i) y = *m.inverse_on_image(y);
            Vec d = pi.evaluate(y) - pi.evaluate(x);
            for (int k = 0; k < 3; ++k) d[k] = wrap_half(d[k]);
            const Vec c = Einv * d;
            CHECK(std::abs(c[0]) < 3e-6);
        }
    }
}

TEST_CASE("cat map and unperturbed DA use the identity") {
    auto cat = cat_model();
    auto pi = franks_semiconjugacy(cat, 1e-6);
    CHECK(pi.kind == SemiConjugacy::Kind::Identity);
    DerivedAnosovSpec spec;
    spec.matrix = default_da_matrix();
    spec.amplitude = 0.0;
    auto da0 = make_derived_anosov(spec);
    CHECK(franks_semiconjugacy(da0, 1e-6).kind == SemiConjugacy::Kind::Identity);
    CHECK_THROWS_AS(franks_semiconjugacy(make_solenoid(3, 0.5, TrigPoly2::zero()), 1e-6), Error);
}

TEST_CASE("grid export writes raw doubles and a sidecar") {
    DerivedAnosovSpec spec;
    spec.matrix = default_da_matrix();
    auto m = make_derived_anosov(spec);
    auto pi = franks_semiconjugacy(m, 1e-6);
    pi.sample_grid(4, 3, [&](const Vec& x, const Vec& p) { return m.displacement(x, p); });
    CHECK(pi.grid.cols() == 64);
    const auto stem = (std::filesystem::temp_directory_path() / "ugibbs_franks_grid").string();
    pi.save(stem);
    CHECK(std::filesystem::file_size(stem + ".bin") == 64 * 3 * sizeof(double));
    auto side = nlohmann::json::parse(std::ifstream(stem + ".json"));
    CHECK(side["kind"] == "franks_series");
    CHECK(side["grid_n"] == 4);
}

TEST_CASE("charts and coarse symbols") {
    auto sol = make_two_solenoid(TwoSolenoidSpec{});
    auto ch = make_chart(sol);
    CHECK(ch.coarse_count() == 3 * 2);
    ch.fiber_bins = 4;
    CHECK(ch.coarse_count() == 3 * 2 * 4);
    CHECK(ch.base_entropy() == doctest::Approx(std::log(3.0)));
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        Vec x = sol.iterate(sol.random_point(rng), 20);
        const int s = ch.coarse_symbol(x);
        CHECK(s >= 0);
        CHECK(s < ch.coarse_count());
    }

    auto cat = cat_model();
    auto cc = make_chart(cat);
    CHECK(cc.coarse_count() == cc.cells->cell_count());
    CHECK(cc.expansion == doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0));

    DerivedAnosovSpec spec;
    spec.matrix = default_da_matrix();
    auto dc = make_chart(make_derived_anosov(spec));
    CHECK(dc.coarse_count() == 8);
    CHECK(dc.pi->kind == SemiConjugacy::Kind::FranksSeries);
}
