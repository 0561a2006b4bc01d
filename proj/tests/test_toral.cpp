#include "doctest.h"
#include "ugibbs/toral.hpp"

using namespace ugibbs;

namespace {
IMat mat2(int a, int b, int c, int d) {
    IMat m(2, 2);
    m << a, b, c, d;
    return m;
}
}  // namespace

TEST_CASE("cat map splitting") {
    auto a = hyperbolic_split(mat2(2, 1, 1, 1));
    const double phi2 = (3.0 + std::sqrt(5.0)) / 2.0;
    CHECK(a.unstable_rates[0] == doctest::Approx(phi2).epsilon(1e-14));
    CHECK(a.base_entropy == doctest::Approx(std::log(phi2)).epsilon(1e-14));
    CHECK(a.base_entropy == doctest::Approx(0.962424).epsilon(1e-6));
    CHECK(a.det_sign == 1);
    Mat m = a.real_matrix();
    CHECK((m * a.unstable_basis - phi2 * a.unstable_basis).norm() < 1e-12);
}

TEST_CASE("fibonacci and non-hyperbolic matrices") {
    auto f = hyperbolic_split(mat2(1, 1, 1, 0));
    CHECK(f.unstable_rates[0] == doctest::Approx((1 + std::sqrt(5.0)) / 2).epsilon(1e-14));
    CHECK(f.det_sign == -1);
    CHECK_THROWS_AS(hyperbolic_split(mat2(0, -1, 1, 0)), Error);
    try {
        hyperbolic_split(mat2(1, 0, 0, 1));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotHyperbolic);
    }
    try {
        hyperbolic_split(mat2(2, 0, 0, 1));
        FAIL("expected NotUnimodular");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotUnimodular);
    }
}

TEST_CASE("three positive eigenvalues on T3") {
    IMat m(3, 3);
    m << 3, 1, 2, 1, 1, 1, 2, 1, 2;
    auto a = hyperbolic_split(m);
    REQUIRE(a.unstable_dim() == 1);
    CHECK(a.stable_rates[0] == doctest::Approx(0.30797853).epsilon(1e-7));
    CHECK(a.stable_rates[1] == doctest::Approx(0.64310413).epsilon(1e-7));
    CHECK(a.unstable_rates[0] == doctest::Approx(5.04891734).epsilon(1e-7));
    CHECK_THROWS_AS(build_markov_structure(a), Error);
    IMat block(3, 3);
    block << 2, 1, 0, 1, 1, 0, 0, 0, 1;
    CHECK_THROWS_AS(hyperbolic_split(block), Error);
}

TEST_CASE("circle partition") {
    auto ms = build_markov_structure(3);
    CHECK(ms.cell_count() == 3);
    CHECK(ms.transition() == IMat::Ones(3, 3));
    CHECK(ms.pf_eigenvalue() == doctest::Approx(3.0));
    Vec x(1);
    x << 0.1;
    auto sp = ms.unstable_span(x);
    CHECK(sp.cell == 0);
    CHECK(sp.below == doctest::Approx(0.1));
    CHECK(sp.above == doctest::Approx(1.0 / 3 - 0.1));
    x << 1.0 / 3.0;
    CHECK(ms.locate(x) == 1);
}

TEST_CASE("cat map Markov partition") {
    auto a = hyperbolic_split(mat2(2, 1, 1, 1));
    auto ms = build_markov_structure(a);
    CHECK(ms.cell_count() >= 2);
    CHECK(std::abs(std::log(ms.pf_eigenvalue()) - a.base_entropy) < 1e-9);
    auto rep = ms.check_markov(1000, 3);
    CHECK(rep.ok);
    // Plaque lengths form the PF eigenvector.
    Vec w = ms.plaque_lengths();
    CHECK((ms.transition().cast<double>() * w - ms.expansion() * w).norm() < 1e-9);
    // Area of the cells is one.
    auto j = ms.to_json();
    CHECK(j["cells"].size() == static_cast<std::size_t>(ms.cell_count()));

    Rng rng(11);
    int brackets = 0;
    for (int n = 0; n < 1000; ++n) {
        Vec p(2), q(2);
        p << rng.uniform(), rng.uniform();
        const int c = ms.locate(p);
        // Second point in the same cell by rejection.
        do {
            q << rng.uniform(), rng.uniform();
        } while (ms.locate(q) != c);
        auto br = ms.bracket(p, q);
        if (br && ms.locate(*br) == c) ++brackets;
    }
    CHECK(brackets == 1000);
}

TEST_CASE("fibonacci Markov partition") {
    auto a = hyperbolic_split(mat2(1, 1, 1, 0));
    auto ms = build_markov_structure(a);
    CHECK(ms.check_markov(1000, 4).ok);
    CHECK(std::abs(std::log(ms.pf_eigenvalue()) - a.base_entropy) < 1e-9);
}

TEST_CASE("boundary null check") {
    auto circle = build_markov_structure(3);
    auto rep = boundary_null_check(circle, 4, {1e-2, 1e-3, 1e-4, 0.0}, 5);
    CHECK(rep.fractions[0] == doctest::Approx(0.06).epsilon(0.02));
    CHECK(rep.fractions[1] == doctest::Approx(0.006).epsilon(0.05));
    CHECK(rep.fractions[3] == 0.0);
    CHECK(rep.slope == doctest::Approx(6.0).epsilon(0.02));
    CHECK(std::abs(rep.intercept) < 1e-3);

    auto cat = build_markov_structure(hyperbolic_split(mat2(2, 1, 1, 1)));
    auto rc = boundary_null_check(cat, 8, {1e-2, 1e-3, 1e-4}, 6);
    CHECK(rc.ok);
    CHECK(std::abs(rc.intercept) < 1e-3);
}
