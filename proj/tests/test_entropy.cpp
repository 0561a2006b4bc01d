#include "doctest.h"
#include "ugibbs/entropy.hpp"

#include <chrono>

using namespace ugibbs;

namespace {

SystemModel cat_model() {
    IMat cat(2, 2);
    cat << 2, 1, 1, 1;
    return make_linear_torus(hyperbolic_split(cat));
}

SystemModel solenoid() { return make_solenoid(3, 0.5, TrigPoly2::circle(0.3)); }

UnstablePlaque seed_plaque(const FactorChart& chart, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> o{chart.model->random_point(rng)};
    for (int i = 0; i < 70; ++i) o.push_back(chart.model->map(o.back()));
    const std::vector<Vec> past(o.rbegin() + 1, o.rend());
    return plaque_of_from(chart, o.back(), past, 64);
}

// Short seed disk: the growth rate does not depend on its size, the cost does.
UnstablePlaque seed_disk(const FactorChart& chart, std::uint64_t seed, double length = 0.01) {
    Rng rng(seed);
    std::vector<Vec> o{chart.model->random_point(rng)};
    for (int i = 0; i < 70; ++i) o.push_back(chart.model->map(o.back()));
    const std::vector<Vec> past(o.rbegin() + 1, o.rend());
    return grow_unstable_leaf_from(chart, o.back(), past, -length / 2, length / 2, 32);
}

ParticleMeasure gibbs(const FactorChart& chart, std::uint64_t seed, int n = 600, int particles = 500) {
    CesaroOptions opt;
    opt.iterations = n;
    opt.particles = particles;
    opt.curve = false;
    return cesaro_state(chart, seed_plaque(chart, seed), opt, seed).measure;
}

// Periodic orbit of the plain solenoid through theta = j / (3^p - 1): the fiber point is the
// fixed point of the composed affine contractions, reached by running the cycle.
std::vector<Vec> solenoid_cycle(int p, int j) {
    const double th0 = j / (std::pow(3.0, p) - 1.0);
    Eigen::Vector2d z(0.0, 0.0);
    for (int rep = 0; rep < 100; ++rep) {
        double th = th0;
        for (int i = 0; i < p; ++i) {
            z = 0.5 * z + 0.3 * Eigen::Vector2d(std::cos(kTwoPi * th), std::sin(kTwoPi * th));
            th = wrap01(3.0 * th);
        }
    }
    std::vector<Vec> out;
    double th = th0;
    for (int i = 0; i < p; ++i) {
        Vec x(3);
        x << th, z[0], z[1];
        out.push_back(x);
        z = 0.5 * z + 0.3 * Eigen::Vector2d(std::cos(kTwoPi * th), std::sin(kTwoPi * th));
        th = wrap01(3.0 * th);
    }
    return out;
}

}  // namespace

TEST_CASE("volume growth") {
    SUBCASE("plain solenoid: log 3 within 2%, under 10 s") {
        auto chart = make_chart(solenoid());
        const auto t0 = std::chrono::steady_clock::now();
        auto g = topological_u_entropy(chart, seed_disk(chart, 1), 12);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        CHECK(g.h_vol == doctest::Approx(std::log(3.0)).epsilon(0.02));
        CHECK(secs < 10.0);
        REQUIRE(g.log_length.size() == 13);
    }
    SUBCASE("cat map: log of the expanding eigenvalue within 1%") {
        auto chart = make_chart(cat_model());
        auto g = topological_u_entropy(chart, seed_disk(chart, 2), 10);
        CHECK(g.h_vol == doctest::Approx(std::log((3.0 + std::sqrt(5.0)) / 2.0)).epsilon(0.01));
    }
    SUBCASE("independent of the seed disk") {
        auto chart = make_chart(make_modified_solenoid(default_modified_solenoid()).first);
        auto a = topological_u_entropy(chart, seed_plaque(chart, 3), 9);
        auto b = topological_u_entropy(chart, seed_plaque(chart, 4), 9);
        CHECK(std::abs(a.h_vol - b.h_vol) < 0.01 * a.h_vol);
    }
    SUBCASE("too few iterates") {
        auto chart = make_chart(solenoid());
        CHECK_THROWS_AS(topological_u_entropy(chart, seed_disk(chart, 1), 2), Error);
    }
}

TEST_CASE("conditional entropy") {
    SUBCASE("Gibbs states reach the base entropy") {
        for (auto m : {solenoid(), cat_model()}) {
            auto chart = make_chart(m);
            auto c = metric_u_entropy(chart, gibbs(chart, 1));
            CHECK(c.h_cond == doctest::Approx(chart.base_entropy()).epsilon(0.03));
            CHECK(c.groups_used > 100);
        }
    }
    SUBCASE("atomic conditionals") {
        auto chart = make_chart(solenoid());
        auto fixed = solenoid_cycle(1, 0);
        CHECK(metric_u_entropy(chart, dirac(chart, fixed[0])).h_cond == 0.0);
        auto per3 = periodic_measure(chart, solenoid_cycle(3, 5));
        REQUIRE(per3.size() == 3);
        CHECK(metric_u_entropy(chart, per3).h_cond == 0.0);
    }
    SUBCASE("too few particles per plaque") {
        auto chart = make_chart(solenoid());
        CHECK_THROWS_AS(metric_u_entropy(chart, gibbs(chart, 1, 50, 100)), Error);
    }
}

TEST_CASE("factor entropy from the automorphism and from the Markov matrix") {
    for (auto m : {solenoid(), cat_model()}) {
        auto chart = make_chart(m);
        CHECK(std::abs(chart.base_entropy() - std::log(chart.cells->pf_eigenvalue())) < 1e-9);
    }
}

TEST_CASE("symbolic entropy") {
    auto chart = make_chart(solenoid());
    auto mu = gibbs(chart, 2, 2000, 500);
    auto s = symbolic_entropy(chart, mu, 8);
    CHECK(s.depth == 8);
    CHECK(s.h == doctest::Approx(metric_u_entropy(chart, mu).h_cond).epsilon(0.05));
    auto per = symbolic_entropy(chart, periodic_measure(chart, solenoid_cycle(4, 7)), 8);
    CHECK(per.h == doctest::Approx(0.0));
}

TEST_CASE("entropy battery") {
    auto chart = make_chart(solenoid());
    std::vector<BatteryEntry> battery{{"gibbs", gibbs(chart, 3), true}};
    // ten periodic-orbit measures with random periods and starting digits
    Rng rng(9);
    for (int i = 0; i < 10; ++i) {
        const int p = 1 + static_cast<int>(rng.below(6));
        const int j = static_cast<int>(rng.below(static_cast<std::size_t>(std::pow(3.0, p) - 1)));
        battery.push_back({"periodic" + std::to_string(i), periodic_measure(chart, solenoid_cycle(p, j)), true});
    }
    auto rep = entropy_identities(chart, battery);
    CHECK(rep.violations == 0);
    CHECK(rep.rows[0].status == EntropyStatus::Equality);
    CHECK(rep.rows[0].symbolic_agrees);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        CHECK(rep.rows[i].status == EntropyStatus::Strict);
        CHECK(rep.rows[i].cond.h_cond == 0.0);
        CHECK(rep.rows[i].symbolic_agrees);
    }
    auto j = entropy_json(rep);
    CHECK(j["measures"].size() == 11);
    CHECK(j["measures"][0]["status"] == "EQUALITY");

    SUBCASE("sparse conditionals are unavailable, not violations") {
        auto sparse = entropy_identities(chart, {{"sparse", gibbs(chart, 1, 50, 100), false}});
        CHECK(sparse.violations == 0);
        CHECK(sparse.unavailable == 1);
        CHECK(sparse.rows[0].status == EntropyStatus::Unavailable);
        CHECK(!sparse.rows[0].error.empty());
    }
}
