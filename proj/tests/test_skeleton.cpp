#include "doctest.h"
#include "ugibbs/skeleton.hpp"

using namespace ugibbs;

namespace {

SystemModel cat_model() {
    IMat cat(2, 2);
    cat << 2, 1, 1, 1;
    return make_linear_torus(hyperbolic_split(cat));
}

SystemModel solenoid() { return make_solenoid(3, 0.5, TrigPoly2::circle(0.3)); }

UnstablePlaque plaque_from(const FactorChart& chart, Vec x) {
    std::vector<Vec> o{x};
    for (int i = 0; i < 70; ++i) o.push_back(chart.model->map(o.back()));
    const std::vector<Vec> past(o.rbegin() + 1, o.rend());
    return plaque_of_from(chart, o.back(), past, 64);
}

// Equal-weight pool of Cesaro states seeded at the center of every disk.
ParticleMeasure pooled_gibbs(const FactorChart& chart, int n = 300, int particles = 200) {
    CesaroOptions opt;
    opt.iterations = n;
    opt.particles = particles;
    opt.curve = false;
    ParticleMeasure mu;
    std::uint64_t seed = 1;
    for (const Disk& d : chart.model->disks) {
        Vec x(3);
        x << 0.1, d.center[0], d.center[1];
        auto c = cesaro_state(chart, plaque_from(chart, x), opt, seed++).measure;
        if (mu.size() == 0) mu = c;
        else mu.append(c, 1.0);
    }
    mu.normalize();
    return mu;
}

std::size_t points_of_period_dividing(const PeriodicSearch& s, int n) {
    std::size_t c = 0;
    for (const auto& o : s.orbits)
        if (n % o.period == 0) c += o.orbit.size();
    return c;
}

}  // namespace

TEST_CASE("periodic search") {
    SUBCASE("plain solenoid fixed points") {
        auto chart = make_chart(solenoid());
        auto s = find_periodic(chart, 1);
        // theta in {0, 1/2}; fiber z = b(theta) / (1 - a)
        REQUIRE(s.orbits.size() == 2);
        CHECK(s.orbits[0].point[0] == 0.0);
        CHECK(s.orbits[0].point[1] == doctest::Approx(0.6).epsilon(1e-10));
        CHECK(s.orbits[1].point[0] == doctest::Approx(0.5));
        CHECK(s.orbits[1].point[1] == doctest::Approx(-0.6).epsilon(1e-10));
        for (const auto& o : s.orbits) {
            CHECK(std::abs(o.multipliers[0]) == doctest::Approx(3.0));
            CHECK(std::abs(o.multipliers[1]) == doctest::Approx(0.5));
            CHECK(std::abs(o.multipliers[2]) == doctest::Approx(0.5));
            CHECK(o.contracting_count == 2);
            CHECK(o.hyperbolic);
            // the fiber contraction attracts the whole disk
            CHECK(o.stable_size_estimate == 1.0);
        }
    }
    SUBCASE("cat map: Lefschetz counts up to period 5") {
        auto chart = make_chart(cat_model());
        auto s = find_periodic(chart, 5);
        const double lu = (3.0 + std::sqrt(5.0)) / 2.0;
        for (int n = 1; n <= 5; ++n) {
            const auto expected = static_cast<std::size_t>(std::llround(std::pow(lu, n) + std::pow(lu, -n) - 2.0));
            CHECK(points_of_period_dividing(s, n) == expected);
        }
        CHECK(points_of_period_dividing(s, 1) == 1);
        for (const auto& o : s.orbits) CHECK(o.contracting_count == 1);
    }
    SUBCASE("toral counts from the determinant") {
        const IMat a = default_da_matrix();
        for (int p = 1; p <= 3; ++p) {
            IMat b = IMat::Identity(3, 3);
            for (int i = 0; i < p; ++i) b = a * b;
            b -= IMat::Identity(3, 3);
            const double det = std::abs(b.cast<double>().determinant());
            CHECK(toral_periodic_points(a, p).size() == static_cast<std::size_t>(std::llround(det)));
        }
    }
    SUBCASE("modified solenoid: saddle and sinks over theta = 0") {
        auto chart = make_chart(make_modified_solenoid(default_modified_solenoid()).first);
        const SystemModel& m = *chart.model;
        auto s = find_periodic(chart, 1);
        int over_zero = 0, saddles = 0;
        std::vector<double> sinks;
        for (const auto& o : s.orbits) {
            CHECK(m.distance(o.point, m.map(o.point)) < 1e-10);
            if (o.point[0] != 0.0) continue;
            ++over_zero;
            if (o.contracting_count == 1) ++saddles;
            if (o.contracting_count == 2) sinks.push_back(o.point[1]);
        }
        CHECK(over_zero == 3);
        CHECK(saddles == 1);
        REQUIRE(sinks.size() == 2);
        CHECK(sinks[0] < 0.0);
        CHECK(sinks[1] > 0.0);
    }
    SUBCASE("classification survives a perturbed root") {
        auto chart = make_chart(make_modified_solenoid(default_modified_solenoid()).first);
        const SystemModel& m = *chart.model;
        for (const auto& o : find_periodic(chart, 2).orbits) {
            Vec y = o.point;
            y[1] += 1e-9;
            Mat d = Mat::Identity(3, 3);
            for (int i = 0; i < o.period; ++i) {
                d = m.derivative(y) * d;
                y = m.map(y);
            }
            Eigen::EigenSolver<Mat> es(d, false);
            int c = 0;
            for (int k = 0; k < 3; ++k) c += std::abs(es.eigenvalues()[k]) < 1.0;
            CHECK(c == o.contracting_count);
        }
    }
    SUBCASE("period budget") { CHECK_THROWS_AS(find_periodic(make_chart(solenoid()), 13), Error); }
}

TEST_CASE("skeleton verification") {
    SUBCASE("plain solenoid") {
        auto chart = make_chart(solenoid());
        auto sk = select_skeleton(chart, find_periodic(chart, 2).orbits);
        REQUIRE(sk.size() == 1);
        CHECK(sk[0].point[0] == 0.0);
        auto rep = verify_skeleton(chart, sk, 7);
        CHECK(rep.status == SkeletonStatus::Skeleton);
        CHECK(rep.basin_hits[0] == rep.probes);
        CHECK(skeleton_json(rep)["status"] == "SKELETON");
    }
    SUBCASE("two sub-solenoids") {
        auto chart = make_chart(make_two_solenoid(TwoSolenoidSpec{}));
        auto sk = select_skeleton(chart, find_periodic(chart, 1).orbits);
        REQUIRE(sk.size() == 2);
        CHECK(sk[0].point[1] < 0.0);
        CHECK(sk[1].point[1] > 0.0);
        auto rep = verify_skeleton(chart, sk, 7);
        CHECK(rep.cross_hits == 0);
        CHECK(rep.status == SkeletonStatus::Skeleton);
        CHECK(rep.basin_hits[0] > 0);
        CHECK(rep.basin_hits[1] > 0);
    }
    SUBCASE("swapped sub-solenoids: one period-2 orbit") {
        TwoSolenoidSpec spec;
        spec.swap = true;
        auto chart = make_chart(make_two_solenoid(spec));
        auto found = find_periodic(chart, 2);
        CHECK(found.seeds[0] > 0);
        for (const auto& o : found.orbits) CHECK(o.period == 2);
        auto sk = select_skeleton(chart, found.orbits);
        REQUIRE(sk.size() == 1);
        CHECK(verify_skeleton(chart, sk, 7).status == SkeletonStatus::Skeleton);
    }
    SUBCASE("no candidates") {
        auto chart = make_chart(solenoid());
        CHECK(verify_skeleton(chart, {}, 7).status == SkeletonStatus::Fail);
    }
}

TEST_CASE("support structure") {
    SUBCASE("plain solenoid") {
        auto chart = make_chart(solenoid());
        auto sk = select_skeleton(chart, find_periodic(chart, 1).orbits);
        auto mu = pooled_gibbs(chart);
        std::vector<BasinTarget> ts;
        for (const auto& s : sk) ts.push_back(basin_target(s));
        auto g = ergodic_components(chart, mu, ts);
        auto st = support_structure(chart, g, sk);
        REQUIRE(st.components.size() == 1);
        CHECK(st.components[0].connected_components == 1);
        CHECK(st.components[0].leaf_fill == 1.0);
        REQUIRE(st.components[0].skeleton_fill.size() == 1);
        CHECK(st.components[0].skeleton_fill[0].second >= 0.99);
        CHECK(st.skeleton_inside);
    }
    SUBCASE("two sub-solenoids") {
        auto chart = make_chart(make_two_solenoid(TwoSolenoidSpec{}));
        auto sk = select_skeleton(chart, find_periodic(chart, 1).orbits);
        std::vector<BasinTarget> ts;
        for (const auto& s : sk) ts.push_back(basin_target(s));
        auto g = ergodic_components(chart, pooled_gibbs(chart), ts);
        REQUIRE(g.components.size() == 2);
        auto st = support_structure(chart, g, sk);
        CHECK(st.box_margin > 0.1);
        for (const auto& c : st.components) {
            CHECK(c.connected_components == 1);
            CHECK(c.leaf_fill >= 0.99);
        }
        CHECK(st.skeleton_inside);
        auto j = structure_json(st);
        CHECK(j["components"].size() == 2);
    }
    SUBCASE("swapped sub-solenoids: two pieces exchanged by f") {
        TwoSolenoidSpec spec;
        spec.swap = true;
        auto chart = make_chart(make_two_solenoid(spec));
        auto sk = select_skeleton(chart, find_periodic(chart, 2).orbits);
        auto g = ergodic_components(chart, pooled_gibbs(chart), {basin_target(sk.at(0))});
        REQUIRE(g.components.size() == 1);
        auto st = support_structure(chart, g, sk);
        const auto& c = st.components[0];
        CHECK(c.connected_components == 2);
        CHECK(c.cycle == std::vector<int>{1, 0});
        CHECK(c.leaf_fill >= 0.99);
    }
}

TEST_CASE("run-length bitmaps") {
    CHECK(run_length({2, 3, 4, 8}, 10) == std::vector<std::int64_t>{2, 3, 3, 1, 1});
    CHECK(run_length({0, 9}, 10) == std::vector<std::int64_t>{0, 1, 8, 1});
    CHECK(run_length({}, 4) == std::vector<std::int64_t>{4});
}
