#include "doctest.h"
#include "ugibbs/experiment.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ugibbs;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Small enough for a few seconds per run.
const char* kSmall = R"(system = solenoid
seed = 7
iterations = 100
particles = 100
lyapunov_steps = 10000
hyperbolic_blocks = 1000
verify_samples = 200
labelled = 2000
probes = 8
battery = 3
battery_period = 2
max_period = 1
)";

struct Proc {
    int code = -1;
    std::string out, err;
};

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "ugibbs_test_experiment" / name;
    fs::create_directories(p.parent_path());
    return p;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const fs::path p = scratch(name);
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Proc cli(const std::string& args) {
    const char* exe = std::getenv("UGIBBS_CLI");
    REQUIRE(exe != nullptr);
    const fs::path err = scratch("stderr.txt");
    const std::string cmd = std::string("\"") + exe + "\" " + args + " 2>\"" + err.string() + "\"";
    Proc p;
    FILE* f = popen(cmd.c_str(), "r");
    REQUIRE(f != nullptr);
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) p.out.append(buf, n);
    const int status = pclose(f);
    p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    p.err = slurp(err);
    return p;
}

std::string error_kind(const Proc& p) {
    const auto j = json::parse(p.err, nullptr, false);
    return j.is_object() && j.contains("error") ? j["error"].get<std::string>() : "";
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("defaults, comments and types") {
        auto cfg = parse_config("# comment\nsystem = solenoid\nseed = 18446744073709551615\n\nk = 5  \na = 0.25\n");
        CHECK(cfg.system == "solenoid");
        CHECK(cfg.seed() == 18446744073709551615ull);
        CHECK(cfg.integer("k") == 5);
        CHECK(cfg.real("a") == 0.25);
        CHECK(cfg.real("b_radius") == 0.3);
        CHECK(cfg.integer("iterations") == 2000);
        CHECK(cfg.integer("particles") == 500);
        CHECK(cfg.tasks() == std::vector<std::string>{"verify", "gibbs", "lyapunov", "entropy", "skeleton"});
        CHECK(cfg.to_json()["system"] == "solenoid");
    }
    SUBCASE("rejections") {
        const std::string base = "system = solenoid\nseed = 1\n";
        const std::vector<std::string> bad_configs{
            base + "colour = red\n", base + "seed = 2\n", "system = solenoid\n", base + "tasks = verify,dance\n",
            base + "particles = 0\n", base + "iterations = -5\n", base + "k = three\n", base + "swap = true\n",
            base + "a = nan\n", "seed = 1\n", "system = moebius\nseed = 1\n", base + "no equals sign\n",
            "system = solenoid\nseed = -1\n"};
        for (const std::string& bad : bad_configs) {
            CAPTURE(bad);
            CHECK_THROWS_AS(parse_config(bad), Error);
            try {
                parse_config(bad);
            } catch (const Error& e) {
                CHECK(e.code() == ErrorCode::ConfigError);
            }
        }
    }
    SUBCASE("system keys belong to their system") {
        CHECK_NOTHROW(parse_config("system = two_solenoid\nseed = 1\nswap = true\n"));
        CHECK_NOTHROW(parse_config("system = derived_anosov\nseed = 1\nmatrix = 2 1 1 1 1 0 0 0 1\n"));
        CHECK_THROWS_AS(parse_config("system = cat_map\nseed = 1\namplitude = 0.1\n"), Error);
    }
    SUBCASE("override") {
        auto cfg = parse_config("system = solenoid\nseed = 1\n");
        override_value(cfg, "seed", "99");
        CHECK(cfg.seed() == 99);
        CHECK_THROWS_AS(override_value(cfg, "seed", "x"), Error);
        CHECK_THROWS_AS(override_value(cfg, "nope", "1"), Error);
    }
    SUBCASE("every listed system builds") {
        const json sys = list_systems()["systems"];
        CHECK(sys.size() == 5);
        for (const auto& [name, keys] : sys.items()) {
            auto m = build_system(parse_config("system = " + name + "\nseed = 1\n"));
            CHECK(m.state_dim >= 2);
        }
    }
}

TEST_CASE("summary helpers") {
    json s{{"timestamp", "2020-01-01T00:00:00Z"}, {"a", {{"b", 1}, {"c", json::array({1.5, nullptr})}}}};
    json t = s;
    t["timestamp"] = "2030-01-01T00:00:00Z";
    CHECK(canonical_summary(s) == canonical_summary(t));
    CHECK(canonical_summary(s).find("timestamp") == std::string::npos);
    const std::string csv = flatten_csv(s["a"]);
    CHECK(csv.rfind("key,value\n", 0) == 0);
    CHECK(csv.find("b,1") != std::string::npos);
}

TEST_CASE("command line") {
    const fs::path small = write_file("small.cfg", kSmall);

    SUBCASE("config errors exit 2 with a JSON error") {
        const auto bad = write_file("bad.cfg", std::string(kSmall) + "colour = red\n");
        auto p = cli("run --config \"" + bad.string() + "\"");
        CHECK(p.code == 2);
        CHECK(error_kind(p) == "ConfigError");
        const auto noseed = write_file("noseed.cfg", "system = solenoid\n");
        p = cli("run --config \"" + noseed.string() + "\"");
        CHECK(p.code == 2);
        CHECK(error_kind(p) == "ConfigError");
        p = cli("run");
        CHECK(p.code == 2);
        CHECK(error_kind(p) == "ConfigError");
        p = cli("run --config \"" + scratch("missing.cfg").string() + "\"");
        CHECK(p.code == 2);
    }

    SUBCASE("seeded runs are reproducible and comparable") {
        const fs::path a = scratch("run_a"), b = scratch("run_b"), c = scratch("run_c");
        for (const auto& d : {a, b, c}) fs::remove_all(d);
        auto pa = cli("run --config \"" + small.string() + "\" --out \"" + a.string() + "\"");
        REQUIRE(pa.code == 0);
        auto pb = cli("run --config \"" + small.string() + "\" --out \"" + b.string() + "\" --workers 1");
        REQUIRE(pb.code == 0);
        const json sa = json::parse(slurp(a / "summary.json")), sb = json::parse(slurp(b / "summary.json"));
        CHECK(json::parse(pa.out) == sa);
        CHECK(sa["status"] == "PASS");
        CHECK(sa["schema_version"] == 1);
        CHECK(canonical_summary(sa) == canonical_summary(sb));
        for (const auto& e : fs::directory_iterator(a))
            if (e.path().extension() == ".csv") CHECK(slurp(e.path()) == slurp(b / e.path().filename()));

        // log 3 within 2%
        const double h = sa["tasks"]["entropy"]["h_vol"].get<double>();
        CHECK(h >= 1.076);
        CHECK(h <= 1.121);

        auto cmp = cli("compare \"" + a.string() + "\" \"" + b.string() + "\"");
        REQUIRE(cmp.code == 0);
        const json d = json::parse(cmp.out);
        CHECK(d["diff"].empty());
        CHECK(d["certificate_lost"] == false);
        CHECK(d["delta_a"] == 0.0);

        REQUIRE(cli("run --config \"" + small.string() + "\" --out \"" + c.string() + "\" --seed 8").code == 0);
        const json sc = json::parse(slurp(c / "summary.json"));
        CHECK(sc["config"]["seed"] == 8);
        CHECK(canonical_summary(sc) != canonical_summary(sa));

        const fs::path cat = scratch("run_cat");
        fs::remove_all(cat);
        const auto cat_cfg = write_file("cat.cfg", "system = cat_map\nseed = 3\ntasks = verify\n");
        REQUIRE(cli("run --config \"" + cat_cfg.string() + "\" --out \"" + cat.string() + "\"").code == 0);
        auto bad = cli("compare \"" + a.string() + "\" \"" + cat.string() + "\"");
        CHECK(bad.code == 1);
        CHECK(error_kind(bad) == "IncompatibleSystems");

        auto csv = cli("compare \"" + a.string() + "\" \"" + b.string() + "\" --format csv");
        CHECK(csv.code == 0);
        CHECK(csv.out.rfind("key,value\n", 0) == 0);
    }

    SUBCASE("list-systems") {
        auto p = cli("list-systems");
        REQUIRE(p.code == 0);
        const json j = json::parse(p.out);
        for (const char* s : {"solenoid", "modified_solenoid", "two_solenoid", "derived_anosov", "cat_map"})
            CHECK(j["systems"].contains(s));
        CHECK(j["run_keys"]["seed"] == "required");
    }
}
