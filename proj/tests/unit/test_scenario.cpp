#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "wrflow/generators.hpp"
#include "wrflow/scenario.hpp"

using namespace wrflow;
using io::Json;

namespace {

Json c2_config()
{
    return Json::parse(R"({
        "dim": 2,
        "r0": {"type": "identity"},
        "projections": {"type": "coordinate_split", "m": 2},
        "measure": {"kind": "energy", "x": [0.7071067811865476, 0.7071067811865476]},
        "depth": 2,
        "samples": 100,
        "master_seed": 7
    })");
}

template <class F>
ErrorKind kind_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidArgument;
}

const CheckResult* find_check(const ReportBundle& b, const std::string& name)
{
    for (const auto& c : b.checks)
        if (c.name == name) return &c;
    return nullptr;
}

} // namespace

TEST_CASE("generate instance examples")
{
    ScenarioConfig cfg = ScenarioConfig::from_json(Json::parse(
        R"({"dim": 4, "r0": {"type": "identity"}, "projections": {"type": "coordinate_split", "m": 4}})"));
    const Instance coords = generate_instance(cfg);
    CHECK(coords.family.alpha() == doctest::Approx(1.0));
    CHECK(coords.family.splitting());

    cfg = ScenarioConfig::from_json(Json::parse(
        R"({"dim": 6, "r0": {"type": "random_psd", "rank": 6}, "projections": {"type": "random_subspace_split", "m": 3}})"));
    const Instance split = generate_instance(cfg);
    CHECK(std::abs(split.family.alpha() - 1.0) <= 1e-10);
    CHECK(split.family.splitting());
    Matrix sum = Matrix::Zero(6, 6);
    for (const auto& p : split.family.projections()) sum += p.matrix();
    CHECK((sum - Matrix::Identity(6, 6)).norm() <= 1e-12);

    cfg = ScenarioConfig::from_json(Json::parse(
        R"({"dim": 5, "r0": {"type": "identity"},
            "projections": {"type": "random_unstructured", "m": 3, "ranks": [2, 2, 3], "blind": 1},
            "measure": {"kind": "trace"}})"));
    const Instance blind = generate_instance(cfg);
    CHECK(std::abs(blind.family.alpha()) <= 1e-12);
    CHECK(blind.warnings.size() == 1);
}

TEST_CASE("generation is deterministic in the master seed")
{
    Json doc = Json::parse(
        R"({"dim": 5, "r0": {"type": "random_psd", "rank": 3},
            "projections": {"type": "random_unstructured", "m": 2}, "master_seed": 11})");
    const Instance a = generate_instance(ScenarioConfig::from_json(doc));
    const Instance b = generate_instance(ScenarioConfig::from_json(doc));
    CHECK((a.r0.matrix() - b.r0.matrix()).norm() == 0.0);
    CHECK((a.family[1].matrix() - b.family[1].matrix()).norm() == 0.0);
    CHECK((a.spec.x - b.spec.x).norm() == 0.0);
    doc["master_seed"] = 12;
    const Instance c = generate_instance(ScenarioConfig::from_json(doc));
    CHECK((a.r0.matrix() - c.r0.matrix()).norm() > 0.0);
}

TEST_CASE("config validation")
{
    Json doc = c2_config();
    doc["depth"] = 0;
    CHECK(kind_of([&] { run_scenario(ScenarioConfig::from_json(doc), "enumerate"); }) == ErrorKind::InvalidConfig);

    doc = c2_config();
    doc["projections"]["m"] = 3;
    CHECK(kind_of([&] { run_scenario(ScenarioConfig::from_json(doc), "alpha"); }) == ErrorKind::InvalidConfig);

    doc = c2_config();
    doc["r0"] = Json{{"type", "mystery"}};
    CHECK(kind_of([&] { ScenarioConfig::from_json(doc); }) == ErrorKind::InvalidConfig);

    doc = c2_config();
    doc.erase("dim");
    CHECK(kind_of([&] { ScenarioConfig::from_json(doc); }) == ErrorKind::InvalidConfig);

    CHECK(kind_of([&] { run_scenario(ScenarioConfig::from_json(c2_config()), "bogus"); }) ==
          ErrorKind::InvalidConfig);

    doc = c2_config();
    doc["measure"]["x"] = Json::array({1.0, 0.0, 0.0});
    CHECK(kind_of([&] { run_scenario(ScenarioConfig::from_json(doc), "alpha"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("budget is checked before any computation")
{
    Json doc = c2_config();
    doc["depth"] = 30;
    CHECK(kind_of([&] { run_scenario(ScenarioConfig::from_json(doc), "enumerate"); }) == ErrorKind::BudgetExceeded);
    doc["node_budget"] = 4;
    doc["depth"] = 3;
    CHECK(kind_of([&] { run_scenario(ScenarioConfig::from_json(doc), "enumerate"); }) == ErrorKind::BudgetExceeded);
    // check skips the exhaustive part instead of failing.
    const auto bundle = run_scenario(ScenarioConfig::from_json(doc), "check");
    CHECK(bundle.summary.contains("exhaustive_skipped"));
}

TEST_CASE("worked example report")
{
    const auto bundle = run_scenario(ScenarioConfig::from_json(c2_config()), "check");
    CHECK(bundle.all_pass);
    const Json& s = bundle.summary;
    CHECK(s["instance"]["contraction"].get<double>() == doctest::Approx(0.5));
    CHECK(s["instance"]["alpha"].get<double>() == doctest::Approx(1.0));
    const auto profile = s["profile"].get<std::vector<double>>();
    REQUIRE(profile.size() == 3);
    CHECK(std::abs(profile[0] - 1.0) <= 1e-12);
    CHECK(std::abs(profile[1] - 0.5) <= 1e-12);
    CHECK(std::abs(profile[2]) <= 1e-12);

    const Json frame = Json::parse(bundle.files.at("frame.json"));
    REQUIRE(frame["atoms"].size() == 2);
    for (const auto& a : frame["atoms"]) {
        const Vector phi = io::vector_from_json(a["vector"]);
        CHECK(std::abs(phi.cwiseAbs().maxCoeff() - 1.0) <= 1e-15);
    }
    CHECK(bundle.files.count("levels.csv") == 1);
    CHECK(bundle.files.count("samples.csv") == 1);
    CHECK(bundle.files.count("balance.csv") == 1);
    CHECK(find_check(bundle, "energy_balance") != nullptr);
    CHECK(find_check(bundle, "span") != nullptr);

    std::istringstream levels(bundle.files.at("levels.csv"));
    std::string header;
    std::getline(levels, header);
    CHECK(header == "n,expectation,bound,std_error,mode");
}

TEST_CASE("embedded config reproduces the report byte for byte")
{
    for (const char* command : {"alpha", "enumerate", "simulate", "frame", "check"}) {
        Json doc = Json::parse(R"({"dim": 4, "r0": {"type": "random_psd", "rank": 3},
            "projections": {"type": "random_subspace_split", "m": 2},
            "measure": {"kind": "energy"}, "depth": 3, "samples": 50, "master_seed": 5,
            "mode": "monte_carlo"})");
        const auto first = run_scenario(ScenarioConfig::from_json(doc), command);
        const auto again = run_scenario(ScenarioConfig::from_json(first.summary["config"]), command);
        CHECK(first.run_id == again.run_id);
        CHECK(first.files == again.files);
        const auto threaded = run_scenario(ScenarioConfig::from_json(doc), command, RunOptions{3});
        CHECK(first.files == threaded.files);
    }
}

TEST_CASE("monte carlo mode and residual measure run")
{
    Json doc = Json::parse(R"({"dim": 3, "r0": {"type": "identity"},
        "projections": {"type": "random_subspace_split", "m": 2},
        "measure": {"kind": "residual_binary"}, "depth": 4, "samples": 300, "mode": "monte_carlo"})");
    const auto bundle = run_scenario(ScenarioConfig::from_json(doc), "check");
    CHECK(bundle.all_pass);
    CHECK(find_check(bundle, "monte_carlo_vs_exhaustive") != nullptr);
    CHECK(find_check(bundle, "measure_conjugacy") != nullptr);
}

TEST_CASE("write bundle")
{
    const auto bundle = run_scenario(ScenarioConfig::from_json(c2_config()), "enumerate");
    const auto root = std::filesystem::temp_directory_path() / "wrflow_bundle_test";
    std::filesystem::remove_all(root);
    const std::string dir = write_bundle(bundle, root.string());
    CHECK(std::filesystem::path(dir).filename() == bundle.run_id);
    for (const auto& [name, contents] : bundle.files) {
        std::ifstream in(std::filesystem::path(dir) / name, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(ss.str() == contents);
    }
    std::filesystem::remove_all(root);
}

TEST_CASE("property: generator soundness over random configs")
{
    oracle::Rand rng(61);
    for (int t = 0; t < 1000; ++t) {
        const int d = rng.integer(1, 8);
        Json doc;
        doc["dim"] = d;
        doc["master_seed"] = t;
        switch (rng.integer(0, 3)) {
        case 0: doc["r0"] = Json{{"type", "identity"}}; break;
        case 1: doc["r0"] = Json{{"type", "random_psd"}, {"rank", rng.integer(1, d)}, {"trace", 0.5 + rng.uniform()}}; break;
        case 2: doc["r0"] = Json{{"type", "identity_on_subspace"}, {"rank", rng.integer(1, d)}}; break;
        default: doc["r0"] = Json{{"type", "explicit"}, {"matrix", io::matrix_to_json(rng.psd(d, d))}}; break;
        }
        const int m = rng.integer(1, d);
        switch (rng.integer(0, 2)) {
        case 0: doc["projections"] = Json{{"type", "coordinate_split"}, {"m", m}}; break;
        case 1: doc["projections"] = Json{{"type", "random_subspace_split"}, {"m", m}}; break;
        default: {
            const int blind = rng.integer(0, d - 1);
            std::vector<int> ranks;
            for (int j = 0; j < m; ++j) ranks.push_back(rng.integer(1, d - blind));
            doc["projections"] = Json{{"type", "random_unstructured"}, {"m", m}, {"ranks", ranks}, {"blind", blind}};
            break;
        }
        }
        doc["measure"] = Json{{"kind", "trace"}};
        const Instance inst = generate_instance(ScenarioConfig::from_json(doc));
        CHECK_NOTHROW(validate_psd(inst.r0.matrix()));
        for (const auto& p : inst.family.projections()) CHECK_NOTHROW(validate_projection(p.matrix()));
        if (doc["projections"]["type"] != "random_unstructured") CHECK(inst.family.splitting());
    }
}
