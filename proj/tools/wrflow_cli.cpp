#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "wrflow/scenario.hpp"

namespace {

wrflow::io::Json read_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw wrflow::Error(wrflow::ErrorKind::InvalidConfig, "cannot open config " + path);
    try {
        return wrflow::io::Json::parse(in);
    } catch (const wrflow::io::Json::exception& e) {
        throw wrflow::Error(wrflow::ErrorKind::InvalidConfig, path + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Weighted-residual operator flow experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "runs";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::optional<std::string> mode;
    std::optional<std::size_t> depth;
    std::optional<std::size_t> samples;

    const char* commands[][2] = {
        {"simulate", "sample branches and report extinction statistics"},
        {"enumerate", "exhaustive expectation profiles and invariant checks"},
        {"frame", "extract frame atoms along one branch"},
        {"alpha", "report alpha, the contraction factor and splitting status"},
        {"check", "run the full invariant suite on an instance"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "scenario JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output root; the run directory is named by the config hash");
        sub->add_option("--seed", seed, "override master_seed");
        sub->add_option("--threads", threads, "sampling workers")->check(CLI::PositiveNumber);
        sub->add_option("--mode", mode, "exhaustive or monte_carlo")
            ->check(CLI::IsMember({"exhaustive", "monte_carlo"}));
        sub->add_option("--depth", depth, "profile depth");
        sub->add_option("--samples", samples, "Monte Carlo samples");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        wrflow::io::Json doc = read_config(config_path);
        if (seed) doc["master_seed"] = *seed;
        if (mode) doc["mode"] = *mode;
        if (depth) doc["depth"] = *depth;
        if (samples) doc["samples"] = *samples;
        const auto cfg = wrflow::ScenarioConfig::from_json(doc);

        const auto bundle = wrflow::run_scenario(cfg, command, wrflow::RunOptions{threads});
        const std::string dir = wrflow::write_bundle(bundle, out_dir);

        std::cout << command << " " << bundle.run_id << " -> " << dir << "\n";
        for (const auto& w : bundle.summary["instance"]["warnings"]) std::cout << "warning: " << w.get<std::string>() << "\n";
        for (const auto& c : bundle.checks)
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold
                      << "\n";
        return bundle.all_pass ? 0 : 1;
    } catch (const wrflow::Error& e) {
        std::cerr << "error [" << wrflow::to_string(e.kind()) << "] in " << command << ": " << e.what() << "\n";
        return 2;
    }
}
