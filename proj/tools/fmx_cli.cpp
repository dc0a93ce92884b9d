// fmx: run experiment configs, aggregate seed sweeps, plot curves.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fmx/experiments/aggregate.hpp"
#include "fmx/experiments/config.hpp"
#include "fmx/experiments/plot.hpp"
#include "fmx/experiments/registry.hpp"
#include "fmx/experiments/runner.hpp"
#include "fmx/version.hpp"

namespace fs = std::filesystem;
using namespace fmx;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

int cmd_run(const std::vector<std::string>& configs, std::size_t workers, const std::string& output_dir, bool aggregate,
            bool quiet) {
    for (const auto& path : configs) {
        std::vector<exp::ExperimentConfig> runs;
        runs = exp::load_experiment(path);
        for (const auto& c : runs) {
            exp::RunOptions opt;
            opt.workers = workers;
            opt.quiet = quiet;
            opt.config_dir = fs::path(path).parent_path();
            if (!output_dir.empty()) opt.output_root = output_dir;
            const auto m = exp::run_experiment(c, opt);
            std::cout << m.path.string() << '\n';
            if (aggregate) {
                for (const auto& f : exp::aggregate_manifest(m).files) std::cout << f.string() << '\n';
            }
        }
    }
    return kOk;
}

int cmd_aggregate(const std::vector<std::string>& manifests) {
    for (const auto& m : manifests) {
        for (const auto& f : exp::aggregate_manifest(fs::path(m)).files) std::cout << f.string() << '\n';
    }
    return kOk;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out, const std::string& title,
             const std::vector<std::string>& labels, bool no_bands) {
    if (!labels.empty() && labels.size() != csvs.size()) throw exp::ConfigError("plot: --label count must match the CSV count");
    std::vector<exp::PlotSeries> series;
    for (std::size_t i = 0; i < csvs.size(); ++i)
        series.push_back(exp::load_aggregate_series(csvs[i], labels.empty() ? std::string{} : labels[i]));
    exp::PlotStyle style = exp::default_style_for(csvs.front());
    style.title = title;
    style.bands = !no_bands;
    const std::string svg = exp::render_svg(series, style);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw exp::RuntimeFailure("cannot write " + out);
    f << svg;
    std::cout << out << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fmx: exploration benchmarks, classical and prompted agents, guided PPO"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.fallthrough();

    std::size_t workers = 1;
    std::string output_dir;
    bool quiet = false;
    app.add_option("--workers", workers, "seed-level worker threads")->check(CLI::PositiveNumber);
    app.add_option("--output-dir", output_dir, "root directory for run outputs (overrides output_dir in configs)");
    app.add_flag("-q,--quiet", quiet, "no per-seed progress on stderr");

    auto* run = app.add_subcommand("run", "run one or more experiment configs");
    std::vector<std::string> configs;
    bool then_aggregate = false;
    run->add_option("config", configs, "config file(s)")->required()->check(CLI::ExistingFile);
    run->add_flag("--aggregate", then_aggregate, "aggregate each manifest after running");

    auto* agg = app.add_subcommand("aggregate", "write aggregate CSVs for run manifests");
    std::vector<std::string> manifests;
    agg->add_option("manifest", manifests, "manifest.json file(s)")->required();

    auto* plot = app.add_subcommand("plot", "render aggregate CSVs as one SVG chart");
    std::vector<std::string> csvs;
    std::vector<std::string> labels;
    std::string out;
    std::string title;
    bool no_bands = false;
    plot->add_option("csv", csvs, "aggregate CSV file(s)")->required();
    plot->add_option("--out", out, "output SVG path")->required();
    plot->add_option("--title", title, "chart title");
    plot->add_option("--label", labels, "legend label per CSV (default: run name)");
    plot->add_flag("--no-bands", no_bands, "omit the +/- std bands");

    auto* list_envs = app.add_subcommand("list-envs", "list environment kinds");
    auto* list_agents = app.add_subcommand("list-agents", "list agent kinds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(configs, workers, output_dir, then_aggregate, quiet);
        if (*agg) return cmd_aggregate(manifests);
        if (*plot) return cmd_plot(csvs, out, title, labels, no_bands);
        if (*list_envs) {
            for (const auto& k : exp::env_kinds()) std::cout << k.name << "\t" << k.description << '\n';
            return kOk;
        }
        if (*list_agents) {
            for (const auto& k : exp::agent_kinds()) std::cout << k.name << "\t" << k.description << '\n';
            return kOk;
        }
    } catch (const exp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
