#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fmx/experiments/runner.hpp"
#include "fmx/metrics.hpp"

namespace fmx::exp {

struct AggregateOutput {
    std::vector<fs::path> files;
    std::size_t n_seeds = 0;
};

/// Aggregates every series family of a manifest into CSVs beside it:
/// regret runs give aggregate_pseudo.csv and aggregate_realized.csv,
/// learning-curve runs give aggregate_return.csv on an env-step grid.
inline AggregateOutput aggregate_manifest(const RunManifest& m) {
    const fs::path dir = m.path.parent_path();
    const auto& seeds = m.doc.at("seeds");
    if (!seeds.is_array() || seeds.empty()) throw RuntimeFailure("manifest lists no seeds: " + m.path.string());
    auto seed_path = [&](const json& s) {
        const fs::path p = dir / s.at("series_file").get<std::string>();
        if (!fs::exists(p)) throw RuntimeFailure("missing per-seed file " + p.string());
        return p;
    };

    AggregateOutput out;
    out.n_seeds = seeds.size();
    const std::string series = m.doc.at("series").get<std::string>();
    if (series == "regret") {
        std::vector<std::vector<double>> pseudo, realized;
        for (const auto& s : seeds) {
            const CsvTable t = read_csv_file(seed_path(s).string(), regret_columns());
            if (t.rows.empty()) throw RuntimeFailure("empty regret file for seed " + s.at("seed").dump());
            pseudo.push_back(t.values("pseudo_cum"));
            realized.push_back(t.values("realized_cum"));
        }
        try {
            const CurveBundle p = aggregate_seeds(std::move(pseudo), LengthPolicy::Strict);
            const CurveBundle r = aggregate_seeds(std::move(realized), LengthPolicy::Strict);
            for (const auto& [name, bundle] : {std::pair{"aggregate_pseudo.csv", &p}, std::pair{"aggregate_realized.csv", &r}}) {
                const fs::path f = dir / name;
                detail::write_text_file(f, [&](std::ostream& o) { write_aggregate_csv(o, *bundle); });
                out.files.push_back(f);
            }
        } catch (const std::invalid_argument& e) {
            throw RuntimeFailure(std::string("cannot aggregate ") + m.path.string() + ": " + e.what());
        }
        return out;
    }

    if (series != "curve") throw RuntimeFailure("unknown series family '" + series + "' in " + m.path.string());
    std::vector<std::vector<CurvePoint>> curves;
    double last = 0.0;
    for (const auto& s : seeds) {
        const CsvTable t = read_csv_file(seed_path(s).string(), curve_columns());
        std::vector<CurvePoint> pts;
        for (const auto& row : t.rows) pts.push_back({row[0], row[1]});
        if (pts.empty()) throw RuntimeFailure("no completed episodes for seed " + s.at("seed").dump());
        last = std::max(last, pts.back().env_step);
        curves.push_back(std::move(pts));
    }
    double step = m.doc.value("curve_grid_step", 0.0);
    if (!(step > 0.0)) step = std::max(1.0, std::ceil(last / 100.0));
    const std::size_t window = m.doc.value("curve_window", std::size_t{10});
    const std::vector<double> grid = step_grid(last, step);
    std::vector<std::vector<double>> sampled;
    for (const auto& c : curves) sampled.push_back(resample_episodic(c, grid, window));
    const CurveBundle b = aggregate_seeds(std::move(sampled), LengthPolicy::CarryLast, grid);
    const fs::path f = dir / "aggregate_return.csv";
    detail::write_text_file(f, [&](std::ostream& o) { write_aggregate_csv(o, b); });
    out.files.push_back(f);
    return out;
}

inline AggregateOutput aggregate_manifest(const fs::path& manifest) { return aggregate_manifest(read_manifest(manifest)); }

}  // namespace fmx::exp
