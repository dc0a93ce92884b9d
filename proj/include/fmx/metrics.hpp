#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmx {

// ---------------------------------------------------------------------------
// Regret

/// series[t] = sum_{s<=t} (theta* - theta[a_s])
inline std::vector<double> pseudo_regret(std::span<const std::size_t> actions, std::span<const double> thetas) {
    if (thetas.empty()) throw std::invalid_argument("pseudo_regret: empty theta vector");
    const double best = *std::max_element(thetas.begin(), thetas.end());
    std::vector<double> out(actions.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < actions.size(); ++t) {
        if (actions[t] >= thetas.size()) throw std::out_of_range("pseudo_regret: arm index out of range");
        acc += best - thetas[actions[t]];
        out[t] = acc;
    }
    return out;
}

/// series[t] = (t+1) * theta* - sum_{s<=t} r_s   (t is 0-based)
inline std::vector<double> realized_regret(std::span<const int> rewards, double theta_star) {
    std::vector<double> out(rewards.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        if (rewards[t] != 0 && rewards[t] != 1) throw std::invalid_argument("realized_regret: rewards must be 0 or 1");
        sum += rewards[t];
        out[t] = static_cast<double>(t + 1) * theta_star - sum;
    }
    return out;
}

struct RegretStep {
    std::size_t t = 0;  // 1-based
    std::size_t arm = 0;
    int reward = 0;
    double pseudo_increment = 0.0;
};

/// Per-step bandit log with both cumulative regret variants.
class RegretRecord {
public:
    explicit RegretRecord(std::vector<double> thetas) : thetas_(std::move(thetas)) {
        if (thetas_.empty()) throw std::invalid_argument("RegretRecord: empty theta vector");
        theta_star_ = *std::max_element(thetas_.begin(), thetas_.end());
    }

    void push(std::size_t arm, int reward) {
        if (arm >= thetas_.size()) throw std::out_of_range("RegretRecord: arm index out of range");
        if (reward != 0 && reward != 1) throw std::invalid_argument("RegretRecord: reward must be 0 or 1");
        const double inc = theta_star_ - thetas_[arm];
        steps_.push_back({steps_.size() + 1, arm, reward, inc});
        reward_sum_ += reward;
        pseudo_.push_back((pseudo_.empty() ? 0.0 : pseudo_.back()) + inc);
        realized_.push_back(static_cast<double>(steps_.size()) * theta_star_ - reward_sum_);
    }

    const std::vector<RegretStep>& steps() const { return steps_; }
    const std::vector<double>& pseudo() const { return pseudo_; }
    const std::vector<double>& realized() const { return realized_; }
    double theta_star() const { return theta_star_; }
    const std::vector<double>& thetas() const { return thetas_; }
    std::size_t size() const { return steps_.size(); }

private:
    std::vector<double> thetas_;
    double theta_star_ = 0.0;
    std::vector<RegretStep> steps_;
    std::vector<double> pseudo_;
    std::vector<double> realized_;
    double reward_sum_ = 0.0;
};

// ---------------------------------------------------------------------------
// Cross-seed aggregation

struct CurveBundle {
    std::vector<double> x;
    std::vector<std::vector<double>> series;  // one per seed, all x.size() long
    std::vector<double> mean;
    std::vector<double> stddev;  // population
    std::size_t n_seeds() const { return series.size(); }
};

enum class LengthPolicy {
    Strict,     // unequal lengths are an error (regret series)
    CarryLast,  // right-pad shorter series with their final value (episodic curves)
};

/// Pointwise mean and population std. `x` defaults to 1..n.
inline CurveBundle aggregate_seeds(std::vector<std::vector<double>> series, LengthPolicy policy = LengthPolicy::Strict,
                                   std::vector<double> x = {}) {
    if (series.empty()) throw std::invalid_argument("aggregate_seeds: no series");
    std::size_t n = 0;
    for (const auto& s : series) {
        if (s.empty()) throw std::invalid_argument("aggregate_seeds: empty series");
        n = std::max(n, s.size());
    }
    for (auto& s : series) {
        if (s.size() == n) continue;
        if (policy == LengthPolicy::Strict) throw std::invalid_argument("aggregate_seeds: series lengths differ");
        s.resize(n, s.back());
    }
    if (x.empty()) {
        x.resize(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
    } else if (x.size() != n) {
        throw std::invalid_argument("aggregate_seeds: x grid length does not match the series");
    }
    CurveBundle b;
    b.x = std::move(x);
    b.mean.assign(n, 0.0);
    b.stddev.assign(n, 0.0);
    const double k = static_cast<double>(series.size());
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& s : series) sum += s[i];
        const double m = sum / k;
        double sq = 0.0;
        for (const auto& s : series) sq += (s[i] - m) * (s[i] - m);
        b.mean[i] = m;
        b.stddev[i] = std::sqrt(sq / k);
    }
    b.series = std::move(series);
    return b;
}

struct CurvePoint {
    double env_step = 0.0;
    double value = 0.0;
};

/// Samples an episodic learning curve onto `grid`: at each grid step, the
/// mean return of the last `window` episodes completed by then (0 before the first).
inline std::vector<double> resample_episodic(const std::vector<CurvePoint>& episodes, const std::vector<double>& grid,
                                             std::size_t window = 1) {
    if (window < 1) throw std::invalid_argument("resample_episodic: window must be >= 1");
    std::vector<double> out(grid.size(), 0.0);
    std::size_t next = 0;
    double window_sum = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (next < episodes.size() && episodes[next].env_step <= grid[g]) {
            window_sum += episodes[next].value;
            if (next >= window) window_sum -= episodes[next - window].value;
            ++next;
        }
        if (next > 0) out[g] = window_sum / static_cast<double>(std::min(next, window));
    }
    return out;
}

/// Evenly spaced grid step, 2*step, ..., up to and including `last`.
inline std::vector<double> step_grid(double last, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("step_grid: step must be positive");
    std::vector<double> g;
    for (double x = step; x <= last + 1e-9; x += step) g.push_back(x);
    return g;
}

/// Keeps every `stride`-th point of a long curve plus the final one.
inline std::vector<std::size_t> thinning_indices(std::size_t n, std::size_t max_points) {
    std::vector<std::size_t> idx;
    if (n == 0) return idx;
    const std::size_t stride = std::max<std::size_t>(1, (n + max_points - 1) / std::max<std::size_t>(1, max_points));
    for (std::size_t i = stride - 1; i < n; i += stride) idx.push_back(i);
    if (idx.empty() || idx.back() != n - 1) idx.push_back(n - 1);
    return idx;
}

// ---------------------------------------------------------------------------
// CSV: regret `t,arm,reward,pseudo_cum,realized_cum`; learning curve
// `env_step,episodic_return,seed`; aggregate `x,mean,std,n_seeds`.

inline std::string format_number(double v) {
    if (v == 0.0) return "0";  // also folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_regret_csv(std::ostream& out, const RegretRecord& r) {
    out << "t,arm,reward,pseudo_cum,realized_cum\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
        const auto& s = r.steps()[i];
        out << s.t << ',' << s.arm << ',' << s.reward << ',' << format_number(r.pseudo()[i]) << ','
            << format_number(r.realized()[i]) << '\n';
    }
}

struct EpisodeRow {
    std::size_t env_step = 0;
    double episodic_return = 0.0;
};

inline void write_learning_curve_csv(std::ostream& out, const std::vector<EpisodeRow>& rows, std::uint64_t seed) {
    out << "env_step,episodic_return,seed\n";
    for (const auto& r : rows) out << r.env_step << ',' << format_number(r.episodic_return) << ',' << seed << '\n';
}

inline void write_aggregate_csv(std::ostream& out, const CurveBundle& b) {
    out << "x,mean,std,n_seeds\n";
    for (std::size_t i = 0; i < b.x.size(); ++i) {
        out << format_number(b.x[i]) << ',' << format_number(b.mean[i]) << ',' << format_number(b.stddev[i]) << ','
            << b.n_seeds() << '\n';
    }
}

/// Minimal numeric CSV table: header names plus rows of doubles.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw std::runtime_error("csv: missing column '" + name + "'");
    }

    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> v;
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(r[c]);
        return v;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    return cells;
}

/// Parses a numeric CSV and checks its header against `expected`.
inline CsvTable read_csv(std::istream& in, const std::vector<std::string>& expected, const std::string& label = "csv") {
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(label + ": empty file");
    t.header = split_csv_line(line);
    if (!expected.empty() && t.header != expected) throw std::runtime_error(label + ": unexpected header '" + line + "'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw std::runtime_error(label + ": wrong column count on line " + std::to_string(lineno));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (c.empty() || end != c.c_str() + c.size())
                throw std::runtime_error(label + ": non-numeric cell '" + c + "' on line " + std::to_string(lineno));
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path, const std::vector<std::string>& expected) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_csv(in, expected, path);
}

inline const std::vector<std::string>& regret_columns() {
    static const std::vector<std::string> c{"t", "arm", "reward", "pseudo_cum", "realized_cum"};
    return c;
}
inline const std::vector<std::string>& curve_columns() {
    static const std::vector<std::string> c{"env_step", "episodic_return", "seed"};
    return c;
}
inline const std::vector<std::string>& aggregate_columns() {
    static const std::vector<std::string> c{"x", "mean", "std", "n_seeds"};
    return c;
}

}  // namespace fmx
