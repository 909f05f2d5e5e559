#include "decum/bootstrap_market.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "decum/error.hpp"
#include "decum/format.hpp"
#include "decum/parallel.hpp"

namespace decum {
namespace {

// YYYY-MM; years past 9999 are allowed so long synthetic series stay labelled.
long long month_index(const std::string& label) {
    const std::size_t dash = label.find('-');
    auto digits = [](const std::string& t) {
        return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
    };
    const std::string year = dash == std::string::npos ? "" : label.substr(0, dash);
    const std::string month = dash == std::string::npos ? "" : label.substr(dash + 1);
    if (year.size() < 4 || year.size() > 9 || month.size() != 2 || !digits(year) || !digits(month))
        fail(ErrorCode::Parse, "bad period label '" + label + "' (expected YYYY-MM)");
    const int m = std::stoi(month);
    if (m < 1 || m > 12) fail(ErrorCode::Parse, "bad period label '" + label + "' (month out of range)");
    return std::stoll(year) * 12 + m - 1;
}

std::string month_label(long long index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02lld", index / 12, index % 12 + 1);
    return buf;
}

double parse_return(const std::string& field, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != field.size())
        fail(ErrorCode::Parse, "line " + std::to_string(line) + ": bad number '" + field + "'");
    return v;
}

std::size_t months_needed(const BootstrapConfig& c) {
    return static_cast<std::size_t>(std::llround(c.horizon * 12.0));
}

}  // namespace

void validate(const ReturnSeries& s) {
    require(s.stock.size() == s.bond.size() && s.periods.size() == s.stock.size(),
            "return series: column lengths differ", ErrorCode::Parse);
    require(s.size() >= 2, "return series: need at least two months", ErrorCode::Parse);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s.stock[i] > 0.0) || !(s.bond[i] > 0.0) || !std::isfinite(s.stock[i]) || !std::isfinite(s.bond[i]))
            fail(ErrorCode::Parse, "return series: nonpositive gross return at " + s.periods[i]);
        if (i > 0 && month_index(s.periods[i]) != month_index(s.periods[i - 1]) + 1)
            fail(ErrorCode::Parse, "return series: months not consecutive at " + s.periods[i]);
    }
}

ReturnSeries load_return_series(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::Parse, "return series: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line != "period,stock_gross_real,bond_gross_real")
        fail(ErrorCode::Parse, "return series: unexpected header '" + line + "'");
    ReturnSeries s;
    std::size_t number = 1;
    while (std::getline(is, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream row(line);
        for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
        if (fields.size() != 3)
            fail(ErrorCode::Parse, "line " + std::to_string(number) + ": expected 3 fields");
        month_index(fields[0]);
        s.periods.push_back(fields[0]);
        s.stock.push_back(parse_return(fields[1], number));
        s.bond.push_back(parse_return(fields[2], number));
    }
    validate(s);
    return s;
}

ReturnSeries load_return_series(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::Io, "cannot open " + path);
    return load_return_series(is);
}

void write_return_series(std::ostream& os, const ReturnSeries& s) {
    os << "period,stock_gross_real,bond_gross_real\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        os << s.periods[i] << ',' << shortest(s.stock[i]) << ',' << shortest(s.bond[i]) << '\n';
}

ReturnSeries synthetic_series(const MarketModel& model, std::size_t months, std::uint64_t seed) {
    ReturnSeries s;
    s.stock.resize(months);
    s.bond.resize(months);
    const long long start = 1926 * 12;
    for (std::size_t i = 0; i < months; ++i) {
        RandomStream rng(seed, i, 0);
        const PeriodReturn r = sample_period_return(model, 1.0 / 12.0, false, rng);
        s.stock[i] = r.stock_gross;
        s.bond[i] = r.bond_gross;
        s.periods.push_back(month_label(start + static_cast<long long>(i)));
    }
    return s;
}

void validate(const BootstrapConfig& c) {
    require(c.blocksize > 0.0 && std::isfinite(c.blocksize), "bootstrap: blocksize must be positive");
    require(c.resamples >= 1, "bootstrap: need at least one resample");
    require(c.horizon > 0.0 && months_needed(c) >= 1, "bootstrap: horizon must be positive");
    require(c.months_per_period >= 1, "bootstrap: months per period must be at least 1");
}

std::size_t sample_block_length(double mean_months, std::size_t cap, RandomStream& rng) {
    const double v = 1.0 / mean_months;
    std::size_t k = 1;
    if (v < 1.0) {
        // Inversion of Pr(b = k) = (1 - v)^(k - 1) v.
        const double draw = std::floor(std::log(rng.uniform()) / std::log1p(-v));
        k = draw >= static_cast<double>(cap) ? cap : 1 + static_cast<std::size_t>(draw);
    }
    return std::min(k, cap);
}

Resample stationary_block_resample(const ReturnSeries& series, const BootstrapConfig& config, RandomStream& rng) {
    require(series.size() >= 2, "bootstrap: series too short");
    const std::size_t n = series.size();
    const std::size_t months = months_needed(config);
    Resample out;
    out.stock.reserve(months);
    out.bond.reserve(months);
    const double mean = 12.0 * config.blocksize;
    while (out.stock.size() < months) {
        std::size_t start = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
        if (start >= n) start = n - 1;
        const std::size_t len = sample_block_length(mean, n, rng);
        for (std::size_t j = 0; j < len && out.stock.size() < months; ++j) {
            const std::size_t at = (start + j) % n;
            out.stock.push_back(series.stock[at]);
            out.bond.push_back(series.bond[at]);
            if (config.debug) out.source.push_back(at);
        }
    }
    return out;
}

ReturnSource bootstrap_returns(const ReturnSeries& series, const BootstrapConfig& config, int periods,
                               double borrow_spread, int workers) {
    validate(series);
    validate(config);
    const std::size_t months = months_needed(config);
    require(months == static_cast<std::size_t>(periods) * static_cast<std::size_t>(config.months_per_period),
            "bootstrap: horizon does not match the rebalancing schedule", ErrorCode::Mismatch);
    const auto per = static_cast<std::size_t>(periods);
    // [resample][period] -> {stock, bond, insolvent bond}
    auto table = std::make_shared<std::vector<double>>(config.resamples * per * 3);
    const int mpp = config.months_per_period;
    parallel_for(config.resamples, workers, [&](std::size_t r) {
        RandomStream rng(config.seed, r, 0);
        BootstrapConfig quiet = config;
        quiet.debug = false;
        const Resample path = stationary_block_resample(series, quiet, rng);
        double* row = table->data() + r * per * 3;
        for (std::size_t t = 0; t < per; ++t) {
            double gs = 1.0, gb = 1.0, gc = 1.0;
            for (int k = 0; k < mpp; ++k) {
                const std::size_t at = t * static_cast<std::size_t>(mpp) + static_cast<std::size_t>(k);
                gs *= path.stock[at];
                gb *= path.bond[at];
                gc *= path.bond[at] + borrow_spread / 12.0;
            }
            row[3 * t] = gs;
            row[3 * t + 1] = gb;
            row[3 * t + 2] = gc;
        }
    });
    const std::size_t count = config.resamples;
    return [table, per, count](std::size_t path, int period, bool insolvent) {
        if (path >= count || period < 0 || static_cast<std::size_t>(period) >= per)
            fail(ErrorCode::Range, "bootstrap: resample index out of range");
        const double* cell = table->data() + (path * per + static_cast<std::size_t>(period)) * 3;
        return PeriodReturn{cell[0], insolvent ? cell[2] : cell[1]};
    };
}

SummaryStats backtest(const Strategy& strategy, const Scenario& scenario, const ReturnSeries& series,
                      const BootstrapConfig& config, double borrow_spread, int workers) {
    validate(scenario);
    require(std::abs(config.horizon - scenario.horizon) < 1e-9, "backtest: bootstrap horizon differs from scenario",
            ErrorCode::Mismatch);
    const ReturnSource source = bootstrap_returns(series, config, scenario.rebalances, borrow_spread, workers);
    return simulate_summary(scenario, strategy, source, config.resamples, workers);
}

void write_provenance_csv(std::ostream& os, const ReturnSeries& series, const BootstrapConfig& config,
                          std::size_t count, const std::string& banner) {
    validate(series);
    validate(config);
    BootstrapConfig traced = config;
    traced.debug = true;
    os << "# " << banner << '\n' << "resample,month,source_index,source_period\n";
    for (std::size_t r = 0; r < std::min(count, config.resamples); ++r) {
        RandomStream rng(config.seed, r, 0);
        const Resample path = stationary_block_resample(series, traced, rng);
        for (std::size_t m = 0; m < path.source.size(); ++m)
            os << r << ',' << m << ',' << path.source[m] << ',' << series.periods[path.source[m]] << '\n';
    }
}

}  // namespace decum
