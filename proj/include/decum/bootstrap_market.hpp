#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "decum/mc_simulator.hpp"
#include "decum/rng.hpp"

namespace decum {

/// Paired monthly real gross returns.
struct ReturnSeries {
    std::vector<std::string> periods;  ///< YYYY-MM, consecutive months
    std::vector<double> stock;
    std::vector<double> bond;

    std::size_t size() const { return stock.size(); }
};

void validate(const ReturnSeries& series);

/// CSV with header `period,stock_gross_real,bond_gross_real`.
ReturnSeries load_return_series(std::istream& is);
ReturnSeries load_return_series(const std::string& path);
void write_return_series(std::ostream& os, const ReturnSeries& series);

/// Monthly series drawn from the model, labelled from 1926-01 onward.
ReturnSeries synthetic_series(const MarketModel& model, std::size_t months, std::uint64_t seed);

struct BootstrapConfig {
    double blocksize = 0.25;        ///< expected block length in years
    std::size_t resamples = 100000;
    std::uint64_t seed = 0;
    double horizon = 30.0;          ///< years
    int months_per_period = 12;
    bool debug = false;             ///< keep source indices for every resampled month
};

void validate(const BootstrapConfig& config);

struct Resample {
    std::vector<double> stock;
    std::vector<double> bond;
    std::vector<std::size_t> source;  ///< series index per month; filled in debug mode
};

/// Geometric block length with mean `mean_months`, capped at `cap`.
std::size_t sample_block_length(double mean_months, std::size_t cap, RandomStream& rng);

/// Stationary block bootstrap of horizon * 12 months with circular wraparound.
Resample stationary_block_resample(const ReturnSeries& series, const BootstrapConfig& config, RandomStream& rng);

/// Per-period gross returns of every resample, ready to feed the simulator.
/// Insolvent periods compound the bond with `borrow_spread / 12` added monthly.
ReturnSource bootstrap_returns(const ReturnSeries& series, const BootstrapConfig& config, int periods,
                               double borrow_spread = 0.0, int workers = 1);

SummaryStats backtest(const Strategy& strategy, const Scenario& scenario, const ReturnSeries& series,
                      const BootstrapConfig& config, double borrow_spread = 0.0, int workers = 1);

/// Source month of each resampled month for the first `count` resamples.
void write_provenance_csv(std::ostream& os, const ReturnSeries& series, const BootstrapConfig& config,
                          std::size_t count, const std::string& banner);

}  // namespace decum
