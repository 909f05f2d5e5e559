#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "decum/dp_optimizer.hpp"
#include "decum/market_model.hpp"

namespace decum {

/// Constant-weight rebalancing with a constant withdrawal.
struct FixedPolicy {
    double equity = 0.4;
    double withdrawal = 40.0;
};

/// Either stored tables from the solver or a fixed rule.
class Strategy {
public:
    Strategy(const Policy& policy) : rule_(&policy) {}  // NOLINT: implicit by intent
    Strategy(FixedPolicy fixed) : rule_(fixed) {}       // NOLINT

    double withdrawal(int n, double w_minus) const;
    double allocation(int n, double w_plus, bool final_date) const;
    const Policy* policy() const;

private:
    std::variant<const Policy*, FixedPolicy> rule_;
};

/// Gross returns for (path, period). `insolvent` selects the spread-adjusted bond.
using ReturnSource = std::function<PeriodReturn(std::size_t path, int period, bool insolvent)>;

/// Synthetic-market source: each (path, period) owns the Philox substream (seed, path, period).
ReturnSource model_returns(const MarketModel& model, double dt, std::uint64_t seed);

struct PathRecord {
    std::vector<double> wealth;      ///< before withdrawal, t_0..t_M
    std::vector<double> withdrawal;
    std::vector<double> equity;      ///< chosen stock fraction (0 when insolvent and at t_M)
    double terminal = 0.0;           ///< W_T after the final withdrawal
};

/// Column-major store of many paths: entry (n, i) lives at n * paths + i.
struct Ensemble {
    int dates = 0;  ///< M + 1
    std::size_t paths = 0;
    double q_min = 0.0, q_max = 0.0;
    std::vector<double> wealth;
    std::vector<double> withdrawal;
    std::vector<double> equity;
    std::vector<std::uint8_t> solvent;  ///< wealth after withdrawal > 0
    std::vector<double> terminal;

    PathRecord path(std::size_t i) const;
};

using Band = std::array<double, 5>;  ///< 5th, 20th, 50th, 80th, 95th percentiles
inline constexpr std::array<double, 5> kBandLevels = {0.05, 0.20, 0.50, 0.80, 0.95};

struct SummaryStats {
    std::size_t paths = 0;
    double alpha = 0.05;
    double ew = 0.0;             ///< E[sum q] / (M + 1)
    double ew_std_error = 0.0;
    double es = 0.0;
    double es_std_error = 0.0;
    double var = 0.0;            ///< empirical alpha-quantile of W_T
    double mean_terminal = 0.0;
    Band terminal{};
    std::vector<Band> wealth;      ///< per date, before withdrawal
    std::vector<Band> withdrawal;  ///< per date
    std::vector<Band> equity;      ///< per date t_0..t_{M-1}, solvent paths only
    double mean_median_equity = 0.0;  ///< sum_{n<M} median(p_n) / M
    double mean_median_equity_all = 0.0;  ///< same with insolvent paths counted as p = 0
    double bang_bang_fraction = 0.0;  ///< share of withdrawals equal to q_min or q_max
};

/// Mean of the worst alpha-fraction of outcomes with fractional weighting of
/// the boundary observation (tail mass exactly alpha * N).
double expected_shortfall(std::span<const double> outcomes, double alpha);

/// Linear-interpolated empirical quantile (type 7).
double quantile(std::span<const double> values, double level);

Ensemble simulate(const Scenario& scenario, const Strategy& strategy, const ReturnSource& returns, std::size_t n_paths,
                  int workers = 1);

Ensemble simulate(const MarketModel& model, const Scenario& scenario, const Strategy& strategy, std::size_t n_paths,
                  std::uint64_t seed, int workers = 1);

SummaryStats summarize(const Ensemble& ensemble, double alpha);

/// Same numbers as summarize(simulate(...)) without holding every path in memory.
SummaryStats simulate_summary(const Scenario& scenario, const Strategy& strategy, const ReturnSource& returns,
                              std::size_t n_paths, int workers = 1);

SummaryStats simulate_summary(const MarketModel& model, const Scenario& scenario, const Strategy& strategy,
                              std::size_t n_paths, std::uint64_t seed, int workers = 1);

/// Control tables for plotting: p and (q - q_min) / (q_max - q_min), 0 when q_min == q_max.
struct Heatmap {
    std::vector<double> wealth;
    std::vector<double> times;
    std::vector<std::vector<double>> equity;      ///< [date][node]
    std::vector<std::vector<double>> withdrawal;  ///< normalized, [date][node]
};

Heatmap heatmap_export(const Policy& policy);

void write_heatmap_csv(std::ostream& os, const Heatmap& map, bool withdrawal, const std::string& banner);
void write_percentiles_csv(std::ostream& os, const std::vector<Band>& bands, double dt, const std::string& banner);

}  // namespace decum
