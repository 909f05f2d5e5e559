#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "decum/run_config.hpp"

namespace decum {

using Logger = std::function<void(const std::string&)>;

/// "# decum <artifact> schema=1 config_hash=<hex> seed=<n>" without the leading '#'.
std::string artifact_banner(const RunConfig& config, const std::string& artifact);

struct SolveResult {
    Policy policy;
    PolicyEvaluation pde;
    int evaluations = 0;
};

/// Outer W* search over the ladder for the given kappa; the policy carries the config hash.
SolveResult solve_policy(const RunConfig& config, double kappa, const Logger& log = {});

SummaryStats simulate_policy(const RunConfig& config, const Strategy& strategy);
SummaryStats backtest_policy(const RunConfig& config, const Strategy& strategy);

struct FrontierPoint {
    double kappa = 0.0;
    double es = 0.0;
    double es_std_error = 0.0;
    double ew = 0.0;
    double ew_std_error = 0.0;
    double median_terminal = 0.0;
    double mean_median_equity = 0.0;
    double wstar = 0.0;
    double pde_es = 0.0;
    double pde_ew = 0.0;
};

struct FrontierResult {
    std::vector<FrontierPoint> points;  ///< ascending kappa
    std::vector<Policy> policies;
};

FrontierResult run_frontier(const RunConfig& config, const Logger& log = {});

inline constexpr int kFrontierSchema = 1;
void write_frontier_csv(std::ostream& os, const std::vector<FrontierPoint>& points, const std::string& banner);

struct BenchmarkRow {
    std::string market;  ///< synthetic | bootstrap
    double equity = 0.0;
    double withdrawal = 0.0;
    double es = 0.0;
    double es_std_error = 0.0;
    double median_terminal = 0.0;
    double ew = 0.0;
};

std::vector<BenchmarkRow> run_benchmark(const RunConfig& config, const Logger& log = {});
void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows, const std::string& banner);

/// summary.json text for one evaluated strategy.
std::string summary_json(const RunConfig& config, const SummaryStats& stats, const Policy* policy,
                         const std::string& market);

// Artifact writers; `dir` is created if needed.
void write_policy_artifacts(const std::string& dir, const RunConfig& config, const Policy& policy);
void write_stats_artifacts(const std::string& dir, const RunConfig& config, const SummaryStats& stats,
                           const Policy* policy, const std::string& market);
void write_frontier_artifacts(const std::string& dir, const RunConfig& config, const FrontierResult& result);
void write_benchmark_artifacts(const std::string& dir, const RunConfig& config, const std::vector<BenchmarkRow>& rows);

}  // namespace decum
