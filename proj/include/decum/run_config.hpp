#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "decum/bootstrap_market.hpp"
#include "decum/dp_optimizer.hpp"
#include "decum/market_model.hpp"
#include "decum/mc_simulator.hpp"

namespace decum {

inline constexpr double kKappaWarn = 1e3;
inline constexpr double kKappaMax = 1e5;

struct RunConfig {
    std::string mode = "frontier";  ///< solve | simulate | backtest | frontier | benchmark
    MarketModel market = MarketModel::crsp_1926_2019();
    Scenario scenario;
    std::vector<GridConfig> ladder;  ///< coarse to fine
    WStarSearch wstar;
    std::vector<double> kappas = {1.0};
    std::size_t paths = 2560000;
    std::uint64_t seed = 20200101;
    FixedPolicy fixed;
    std::vector<double> benchmark_weights = {0.0, 0.2, 0.4, 0.6, 0.8};
    std::string benchmark_market = "synthetic";  ///< synthetic | bootstrap | both
    std::string series_path;
    BootstrapConfig bootstrap;
    std::string output_dir = "out";
    std::string policy_path;  ///< input policy for simulate/backtest; empty solves first
    int workers = 1;

    RunConfig();
};

/// Warnings raised while resolving (e.g. large kappa).
std::vector<std::string> validate(const RunConfig& config);

/// INI text with sections [run] [market] [scenario] [grid] [wstar] [frontier]
/// [simulation] [benchmark] [bootstrap]. Unknown keys are rejected.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);

/// Fully resolved config; round-trips through parse_config.
std::string resolved_ini(const RunConfig& config);

/// Sets one key from "section.key" and a textual value.
void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& dotted_key);

/// SHA-256 over the resolved config minus the [run] section (mode, paths, workers), hex.
std::string config_digest(const RunConfig& config);
/// First 64 bits of the digest.
std::uint64_t config_hash(const RunConfig& config);

/// "512x512,1024x1024" or "512,1024".
std::vector<GridConfig> parse_ladder(const std::string& text, const GridConfig& base = {});
std::vector<double> parse_list(const std::string& text);

}  // namespace decum
