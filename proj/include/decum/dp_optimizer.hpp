#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "decum/market_model.hpp"
#include "decum/pide_engine.hpp"

namespace decum {

struct Scenario {
    double horizon = 30.0;        ///< years
    int rebalances = 30;          ///< M; withdrawals happen at t_0..t_M
    double initial_wealth = 1000.0;
    double q_min = 35.0;
    double q_max = 60.0;
    double alpha = 0.05;
    double kappa = 1.0;
    double epsilon = 1e-6;
    double discount = 0.0;        ///< beta; reward at t_n is weighted by exp(-beta t_n)
    double q_step = 1.0;
    int p_count = 0;              ///< 0 selects n_y

    double dt() const { return horizon / rebalances; }
    double time(int n) const { return dt() * n; }
    double reward_weight(int n) const;
    std::vector<double> withdrawal_choices() const;
    int allocation_count(const GridSpec& grid) const { return p_count > 0 ? p_count : grid.y.n; }

    /// kappa * (W* + min(w - W*, 0) / alpha) + epsilon * w
    double terminal_value(double wealth, double wstar) const;
};

void validate(const Scenario& scenario);

/// Piecewise-linear lookup over ascending wealth nodes, clamped at both ends.
double interpolate_nodes(const std::vector<double>& nodes, const std::vector<double>& values, double w);

/// Wealth nodes carrying the stored controls: the debt line (negative wealth,
/// ascending) followed by the b-axis nodes.
std::vector<double> control_wealth_nodes(const GridSpec& grid);

struct Policy {
    static constexpr std::uint32_t kFormatVersion = 1;

    double wstar = 0.0;
    double value = 0.0;   ///< J(0, W0, 0^-) on the grid that produced the tables
    double horizon = 30.0;
    int rebalances = 30;
    double q_min = 0.0;
    double q_max = 0.0;
    GridConfig grid;      ///< grid metadata
    std::uint64_t config_hash = 0;
    std::vector<double> wealth_nodes;
    std::vector<std::vector<double>> q;  ///< q[n][k] at pre-withdrawal wealth wealth_nodes[k]
    std::vector<std::vector<double>> p;  ///< p[n][k] at post-withdrawal wealth wealth_nodes[k]

    double withdrawal(int n, double w_minus) const;
    double allocation(int n, double w_plus) const;
};

/// Surface at T^+ on both grids.
ValueSurface terminal_values(const GridSpec& grid, double wstar, const Scenario& scenario);

struct ControlChoice {
    double control = 0.0;
    double value = 0.0;
};

/// Best stock fraction on the discrete p grid for post-withdrawal wealth w_plus.
ControlChoice optimize_allocation(const GridSpec& grid, const ValueSurface& plus, double w_plus, int p_count);

/// Best withdrawal at pre-withdrawal wealth w_minus on rebalancing date n, with
/// the allocation table p_table (over control_wealth_nodes) already fixed.
ControlChoice optimize_withdrawal(const GridSpec& grid, const ValueSurface& plus, const std::vector<double>& wealth_nodes,
                                  const std::vector<double>& p_table, double w_minus, const Scenario& scenario, int n);

struct RebalanceResult {
    ValueSurface minus;
    std::vector<double> q;
    std::vector<double> p;
};

RebalanceResult apply_rebalance(const GridSpec& grid, const ValueSurface& plus, const Scenario& scenario, int n,
                                int workers = 1);

/// Observer of intermediate surfaces: (date index, surface at t_n^-).
using SurfaceObserver = std::function<void(int, const ValueSurface&)>;

struct AuxiliaryResult {
    Policy policy;
    ValueSurface initial;  ///< V(., ., W*, 0^-)
    double value = 0.0;    ///< V(0, W0, W*, 0^-)
};

AuxiliaryResult solve_auxiliary(const MarketModel& model, const Scenario& scenario, const GridSpec& grid, double wstar,
                                int workers = 1, const SurfaceObserver& observer = {});

/// Same as above with a prebuilt kernel for dt = scenario.dt().
AuxiliaryResult solve_auxiliary(const TransitionKernel& kernel, const Scenario& scenario, const GridSpec& grid,
                                double wstar, int workers = 1, const SurfaceObserver& observer = {});

struct WStarSearch {
    double scan_min = -500.0;
    double scan_max = 1500.0;
    double scan_step = 25.0;
    double tolerance = 0.1;
};

struct WStarResult {
    double wstar = 0.0;
    double value = 0.0;
    Policy policy;
    int evaluations = 0;
};

WStarResult optimize_wstar(const MarketModel& model, const Scenario& scenario, const std::vector<GridConfig>& ladder,
                           const WStarSearch& search = {}, int workers = 1);

/// EW and ES implied by stored controls, from a linear backward pass on the grid.
struct PolicyEvaluation {
    double ew = 0.0;  ///< E[sum_n exp(-beta t_n) q_n] / (M + 1)
    double es = 0.0;  ///< E[W* + min(W_T - W*, 0) / alpha] with the policy's W*
};

PolicyEvaluation evaluate_policy_pde(const MarketModel& model, const Scenario& scenario, const GridSpec& grid,
                                     const Policy& policy, int workers = 1);

}  // namespace decum
