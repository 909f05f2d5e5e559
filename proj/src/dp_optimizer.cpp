#include "decum/dp_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "decum/error.hpp"
#include "decum/parallel.hpp"

namespace decum {

namespace {

// Later candidates must beat the incumbent by more than rounding noise, so
// exact ties resolve to the smaller control.
bool improves(double candidate, double incumbent) {
    return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

struct StageControls {
    const std::vector<double>& nodes;
    const std::vector<double>& q;
    const std::vector<double>& p;
    double q_min;
    double q_max;
    bool last;

    double withdrawal(double w_minus) const { return std::clamp(interpolate_nodes(nodes, q, w_minus), q_min, q_max); }
    double allocation(double w_plus) const {
        if (last || w_plus <= 0.0) return 0.0;
        return std::clamp(interpolate_nodes(nodes, p, w_plus), 0.0, 1.0);
    }
};

using Terminal = std::function<double(double)>;

// Value just before the rebalance at wealth w_minus under fixed controls.
double advanced_value(const GridSpec& grid, const ValueSurface& plus, const StageControls& c, double reward_weight,
                      const Terminal* terminal, double w_minus) {
    const double q = c.withdrawal(w_minus);
    const double w_plus = w_minus - q;
    const double cont = terminal ? (*terminal)(w_plus) : value_at_allocation(grid, plus, w_plus, c.allocation(w_plus));
    return reward_weight * q + cont;
}

ValueSurface advance(const GridSpec& grid, const ValueSurface& plus, const StageControls& c, double reward_weight,
                     const Terminal* terminal, double time, int workers) {
    ValueSurface out = ValueSurface::zeros(grid, plus.wstar, time);
    const int ny = grid.y.n;
    parallel_for(static_cast<std::size_t>(grid.x.n), workers, [&](std::size_t i) {
        const double s = grid.s_nodes[i];
        for (int j = 0; j < ny; ++j)
            out.solvent[i * ny + j] = advanced_value(grid, plus, c, reward_weight, terminal, s + grid.b_nodes[j]);
    });
    for (int k = 0; k < grid.debt.n; ++k)
        out.debt[k] = advanced_value(grid, plus, c, reward_weight, terminal, -grid.debt_nodes[k]);
    return out;
}

}  // namespace

double Scenario::reward_weight(int n) const { return discount == 0.0 ? 1.0 : std::exp(-discount * time(n)); }

std::vector<double> Scenario::withdrawal_choices() const {
    std::vector<double> out;
    const double span = q_max - q_min;
    const int steps = span > 0.0 ? static_cast<int>(std::floor(span / q_step + 1e-9)) : 0;
    for (int k = 0; k <= steps; ++k) out.push_back(q_min + k * q_step);
    if (out.back() < q_max - 1e-12) out.push_back(q_max);
    return out;
}

double Scenario::terminal_value(double wealth, double wstar) const {
    return kappa * (wstar + std::min(wealth - wstar, 0.0) / alpha) + epsilon * wealth;
}

void validate(const Scenario& s) {
    require(s.horizon > 0.0, "scenario: horizon must be > 0");
    require(s.rebalances >= 1, "scenario: need at least one rebalancing interval");
    require(s.q_min <= s.q_max, "scenario: q_min must not exceed q_max");
    require(s.alpha > 0.0 && s.alpha < 1.0, "scenario: alpha must lie in (0,1)");
    require(s.kappa >= 0.0, "scenario: kappa must be >= 0");
    require(s.q_step > 0.0, "scenario: q_step must be > 0");
    require(s.p_count == 0 || s.p_count >= 2, "scenario: p_count must be 0 (auto) or >= 2");
    require(std::isfinite(s.initial_wealth), "scenario: initial wealth must be finite");
}

double interpolate_nodes(const std::vector<double>& nodes, const std::vector<double>& values, double w) {
    if (w <= nodes.front()) return values.front();
    if (w >= nodes.back()) return values.back();
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), w);
    const std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
    const std::size_t lo = hi - 1;
    const double t = (w - nodes[lo]) / (nodes[hi] - nodes[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

std::vector<double> control_wealth_nodes(const GridSpec& grid) {
    std::vector<double> nodes;
    nodes.reserve(grid.debt.n + grid.y.n);
    for (int k = grid.debt.n - 1; k >= 0; --k) nodes.push_back(-grid.debt_nodes[k]);
    nodes.insert(nodes.end(), grid.b_nodes.begin(), grid.b_nodes.end());
    return nodes;
}

double Policy::withdrawal(int n, double w_minus) const {
    return std::clamp(interpolate_nodes(wealth_nodes, q.at(n), w_minus), q_min, q_max);
}

double Policy::allocation(int n, double w_plus) const {
    if (n >= rebalances || w_plus <= 0.0) return 0.0;
    return std::clamp(interpolate_nodes(wealth_nodes, p.at(n), w_plus), 0.0, 1.0);
}

ValueSurface terminal_values(const GridSpec& grid, double wstar, const Scenario& scenario) {
    ValueSurface v = ValueSurface::zeros(grid, wstar, scenario.horizon);
    for (int i = 0; i < grid.x.n; ++i)
        for (int j = 0; j < grid.y.n; ++j)
            v.at(grid, i, j) = scenario.terminal_value(grid.s_nodes[i] + grid.b_nodes[j], wstar);
    for (int k = 0; k < grid.debt.n; ++k) v.debt[k] = scenario.terminal_value(-grid.debt_nodes[k], wstar);
    return v;
}

ControlChoice optimize_allocation(const GridSpec& grid, const ValueSurface& plus, double w_plus, int p_count) {
    if (w_plus <= 0.0) return {0.0, interpolate_debt(grid, plus, -w_plus)};
    require(p_count >= 2, "optimize_allocation: need at least two allocation choices");
    ControlChoice best{0.0, interpolate_solvent(grid, plus, 0.0, w_plus)};
    for (int k = 1; k < p_count; ++k) {
        const double p = static_cast<double>(k) / (p_count - 1);
        const double v = interpolate_solvent(grid, plus, w_plus * p, w_plus * (1.0 - p));
        if (improves(v, best.value)) best = {p, v};
    }
    return best;
}

ControlChoice optimize_withdrawal(const GridSpec& grid, const ValueSurface& plus, const std::vector<double>& wealth_nodes,
                                  const std::vector<double>& p_table, double w_minus, const Scenario& scenario, int n) {
    const bool last = n == scenario.rebalances;
    const double weight = scenario.reward_weight(n);
    ControlChoice best{0.0, -std::numeric_limits<double>::infinity()};
    bool first = true;
    for (double q : scenario.withdrawal_choices()) {
        const double w_plus = w_minus - q;
        double cont;
        if (last) {
            cont = scenario.terminal_value(w_plus, plus.wstar);
        } else {
            const double p = w_plus > 0.0 ? std::clamp(interpolate_nodes(wealth_nodes, p_table, w_plus), 0.0, 1.0) : 0.0;
            cont = value_at_allocation(grid, plus, w_plus, p);
        }
        const double v = weight * q + cont;
        if (first || improves(v, best.value)) best = {q, v};
        first = false;
    }
    return best;
}

RebalanceResult apply_rebalance(const GridSpec& grid, const ValueSurface& plus, const Scenario& scenario, int n,
                                int workers) {
    const bool last = n == scenario.rebalances;
    const std::vector<double> nodes = control_wealth_nodes(grid);
    const int p_count = scenario.allocation_count(grid);
    RebalanceResult r;
    r.p.assign(nodes.size(), 0.0);
    r.q.assign(nodes.size(), scenario.q_min);

    if (!last) {
        parallel_for(nodes.size(), workers, [&](std::size_t k) {
            if (nodes[k] > 0.0) r.p[k] = optimize_allocation(grid, plus, nodes[k], p_count).control;
        });
    }
    parallel_for(nodes.size(), workers, [&](std::size_t k) {
        r.q[k] = optimize_withdrawal(grid, plus, nodes, r.p, nodes[k], scenario, n).control;
    });

    const StageControls c{nodes, r.q, r.p, scenario.q_min, scenario.q_max, last};
    const double wstar = plus.wstar;
    const Terminal terminal = [&scenario, wstar](double w) { return scenario.terminal_value(w, wstar); };
    r.minus = advance(grid, plus, c, scenario.reward_weight(n), last ? &terminal : nullptr, scenario.time(n), workers);
    return r;
}

AuxiliaryResult solve_auxiliary(const MarketModel& model, const Scenario& scenario, const GridSpec& grid, double wstar,
                                int workers, const SurfaceObserver& observer) {
    validate(scenario);
    const TransitionKernel kernel = build_kernel(model, grid, scenario.dt());
    return solve_auxiliary(kernel, scenario, grid, wstar, workers, observer);
}

AuxiliaryResult solve_auxiliary(const TransitionKernel& kernel, const Scenario& scenario, const GridSpec& grid,
                                double wstar, int workers, const SurfaceObserver& observer) {
    validate(scenario);
    require(std::abs(kernel.dt() - scenario.dt()) < 1e-12, "solve_auxiliary: kernel built for a different interval");
    const double w0 = scenario.initial_wealth;
    require(w0 >= grid.b_nodes.front() && w0 <= grid.b_nodes.back(),
            "solve_auxiliary: grid too small for initial wealth " + std::to_string(w0), ErrorCode::Range);

    const int m = scenario.rebalances;
    AuxiliaryResult res;
    Policy& pol = res.policy;
    pol.wstar = wstar;
    pol.horizon = scenario.horizon;
    pol.rebalances = m;
    pol.q_min = scenario.q_min;
    pol.q_max = scenario.q_max;
    pol.wealth_nodes = control_wealth_nodes(grid);
    pol.q.resize(m + 1);
    pol.p.resize(m + 1);

    ValueSurface plus = terminal_values(grid, wstar, scenario);
    for (int n = m; n >= 0; --n) {
        RebalanceResult rb = apply_rebalance(grid, plus, scenario, n, workers);
        pol.q[n] = std::move(rb.q);
        pol.p[n] = std::move(rb.p);
        if (observer) observer(n, rb.minus);
        if (n >= 1) {
            plus = propagate(grid, rb.minus, kernel);
        } else {
            res.initial = std::move(rb.minus);
        }
    }
    // At inception the account is all cash: evaluate the t_0 decision at w = W0 exactly.
    res.value = optimize_withdrawal(grid, plus, pol.wealth_nodes, pol.p[0], w0, scenario, 0).value;
    pol.value = res.value;
    return res;
}

WStarResult optimize_wstar(const MarketModel& model, const Scenario& scenario, const std::vector<GridConfig>& ladder,
                           const WStarSearch& search, int workers) {
    validate(scenario);
    require(!ladder.empty(), "optimize_wstar: empty grid ladder");
    require(search.scan_step > 0.0 && search.scan_max > search.scan_min, "optimize_wstar: invalid scan range");
    require(search.tolerance > 0.0, "optimize_wstar: tolerance must be > 0");

    WStarResult out;

    // Coarse exhaustive scan.
    const GridSpec coarse = build_grids(ladder.front());
    const TransitionKernel coarse_kernel = build_kernel(model, coarse, scenario.dt());
    const int count = static_cast<int>(std::floor((search.scan_max - search.scan_min) / search.scan_step + 1e-9)) + 1;
    std::vector<double> values(count);
    parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t k) {
        const double w = search.scan_min + search.scan_step * static_cast<double>(k);
        values[k] = solve_auxiliary(coarse_kernel, scenario, coarse, w, 1).value;
    });
    out.evaluations += count;
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k)
        if (values[k] > values[best]) best = k;
    if (best == 0 || best + 1 == values.size())
        fail(ErrorCode::Range, "W* maximizer at scan boundary (" +
                                   std::to_string(search.scan_min + search.scan_step * static_cast<double>(best)) +
                                   "); widen the scan range");
    double wstar = search.scan_min + search.scan_step * static_cast<double>(best);

    // Golden-section refinement on each finer grid (or on the only grid).
    const std::size_t first = ladder.size() > 1 ? 1 : 0;
    constexpr double kInvPhi = 0.6180339887498949;
    for (std::size_t level = first; level < ladder.size(); ++level) {
        const GridSpec grid = level == 0 ? coarse : build_grids(ladder[level]);
        const TransitionKernel kernel = build_kernel(model, grid, scenario.dt());
        std::optional<AuxiliaryResult> incumbent;
        double incumbent_w = 0.0;
        auto eval = [&](double w) {
            AuxiliaryResult r = solve_auxiliary(kernel, scenario, grid, w, workers);
            ++out.evaluations;
            const double v = r.value;
            if (!incumbent || improves(v, incumbent->value)) {
                incumbent = std::move(r);
                incumbent_w = w;
            }
            return v;
        };

        double centre = wstar;
        for (int shift = 0; shift < 20; ++shift) {
            double a = centre - search.scan_step, b = centre + search.scan_step;
            double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
            double fc = eval(c), fd = eval(d);
            while (b - a > search.tolerance) {
                if (fc >= fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - kInvPhi * (b - a);
                    fc = eval(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + kInvPhi * (b - a);
                    fd = eval(d);
                }
            }
            const double lo = centre - search.scan_step, hi = centre + search.scan_step;
            if (incumbent_w - lo > search.tolerance && hi - incumbent_w > search.tolerance) break;
            centre = incumbent_w;  // maximizer pressed against the bracket: re-centre and search again
        }
        wstar = incumbent_w;
        if (level + 1 == ladder.size()) {
            out.wstar = wstar;
            out.value = incumbent->value;
            out.policy = std::move(incumbent->policy);
            out.policy.grid = ladder[level];
        }
    }
    return out;
}

PolicyEvaluation evaluate_policy_pde(const MarketModel& model, const Scenario& scenario, const GridSpec& grid,
                                     const Policy& policy, int workers) {
    validate(scenario);
    const int m = scenario.rebalances;
    require(policy.rebalances == m && static_cast<int>(policy.q.size()) == m + 1,
            "evaluate_policy_pde: policy does not match scenario", ErrorCode::Mismatch);
    const TransitionKernel kernel = build_kernel(model, grid, scenario.dt());
    const double wstar = policy.wstar;
    const double alpha = scenario.alpha;
    const Terminal zero = [](double) { return 0.0; };
    const Terminal shortfall = [wstar, alpha](double w) { return wstar + std::min(w - wstar, 0.0) / alpha; };

    ValueSurface reward = ValueSurface::zeros(grid, wstar, scenario.horizon);
    ValueSurface risk = ValueSurface::zeros(grid, wstar, scenario.horizon);
    PolicyEvaluation out;
    for (int n = m; n >= 0; --n) {
        const bool last = n == m;
        const StageControls c{policy.wealth_nodes, policy.q[n], policy.p[n], policy.q_min, policy.q_max, last};
        if (n == 0) {
            const double w0 = scenario.initial_wealth;
            const double r0 = advanced_value(grid, reward, c, scenario.reward_weight(0), last ? &zero : nullptr, w0);
            const double e0 = advanced_value(grid, risk, c, 0.0, last ? &shortfall : nullptr, w0);
            out.ew = r0 / (m + 1);
            out.es = e0;
            break;
        }
        ValueSurface r_minus =
            advance(grid, reward, c, scenario.reward_weight(n), last ? &zero : nullptr, scenario.time(n), workers);
        ValueSurface e_minus = advance(grid, risk, c, 0.0, last ? &shortfall : nullptr, scenario.time(n), workers);
        reward = propagate(grid, r_minus, kernel);
        risk = propagate(grid, e_minus, kernel);
    }
    return out;
}

}  // namespace decum
