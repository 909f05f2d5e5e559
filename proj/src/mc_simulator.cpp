#include "decum/mc_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "decum/error.hpp"
#include "decum/format.hpp"
#include "decum/parallel.hpp"

namespace decum {

double Strategy::withdrawal(int n, double w_minus) const {
    if (const auto* fixed = std::get_if<FixedPolicy>(&rule_)) return fixed->withdrawal;
    return std::get<const Policy*>(rule_)->withdrawal(n, w_minus);
}

double Strategy::allocation(int n, double w_plus, bool final_date) const {
    if (final_date || w_plus <= 0.0) return 0.0;
    if (const auto* fixed = std::get_if<FixedPolicy>(&rule_)) return fixed->equity;
    return std::get<const Policy*>(rule_)->allocation(n, w_plus);
}

const Policy* Strategy::policy() const {
    const auto* p = std::get_if<const Policy*>(&rule_);
    return p ? *p : nullptr;
}

ReturnSource model_returns(const MarketModel& model, double dt, std::uint64_t seed) {
    validate(model);
    return [model, dt, seed](std::size_t path, int period, bool insolvent) {
        RandomStream rng(seed, path, static_cast<std::uint32_t>(period));
        return sample_period_return(model, dt, insolvent, rng);
    };
}

PathRecord Ensemble::path(std::size_t i) const {
    require(i < paths, "Ensemble::path: index out of range", ErrorCode::Range);
    PathRecord r;
    for (int n = 0; n < dates; ++n) {
        const std::size_t at = static_cast<std::size_t>(n) * paths + i;
        r.wealth.push_back(wealth[at]);
        r.withdrawal.push_back(withdrawal[at]);
        r.equity.push_back(equity[at]);
    }
    r.terminal = terminal[i];
    return r;
}

double expected_shortfall(std::span<const double> outcomes, double alpha) {
    require(!outcomes.empty(), "expected_shortfall: empty sample");
    require(alpha > 0.0 && alpha < 1.0, "expected_shortfall: alpha must lie in (0,1)");
    std::vector<double> v(outcomes.begin(), outcomes.end());
    const double mass = alpha * static_cast<double>(v.size());
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mass - 1e-9)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
    std::sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1));
    const double full = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), 0.0);
    return (full + (mass - static_cast<double>(k - 1)) * v[k - 1]) / mass;
}

double quantile(std::span<const double> values, double level) {
    require(!values.empty(), "quantile: empty sample");
    std::vector<double> v(values.begin(), values.end());
    const double h = level * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (lo + 1 >= v.size()) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return a + (h - static_cast<double>(lo)) * (b - a);
}

namespace {

Band band_of(std::vector<double>& v) {
    Band out{};
    if (v.empty()) return out;
    // Ascending levels: each selection only needs the range above the previous one.
    auto first = v.begin();
    const double n1 = static_cast<double>(v.size() - 1);
    for (std::size_t j = 0; j < kBandLevels.size(); ++j) {
        const double h = kBandLevels[j] * n1;
        const auto lo = static_cast<std::ptrdiff_t>(std::floor(h));
        auto nth = v.begin() + lo;
        std::nth_element(first, nth, v.end());
        double value = *nth;
        if (nth + 1 != v.end()) {
            const double next = *std::min_element(nth + 1, v.end());
            value += (h - static_cast<double>(lo)) * (next - value);
        }
        out[j] = value;
        first = nth;
    }
    return out;
}

// Reduces per-date columns to summary statistics. Fed identically by the
// streaming simulator and by summarize(), so both give bit-identical output.
class Reducer {
public:
    Reducer(int dates, std::size_t paths, double q_min, double q_max)
        : dates_(dates), paths_(paths), q_min_(q_min), q_max_(q_max), sum_q_(paths, 0.0) {}

    void add_date(int n, std::span<const double> wealth, std::span<const double> q, std::span<const double> p,
                  std::span<const std::uint8_t> solvent) {
        std::vector<double> buf(wealth.begin(), wealth.end());
        stats_.wealth.push_back(band_of(buf));
        buf.assign(q.begin(), q.end());
        stats_.withdrawal.push_back(band_of(buf));
        for (std::size_t i = 0; i < paths_; ++i) {
            sum_q_[i] += q[i];
            const double tol = 1e-9 * std::max(1.0, std::abs(q_max_));
            if (std::abs(q[i] - q_min_) <= tol || std::abs(q[i] - q_max_) <= tol) ++extreme_;
        }
        if (n + 1 < dates_) {
            buf.clear();
            for (std::size_t i = 0; i < paths_; ++i)
                if (solvent[i]) buf.push_back(p[i]);
            stats_.equity.push_back(band_of(buf));
            median_all_ += quantile(p, 0.5);
        }
    }

    SummaryStats finish(std::span<const double> terminal, double alpha) {
        SummaryStats& s = stats_;
        s.paths = paths_;
        s.alpha = alpha;
        const double count = static_cast<double>(paths_);
        const double withdrawals = static_cast<double>(dates_);

        double mean = 0.0;
        for (double v : sum_q_) mean += v;
        mean /= count;
        double var = 0.0;
        for (double v : sum_q_) var += (v - mean) * (v - mean);
        var /= std::max(1.0, count - 1.0);
        s.ew = mean / withdrawals;
        s.ew_std_error = std::sqrt(var / count) / withdrawals;

        std::vector<double> sorted(terminal.begin(), terminal.end());
        std::sort(sorted.begin(), sorted.end());
        s.es = expected_shortfall(sorted, alpha);
        const double mass = alpha * count;
        const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mass - 1e-9)));
        s.var = sorted[k - 1];
        // Asymptotic variance of the tail-mean estimator:
        // [Var(X | X <= VaR) + (1 - alpha)(ES - VaR)^2] / (alpha N).
        double tail_var = 0.0;
        for (std::size_t i = 0; i < k; ++i) tail_var += (sorted[i] - s.es) * (sorted[i] - s.es);
        tail_var /= static_cast<double>(k);
        s.es_std_error = std::sqrt((tail_var + (1.0 - alpha) * (s.es - s.var) * (s.es - s.var)) / mass);
        s.mean_terminal = std::accumulate(sorted.begin(), sorted.end(), 0.0) / count;
        s.terminal = band_of(sorted);

        double med = 0.0;
        for (const Band& b : s.equity) med += b[2];
        s.mean_median_equity = s.equity.empty() ? 0.0 : med / static_cast<double>(s.equity.size());
        s.mean_median_equity_all = s.equity.empty() ? 0.0 : median_all_ / static_cast<double>(s.equity.size());
        s.bang_bang_fraction = static_cast<double>(extreme_) / (count * withdrawals);
        return s;
    }

private:
    int dates_;
    std::size_t paths_;
    double q_min_, q_max_;
    std::vector<double> sum_q_;
    std::size_t extreme_ = 0;
    double median_all_ = 0.0;
    SummaryStats stats_;
};

struct Columns {
    std::vector<double> wealth, q, p;
    std::vector<std::uint8_t> solvent;
};

// Date-major forward simulation. `sink(n, columns)` sees every date before the
// wealth column is advanced; terminal wealth is written into `terminal`.
template <class Sink>
void run_paths(const Scenario& scenario, const Strategy& strategy, const ReturnSource& returns, std::size_t n_paths,
               int workers, std::vector<double>& terminal, Sink&& sink) {
    validate(scenario);
    require(n_paths >= 1, "simulate: need at least one path");
    if (const Policy* pol = strategy.policy()) {
        require(pol->rebalances == scenario.rebalances && std::abs(pol->horizon - scenario.horizon) < 1e-9,
                "simulate: policy grid does not match the scenario's rebalancing schedule", ErrorCode::Mismatch);
        require(std::abs(pol->q_min - scenario.q_min) < 1e-9 && std::abs(pol->q_max - scenario.q_max) < 1e-9,
                "simulate: policy withdrawal bounds do not match the scenario", ErrorCode::Mismatch);
    }
    const int m = scenario.rebalances;
    Columns c;
    c.wealth.assign(n_paths, scenario.initial_wealth);
    c.q.assign(n_paths, 0.0);
    c.p.assign(n_paths, 0.0);
    c.solvent.assign(n_paths, 0);
    std::vector<double> next(n_paths, 0.0);
    terminal.assign(n_paths, 0.0);

    for (int n = 0; n <= m; ++n) {
        const bool last = n == m;
        parallel_for(n_paths, workers, [&](std::size_t i) {
            const double q = strategy.withdrawal(n, c.wealth[i]);
            const double w_plus = c.wealth[i] - q;
            const double p = strategy.allocation(n, w_plus, last);
            const bool solvent = w_plus > 0.0;
            c.q[i] = q;
            c.p[i] = p;
            c.solvent[i] = solvent ? 1 : 0;
            if (last) {
                terminal[i] = w_plus;
                return;
            }
            const PeriodReturn r = returns(i, n, !solvent);
            next[i] = solvent ? w_plus * (p * r.stock_gross + (1.0 - p) * r.bond_gross) : w_plus * r.bond_gross;
        });
        sink(n, c);
        if (!last) c.wealth.swap(next);
    }
}

}  // namespace

Ensemble simulate(const Scenario& scenario, const Strategy& strategy, const ReturnSource& returns, std::size_t n_paths,
                  int workers) {
    Ensemble e;
    e.dates = scenario.rebalances + 1;
    e.paths = n_paths;
    e.q_min = scenario.q_min;
    e.q_max = scenario.q_max;
    run_paths(scenario, strategy, returns, n_paths, workers, e.terminal, [&](int, const Columns& c) {
        e.wealth.insert(e.wealth.end(), c.wealth.begin(), c.wealth.end());
        e.withdrawal.insert(e.withdrawal.end(), c.q.begin(), c.q.end());
        e.equity.insert(e.equity.end(), c.p.begin(), c.p.end());
        e.solvent.insert(e.solvent.end(), c.solvent.begin(), c.solvent.end());
    });
    return e;
}

Ensemble simulate(const MarketModel& model, const Scenario& scenario, const Strategy& strategy, std::size_t n_paths,
                  std::uint64_t seed, int workers) {
    return simulate(scenario, strategy, model_returns(model, scenario.dt(), seed), n_paths, workers);
}

SummaryStats summarize(const Ensemble& e, double alpha) {
    require(e.paths >= 1 && e.dates >= 1, "summarize: empty ensemble");
    Reducer red(e.dates, e.paths, e.q_min, e.q_max);
    for (int n = 0; n < e.dates; ++n) {
        const std::size_t off = static_cast<std::size_t>(n) * e.paths;
        auto col = [&](const auto& v) { return std::span(v.data() + off, e.paths); };
        red.add_date(n, col(e.wealth), col(e.withdrawal), col(e.equity), col(e.solvent));
    }
    return red.finish(e.terminal, alpha);
}

SummaryStats simulate_summary(const Scenario& scenario, const Strategy& strategy, const ReturnSource& returns,
                              std::size_t n_paths, int workers) {
    Reducer red(scenario.rebalances + 1, n_paths, scenario.q_min, scenario.q_max);
    std::vector<double> terminal;
    run_paths(scenario, strategy, returns, n_paths, workers, terminal,
              [&](int n, const Columns& c) { red.add_date(n, c.wealth, c.q, c.p, c.solvent); });
    return red.finish(terminal, scenario.alpha);
}

SummaryStats simulate_summary(const MarketModel& model, const Scenario& scenario, const Strategy& strategy,
                              std::size_t n_paths, std::uint64_t seed, int workers) {
    return simulate_summary(scenario, strategy, model_returns(model, scenario.dt(), seed), n_paths, workers);
}

Heatmap heatmap_export(const Policy& policy) {
    Heatmap h;
    h.wealth = policy.wealth_nodes;
    const double dt = policy.horizon / policy.rebalances;
    const double span = policy.q_max - policy.q_min;
    for (int n = 0; n <= policy.rebalances; ++n) {
        h.times.push_back(dt * n);
        std::vector<double> p(policy.wealth_nodes.size()), q(policy.wealth_nodes.size());
        for (std::size_t k = 0; k < policy.wealth_nodes.size(); ++k) {
            p[k] = n == policy.rebalances ? 0.0 : std::clamp(policy.p[n][k], 0.0, 1.0);
            q[k] = span > 0.0 ? std::clamp((policy.q[n][k] - policy.q_min) / span, 0.0, 1.0) : 0.0;
        }
        h.equity.push_back(std::move(p));
        h.withdrawal.push_back(std::move(q));
    }
    return h;
}

void write_heatmap_csv(std::ostream& os, const Heatmap& map, bool withdrawal, const std::string& banner) {
    os << "# " << banner << '\n' << "wealth";
    for (double t : map.times) os << ",t" << shortest(t);
    os << '\n';
    const auto& table = withdrawal ? map.withdrawal : map.equity;
    for (std::size_t k = 0; k < map.wealth.size(); ++k) {
        os << shortest(map.wealth[k]);
        for (std::size_t n = 0; n < map.times.size(); ++n) os << ',' << shortest(table[n][k]);
        os << '\n';
    }
}

void write_percentiles_csv(std::ostream& os, const std::vector<Band>& bands, double dt, const std::string& banner) {
    os << "# " << banner << '\n' << "time,p05,p20,p50,p80,p95\n";
    for (std::size_t n = 0; n < bands.size(); ++n) {
        os << shortest(dt * static_cast<double>(n));
        for (double v : bands[n]) os << ',' << shortest(v);
        os << '\n';
    }
}

}  // namespace decum
