#include "decum/frontier.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>

#include "decum/error.hpp"
#include "decum/format.hpp"
#include "decum/parallel.hpp"
#include "decum/policy_io.hpp"
#include "json.hpp"

namespace decum {
namespace {

using Json = nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Re-throws with the failing stage named, keeping the error code.
template <class F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        fail(e.code(), name + ": " + e.what());
    } catch (const std::exception& e) {
        fail(ErrorCode::Numeric, name + ": " + e.what());
    }
}

std::ofstream open_out(const std::string& dir, const std::string& name, bool binary = false) {
    std::filesystem::create_directories(dir);
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream os(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot open " + path + " for writing");
    return os;
}

Json band_json(const Band& b) { return Json::array({b[0], b[1], b[2], b[3], b[4]}); }

std::string kappa_tag(double k) { return shortest(k); }

}  // namespace

std::string artifact_banner(const RunConfig& config, const std::string& artifact) {
    return "decum " + artifact + " schema=" + std::to_string(kFrontierSchema) + " config_hash=" +
           hex64(config_hash(config)) + " seed=" + std::to_string(config.seed);
}

SolveResult solve_policy(const RunConfig& config, double kappa, const Logger& log) {
    validate(config);
    Scenario sc = config.scenario;
    sc.kappa = kappa;
    const int workers = resolve_workers(config.workers);
    SolveResult out;
    WStarResult r = stage("solve (kappa " + kappa_tag(kappa) + ")",
                          [&] { return optimize_wstar(config.market, sc, config.ladder, config.wstar, workers); });
    out.policy = std::move(r.policy);
    out.policy.config_hash = config_hash(config);
    out.evaluations = r.evaluations;
    out.pde = stage("pde evaluation (kappa " + kappa_tag(kappa) + ")", [&] {
        return evaluate_policy_pde(config.market, sc, build_grids(config.ladder.back()), out.policy, workers);
    });
    if (log) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "kappa=%g W*=%.4f J=%.6f pde ES=%.4f EW=%.4f (%d W* evaluations)", kappa,
                      out.policy.wstar, out.policy.value, out.pde.es, out.pde.ew, out.evaluations);
        log(buf);
    }
    return out;
}

SummaryStats simulate_policy(const RunConfig& config, const Strategy& strategy) {
    validate(config);
    Scenario sc = config.scenario;
    if (const Policy* p = strategy.policy()) {
        sc.q_min = p->q_min;
        sc.q_max = p->q_max;
    }
    return stage("simulate", [&] {
        return simulate_summary(config.market, sc, strategy, config.paths, config.seed, resolve_workers(config.workers));
    });
}

SummaryStats backtest_policy(const RunConfig& config, const Strategy& strategy) {
    validate(config);
    require(!config.series_path.empty(), "backtest needs a return series (bootstrap.series or --series)");
    const ReturnSeries series = stage("load series", [&] { return load_return_series(config.series_path); });
    Scenario sc = config.scenario;
    if (const Policy* p = strategy.policy()) {
        sc.q_min = p->q_min;
        sc.q_max = p->q_max;
    }
    return stage("backtest", [&] {
        return backtest(strategy, sc, series, config.bootstrap, config.market.borrow_spread,
                        resolve_workers(config.workers));
    });
}

FrontierResult run_frontier(const RunConfig& config, const Logger& log) {
    validate(config);
    require(!config.kappas.empty(), "frontier: kappa list is empty");
    std::vector<double> ks = config.kappas;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    // Kappa points run concurrently, each with its own solver state; the worker budget is split between them.
    const int total = resolve_workers(config.workers);
    const int outer = std::min<int>(total, static_cast<int>(ks.size()));
    RunConfig inner = config;
    inner.workers = std::max(1, total / outer);
    std::mutex log_mutex;
    const Logger safe_log = log ? Logger([&](const std::string& m) {
        std::lock_guard<std::mutex> lock(log_mutex);
        log(m);
    })
                                : Logger{};

    std::vector<FrontierPoint> points(ks.size());
    std::vector<Policy> policies(ks.size());
    parallel_for(ks.size(), outer, [&](std::size_t i) {
        const double k = ks[i];
        SolveResult solved = solve_policy(inner, k, safe_log);
        const SummaryStats s = stage("simulate (kappa " + kappa_tag(k) + ")",
                                     [&] { return simulate_policy(inner, Strategy(solved.policy)); });
        FrontierPoint& pt = points[i];
        pt.kappa = k;
        pt.es = s.es;
        pt.es_std_error = s.es_std_error;
        pt.ew = s.ew;
        pt.ew_std_error = s.ew_std_error;
        pt.median_terminal = s.terminal[2];
        pt.mean_median_equity = s.mean_median_equity;
        pt.wstar = solved.policy.wstar;
        pt.pde_es = solved.pde.es;
        pt.pde_ew = solved.pde.ew;
        if (safe_log) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "kappa=%g MC ES=%.4f EW=%.4f median W_T=%.2f equity=%.4f", k, pt.es, pt.ew,
                          pt.median_terminal, pt.mean_median_equity);
            safe_log(buf);
        }
        policies[i] = std::move(solved.policy);
    });
    FrontierResult out;
    out.points = std::move(points);
    out.policies = std::move(policies);
    return out;
}

void write_frontier_csv(std::ostream& os, const std::vector<FrontierPoint>& points, const std::string& banner) {
    os << "# " << banner << '\n'
       << "kappa,es,es_std_error,ew,ew_std_error,median_terminal,mean_median_equity,wstar,pde_es,pde_ew\n";
    for (const auto& p : points) {
        const double row[] = {p.kappa, p.es, p.es_std_error, p.ew, p.ew_std_error, p.median_terminal,
                              p.mean_median_equity, p.wstar, p.pde_es, p.pde_ew};
        for (std::size_t i = 0; i < std::size(row); ++i) os << (i ? "," : "") << shortest(row[i]);
        os << '\n';
    }
}

std::vector<BenchmarkRow> run_benchmark(const RunConfig& config, const Logger& log) {
    validate(config);
    require(!config.benchmark_weights.empty(), "benchmark: weight list is empty");
    Scenario sc = config.scenario;
    sc.q_min = sc.q_max = config.fixed.withdrawal;
    const int workers = resolve_workers(config.workers);
    const bool synthetic = config.benchmark_market != "bootstrap";
    const bool historical = config.benchmark_market != "synthetic";
    ReturnSeries series;
    if (historical) {
        require(!config.series_path.empty(), "benchmark: bootstrap market needs bootstrap.series");
        series = stage("load series", [&] { return load_return_series(config.series_path); });
    }
    std::vector<BenchmarkRow> rows;
    auto add = [&](const std::string& market, double w, const SummaryStats& s) {
        rows.push_back({market, w, config.fixed.withdrawal, s.es, s.es_std_error, s.terminal[2], s.ew});
        if (log) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s equity=%.2f ES=%.4f median W_T=%.2f", market.c_str(), w, s.es,
                          s.terminal[2]);
            log(buf);
        }
    };
    for (double w : config.benchmark_weights) {
        const Strategy fixed(FixedPolicy{w, config.fixed.withdrawal});
        if (synthetic)
            add("synthetic", w, stage("benchmark simulate", [&] {
                    return simulate_summary(config.market, sc, fixed, config.paths, config.seed, workers);
                }));
        if (historical)
            add("bootstrap", w, stage("benchmark backtest", [&] {
                    return backtest(fixed, sc, series, config.bootstrap, config.market.borrow_spread, workers);
                }));
    }
    return rows;
}

void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows, const std::string& banner) {
    os << "# " << banner << '\n' << "market,equity,withdrawal,es,es_std_error,median_terminal,ew\n";
    for (const auto& r : rows)
        os << r.market << ',' << shortest(r.equity) << ',' << shortest(r.withdrawal) << ',' << shortest(r.es) << ','
           << shortest(r.es_std_error) << ',' << shortest(r.median_terminal) << ',' << shortest(r.ew) << '\n';
}

std::string summary_json(const RunConfig& config, const SummaryStats& s, const Policy* policy,
                         const std::string& market) {
    Json j;
    j["schema"] = kFrontierSchema;
    j["config_hash"] = hex64(config_hash(config));
    j["config_sha256"] = config_digest(config);
    j["seed"] = market == "bootstrap" ? config.bootstrap.seed : config.seed;
    j["market"] = market;
    if (policy) {
        j["wstar"] = policy->wstar;
        j["value"] = policy->value;
        j["q_min"] = policy->q_min;
        j["q_max"] = policy->q_max;
    } else {
        j["fixed_equity"] = config.fixed.equity;
        j["fixed_withdrawal"] = config.fixed.withdrawal;
    }
    j["paths"] = s.paths;
    j["alpha"] = s.alpha;
    j["ew"] = s.ew;
    j["ew_std_error"] = s.ew_std_error;
    j["es"] = s.es;
    j["es_std_error"] = s.es_std_error;
    j["var"] = s.var;
    j["mean_terminal"] = s.mean_terminal;
    j["median_terminal"] = s.terminal[2];
    j["terminal_band"] = band_json(s.terminal);
    j["mean_median_equity"] = s.mean_median_equity;
    j["mean_median_equity_all_paths"] = s.mean_median_equity_all;
    j["bang_bang_fraction"] = s.bang_bang_fraction;
    j["band_levels"] = Json::array({kBandLevels[0], kBandLevels[1], kBandLevels[2], kBandLevels[3], kBandLevels[4]});
    return j.dump(2) + "\n";
}

void write_policy_artifacts(const std::string& dir, const RunConfig& config, const Policy& policy) {
    {
        auto os = open_out(dir, "policy.bin", true);
        write_policy(os, policy);
    }
    const Heatmap map = heatmap_export(policy);
    {
        auto os = open_out(dir, "heatmap_p.csv");
        write_heatmap_csv(os, map, false, artifact_banner(config, "heatmap_p"));
    }
    auto os = open_out(dir, "heatmap_q.csv");
    write_heatmap_csv(os, map, true, artifact_banner(config, "heatmap_q"));
}

void write_stats_artifacts(const std::string& dir, const RunConfig& config, const SummaryStats& stats,
                           const Policy* policy, const std::string& market) {
    {
        auto os = open_out(dir, "summary.json");
        os << summary_json(config, stats, policy, market);
    }
    const double dt = config.scenario.dt();
    const std::pair<const char*, const std::vector<Band>*> fans[] = {
        {"wealth", &stats.wealth}, {"withdrawal", &stats.withdrawal}, {"equity", &stats.equity}};
    for (const auto& [name, bands] : fans) {
        auto os = open_out(dir, std::string("percentiles_") + name + ".csv");
        write_percentiles_csv(os, *bands, dt, artifact_banner(config, std::string("percentiles_") + name));
    }
}

void write_frontier_artifacts(const std::string& dir, const RunConfig& config, const FrontierResult& result) {
    {
        auto os = open_out(dir, "frontier.csv");
        write_frontier_csv(os, result.points, artifact_banner(config, "frontier"));
    }
    for (std::size_t i = 0; i < result.policies.size(); ++i) {
        auto os = open_out(dir, "policy_kappa_" + kappa_tag(result.points[i].kappa) + ".bin", true);
        write_policy(os, result.policies[i]);
    }
    Json j;
    j["schema"] = kFrontierSchema;
    j["config_hash"] = hex64(config_hash(config));
    j["seed"] = config.seed;
    j["points"] = Json::array();
    for (const auto& p : result.points)
        j["points"].push_back({{"kappa", p.kappa},
                               {"es", p.es},
                               {"es_std_error", p.es_std_error},
                               {"ew", p.ew},
                               {"ew_std_error", p.ew_std_error},
                               {"median_terminal", p.median_terminal},
                               {"mean_median_equity", p.mean_median_equity},
                               {"wstar", p.wstar},
                               {"pde_es", p.pde_es},
                               {"pde_ew", p.pde_ew}});
    auto os = open_out(dir, "summary.json");
    os << j.dump(2) << '\n';
}

void write_benchmark_artifacts(const std::string& dir, const RunConfig& config, const std::vector<BenchmarkRow>& rows) {
    {
        auto os = open_out(dir, "benchmark.csv");
        write_benchmark_csv(os, rows, artifact_banner(config, "benchmark"));
    }
    Json j;
    j["schema"] = kFrontierSchema;
    j["config_hash"] = hex64(config_hash(config));
    j["seed"] = config.seed;
    j["rows"] = Json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"market", r.market},
                             {"equity", r.equity},
                             {"withdrawal", r.withdrawal},
                             {"es", r.es},
                             {"es_std_error", r.es_std_error},
                             {"median_terminal", r.median_terminal},
                             {"ew", r.ew}});
    auto os = open_out(dir, "summary.json");
    os << j.dump(2) << '\n';
}

}  // namespace decum
