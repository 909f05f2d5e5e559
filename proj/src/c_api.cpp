#include "decum/decum.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <string>

#include "decum/error.hpp"
#include "decum/frontier.hpp"
#include "decum/policy_io.hpp"

struct decum_config {
    decum::RunConfig value;
};

struct decum_policy {
    decum::Policy value;
    double pde_es = std::nan("");
    double pde_ew = std::nan("");
};

struct decum_stats {
    decum::SummaryStats value;
    std::string market;
};

namespace {

thread_local std::string last_error;

std::mutex log_mutex;
decum_log_fn log_fn = nullptr;
void* log_user = nullptr;

decum::Logger logger() {
    return [](const std::string& msg) {
        std::lock_guard lock(log_mutex);
        if (log_fn) log_fn(msg.c_str(), log_user);
    };
}

template <class F>
decum_status guarded(F&& f) {
    try {
        last_error.clear();
        f();
        return DECUM_OK;
    } catch (const decum::Error& e) {
        last_error = e.what();
        return static_cast<decum_status>(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return DECUM_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return DECUM_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (!p) decum::fail(decum::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

decum::Strategy strategy_of(const decum_config* c, const decum_policy* p) {
    if (p) return decum::Strategy(p->value);
    return decum::Strategy(c->value.fixed);
}

// Truncating copy with terminator; `needed` gets the full size.
void copy_out(const std::string& text, char* buffer, std::size_t capacity, std::size_t* needed) {
    if (needed) *needed = text.size() + 1;
    if (buffer && capacity > 0) {
        const std::size_t n = std::min(capacity - 1, text.size());
        std::memcpy(buffer, text.data(), n);
        buffer[n] = '\0';
    }
}

// Fixed benchmark rules withdraw a constant amount.
decum::RunConfig effective(const decum_config* c, const decum_policy* p) {
    decum::RunConfig e = c->value;
    if (!p) e.scenario.q_min = e.scenario.q_max = e.fixed.withdrawal;
    return e;
}

}  // namespace

extern "C" {

const char* decum_last_error(void) { return last_error.c_str(); }

const char* decum_version(void) { return "1.0.0"; }

void decum_set_logger(decum_log_fn fn, void* user) {
    std::lock_guard lock(log_mutex);
    log_fn = fn;
    log_user = user;
}

decum_status decum_config_default(decum_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new decum_config{};
    });
}

decum_status decum_config_load(const char* path, decum_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new decum_config{decum::load_config(path)};
    });
}

decum_status decum_config_set(decum_config* config, const char* key, const char* value) {
    return guarded([&] {
        need(config, "config");
        need(key, "key");
        need(value, "value");
        decum::set_config_value(config->value, key, value);
    });
}

decum_status decum_config_get(const decum_config* config, const char* key, char* buffer, size_t capacity,
                              size_t* needed) {
    return guarded([&] {
        need(config, "config");
        need(key, "key");
        copy_out(decum::get_config_value(config->value, key), buffer, capacity, needed);
    });
}

decum_status decum_config_validate(const decum_config* config, char* warnings, size_t capacity) {
    return guarded([&] {
        need(config, "config");
        std::string text;
        for (const auto& w : decum::validate(config->value)) text += w + "\n";
        copy_out(text, warnings, capacity, nullptr);
    });
}

decum_status decum_config_resolved(const decum_config* config, char* buffer, size_t capacity, size_t* needed) {
    return guarded([&] {
        need(config, "config");
        copy_out(decum::resolved_ini(config->value), buffer, capacity, needed);
    });
}

decum_status decum_config_hash(const decum_config* config, uint64_t* hash) {
    return guarded([&] {
        need(config, "config");
        need(hash, "hash");
        *hash = decum::config_hash(config->value);
    });
}

void decum_config_free(decum_config* config) { delete config; }

decum_status decum_solve(const decum_config* config, decum_policy** out) {
    return guarded([&] {
        need(config, "config");
        need(out, "out");
        decum::SolveResult r = decum::solve_policy(config->value, config->value.scenario.kappa, logger());
        *out = new decum_policy{std::move(r.policy), r.pde.es, r.pde.ew};
    });
}

decum_status decum_policy_load(const char* path, decum_policy** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new decum_policy{decum::load_policy(path)};
    });
}

decum_status decum_policy_save(const decum_policy* policy, const char* path) {
    return guarded([&] {
        need(policy, "policy");
        need(path, "path");
        decum::save_policy(path, policy->value);
    });
}

decum_status decum_policy_info_get(const decum_policy* policy, decum_policy_info* info) {
    return guarded([&] {
        need(policy, "policy");
        need(info, "info");
        const decum::Policy& p = policy->value;
        *info = {p.wstar,    p.value,    p.horizon,           p.rebalances,    p.q_min,         p.q_max,
                 p.grid.n_x, p.grid.n_y, p.wealth_nodes.size(), p.config_hash, policy->pde_es, policy->pde_ew};
    });
}

decum_status decum_policy_controls(const decum_policy* policy, int n, double wealth, double* withdrawal,
                                   double* allocation) {
    return guarded([&] {
        need(policy, "policy");
        decum::require(n >= 0 && n <= policy->value.rebalances, "date index out of range", decum::ErrorCode::Range);
        if (withdrawal) *withdrawal = policy->value.withdrawal(n, wealth);
        if (allocation) *allocation = policy->value.allocation(n, wealth);
    });
}

decum_status decum_write_policy_artifacts(const decum_config* config, const decum_policy* policy, const char* dir) {
    return guarded([&] {
        need(config, "config");
        need(policy, "policy");
        need(dir, "dir");
        decum::write_policy_artifacts(dir, config->value, policy->value);
    });
}

void decum_policy_free(decum_policy* policy) { delete policy; }

decum_status decum_simulate(const decum_config* config, const decum_policy* policy, decum_stats** out) {
    return guarded([&] {
        need(config, "config");
        need(out, "out");
        *out = new decum_stats{decum::simulate_policy(effective(config, policy), strategy_of(config, policy)),
                               "synthetic"};
    });
}

decum_status decum_backtest(const decum_config* config, const decum_policy* policy, decum_stats** out) {
    return guarded([&] {
        need(config, "config");
        need(out, "out");
        *out = new decum_stats{decum::backtest_policy(effective(config, policy), strategy_of(config, policy)),
                               "bootstrap"};
    });
}

decum_status decum_stats_summary(const decum_stats* stats, decum_summary* out) {
    return guarded([&] {
        need(stats, "stats");
        need(out, "out");
        const decum::SummaryStats& s = stats->value;
        *out = {s.paths,        s.alpha,          s.ew,          s.ew_std_error, s.es, s.es_std_error, s.var,
                s.mean_terminal, s.terminal[2], s.mean_median_equity, s.bang_bang_fraction};
    });
}

decum_status decum_write_stats_artifacts(const decum_config* config, const decum_stats* stats,
                                         const decum_policy* policy, const char* dir) {
    return guarded([&] {
        need(config, "config");
        need(stats, "stats");
        need(dir, "dir");
        decum::write_stats_artifacts(dir, config->value, stats->value, policy ? &policy->value : nullptr,
                                     stats->market);
    });
}

void decum_stats_free(decum_stats* stats) { delete stats; }

decum_status decum_run_frontier(const decum_config* config, const char* dir) {
    return guarded([&] {
        need(config, "config");
        need(dir, "dir");
        const decum::FrontierResult r = decum::run_frontier(config->value, logger());
        decum::write_frontier_artifacts(dir, config->value, r);
    });
}

decum_status decum_run_benchmark(const decum_config* config, const char* dir) {
    return guarded([&] {
        need(config, "config");
        need(dir, "dir");
        const auto rows = decum::run_benchmark(config->value, logger());
        decum::write_benchmark_artifacts(dir, config->value, rows);
    });
}

decum_status decum_write_provenance(const decum_config* config, size_t count, const char* path) {
    return guarded([&] {
        need(config, "config");
        need(path, "path");
        decum::require(!config->value.series_path.empty(), "provenance needs bootstrap.series");
        const decum::ReturnSeries series = decum::load_return_series(config->value.series_path);
        std::ofstream os(path, std::ios::trunc);
        if (!os) decum::fail(decum::ErrorCode::Io, std::string("cannot open ") + path);
        decum::write_provenance_csv(os, series, config->value.bootstrap, count,
                                    decum::artifact_banner(config->value, "provenance"));
    });
}

}  // extern "C"
