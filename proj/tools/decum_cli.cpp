// Command-line front end. Uses only the C interface in decum/decum.h.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "decum/decum.h"

namespace {

struct Options {
    std::string config;
    std::string out;
    std::string seed;
    std::string paths;
    std::string grid;
    std::string kappa;
    std::string series;
    std::string blocksize;
    std::string policy;
    std::string workers;
    std::vector<std::string> sets;
    bool fixed = false;
    bool quiet = false;
    std::size_t provenance = 0;
};

class Failure : public std::runtime_error {
public:
    Failure(decum_status s, const std::string& what) : std::runtime_error(what), status(s) {}
    decum_status status;
};

void check(decum_status s, const char* what) {
    if (s != DECUM_OK) throw Failure(s, std::string(what) + ": " + decum_last_error());
}

struct Config {
    decum_config* handle = nullptr;
    ~Config() { decum_config_free(handle); }
    void set(const std::string& key, const std::string& value) {
        check(decum_config_set(handle, key.c_str(), value.c_str()), ("--" + key).c_str());
    }
};

struct Policy {
    decum_policy* handle = nullptr;
    ~Policy() { decum_policy_free(handle); }
};

struct Stats {
    decum_stats* handle = nullptr;
    ~Stats() { decum_stats_free(handle); }
};

void log_line(const char* msg, void*) { std::fprintf(stderr, "[decum] %s\n", msg); }

std::string first_item(const std::string& list) { return list.substr(0, list.find(',')); }

void load(Config& cfg, const Options& o) {
    if (o.config.empty())
        check(decum_config_default(&cfg.handle), "default config");
    else
        check(decum_config_load(o.config.c_str(), &cfg.handle), "config");
    if (!o.out.empty()) cfg.set("run.output", o.out);
    if (!o.seed.empty()) {
        cfg.set("simulation.seed", o.seed);
        cfg.set("bootstrap.seed", o.seed);
    }
    if (!o.paths.empty()) {
        cfg.set("simulation.paths", o.paths);
        cfg.set("bootstrap.resamples", o.paths);
    }
    if (!o.grid.empty()) cfg.set("grid.ladder", o.grid);
    if (!o.kappa.empty()) {
        cfg.set("frontier.kappa", o.kappa);
        cfg.set("scenario.kappa", first_item(o.kappa));
    }
    if (!o.series.empty()) cfg.set("bootstrap.series", o.series);
    if (!o.blocksize.empty()) cfg.set("bootstrap.blocksize", o.blocksize);
    if (!o.policy.empty()) cfg.set("run.policy", o.policy);
    if (!o.workers.empty()) cfg.set("run.workers", o.workers);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Failure(DECUM_INVALID_ARGUMENT, "--set expects section.key=value");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
}

std::string resolved(const Config& cfg) {
    std::size_t needed = 0;
    check(decum_config_resolved(cfg.handle, nullptr, 0, &needed), "resolve");
    std::string text(needed, '\0');
    check(decum_config_resolved(cfg.handle, text.data(), text.size(), nullptr), "resolve");
    text.resize(needed - 1);
    return text;
}

std::string get(const Config& cfg, const char* key) {
    std::size_t needed = 0;
    check(decum_config_get(cfg.handle, key, nullptr, 0, &needed), key);
    std::string text(needed, '\0');
    check(decum_config_get(cfg.handle, key, text.data(), text.size(), nullptr), key);
    text.resize(needed - 1);
    return text;
}

// Validates, prints warnings, echoes the resolved config and returns the output directory.
std::string prepare(Config& cfg, const std::string& mode, bool quiet) {
    cfg.set("run.mode", mode);
    char warnings[4096] = {0};
    check(decum_config_validate(cfg.handle, warnings, sizeof warnings), "config");
    if (warnings[0]) std::fprintf(stderr, "warning: %s", warnings);
    const std::string text = resolved(cfg);
    const std::string out = get(cfg, "run.output");
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "resolved_config.ini") << text;
    if (!quiet) std::cout << text << '\n';
    return out;
}

void print_policy(const Policy& p) {
    decum_policy_info info{};
    check(decum_policy_info_get(p.handle, &info), "policy info");
    std::printf("W* = %.4f  J = %.6f  grid %dx%d", info.wstar, info.value, info.grid_nx, info.grid_ny);
    if (info.pde_es == info.pde_es) std::printf("  PDE ES = %.4f  PDE EW = %.4f", info.pde_es, info.pde_ew);
    std::printf("\n");
}

void print_stats(const Stats& s) {
    decum_summary m{};
    check(decum_stats_summary(s.handle, &m), "summary");
    std::printf("paths %zu  ES(%.0f%%) = %.4f (se %.4f)  EW = %.4f (se %.4f)  median W_T = %.4f  "
                "mean median equity = %.4f  bang-bang = %.4f\n",
                m.paths, 100.0 * m.alpha, m.es, m.es_std_error, m.ew, m.ew_std_error, m.median_terminal,
                m.mean_median_equity, m.bang_bang_fraction);
}

// Loads the configured policy or solves for one; NULL handle means the fixed rule.
void obtain_policy(Config& cfg, const Options& o, const std::string& out, Policy& p) {
    if (o.fixed) return;
    const std::string path = get(cfg, "run.policy");
    if (!path.empty()) {
        check(decum_policy_load(path.c_str(), &p.handle), "load policy");
    } else {
        check(decum_solve(cfg.handle, &p.handle), "solve");
        check(decum_write_policy_artifacts(cfg.handle, p.handle, out.c_str()), "write policy");
    }
    print_policy(p);
}

int run(const std::string& verb, const Options& o) {
    if (!o.quiet) decum_set_logger(log_line, nullptr);
    Config cfg;
    load(cfg, o);
    const std::string out = prepare(cfg, verb, o.quiet);
    if (verb == "solve") {
        Policy p;
        check(decum_solve(cfg.handle, &p.handle), "solve");
        check(decum_write_policy_artifacts(cfg.handle, p.handle, out.c_str()), "write policy");
        print_policy(p);
    } else if (verb == "simulate" || verb == "backtest") {
        Policy p;
        obtain_policy(cfg, o, out, p);
        Stats s;
        if (verb == "simulate")
            check(decum_simulate(cfg.handle, p.handle, &s.handle), "simulate");
        else
            check(decum_backtest(cfg.handle, p.handle, &s.handle), "backtest");
        check(decum_write_stats_artifacts(cfg.handle, s.handle, p.handle, out.c_str()), "write results");
        if (verb == "backtest" && o.provenance > 0) {
            const std::string path = (std::filesystem::path(out) / "provenance.csv").string();
            check(decum_write_provenance(cfg.handle, o.provenance, path.c_str()), "provenance");
        }
        print_stats(s);
    } else if (verb == "frontier") {
        check(decum_run_frontier(cfg.handle, out.c_str()), "frontier");
    } else {
        check(decum_run_benchmark(cfg.handle, out.c_str()), "benchmark");
    }
    std::fprintf(stderr, "outputs written to %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EW-ES optimal decumulation: solve, simulate, backtest, frontier, benchmark"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::pair<std::string, std::string>> verbs = {
        {"solve", "Optimize W* over the grid ladder and write the policy"},
        {"simulate", "Monte Carlo evaluation in the synthetic market"},
        {"backtest", "Evaluation on block-bootstrap resamples of a return series"},
        {"frontier", "Sweep kappa and trace the EW-ES frontier"},
        {"benchmark", "Constant-weight, constant-withdrawal benchmark table"}};
    for (const auto& [name, help] : verbs) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--seed", o.seed, "Random seed (simulation and bootstrap)");
        sub->add_option("--paths", o.paths, "Monte Carlo paths / bootstrap resamples");
        sub->add_option("--grid", o.grid, "Grid ladder, e.g. 512x512 or 256x256,512x512");
        sub->add_option("--kappa", o.kappa, "Comma-separated kappa list (first entry used by solve)");
        sub->add_option("--series", o.series, "Monthly return series CSV");
        sub->add_option("--blocksize", o.blocksize, "Expected bootstrap block size in years");
        sub->add_option("--policy", o.policy, "Use a stored policy instead of solving");
        sub->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
        sub->add_option("--set", o.sets, "Override any key: section.key=value")->take_all();
        sub->add_flag("--fixed", o.fixed, "Evaluate the [benchmark] fixed rule instead of an optimal policy");
        sub->add_option("--provenance", o.provenance, "Write source months of the first N resamples (backtest)");
        sub->add_flag("--quiet", o.quiet, "No config echo or progress messages");
    }
    CLI11_PARSE(app, argc, argv);
    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const Failure& f) {
        std::fprintf(stderr, "error: %s\n", f.what());
        return 10 + static_cast<int>(f.status);
    }
}
