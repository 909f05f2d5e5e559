#include "decum/run_config.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "decum/error.hpp"
#include "decum/format.hpp"

namespace decum {
namespace {

std::string fmt(double v) { return shortest(v); }

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

double to_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(trim(text), &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != trim(text).size()) fail(ErrorCode::Parse, key + ": not a number: '" + text + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(trim(text), &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != trim(text).size()) fail(ErrorCode::Parse, key + ": not an integer: '" + text + "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    fail(ErrorCode::Parse, key + ": not a boolean: '" + text + "'");
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
    bool hashed = true;
};

template <class Get>
Field real(Get g) {
    return {[g](RunConfig& c, const std::string& k, const std::string& v) { g(c) = to_double(k, v); },
            [g](const RunConfig& c) { return fmt(g(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field integer(Get g) {
    return {[g](RunConfig& c, const std::string& k, const std::string& v) {
                using T = std::remove_reference_t<decltype(g(c))>;
                const long long x = to_int(k, v);
                if (x < static_cast<long long>(std::numeric_limits<T>::min()) ||
                    static_cast<unsigned long long>(x) > static_cast<unsigned long long>(std::numeric_limits<T>::max()))
                    fail(ErrorCode::Parse, k + ": out of range: '" + v + "'");
                g(c) = static_cast<T>(x);
            },
            [g](const RunConfig& c) { return std::to_string(g(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field text(Get g, bool hashed = true) {
    return {[g](RunConfig& c, const std::string&, const std::string& v) { g(c) = trim(v); },
            [g](const RunConfig& c) { return g(const_cast<RunConfig&>(c)); }, hashed};
}

void set_ladder_geometry(RunConfig& c, const std::function<void(GridConfig&)>& f) {
    for (auto& g : c.ladder) f(g);
}

template <class Member>
Field grid_real(Member m) {
    return {[m](RunConfig& c, const std::string& k, const std::string& v) {
                const double x = to_double(k, v);
                set_ladder_geometry(c, [&](GridConfig& g) { g.*m = x; });
            },
            [m](const RunConfig& c) { return fmt(c.ladder.front().*m); }};
}

std::string ladder_text(const RunConfig& c) {
    std::string out;
    for (std::size_t i = 0; i < c.ladder.size(); ++i)
        out += (i ? "," : "") + std::to_string(c.ladder[i].n_x) + "x" + std::to_string(c.ladder[i].n_y);
    return out;
}

// Ordered so that the resolved echo groups keys by section.
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto add = [&](std::string k, Field f) { t.emplace_back(std::move(k), std::move(f)); };
        add("run.mode", text([](RunConfig& c) -> std::string& { return c.mode; }, false));
        add("run.output", text([](RunConfig& c) -> std::string& { return c.output_dir; }, false));
        add("run.policy", text([](RunConfig& c) -> std::string& { return c.policy_path; }, false));
        add("run.workers", {[](RunConfig& c, const std::string& k, const std::string& v) {
                                c.workers = static_cast<int>(to_int(k, v));
                            },
                            [](const RunConfig& c) { return std::to_string(c.workers); }, false});

        auto asset = [&](const std::string& name, AssetParams MarketModel::*a) {
            add("market." + name + "_mu", real([a](RunConfig& c) -> double& { return (c.market.*a).mu; }));
            add("market." + name + "_sigma", real([a](RunConfig& c) -> double& { return (c.market.*a).sigma; }));
            add("market." + name + "_jump_intensity",
                real([a](RunConfig& c) -> double& { return (c.market.*a).jump.intensity; }));
            add("market." + name + "_jump_p_up", real([a](RunConfig& c) -> double& { return (c.market.*a).jump.p_up; }));
            add("market." + name + "_jump_eta_up",
                real([a](RunConfig& c) -> double& { return (c.market.*a).jump.eta_up; }));
            add("market." + name + "_jump_eta_down",
                real([a](RunConfig& c) -> double& { return (c.market.*a).jump.eta_down; }));
        };
        asset("stock", &MarketModel::stock);
        asset("bond", &MarketModel::bond);
        add("market.rho", real([](RunConfig& c) -> double& { return c.market.rho; }));
        add("market.borrow_spread", real([](RunConfig& c) -> double& { return c.market.borrow_spread; }));

        add("scenario.horizon", real([](RunConfig& c) -> double& { return c.scenario.horizon; }));
        add("scenario.rebalances", integer([](RunConfig& c) -> int& { return c.scenario.rebalances; }));
        add("scenario.initial_wealth", real([](RunConfig& c) -> double& { return c.scenario.initial_wealth; }));
        add("scenario.q_min", real([](RunConfig& c) -> double& { return c.scenario.q_min; }));
        add("scenario.q_max", real([](RunConfig& c) -> double& { return c.scenario.q_max; }));
        add("scenario.alpha", real([](RunConfig& c) -> double& { return c.scenario.alpha; }));
        add("scenario.kappa", real([](RunConfig& c) -> double& { return c.scenario.kappa; }));
        add("scenario.epsilon", real([](RunConfig& c) -> double& { return c.scenario.epsilon; }));
        add("scenario.discount", real([](RunConfig& c) -> double& { return c.scenario.discount; }));
        add("scenario.q_step", real([](RunConfig& c) -> double& { return c.scenario.q_step; }));
        add("scenario.p_count", integer([](RunConfig& c) -> int& { return c.scenario.p_count; }));

        add("grid.ladder", {[](RunConfig& c, const std::string&, const std::string& v) {
                                c.ladder = parse_ladder(v, c.ladder.front());
                            },
                            ladder_text});
        add("grid.center", grid_real(&GridConfig::center));
        add("grid.half_width", grid_real(&GridConfig::half_width));
        add("grid.extension", grid_real(&GridConfig::extension));
        add("grid.padding_fraction", grid_real(&GridConfig::padding_fraction));
        add("grid.n_debt", {[](RunConfig& c, const std::string& k, const std::string& v) {
                                const int n = static_cast<int>(to_int(k, v));
                                set_ladder_geometry(c, [&](GridConfig& g) { g.n_debt = n; });
                            },
                            [](const RunConfig& c) { return std::to_string(c.ladder.front().n_debt); }});

        add("wstar.scan_min", real([](RunConfig& c) -> double& { return c.wstar.scan_min; }));
        add("wstar.scan_max", real([](RunConfig& c) -> double& { return c.wstar.scan_max; }));
        add("wstar.scan_step", real([](RunConfig& c) -> double& { return c.wstar.scan_step; }));
        add("wstar.tolerance", real([](RunConfig& c) -> double& { return c.wstar.tolerance; }));

        add("frontier.kappa", {[](RunConfig& c, const std::string&, const std::string& v) { c.kappas = parse_list(v); },
                               [](const RunConfig& c) { return join(c.kappas); }});

        add("simulation.paths", integer([](RunConfig& c) -> std::size_t& { return c.paths; }));
        add("simulation.seed", integer([](RunConfig& c) -> std::uint64_t& { return c.seed; }));

        add("benchmark.weights",
            {[](RunConfig& c, const std::string&, const std::string& v) { c.benchmark_weights = parse_list(v); },
             [](const RunConfig& c) { return join(c.benchmark_weights); }});
        add("benchmark.equity", real([](RunConfig& c) -> double& { return c.fixed.equity; }));
        add("benchmark.withdrawal", real([](RunConfig& c) -> double& { return c.fixed.withdrawal; }));
        add("benchmark.market", text([](RunConfig& c) -> std::string& { return c.benchmark_market; }));

        add("bootstrap.series", text([](RunConfig& c) -> std::string& { return c.series_path; }));
        add("bootstrap.blocksize", real([](RunConfig& c) -> double& { return c.bootstrap.blocksize; }));
        add("bootstrap.resamples", integer([](RunConfig& c) -> std::size_t& { return c.bootstrap.resamples; }));
        add("bootstrap.seed", integer([](RunConfig& c) -> std::uint64_t& { return c.bootstrap.seed; }));
        add("bootstrap.months_per_period", integer([](RunConfig& c) -> int& { return c.bootstrap.months_per_period; }));
        add("bootstrap.debug", {[](RunConfig& c, const std::string& k, const std::string& v) {
                                    c.bootstrap.debug = to_bool(k, v);
                                },
                                [](const RunConfig& c) { return std::string(c.bootstrap.debug ? "true" : "false"); }});
        return t;
    }();
    return table;
}

const Field& field(const std::string& key) {
    for (const auto& [k, f] : fields())
        if (k == key) return f;
    fail(ErrorCode::Parse, "unknown config key '" + key + "'");
}

std::string render(const RunConfig& c, bool hashed_only) {
    std::string out, section;
    for (const auto& [key, f] : fields()) {
        if (hashed_only && !f.hashed) continue;
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + f.get(c) + "\n";
    }
    return out;
}

}  // namespace

RunConfig::RunConfig() {
    GridConfig coarse;
    coarse.n_x = coarse.n_y = 256;
    ladder = {coarse, GridConfig{}};
    bootstrap.horizon = scenario.horizon;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    if (trim(text).empty()) return out;
    for (std::string item; std::getline(in, item, ',');) out.push_back(to_double("list", item));
    return out;
}

std::vector<GridConfig> parse_ladder(const std::string& text, const GridConfig& base) {
    std::vector<GridConfig> out;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        item = trim(item);
        if (item.empty()) continue;
        GridConfig g = base;
        const auto x = item.find('x');
        if (x == std::string::npos) {
            g.n_x = g.n_y = static_cast<int>(to_int("grid", item));
        } else {
            g.n_x = static_cast<int>(to_int("grid", item.substr(0, x)));
            g.n_y = static_cast<int>(to_int("grid", item.substr(x + 1)));
        }
        out.push_back(g);
    }
    require(!out.empty(), "grid ladder is empty", ErrorCode::Parse);
    return out;
}

std::vector<std::string> validate(const RunConfig& c) {
    static const std::vector<std::string> modes = {"solve", "simulate", "backtest", "frontier", "benchmark"};
    require(std::find(modes.begin(), modes.end(), c.mode) != modes.end(), "run.mode: unknown mode '" + c.mode + "'");
    validate(c.market);
    validate(c.scenario);
    require(!c.ladder.empty(), "grid ladder is empty");
    for (std::size_t i = 0; i < c.ladder.size(); ++i) {
        build_grids(c.ladder[i]);
        if (i > 0)
            require(c.ladder[i].n_x >= c.ladder[i - 1].n_x && c.ladder[i].n_y >= c.ladder[i - 1].n_y,
                    "grid ladder must run coarse to fine");
    }
    require(c.wstar.scan_step > 0.0 && c.wstar.scan_max > c.wstar.scan_min && c.wstar.tolerance > 0.0,
            "wstar: bad scan range");
    require(c.paths >= 1, "simulation.paths must be at least 1");
    require(c.workers >= 0, "run.workers must be >= 0");
    require(c.fixed.equity >= 0.0 && c.fixed.equity <= 1.0, "benchmark.equity must lie in [0,1]");
    for (double w : c.benchmark_weights) require(w >= 0.0 && w <= 1.0, "benchmark.weights must lie in [0,1]");
    require(c.benchmark_market == "synthetic" || c.benchmark_market == "bootstrap" || c.benchmark_market == "both",
            "benchmark.market must be synthetic, bootstrap or both");
    validate(c.bootstrap);
    require(std::abs(c.bootstrap.horizon - c.scenario.horizon) < 1e-9, "bootstrap horizon differs from scenario",
            ErrorCode::Mismatch);
    if (c.mode == "frontier") require(!c.kappas.empty(), "frontier.kappa list is empty");

    std::vector<std::string> warnings;
    std::vector<double> ks = c.kappas;
    ks.push_back(c.scenario.kappa);
    for (double k : ks) {
        require(k > 0.0, "kappa must be positive");
        require(k <= kKappaMax, "kappa " + fmt(k) + " exceeds the supported maximum 1e5", ErrorCode::Range);
        if (k > kKappaWarn) warnings.push_back("kappa " + fmt(k) + " above 1e3: solutions may be inaccurate");
    }
    return warnings;
}

RunConfig parse_config(std::istream& is) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorCode::Parse, std::string("config: ") + e.what());
    }
    RunConfig c;
    // Ladder geometry keys apply to every rung, so the ladder itself goes first.
    if (auto grid = tree.get_child_optional("grid"))
        if (auto ladder = grid->get_optional<std::string>("ladder")) set_config_value(c, "grid.ladder", *ladder);
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            fail(ErrorCode::Parse, "config: key '" + section + "' outside any section");
        for (const auto& [key, value] : body) {
            if (section == "grid" && key == "ladder") continue;
            set_config_value(c, section + "." + key, value.data());
        }
    }
    c.bootstrap.horizon = c.scenario.horizon;
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::Io, "cannot open config " + path);
    return parse_config(is);
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
    field(key).set(c, key, value);
    c.bootstrap.horizon = c.scenario.horizon;
}

std::string get_config_value(const RunConfig& c, const std::string& key) { return field(key).get(c); }

std::string resolved_ini(const RunConfig& c) { return render(c, false); }

std::string config_digest(const RunConfig& c) {
    const std::string text = render(c, true);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::Numeric, "sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

std::uint64_t config_hash(const RunConfig& c) { return std::stoull(config_digest(c).substr(0, 16), nullptr, 16); }

}  // namespace decum
