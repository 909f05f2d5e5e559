#include "decum/policy_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "decum/error.hpp"

namespace decum {
namespace {

constexpr char kMagic[8] = {'D', 'E', 'C', 'U', 'M', 'P', 'O', 'L'};
static_assert(std::endian::native == std::endian::little, "policy files are written little-endian");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::Parse, "policy file truncated");
    return v;
}

void put_array(std::ostream& os, const std::vector<double>& v) {
    put<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_array(std::istream& is, std::uint64_t expected) {
    const auto n = get<std::uint64_t>(is);
    if (n != expected) fail(ErrorCode::Parse, "policy file: table length does not match the wealth nodes");
    std::vector<double> v(n);
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
        fail(ErrorCode::Parse, "policy file truncated");
    return v;
}

}  // namespace

void write_policy(std::ostream& os, const Policy& p) {
    require(static_cast<int>(p.q.size()) == p.rebalances + 1 && p.q.size() == p.p.size(),
            "write_policy: tables do not cover every rebalancing date");
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, Policy::kFormatVersion);
    put<std::int32_t>(os, p.grid.n_x);
    put<std::int32_t>(os, p.grid.n_y);
    put<std::int32_t>(os, p.grid.n_debt);
    put(os, p.grid.center);
    put(os, p.grid.half_width);
    put(os, p.grid.extension);
    put(os, p.grid.padding_fraction);
    put(os, p.wstar);
    put(os, p.value);
    put(os, p.horizon);
    put<std::int32_t>(os, p.rebalances);
    put(os, p.q_min);
    put(os, p.q_max);
    put<std::uint64_t>(os, p.config_hash);
    put_array(os, p.wealth_nodes);
    for (const auto& row : p.q) put_array(os, row);
    for (const auto& row : p.p) put_array(os, row);
    if (!os) fail(ErrorCode::Io, "write_policy: stream error");
}

Policy read_policy(std::istream& is) {
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        fail(ErrorCode::Parse, "not a policy file (bad magic)");
    const auto version = get<std::uint32_t>(is);
    if (version != Policy::kFormatVersion)
        fail(ErrorCode::Parse, "unsupported policy format version " + std::to_string(version));
    Policy p;
    p.grid.n_x = get<std::int32_t>(is);
    p.grid.n_y = get<std::int32_t>(is);
    p.grid.n_debt = get<std::int32_t>(is);
    p.grid.center = get<double>(is);
    p.grid.half_width = get<double>(is);
    p.grid.extension = get<double>(is);
    p.grid.padding_fraction = get<double>(is);
    p.wstar = get<double>(is);
    p.value = get<double>(is);
    p.horizon = get<double>(is);
    p.rebalances = get<std::int32_t>(is);
    p.q_min = get<double>(is);
    p.q_max = get<double>(is);
    p.config_hash = get<std::uint64_t>(is);
    if (p.rebalances < 1 || p.rebalances > 100000) fail(ErrorCode::Parse, "policy file: bad rebalance count");
    const auto n = get<std::uint64_t>(is);
    if (n == 0 || n > (1u << 24)) fail(ErrorCode::Parse, "policy file: bad node count");
    p.wealth_nodes.resize(n);
    if (!is.read(reinterpret_cast<char*>(p.wealth_nodes.data()), static_cast<std::streamsize>(n * sizeof(double))))
        fail(ErrorCode::Parse, "policy file truncated");
    for (int d = 0; d <= p.rebalances; ++d) p.q.push_back(get_array(is, n));
    for (int d = 0; d <= p.rebalances; ++d) p.p.push_back(get_array(is, n));
    return p;
}

void save_policy(const std::string& path, const Policy& policy) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot open " + path + " for writing");
    write_policy(os, policy);
}

Policy load_policy(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open " + path);
    return read_policy(is);
}

}  // namespace decum
