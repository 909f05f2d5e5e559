#pragma once

#include <iosfwd>
#include <string>

#include "decum/dp_optimizer.hpp"

namespace decum {

// Binary policy file: 8-byte magic, format version, grid metadata, W*, and
// per-date q/p tables as little-endian binary64. Round-trips bit-exactly.
void write_policy(std::ostream& os, const Policy& policy);
Policy read_policy(std::istream& is);

void save_policy(const std::string& path, const Policy& policy);
Policy load_policy(const std::string& path);

}  // namespace decum
