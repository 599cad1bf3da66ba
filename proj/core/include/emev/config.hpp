#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace emev {

// Flat key=value configuration ('#' starts a comment). CLI flags override
// file values.
using KvConfig = std::map<std::string, std::string>;

KvConfig parse_kv_text(const std::string& text);
KvConfig load_kv_file(const std::string& path);
std::string kv_to_text(const KvConfig& cfg);

int kv_get_int(const KvConfig& cfg, const std::string& key, int fallback);
double kv_get_double(const KvConfig& cfg, const std::string& key, double fallback);
std::string kv_get_string(const KvConfig& cfg, const std::string& key, const std::string& fallback);
uint64_t kv_get_u64(const KvConfig& cfg, const std::string& key, uint64_t fallback);

}  // namespace emev
