#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cremid/draws.hpp"
#include "cremid/model.hpp"
#include "cremid/sampler.hpp"

namespace cremid {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);
double parse_double(const std::string& text, const std::string& where);

// CSV with header `sample,dim_1,...,dim_p`. Samples appear in order of first
// appearance; rows of different samples may be interleaved.
MultiSampleDataset read_dataset(std::istream& in, const std::string& source);
MultiSampleDataset read_dataset(const std::filesystem::path& path);
void write_dataset(const MultiSampleDataset& data, std::ostream& out);
void write_dataset(const MultiSampleDataset& data, const std::filesystem::path& path);

struct ConfigEntry {
  std::string key;
  std::string value;
  std::string where;  // "file:line" for diagnostics
};

/// Flat `key=value` lines with dotted keys; `#` starts a comment.
std::vector<ConfigEntry> parse_config(std::istream& in, const std::string& source);
std::vector<ConfigEntry> parse_config(const std::filesystem::path& path);

struct RunConfig {
  HyperParams hp;
  SamplerConfig sampler;
  int chains = 1;
};

/// Data-centred defaults overridden by `entries`. Unknown keys and bad values
/// throw ValidationError naming the entry's location.
RunConfig resolve_config(const MultiSampleDataset& data, const std::vector<ConfigEntry>& entries);

/// Every setting as explicit key/value pairs. Feeding the result back through
/// resolve_config reproduces the same configuration exactly.
std::vector<std::pair<std::string, std::string>> describe_config(const RunConfig& cfg);

// Run directory layout: meta.json, scalars.jsonl, clusters.jsonl and,
// when the accumulator is present, calibration.jsonl.
void persist_draws(const ChainDraws& draws, const std::filesystem::path& dir);
ChainDraws load_draws(const std::filesystem::path& dir);

}  // namespace cremid
