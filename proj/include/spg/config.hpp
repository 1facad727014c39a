#ifndef SPG_CONFIG_HPP_
#define SPG_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "spg/dataset.hpp"
#include "spg/training.hpp"

namespace spg {

// Flat "key = value" text with [section] headers and '#' comments.
// Sections: [model], [guidance], [train], [dataset]. Unknown sections or keys
// and duplicate keys are rejected; absent keys keep their documented defaults.
RunConfig parse_run_config(const std::string& text);
DatasetSpec parse_dataset_spec(const std::string& text);
RunConfig load_run_config(const std::string& path);
DatasetSpec load_dataset_spec(const std::string& path);

// Canonical rendering with every key spelled out; parse(to_text(c)) == c.
std::string to_text(const RunConfig& config);
std::string to_text(const DatasetSpec& spec);

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t config_hash(const RunConfig& config);
// Hash of everything except the epoch budget, which a resumed run may extend.
uint64_t resume_hash(const RunConfig& config);

}  // namespace spg

#endif  // SPG_CONFIG_HPP_
