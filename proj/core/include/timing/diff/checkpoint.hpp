#pragma once

#include <string>
#include <utility>
#include <vector>

#include "timing/diff/parameter.hpp"

namespace timing::diff {

// On-disk model state. A checkpoint is a versioned text file:
//
//   timingckpt v1
//   config <single-line JSON with the model configuration>
//   params <count>
//   param <name> <rank> <dim0> <dim1> ...
//   <hexfloat values, 8 per line>
//   ...
//   end <fnv1a-64 of every byte above this line>
//
// Hexfloat keeps doubles exact across save/load; the trailing hash rejects
// truncated or edited files.
struct Checkpoint {
    std::string config_json;
    std::vector<std::pair<std::string, Array>> entries;
};

void save_checkpoint(const std::string& path, const std::string& config_json,
                     const std::vector<Parameter>& params);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into an existing ParamSet. Every checkpoint entry
// must match a registered parameter in name and shape, and every parameter
// must be covered; anything else throws.
void assign_from_checkpoint(const Checkpoint& ckpt, ParamSet& params);

}  // namespace timing::diff
