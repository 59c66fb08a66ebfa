// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "smoe/model/transformer.hpp"

namespace smoe::model {

inline constexpr const char* kCheckpointMagic = "SMOE-CKPT-1";

/// Text checkpoint:
///   SMOE-CKPT-1
///   config <one-line JSON of ModelConfig plus "k_infer">
///   tensors <count>
///   tensor <name> <rank> <dims...>
///   <hex-float values, space separated>      (one line per tensor)
/// Values are written as C99 hex floats so loading is bit-exact.
void save_checkpoint(SMoETransformer& model, std::ostream& out);
void save_checkpoint(SMoETransformer& model, const std::filesystem::path& path);

/// Throws InputError on a bad magic string, unknown tensor name, or shape mismatch.
SMoETransformer load_checkpoint(std::istream& in);
SMoETransformer load_checkpoint(const std::filesystem::path& path);

}  // namespace smoe::model
