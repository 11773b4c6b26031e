#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dmin/model.hpp"

namespace dmin {

inline constexpr int kCheckpointVersion = 1;

// Single JSON document:
//   {"checksum": "<fnv1a64 hex>", "format": "dmin-checkpoint", "model": {...},
//    "tensors": [{"data": "<base64 LE float64>", "name": ..., "shape": [...]}],
//    "trained_stages": n, "version": 1}
// The checksum covers the compact dump of the document without "checksum".
std::string serialize_checkpoint(const Model& model);

// Throws DataError on corruption or a version mismatch, ShapeError when a
// tensor or the model dimension disagrees with `expected_dim`.
Model parse_checkpoint(std::string_view text, std::optional<std::size_t> expected_dim = std::nullopt);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path, std::optional<std::size_t> expected_dim = std::nullopt);

}  // namespace dmin
