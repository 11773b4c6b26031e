#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace dmin {

// FNV-1a, 64-bit: offset basis 0xcbf29ce484222325, prime 0x100000001b3.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = kFnvOffset);
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t basis = kFnvOffset);

std::string hex64(std::uint64_t value);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws DataError on characters outside the standard alphabet or bad padding.
std::string base64_decode(std::string_view text);

}  // namespace dmin
