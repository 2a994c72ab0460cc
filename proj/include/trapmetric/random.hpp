#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace trapmetric {

/// Derives an independent stream seed from a base seed and a tag so that
/// per-transect and per-observation work is reproducible regardless of batch
/// composition or parallel schedule.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Uniform draw in [0, n) without std::uniform_int_distribution, whose output
/// is implementation-defined; this one is bit-identical everywhere.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(std::mt19937_64& rng);

/// Standard normal via Box-Muller (two engine draws per value).
double gaussian(std::mt19937_64& rng);

}  // namespace trapmetric
