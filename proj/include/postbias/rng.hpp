#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace postbias {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed of the named sub-stream `name` at `indices` below `master`.
///
/// All randomness in the library flows through this function, so a run is a
/// pure function of its master seed. Different (name, indices) tuples give
/// unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  std::vector<std::uint32_t> words;
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(master);
  push(detail::fnv1a(name));
  for (auto i : indices) push(i);
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace postbias
