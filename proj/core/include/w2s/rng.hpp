#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., Random123), used for
// every random draw so that splits, batching and synthetic data are stable
// across platforms.
//
// Stream layout: key = (seed low 32 bits, seed high 32 bits); counter words
// 0-1 hold the 64-bit block index, words 2-3 hold a 64-bit stream id. Named
// streams use id = FNV-1a-64(name). Each block yields four u32 outputs,
// consumed in order; u64 = lo | hi << 32 from two consecutive outputs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace w2s {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// The raw 10-round bijection.
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

std::uint64_t fnv1a64(std::string_view text) noexcept;

class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream_id) noexcept;
  Philox(std::uint64_t seed, std::string_view stream_name) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Unbiased integer in [0, n), by rejection on u64. n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; caches the second variate.
  double normal() noexcept;

 private:
  PhiloxKey key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  std::size_t used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// In-place Fisher-Yates: for i = n-1 down to 1 swap items[i] with
/// items[below(i + 1)].
template <typename T>
void shuffle(std::span<T> items, Philox& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// 0..n-1 shuffled.
std::vector<std::size_t> permutation(std::size_t n, Philox& rng);

}  // namespace w2s
