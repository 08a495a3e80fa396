#pragma once

#include <array>
#include <cstdint>

namespace ksmooth {

/// Philox4x32-10 counter-based generator (Salmon et al. constants).
///
/// Output block b of stream (key) k is philox(counter = b, key = k); the
/// sequence is a pure function of (key, position), so streams can be split by
/// key without coordination and reproduced on any platform.
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox(std::uint64_t key);

  /// Ten rounds of the Philox4x32 bijection.
  static Block encrypt(Block counter, Key key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Standard normal by the Box-Muller transform (cached pair).
  double normal();

 private:
  Key key_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stream key for sub-task `index` of a master seed (SplitMix64 finalizer on the pair).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace ksmooth
