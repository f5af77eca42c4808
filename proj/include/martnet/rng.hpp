#pragma once

#include <cstdint>
#include <cstring>
#include <cmath>
#include <array>

namespace martnet {

// Philox4x32-10 counter-based generator. Every consumer owns an independent
// stream addressed by (seed, stream kind, stream id); draws within a stream
// are addressed by a block counter. No state is shared between streams, so
// path generation parallelises without changing any draw.
struct Philox4x32 {
  static constexpr uint32_t kMul0 = 0xD2511F53u;
  static constexpr uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                       std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      if (round) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const uint64_t p0 = uint64_t(kMul0) * ctr[0];
      const uint64_t p1 = uint64_t(kMul1) * ctr[2];
      ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1),
             uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], uint32_t(p0)};
    }
    return ctr;
  }
};

// Stream kinds; part of the counter so distinct uses never collide.
enum class StreamKind : uint32_t {
  Paths = 1,
  Init = 2,
  Batch = 3,
  Boundary = 4,
  Metrics = 5,
  Misc = 6,
};

// Sequential draws from one Philox stream. Uniforms map 64 bits to (0,1];
// normals come from the Box-Muller transform (fixed choice, two per block).
class RandomStream {
 public:
  RandomStream(uint64_t seed, StreamKind kind, uint64_t id)
      : key_{uint32_t(seed), uint32_t(seed >> 32)},
        base_{uint32_t(id), uint32_t(id >> 32), uint32_t(kind), 0} {}

  // Uniform in (0, 1].
  double uniform() {
    const uint64_t bits = next_u64();
    return double((bits >> 11) + 1) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  void fill_normal(double* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = normal();
  }

  // Uniform integer in [0, bound). Rejection keeps it exact.
  uint64_t uniform_below(uint64_t bound) {
    const uint64_t limit = bound * (UINT64_MAX / bound);
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  uint64_t next_u64() {
    if (word_ == 0) {
      auto ctr = base_;
      ctr[3] = block_++;
      buf_ = Philox4x32::block(ctr, key_);
    }
    const int w = word_;
    word_ = (word_ + 2) & 3;
    return (uint64_t(buf_[w]) << 32) | buf_[w + 1];
  }

 private:
  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> base_;
  std::array<uint32_t, 4> buf_{};
  uint32_t block_ = 0;
  int word_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace martnet
