#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace towerlab {

// Philox4x64-10 block function (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Maps a 256-bit counter and a 128-bit key to 256 bits.
std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> counter,
                                        std::array<std::uint64_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

inline double to_unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based random stream keyed by (seed, stream id). Any position can be
// read directly; the same (seed, stream id, position) always yields the same
// value, so replicates need no shared generator state.
class InnovationStream {
 public:
  InnovationStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t id() const { return id_; }
  std::uint64_t position() const { return position_; }
  void seek(std::uint64_t position) { position_ = position; }

  std::uint64_t bits_at(std::uint64_t position);
  double uniform_at(std::uint64_t position) { return to_unit_double(bits_at(position)); }

  std::uint64_t next_bits() { return bits_at(position_++); }
  double next_uniform() { return to_unit_double(next_bits()); }

  // Independent stream derived from this one; distinct tags give distinct ids.
  InnovationStream substream(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t id_;
  std::uint64_t position_ = 0;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::array<std::uint64_t, 4> cache_{};
};

// Stream-id tags used throughout the library. Keeping them in one place makes
// it easy to see that path innovations and start states never share a stream.
namespace stream_tag {
inline constexpr std::uint64_t start_a = 0x5354415254000001ULL;
inline constexpr std::uint64_t start_b = 0x5354415254000002ULL;
inline constexpr std::uint64_t fresh_future = 0x4655545552450001ULL;
inline constexpr std::uint64_t fresh_past = 0x5041535400000001ULL;
inline constexpr std::uint64_t replicate = 0x5245504c00000001ULL;
inline constexpr std::uint64_t bootstrap = 0x424f4f5400000001ULL;
inline constexpr std::uint64_t comparator = 0x434f4d5000000001ULL;
inline constexpr std::uint64_t tower_tail = 0x5441494c00000001ULL;
}  // namespace stream_tag

// Seed of an independent experiment derived from a parent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

// Walker/Vose alias table: O(1) sampling from a finite discrete law using a
// single uniform draw.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> weights);

  std::uint32_t sample(double u) const;
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace towerlab
