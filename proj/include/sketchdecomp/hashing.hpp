#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchdecomp {

/// Opaque flow identity. Two keys are equal iff their bytes are equal;
/// hashing always consumes the canonical encoding (8-byte little-endian
/// length prefix followed by the raw bytes), so an empty key and a key of
/// zero bytes cannot alias across lengths.
struct FlowKey {
  std::string bytes;

  FlowKey() = default;
  explicit FlowKey(std::string b) : bytes(std::move(b)) {}

  friend bool operator==(const FlowKey&, const FlowKey&) = default;
  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

/// SplitMix64 finalizer. Fully determines every hash in this library;
/// any reimplementation must reproduce it bit for bit.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded family of `depth` row hashes onto columns [0, width).
///
/// Row sub-seeds are derived as mix64(seed + (row+1) * 0x9e3779b97f4a7c15).
/// A key is hashed per row by folding the canonical encoding into the row
/// sub-seed with FNV-1a (prime 0x100000001b3) and passing the result
/// through mix64 before reduction modulo width. Identical (seed, depth,
/// width, key) always yields identical columns.
class HashFamily {
 public:
  HashFamily(int depth, int width, std::uint64_t seed)
      : depth_(depth), width_(width), seed_(seed) {
    if (depth < 2) throw std::invalid_argument("HashFamily: depth must be >= 2");
    if (width < 1) throw std::invalid_argument("HashFamily: width must be >= 1");
    row_seeds_.reserve(static_cast<std::size_t>(depth));
    for (int i = 0; i < depth; ++i) {
      row_seeds_.push_back(mix64(seed + static_cast<std::uint64_t>(i + 1) *
                                            0x9e3779b97f4a7c15ULL));
    }
  }

  int depth() const { return depth_; }
  int width() const { return width_; }
  std::uint64_t seed() const { return seed_; }

  /// Column index of `key` under row hash `row`, in [0, width).
  int column(int row, const FlowKey& key) const {
    std::uint64_t h = row_seeds_[static_cast<std::size_t>(row)];
    std::uint64_t len = key.bytes.size();
    for (int i = 0; i < 8; ++i) {
      h = (h ^ ((len >> (8 * i)) & 0xff)) * 0x100000001b3ULL;
    }
    for (unsigned char b : key.bytes) {
      h = (h ^ b) * 0x100000001b3ULL;
    }
    return static_cast<int>(mix64(h) % static_cast<std::uint64_t>(width_));
  }

  friend bool operator==(const HashFamily& a, const HashFamily& b) {
    return a.depth_ == b.depth_ && a.width_ == b.width_ && a.seed_ == b.seed_;
  }

 private:
  int depth_;
  int width_;
  std::uint64_t seed_;
  std::vector<std::uint64_t> row_seeds_;
};

}  // namespace sketchdecomp

template <>
struct std::hash<sketchdecomp::FlowKey> {
  std::size_t operator()(const sketchdecomp::FlowKey& k) const noexcept {
    return std::hash<std::string>{}(k.bytes);
  }
};
