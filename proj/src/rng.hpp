// Deterministic random streams.
//
// A NoiseStream is a value: a root seed plus a path of labels.  Deriving a
// child appends a label; the generator state is a hash fold over the path,
// so equal (seed, path) always yields the same draws regardless of thread
// scheduling or the order streams were created in.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace slowfast {

uint64_t splitmix64(uint64_t& state);
uint64_t hash_label(uint64_t seed, std::string_view label);

class NoiseStream {
 public:
  NoiseStream() : root_(0) {}
  explicit NoiseStream(uint64_t root_seed) : root_(root_seed) {}

  NoiseStream child(std::string_view label) const;
  NoiseStream child_indexed(std::string_view label, long index) const;

  uint64_t root_seed() const { return root_; }
  const std::vector<std::string>& path() const { return path_; }
  // Hash fold of root seed and path labels; seeds the generator.
  uint64_t state_seed() const;

 private:
  uint64_t root_;
  std::vector<std::string> path_;
};

// xoshiro256++ with splitmix64 seeding; normals via the polar method.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  explicit Rng(const NoiseStream& stream) : Rng(stream.state_seed()) {}

  uint64_t next();
  double uniform01();  // in (0, 1)
  double normal();     // standard normal

 private:
  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace slowfast
