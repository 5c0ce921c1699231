#pragma once

// Online triplet construction: each arriving sample is paired with the most
// recent sample of its own class and the most recent sample of any other
// class.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "odml/dataset.hpp"

namespace odml {

struct Sample {
  Vector features;
  int label = 0;
  Index index = 0;  // row in the source dataset
};

struct Triplet {
  Sample anchor;
  Sample positive;  // same label as anchor
  Sample negative;  // different label
};

class StreamState {
 public:
  explicit StreamState(std::uint64_t seed = 0) : seed_(seed) {}

  /// Emits <s, latest same-class sample, latest other-class sample> when
  /// both exist, then records s as the latest of its class.
  std::optional<Triplet> push_sample(const Sample& s);

  std::size_t num_tracked_classes() const { return latest_.size(); }
  std::uint64_t pushes() const { return clock_; }
  int epoch() const { return epoch_; }
  std::uint64_t seed() const { return seed_; }
  void begin_epoch(int epoch) { epoch_ = epoch; }

 private:
  struct Entry {
    Sample sample;
    std::uint64_t seen_at = 0;
  };
  std::map<int, Entry> latest_;
  std::uint64_t clock_ = 0;
  int epoch_ = 0;
  std::uint64_t seed_ = 0;
};

/// Mixes a base seed with stream coordinates (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Visit order of one epoch: a permutation of [0, n) fixed by (seed, epoch).
std::vector<Index> epoch_order(Index n, std::uint64_t seed, int epoch);

/// `epochs` reshuffled passes over `data` through one persistent StreamState.
std::vector<Triplet> epoch_stream(const Dataset& data, int epochs, std::uint64_t seed);

}  // namespace odml
