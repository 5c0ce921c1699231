#include "odml/stream.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace odml {

std::optional<Triplet> StreamState::push_sample(const Sample& s) {
  std::optional<Triplet> out;
  auto same = latest_.find(s.label);
  if (same != latest_.end()) {
    const Entry* negative = nullptr;
    // map iteration is in class-id order, so equal stamps keep the lower id
    for (const auto& [label, entry] : latest_) {
      if (label == s.label) continue;
      if (negative == nullptr || entry.seen_at > negative->seen_at) negative = &entry;
    }
    if (negative != nullptr) out = Triplet{s, same->second.sample, negative->sample};
  }
  latest_[s.label] = Entry{s, clock_++};
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::vector<Index> epoch_order(Index n, std::uint64_t seed, int epoch) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng(derive_seed(seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<Triplet> epoch_stream(const Dataset& data, int epochs, std::uint64_t seed) {
  if (std::set<int>(data.labels.begin(), data.labels.end()).size() < 2) {
    throw SingleClassError("triplet stream needs at least two classes");
  }
  if (epochs < 1) throw ConfigError("epochs must be positive");
  StreamState state(seed);
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(data.rows()) * static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) {
    state.begin_epoch(e);
    for (Index row : epoch_order(data.rows(), seed, e)) {
      Sample s{data.features.row(row).transpose(), data.labels[static_cast<std::size_t>(row)], row};
      if (auto t = state.push_sample(s)) out.push_back(std::move(*t));
    }
  }
  return out;
}

}  // namespace odml
