#pragma once

#include <utility>
#include <vector>

#include "xmod/data/manifest.hpp"

namespace xmod {

// Unpaired batch source: one independently epoch-shuffled stream per
// modality, wrapping independently when the shorter side is exhausted.
// Only liver-visible entries are eligible on either side; A-side entries
// carry the masks that feed the segmentation branch.
class UnpairedSampler {
 public:
  UnpairedSampler(const DatasetManifest* a, const DatasetManifest* b, int64_t batch_size,
                  uint64_t seed)
      : a_(a), b_(b), batch_(batch_size) {
    for (size_t i = 0; i < a_->entries.size(); ++i)
      if (a_->entries[i].liver_visible) elig_a_.push_back(i);
    for (size_t i = 0; i < b_->entries.size(); ++i)
      if (b_->entries[i].liver_visible) elig_b_.push_back(i);
    if (elig_a_.empty() || elig_b_.empty())
      throw DataError("unpaired sampler: both datasets must have liver-visible entries");
    if (batch_ < 1) throw DataError("unpaired sampler: batch_size must be >= 1");
    if (batch_ > static_cast<int64_t>(elig_a_.size()) ||
        batch_ > static_cast<int64_t>(elig_b_.size()))
      throw DataError("unpaired sampler: batch_size " + std::to_string(batch_) +
                      " exceeds eligible dataset size (" + std::to_string(elig_a_.size()) + " A, " +
                      std::to_string(elig_b_.size()) + " B)");
    rng_a_ = make_rng(seed, "sampler/a");
    rng_b_ = make_rng(seed, "sampler/b");
    reshuffle(order_a_, elig_a_.size(), rng_a_);
    reshuffle(order_b_, elig_b_.size(), rng_b_);
  }

  int64_t eligible_a() const { return static_cast<int64_t>(elig_a_.size()); }
  int64_t eligible_b() const { return static_cast<int64_t>(elig_b_.size()); }

  // Entry indices for the next batch; the deterministic core of the stream.
  std::pair<std::vector<size_t>, std::vector<size_t>> next_indices() {
    std::vector<size_t> ia, ib;
    for (int64_t k = 0; k < batch_; ++k) {
      if (pos_a_ >= order_a_.size()) {
        reshuffle(order_a_, elig_a_.size(), rng_a_);
        pos_a_ = 0;
      }
      if (pos_b_ >= order_b_.size()) {
        reshuffle(order_b_, elig_b_.size(), rng_b_);
        pos_b_ = 0;
      }
      ia.push_back(elig_a_[order_a_[pos_a_++]]);
      ib.push_back(elig_b_[order_b_[pos_b_++]]);
    }
    return {std::move(ia), std::move(ib)};
  }

  std::pair<std::vector<ImageSlice>, std::vector<ImageSlice>> next() {
    auto [ia, ib] = next_indices();
    std::vector<ImageSlice> batch_a, batch_b;
    for (size_t i : ia) batch_a.push_back(load_slice(*a_, a_->entries[i]));
    for (size_t i : ib) batch_b.push_back(load_slice(*b_, b_->entries[i]));
    return {std::move(batch_a), std::move(batch_b)};
  }

  json state_to_json() const {
    json j;
    j["rng_a"] = serialize_rng(rng_a_);
    j["rng_b"] = serialize_rng(rng_b_);
    j["order_a"] = order_a_;
    j["order_b"] = order_b_;
    j["pos_a"] = pos_a_;
    j["pos_b"] = pos_b_;
    return j;
  }

  void restore(const json& j) {
    rng_a_ = deserialize_rng(j.at("rng_a").get<std::string>());
    rng_b_ = deserialize_rng(j.at("rng_b").get<std::string>());
    order_a_ = j.at("order_a").get<std::vector<size_t>>();
    order_b_ = j.at("order_b").get<std::vector<size_t>>();
    pos_a_ = j.at("pos_a").get<size_t>();
    pos_b_ = j.at("pos_b").get<size_t>();
  }

 private:
  static void reshuffle(std::vector<size_t>& order, size_t n, Rng& rng) {
    order.resize(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
  }

  const DatasetManifest* a_;
  const DatasetManifest* b_;
  int64_t batch_;
  std::vector<size_t> elig_a_, elig_b_;
  std::vector<size_t> order_a_, order_b_;
  size_t pos_a_ = 0, pos_b_ = 0;
  Rng rng_a_, rng_b_;
};

}  // namespace xmod
