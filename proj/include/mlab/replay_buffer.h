#pragma once

// Two-region prioritized replay for learning from demonstrations.
//
// Global indices [0, demo_size) address the demonstration region, which is
// written once at construction and never modified afterwards (only its
// priorities change). Indices [demo_size, demo_size + self_capacity) address
// the slots of the self-generated ring; once it is full the oldest
// self-generated entry is overwritten.
//
// Every entry caches its n-step lookahead: the discounted reward sum over up
// to n steps of its own episode, the state to bootstrap from and gamma^m.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mlab/demonstrations.h"

namespace mlab {

struct NStepCache {
  double reward_sum = 0.0;
  double discount = 1.0;  // gamma^m for the m steps summed
  Observation bootstrap_state{};
  bool bootstrap = false;
  int length = 0;

  friend bool operator==(const NStepCache&, const NStepCache&) = default;
};

struct ReplayEntry {
  Transition transition;
  NStepCache nstep;
  bool demo = false;

  friend bool operator==(const ReplayEntry&, const ReplayEntry&) = default;
};

struct PriorityConfig {
  double alpha = 0.4;
  double eps_demo = 1.0;
  double eps_self = 0.001;
};

// Binary sum tree over leaf weights; O(log n) update and proportional draw.
class SumTree {
 public:
  explicit SumTree(size_t leaves);

  void Set(size_t leaf, double weight);
  double Get(size_t leaf) const { return nodes_[base_ + leaf]; }
  double Total() const { return nodes_[1]; }
  // Leaf whose cumulative weight interval contains `mass` in [0, Total()).
  size_t Find(double mass) const;
  size_t size() const { return leaves_; }

 private:
  size_t leaves_;
  size_t base_;
  std::vector<double> nodes_;
};

class ReplayBuffer {
 public:
  ReplayBuffer(const DemonstrationSet& demos, size_t self_capacity, int n_step,
               double gamma, PriorityConfig priorities);

  // `episode_end` closes the lookahead chain (failure or truncation).
  void AddSelf(const Transition& t, bool episode_end);

  size_t demo_size() const { return demo_.size(); }
  size_t self_size() const { return self_count_; }
  size_t self_capacity() const { return self_.size(); }
  size_t size() const { return demo_size() + self_size(); }
  std::uint64_t self_added() const { return self_added_; }

  const ReplayEntry& at(size_t index) const;
  double priority(size_t index) const { return priorities_.at(index); }
  // priority^alpha / sum_j priority_j^alpha.
  double SamplingProbability(size_t index) const;

  std::vector<size_t> Sample(size_t batch_size, std::mt19937_64& rng) const;
  // priority <- |td error| + eps_demo (or eps_self).
  void UpdatePriorities(std::span<const size_t> indices,
                        std::span<const double> td_errors);

 private:
  void SetPriority(size_t index, double p);
  static void Extend(NStepCache& cache, const Transition& t, double gamma);

  int n_step_;
  double gamma_;
  PriorityConfig config_;
  std::vector<ReplayEntry> demo_;
  std::vector<ReplayEntry> self_;
  size_t self_head_ = 0;
  size_t self_count_ = 0;
  std::uint64_t self_added_ = 0;
  // Ring slots of the current self-generated episode whose lookahead is
  // still shorter than n.
  std::vector<size_t> open_;
  std::vector<double> priorities_;
  double max_priority_ = 1.0;
  SumTree tree_;
};

}  // namespace mlab
