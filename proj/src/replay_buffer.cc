#include "mlab/replay_buffer.h"

#include <cmath>
#include <stdexcept>

namespace mlab {

SumTree::SumTree(size_t leaves) : leaves_(leaves), base_(1) {
  while (base_ < std::max<size_t>(leaves, 1)) base_ <<= 1;
  nodes_.assign(2 * base_, 0.0);
}

void SumTree::Set(size_t leaf, double weight) {
  size_t i = base_ + leaf;
  nodes_[i] = weight;
  for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

size_t SumTree::Find(double mass) const {
  size_t i = 1;
  while (i < base_) {
    const double left = nodes_[2 * i];
    if (mass < left || nodes_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  // Guard against rounding pushing us onto an empty leaf.
  size_t leaf = i - base_;
  while (leaf > 0 && nodes_[base_ + leaf] <= 0.0) --leaf;
  return leaf;
}

ReplayBuffer::ReplayBuffer(const DemonstrationSet& demos, size_t self_capacity,
                           int n_step, double gamma, PriorityConfig priorities)
    : n_step_(n_step),
      gamma_(gamma),
      config_(priorities),
      self_(self_capacity),
      priorities_(demos.size() + self_capacity, 0.0),
      tree_(demos.size() + self_capacity) {
  if (n_step < 1) throw std::invalid_argument("ReplayBuffer: n_step < 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("ReplayBuffer: gamma outside (0, 1]");
  }
  if (self_capacity > 0 && self_capacity < static_cast<size_t>(n_step)) {
    throw std::invalid_argument("ReplayBuffer: self capacity smaller than n");
  }
  if (!(config_.alpha >= 0.0) || !(config_.eps_demo > 0.0) || !(config_.eps_self > 0.0)) {
    throw std::invalid_argument("ReplayBuffer: bad priority config");
  }
  demos.Validate();

  demo_.reserve(demos.size());
  for (size_t ep = 0; ep < demos.num_episodes(); ++ep) {
    const auto [begin, end] = demos.episode(ep);
    for (size_t t = begin; t < end; ++t) {
      ReplayEntry entry{demos.transitions[t], {}, true};
      const size_t horizon = std::min(end, t + static_cast<size_t>(n_step));
      for (size_t k = t; k < horizon; ++k) {
        Extend(entry.nstep, demos.transitions[k], gamma_);
        if (demos.transitions[k].terminal) break;
      }
      demo_.push_back(entry);
    }
  }
  for (size_t i = 0; i < demo_.size(); ++i) SetPriority(i, max_priority_);
}

void ReplayBuffer::Extend(NStepCache& cache, const Transition& t, double gamma) {
  cache.reward_sum += cache.discount * t.r;
  cache.discount *= gamma;
  cache.bootstrap_state = t.next_s;
  cache.bootstrap = !t.terminal;
  ++cache.length;
}

void ReplayBuffer::AddSelf(const Transition& t, bool episode_end) {
  if (self_.empty()) throw std::logic_error("ReplayBuffer: no self-generated region");
  const size_t slot = self_head_;
  self_[slot] = ReplayEntry{t, {}, false};
  Extend(self_[slot].nstep, t, gamma_);
  for (size_t open_slot : open_) Extend(self_[open_slot].nstep, t, gamma_);
  open_.push_back(slot);
  std::erase_if(open_, [&](size_t s) { return self_[s].nstep.length >= n_step_; });
  if (episode_end || t.terminal) open_.clear();

  SetPriority(demo_.size() + slot, max_priority_);
  self_head_ = (self_head_ + 1) % self_.size();
  self_count_ = std::min(self_count_ + 1, self_.size());
  ++self_added_;
}

const ReplayEntry& ReplayBuffer::at(size_t index) const {
  if (index < demo_.size()) return demo_[index];
  const size_t slot = index - demo_.size();
  if (slot >= self_count_) throw std::out_of_range("ReplayBuffer: empty slot");
  return self_[slot];
}

double ReplayBuffer::SamplingProbability(size_t index) const {
  return tree_.Get(index) / tree_.Total();
}

void ReplayBuffer::SetPriority(size_t index, double p) {
  priorities_[index] = p;
  max_priority_ = std::max(max_priority_, p);
  tree_.Set(index, std::pow(p, config_.alpha));
}

std::vector<size_t> ReplayBuffer::Sample(size_t batch_size, std::mt19937_64& rng) const {
  if (size() == 0) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
  std::uniform_real_distribution<double> mass(0.0, tree_.Total());
  std::vector<size_t> out(batch_size);
  for (auto& idx : out) idx = tree_.Find(mass(rng));
  return out;
}

void ReplayBuffer::UpdatePriorities(std::span<const size_t> indices,
                                    std::span<const double> td_errors) {
  if (indices.size() != td_errors.size()) {
    throw std::invalid_argument("UpdatePriorities: size mismatch");
  }
  for (size_t i = 0; i < indices.size(); ++i) {
    const size_t index = indices[i];
    if (index >= demo_.size() + self_count_) {
      throw std::out_of_range("UpdatePriorities: index out of range");
    }
    if (!std::isfinite(td_errors[i])) {
      throw std::invalid_argument("UpdatePriorities: non-finite TD error");
    }
    const double eps = index < demo_.size() ? config_.eps_demo : config_.eps_self;
    SetPriority(index, std::abs(td_errors[i]) + eps);
  }
}

}  // namespace mlab
