#pragma once

// Passively observed victim transitions, grouped into contiguous episodes.
//
// File layout (little-endian):
//   "DEMO" | version u8 (=1) | state dim u32 | count u64 |
//   count x { s f64[dim], a u64, r f64, s' f64[dim], terminal u64 } |
//   episode count u64 | episode start indices u64[episode count]

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mlab/dqn.h"
#include "mlab/policy.h"

namespace mlab {

class DemoFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DemonstrationSet {
  std::vector<Transition> transitions;
  // Index of the first transition of every episode; starts with 0.
  std::vector<size_t> episode_starts;

  size_t size() const { return transitions.size(); }
  size_t num_episodes() const { return episode_starts.size(); }
  // Half-open [begin, end) range of episode i.
  std::pair<size_t, size_t> episode(size_t i) const;
  // Number of episodes that ran to the step cap.
  size_t CountFullEpisodes(int length) const;

  // Throws std::logic_error if segments are not contiguous or if a
  // successor's state differs from its predecessor's next state.
  void Validate() const;

  void Append(const DemonstrationSet& other);
};

// Runs the victim in fresh episodes (episode e starts from
// ResetCartPole(DeriveSeed(seed, e))) until n transitions are recorded. The
// last transition of an episode is terminal only when the pole fell or the
// cart left the track; cap-truncated and count-truncated episodes are not.
DemonstrationSet CollectDemonstrations(Policy victim, size_t n, std::uint64_t seed);

// Whole episodes: the last ceil(fraction * episodes) go to the held-out
// side. A single-episode set is split by transitions instead.
std::pair<DemonstrationSet, DemonstrationSet> SplitByEpisode(
    const DemonstrationSet& demos, double heldout_fraction);

void SaveDemonstrations(const std::filesystem::path& path, const DemonstrationSet& demos);
DemonstrationSet LoadDemonstrations(const std::filesystem::path& path);

}  // namespace mlab
