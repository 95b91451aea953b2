#include "mlab/demonstrations.h"

#include <algorithm>
#include <cmath>

#include "binary_io.h"
#include "mlab/seeds.h"

namespace mlab {

std::pair<size_t, size_t> DemonstrationSet::episode(size_t i) const {
  const size_t begin = episode_starts.at(i);
  const size_t end =
      i + 1 < episode_starts.size() ? episode_starts[i + 1] : transitions.size();
  return {begin, end};
}

size_t DemonstrationSet::CountFullEpisodes(int length) const {
  size_t full = 0;
  for (size_t i = 0; i < num_episodes(); ++i) {
    const auto [b, e] = episode(i);
    if (e - b == static_cast<size_t>(length)) ++full;
  }
  return full;
}

void DemonstrationSet::Validate() const {
  if (transitions.empty()) {
    if (!episode_starts.empty()) throw std::logic_error("demos: episodes without data");
    return;
  }
  if (episode_starts.empty() || episode_starts.front() != 0) {
    throw std::logic_error("demos: first episode must start at 0");
  }
  for (size_t i = 1; i < episode_starts.size(); ++i) {
    if (episode_starts[i] <= episode_starts[i - 1] ||
        episode_starts[i] >= transitions.size()) {
      throw std::logic_error("demos: episode starts not strictly increasing");
    }
  }
  for (size_t ep = 0; ep < num_episodes(); ++ep) {
    const auto [b, e] = episode(ep);
    for (size_t t = b; t + 1 < e; ++t) {
      if (transitions[t].terminal) {
        throw std::logic_error("demos: terminal transition inside an episode");
      }
      if (transitions[t].next_s != transitions[t + 1].s) {
        throw std::logic_error("demos: chaining broken at transition " +
                               std::to_string(t));
      }
    }
  }
}

void DemonstrationSet::Append(const DemonstrationSet& other) {
  const size_t offset = transitions.size();
  transitions.insert(transitions.end(), other.transitions.begin(),
                     other.transitions.end());
  for (size_t s : other.episode_starts) episode_starts.push_back(s + offset);
}

DemonstrationSet CollectDemonstrations(Policy victim, size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("CollectDemonstrations: n must be >= 1");
  DemonstrationSet demos;
  demos.transitions.reserve(n);
  for (std::uint64_t episode = 0; demos.size() < n; ++episode) {
    demos.episode_starts.push_back(demos.size());
    EnvState s = ResetCartPole(DeriveSeed(seed, episode));
    while (!s.done && demos.size() < n) {
      const Observation obs = s.observation();
      const int a = victim.Act(obs);
      const StepResult r = StepCartPole(s, a);
      demos.transitions.push_back(
          {obs, a, r.reward, r.next_state.observation(), r.terminal && !r.truncated});
      s = r.next_state;
    }
  }
  return demos;
}

std::pair<DemonstrationSet, DemonstrationSet> SplitByEpisode(
    const DemonstrationSet& demos, double heldout_fraction) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw std::invalid_argument("SplitByEpisode: fraction must lie in (0, 1)");
  }
  if (demos.size() < 2) throw std::invalid_argument("SplitByEpisode: too few demos");
  DemonstrationSet train, heldout;
  const size_t episodes = demos.num_episodes();
  if (episodes == 1) {
    const size_t cut = demos.size() - std::max<size_t>(
        1, static_cast<size_t>(std::ceil(heldout_fraction * demos.size())));
    train.transitions.assign(demos.transitions.begin(), demos.transitions.begin() + cut);
    train.episode_starts = {0};
    heldout.transitions.assign(demos.transitions.begin() + cut, demos.transitions.end());
    heldout.episode_starts = {0};
    return {train, heldout};
  }
  const size_t held = std::clamp<size_t>(
      static_cast<size_t>(std::ceil(heldout_fraction * episodes)), 1, episodes - 1);
  const size_t cut = demos.episode_starts[episodes - held];
  train.transitions.assign(demos.transitions.begin(), demos.transitions.begin() + cut);
  train.episode_starts.assign(demos.episode_starts.begin(),
                              demos.episode_starts.end() - held);
  heldout.transitions.assign(demos.transitions.begin() + cut, demos.transitions.end());
  for (size_t i = episodes - held; i < episodes; ++i) {
    heldout.episode_starts.push_back(demos.episode_starts[i] - cut);
  }
  return {train, heldout};
}

void SaveDemonstrations(const std::filesystem::path& path, const DemonstrationSet& demos) {
  internal::ByteWriter w;
  w.PutBytes("DEMO", 4);
  w.PutU8(1);
  w.PutU32(kStateDim);
  w.PutU64(demos.size());
  for (const Transition& t : demos.transitions) {
    for (double v : t.s) w.PutF64(v);
    w.PutU64(static_cast<std::uint64_t>(t.a));
    w.PutF64(t.r);
    for (double v : t.next_s) w.PutF64(v);
    w.PutU64(t.terminal ? 1 : 0);
  }
  w.PutU64(demos.num_episodes());
  for (size_t s : demos.episode_starts) w.PutU64(s);
  internal::WriteFileBytes(path, w.bytes());
}

DemonstrationSet LoadDemonstrations(const std::filesystem::path& path) {
  const auto bytes = internal::ReadFileBytes(path);
  internal::ByteReader r(bytes.data(), bytes.size());
  if (!r.Tag("DEMO", 4)) throw DemoFormatError("demo file: bad magic");
  if (const auto version = r.U8(); version != 1) {
    throw DemoFormatError("demo file: unsupported version " + std::to_string(version));
  }
  if (r.U32() != kStateDim) throw DemoFormatError("demo file: state dim mismatch");
  const std::uint64_t count = r.U64();
  constexpr size_t kRecordBytes = 8 * (2 * kStateDim + 3);
  if (!r.ok() || count > r.remaining() / kRecordBytes) {
    throw DemoFormatError("demo file: truncated transition block");
  }
  DemonstrationSet demos;
  demos.transitions.resize(count);
  for (Transition& t : demos.transitions) {
    for (double& v : t.s) v = r.F64();
    const std::uint64_t a = r.U64();
    if (a >= static_cast<std::uint64_t>(kCartPoleActions)) {
      throw DemoFormatError("demo file: action out of range");
    }
    t.a = static_cast<int>(a);
    t.r = r.F64();
    for (double& v : t.next_s) v = r.F64();
    t.terminal = r.U64() != 0;
  }
  const std::uint64_t episodes = r.U64();
  if (!r.ok() || episodes > r.remaining() / 8) {
    throw DemoFormatError("demo file: truncated episode index");
  }
  demos.episode_starts.resize(episodes);
  for (size_t& s : demos.episode_starts) s = r.U64();
  if (!r.ok() || r.remaining() != 0) {
    throw DemoFormatError("demo file: unexpected trailing bytes");
  }
  try {
    demos.Validate();
  } catch (const std::logic_error& e) {
    throw DemoFormatError(std::string("demo file: ") + e.what());
  }
  return demos;
}

}  // namespace mlab
