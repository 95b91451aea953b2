#pragma once

// Binary checkpoint format for Network:
//   "MLAB" | version u8 (=1) | layer count u8 |
//   per layer: in-dim u32, out-dim u32, activation u8 |
//   per layer: weights (row-major) then biases, little-endian f64 |
//   CRC32 (u32 LE) of every preceding byte.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlab/approximator.h"

namespace mlab {

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kMagic, kVersion, kCrc, kMalformed };

  CheckpointError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> SerializeNetwork(const Network& net);
Network DeserializeNetwork(const std::vector<std::uint8_t>& bytes);

void SaveCheckpoint(const std::filesystem::path& path, const Network& net);
Network LoadCheckpoint(const std::filesystem::path& path);

}  // namespace mlab
