#include "mlab/checkpoint.h"

#include "binary_io.h"

namespace mlab {

using internal::ByteReader;
using internal::ByteWriter;

std::vector<std::uint8_t> SerializeNetwork(const Network& net) {
  const auto& layers = net.layers();
  if (layers.size() > 255) {
    throw std::invalid_argument("checkpoint: too many layers");
  }
  ByteWriter w;
  w.PutBytes("MLAB", 4);
  w.PutU8(kCheckpointVersion);
  w.PutU8(static_cast<std::uint8_t>(layers.size()));
  for (const auto& layer : layers) {
    w.PutU32(static_cast<std::uint32_t>(layer.in_dim()));
    w.PutU32(static_cast<std::uint32_t>(layer.out_dim()));
    w.PutU8(static_cast<std::uint8_t>(layer.activation));
  }
  for (const auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        w.PutF64(layer.weights(r, c));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.PutF64(layer.bias(r));
  }
  w.PutCrc();
  return std::move(w.bytes());
}

Network DeserializeNetwork(const std::vector<std::uint8_t>& bytes) {
  using Kind = CheckpointError::Kind;
  ByteReader header(bytes.data(), bytes.size());
  if (!header.Tag("MLAB", 4)) {
    throw CheckpointError(Kind::kMagic, "checkpoint: bad magic");
  }
  const std::uint8_t version = header.U8();
  if (!header.ok()) throw CheckpointError(Kind::kCrc, "checkpoint: truncated");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersion, "checkpoint: unsupported version " +
                                              std::to_string(version));
  }
  if (bytes.size() < 10) {
    throw CheckpointError(Kind::kCrc, "checkpoint: too short for CRC");
  }
  const size_t body = bytes.size() - 4;
  ByteReader tail(bytes.data() + body, 4);
  if (tail.U32() != ByteWriter::Crc32(bytes.data(), body)) {
    throw CheckpointError(Kind::kCrc, "checkpoint: CRC mismatch");
  }

  ByteReader r(bytes.data() + 5, body - 5);
  const int count = r.U8();
  if (count < 1) throw CheckpointError(Kind::kMalformed, "checkpoint: no layers");
  std::vector<DenseLayer> layers(count);
  for (auto& layer : layers) {
    const std::uint32_t in = r.U32();
    const std::uint32_t out = r.U32();
    const std::uint8_t act = r.U8();
    if (!r.ok() || in == 0 || out == 0 || act > 1) {
      throw CheckpointError(Kind::kMalformed, "checkpoint: bad layer header");
    }
    if (static_cast<std::uint64_t>(in) * out * 8 > r.remaining()) {
      throw CheckpointError(Kind::kMalformed, "checkpoint: layer too large");
    }
    layer.weights.resize(out, in);
    layer.bias.resize(out);
    layer.activation = static_cast<Activation>(act);
  }
  for (auto& layer : layers) {
    for (Eigen::Index row = 0; row < layer.weights.rows(); ++row) {
      for (Eigen::Index col = 0; col < layer.weights.cols(); ++col) {
        layer.weights(row, col) = r.F64();
      }
    }
    for (Eigen::Index row = 0; row < layer.bias.size(); ++row) {
      layer.bias(row) = r.F64();
    }
  }
  if (!r.ok() || r.remaining() != 0) {
    throw CheckpointError(Kind::kMalformed, "checkpoint: payload size mismatch");
  }
  try {
    return Network::FromLayers(std::move(layers));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::kMalformed, e.what());
  }
}

void SaveCheckpoint(const std::filesystem::path& path, const Network& net) {
  internal::WriteFileBytes(path, SerializeNetwork(net));
}

Network LoadCheckpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = internal::ReadFileBytes(path);
  } catch (const std::runtime_error& e) {
    throw CheckpointError(CheckpointError::Kind::kIo, e.what());
  }
  return DeserializeNetwork(bytes);
}

}  // namespace mlab
