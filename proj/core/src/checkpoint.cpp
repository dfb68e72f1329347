#include "polos/checkpoint.hpp"

#include <array>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "binary.hpp"
#include "polos/error.hpp"

namespace polos {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'H', 'C', '1'};
constexpr std::uint16_t kVersion = 1;

void write_layers(detail::ByteWriter& w, const std::vector<Layer>& layers) {
  for (const auto& l : layers) {
    w.integer(static_cast<std::uint32_t>(l.weight.rows()));
    w.integer(static_cast<std::uint32_t>(l.weight.cols()));
    w.integer(static_cast<std::uint8_t>(l.activation));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f64(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(l.bias(r));
  }
}

std::vector<Layer> read_layers(detail::ByteReader& in, std::uint32_t count) {
  std::vector<Layer> layers;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto rows = in.integer<std::uint32_t>();
    const auto cols = in.integer<std::uint32_t>();
    const auto act = in.integer<std::uint8_t>();
    if (act > static_cast<std::uint8_t>(Activation::identity)) {
      throw DataError(fmt::format("checkpoint: unknown activation tag {}", act));
    }
    const std::uint64_t values = static_cast<std::uint64_t>(rows) * cols + rows;
    if (values > in.remaining() / sizeof(double)) throw DataError("checkpoint: truncated payload");
    Layer l;
    l.activation = static_cast<Activation>(act);
    l.weight.resize(rows, cols);
    l.bias.resize(rows);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = in.f64();
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = in.f64();
    layers.push_back(std::move(l));
  }
  return layers;
}

}  // namespace

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.params.validate();
  std::vector<std::byte> out;
  detail::ByteWriter w(out);
  w.bytes(kMagic.data(), kMagic.size());
  w.integer(kVersion);
  w.string(to_config_text(ckpt.config));
  w.integer(ckpt.dims.d_clip);
  w.integer(ckpt.dims.d_rb);
  w.integer(ckpt.config.head.seed);
  w.integer(static_cast<std::uint32_t>(ckpt.params.mlp1.size()));
  w.integer(static_cast<std::uint32_t>(ckpt.params.mlp2.size()));
  write_layers(w, ckpt.params.mlp1);
  write_layers(w, ckpt.params.mlp2);
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  detail::ByteReader in(bytes, "checkpoint");
  std::array<char, 4> magic{};
  in.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw DataError("checkpoint: bad magic");
  const auto version = in.integer<std::uint16_t>();
  if (version != kVersion) throw DataError(fmt::format("checkpoint: version unsupported ({})", version));

  Checkpoint ckpt;
  ckpt.config = parse_config(in.string());
  ckpt.dims.d_clip = in.integer<std::uint32_t>();
  ckpt.dims.d_rb = in.integer<std::uint32_t>();
  const auto seed = in.integer<std::uint64_t>();
  if (seed != ckpt.config.head.seed) throw DataError("checkpoint: seed disagrees with config echo");
  const auto n1 = in.integer<std::uint32_t>();
  const auto n2 = in.integer<std::uint32_t>();
  ckpt.params.mlp1 = read_layers(in, n1);
  ckpt.params.mlp2 = read_layers(in, n2);
  if (in.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  ckpt.params.validate();
  if (ckpt.params.input_dim() != h_inter_size(ckpt.config.head, ckpt.dims)) {
    throw DataError("checkpoint: layer shapes do not match the recorded config and dims");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::as_bytes(std::span(raw)));
}

}  // namespace polos
