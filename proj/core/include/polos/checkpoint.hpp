#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "polos/config.hpp"
#include "polos/embed_io.hpp"
#include "polos/head.hpp"

namespace polos {

/// Trained head plus everything needed to rebuild and audit it.
///
/// File layout (little-endian):
///   magic "PHC1" | version u16 | config text (u32 length + UTF-8 key = value
///   lines) | d_clip u32 | d_rb u32 | seed u64 | mlp1 layer count u32 |
///   mlp2 layer count u32 | per layer: rows u32, cols u32, activation u8,
///   rows*cols f64 weights (row-major), rows f64 biases
struct Checkpoint {
  RunConfig config;
  Dims dims;
  HeadParams params;
};

std::vector<std::byte> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace polos
