#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polos {

/// Fixed-size header at the start of every Polos Embedding Bundle (PEB).
///
/// On-disk layout (little-endian, packed, 26 bytes):
///   magic[4] "PEB1" | version u16 | d_clip u32 | d_rb u32 | sample_count u64 | flags u32
struct BundleHeader {
  static constexpr std::array<char, 4> kMagic{'P', 'E', 'B', '1'};
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kEncodedSize = 4 + 2 + 4 + 4 + 8 + 4;
  static constexpr std::uint32_t kFlagScores = 1U << 0;

  std::uint32_t d_clip = 0;
  std::uint32_t d_rb = 0;
  std::uint64_t sample_count = 0;
  std::uint32_t flags = 0;

  [[nodiscard]] bool has_scores() const { return (flags & kFlagScores) != 0; }
};

/// One image / candidate / references group.
///
/// Vectors are kept at disk precision (32-bit); the head widens them to
/// 64-bit when it builds its inputs.
struct EmbeddingSample {
  std::string sample_id;
  std::vector<float> cand_clip;
  std::vector<float> cand_rb;
  std::vector<std::vector<float>> refs_clip;
  std::vector<std::vector<float>> refs_rb;
  std::vector<float> img;
  std::optional<float> score;

  [[nodiscard]] std::size_t n_refs() const { return refs_clip.size(); }

  friend bool operator==(const EmbeddingSample&, const EmbeddingSample&) = default;
};

struct Dims {
  std::uint32_t d_clip = 0;
  std::uint32_t d_rb = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Bundle {
  Dims dims;
  std::vector<EmbeddingSample> samples;
};

/// Writes `bundle` to `path`. Returns the number of bytes written.
/// Throws DimensionError on shape problems (including "ref count mismatch")
/// and DataError on I/O failure.
std::size_t write_bundle(const Bundle& bundle, const std::filesystem::path& path);

/// Serializes into memory; the file writer is a thin wrapper around this.
std::vector<std::byte> encode_bundle(const Bundle& bundle);

/// Reads a bundle, rejecting anything that would violate sample invariants.
Bundle read_bundle(const std::filesystem::path& path);
Bundle decode_bundle(std::span<const std::byte> bytes);

struct Finding {
  std::string sample_id;
  std::string message;
};

struct ValidationReport {
  std::size_t sample_count = 0;
  Dims dims;
  std::size_t min_refs = 0;
  std::size_t max_refs = 0;
  double mean_refs = 0.0;
  double score_presence = 0.0;  // fraction of samples carrying a score
  std::vector<Finding> findings;

  [[nodiscard]] bool ok() const { return findings.empty(); }
};

/// Reports every invariant violation, keyed by sample_id. Never throws on
/// bad data.
ValidationReport validate_bundle(const Bundle& bundle);

struct DatasetSplit {
  std::string name;  // train | valid | test
  std::vector<std::string> sample_ids;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Sidecar split manifest: one JSON object per line.
struct ManifestEntry {
  std::string sample_id;
  std::string split;   // train | valid | test
  std::string source;  // dataset tag

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path);

/// Writes bytes to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace polos
