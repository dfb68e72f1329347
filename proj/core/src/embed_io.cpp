#include "polos/embed_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "binary.hpp"
#include "polos/error.hpp"

namespace polos {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

void check_shape(const EmbeddingSample& s, const Dims& dims) {
  auto expect = [&](std::size_t got, std::uint32_t want, const char* field) {
    if (got != want) {
      throw DimensionError(fmt::format("sample '{}': dimension mismatch in {} (got {}, expected {})",
                                       s.sample_id, field, got, want));
    }
  };
  if (s.refs_clip.size() != s.refs_rb.size()) {
    throw DimensionError(fmt::format("sample '{}': ref count mismatch ({} clip vs {} roberta)",
                                     s.sample_id, s.refs_clip.size(), s.refs_rb.size()));
  }
  if (s.refs_clip.empty()) {
    throw DimensionError(fmt::format("sample '{}': no references", s.sample_id));
  }
  expect(s.cand_clip.size(), dims.d_clip, "cand_clip");
  expect(s.cand_rb.size(), dims.d_rb, "cand_rb");
  for (const auto& r : s.refs_clip) expect(r.size(), dims.d_clip, "refs_clip");
  for (const auto& r : s.refs_rb) expect(r.size(), dims.d_rb, "refs_rb");
  expect(s.img.size(), dims.d_clip, "img");
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

void read_vector(ByteReader& in, std::vector<float>& out, std::uint32_t dim, const std::string& id,
                 const char* field) {
  out.resize(dim);
  in.f32s(out);
  if (!all_finite(out)) {
    throw DataError(fmt::format("sample '{}': non-finite value in {}", id, field));
  }
}

}  // namespace

std::vector<std::byte> encode_bundle(const Bundle& bundle) {
  const Dims& dims = bundle.dims;
  if (dims.d_clip == 0 || dims.d_rb == 0) {
    throw DimensionError("bundle dimensions must be positive");
  }
  bool any_score = false;
  for (const auto& s : bundle.samples) {
    check_shape(s, dims);
    if (s.score) {
      if (std::isnan(*s.score)) {
        throw DataError(fmt::format("sample '{}': score is NaN; use an empty optional", s.sample_id));
      }
      any_score = true;
    }
  }

  std::vector<std::byte> out;
  ByteWriter w(out);
  w.bytes(BundleHeader::kMagic.data(), BundleHeader::kMagic.size());
  w.integer(BundleHeader::kVersion);
  w.integer(dims.d_clip);
  w.integer(dims.d_rb);
  w.integer(static_cast<std::uint64_t>(bundle.samples.size()));
  w.integer(any_score ? BundleHeader::kFlagScores : std::uint32_t{0});

  for (const auto& s : bundle.samples) {
    w.string(s.sample_id);
    w.integer(static_cast<std::uint32_t>(s.n_refs()));
    w.f32s(s.cand_clip);
    w.f32s(s.cand_rb);
    for (const auto& r : s.refs_clip) w.f32s(r);
    for (const auto& r : s.refs_rb) w.f32s(r);
    w.f32s(s.img);
    w.f32(s.score.value_or(std::numeric_limits<float>::quiet_NaN()));
  }
  return out;
}

std::size_t write_bundle(const Bundle& bundle, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(bundle);
  write_file_atomic(path, bytes);
  return bytes.size();
}

Bundle decode_bundle(std::span<const std::byte> bytes) {
  ByteReader in(bytes, "bundle");
  if (in.remaining() < BundleHeader::kEncodedSize) {
    // A short file that does not even start with the magic is not a bundle.
    if (std::memcmp(bytes.data(), BundleHeader::kMagic.data(), std::min<std::size_t>(bytes.size(), 4)) != 0) {
      throw DataError("bundle: bad magic");
    }
    throw DataError("bundle: truncated payload (header)");
  }
  std::array<char, 4> magic{};
  in.bytes(magic.data(), magic.size());
  if (magic != BundleHeader::kMagic) throw DataError("bundle: bad magic");
  const auto version = in.integer<std::uint16_t>();
  if (version != BundleHeader::kVersion) {
    throw DataError(fmt::format("bundle: version unsupported ({})", version));
  }
  BundleHeader header;
  header.d_clip = in.integer<std::uint32_t>();
  header.d_rb = in.integer<std::uint32_t>();
  header.sample_count = in.integer<std::uint64_t>();
  header.flags = in.integer<std::uint32_t>();
  if (header.d_clip == 0 || header.d_rb == 0) {
    throw DataError("bundle: dimensions must be positive");
  }
  if ((header.flags & ~BundleHeader::kFlagScores) != 0) {
    throw DataError(fmt::format("bundle: unknown flags 0x{:x}", header.flags));
  }

  Bundle bundle;
  bundle.dims = {header.d_clip, header.d_rb};
  const std::uint64_t per_ref_bytes =
      (static_cast<std::uint64_t>(header.d_clip) + header.d_rb) * sizeof(float);
  // Smallest possible record: empty id, one reference, score slot.
  const std::uint64_t min_record = 4 + 4 + 2 * per_ref_bytes + header.d_clip * 4ULL + 4;
  bundle.samples.reserve(
      static_cast<std::size_t>(std::min<std::uint64_t>(header.sample_count, in.remaining() / min_record)));

  for (std::uint64_t k = 0; k < header.sample_count; ++k) {
    EmbeddingSample s;
    s.sample_id = in.string();
    const auto n_refs = in.integer<std::uint32_t>();
    if (n_refs == 0) throw DataError(fmt::format("sample '{}': no references", s.sample_id));
    if (n_refs > in.remaining() / per_ref_bytes) throw DataError("bundle: truncated payload");

    read_vector(in, s.cand_clip, header.d_clip, s.sample_id, "cand_clip");
    read_vector(in, s.cand_rb, header.d_rb, s.sample_id, "cand_rb");
    s.refs_clip.resize(n_refs);
    for (auto& r : s.refs_clip) read_vector(in, r, header.d_clip, s.sample_id, "refs_clip");
    s.refs_rb.resize(n_refs);
    for (auto& r : s.refs_rb) read_vector(in, r, header.d_rb, s.sample_id, "refs_rb");
    read_vector(in, s.img, header.d_clip, s.sample_id, "img");

    const float score = in.f32();
    if (!std::isnan(score)) {
      if (!header.has_scores()) {
        throw DataError(fmt::format("sample '{}': score present but header flag unset", s.sample_id));
      }
      if (!(score >= 0.0F && score <= 1.0F)) {
        throw DataError(fmt::format("sample '{}': score out of range ({})", s.sample_id, score));
      }
      s.score = score;
    }
    bundle.samples.push_back(std::move(s));
  }
  if (in.remaining() != 0) {
    throw DataError(fmt::format("bundle: {} trailing bytes after last record", in.remaining()));
  }
  return bundle;
}

Bundle read_bundle(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot open bundle '{}'", path.string()));
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw DataError(fmt::format("read failure on '{}'", path.string()));
  return decode_bundle(std::as_bytes(std::span(raw)));
}

ValidationReport validate_bundle(const Bundle& bundle) {
  ValidationReport report;
  report.sample_count = bundle.samples.size();
  report.dims = bundle.dims;
  if (bundle.dims.d_clip == 0 || bundle.dims.d_rb == 0) {
    report.findings.push_back({"", "zero bundle dimension"});
  }

  std::set<std::string> seen;
  std::size_t with_score = 0;
  std::size_t total_refs = 0;
  report.min_refs = bundle.samples.empty() ? 0 : std::numeric_limits<std::size_t>::max();

  for (const auto& s : bundle.samples) {
    auto flag = [&](std::string msg) { report.findings.push_back({s.sample_id, std::move(msg)}); };

    if (!seen.insert(s.sample_id).second) flag("duplicate sample_id");

    if (s.refs_clip.size() != s.refs_rb.size()) flag("ref count mismatch");
    if (s.refs_clip.empty()) flag("no references");

    bool dims_ok = s.cand_clip.size() == bundle.dims.d_clip && s.cand_rb.size() == bundle.dims.d_rb &&
                   s.img.size() == bundle.dims.d_clip;
    for (const auto& r : s.refs_clip) dims_ok = dims_ok && r.size() == bundle.dims.d_clip;
    for (const auto& r : s.refs_rb) dims_ok = dims_ok && r.size() == bundle.dims.d_rb;
    if (!dims_ok) flag("dimension mismatch");

    bool finite = all_finite(s.cand_clip) && all_finite(s.cand_rb) && all_finite(s.img);
    for (const auto& r : s.refs_clip) finite = finite && all_finite(r);
    for (const auto& r : s.refs_rb) finite = finite && all_finite(r);
    if (!finite) flag("non-finite vector");

    if (s.score) {
      ++with_score;
      if (!(*s.score >= 0.0F && *s.score <= 1.0F)) flag("score out of range");
    }

    total_refs += s.refs_clip.size();
    report.min_refs = std::min(report.min_refs, s.refs_clip.size());
    report.max_refs = std::max(report.max_refs, s.refs_clip.size());
  }
  if (!bundle.samples.empty()) {
    const auto n = static_cast<double>(bundle.samples.size());
    report.mean_refs = static_cast<double>(total_refs) / n;
    report.score_presence = static_cast<double>(with_score) / n;
  }
  return report;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError(fmt::format("cannot open manifest '{}'", path.string()));
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries.push_back({j.at("sample_id").get<std::string>(), j.at("split").get<std::string>(),
                         j.value("source", std::string{})});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return entries;
}

void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path) {
  std::string text;
  for (const auto& e : entries) {
    nlohmann::json j = {{"sample_id", e.sample_id}, {"split", e.split}, {"source", e.source}};
    text += j.dump();
    text += '\n';
  }
  write_file_atomic(path, text);
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  auto tmp = path;
  tmp += fmt::format(".tmp.{}", ::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError(fmt::format("cannot open '{}' for writing", tmp.string()));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError(fmt::format("write failure on '{}'", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError(fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path.string(), ec.message()));
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

}  // namespace polos
