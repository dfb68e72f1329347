#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "polos/embed_io.hpp"

namespace polos {

// How a synthetic sample's human score relates to its embeddings.
enum class SynthScores {
  none,     // no scores
  quality,  // score is the blend weight pulling the candidate toward its references
  random,   // score drawn independently of the embeddings
};

/// Seeded fixture generator for bundles. Used by tests, benchmarks and the
/// `polos synth` command so the numeric core can be exercised without the
/// encoder sidecar.
struct SynthSpec {
  std::size_t count = 16;
  Dims dims{8, 12};
  std::size_t min_refs = 1;
  std::size_t max_refs = 5;
  SynthScores scores = SynthScores::quality;
  std::uint64_t seed = 0;
  std::string id_prefix = "syn";
};

/// Under SynthScores::quality each sample draws q ~ U(0,1); the candidate is
/// q * (first reference) + (1 - q) * (independent noise) in both text spaces,
/// and the score is q. References cluster around a per-sample center, and the
/// image vector is the center plus noise.
Bundle make_synthetic_bundle(const SynthSpec& spec);

}  // namespace polos
