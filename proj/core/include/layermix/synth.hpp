#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "layermix/embedstore.hpp"

namespace layermix {

// Synthetic multi-layer embeddings where exactly one layer carries the tag.
// Each tag t owns a prototype u_t ~ N(0, I_D). The informative layer holds
// u_tag + N(0, sigma_signal^2 I); every other layer holds N(0, sigma_noise^2 I).
struct SynthSpec {
  std::uint32_t num_layers = 3;
  std::uint32_t dim = 16;
  std::uint32_t num_tags = 3;
  std::uint32_t n_train = 200;
  std::uint32_t n_dev = 50;
  std::uint32_t n_test = 50;
  std::uint32_t min_length = 5;
  std::uint32_t max_length = 10;
  std::uint32_t informative_layer = 1;
  double sigma_signal = 0.1;
  double sigma_noise = 1.0;
  TagScheme tag_scheme = TagScheme::kPlain;
  std::uint64_t seed = 1;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct Prototypes {
  std::uint32_t num_tags = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // num_tags x dim, row-major

  std::span<const float> row(std::size_t tag) const { return {values.data() + tag * dim, dim}; }
  bool operator==(const Prototypes&) const = default;
};

struct SynthSplit {
  EmbeddingDataset embeddings;
  LabeledCorpus corpus;
};

struct SynthData {
  SynthSplit train;
  SynthSplit dev;
  SynthSplit test;
  Prototypes prototypes;
  // Tag name of each prototype row; also the tagset of every split.
  std::vector<std::string> tag_names;
};

// PLAIN: T0..T{n-1}. BIO: "O" followed by B-E<k>/I-E<k> pairs, so num_tags
// must be odd.
std::vector<std::string> synth_tag_names(std::uint32_t num_tags, TagScheme scheme);

// Deterministic in spec.seed. Under PLAIN tags are i.i.d. uniform; under BIO
// they follow a fixed O/B/I Markov chain.
SynthData generate(const SynthSpec& spec);

// Sidecar format: u32 LE T, u32 LE D, then T*D float32 LE.
void write_prototypes(const Prototypes& prototypes, const std::filesystem::path& path);
Prototypes load_prototypes(const std::filesystem::path& path);

// Token accuracy of classifying each token by its nearest prototype
// (Euclidean, ties to the lower row) on one layer.
double nearest_prototype_accuracy(const EmbeddingDataset& dataset, const LabeledCorpus& corpus,
                                  std::uint32_t layer, const Prototypes& prototypes,
                                  const std::vector<std::string>& prototype_tags);

}  // namespace layermix
