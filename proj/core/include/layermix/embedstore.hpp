#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace layermix {

// Per-token stack of layer vectors for one sentence. Values are float32,
// stored layer-major, then token-major, then dimension (the on-disk order).
struct SentenceEmbedding {
  std::vector<std::string> tokens;
  std::size_t num_layers = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  SentenceEmbedding() = default;
  SentenceEmbedding(std::vector<std::string> toks, std::size_t layers, std::size_t d);

  std::size_t size() const { return tokens.size(); }

  std::span<float> vec(std::size_t layer, std::size_t token) {
    return {values.data() + (layer * tokens.size() + token) * dim, dim};
  }
  std::span<const float> vec(std::size_t layer, std::size_t token) const {
    return {values.data() + (layer * tokens.size() + token) * dim, dim};
  }

  bool operator==(const SentenceEmbedding&) const = default;
};

struct EmbeddingDataset {
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  std::vector<SentenceEmbedding> sentences;

  std::size_t num_tokens() const;

  // Throws ConfigError if any sentence disagrees with (num_layers, dim) or
  // holds a non-finite value.
  void validate() const;

  bool operator==(const EmbeddingDataset&) const = default;
};

enum class TagScheme { kBio, kPlain };

TagScheme parse_tag_scheme(const std::string& s);
std::string to_string(TagScheme scheme);

struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  bool operator==(const LabeledSentence&) const = default;
};

struct LabeledCorpus {
  std::vector<LabeledSentence> sentences;
  std::vector<std::string> tagset;  // first-occurrence order
  TagScheme scheme = TagScheme::kPlain;

  std::size_t num_tokens() const;
  // Index of `tag` in tagset, or -1.
  int tag_index(const std::string& tag) const;

  bool operator==(const LabeledCorpus&) const = default;
};

struct AlignedSentence {
  SentenceEmbedding embedding;
  std::vector<int> tags;
};

struct AlignedDataset {
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  std::vector<std::string> tagset;
  std::vector<AlignedSentence> sentences;

  std::size_t num_tokens() const;
};

// MLEB binary format.
//   "MLEB" | u32 version=1 | u32 L | u32 D | u64 sentence count
//   per sentence: u32 n | n x (u16 byte length, UTF-8 bytes) | L*n*D float32
// All integers and floats little-endian.
inline constexpr std::uint32_t kMlebVersion = 1;
inline constexpr std::size_t kMlebHeaderSize = 24;

std::string encode_embeddings(const EmbeddingDataset& dataset);
EmbeddingDataset decode_embeddings(std::span<const std::byte> bytes);

void write_embeddings(const EmbeddingDataset& dataset, const std::filesystem::path& path);
EmbeddingDataset load_embeddings(const std::filesystem::path& path);

// True if the file starts with the MLEB magic.
bool is_mleb_file(const std::filesystem::path& path);

// Parses "token<TAB>tag" lines with blank-line sentence breaks. Under BIO, an
// I-X that does not continue a chunk of type X is rewritten to B-X and a
// warning is appended to `warnings` (if given) and logged.
LabeledCorpus parse_conll(std::istream& in, TagScheme scheme,
                          std::vector<std::string>* warnings = nullptr);
LabeledCorpus load_conll(const std::filesystem::path& path, TagScheme scheme,
                         std::vector<std::string>* warnings = nullptr);
void write_conll(const LabeledCorpus& corpus, const std::filesystem::path& path);

// Pairs embeddings with tag indices from corpus.tagset. Only counts are
// checked; token string differences are logged as warnings.
AlignedDataset align(const EmbeddingDataset& embeddings, const LabeledCorpus& corpus);
// Same, with tag indices taken from an explicit tagset that must contain every
// tag in the corpus.
AlignedDataset align(const EmbeddingDataset& embeddings, const LabeledCorpus& corpus,
                     const std::vector<std::string>& tagset);

}  // namespace layermix
