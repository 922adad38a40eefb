#include "layermix/synth.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "layermix/errors.hpp"
#include "layermix/rng.hpp"

namespace layermix {

void SynthSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
  };
  if (num_layers < 1) fail("num_layers", "must be >= 1");
  if (dim < 1) fail("dim", "must be >= 1");
  if (num_tags < 1) fail("num_tags", "must be >= 1");
  if (tag_scheme == TagScheme::kBio && num_tags % 2 == 0) {
    fail("num_tags", "must be odd under BIO (O plus B-/I- pairs)");
  }
  if (n_train < 1) fail("n_train", "must be >= 1");
  if (n_dev < 1) fail("n_dev", "must be >= 1");
  if (n_test < 1) fail("n_test", "must be >= 1");
  if (min_length < 1) fail("min_length", "must be >= 1");
  if (max_length < min_length) fail("max_length", "must be >= min_length");
  if (informative_layer >= num_layers) {
    fail("informative_layer", "must lie in [0, " + std::to_string(num_layers) + ")");
  }
  if (!(sigma_signal > 0.0) || !std::isfinite(sigma_signal)) fail("sigma_signal", "must be > 0");
  if (!(sigma_noise > 0.0) || !std::isfinite(sigma_noise)) fail("sigma_noise", "must be > 0");
}

std::vector<std::string> synth_tag_names(std::uint32_t num_tags, TagScheme scheme) {
  std::vector<std::string> names;
  if (scheme == TagScheme::kPlain) {
    for (std::uint32_t t = 0; t < num_tags; ++t) names.push_back("T" + std::to_string(t));
    return names;
  }
  names.push_back("O");
  for (std::uint32_t k = 0; 2 * k + 1 < num_tags; ++k) {
    names.push_back("B-E" + std::to_string(k));
    names.push_back("I-E" + std::to_string(k));
  }
  return names;
}

namespace {

// Tag index sequence; BIO indices follow synth_tag_names (0 = O, 2k+1 = B-Ek,
// 2k+2 = I-Ek).
std::vector<int> sample_tags(std::size_t length, const SynthSpec& spec, Rng& rng) {
  std::vector<int> tags(length);
  if (spec.tag_scheme == TagScheme::kPlain) {
    for (auto& t : tags) t = static_cast<int>(rng.below(spec.num_tags));
    return tags;
  }
  const std::uint64_t types = (spec.num_tags - 1) / 2;
  auto begin_random = [&] { return static_cast<int>(2 * rng.below(types) + 1); };
  int prev = 0;
  for (std::size_t i = 0; i < length; ++i) {
    int tag = 0;
    if (types == 0) {
      tag = 0;
    } else if (prev == 0) {
      tag = rng.bernoulli(0.5) ? 0 : begin_random();
    } else {
      const double u = rng.uniform();
      const int type_begin = prev % 2 == 1 ? prev : prev - 1;
      if (u < 0.5) {
        tag = type_begin + 1;
      } else if (u < 0.75) {
        tag = 0;
      } else {
        tag = begin_random();
      }
    }
    tags[i] = tag;
    prev = tag;
  }
  return tags;
}

SynthSplit generate_split(std::uint32_t count, const SynthSpec& spec, const Prototypes& protos,
                          const std::vector<std::string>& names, Rng& rng) {
  SynthSplit split;
  split.embeddings.num_layers = spec.num_layers;
  split.embeddings.dim = spec.dim;
  split.corpus.scheme = spec.tag_scheme;
  split.corpus.tagset = names;
  const std::uint32_t span = spec.max_length - spec.min_length + 1;
  for (std::uint32_t s = 0; s < count; ++s) {
    const std::size_t n = spec.min_length + rng.below(span);
    const auto tags = sample_tags(n, spec, rng);
    std::vector<std::string> tokens;
    LabeledSentence labeled;
    for (std::size_t i = 0; i < n; ++i) {
      tokens.push_back("tok" + std::to_string(i));
      labeled.tags.push_back(names[tags[i]]);
    }
    labeled.tokens = tokens;
    SentenceEmbedding emb(std::move(tokens), spec.num_layers, spec.dim);
    for (std::uint32_t l = 0; l < spec.num_layers; ++l) {
      const bool informative = l == spec.informative_layer;
      for (std::size_t i = 0; i < n; ++i) {
        auto v = emb.vec(l, i);
        const auto proto = protos.row(static_cast<std::size_t>(tags[i]));
        for (std::uint32_t d = 0; d < spec.dim; ++d) {
          v[d] = informative
                     ? static_cast<float>(proto[d] + spec.sigma_signal * rng.normal())
                     : static_cast<float>(spec.sigma_noise * rng.normal());
        }
      }
    }
    split.embeddings.sentences.push_back(std::move(emb));
    split.corpus.sentences.push_back(std::move(labeled));
  }
  return split;
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthData data;
  data.tag_names = synth_tag_names(spec.num_tags, spec.tag_scheme);
  data.prototypes.num_tags = spec.num_tags;
  data.prototypes.dim = spec.dim;
  data.prototypes.values.resize(std::size_t{spec.num_tags} * spec.dim);
  for (auto& v : data.prototypes.values) v = static_cast<float>(rng.normal());
  data.train = generate_split(spec.n_train, spec, data.prototypes, data.tag_names, rng);
  data.dev = generate_split(spec.n_dev, spec, data.prototypes, data.tag_names, rng);
  data.test = generate_split(spec.n_test, spec, data.prototypes, data.tag_names, rng);
  return data;
}

void write_prototypes(const Prototypes& prototypes, const std::filesystem::path& path) {
  if (prototypes.values.size() != std::size_t{prototypes.num_tags} * prototypes.dim) {
    throw ConfigError("prototype table size does not match its header");
  }
  std::string bytes;
  auto put = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(prototypes.num_tags);
  put(prototypes.dim);
  for (float f : prototypes.values) put(std::bit_cast<std::uint32_t>(f));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

Prototypes load_prototypes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto get = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[at + i])) << (8 * i);
    }
    return v;
  };
  if (data.size() < 8) {
    throw FormatError(FormatErrorKind::kTruncated, data.size(), "prototype header truncated", 8,
                      data.size());
  }
  Prototypes p;
  p.num_tags = get(0);
  p.dim = get(4);
  const std::uint64_t expected = 8 + std::uint64_t{4} * p.num_tags * p.dim;
  if (data.size() != expected) {
    throw FormatError(data.size() < expected ? FormatErrorKind::kTruncated
                                             : FormatErrorKind::kMalformed,
                      std::min<std::uint64_t>(data.size(), expected),
                      "prototype file has " + std::to_string(data.size()) + " bytes, expected " +
                          std::to_string(expected),
                      expected, data.size());
  }
  p.values.resize(std::size_t{p.num_tags} * p.dim);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    p.values[i] = std::bit_cast<float>(get(8 + 4 * i));
    if (!std::isfinite(p.values[i])) {
      throw FormatError(FormatErrorKind::kNonFinite, 8 + 4 * i, "non-finite prototype value");
    }
  }
  return p;
}

double nearest_prototype_accuracy(const EmbeddingDataset& dataset, const LabeledCorpus& corpus,
                                  std::uint32_t layer, const Prototypes& prototypes,
                                  const std::vector<std::string>& prototype_tags) {
  if (prototypes.num_tags == 0 || prototypes.values.empty()) {
    throw ConfigError("missing prototypes");
  }
  if (prototype_tags.size() != prototypes.num_tags) {
    throw ConfigError("prototype tag names do not match prototype count");
  }
  if (prototypes.dim != dataset.dim) throw ShapeError("prototype dimension differs from dataset");
  if (layer >= dataset.num_layers) throw ShapeError("layer index out of range");
  if (dataset.sentences.size() != corpus.sentences.size()) {
    throw AlignError(std::min(dataset.sentences.size(), corpus.sentences.size()),
                     "sentence counts differ");
  }
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < dataset.sentences.size(); ++s) {
    const auto& emb = dataset.sentences[s];
    const auto& gold = corpus.sentences[s].tags;
    if (emb.size() != gold.size()) throw AlignError(s, "token counts differ");
    for (std::size_t i = 0; i < emb.size(); ++i) {
      const auto v = emb.vec(layer, i);
      std::size_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < prototypes.num_tags; ++t) {
        const auto u = prototypes.row(t);
        double d2 = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) {
          const double diff = static_cast<double>(v[d]) - static_cast<double>(u[d]);
          d2 += diff * diff;
        }
        if (d2 < best_dist) {
          best_dist = d2;
          best = t;
        }
      }
      ++total;
      if (prototype_tags[best] == gold[i]) ++correct;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace layermix
