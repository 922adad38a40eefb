#include "layermix/embedstore.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <sstream>

#include "layermix/errors.hpp"
#include "layermix/logging.hpp"

namespace layermix {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic:
      return "BadMagic";
    case FormatErrorKind::kUnsupportedVersion:
      return "UnsupportedVersion";
    case FormatErrorKind::kTruncated:
      return "Truncated";
    case FormatErrorKind::kNonFinite:
      return "NonFinite";
    case FormatErrorKind::kMalformed:
      return "Malformed";
  }
  return "Unknown";
}

FormatError::FormatError(FormatErrorKind kind, std::uint64_t offset, const std::string& what,
                         std::uint64_t expected, std::uint64_t actual)
    : std::runtime_error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) +
                         ": " + what),
      kind_(kind),
      offset_(offset),
      expected_(expected),
      actual_(actual) {}

SentenceEmbedding::SentenceEmbedding(std::vector<std::string> toks, std::size_t layers,
                                     std::size_t d)
    : tokens(std::move(toks)), num_layers(layers), dim(d), values(layers * tokens.size() * d) {}

std::size_t EmbeddingDataset::num_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

void EmbeddingDataset::validate() const {
  if (num_layers == 0 || dim == 0) {
    throw ConfigError("embedding dataset needs at least one layer and one dimension");
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    if (s.num_layers != num_layers || s.dim != dim) {
      throw ConfigError("sentence " + std::to_string(i) + " has shape " +
                        std::to_string(s.num_layers) + "x" + std::to_string(s.dim) +
                        ", dataset expects " + std::to_string(num_layers) + "x" +
                        std::to_string(dim));
    }
    if (s.values.size() != s.num_layers * s.size() * s.dim) {
      throw ConfigError("sentence " + std::to_string(i) + " payload size does not match tokens");
    }
    for (float v : s.values) {
      if (!std::isfinite(v)) {
        throw ConfigError("sentence " + std::to_string(i) + " holds a non-finite value");
      }
    }
  }
}

TagScheme parse_tag_scheme(const std::string& s) {
  if (s == "BIO" || s == "bio") return TagScheme::kBio;
  if (s == "PLAIN" || s == "plain") return TagScheme::kPlain;
  throw ConfigError("unknown tag scheme '" + s + "' (expected BIO or PLAIN)");
}

std::string to_string(TagScheme scheme) { return scheme == TagScheme::kBio ? "BIO" : "PLAIN"; }

std::size_t LabeledCorpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

int LabeledCorpus::tag_index(const std::string& tag) const {
  for (std::size_t i = 0; i < tagset.size(); ++i) {
    if (tagset[i] == tag) return static_cast<int>(i);
  }
  return -1;
}

std::size_t AlignedDataset::num_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tags.size();
  return n;
}

// ---------------------------------------------------------------------------
// MLEB encoding

namespace {

constexpr char kMagic[4] = {'M', 'L', 'E', 'B'};

class ByteWriter {
 public:
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return bytes_.size() - pos_; }

  void need(std::uint64_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(FormatErrorKind::kTruncated, pos_,
                        std::string("truncated while reading ") + what + " (expected " +
                            std::to_string(pos_ + n) + " bytes, file has " +
                            std::to_string(bytes_.size()) + ")",
                        pos_ + n, bytes_.size());
    }
  }

  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  // Reads `count` float32 values, rejecting non-finite ones.
  void floats(std::span<float> out) {
    need(static_cast<std::uint64_t>(out.size()) * 4, "float payload");
    for (float& v : out) {
      const std::uint64_t at = pos_;
      v = std::bit_cast<float>(static_cast<std::uint32_t>(le(4, "float payload")));
      if (!std::isfinite(v)) {
        throw FormatError(FormatErrorKind::kNonFinite, at, "non-finite float in payload");
      }
    }
  }

 private:
  std::uint64_t le(int n, const char* what) {
    need(n, what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    return v;
  }

  std::span<const std::byte> bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace

std::string encode_embeddings(const EmbeddingDataset& dataset) {
  dataset.validate();
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kMlebVersion);
  w.u32(dataset.num_layers);
  w.u32(dataset.dim);
  w.u64(dataset.sentences.size());
  for (const auto& s : dataset.sentences) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (const auto& tok : s.tokens) {
      if (tok.size() > UINT16_MAX) {
        throw ConfigError("token longer than 65535 bytes cannot be stored");
      }
      w.u16(static_cast<std::uint16_t>(tok.size()));
      w.raw(tok.data(), tok.size());
    }
    for (float v : s.values) w.f32(v);
  }
  return w.take();
}

EmbeddingDataset decode_embeddings(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  const std::string magic = r.str(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic, 0, "expected magic \"MLEB\"");
  }
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kMlebVersion) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion, version_at,
                      "unsupported version " + std::to_string(version));
  }
  EmbeddingDataset ds;
  const std::uint64_t shape_at = r.offset();
  ds.num_layers = r.u32("layer count");
  ds.dim = r.u32("dimension");
  if (ds.num_layers == 0 || ds.dim == 0) {
    throw FormatError(FormatErrorKind::kMalformed, shape_at, "layer count and dimension must be >= 1");
  }
  const std::uint64_t count = r.u64("sentence count");
  // Each sentence needs at least its 4-byte token count.
  if (count > r.remaining() / 4) r.need(count * 4, "sentence table");
  ds.sentences.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t n = r.u32("token count");
    std::vector<std::string> tokens;
    tokens.reserve(std::min<std::uint64_t>(n, r.remaining() / 2));
    for (std::uint32_t t = 0; t < n; ++t) {
      const std::uint16_t len = r.u16("token length");
      tokens.push_back(r.str(len, "token bytes"));
    }
    const std::uint64_t payload = std::uint64_t{ds.num_layers} * n * ds.dim;
    r.need(payload * 4, "float payload");
    SentenceEmbedding s(std::move(tokens), ds.num_layers, ds.dim);
    r.floats(s.values);
    ds.sentences.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::kMalformed, r.offset(),
                      std::to_string(r.remaining()) + " trailing bytes after last sentence");
  }
  return ds;
}

void write_embeddings(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  const std::string bytes = encode_embeddings(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path.string(), "read failed");
  return data;
}

}  // namespace

EmbeddingDataset load_embeddings(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  return decode_embeddings(std::as_bytes(std::span(data.data(), data.size())));
}

bool is_mleb_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0;
}

// ---------------------------------------------------------------------------
// CoNLL

namespace {

bool is_bio_tag(const std::string& tag) {
  return tag == "O" || ((tag.rfind("B-", 0) == 0 || tag.rfind("I-", 0) == 0) && tag.size() > 2);
}

void add_tag(LabeledCorpus& corpus, const std::string& tag) {
  if (corpus.tag_index(tag) < 0) corpus.tagset.push_back(tag);
}

}  // namespace

LabeledCorpus parse_conll(std::istream& in, TagScheme scheme, std::vector<std::string>* warnings) {
  LabeledCorpus corpus;
  corpus.scheme = scheme;
  LabeledSentence current;
  std::string line;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    for (const auto& tag : current.tags) add_tag(corpus, tag);
    corpus.sentences.push_back(std::move(current));
    current = {};
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(line_no, "expected exactly 2 tab-separated fields");
    }
    std::string token = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    if (token.empty() || tag.empty()) throw ParseError(line_no, "empty token or tag field");

    if (scheme == TagScheme::kBio) {
      if (!is_bio_tag(tag)) {
        throw ParseError(line_no, "tag '" + tag + "' is not O, B-X or I-X");
      }
      if (tag[0] == 'I') {
        const std::string type = tag.substr(2);
        const std::string prev = current.tags.empty() ? "O" : current.tags.back();
        const bool continues = prev != "O" && prev.substr(2) == type;
        if (!continues) {
          std::string msg = "line " + std::to_string(line_no) + ": " + tag + " after " + prev +
                            " repaired to B-" + type;
          log::warn(msg);
          if (warnings) warnings->push_back(std::move(msg));
          tag = "B-" + type;
        }
      }
    }
    current.tokens.push_back(std::move(token));
    current.tags.push_back(std::move(tag));
  }
  if (in.bad()) throw ParseError(line_no, "read failure");
  flush();
  return corpus;
}

LabeledCorpus load_conll(const std::filesystem::path& path, TagScheme scheme,
                         std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  try {
    return parse_conll(in, scheme, warnings);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_conll(const LabeledCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << '\t' << s.tags[i] << '\n';
    }
    out << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed");
}

// ---------------------------------------------------------------------------
// Alignment

AlignedDataset align(const EmbeddingDataset& embeddings, const LabeledCorpus& corpus) {
  return align(embeddings, corpus, corpus.tagset);
}

AlignedDataset align(const EmbeddingDataset& embeddings, const LabeledCorpus& corpus,
                     const std::vector<std::string>& tagset) {
  const std::size_t n = std::min(embeddings.sentences.size(), corpus.sentences.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings.sentences[i].size() != corpus.sentences[i].tokens.size()) {
      throw AlignError(i, "embedding has " + std::to_string(embeddings.sentences[i].size()) +
                              " tokens, corpus has " +
                              std::to_string(corpus.sentences[i].tokens.size()));
    }
  }
  if (embeddings.sentences.size() != corpus.sentences.size()) {
    throw AlignError(n, "embeddings have " + std::to_string(embeddings.sentences.size()) +
                            " sentences, corpus has " + std::to_string(corpus.sentences.size()));
  }

  AlignedDataset out;
  out.num_layers = embeddings.num_layers;
  out.dim = embeddings.dim;
  out.tagset = tagset;
  out.sentences.reserve(n);
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& labeled = corpus.sentences[i];
    AlignedSentence pair{embeddings.sentences[i], {}};
    pair.tags.reserve(labeled.tags.size());
    for (std::size_t t = 0; t < labeled.tags.size(); ++t) {
      int idx = -1;
      for (std::size_t k = 0; k < tagset.size(); ++k) {
        if (tagset[k] == labeled.tags[t]) {
          idx = static_cast<int>(k);
          break;
        }
      }
      if (idx < 0) throw AlignError(i, "tag '" + labeled.tags[t] + "' missing from tagset");
      pair.tags.push_back(idx);
      if (pair.embedding.tokens[t] != labeled.tokens[t]) ++mismatched;
    }
    out.sentences.push_back(std::move(pair));
  }
  if (mismatched > 0) {
    log::warn(std::to_string(mismatched) + " token strings differ between embeddings and corpus");
  }
  return out;
}

}  // namespace layermix
