#include "layermix/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "layermix/errors.hpp"
#include "layermix/logging.hpp"
#include "layermix/metrics.hpp"
#include "layermix/mixer.hpp"
#include "layermix/stats.hpp"
#include "layermix/tagger.hpp"

namespace layermix {

using nlohmann::json;

MetricKind parse_metric(const std::string& s) {
  if (s == "accuracy") return MetricKind::kAccuracy;
  if (s == "chunk_f1") return MetricKind::kChunkF1;
  throw ConfigError("unknown metric '" + s + "' (expected accuracy or chunk_f1)");
}

std::string to_string(MetricKind metric) {
  return metric == MetricKind::kAccuracy ? "accuracy" : "chunk_f1";
}

void ExperimentConfig::validate() const {
  MixScheme::parse(scheme);
  if (hidden_size < 1) throw ConfigError("hidden_size must be >= 1");
  DropoutSpec{dropout, variational_dropout}.validate();
  if (!(logit_penalty >= 0.0)) throw ConfigError("logit_penalty must be non-negative");
  optimizer.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json parse_json_object(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  return j;
}

template <typename T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key + ": wrong value type");
  }
}

int get_int(const json& value, const std::string& key) {
  if (!value.is_number_integer()) throw ConfigError(key + ": expected an integer");
  return value.get<int>();
}

std::uint32_t get_u32(const json& value, const std::string& key) {
  if (!value.is_number_integer() || value.get<std::int64_t>() < 0 ||
      value.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError(key + ": expected a non-negative integer");
  }
  return value.get<std::uint32_t>();
}

double get_double(const json& value, const std::string& key) {
  if (!value.is_number()) throw ConfigError(key + ": expected a number");
  return value.get<double>();
}

std::uint64_t get_seed(const json& value, const std::string& key) {
  if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
    throw ConfigError(key + ": expected a non-negative integer seed");
  }
  return value.get<std::uint64_t>();
}

std::filesystem::path resolve(const json& value, const std::string& key,
                              const std::filesystem::path& base) {
  std::filesystem::path p = get_as<std::string>(value, key);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

void apply_value(ExperimentConfig& c, const std::string& key, const json& v,
                 const std::filesystem::path& base) {
  if (key == "dataset") {
    c.dataset = get_as<std::string>(v, key);
  } else if (key == "train_embeddings") {
    c.train_embeddings = resolve(v, key, base);
  } else if (key == "train_labels") {
    c.train_labels = resolve(v, key, base);
  } else if (key == "dev_embeddings") {
    c.dev_embeddings = resolve(v, key, base);
  } else if (key == "dev_labels") {
    c.dev_labels = resolve(v, key, base);
  } else if (key == "test_embeddings") {
    c.test_embeddings = resolve(v, key, base);
  } else if (key == "test_labels") {
    c.test_labels = resolve(v, key, base);
  } else if (key == "tag_scheme") {
    c.tag_scheme = parse_tag_scheme(get_as<std::string>(v, key));
  } else if (key == "scheme") {
    c.scheme = get_as<std::string>(v, key);
  } else if (key == "hidden_size") {
    c.hidden_size = get_int(v, key);
  } else if (key == "dropout") {
    c.dropout = get_double(v, key);
  } else if (key == "variational_dropout") {
    c.variational_dropout = get_as<bool>(v, key);
  } else if (key == "logit_penalty") {
    c.logit_penalty = get_double(v, key);
  } else if (key == "learning_rate") {
    c.optimizer.learning_rate = get_double(v, key);
  } else if (key == "beta1") {
    c.optimizer.beta1 = get_double(v, key);
  } else if (key == "beta2") {
    c.optimizer.beta2 = get_double(v, key);
  } else if (key == "epsilon") {
    c.optimizer.epsilon = get_double(v, key);
  } else if (key == "clip_norm") {
    c.optimizer.clip_norm = get_double(v, key);
  } else if (key == "batch_size") {
    c.batch_size = get_int(v, key);
  } else if (key == "max_epochs") {
    c.max_epochs = get_int(v, key);
  } else if (key == "seeds") {
    if (!v.is_array()) throw ConfigError("seeds: expected an array of integers");
    c.seeds.clear();
    for (const auto& s : v) c.seeds.push_back(get_seed(s, key));
  } else if (key == "metric") {
    c.metric = parse_metric(get_as<std::string>(v, key));
  } else if (key == "jobs") {
    c.jobs = get_int(v, key);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir) {
  const json j = parse_json_object(json_text);
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) apply_value(c, key, value, base_dir);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text(path), path.parent_path());
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
  json v;
  if (key == "seeds" && !value.empty() && value.front() != '[') {
    v = json::array();
    std::size_t pos = 0;
    while (pos <= value.size()) {
      const auto comma = value.find(',', pos);
      const std::string item = value.substr(pos, comma == std::string::npos ? std::string::npos
                                                                             : comma - pos);
      try {
        std::size_t used = 0;
        const auto seed = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        v.push_back(seed);
      } catch (const std::exception&) {
        throw ConfigError("seeds: bad seed '" + item + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  } else {
    v = json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;
  }
  apply_value(config, key, v, {});
  config.validate();
}

SynthSpec parse_synth_spec(std::string_view json_text) {
  const json j = parse_json_object(json_text);
  SynthSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "num_layers") {
      s.num_layers = get_u32(v, key);
    } else if (key == "dim") {
      s.dim = get_u32(v, key);
    } else if (key == "num_tags") {
      s.num_tags = get_u32(v, key);
    } else if (key == "n_train") {
      s.n_train = get_u32(v, key);
    } else if (key == "n_dev") {
      s.n_dev = get_u32(v, key);
    } else if (key == "n_test") {
      s.n_test = get_u32(v, key);
    } else if (key == "min_length") {
      s.min_length = get_u32(v, key);
    } else if (key == "max_length") {
      s.max_length = get_u32(v, key);
    } else if (key == "informative_layer") {
      s.informative_layer = get_u32(v, key);
    } else if (key == "sigma_signal") {
      s.sigma_signal = get_double(v, key);
    } else if (key == "sigma_noise") {
      s.sigma_noise = get_double(v, key);
    } else if (key == "tag_scheme") {
      s.tag_scheme = parse_tag_scheme(get_as<std::string>(v, key));
    } else if (key == "seed") {
      s.seed = get_seed(v, key);
    } else {
      throw ConfigError("unknown fixture spec key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  return parse_synth_spec(read_text(path));
}

// ---------------------------------------------------------------------------
// Data

ExperimentData prepare_experiment_data(const EmbeddingDataset& train_emb,
                                       const LabeledCorpus& train_labels,
                                       const EmbeddingDataset& dev_emb,
                                       const LabeledCorpus& dev_labels,
                                       const EmbeddingDataset& test_emb,
                                       const LabeledCorpus& test_labels) {
  for (const auto* e : {&dev_emb, &test_emb}) {
    if (e->num_layers != train_emb.num_layers || e->dim != train_emb.dim) {
      throw ConfigError("dev/test embeddings differ in shape from training embeddings");
    }
  }
  ExperimentData d;
  d.tagset = train_labels.tagset;
  for (const auto* c : {&dev_labels, &test_labels}) {
    for (const auto& tag : c->tagset) {
      if (std::find(d.tagset.begin(), d.tagset.end(), tag) == d.tagset.end()) {
        log::warn("tag '" + tag + "' does not occur in the training data");
        d.tagset.push_back(tag);
      }
    }
  }
  d.train = align(train_emb, train_labels, d.tagset);
  d.dev = align(dev_emb, dev_labels, d.tagset);
  d.test = align(test_emb, test_labels, d.tagset);
  if (d.train.sentences.empty()) throw ConfigError("training set is empty");
  return d;
}

ExperimentData prepare_experiment_data(const SynthData& synth) {
  auto d = prepare_experiment_data(synth.train.embeddings, synth.train.corpus,
                                   synth.dev.embeddings, synth.dev.corpus, synth.test.embeddings,
                                   synth.test.corpus);
  d.name = "synthetic";
  return d;
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  auto d = prepare_experiment_data(
      load_embeddings(config.train_embeddings), load_conll(config.train_labels, config.tag_scheme),
      load_embeddings(config.dev_embeddings), load_conll(config.dev_labels, config.tag_scheme),
      load_embeddings(config.test_embeddings), load_conll(config.test_labels, config.tag_scheme));
  d.name = config.dataset;
  return d;
}

// ---------------------------------------------------------------------------
// Training

namespace {

using Real = float;

TagSequences to_strings(const std::vector<std::vector<int>>& seqs,
                        const std::vector<std::string>& tagset) {
  TagSequences out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    std::vector<std::string> tags;
    tags.reserve(s.size());
    for (int t : s) tags.push_back(tagset[static_cast<std::size_t>(t)]);
    out.push_back(std::move(tags));
  }
  return out;
}

double evaluate(const TaggerModel<Real>& model, const AlignedDataset& data,
                const std::vector<std::string>& tagset, MetricKind metric) {
  std::vector<std::vector<int>> gold;
  std::vector<std::vector<int>> pred;
  for (const auto& s : data.sentences) {
    gold.push_back(s.tags);
    pred.push_back(s.tags.empty() ? std::vector<int>{} : tagger_decode(model, s.embedding));
  }
  const auto g = to_strings(gold, tagset);
  const auto p = to_strings(pred, tagset);
  return metric == MetricKind::kAccuracy ? token_accuracy(g, p) : chunk_f1(g, p).f1;
}

std::vector<std::span<const Real>> const_view(const std::vector<std::span<Real>>& blocks) {
  return {blocks.begin(), blocks.end()};
}

}  // namespace

RunResult train_one(const ExperimentConfig& config, const ExperimentData& data,
                    std::uint64_t seed) {
  config.validate();
  const MixScheme scheme = MixScheme::parse(config.scheme);
  scheme.validate(static_cast<int>(data.num_layers()));
  const DropoutSpec dropout{config.dropout, config.variational_dropout};

  Rng rng(seed);
  auto model = TaggerModel<Real>::random(scheme, static_cast<int>(data.num_layers()),
                                         static_cast<int>(data.dim()),
                                         static_cast<int>(data.tagset.size()), config.hidden_size,
                                         rng);
  auto grad = model.zeros_like();
  auto best = model;
  AdamState<Real> adam;

  RunResult result;
  result.seed = seed;
  result.scheme = scheme.to_string();

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < data.train.sentences.size(); ++i) {
    if (!data.train.sentences[i].tags.empty()) order.push_back(i);
  }
  double best_dev = -std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(std::span(order));
    int batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      ++batch_no;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      grad.set_zero();
      double loss = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& s = data.train.sentences[order[k]];
        const auto masks = sample_tagger_masks(model, static_cast<Eigen::Index>(s.tags.size()),
                                               dropout, rng);
        loss += tagger_loss_and_grad(model, s.embedding, s.tags, masks, grad);
      }
      const auto count = static_cast<Real>(end - begin);
      loss /= static_cast<double>(end - begin);
      auto grad_blocks = grad.blocks();
      for (auto& b : grad_blocks) {
        for (auto& g : b) g /= count;
      }
      if (scheme.has_params() && config.logit_penalty > 0.0) {
        const auto pen = logit_penalty(model.mix, static_cast<Real>(config.logit_penalty));
        loss += pen.loss;
        grad.mix.logits += pen.grad;
      }
      if (!std::isfinite(loss)) {
        throw NumericalError(epoch, batch_no, "non-finite training loss (seed " +
                                                  std::to_string(seed) + ", scheme " +
                                                  result.scheme + ")");
      }
      if (config.optimizer.clip_norm > 0.0) {
        clip_global_norm<Real>(grad_blocks, config.optimizer.clip_norm);
      }
      const auto const_grads = const_view(grad_blocks);
      adam_step<Real>(model.blocks(), const_grads, adam, config.optimizer);
    }

    const double dev = evaluate(model, data.dev, data.tagset, config.metric);
    result.dev_scores.push_back(dev);
    if (dev > best_dev) {
      best_dev = dev;
      best = model;
      result.selected_epoch = epoch;
    }
    const auto t1 = std::chrono::steady_clock::now();
    result.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    log::debug("seed " + std::to_string(seed) + " " + result.scheme + " epoch " +
               std::to_string(epoch) + " dev " + std::to_string(dev));
  }

  result.test_score = evaluate(best, data.test, data.tagset, config.metric);
  if (scheme.has_params()) {
    const auto s = softmax(best.mix.logits);
    result.mix_weights = std::vector<double>(s.data(), s.data() + s.size());
    result.gamma = static_cast<double>(best.mix.gamma);
  }
  return result;
}

RunResult train_one(const ExperimentConfig& config, std::uint64_t seed) {
  return train_one(config, load_experiment_data(config), seed);
}

MultiSeedResult run_multi_seed(const ExperimentConfig& config, const ExperimentData& data) {
  config.validate();
  const std::size_t n = config.seeds.size();
  std::vector<std::optional<RunResult>> slots(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = train_one(config, data, config.seeds[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown failure";
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  MultiSeedResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      out.runs.push_back(std::move(*slots[i]));
    } else {
      out.failures.push_back({config.seeds[i], errors[i]});
      log::error("seed " + std::to_string(config.seeds[i]) + " failed: " + errors[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

std::size_t ComparisonReport::best_index() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < schemes.size(); ++i) {
    if (schemes[i].mean > schemes[best].mean) best = i;
  }
  return best;
}

ComparisonReport summarize(const std::string& dataset, MetricKind metric,
                           const std::vector<std::pair<std::string, std::vector<RunResult>>>& runs) {
  ComparisonReport report;
  report.dataset = dataset;
  report.metric = to_string(metric);
  for (const auto& [scheme, results] : runs) {
    SchemeSummary s;
    s.scheme = scheme;
    std::size_t epochs = 0;
    double seconds = 0.0;
    for (const auto& r : results) {
      s.seeds.push_back(r.seed);
      s.test_scores.push_back(r.test_score);
      for (double t : r.epoch_seconds) seconds += t;
      epochs += r.epoch_seconds.size();
      if (r.mix_weights) {
        if (!s.mix_weights) s.mix_weights = std::vector<double>(r.mix_weights->size(), 0.0);
        for (std::size_t k = 0; k < r.mix_weights->size(); ++k) {
          (*s.mix_weights)[k] += (*r.mix_weights)[k] / static_cast<double>(results.size());
        }
      }
      if (r.gamma) s.gamma = s.gamma.value_or(0.0) + *r.gamma / static_cast<double>(results.size());
    }
    s.mean = mean(s.test_scores);
    s.std = sample_stddev(s.test_scores);
    if (!s.test_scores.empty()) {
      const auto [lo, hi] = std::minmax_element(s.test_scores.begin(), s.test_scores.end());
      s.spread = *hi - *lo;
    }
    s.epoch_seconds_mean = epochs ? seconds / static_cast<double>(epochs) : 0.0;
    report.schemes.push_back(std::move(s));
  }
  if (report.schemes.empty()) return report;

  const std::size_t best = report.best_index();
  const auto& best_scores = report.schemes[best].test_scores;
  for (std::size_t i = 0; i < report.schemes.size(); ++i) {
    if (i == best) continue;
    auto& s = report.schemes[i];
    if (s.test_scores.size() < 2 || best_scores.size() < 2) continue;
    s.p_vs_best = welch_t_test(s.test_scores, best_scores).p;
    s.significantly_worse = *s.p_vs_best < kSignificanceLevel;
  }
  return report;
}

ComparisonReport compare_schemes(const std::vector<ExperimentConfig>& configs,
                                 const ExperimentData& data,
                                 std::vector<SeedFailure>* failures,
                                 std::vector<std::vector<RunResult>>* runs_out) {
  if (configs.size() < 2) throw ConfigError("comparison needs at least two schemes");
  for (const auto& c : configs) {
    c.validate();
    if (c.seeds != configs.front().seeds) {
      throw ConfigError("all schemes in a comparison must share one seed list");
    }
    if (c.metric != configs.front().metric) {
      throw ConfigError("all schemes in a comparison must use one metric");
    }
    MixScheme::parse(c.scheme).validate(static_cast<int>(data.num_layers()));
  }
  std::vector<std::pair<std::string, std::vector<RunResult>>> runs;
  for (const auto& c : configs) {
    auto r = run_multi_seed(c, data);
    if (failures) failures->insert(failures->end(), r.failures.begin(), r.failures.end());
    runs.emplace_back(MixScheme::parse(c.scheme).to_string(), std::move(r.runs));
  }
  const std::string name = data.name.empty() ? configs.front().dataset : data.name;
  auto report = summarize(name, configs.front().metric, runs);
  if (runs_out) {
    runs_out->clear();
    for (auto& [scheme, r] : runs) runs_out->push_back(std::move(r));
  }
  return report;
}

}  // namespace layermix
