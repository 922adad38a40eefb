#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "layermix/embedstore.hpp"
#include "layermix/optim.hpp"
#include "layermix/synth.hpp"

namespace layermix {

enum class MetricKind { kAccuracy, kChunkF1 };

MetricKind parse_metric(const std::string& s);
std::string to_string(MetricKind metric);

struct ExperimentConfig {
  std::string dataset = "dataset";
  std::filesystem::path train_embeddings;
  std::filesystem::path train_labels;
  std::filesystem::path dev_embeddings;
  std::filesystem::path dev_labels;
  std::filesystem::path test_embeddings;
  std::filesystem::path test_labels;
  TagScheme tag_scheme = TagScheme::kPlain;

  std::string scheme = "wavg:0,1,2";
  int hidden_size = 100;
  double dropout = 0.5;
  bool variational_dropout = true;
  double logit_penalty = 0.0;
  AdamConfig optimizer;
  int batch_size = 32;
  int max_epochs = 50;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  MetricKind metric = MetricKind::kAccuracy;
  // Upper bound on concurrently running seeds.
  int jobs = 1;

  // Checks value ranges and the scheme grammar (not layer ranges or paths).
  void validate() const;
};

// Parses the flat JSON config. Relative paths resolve against `base_dir`.
// Unknown keys are rejected with ConfigError.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Applies one "key=value" override. The value is read as JSON when it parses,
// otherwise as a string; "seeds" also accepts a comma-separated list.
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

SynthSpec parse_synth_spec(std::string_view json_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Train/dev/test splits aligned against one shared tagset: the training
// tagset in first-occurrence order followed by tags first seen in dev or test.
struct ExperimentData {
  std::string name;
  AlignedDataset train;
  AlignedDataset dev;
  AlignedDataset test;
  std::vector<std::string> tagset;

  std::uint32_t num_layers() const { return train.num_layers; }
  std::uint32_t dim() const { return train.dim; }
};

ExperimentData prepare_experiment_data(const EmbeddingDataset& train_emb,
                                       const LabeledCorpus& train_labels,
                                       const EmbeddingDataset& dev_emb,
                                       const LabeledCorpus& dev_labels,
                                       const EmbeddingDataset& test_emb,
                                       const LabeledCorpus& test_labels);
ExperimentData prepare_experiment_data(const SynthData& synth);
ExperimentData load_experiment_data(const ExperimentConfig& config);

struct RunResult {
  std::uint64_t seed = 0;
  std::string scheme;
  std::vector<double> dev_scores;  // one per epoch
  int selected_epoch = 0;          // 1-based; first epoch with the best dev score
  double test_score = 0.0;         // from the selected epoch's parameters
  std::vector<double> epoch_seconds;
  // Softmax mixing weights and gamma of the selected parameters
  // (learned schemes only).
  std::optional<std::vector<double>> mix_weights;
  std::optional<double> gamma;

  bool operator==(const RunResult&) const = default;
};

// One training run. All randomness (initialization, shuffling, dropout)
// derives from `seed`. Throws NumericalError on a non-finite batch loss.
RunResult train_one(const ExperimentConfig& config, const ExperimentData& data,
                    std::uint64_t seed);
RunResult train_one(const ExperimentConfig& config, std::uint64_t seed);

struct SeedFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct MultiSeedResult {
  std::vector<RunResult> runs;  // successful runs in seed-list order
  std::vector<SeedFailure> failures;
};

// Runs every seed of config.seeds, up to config.jobs at a time.
MultiSeedResult run_multi_seed(const ExperimentConfig& config, const ExperimentData& data);

struct SchemeSummary {
  std::string scheme;
  std::vector<std::uint64_t> seeds;
  std::vector<double> test_scores;
  double mean = 0.0;
  double std = 0.0;
  double spread = 0.0;  // max - min
  double epoch_seconds_mean = 0.0;
  std::optional<double> p_vs_best;  // empty for the best scheme
  bool significantly_worse = false;
  std::optional<std::vector<double>> mix_weights;  // mean over seeds
  std::optional<double> gamma;                     // mean over seeds

  bool operator==(const SchemeSummary&) const = default;
};

struct ComparisonReport {
  std::string dataset;
  std::string metric;
  std::vector<SchemeSummary> schemes;

  // Highest mean; ties go to the earlier scheme.
  std::size_t best_index() const;

  bool operator==(const ComparisonReport&) const = default;
};

inline constexpr double kSignificanceLevel = 0.01;

// Reduces per-scheme runs into a report: means, spreads, and Welch tests of
// every scheme against the best-mean one.
ComparisonReport summarize(const std::string& dataset, MetricKind metric,
                           const std::vector<std::pair<std::string, std::vector<RunResult>>>& runs);

// Runs every config over the shared data. Configs must carry identical seed
// lists (ConfigError otherwise) and there must be at least two of them.
// Failed seeds are appended to `failures` and left out of the summary. The
// successful runs of each config can be collected through `runs`.
ComparisonReport compare_schemes(const std::vector<ExperimentConfig>& configs,
                                 const ExperimentData& data,
                                 std::vector<SeedFailure>* failures = nullptr,
                                 std::vector<std::vector<RunResult>>* runs = nullptr);

}  // namespace layermix
