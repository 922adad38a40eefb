#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "layermix/embedstore.hpp"
#include "layermix/errors.hpp"
#include "layermix/harness.hpp"
#include "layermix/report.hpp"
#include "layermix/synth.hpp"

namespace layermix::cli {

namespace fs = std::filesystem;

std::vector<std::string> split_schemes(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const auto comma = csv.find(',', pos);
    std::string item = csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const bool bare_index = !item.empty() && std::all_of(item.begin(), item.end(), [](char c) {
      return std::isdigit(static_cast<unsigned char>(c));
    });
    if (bare_index && !out.empty() && out.back().starts_with("wavg:")) {
      out.back() += "," + item;
    } else if (!item.empty()) {
      out.push_back(std::move(item));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

namespace {

struct Options {
  std::string config;
  std::string scheme;
  std::string schemes;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  std::optional<int> jobs;
  std::string path;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path.string(), "cannot open for writing");
  f << text;
  if (!f) throw IoError(path.string(), "write failed");
}

std::string dataset_summary(const EmbeddingDataset& d) {
  return "layers=" + std::to_string(d.num_layers) + " dim=" + std::to_string(d.dim) +
         " sentences=" + std::to_string(d.sentences.size()) +
         " tokens=" + std::to_string(d.num_tokens());
}

std::string corpus_summary(const LabeledCorpus& c) {
  return "sentences=" + std::to_string(c.sentences.size()) +
         " tokens=" + std::to_string(c.num_tokens()) + " tags=" + std::to_string(c.tagset.size());
}

// "--key=value" leftovers become config overrides.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : extras) {
    const auto eq = e.find('=');
    if (!e.starts_with("--") || eq == std::string::npos || eq == 2) {
      throw ConfigError("unknown argument '" + e + "'");
    }
    out.emplace_back(e.substr(2, eq - 2), e.substr(eq + 1));
  }
  return out;
}

ExperimentConfig resolve_config(const Options& opt, const std::vector<std::string>& extras) {
  if (opt.config.empty()) throw ConfigError("--config is required");
  auto config = load_experiment_config(opt.config);
  for (const auto& [key, value] : parse_overrides(extras)) apply_override(config, key, value);
  if (!opt.scheme.empty()) apply_override(config, "scheme", "\"" + opt.scheme + "\"");
  if (!opt.seeds.empty()) apply_override(config, "seeds", opt.seeds);
  if (opt.jobs) config.jobs = *opt.jobs;
  config.validate();
  return config;
}

int cmd_gen_fixtures(const Options& opt, const std::vector<std::string>& extras,
                     std::ostream& out) {
  if (!extras.empty()) throw ConfigError("unknown argument '" + extras.front() + "'");
  if (opt.config.empty()) throw ConfigError("--config is required");
  if (opt.out.empty()) throw ConfigError("--out is required");
  const auto spec = load_synth_spec(opt.config);
  const auto data = generate(spec);
  const fs::path dir = opt.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());

  const std::pair<const char*, const SynthSplit*> splits[] = {
      {"train", &data.train}, {"dev", &data.dev}, {"test", &data.test}};
  for (const auto& [name, split] : splits) {
    const auto mleb = dir / (std::string(name) + ".mleb");
    const auto conll = dir / (std::string(name) + ".conll");
    write_embeddings(split->embeddings, mleb);
    out << "wrote " << mleb.string() << " " << dataset_summary(split->embeddings) << "\n";
    write_conll(split->corpus, conll);
    out << "wrote " << conll.string() << " " << corpus_summary(split->corpus) << "\n";
  }
  const auto protos = dir / "prototypes.bin";
  write_prototypes(data.prototypes, protos);
  out << "wrote " << protos.string() << " tags=" << data.prototypes.num_tags
      << " dim=" << data.prototypes.dim << "\n";
  return kOk;
}

int cmd_train(const Options& opt, const std::vector<std::string>& extras, std::ostream& out) {
  const auto config = resolve_config(opt, extras);
  const std::uint64_t seed = opt.seed.value_or(config.seeds.front());
  const auto data = load_experiment_data(config);
  const auto result = train_one(config, data, seed);
  const auto json = run_result_to_json(result);
  if (opt.out.empty()) {
    out << json;
  } else {
    write_text(opt.out, json);
    out << "test " << to_string(config.metric) << " " << result.test_score << " (epoch "
        << result.selected_epoch << ") -> " << opt.out << "\n";
  }
  return kOk;
}

int cmd_compare(const Options& opt, const std::vector<std::string>& extras, std::ostream& out,
                std::ostream& err) {
  const auto base = resolve_config(opt, extras);
  const auto schemes = split_schemes(opt.schemes);
  if (schemes.size() < 2) throw ConfigError("--schemes needs at least two schemes");
  std::vector<ExperimentConfig> configs;
  for (const auto& s : schemes) {
    auto c = base;
    c.scheme = s;
    c.validate();
    configs.push_back(std::move(c));
  }
  const auto data = load_experiment_data(base);
  std::vector<SeedFailure> failures;
  const auto report = compare_schemes(configs, data, &failures);
  const auto json = report_to_json(report);
  out << format_table(report);
  if (opt.out.empty()) {
    out << json;
  } else {
    write_text(opt.out, json);
  }
  if (!failures.empty()) {
    for (const auto& f : failures) err << "seed " << f.seed << " failed: " << f.message << "\n";
    return kPartial;
  }
  return kOk;
}

int cmd_inspect(const Options& opt, std::ostream& out) {
  const fs::path path = opt.path;
  if (is_mleb_file(path)) {
    out << dataset_summary(load_embeddings(path)) << "\n";
    return kOk;
  }
  const auto corpus = load_conll(path, TagScheme::kPlain);
  out << corpus_summary(corpus) << "\n";
  out << "tagset:";
  for (const auto& t : corpus.tagset) out << " " << t;
  out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compare layer weighting schemes for multi-layer embeddings in a BiLSTM-CRF tagger",
               "layermix"};
  app.require_subcommand(1);
  Options opt;

  auto* gen = app.add_subcommand("gen-fixtures", "Generate a synthetic train/dev/test fixture");
  gen->add_option("--config", opt.config, "Fixture spec (JSON)");
  gen->add_option("--out", opt.out, "Output directory");

  auto* train = app.add_subcommand("train", "Train one (scheme, seed) run");
  train->add_option("--config", opt.config, "Experiment config (JSON)");
  train->add_option("--scheme", opt.scheme, "layer:<l> | concat | avg | wavg:<l,...>");
  train->add_option("--seed", opt.seed, "Random seed");
  train->add_option("--seeds", opt.seeds, "Comma-separated seed list");
  train->add_option("--out", opt.out, "Result JSON path");
  train->allow_extras();

  auto* compare = app.add_subcommand("compare", "Multi-seed comparison of weighting schemes");
  compare->add_option("--config", opt.config, "Experiment config (JSON)");
  compare->add_option("--schemes", opt.schemes, "Comma-separated scheme list")->required();
  compare->add_option("--seeds", opt.seeds, "Comma-separated seed list");
  compare->add_option("--jobs", opt.jobs, "Concurrent seed runs");
  compare->add_option("--out", opt.out, "Report JSON path");
  compare->allow_extras();

  auto* inspect = app.add_subcommand("inspect", "Summarize an MLEB or CoNLL file");
  inspect->add_option("path", opt.path, "File to inspect")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_fixtures(opt, gen->remaining(), out);
    if (train->parsed()) return cmd_train(opt, train->remaining(), out);
    if (compare->parsed()) return cmd_compare(opt, compare->remaining(), out, err);
    if (inspect->parsed()) return cmd_inspect(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kIo;
  } catch (const AlignError& e) {
    err << "alignment error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kConfig;
}

}  // namespace layermix::cli
