// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "crf_oracle.hpp"
#include "finite_diff.hpp"
#include "generators.hpp"
#include "layermix/crf.hpp"
#include "layermix/embedstore.hpp"
#include "layermix/errors.hpp"
#include "layermix/harness.hpp"
#include "layermix/metrics.hpp"
#include "layermix/mixer.hpp"
#include "layermix/neuralnet.hpp"
#include "layermix/report.hpp"
#include "layermix/stats.hpp"
#include "layermix/synth.hpp"
#include "layermix/tagger.hpp"

namespace {

using namespace layermix;
using layermix::testing::cflat;
using layermix::testing::flat;
using layermix::testing::max_grad_error;
namespace fs = std::filesystem;

// Tolerances and budgets.
constexpr double kCrfRelTol = 1e-10;
constexpr double kCrfSeconds = 10.0;
constexpr int kCrfInstances = 200;
constexpr double kGradTol = 1e-4;
constexpr int kGradInstances = 20;
constexpr double kGradSeconds = 60.0;
constexpr double kIdentityTol = 1e-12;
constexpr int kIdentityCases = 100;
constexpr double kDiscoveryMargin = 0.10;
constexpr int kDiscoveryMinSeeds = 8;
constexpr double kSubsetGap = 0.03;
constexpr double kExperimentSeconds = 15.0 * 60.0;
constexpr double kWelchRefP = 0.021311641128756727;
constexpr double kWelchTol = 1e-3;
constexpr int kRoundTripCases = 100;

// Training setup for the layer-discovery experiment. Hidden size, dropout,
// batch size and seeds are the library defaults. Fewer epochs at a higher
// learning rate keep 40 runs inside the time budget.
ExperimentConfig experiment_config(const std::string& scheme) {
  ExperimentConfig c;
  c.dataset = "synthetic";
  c.scheme = scheme;
  c.hidden_size = 100;
  c.dropout = 0.5;
  c.variational_dropout = true;
  c.batch_size = 32;
  c.max_epochs = 20;
  c.optimizer.learning_rate = 3e-3;
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  c.metric = MetricKind::kAccuracy;
  return c;
}

const std::vector<std::string> kExperimentSchemes = {"layer:1", "layer:2", "wavg:0,1,2",
                                                     "wavg:0,1"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. CRF oracle equivalence

Outcome crf_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_rel = 0.0;
  int viterbi_mismatch = 0;
  for (int k = 0; k < kCrfInstances; ++k) {
    const auto T = 1 + static_cast<Eigen::Index>(rng.below(4));
    const auto n = 1 + static_cast<Eigen::Index>(rng.below(6));
    const auto e = layermix::testing::random_matrix(n, T, rng);
    CrfParams crf;
    crf.transitions = layermix::testing::random_matrix(T, T, rng);
    crf.start = layermix::testing::random_vector(T, rng);
    crf.end = layermix::testing::random_vector(T, rng);
    const auto oracle = layermix::testing::brute_force(e, crf);
    const double z = log_partition(e, crf);
    worst_rel = std::max(worst_rel, std::abs(z - oracle.log_z) / std::abs(oracle.log_z));
    const auto v = viterbi_decode(e, crf);
    if (v.score != oracle.best || score_sequence(e, crf, v.tags) != oracle.best) {
      ++viterbi_mismatch;
    }
  }
  const double secs = seconds_since(t0);
  return {worst_rel < kCrfRelTol && viterbi_mismatch == 0 && secs < kCrfSeconds,
          fmt("%d instances, max logZ rel err %.2e, viterbi mismatches %d, %.2f s", kCrfInstances,
              worst_rel, viterbi_mismatch, secs)};
}

// ---------------------------------------------------------------------------
// 2. Gradient suite

double grad_mixer(const MixScheme& scheme, Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < kGradInstances; ++k) {
    Eigen::MatrixXd h = layermix::testing::random_matrix(3, 5, rng);
    auto p = MixParams<double>::initial(scheme);
    p.logits = layermix::testing::random_vector(p.logits.size(), rng);
    p.gamma = rng.uniform(0.5, 2.0);
    const Eigen::VectorXd g = layermix::testing::random_vector(5, rng);
    const auto grad = mix_backward<double>(g, h, scheme, p);
    auto f = [&] { return g.dot(mix_forward<double>(h, scheme, p)); };
    worst = std::max(worst, max_grad_error(flat(h), cflat(grad.layers), f));
    worst = std::max(worst, max_grad_error(flat(p.logits), cflat(grad.logits), f));
    worst = std::max(worst, max_grad_error(std::span(&p.gamma, 1), std::span(&grad.gamma, 1), f));
  }
  return worst;
}

double grad_linear(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < kGradInstances; ++k) {
    LinearParams<double> p{layermix::testing::random_matrix(3, 4, rng),
                           layermix::testing::random_vector(3, rng)};
    Eigen::VectorXd x = layermix::testing::random_vector(4, rng);
    const Eigen::VectorXd g = layermix::testing::random_vector(3, rng);
    const auto grad = linear_backward<double>(x, p, g);
    auto f = [&] { return g.dot(linear_forward<double>(x, p)); };
    worst = std::max(worst, max_grad_error(flat(p.weight), cflat(grad.weight), f));
    worst = std::max(worst, max_grad_error(flat(p.bias), cflat(grad.bias), f));
    worst = std::max(worst, max_grad_error(flat(x), cflat(grad.input), f));
  }
  return worst;
}

LstmParams<double> random_lstm(Eigen::Index in, Eigen::Index h, Rng& rng) {
  return {layermix::testing::random_matrix(4 * h, in, rng, 0.5),
          layermix::testing::random_matrix(4 * h, h, rng, 0.5),
          layermix::testing::random_vector(4 * h, rng, 0.5)};
}

double lstm_param_error(LstmParams<double>& p, const LstmParams<double>& g,
                        const std::function<double()>& f) {
  return std::max({max_grad_error(flat(p.w_input), cflat(g.w_input), f),
                   max_grad_error(flat(p.w_recurrent), cflat(g.w_recurrent), f),
                   max_grad_error(flat(p.bias), cflat(g.bias), f)});
}

double grad_lstm_step(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < kGradInstances; ++k) {
    const auto in = 1 + static_cast<Eigen::Index>(rng.below(4));
    const auto h = 1 + static_cast<Eigen::Index>(rng.below(4));
    auto p = random_lstm(in, h, rng);
    Eigen::VectorXd x = layermix::testing::random_vector(in, rng);
    Eigen::VectorXd hp = layermix::testing::random_vector(h, rng, 0.5);
    Eigen::VectorXd cp = layermix::testing::random_vector(h, rng, 0.5);
    const Eigen::VectorXd gh = layermix::testing::random_vector(h, rng);
    const Eigen::VectorXd gc = layermix::testing::random_vector(h, rng);
    auto grad = LstmParams<double>::zeros(in, h);
    const auto step = lstm_step<double>(x, hp, cp, p);
    const auto back = lstm_step_backward<double>(step, x, hp, cp, p, gh, gc, grad);
    auto f = [&] {
      const auto s = lstm_step<double>(x, hp, cp, p);
      return gh.dot(s.h) + gc.dot(s.c);
    };
    worst = std::max(worst, lstm_param_error(p, grad, f));
    worst = std::max(worst, max_grad_error(flat(x), cflat(back.input), f));
    worst = std::max(worst, max_grad_error(flat(hp), cflat(back.h_prev), f));
    worst = std::max(worst, max_grad_error(flat(cp), cflat(back.c_prev), f));
  }
  return worst;
}

double grad_bilstm(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < kGradInstances; ++k) {
    const auto in = 1 + static_cast<Eigen::Index>(rng.below(3));
    const auto h = 1 + static_cast<Eigen::Index>(rng.below(4));
    const auto n = 1 + static_cast<Eigen::Index>(rng.below(5));
    BiLstmParams<double> l1{random_lstm(in, h, rng), random_lstm(in, h, rng)};
    BiLstmParams<double> l2{random_lstm(2 * h, h, rng), random_lstm(2 * h, h, rng)};
    BiLstmMasks<double> m1, m2;
    if (k % 2 == 1) {
      const DropoutSpec spec{0.3, true};
      m1 = {sample_dropout_mask<double>(h, n, spec, rng), sample_dropout_mask<double>(h, n, spec, rng)};
      m2 = {sample_dropout_mask<double>(h, n, spec, rng), sample_dropout_mask<double>(h, n, spec, rng)};
    }
    Eigen::MatrixXd x = layermix::testing::random_matrix(in, n, rng);
    const Eigen::MatrixXd g = layermix::testing::random_matrix(2 * h, n, rng);
    const auto a = bilstm_forward<double>(x, l1, m1);
    const auto b = bilstm_forward<double>(a.output, l2, m2);
    auto g1 = BiLstmParams<double>::zeros(in, h);
    auto g2 = BiLstmParams<double>::zeros(2 * h, h);
    const Eigen::MatrixXd da = bilstm_backward<double>(b, l2, g, g2);
    const Eigen::MatrixXd dx = bilstm_backward<double>(a, l1, da, g1);
    auto f = [&] {
      const auto y = bilstm_forward<double>(bilstm_forward<double>(x, l1, m1).output, l2, m2);
      return (g.array() * y.output.array()).sum();
    };
    worst = std::max({worst, lstm_param_error(l1.forward, g1.forward, f),
                      lstm_param_error(l1.backward, g1.backward, f),
                      lstm_param_error(l2.forward, g2.forward, f),
                      lstm_param_error(l2.backward, g2.backward, f),
                      max_grad_error(flat(x), cflat(dx), f)});
  }
  return worst;
}

double grad_crf(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < kGradInstances; ++k) {
    const auto T = 1 + static_cast<Eigen::Index>(rng.below(4));
    const auto n = 1 + static_cast<Eigen::Index>(rng.below(6));
    Eigen::MatrixXd e = layermix::testing::random_matrix(n, T, rng);
    CrfParams crf{layermix::testing::random_matrix(T, T, rng),
                  layermix::testing::random_vector(T, rng),
                  layermix::testing::random_vector(T, rng)};
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& t : y) t = static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
    const auto r = nll_and_grad(e, crf, y);
    auto f = [&] { return log_partition(e, crf) - score_sequence(e, crf, y); };
    worst = std::max({worst, max_grad_error(flat(e), cflat(r.grad_emissions), f),
                      max_grad_error(flat(crf.transitions), cflat(r.grad.transitions), f),
                      max_grad_error(flat(crf.start), cflat(r.grad.start), f),
                      max_grad_error(flat(crf.end), cflat(r.grad.end), f)});
  }
  return worst;
}

double grad_penalty(Rng& rng) {
  double worst = 0.0;
  const auto scheme = MixScheme::learned_weighted({0, 1, 2});
  for (int k = 0; k < kGradInstances; ++k) {
    auto p = MixParams<double>::initial(scheme);
    p.logits = layermix::testing::random_vector(3, rng);
    const double lambda = rng.uniform(0.01, 2.0);
    const auto r = logit_penalty(p, lambda);
    auto f = [&] { return logit_penalty(p, lambda).loss; };
    worst = std::max(worst, max_grad_error(flat(p.logits), cflat(r.grad), f));
  }
  return worst;
}

double grad_end_to_end(Rng& rng) {
  double worst = 0.0;
  const auto scheme = MixScheme::learned_weighted({0, 1, 2});
  for (int k = 0; k < kGradInstances; ++k) {
    const int L = 3, D = 4, T = 2, h = 2;
    auto model = TaggerModel<double>::random(scheme, L, D, T, h, rng);
    model.transitions = layermix::testing::random_matrix(T, T, rng, 0.5);
    model.start = layermix::testing::random_vector(T, rng, 0.5);
    model.end = layermix::testing::random_vector(T, rng, 0.5);
    model.mix.logits = layermix::testing::random_vector(L, rng, 0.5);
    model.mix.gamma = rng.uniform(0.5, 1.5);
    const auto n = 2 + static_cast<std::size_t>(rng.below(3));
    auto sentence = layermix::testing::random_sentence(L, D, n, rng);
    for (auto& v : sentence.values) v *= 0.1f;
    std::vector<int> gold(n);
    for (auto& t : gold) t = static_cast<int>(rng.below(T));
    TaggerMasks<double> masks;
    if (k % 2 == 1) {
      masks = sample_tagger_masks(model, static_cast<Eigen::Index>(n), DropoutSpec{0.3, true}, rng);
    }
    auto grad = model.zeros_like();
    tagger_loss_and_grad(model, sentence, gold, masks, grad);
    auto params = model.blocks();
    const auto grads = std::as_const(grad).blocks();
    auto f = [&] { return tagger_loss(model, sentence, gold, masks); };
    for (std::size_t b = 0; b < params.size(); ++b) {
      worst = std::max(worst, max_grad_error(params[b], grads[b], f));
    }
  }
  return worst;
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(202);
  const std::vector<std::pair<std::string, std::function<double()>>> checks = {
      {"mixer wavg:0,1,2", [&] { return grad_mixer(MixScheme::learned_weighted({0, 1, 2}), rng); }},
      {"mixer wavg:0,1", [&] { return grad_mixer(MixScheme::learned_weighted({0, 1}), rng); }},
      {"mixer wavg:1", [&] { return grad_mixer(MixScheme::learned_weighted({1}), rng); }},
      {"linear", [&] { return grad_linear(rng); }},
      {"lstm step", [&] { return grad_lstm_step(rng); }},
      {"2-layer bilstm", [&] { return grad_bilstm(rng); }},
      {"crf nll", [&] { return grad_crf(rng); }},
      {"logit penalty", [&] { return grad_penalty(rng); }},
      {"end-to-end", [&] { return grad_end_to_end(rng); }},
  };
  bool ok = true;
  std::string detail;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, check] : checks) {
    const double err = check();
    if (!(err < kGradTol)) {
      ok = false;
      detail += name + " " + fmt("%.2e", err) + "; ";
    }
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kGradSeconds;
  return {ok, detail + fmt("%zu checks x %d instances, worst rel err %.2e (%s), %.2f s",
                           checks.size(), kGradInstances, worst, worst_name.c_str(), secs)};
}

// ---------------------------------------------------------------------------
// 3. Scheme identities

Outcome scheme_identities() {
  Rng rng(303);
  const auto all = MixScheme::learned_weighted({0, 1, 2});
  const auto sub = MixScheme::learned_weighted({0, 1});
  double avg_gap = 0.0, shift_gap = 0.0;
  int exclusion_changes = 0;
  for (int k = 0; k < kIdentityCases; ++k) {
    const Eigen::MatrixXd h = layermix::testing::random_matrix(3, 8, rng, 2.0);
    const auto fixed = mix_forward<double>(h, MixScheme::fixed_average(), {});
    const auto learned = mix_forward<double>(h, all, MixParams<double>::initial(all));
    avg_gap = std::max(avg_gap, (fixed - learned).cwiseAbs().maxCoeff());

    auto p = MixParams<double>::initial(sub);
    p.logits = layermix::testing::random_vector(2, rng, 2.0);
    p.gamma = rng.uniform(0.1, 3.0);
    Eigen::MatrixXd perturbed = h;
    perturbed.row(2) = layermix::testing::random_vector(8, rng, 50.0).transpose();
    if (mix_forward<double>(h, sub, p) != mix_forward<double>(perturbed, sub, p)) {
      ++exclusion_changes;
    }
    auto shifted = p;
    shifted.logits.array() += rng.uniform(-100.0, 100.0);
    shift_gap = std::max(shift_gap, (mix_forward<double>(h, sub, p) -
                                     mix_forward<double>(h, sub, shifted))
                                        .cwiseAbs()
                                        .maxCoeff());
  }
  return {avg_gap <= kIdentityTol && shift_gap <= kIdentityTol && exclusion_changes == 0,
          fmt("%d matrices, wavg(w=0,g=1) vs avg %.2e, shift %.2e, excluded-layer changes %d",
              kIdentityCases, avg_gap, shift_gap, exclusion_changes)};
}

// ---------------------------------------------------------------------------
// 4, 5, 9 share one fixture experiment.

struct FixtureExperiment {
  ComparisonReport report;
  std::vector<std::vector<RunResult>> runs;
  std::vector<SeedFailure> failures;
  double seconds = 0.0;
};

const FixtureExperiment& fixture_experiment() {
  static const FixtureExperiment exp = [] {
    FixtureExperiment e;
    SynthSpec spec;
    spec.num_layers = 3;
    spec.dim = 16;
    spec.num_tags = 3;
    spec.informative_layer = 1;
    spec.sigma_signal = 0.1;
    spec.sigma_noise = 1.0;
    spec.n_train = 200;
    spec.n_dev = 50;
    spec.n_test = 50;
    spec.min_length = 5;
    spec.max_length = 10;
    const auto data = prepare_experiment_data(generate(spec));
    std::vector<ExperimentConfig> configs;
    for (const auto& s : kExperimentSchemes) configs.push_back(experiment_config(s));
    const auto t0 = std::chrono::steady_clock::now();
    e.report = compare_schemes(configs, data, &e.failures, &e.runs);
    e.seconds = seconds_since(t0);
    return e;
  }();
  return exp;
}

const SchemeSummary& summary_of(const ComparisonReport& r, const std::string& scheme) {
  for (const auto& s : r.schemes) {
    if (s.scheme == scheme) return s;
  }
  throw std::runtime_error("scheme " + scheme + " missing from report");
}

Outcome layer_discovery() {
  const auto& e = fixture_experiment();
  const auto& l1 = summary_of(e.report, "layer:1");
  const auto& l2 = summary_of(e.report, "layer:2");
  const auto& w012 = summary_of(e.report, "wavg:0,1,2");
  const auto& w01 = summary_of(e.report, "wavg:0,1");

  const bool a = l1.mean - l2.mean >= kDiscoveryMargin && l2.significantly_worse &&
                 l2.p_vs_best.has_value() && *l2.p_vs_best < kSignificanceLevel;
  int dominant = 0;
  const auto it = std::find(kExperimentSchemes.begin(), kExperimentSchemes.end(), "wavg:0,1,2");
  for (const auto& run : e.runs[static_cast<std::size_t>(it - kExperimentSchemes.begin())]) {
    const auto& w = run.mix_weights.value();
    if (w[1] > w[0] && w[1] > w[2]) ++dominant;
  }
  const bool b = dominant >= kDiscoveryMinSeeds;
  const double gap = std::abs(w01.mean - w012.mean);
  const bool c = gap < kSubsetGap;
  const bool fast = e.seconds < kExperimentSeconds;
  return {a && b && c && fast && e.failures.empty(),
          fmt("(a) layer:1 %.4f vs layer:2 %.4f, p=%.2e; (b) s1 largest in %d/10 seeds; "
              "(c) |wavg:0,1 - wavg:0,1,2| = %.4f; %.1f s",
              l1.mean, l2.mean, l2.p_vs_best.value_or(1.0), dominant, gap, e.seconds)};
}

bool is_number_array(const nlohmann::json& j, std::size_t size) {
  if (!j.is_array() || j.size() != size) return false;
  return std::all_of(j.begin(), j.end(), [](const auto& v) { return v.is_number(); });
}

Outcome protocol_fidelity() {
  const auto& e = fixture_experiment();
  const auto& r = e.report;
  std::vector<std::string> problems;
  auto require = [&](bool cond, const std::string& what) {
    if (!cond) problems.push_back(what);
  };

  const auto text = report_to_json(r);
  const auto j = nlohmann::json::parse(text);
  const std::set<std::string> top{"dataset", "metric", "schemes"};
  const std::set<std::string> keys{"scheme", "seeds", "test_scores", "mean", "std", "spread",
                                   "epoch_seconds_mean", "p_vs_best", "significantly_worse",
                                   "mix_weights", "gamma"};
  std::set<std::string> seen;
  for (const auto& [k, v] : j.items()) seen.insert(k);
  require(seen == top, "top-level keys");
  require(j["dataset"].is_string() && j["metric"].is_string() && j["schemes"].is_array(),
          "top-level types");
  for (const auto& s : j["schemes"]) {
    std::set<std::string> sk;
    for (const auto& [k, v] : s.items()) sk.insert(k);
    require(sk == keys, "scheme keys");
    require(s["scheme"].is_string(), "scheme type");
    require(s["seeds"].is_array() && s["seeds"].size() == 10, "10 seeds");
    require(is_number_array(s["test_scores"], 10), "10 test scores");
    for (const char* k : {"mean", "std", "spread", "epoch_seconds_mean"}) {
      require(s[k].is_number_float(), k);
    }
    require(s["p_vs_best"].is_null() || s["p_vs_best"].is_number(), "p_vs_best type");
    require(s["significantly_worse"].is_boolean(), "flag type");
    require(s["mix_weights"].is_null() || s["mix_weights"].is_array(), "mix_weights type");
    require(s["gamma"].is_null() || s["gamma"].is_number(), "gamma type");
  }
  require(report_from_json(text) == r, "json round trip");

  std::size_t best = 0;
  for (std::size_t i = 0; i < r.schemes.size(); ++i) {
    const auto& s = r.schemes[i];
    const double m = std::accumulate(s.test_scores.begin(), s.test_scores.end(), 0.0) /
                     static_cast<double>(s.test_scores.size());
    require(s.test_scores.size() == 10 && std::abs(s.mean - m) <= 1e-15, "mean of 10 runs");
    if (s.mean > r.schemes[best].mean) best = i;
  }
  require(r.best_index() == best, "best-mean identification");
  for (std::size_t i = 0; i < r.schemes.size(); ++i) {
    const auto& s = r.schemes[i];
    if (i == best) {
      require(!s.p_vs_best && !s.significantly_worse, "best never flagged");
    } else {
      require(s.p_vs_best.has_value(), "p for non-best");
      const double p = welch_t_test(s.test_scores, r.schemes[best].test_scores).p;
      require(s.p_vs_best && *s.p_vs_best == p, "p is Welch vs best");
      require(s.significantly_worse == (p < kSignificanceLevel), "flag iff p < 0.01");
    }
  }
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const double welch_p = welch_t_test(a, b).p;
  require(std::abs(welch_p - kWelchRefP) < kWelchTol, "Welch reference example");

  std::string detail = fmt("%zu schemes x 10 seeds, best %s, Welch([1,2,3],[4,5,6]) p=%.6f",
                           r.schemes.size(), r.schemes[best].scheme.c_str(), welch_p);
  for (const auto& p : problems) detail += "; failed: " + p;
  return {problems.empty(), detail};
}

Outcome seed_variance() {
  const auto& r = fixture_experiment().report;
  bool ok = !r.schemes.empty();
  std::string detail = "spread";
  for (const auto& s : r.schemes) {
    const auto [lo, hi] = std::minmax_element(s.test_scores.begin(), s.test_scores.end());
    ok = ok && s.spread == *hi - *lo;
    detail += fmt(" %s=%.4f", s.scheme.c_str(), s.spread);
  }
  const auto j = nlohmann::json::parse(report_to_json(r));
  for (std::size_t i = 0; i < r.schemes.size(); ++i) {
    ok = ok && j["schemes"][i]["spread"].get<double>() == r.schemes[i].spread;
  }
  return {ok, detail + " (each equals max-min of per-seed test scores)"};
}

// ---------------------------------------------------------------------------
// 6. Metric correctness

Outcome metric_examples() {
  int failed = 0, total = 0;
  auto check = [&](bool cond) {
    ++total;
    failed += cond ? 0 : 1;
  };
  const TagSequences acc_gold{{"A", "B"}, {"C", "D"}};
  check(token_accuracy(acc_gold, acc_gold) == 1.0);
  check(token_accuracy(acc_gold, {{"X", "X"}, {"X", "X"}}) == 0.0);
  check(token_accuracy(acc_gold, {{"A", "B"}, {"C", "X"}}) == 0.75);

  check(extract_spans({"B-PER", "I-PER", "O", "B-LOC"}) ==
        std::vector<Span>{{"PER", 0, 2}, {"LOC", 3, 4}});
  check(extract_spans({"O", "O"}).empty());
  check(extract_spans({"I-PER", "I-PER", "B-PER"}) ==
        std::vector<Span>{{"PER", 0, 2}, {"PER", 2, 3}});

  const auto same = chunk_f1({{"B-PER", "I-PER", "O", "B-LOC"}}, {{"B-PER", "I-PER", "O", "B-LOC"}});
  check(same.precision == 1.0 && same.recall == 1.0 && same.f1 == 1.0);
  const auto partial = chunk_f1({{"B-PER", "O"}}, {{"B-PER", "I-PER"}});
  check(partial.correct == 0 && partial.f1 == 0.0);
  const auto half = chunk_f1({{"B-PER", "O", "O", "B-LOC"}}, {{"B-PER", "O", "B-LOC", "I-LOC"}});
  check(half.precision == 0.5 && half.recall == 0.5 && half.f1 == 0.5);
  return {failed == 0, fmt("%d/%d worked examples exact", total - failed, total)};
}

// ---------------------------------------------------------------------------
// 7. Determinism

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "layermix_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "spec.json") << R"({"seed": 17})";
    std::ofstream(dir / "exp.json") << R"({
      "train_embeddings": "a/train.mleb", "train_labels": "a/train.conll",
      "dev_embeddings": "a/dev.mleb", "dev_labels": "a/dev.conll",
      "test_embeddings": "a/test.mleb", "test_labels": "a/test.conll",
      "hidden_size": 16, "max_epochs": 3})";
  }
  const auto spec = (dir / "spec.json").string();
  if (cli({"gen-fixtures", "--config", spec, "--out", (dir / "a").string()}) != 0 ||
      cli({"gen-fixtures", "--config", spec, "--out", (dir / "b").string()}) != 0) {
    return {false, "gen-fixtures failed"};
  }
  int files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    ++files;
    if (slurp(entry.path()) != slurp(dir / "b" / entry.path().filename())) ++differing;
  }

  const auto exp = (dir / "exp.json").string();
  for (const char* name : {"r1.json", "r2.json"}) {
    if (cli({"train", "--config", exp, "--scheme", "wavg:0,1,2", "--seed", "42", "--out",
             (dir / name).string()}) != 0) {
      return {false, "train failed"};
    }
  }
  auto strip_timing = [](std::string text) {
    auto j = nlohmann::ordered_json::parse(text);
    j.erase("epoch_seconds");
    return j.dump();
  };
  const auto r1 = slurp(dir / "r1.json");
  const auto r2 = slurp(dir / "r2.json");
  const bool same_run = strip_timing(r1) == strip_timing(r2);
  fs::remove_all(dir);
  return {files == 7 && differing == 0 && same_run,
          fmt("gen-fixtures: %d files, %d differ; train result JSON %s (timing excluded)", files,
              differing, same_run ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 8. I/O robustness

Outcome io_robustness() {
  const fs::path path = fs::temp_directory_path() / "layermix_acceptance_roundtrip.mleb";
  Rng rng(808);
  int mismatches = 0;
  for (int k = 0; k < kRoundTripCases; ++k) {
    const auto d = layermix::testing::random_dataset(rng);
    write_embeddings(d, path);
    const auto back = load_embeddings(path);
    if (!(back == d) || encode_embeddings(back) != slurp(path)) ++mismatches;
  }
  fs::remove(path);

  EmbeddingDataset d;
  d.num_layers = 3;
  d.dim = 4;
  d.sentences.push_back(layermix::testing::random_sentence(3, 4, 3, rng));
  const auto good = encode_embeddings(d);
  auto kind_of = [](const std::string& bytes) -> std::optional<FormatErrorKind> {
    try {
      decode_embeddings(std::as_bytes(std::span(bytes.data(), bytes.size())));
    } catch (const FormatError& e) {
      return e.kind();
    }
    return std::nullopt;
  };
  auto bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  const auto truncated = good.substr(0, good.size() - 7);
  auto non_finite = good;
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(non_finite.data() + non_finite.size() - 4, &inf, 4);

  const bool magic_ok = kind_of(bad_magic) == FormatErrorKind::kBadMagic;
  const bool trunc_ok = kind_of(truncated) == FormatErrorKind::kTruncated;
  const bool finite_ok = kind_of(non_finite) == FormatErrorKind::kNonFinite;
  return {mismatches == 0 && magic_ok && trunc_ok && finite_ok,
          fmt("%d/%d round trips bitwise; BadMagic %s, Truncated %s, NonFinite %s",
              kRoundTripCases - mismatches, kRoundTripCases, magic_ok ? "ok" : "WRONG",
              trunc_ok ? "ok" : "WRONG", finite_ok ? "ok" : "WRONG")};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "CRF oracle equivalence", crf_oracle},
    {2, "gradient suite", gradient_suite},
    {3, "scheme identities", scheme_identities},
    {4, "layer-discovery experiment", layer_discovery},
    {5, "protocol fidelity", protocol_fidelity},
    {6, "metric correctness", metric_examples},
    {7, "determinism", determinism},
    {8, "I/O robustness", io_robustness},
    {9, "seed-variance surfacing", seed_variance},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
