#include "layermix/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "layermix/errors.hpp"

namespace layermix {

using json = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // Keep a float marker so the value reads back as floating point.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void dump(const json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + json(key).dump() + ": ";
        dump(value, indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      // Arrays of scalars stay on one line.
      out += "[";
      bool first = true;
      for (const auto& value : j) {
        if (!first) out += ", ";
        first = false;
        dump(value, indent + 1, out);
      }
      out += "]";
      return;
    }
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

std::string dump17(const json& j) {
  std::string out;
  dump(j, 0, out);
  out += "\n";
  return out;
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON document: ") + e.what());
  }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

}  // namespace

std::string run_result_to_json(const RunResult& r) {
  json j;
  j["seed"] = r.seed;
  j["scheme"] = r.scheme;
  j["dev_scores"] = r.dev_scores;
  j["selected_epoch"] = r.selected_epoch;
  j["test_score"] = r.test_score;
  j["epoch_seconds"] = r.epoch_seconds;
  j["mix_weights"] = optional_json(r.mix_weights);
  j["gamma"] = optional_json(r.gamma);
  return dump17(j);
}

RunResult run_result_from_json(std::string_view text) {
  const json j = parse(text);
  try {
    RunResult r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scheme = j.at("scheme").get<std::string>();
    r.dev_scores = j.at("dev_scores").get<std::vector<double>>();
    r.selected_epoch = j.at("selected_epoch").get<int>();
    r.test_score = j.at("test_score").get<double>();
    r.epoch_seconds = j.at("epoch_seconds").get<std::vector<double>>();
    r.mix_weights = optional_from<std::vector<double>>(j, "mix_weights");
    r.gamma = optional_from<double>(j, "gamma");
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run result: ") + e.what());
  }
}

std::string report_to_json(const ComparisonReport& report) {
  json j;
  j["dataset"] = report.dataset;
  j["metric"] = report.metric;
  j["schemes"] = json::array();
  for (const auto& s : report.schemes) {
    json e;
    e["scheme"] = s.scheme;
    e["seeds"] = s.seeds;
    e["test_scores"] = s.test_scores;
    e["mean"] = s.mean;
    e["std"] = s.std;
    e["spread"] = s.spread;
    e["epoch_seconds_mean"] = s.epoch_seconds_mean;
    e["p_vs_best"] = optional_json(s.p_vs_best);
    e["significantly_worse"] = s.significantly_worse;
    e["mix_weights"] = optional_json(s.mix_weights);
    e["gamma"] = optional_json(s.gamma);
    j["schemes"].push_back(std::move(e));
  }
  return dump17(j);
}

ComparisonReport report_from_json(std::string_view text) {
  const json j = parse(text);
  try {
    ComparisonReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    for (const auto& e : j.at("schemes")) {
      SchemeSummary s;
      s.scheme = e.at("scheme").get<std::string>();
      s.seeds = e.at("seeds").get<std::vector<std::uint64_t>>();
      s.test_scores = e.at("test_scores").get<std::vector<double>>();
      s.mean = e.at("mean").get<double>();
      s.std = e.at("std").get<double>();
      s.spread = e.at("spread").get<double>();
      s.epoch_seconds_mean = e.at("epoch_seconds_mean").get<double>();
      s.p_vs_best = optional_from<double>(e, "p_vs_best");
      s.significantly_worse = e.at("significantly_worse").get<bool>();
      s.mix_weights = optional_from<std::vector<double>>(e, "mix_weights");
      s.gamma = optional_from<double>(e, "gamma");
      r.schemes.push_back(std::move(s));
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed comparison report: ") + e.what());
  }
}

std::string format_table(const ComparisonReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %9s %9s %9s %11s %s\n", "scheme", "mean", "std",
                "spread", "p_vs_best", "significantly_worse");
  out << line;
  const std::size_t best = report.schemes.empty() ? 0 : report.best_index();
  for (std::size_t i = 0; i < report.schemes.size(); ++i) {
    const auto& s = report.schemes[i];
    char p[32];
    if (s.p_vs_best) {
      std::snprintf(p, sizeof p, "%.3g", *s.p_vs_best);
    } else {
      std::snprintf(p, sizeof p, "%s", i == best ? "best" : "-");
    }
    const std::string name = (i == best ? "*" : " ") + s.scheme;
    std::snprintf(line, sizeof line, "%-16s %9.4f %9.4f %9.4f %11s %s\n", name.c_str(), s.mean,
                  s.std, s.spread, p, s.significantly_worse ? "yes" : "no");
    out << line;
  }
  return out.str();
}

}  // namespace layermix
