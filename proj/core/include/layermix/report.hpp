#pragma once

#include <string>
#include <string_view>

#include "layermix/harness.hpp"

namespace layermix {

// JSON documents for run results and comparison reports. Floating-point
// values are written with 17 significant digits so they parse back to the
// identical double.
std::string run_result_to_json(const RunResult& result);
RunResult run_result_from_json(std::string_view text);

std::string report_to_json(const ComparisonReport& report);
ComparisonReport report_from_json(std::string_view text);

// Fixed-width table: scheme, mean, std, spread, p, flag. One row per scheme,
// with '*' marking the best mean.
std::string format_table(const ComparisonReport& report);

}  // namespace layermix
