#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace phaseprobe::tqp {

// The five rubric bands. Ranges partition the 0..10 ordinal scale:
// 0, [1,3], [4,6], [7,9], 10.
enum class ToneBandLabel {
  purely_logical,
  rational_dominant,
  balanced,
  emotion_dominant,
  fully_affectionate,
};

struct ToneBand {
  ToneBandLabel label;
  double range_low;
  double range_high;
};

const ToneBand& band_info(ToneBandLabel label);
double band_midpoint(ToneBandLabel label);

struct CurveSummary {
  std::string text;
  std::optional<double> score;
};

struct TqpEvaluation {
  ToneBandLabel tone_band = ToneBandLabel::balanced;
  double tone_phase_score = 0;
  double tsundere_score = 0;
  std::vector<std::string> emotive_markers;
  std::optional<std::string> phase_shift_text;  // verbatim, never scored
  std::vector<std::string> quotes;
  std::string interpretation;
  std::optional<CurveSummary> curve_summary;
};

enum class WarningCode {
  midpoint_imputed,   // tone band had no "(score: N)"; midpoint substituted
  band_imputed,       // numeric score present but no recognizable band label
  missing_section,    // an expected non-fatal section was not found
  band_mismatch,      // tone score outside the claimed band's range
  curve_divergence,   // curve score differs from the Tsun-Dere score by > 0.5
};

struct Warning {
  WarningCode code;
  std::string message;
};

struct SectionSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ParseDiagnostics {
  std::vector<Warning> warnings;
  std::map<std::string, SectionSpan> source_spans;
};

enum class ParseError { none, missing_score, missing_tone_section };

struct ParseResult {
  std::optional<TqpEvaluation> evaluation;
  ParseError error = ParseError::none;
  ParseDiagnostics diagnostics;
  bool usable() const { return error == ParseError::none && evaluation.has_value(); }
};

// Parses one evaluator response against the six-section rubric. Section
// headings are matched by keyword, case-insensitively, tolerating
// markdown decoration and renumbering, in any order.
ParseResult parse_evaluation(std::string_view raw);

// Cross-checks the parsed numbers against the claimed band and the curve
// summary. Warnings only; never invalidates an evaluation.
std::vector<Warning> check_band_consistency(const TqpEvaluation& eval);

std::string_view to_string(ToneBandLabel label);
std::string_view to_string(WarningCode code);
std::string_view to_string(ParseError error);
ToneBandLabel band_from_string(std::string_view s);  // throws Error

nlohmann::json to_json(const TqpEvaluation& eval);
TqpEvaluation evaluation_from_json(const nlohmann::json& j);

}  // namespace phaseprobe::tqp
