#include "phaseprobe/tqp_parser.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

#include "phaseprobe/errors.hpp"
#include "phaseprobe/util.hpp"

namespace phaseprobe::tqp {

namespace {

const std::array<ToneBand, 5> kBands = {{
    {ToneBandLabel::purely_logical, 0, 0},
    {ToneBandLabel::rational_dominant, 1, 3},
    {ToneBandLabel::balanced, 4, 6},
    {ToneBandLabel::emotion_dominant, 7, 9},
    {ToneBandLabel::fully_affectionate, 10, 10},
}};

// Midpoints used when a band is claimed without an explicit score.
double midpoint_of(ToneBandLabel label) {
  switch (label) {
    case ToneBandLabel::purely_logical: return 0;
    case ToneBandLabel::rational_dominant: return 2;
    case ToneBandLabel::balanced: return 5;
    case ToneBandLabel::emotion_dominant: return 8;
    case ToneBandLabel::fully_affectionate: return 10;
  }
  return 5;
}

enum class SectionId { tone, score, markers, shift, quotes, interpretation, curve };

struct SectionKey {
  SectionId id;
  std::string_view keyword;  // lowercase, matched at decorated-line start
};

// Longer / more specific keywords first: "tsun-dere curve" must win over
// "tsun-dere score" never matching the curve heading and vice versa.
constexpr std::array<SectionKey, 9> kSectionKeys = {{
    {SectionId::curve, "tsun-dere curve"},
    {SectionId::curve, "tsundere curve"},
    {SectionId::score, "tsun-dere score"},
    {SectionId::score, "tsundere score"},
    {SectionId::tone, "tone phase"},
    {SectionId::markers, "emotive markers"},
    {SectionId::shift, "phase shift"},
    {SectionId::interpretation, "overall interpretation"},
    {SectionId::quotes, "quote"},
}};

const char* section_name(SectionId id) {
  switch (id) {
    case SectionId::tone: return "tone_phase";
    case SectionId::score: return "tsundere_score";
    case SectionId::markers: return "emotive_markers";
    case SectionId::shift: return "phase_shift";
    case SectionId::quotes: return "quotes";
    case SectionId::interpretation: return "interpretation";
    case SectionId::curve: return "curve_summary";
  }
  return "?";
}

struct Line {
  std::size_t begin;  // offset into raw
  std::size_t end;    // one past the last char, excluding '\n'
};

std::vector<Line> split_lines(std::string_view raw) {
  std::vector<Line> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= raw.size(); ++i) {
    if (i == raw.size() || raw[i] == '\n') {
      lines.push_back({start, i});
      start = i + 1;
    }
  }
  return lines;
}

// Strips list/heading decoration from the front of a line: whitespace,
// '#', '*', '_', '>', '-', bullets, and "1." / "2)"-style numbering.
std::size_t skip_decoration(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size()) {
    const unsigned char c = line[i];
    if (std::isspace(c) || c == '#' || c == '*' || c == '_' || c == '>' || c == '-') {
      ++i;
      continue;
    }
    // UTF-8 bullet U+2022
    if (c == 0xE2 && i + 2 < line.size() && static_cast<unsigned char>(line[i + 1]) == 0x80 &&
        static_cast<unsigned char>(line[i + 2]) == 0xA2) {
      i += 3;
      continue;
    }
    if (std::isdigit(c)) {
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      if (j < line.size() && (line[j] == '.' || line[j] == ')')) {
        i = j + 1;
        continue;
      }
    }
    break;
  }
  return i;
}

bool starts_with_ci(std::string_view text, std::string_view lower_keyword) {
  if (text.size() < lower_keyword.size()) return false;
  for (std::size_t i = 0; i < lower_keyword.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) != lower_keyword[i]) return false;
  }
  return true;
}

struct Heading {
  SectionId id;
  std::size_t line_index;
  std::size_t inline_begin;  // offset of text following the keyword
};

std::optional<Heading> match_heading(std::string_view raw, const Line& line,
                                     std::size_t line_index) {
  std::string_view text = raw.substr(line.begin, line.end - line.begin);
  const std::size_t deco = skip_decoration(text);
  std::string_view body = text.substr(deco);
  for (const auto& key : kSectionKeys) {
    if (starts_with_ci(body, key.keyword)) {
      return Heading{key.id, line_index, line.begin + deco + key.keyword.size()};
    }
  }
  return std::nullopt;
}

// First number in [0, 10] within text, scanning left to right.
std::optional<double> first_number_in_range(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    std::size_t start = i;
    bool negative = false;
    if (start > 0 && text[start - 1] == '-') {
      // A leading '-' glued to the digits marks a negative or a dash
      // compound (list bullet "- 7" keeps its space, en-dash "7–9" is
      // multibyte); treat ASCII '-' as a sign.
      negative = true;
    }
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j < text.size() && text[j] == '.' && j + 1 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
      ++j;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    }
    double value = 0;
    const auto res = std::from_chars(text.data() + start, text.data() + j, value);
    if (res.ec == std::errc()) {
      if (!negative && value >= 0.0 && value <= 10.0) return value;
    }
    i = j;
  }
  return std::nullopt;
}

// Number annotated as "score: N" / "score=N"; the rubric's own
// "(score: 4-6)" range lines never appear in responses, only in the
// template, so the first such annotation is the evaluator's pick.
std::optional<double> score_annotation(std::string_view text) {
  const std::string lower = util::to_lower(text);
  std::size_t pos = 0;
  while ((pos = lower.find("score", pos)) != std::string::npos) {
    std::size_t i = pos + 5;
    while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) ||
                               text[i] == ':' || text[i] == '=' || text[i] == '*')) {
      ++i;
    }
    // Window to the end of the annotation's number.
    const auto value = first_number_in_range(text.substr(i, 16));
    if (value) return value;
    pos += 5;
  }
  return std::nullopt;
}

// Removes "(0-10)"-style range annotations (hyphen, en or em dash) so the
// range bounds are never mistaken for the score itself.
std::string strip_range_annotation(std::string_view text) {
  std::string out(text);
  const std::array<std::string_view, 6> dashes = {"-", "–", "—", " - ", " – ",
                                                  " — "};
  for (std::string_view dash : dashes) {
    const std::string needle = "(0" + std::string(dash) + "10)";
    std::size_t pos;
    while ((pos = out.find(needle)) != std::string::npos) out.erase(pos, needle.size());
  }
  return out;
}

std::optional<ToneBandLabel> find_band_label(std::string_view text) {
  const std::string lower = util::to_lower(text);
  struct Pattern {
    std::string_view needle;
    ToneBandLabel label;
  };
  static constexpr std::array<Pattern, 8> kPatterns = {{
      {"purely logical", ToneBandLabel::purely_logical},
      {"rational-dominant", ToneBandLabel::rational_dominant},
      {"rational dominant", ToneBandLabel::rational_dominant},
      {"balanced", ToneBandLabel::balanced},
      {"emotion-dominant", ToneBandLabel::emotion_dominant},
      {"emotion dominant", ToneBandLabel::emotion_dominant},
      {"fully affectionate", ToneBandLabel::fully_affectionate},
      {"emotionally engaged", ToneBandLabel::fully_affectionate},
  }};
  std::size_t best_pos = std::string::npos;
  std::optional<ToneBandLabel> best;
  for (const auto& p : kPatterns) {
    const std::size_t pos = lower.find(p.needle);
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best = p.label;
    }
  }
  return best;
}

ToneBandLabel band_for_score(double score) {
  if (score < 0.5) return ToneBandLabel::purely_logical;
  if (score < 3.5) return ToneBandLabel::rational_dominant;
  if (score < 6.5) return ToneBandLabel::balanced;
  if (score < 9.5) return ToneBandLabel::emotion_dominant;
  return ToneBandLabel::fully_affectionate;
}

std::vector<std::string> collect_list_items(std::string_view text) {
  std::vector<std::string> items;
  for (const Line& line : split_lines(text)) {
    std::string_view l = text.substr(line.begin, line.end - line.begin);
    std::size_t i = 0;
    while (i < l.size() && std::isspace(static_cast<unsigned char>(l[i]))) ++i;
    if (i >= l.size()) continue;
    const unsigned char c = l[i];
    bool bullet = false;
    if (c == '-' || c == '*') {
      ++i;
      bullet = true;
    } else if (c == 0xE2 && i + 2 < l.size() && static_cast<unsigned char>(l[i + 1]) == 0x80 &&
               static_cast<unsigned char>(l[i + 2]) == 0xA2) {
      i += 3;
      bullet = true;
    } else if (std::isdigit(c)) {
      std::size_t j = i;
      while (j < l.size() && std::isdigit(static_cast<unsigned char>(l[j]))) ++j;
      if (j < l.size() && (l[j] == '.' || l[j] == ')')) {
        i = j + 1;
        bullet = true;
      }
    }
    if (!bullet) continue;
    std::string item = util::trim(l.substr(i));
    if (!item.empty()) items.push_back(std::move(item));
  }
  return items;
}

}  // namespace

const ToneBand& band_info(ToneBandLabel label) {
  return kBands[static_cast<std::size_t>(label)];
}

double band_midpoint(ToneBandLabel label) { return midpoint_of(label); }

namespace {

// The tail of the heading line (value often sits there) and the lines up
// to the next heading. Heading residue like "Classification:" stays in
// `inline_text` so it never pollutes list or verbatim content.
struct Section {
  std::string inline_text;
  std::string body;
  std::string full() const { return inline_text + "\n" + body; }
};

std::string strip_leading_colon(std::string_view s) {
  std::string t = util::trim(s);
  while (!t.empty() && (t.front() == ':' || t.front() == '*')) t = util::trim(t.substr(1));
  return t;
}

}  // namespace

ParseResult parse_evaluation(std::string_view raw) {
  ParseResult result;

  const std::vector<Line> lines = split_lines(raw);
  std::vector<Heading> headings;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (auto h = match_heading(raw, lines[i], i)) headings.push_back(*h);
  }

  // First occurrence of each section wins; order is irrelevant.
  std::map<SectionId, Section> sections;
  for (std::size_t h = 0; h < headings.size(); ++h) {
    const Heading& head = headings[h];
    if (sections.count(head.id)) continue;
    const Line& head_line = lines[head.line_index];
    const std::size_t body_begin = std::min(head_line.end + 1, raw.size());
    const std::size_t content_end =
        h + 1 < headings.size() ? lines[headings[h + 1].line_index].begin : raw.size();
    Section section;
    section.inline_text = std::string(raw.substr(head.inline_begin, head_line.end - head.inline_begin));
    if (body_begin < content_end) {
      section.body = std::string(raw.substr(body_begin, content_end - body_begin));
    }
    sections[head.id] = std::move(section);
    result.diagnostics.source_spans[section_name(head.id)] = {head.inline_begin, content_end};
  }

  auto warn = [&](WarningCode code, std::string message) {
    result.diagnostics.warnings.push_back({code, std::move(message)});
  };

  TqpEvaluation eval;

  // Tone band and tone phase score.
  {
    const auto it = sections.find(SectionId::tone);
    if (it == sections.end()) {
      result.error = ParseError::missing_tone_section;
      return result;
    }
    const std::string text = it->second.full();
    const std::optional<ToneBandLabel> band = find_band_label(text);
    const std::optional<double> score = score_annotation(text);
    if (!band && !score) {
      result.error = ParseError::missing_tone_section;
      return result;
    }
    if (band && score) {
      eval.tone_band = *band;
      eval.tone_phase_score = *score;
    } else if (band) {
      eval.tone_band = *band;
      eval.tone_phase_score = midpoint_of(*band);
      warn(WarningCode::midpoint_imputed,
           "tone band '" + std::string(to_string(*band)) + "' had no (score: N); using midpoint " +
               util::format_double(eval.tone_phase_score));
    } else {
      eval.tone_phase_score = *score;
      eval.tone_band = band_for_score(*score);
      warn(WarningCode::band_imputed,
           "no band label found; inferred '" + std::string(to_string(eval.tone_band)) +
               "' from score " + util::format_double(*score));
    }
  }

  // Tsun-Dere score.
  {
    const auto it = sections.find(SectionId::score);
    if (it == sections.end()) {
      result.error = ParseError::missing_score;
      return result;
    }
    const std::string cleaned = strip_range_annotation(it->second.full());
    const std::optional<double> score = first_number_in_range(cleaned);
    if (!score) {
      result.error = ParseError::missing_score;
      return result;
    }
    eval.tsundere_score = *score;
  }

  if (const auto it = sections.find(SectionId::markers); it != sections.end()) {
    eval.emotive_markers = collect_list_items(it->second.body);
    if (eval.emotive_markers.empty()) {
      const std::string whole = util::trim(it->second.body);
      const std::string fallback = !whole.empty() ? whole : strip_leading_colon(it->second.inline_text);
      if (!fallback.empty()) eval.emotive_markers.push_back(fallback);
    }
  } else {
    warn(WarningCode::missing_section, "no emotive markers section");
  }

  if (const auto it = sections.find(SectionId::shift); it != sections.end()) {
    std::string text = util::trim(it->second.body);
    if (text.empty()) text = strip_leading_colon(it->second.inline_text);
    eval.phase_shift_text = std::move(text);
  } else {
    warn(WarningCode::missing_section, "no phase shift section");
  }

  if (const auto it = sections.find(SectionId::quotes); it != sections.end()) {
    eval.quotes = collect_list_items(it->second.body);
    if (eval.quotes.empty()) {
      const std::string whole = util::trim(it->second.body);
      const std::string fallback = !whole.empty() ? whole : strip_leading_colon(it->second.inline_text);
      if (!fallback.empty()) eval.quotes.push_back(fallback);
    }
  } else {
    warn(WarningCode::missing_section, "no quote evidence section");
  }

  if (const auto it = sections.find(SectionId::interpretation); it != sections.end()) {
    std::string text = util::trim(it->second.body);
    if (text.empty()) text = strip_leading_colon(it->second.inline_text);
    eval.interpretation = std::move(text);
  } else {
    warn(WarningCode::missing_section, "no overall interpretation section");
  }

  if (const auto it = sections.find(SectionId::curve); it != sections.end()) {
    CurveSummary curve;
    curve.text = util::trim(it->second.body);
    if (curve.text.empty()) curve.text = strip_leading_colon(it->second.inline_text);
    curve.score = score_annotation(it->second.full());
    eval.curve_summary = std::move(curve);
  }

  result.evaluation = std::move(eval);
  return result;
}

std::vector<Warning> check_band_consistency(const TqpEvaluation& eval) {
  std::vector<Warning> warnings;
  const ToneBand& band = band_info(eval.tone_band);
  if (eval.tone_phase_score < band.range_low || eval.tone_phase_score > band.range_high) {
    warnings.push_back(
        {WarningCode::band_mismatch,
         "tone score " + util::format_double(eval.tone_phase_score) + " outside band '" +
             std::string(to_string(eval.tone_band)) + "' range [" +
             util::format_double(band.range_low) + ", " + util::format_double(band.range_high) +
             "]"});
  }
  if (eval.curve_summary && eval.curve_summary->score) {
    const double diff = std::fabs(*eval.curve_summary->score - eval.tsundere_score);
    if (diff > 0.5) {
      warnings.push_back({WarningCode::curve_divergence,
                          "curve summary score " + util::format_double(*eval.curve_summary->score) +
                              " diverges from Tsun-Dere score " +
                              util::format_double(eval.tsundere_score) + " by " +
                              util::format_double(diff)});
    }
  }
  return warnings;
}

std::string_view to_string(ToneBandLabel label) {
  switch (label) {
    case ToneBandLabel::purely_logical: return "purely_logical";
    case ToneBandLabel::rational_dominant: return "rational_dominant";
    case ToneBandLabel::balanced: return "balanced";
    case ToneBandLabel::emotion_dominant: return "emotion_dominant";
    case ToneBandLabel::fully_affectionate: return "fully_affectionate";
  }
  return "balanced";
}

std::string_view to_string(WarningCode code) {
  switch (code) {
    case WarningCode::midpoint_imputed: return "MIDPOINT_IMPUTED";
    case WarningCode::band_imputed: return "BAND_IMPUTED";
    case WarningCode::missing_section: return "MISSING_SECTION";
    case WarningCode::band_mismatch: return "BAND_MISMATCH";
    case WarningCode::curve_divergence: return "CURVE_DIVERGENCE";
  }
  return "?";
}

std::string_view to_string(ParseError error) {
  switch (error) {
    case ParseError::none: return "none";
    case ParseError::missing_score: return "MissingScore";
    case ParseError::missing_tone_section: return "MissingToneSection";
  }
  return "none";
}

ToneBandLabel band_from_string(std::string_view s) {
  for (const auto& b : kBands) {
    if (to_string(b.label) == s) return b.label;
  }
  throw Error("unknown tone band: " + std::string(s));
}

nlohmann::json to_json(const TqpEvaluation& eval) {
  nlohmann::json j;
  j["tone_band"] = std::string(to_string(eval.tone_band));
  j["tone_phase_score"] = eval.tone_phase_score;
  j["tsundere_score"] = eval.tsundere_score;
  j["emotive_markers"] = eval.emotive_markers;
  j["phase_shift_text"] =
      eval.phase_shift_text ? nlohmann::json(*eval.phase_shift_text) : nlohmann::json(nullptr);
  j["quotes"] = eval.quotes;
  j["interpretation"] = eval.interpretation;
  if (eval.curve_summary) {
    nlohmann::json c;
    c["text"] = eval.curve_summary->text;
    c["score"] = eval.curve_summary->score ? nlohmann::json(*eval.curve_summary->score)
                                           : nlohmann::json(nullptr);
    j["curve_summary"] = c;
  } else {
    j["curve_summary"] = nullptr;
  }
  return j;
}

TqpEvaluation evaluation_from_json(const nlohmann::json& j) {
  TqpEvaluation eval;
  eval.tone_band = band_from_string(j.at("tone_band").get<std::string>());
  eval.tone_phase_score = j.at("tone_phase_score").get<double>();
  eval.tsundere_score = j.at("tsundere_score").get<double>();
  eval.emotive_markers = j.value("emotive_markers", std::vector<std::string>{});
  if (j.contains("phase_shift_text") && !j["phase_shift_text"].is_null()) {
    eval.phase_shift_text = j["phase_shift_text"].get<std::string>();
  }
  eval.quotes = j.value("quotes", std::vector<std::string>{});
  eval.interpretation = j.value("interpretation", std::string{});
  if (j.contains("curve_summary") && !j["curve_summary"].is_null()) {
    CurveSummary c;
    c.text = j["curve_summary"].value("text", std::string{});
    if (j["curve_summary"].contains("score") && !j["curve_summary"]["score"].is_null()) {
      c.score = j["curve_summary"]["score"].get<double>();
    }
    eval.curve_summary = std::move(c);
  }
  return eval;
}

}  // namespace phaseprobe::tqp
