#include "phaseprobe/prompts.hpp"

#include <cctype>
#include <set>

#include "phaseprobe/errors.hpp"
#include "phaseprobe/util.hpp"

namespace phaseprobe::prompts {

Corpus::Corpus(std::vector<PromptSpec> specs) : specs_(std::move(specs)) {
  std::set<std::string_view> seen;
  for (const auto& s : specs_) {
    if (!seen.insert(s.id).second) throw Error("duplicate prompt id: " + s.id);
  }
}

Corpus Corpus::builtin() { return Corpus(builtin_prompt_specs()); }

const PromptSpec* Corpus::find(std::string_view id) const {
  for (const auto& s : specs_) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const PromptSpec& Corpus::at(std::string_view id) const {
  const PromptSpec* s = find(id);
  if (!s) throw UnknownPrompt("unknown prompt id: " + std::string(id));
  return *s;
}

void Corpus::export_to_dir(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& s : specs_) {
    util::write_file(dir / (s.id + ".txt"), s.text + "\n");
  }
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in_token) ++count;
    in_token = !ws;
  }
  return count;
}

std::size_t sentence_count(std::string_view text) {
  std::size_t count = 0;
  bool in_quote = false;
  bool in_terminator_run = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = text[i];
    // Straight double quote toggles; typographic quotes open/close.
    if (c == '"') {
      in_quote = !in_quote;
      in_terminator_run = false;
      continue;
    }
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80) {
      const unsigned char third = text[i + 2];
      if (third == 0x9C) in_quote = true;        // U+201C left double quote
      else if (third == 0x9D) in_quote = false;  // U+201D right double quote
      i += 2;
      in_terminator_run = false;
      continue;
    }
    const bool terminator = (c == '.' || c == '!' || c == '?');
    if (terminator && !in_quote && !in_terminator_run) ++count;
    in_terminator_run = terminator;
  }
  return count;
}

bool ValidationReport::passed() const {
  for (const auto& c : checks) {
    if (c.status == CheckStatus::fail) return false;
  }
  return true;
}

bool ValidationReport::has_warnings() const {
  for (const auto& c : checks) {
    if (c.status == CheckStatus::warn) return true;
  }
  return false;
}

ValidationReport validate_prompt(const PromptSpec& spec, const TokenCounter& counter) {
  ValidationReport report;
  report.prompt_id = spec.id;

  if (spec.text.empty()) {
    report.checks.push_back({"non_empty", CheckStatus::fail, "prompt text is empty"});
  } else {
    report.checks.push_back({"non_empty", CheckStatus::pass,
                             std::to_string(spec.text.size()) + " bytes"});
  }

  const std::size_t sentences = sentence_count(spec.text);
  if (spec.declared_sentence_count > 0) {
    const bool ok = sentences == static_cast<std::size_t>(spec.declared_sentence_count);
    report.checks.push_back(
        {"sentence_count", ok ? CheckStatus::pass : CheckStatus::fail,
         "counted " + std::to_string(sentences) + ", declared " +
             std::to_string(spec.declared_sentence_count)});
  } else {
    report.checks.push_back({"sentence_count", CheckStatus::pass,
                             "counted " + std::to_string(sentences) + ", none declared"});
  }

  if (spec.declared_token_count > 0) {
    const std::size_t tokens = counter(spec.text);
    const bool ok = tokens == static_cast<std::size_t>(spec.declared_token_count);
    // Declared counts document the original tokenizer; a mismatch is
    // advisory, never a gate.
    report.checks.push_back(
        {"token_count", ok ? CheckStatus::pass : CheckStatus::warn,
         "counted " + std::to_string(tokens) + ", declared " +
             std::to_string(spec.declared_token_count)});
  } else {
    report.checks.push_back({"token_count", CheckStatus::pass, "none declared"});
  }

  return report;
}

std::string instantiate_tqp(const PromptSpec& tqp, std::string_view tip_response_text) {
  const std::string& tmpl = tqp.text;
  const std::size_t first = tmpl.find(kTqpInsertionMarker);
  if (first == std::string::npos) {
    throw MarkerMissing("TQP template '" + tqp.id + "' has no insertion marker");
  }
  if (tmpl.find(kTqpInsertionMarker, first + kTqpInsertionMarker.size()) != std::string::npos) {
    throw MarkerDuplicated("TQP template '" + tqp.id + "' has more than one insertion marker");
  }
  std::string out;
  out.reserve(tmpl.size() + tip_response_text.size());
  out.append(tmpl, 0, first);
  out.append(tip_response_text);
  out.append(tmpl, first + kTqpInsertionMarker.size(), std::string::npos);
  return out;
}

std::string instantiate_tcp(std::string_view first_text, std::string_view second_text) {
  if (first_text.empty() || second_text.empty()) {
    throw EmptyInput("instantiate_tcp: both texts must be non-empty");
  }
  std::string out =
      "Please analyze the similarities and differences between the following two texts:\n\n";
  out += "1st: \"";
  out += first_text;
  out += "\"\n\n2nd: \"";
  out += second_text;
  out += "\"";
  return out;
}

std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::tip: return "TIP";
    case PromptKind::tqp: return "TQP";
    case PromptKind::tcp: return "TCP";
  }
  return "TIP";
}

std::string_view to_string(ToneAxis a) {
  switch (a) {
    case ToneAxis::emotional: return "emotional";
    case ToneAxis::logical: return "logical";
    case ToneAxis::control: return "control";
    case ToneAxis::mixed: return "mixed";
    case ToneAxis::dry_logical: return "dry_logical";
    case ToneAxis::none: return "none";
  }
  return "none";
}

std::string_view to_string(FusionAxis a) {
  switch (a) {
    case FusionAxis::fused: return "fused";
    case FusionAxis::non_fused: return "non_fused";
    case FusionAxis::not_applicable: return "not_applicable";
  }
  return "not_applicable";
}

std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::warn: return "warn";
    case CheckStatus::fail: return "fail";
  }
  return "pass";
}

}  // namespace phaseprobe::prompts
