#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace phaseprobe::prompts {

enum class PromptKind { tip, tqp, tcp };
enum class ToneAxis { emotional, logical, control, mixed, dry_logical, none };
enum class FusionAxis { fused, non_fused, not_applicable };

struct PromptSpec {
  std::string id;
  PromptKind kind = PromptKind::tip;
  ToneAxis tone_axis = ToneAxis::none;
  FusionAxis fusion_axis = FusionAxis::not_applicable;
  std::string text;
  // Declared counts are documentation from the prompt headers; 0 means
  // "not declared". They are checked by validate_prompt, never enforced
  // at load time.
  int declared_token_count = 0;
  int declared_sentence_count = 0;
};

// Defined in corpus_data.cpp: the 7 built-in stimulus prompts plus the
// evaluation and comparison templates, byte-stable.
const std::vector<PromptSpec>& builtin_prompt_specs();

class Corpus {
 public:
  explicit Corpus(std::vector<PromptSpec> specs);  // throws Error on duplicate ids
  static Corpus builtin();

  const PromptSpec* find(std::string_view id) const;
  const PromptSpec& at(std::string_view id) const;  // throws UnknownPrompt
  const std::vector<PromptSpec>& all() const { return specs_; }

  // Writes one UTF-8 `<id>.txt` per prompt (LF endings, trailing newline).
  void export_to_dir(const std::filesystem::path& dir) const;

 private:
  std::vector<PromptSpec> specs_;
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

// Default counter: whitespace-delimited words. The paper-declared counts
// come from a subword tokenizer, so mismatches against this counter are
// reported as warnings, not failures.
std::size_t whitespace_token_count(std::string_view text);

// Sentences = runs of '.', '!', '?' outside double quotes (straight or
// typographic). Em-dashes and other punctuation do not terminate.
std::size_t sentence_count(std::string_view text);

enum class CheckStatus { pass, warn, fail };

struct ValidationCheck {
  std::string name;
  CheckStatus status = CheckStatus::pass;
  std::string detail;
};

struct ValidationReport {
  std::string prompt_id;
  std::vector<ValidationCheck> checks;
  bool passed() const;      // no fail entries
  bool has_warnings() const;
};

ValidationReport validate_prompt(const PromptSpec& spec,
                                 const TokenCounter& counter = whitespace_token_count);

inline constexpr std::string_view kTqpInsertionMarker =
    "%% A LLM response to TIP is inserted here";

// Replaces the insertion marker with the subject response, all other
// bytes unchanged. Throws MarkerMissing / MarkerDuplicated.
std::string instantiate_tqp(const PromptSpec& tqp, std::string_view tip_response_text);

// Builds the two-text comparison prompt. With the built-in TIPe and
// TIPn-e texts this reproduces the built-in TCP1 byte for byte.
// Throws EmptyInput.
std::string instantiate_tcp(std::string_view first_text, std::string_view second_text);

std::string_view to_string(PromptKind k);
std::string_view to_string(ToneAxis a);
std::string_view to_string(FusionAxis a);
std::string_view to_string(CheckStatus s);

}  // namespace phaseprobe::prompts
