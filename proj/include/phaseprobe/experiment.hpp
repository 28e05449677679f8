#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "phaseprobe/prompts.hpp"
#include "phaseprobe/providers.hpp"
#include "phaseprobe/stats.hpp"
#include "phaseprobe/tqp_parser.hpp"

namespace phaseprobe::experiment {

enum class Metric { tone_phase, tsundere };
std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);  // throws Error

struct ExperimentManifest {
  providers::ProviderConfig subject;
  std::vector<providers::ProviderConfig> evaluators;
  std::vector<std::string> conditions;        // TIP prompt ids
  int tip_responses_per_condition = 1;        // R
  int tqp_evals_per_response = 1;             // E
  std::string tqp_id = "TQP1";
  std::filesystem::path output_dir;
  // Directory the manifest was loaded from; relative replay fixture
  // paths resolve against it.
  std::filesystem::path base_dir;

  static ExperimentManifest from_json(const nlohmann::json& j);
  static ExperimentManifest from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate(const prompts::Corpus& corpus) const;  // throws ManifestInvalid
};

// Append-only JSONL store with a manifest snapshot and a single-writer
// lock. Records carry a "kind" field: subject_session, evaluator_session
// or parsed_eval.
class RunStore {
 public:
  // Creates the directory (and manifest.json) if needed, acquires the
  // writer lock, and loads any existing records so a run can resume.
  // Throws StoreLocked when another live process holds the lock, and
  // ManifestInvalid when the store belongs to a different manifest.
  static RunStore open(const std::filesystem::path& dir, const nlohmann::json& manifest_snapshot);

  // Read-only load; tolerates a truncated trailing line.
  static std::vector<nlohmann::json> read_records(const std::filesystem::path& dir);

  RunStore(RunStore&& other) noexcept;
  RunStore& operator=(RunStore&&) = delete;
  ~RunStore();

  void append(const nlohmann::json& record);  // flushed per line
  const std::vector<nlohmann::json>& records() const { return records_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  RunStore() = default;
  std::filesystem::path dir_;
  std::filesystem::path lock_path_;
  std::unique_ptr<std::ofstream> out_;
  std::vector<nlohmann::json> records_;
  std::mutex write_mutex_;
  bool owns_lock_ = false;
};

struct BackendSet {
  std::shared_ptr<providers::ChatBackend> subject;
  std::map<std::string, std::shared_ptr<providers::ChatBackend>> evaluators;  // by provider_id
};

BackendSet make_backends(const ExperimentManifest& manifest);

struct RunTotals {
  int subject_sessions = 0;
  int evaluator_sessions = 0;
  int parsed_evaluations = 0;
  int refusals = 0;
  int transport_failures = 0;
  int skipped_existing = 0;  // records found in the store and not re-executed
  std::map<std::string, int> subject_by_condition;
  std::map<std::string, int> evaluator_by_condition;
  bool provider_exhausted() const { return transport_failures > 0; }
};

struct RunOptions {
  int workers = 1;  // >1 parallelizes evaluator sessions (store order then varies)
  // Invoked after every append; a throwing callback aborts the run,
  // which is how the resume tests interrupt mid-flight.
  std::function<void(const nlohmann::json&)> after_record;
};

// The full protocol: per condition, R fresh subject sessions; per
// response, the instantiated TQP is scored E times per evaluator in
// fresh sessions; every session and parsed result is appended to the
// store. Task identity is (condition, response_index, eval_index), fixed
// up front, so an interrupted run resumes without re-executing finished
// work. Failures are recorded, never fatal.
RunTotals run_experiment(const ExperimentManifest& manifest, const prompts::Corpus& corpus,
                         const BackendSet& backends, const RunOptions& options = {});

struct ScoredValue {
  double value = 0;
  int response_index = 0;
  int eval_index = 0;
  std::string source_record_id;  // evaluator SessionRecord this score came from
};

struct Cell {
  std::string evaluator_id;
  std::string condition;
  Metric metric = Metric::tone_phase;
  std::vector<ScoredValue> values;  // canonical order: (response_index, eval_index)
  int exclusions = 0;               // unusable evaluations for this key
  std::vector<double> numbers() const;
};

class ScoreMatrix {
 public:
  void add_value(const std::string& evaluator, const std::string& condition, Metric metric,
                 ScoredValue value);
  void add_exclusion(const std::string& evaluator, const std::string& condition, Metric metric);
  void canonicalize();  // sorts cells and values deterministically

  const Cell* find(std::string_view evaluator, std::string_view condition, Metric metric) const;
  const std::vector<Cell>& cells() const { return cells_; }
  std::vector<std::string> evaluator_ids() const;
  std::vector<std::string> conditions_for(std::string_view evaluator) const;
  bool empty() const;

 private:
  Cell& cell_for(const std::string& evaluator, const std::string& condition, Metric metric);
  std::vector<Cell> cells_;
};

ScoreMatrix aggregate(const std::vector<nlohmann::json>& records);
ScoreMatrix aggregate(const std::filesystem::path& store_dir);

struct ConditionPair {
  std::string first;
  std::string second;
};

struct Comparison {
  std::string evaluator_id;
  ConditionPair pair;
  Metric metric = Metric::tone_phase;
  stats::WelchResult result;
};

// One Welch result per pair per evaluator present in the matrix.
// Not-computable results (both samples zero-variance) propagate as
// computable=false. Throws UnknownCondition when a pair names a
// condition the evaluator has no scores for.
std::vector<Comparison> compare(const ScoreMatrix& matrix, const std::vector<ConditionPair>& pairs,
                                Metric metric,
                                stats::Direction direction = stats::Direction::absolute,
                                stats::DfMode df_mode = stats::DfMode::spreadsheet);

}  // namespace phaseprobe::experiment
