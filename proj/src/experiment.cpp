#include "phaseprobe/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <set>
#include <thread>

#include <sys/types.h>
#include <unistd.h>

#include "phaseprobe/errors.hpp"
#include "phaseprobe/util.hpp"

namespace phaseprobe::experiment {

namespace {

constexpr std::string_view kRunFile = "run.jsonl";
constexpr std::string_view kManifestFile = "manifest.json";
constexpr std::string_view kLockFile = ".lock";

std::string evaluator_prompt_id(const std::string& tqp_id, const std::string& condition,
                                int response_index) {
  // Doubles as the replay fixture subpath: <tqp>/<condition>/r<k>/<eval>.txt
  return tqp_id + "/" + condition + "/r" + std::to_string(response_index);
}

bool pid_alive(long pid) {
  if (pid <= 0) return false;
  return ::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM;
}

}  // namespace

std::string_view to_string(Metric m) {
  return m == Metric::tone_phase ? "tone_phase" : "tsundere";
}

Metric metric_from_string(std::string_view s) {
  if (s == "tone_phase") return Metric::tone_phase;
  if (s == "tsundere") return Metric::tsundere;
  throw Error("unknown metric: " + std::string(s) + " (expected tone_phase or tsundere)");
}

ExperimentManifest ExperimentManifest::from_json(const nlohmann::json& j) {
  ExperimentManifest m;
  try {
    m.subject = providers::ProviderConfig::from_json(j.at("subject"));
    for (const auto& e : j.at("evaluators")) {
      m.evaluators.push_back(providers::ProviderConfig::from_json(e));
    }
    m.conditions = j.at("conditions").get<std::vector<std::string>>();
    m.tip_responses_per_condition = j.at("tip_responses_per_condition").get<int>();
    m.tqp_evals_per_response = j.at("tqp_evals_per_response").get<int>();
    m.tqp_id = j.value("tqp_id", std::string("TQP1"));
    m.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ManifestInvalid(std::string("manifest malformed: ") + e.what());
  }
  return m;
}

ExperimentManifest ExperimentManifest::from_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ManifestInvalid("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  ExperimentManifest m = from_json(j);
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return m;
}

nlohmann::json ExperimentManifest::to_json() const {
  nlohmann::json j;
  j["subject"] = subject.to_json();
  auto evs = nlohmann::json::array();
  for (const auto& e : evaluators) evs.push_back(e.to_json());
  j["evaluators"] = std::move(evs);
  j["conditions"] = conditions;
  j["tip_responses_per_condition"] = tip_responses_per_condition;
  j["tqp_evals_per_response"] = tqp_evals_per_response;
  j["tqp_id"] = tqp_id;
  j["output_dir"] = output_dir.string();
  return j;
}

void ExperimentManifest::validate(const prompts::Corpus& corpus) const {
  subject.validate();
  if (evaluators.empty()) throw ManifestInvalid("at least one evaluator is required");
  std::set<std::string> ids{subject.provider_id};
  for (const auto& e : evaluators) {
    e.validate();
    if (!ids.insert(e.provider_id).second) {
      throw ManifestInvalid("duplicate provider_id: " + e.provider_id);
    }
  }
  if (conditions.empty()) throw ManifestInvalid("conditions must be non-empty");
  for (const auto& c : conditions) {
    const prompts::PromptSpec* spec = corpus.find(c);
    if (!spec) throw ManifestInvalid("condition does not resolve in the corpus: " + c);
    if (spec->kind != prompts::PromptKind::tip) {
      throw ManifestInvalid("condition is not a TIP: " + c);
    }
  }
  if (tip_responses_per_condition < 1) throw ManifestInvalid("tip_responses_per_condition must be >= 1");
  if (tqp_evals_per_response < 1) throw ManifestInvalid("tqp_evals_per_response must be >= 1");
  const prompts::PromptSpec* tqp = corpus.find(tqp_id);
  if (!tqp || tqp->kind != prompts::PromptKind::tqp) {
    throw ManifestInvalid("tqp_id does not name a TQP prompt: " + tqp_id);
  }
  if (output_dir.empty()) throw ManifestInvalid("output_dir must be non-empty");
}

RunStore RunStore::open(const std::filesystem::path& dir, const nlohmann::json& manifest_snapshot) {
  std::filesystem::create_directories(dir);

  RunStore store;
  store.dir_ = dir;
  store.lock_path_ = dir / kLockFile;

  // Single-writer lock with stale-lock recovery: a lock whose pid is no
  // longer alive is left over from a killed run and may be broken.
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::error_code ec;
    if (std::filesystem::exists(store.lock_path_, ec)) {
      long pid = 0;
      try {
        pid = std::stol(util::read_file(store.lock_path_));
      } catch (...) {
        pid = 0;
      }
      if (pid_alive(pid) && pid != static_cast<long>(::getpid())) {
        throw StoreLocked("run store " + dir.string() + " is locked by pid " +
                          std::to_string(pid));
      }
      std::filesystem::remove(store.lock_path_, ec);
    }
    std::ofstream lock(store.lock_path_, std::ios::binary | std::ios::trunc);
    if (lock) {
      lock << ::getpid() << "\n";
      store.owns_lock_ = true;
      break;
    }
  }
  if (!store.owns_lock_) throw StoreLocked("cannot create lock file in " + dir.string());

  const std::filesystem::path manifest_path = dir / kManifestFile;
  if (std::filesystem::exists(manifest_path)) {
    const nlohmann::json existing = nlohmann::json::parse(util::read_file(manifest_path));
    if (existing != manifest_snapshot) {
      std::filesystem::remove(store.lock_path_);
      store.owns_lock_ = false;
      throw ManifestInvalid("store " + dir.string() + " was created with a different manifest");
    }
  } else {
    util::write_file(manifest_path, manifest_snapshot.dump(2) + "\n");
  }

  store.records_ = read_records(dir);
  store.out_ = std::make_unique<std::ofstream>(dir / kRunFile, std::ios::binary | std::ios::app);
  if (!*store.out_) {
    throw Error("cannot open run store for append: " + (dir / kRunFile).string());
  }
  return store;
}

std::vector<nlohmann::json> RunStore::read_records(const std::filesystem::path& dir) {
  std::vector<nlohmann::json> records;
  const std::filesystem::path path = dir / kRunFile;
  if (!std::filesystem::exists(path)) return records;
  std::ifstream in(path, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception&) {
      // A truncated trailing line is expected after a crash; the task it
      // belonged to simply re-executes.
      break;
    }
  }
  return records;
}

RunStore::RunStore(RunStore&& other) noexcept
    : dir_(std::move(other.dir_)),
      lock_path_(std::move(other.lock_path_)),
      out_(std::move(other.out_)),
      records_(std::move(other.records_)),
      owns_lock_(other.owns_lock_) {
  other.owns_lock_ = false;
}

RunStore::~RunStore() {
  if (owns_lock_) {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
  }
}

void RunStore::append(const nlohmann::json& record) {
  std::lock_guard lock(write_mutex_);
  *out_ << record.dump() << '\n';
  out_->flush();
  records_.push_back(record);
}

BackendSet make_backends(const ExperimentManifest& manifest) {
  BackendSet set;
  set.subject = providers::make_backend(manifest.subject, manifest.base_dir);
  for (const auto& cfg : manifest.evaluators) {
    set.evaluators[cfg.provider_id] = providers::make_backend(cfg, manifest.base_dir);
  }
  return set;
}

namespace {

struct TaskKey {
  std::string evaluator;  // empty for subject tasks
  std::string condition;
  int response_index;
  int eval_index;  // 0 for subject tasks

  bool operator<(const TaskKey& other) const {
    return std::tie(evaluator, condition, response_index, eval_index) <
           std::tie(other.evaluator, other.condition, other.response_index, other.eval_index);
  }
};

nlohmann::json session_to_record(const providers::SessionRecord& rec, std::string_view kind,
                                 const std::string& condition, int response_index) {
  nlohmann::json j = rec.to_json();
  j["kind"] = std::string(kind);
  j["condition"] = condition;
  j["response_index"] = response_index;
  return j;
}

nlohmann::json parsed_record(const std::string& evaluator_id, const std::string& condition,
                             int response_index, int eval_index,
                             const std::string& source_record_id, const std::string& error,
                             const std::optional<tqp::TqpEvaluation>& eval,
                             const std::vector<tqp::Warning>& warnings) {
  nlohmann::json j;
  j["kind"] = "parsed_eval";
  j["record_id"] = "parsed/" + source_record_id;
  j["evaluator_id"] = evaluator_id;
  j["condition"] = condition;
  j["response_index"] = response_index;
  j["eval_index"] = eval_index;
  j["source_record_id"] = source_record_id;
  j["usable"] = eval.has_value();
  j["error"] = error;
  auto warning_codes = nlohmann::json::array();
  for (const auto& w : warnings) {
    warning_codes.push_back(std::string(tqp::to_string(w.code)) + ": " + w.message);
  }
  j["warnings"] = std::move(warning_codes);
  j["evaluation"] = eval ? tqp::to_json(*eval) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

RunTotals run_experiment(const ExperimentManifest& manifest, const prompts::Corpus& corpus,
                         const BackendSet& backends, const RunOptions& options) {
  manifest.validate(corpus);

  RunStore store = RunStore::open(manifest.output_dir, manifest.to_json());
  RunTotals totals;

  // Index what a previous (interrupted) run already completed.
  std::map<TaskKey, providers::SessionRecord> done_subject;
  std::map<TaskKey, providers::SessionRecord> done_eval;
  std::set<TaskKey> done_parsed;
  for (const auto& rec : store.records()) {
    const std::string kind = rec.value("kind", "");
    const std::string condition = rec.value("condition", "");
    const int response_index = rec.value("response_index", 0);
    if (kind == "subject_session") {
      done_subject[{"", condition, response_index, 0}] = providers::SessionRecord::from_json(rec);
    } else if (kind == "evaluator_session") {
      done_eval[{rec.value("provider_id", ""), condition, response_index,
                 rec.value("trial_index", 0)}] = providers::SessionRecord::from_json(rec);
    } else if (kind == "parsed_eval") {
      done_parsed.insert({rec.value("evaluator_id", ""), condition, response_index,
                          rec.value("eval_index", 0)});
    }
  }
  totals.skipped_existing = static_cast<int>(done_subject.size() + done_eval.size());

  // All limiters exist before any worker thread starts; workers only read.
  std::map<std::string, std::unique_ptr<providers::RateLimiter>> limiters;
  limiters.emplace(manifest.subject.provider_id,
                   std::make_unique<providers::RateLimiter>(manifest.subject.rate_limit));
  for (const auto& cfg : manifest.evaluators) {
    limiters.emplace(cfg.provider_id, std::make_unique<providers::RateLimiter>(cfg.rate_limit));
  }
  auto limiter_for = [&](const providers::ProviderConfig& cfg) {
    return limiters.at(cfg.provider_id).get();
  };

  auto note_outcome = [&](const providers::SessionRecord& rec) {
    if (rec.outcome == providers::Outcome::refusal) ++totals.refusals;
    if (rec.outcome == providers::Outcome::transport_error) ++totals.transport_failures;
  };

  const prompts::PromptSpec& tqp_spec = corpus.at(manifest.tqp_id);
  const int responses = manifest.tip_responses_per_condition;
  const int evals = manifest.tqp_evals_per_response;

  for (const std::string& condition : manifest.conditions) {
    const prompts::PromptSpec& tip = corpus.at(condition);

    for (int r = 1; r <= responses; ++r) {
      const TaskKey subject_key{"", condition, r, 0};
      providers::SessionRecord subject_rec;
      if (auto it = done_subject.find(subject_key); it != done_subject.end()) {
        subject_rec = it->second;
      } else {
        providers::SessionHooks hooks;
        hooks.limiter = limiter_for(manifest.subject);
        subject_rec = providers::complete_disposable(manifest.subject, *backends.subject, tip.text,
                                                     condition, r, hooks);
        note_outcome(subject_rec);
        const nlohmann::json j = session_to_record(subject_rec, "subject_session", condition, r);
        store.append(j);
        if (options.after_record) options.after_record(j);
        ++totals.subject_sessions;
      }

      if (subject_rec.outcome != providers::Outcome::ok) continue;
      const std::string tqp_text = prompts::instantiate_tqp(tqp_spec, subject_rec.response_text);
      const std::string prompt_id = evaluator_prompt_id(manifest.tqp_id, condition, r);

      for (const auto& evaluator_cfg : manifest.evaluators) {
        auto backend_it = backends.evaluators.find(evaluator_cfg.provider_id);
        if (backend_it == backends.evaluators.end()) {
          throw ManifestInvalid("no backend supplied for evaluator " + evaluator_cfg.provider_id);
        }
        providers::ChatBackend& backend = *backend_it->second;

        // One task per (evaluator, response, eval_index); independent
        // tasks may run on worker threads, admission gated per provider.
        std::vector<int> pending;
        for (int e = 1; e <= evals; ++e) pending.push_back(e);

        std::mutex eval_mutex;
        std::exception_ptr failure;
        std::atomic<std::size_t> next{0};

        auto eval_worker = [&]() {
          for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= pending.size()) return;
            const int e = pending[idx];
            try {
              const TaskKey eval_key{evaluator_cfg.provider_id, condition, r, e};
              providers::SessionRecord eval_rec;
              bool fresh = false;
              {
                std::lock_guard lk(eval_mutex);
                if (auto it = done_eval.find(eval_key); it != done_eval.end()) {
                  eval_rec = it->second;
                }
              }
              if (eval_rec.record_id.empty()) {
                providers::SessionHooks hooks;
                hooks.limiter = limiter_for(evaluator_cfg);
                eval_rec = providers::complete_disposable(evaluator_cfg, backend, tqp_text,
                                                          prompt_id, e, hooks);
                fresh = true;
              }
              nlohmann::json parsed;
              bool have_parsed = false;
              {
                std::lock_guard lk(eval_mutex);
                if (!done_parsed.count(eval_key)) {
                  have_parsed = true;
                  if (eval_rec.outcome == providers::Outcome::ok) {
                    const tqp::ParseResult pr = tqp::parse_evaluation(eval_rec.response_text);
                    std::vector<tqp::Warning> warnings = pr.diagnostics.warnings;
                    if (pr.evaluation) {
                      const auto extra = tqp::check_band_consistency(*pr.evaluation);
                      warnings.insert(warnings.end(), extra.begin(), extra.end());
                    }
                    parsed = parsed_record(
                        evaluator_cfg.provider_id, condition, r, e, eval_rec.record_id,
                        pr.usable() ? "" : std::string(tqp::to_string(pr.error)), pr.evaluation,
                        warnings);
                  } else {
                    parsed = parsed_record(evaluator_cfg.provider_id, condition, r, e,
                                           eval_rec.record_id,
                                           std::string(providers::to_string(eval_rec.outcome)),
                                           std::nullopt, {});
                  }
                }
              }
              if (fresh) {
                const nlohmann::json j =
                    session_to_record(eval_rec, "evaluator_session", condition, r);
                store.append(j);
                if (options.after_record) options.after_record(j);
                std::lock_guard lk(eval_mutex);
                note_outcome(eval_rec);
                ++totals.evaluator_sessions;
              }
              if (have_parsed) {
                store.append(parsed);
                if (options.after_record) options.after_record(parsed);
                std::lock_guard lk(eval_mutex);
                ++totals.parsed_evaluations;
              }
            } catch (...) {
              std::lock_guard lk(eval_mutex);
              if (!failure) failure = std::current_exception();
              next.store(pending.size());
              return;
            }
          }
        };

        const int workers = std::max(1, options.workers);
        if (workers == 1) {
          eval_worker();
        } else {
          std::vector<std::thread> pool;
          const int n = std::min<int>(workers, static_cast<int>(pending.size()));
          pool.reserve(static_cast<std::size_t>(n));
          for (int w = 0; w < n; ++w) pool.emplace_back(eval_worker);
          for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);
      }
    }
  }

  return totals;
}

std::vector<double> Cell::numbers() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.value);
  return out;
}

Cell& ScoreMatrix::cell_for(const std::string& evaluator, const std::string& condition,
                            Metric metric) {
  for (auto& c : cells_) {
    if (c.evaluator_id == evaluator && c.condition == condition && c.metric == metric) return c;
  }
  cells_.push_back({evaluator, condition, metric, {}, 0});
  return cells_.back();
}

void ScoreMatrix::add_value(const std::string& evaluator, const std::string& condition,
                            Metric metric, ScoredValue value) {
  cell_for(evaluator, condition, metric).values.push_back(std::move(value));
}

void ScoreMatrix::add_exclusion(const std::string& evaluator, const std::string& condition,
                                Metric metric) {
  ++cell_for(evaluator, condition, metric).exclusions;
}

void ScoreMatrix::canonicalize() {
  for (auto& c : cells_) {
    std::sort(c.values.begin(), c.values.end(), [](const ScoredValue& a, const ScoredValue& b) {
      return std::tie(a.response_index, a.eval_index) < std::tie(b.response_index, b.eval_index);
    });
  }
  std::sort(cells_.begin(), cells_.end(), [](const Cell& a, const Cell& b) {
    return std::tie(a.evaluator_id, a.condition, a.metric) <
           std::tie(b.evaluator_id, b.condition, b.metric);
  });
}

const Cell* ScoreMatrix::find(std::string_view evaluator, std::string_view condition,
                              Metric metric) const {
  for (const auto& c : cells_) {
    if (c.evaluator_id == evaluator && c.condition == condition && c.metric == metric) return &c;
  }
  return nullptr;
}

std::vector<std::string> ScoreMatrix::evaluator_ids() const {
  std::vector<std::string> ids;
  for (const auto& c : cells_) {
    if (std::find(ids.begin(), ids.end(), c.evaluator_id) == ids.end()) {
      ids.push_back(c.evaluator_id);
    }
  }
  return ids;
}

std::vector<std::string> ScoreMatrix::conditions_for(std::string_view evaluator) const {
  std::vector<std::string> out;
  for (const auto& c : cells_) {
    if (c.evaluator_id == evaluator &&
        std::find(out.begin(), out.end(), c.condition) == out.end()) {
      out.push_back(c.condition);
    }
  }
  return out;
}

bool ScoreMatrix::empty() const {
  for (const auto& c : cells_) {
    if (!c.values.empty()) return false;
  }
  return true;
}

ScoreMatrix aggregate(const std::vector<nlohmann::json>& records) {
  ScoreMatrix matrix;
  for (const auto& rec : records) {
    if (rec.value("kind", "") != "parsed_eval") continue;
    const std::string evaluator = rec.value("evaluator_id", "");
    const std::string condition = rec.value("condition", "");
    const int response_index = rec.value("response_index", 0);
    const int eval_index = rec.value("eval_index", 0);
    if (!rec.value("usable", false)) {
      matrix.add_exclusion(evaluator, condition, Metric::tone_phase);
      matrix.add_exclusion(evaluator, condition, Metric::tsundere);
      continue;
    }
    const tqp::TqpEvaluation eval = tqp::evaluation_from_json(rec.at("evaluation"));
    const std::string source = rec.value("source_record_id", "");
    matrix.add_value(evaluator, condition, Metric::tone_phase,
                     {eval.tone_phase_score, response_index, eval_index, source});
    matrix.add_value(evaluator, condition, Metric::tsundere,
                     {eval.tsundere_score, response_index, eval_index, source});
  }
  matrix.canonicalize();
  return matrix;
}

ScoreMatrix aggregate(const std::filesystem::path& store_dir) {
  return aggregate(RunStore::read_records(store_dir));
}

std::vector<Comparison> compare(const ScoreMatrix& matrix, const std::vector<ConditionPair>& pairs,
                                Metric metric, stats::Direction direction,
                                stats::DfMode df_mode) {
  std::vector<Comparison> out;
  for (const std::string& evaluator : matrix.evaluator_ids()) {
    for (const ConditionPair& pair : pairs) {
      const Cell* a = matrix.find(evaluator, pair.first, metric);
      const Cell* b = matrix.find(evaluator, pair.second, metric);
      if (!a || a->values.empty()) {
        throw UnknownCondition("evaluator " + evaluator + " has no scores for condition " +
                               pair.first);
      }
      if (!b || b->values.empty()) {
        throw UnknownCondition("evaluator " + evaluator + " has no scores for condition " +
                               pair.second);
      }
      Comparison c;
      c.evaluator_id = evaluator;
      c.pair = pair;
      c.metric = metric;
      c.result = stats::welch_one_tailed(a->numbers(), b->numbers(), direction, df_mode);
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace phaseprobe::experiment
