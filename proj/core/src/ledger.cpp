#include "backforth/ledger.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "backforth/config.hpp"
#include "backforth/log.hpp"

namespace backforth {

using nlohmann::json;

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& value) {
  if (value.has_value()) j[key] = *value;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

json pair_to_json(const CandidatePair& pair) {
  json j;
  j["doc_id"] = pair.doc_id;
  j["doc_source"] = pair.doc_source;
  j["token_estimate"] = pair.token_estimate;
  j["response_initial"] = pair.response_initial;
  j["status"] = to_string(pair.status);
  j["failed"] = pair.failed;
  if (!pair.failure_reason.empty()) j["failure_reason"] = pair.failure_reason;
  put_optional(j, "instruction", pair.instruction);
  put_optional(j, "score", pair.score);
  put_optional(j, "score_raw", pair.score_raw);
  put_optional(j, "response_rewritten", pair.response_rewritten);
  put_optional(j, "response_distilled", pair.response_distilled);
  return j;
}

namespace {

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

CandidatePair pair_from_json(const json& j) {
  CandidatePair pair;
  pair.doc_id = j.at("doc_id").get<std::string>();
  pair.doc_source = j.value("doc_source", std::string{});
  pair.token_estimate = j.value("token_estimate", std::uint64_t{0});
  pair.response_initial = j.at("response_initial").get<std::string>();
  pair.status = pair_status_from_string(j.at("status").get<std::string>());
  pair.failed = j.value("failed", false);
  pair.failure_reason = j.value("failure_reason", std::string{});
  pair.instruction = get_optional<std::string>(j, "instruction");
  pair.score = get_optional<int>(j, "score");
  pair.score_raw = get_optional<std::string>(j, "score_raw");
  pair.response_rewritten = get_optional<std::string>(j, "response_rewritten");
  pair.response_distilled = get_optional<std::string>(j, "response_distilled");
  return pair;
}

// --- Lock file ----------------------------------------------------------------

class Ledger::Lock {
 public:
  explicit Lock(const std::string& ledger_path) : path_(ledger_path + ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot create lock file: " + path_);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw std::runtime_error("run already in progress (lock held): " + path_);
    }
  }

  // The lock releases on close (or process death). The file itself stays; a
  // stale .lock file never blocks anyone.
  ~Lock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

  Lock(const Lock&) = delete;
  Lock& operator=(const Lock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

// --- Ledger -------------------------------------------------------------------

namespace {

struct ReplayResult {
  std::map<std::string, LedgerEntry> state;
  std::string config_hash;  // last header seen
  bool any_lines = false;
};

ReplayResult replay(const std::string& path) {
  ReplayResult result;
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) return result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    result.any_lines = true;
    json entry = json::parse(line, nullptr, false);
    if (entry.is_discarded() || !entry.is_object()) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": corrupt ledger line");
    }
    if (entry.value("type", "") == "header") {
      result.config_hash = entry.value("config_hash", "");
      continue;
    }
    LedgerEntry record;
    record.doc_id = entry.at("doc_id").get<std::string>();
    record.status = pair_status_from_string(entry.at("status").get<std::string>());
    record.payload = pair_from_json(entry.at("payload"));
    record.updated_at = entry.value("updated_at", "");
    record.attempt_count = entry.value("attempt_count", std::uint64_t{0});
    result.state[record.doc_id] = std::move(record);  // last entry wins
  }
  return result;
}

}  // namespace

Ledger Ledger::open(const std::string& path, const std::string& config_hash, bool force) {
  Ledger ledger;
  ledger.path_ = path;
  ledger.lock_ = std::make_shared<Lock>(path);

  ReplayResult replayed = replay(path);
  ledger.state_ = std::move(replayed.state);

  const bool needs_header = !replayed.any_lines || replayed.config_hash != config_hash;
  if (replayed.any_lines && replayed.config_hash != config_hash) {
    if (!force) {
      throw ConfigError("ledger " + path + " was written under a different configuration (" +
                        replayed.config_hash + " vs " + config_hash +
                        "); pass --force to resume anyway");
    }
    logging::warn("resuming ledger " + path + " across a configuration change (--force)");
  }

  ledger.out_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::app);
  if (!ledger.out_->is_open()) throw std::runtime_error("cannot open ledger for append: " + path);
  if (needs_header) {
    json header = {{"type", "header"}, {"config_hash", config_hash}, {"created_at", utc_now()}};
    *ledger.out_ << header.dump() << "\n";
    ledger.out_->flush();
  }
  return ledger;
}

std::map<std::string, LedgerEntry> Ledger::load_state(const std::string& path) {
  return replay(path).state;
}

void Ledger::append(const CandidatePair& pair) {
  LedgerEntry entry;
  entry.doc_id = pair.doc_id;
  entry.status = pair.status;
  entry.payload = pair;
  entry.updated_at = utc_now();
  const auto it = state_.find(pair.doc_id);
  entry.attempt_count = (it == state_.end() ? 0 : it->second.attempt_count) + 1;

  json j;
  j["doc_id"] = entry.doc_id;
  j["status"] = to_string(entry.status);
  j["payload"] = pair_to_json(pair);
  j["updated_at"] = entry.updated_at;
  j["attempt_count"] = entry.attempt_count;
  *out_ << j.dump() << "\n";
  out_->flush();
  if (!out_->good()) throw std::runtime_error("ledger write failed: " + path_);

  state_[entry.doc_id] = std::move(entry);
  ++appended_;
}

std::vector<CandidatePair> Ledger::pairs_sorted() const {
  std::vector<CandidatePair> pairs;
  pairs.reserve(state_.size());
  for (const auto& [doc_id, entry] : state_) pairs.push_back(entry.payload);
  return pairs;  // std::map iterates in ascending doc_id order already
}

}  // namespace backforth
