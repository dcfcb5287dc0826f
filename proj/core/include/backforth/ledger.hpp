#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "backforth/stages.hpp"

namespace backforth {

nlohmann::json pair_to_json(const CandidatePair& pair);
CandidatePair pair_from_json(const nlohmann::json& j);

struct LedgerEntry {
  std::string doc_id;
  PairStatus status = PairStatus::ingested;
  CandidatePair payload;
  std::string updated_at;
  std::uint64_t attempt_count = 0;
};

/// Append-only line-delimited JSON checkpoint log: one live entry per doc_id,
/// last entry wins. A flock-based advisory lock file allows one writer per
/// ledger; the lock dies with the process, so a killed run can always resume.
class Ledger {
 public:
  /// Opens (creating if needed) and replays the log. A non-empty ledger whose
  /// recorded config hash differs is refused unless force is set, in which
  /// case a new header is appended.
  static Ledger open(const std::string& path, const std::string& config_hash, bool force = false);

  /// Read-only replay, no lock taken. For status reporting.
  static std::map<std::string, LedgerEntry> load_state(const std::string& path);

  Ledger(Ledger&&) noexcept = default;
  Ledger& operator=(Ledger&&) noexcept = default;

  /// Writes one entry (attempt_count = previous + 1) and flushes.
  void append(const CandidatePair& pair);

  const std::map<std::string, LedgerEntry>& state() const { return state_; }
  bool empty() const { return state_.empty(); }
  std::vector<CandidatePair> pairs_sorted() const;
  std::uint64_t appends_this_session() const { return appended_; }
  const std::string& path() const { return path_; }

 private:
  Ledger() = default;

  class Lock;
  std::string path_;
  std::shared_ptr<Lock> lock_;
  std::unique_ptr<std::ofstream> out_;
  std::map<std::string, LedgerEntry> state_;
  std::uint64_t appended_ = 0;
};

}  // namespace backforth
