#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace backforth {

/// One web-corpus text candidate: the raw material a response is drawn from.
struct Document {
  std::string id;               // stable: "<source file>:<line>" when absent from the record
  std::string text;             // non-empty after trimming
  std::string source;           // corpus name / split label
  std::uint64_t token_estimate = 0;
};

struct IngestStats {
  std::uint64_t read_count = 0;
  std::uint64_t kept_count = 0;
  std::uint64_t dropped_too_long = 0;
  std::uint64_t dropped_empty = 0;
};

/// Token estimators. "whitespace" counts maximal non-whitespace runs,
/// "bytes4" is ceil(byte_length / 4), "remote" asks a tokenizer endpoint
/// (POST {"text": ...} -> {"count": n}).
class TokenEstimator {
 public:
  virtual ~TokenEstimator() = default;
  virtual std::uint64_t count(const std::string& text) const = 0;
  virtual std::string id() const = 0;
};

/// Throws std::invalid_argument for an unknown id; "remote" requires a URL.
std::shared_ptr<TokenEstimator> make_token_estimator(const std::string& id,
                                                     const std::string& remote_url = "");

struct StreamOptions {
  std::string text_field = "text";
  std::string id_field = "id";
  bool strict = false;  // malformed record line: strict -> fatal, lenient -> logged skip
  std::shared_ptr<TokenEstimator> estimator;
};

/// Lazy reader over a line-delimited JSON record file, plain or gzip (.gz).
/// Yields one Document per well-formed record, in file order. Records with
/// empty/whitespace-only text are skipped and counted in stats().
class DocumentStream {
 public:
  DocumentStream(const std::string& path, const std::string& source_label, StreamOptions opts);
  ~DocumentStream();
  DocumentStream(DocumentStream&&) noexcept;
  DocumentStream& operator=(DocumentStream&&) noexcept;
  DocumentStream(const DocumentStream&) = delete;
  DocumentStream& operator=(const DocumentStream&) = delete;

  std::optional<Document> next();
  const IngestStats& stats() const;  // read/kept/dropped_empty so far

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<Document> read_all(DocumentStream& stream);

struct LengthFilterResult {
  std::vector<Document> kept;
  IngestStats stats;  // read_count = |input|, kept + dropped_too_long = read_count
};

/// Keeps exactly the documents with token_estimate <= max_tokens, order preserved.
LengthFilterResult filter_by_length(const std::vector<Document>& docs, std::uint64_t max_tokens);

namespace detail {

/// Unbiased uniform draw in [0, range) from raw engine output. Stable across
/// platforms, unlike std::uniform_int_distribution.
inline std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t range) {
  const std::uint64_t threshold = (0 - range) % range;  // 2^64 mod range
  for (;;) {
    const std::uint64_t v = rng();
    if (v >= threshold) return v % range;
  }
}

}  // namespace detail

/// Single-pass reservoir sampler (Algorithm R) over items offered one at a time.
/// After offering N items, each is retained with probability capacity/N.
template <typename T>
class Reservoir {
 public:
  Reservoir(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

  void offer(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      const std::uint64_t j = detail::bounded_uniform(rng_, seen_ + 1);
      if (j < capacity_) items_[static_cast<std::size_t>(j)] = std::move(item);
    }
    ++seen_;
  }

  std::uint64_t seen() const { return seen_; }
  std::vector<T> take() { return std::move(items_); }

 private:
  std::size_t capacity_;
  std::mt19937_64 rng_;
  std::uint64_t seen_ = 0;
  std::vector<T> items_;
};

/// Uniform sample of n documents without replacement; returns all documents when
/// there are at most n. Output is sorted by ascending id. Identical
/// (input, n, seed) gives identical output.
std::vector<Document> sample_documents(const std::vector<Document>& docs, std::size_t n,
                                       std::uint64_t seed);

}  // namespace backforth
