#include "backforth/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "backforth/log.hpp"

namespace backforth {

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

class WhitespaceEstimator final : public TokenEstimator {
 public:
  std::uint64_t count(const std::string& text) const override {
    std::uint64_t runs = 0;
    bool in_run = false;
    for (unsigned char c : text) {
      if (std::isspace(c)) {
        in_run = false;
      } else if (!in_run) {
        in_run = true;
        ++runs;
      }
    }
    return runs;
  }
  std::string id() const override { return "whitespace"; }
};

class Bytes4Estimator final : public TokenEstimator {
 public:
  std::uint64_t count(const std::string& text) const override {
    return (static_cast<std::uint64_t>(text.size()) + 3) / 4;
  }
  std::string id() const override { return "bytes4"; }
};

}  // namespace

// Defined in gateway.cpp next to the other HTTP plumbing.
std::uint64_t remote_token_count(const std::string& url, const std::string& text);

namespace {

class RemoteEstimator final : public TokenEstimator {
 public:
  explicit RemoteEstimator(std::string url) : url_(std::move(url)) {}
  std::uint64_t count(const std::string& text) const override {
    return remote_token_count(url_, text);
  }
  std::string id() const override { return "remote"; }

 private:
  std::string url_;
};

}  // namespace

std::shared_ptr<TokenEstimator> make_token_estimator(const std::string& id,
                                                     const std::string& remote_url) {
  if (id == "whitespace") return std::make_shared<WhitespaceEstimator>();
  if (id == "bytes4") return std::make_shared<Bytes4Estimator>();
  if (id == "remote") {
    if (remote_url.empty())
      throw std::invalid_argument("remote token estimator needs a tokenizer URL");
    return std::make_shared<RemoteEstimator>(remote_url);
  }
  throw std::invalid_argument("unknown token estimator: " + id);
}

namespace {

// Line source over a plain or gzip-compressed file.
class LineReader {
 public:
  explicit LineReader(const std::string& path) {
    if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
      gz_ = gzopen(path.c_str(), "rb");
      if (gz_ == nullptr) throw std::runtime_error("cannot open corpus file: " + path);
    } else {
      file_.open(path, std::ios::binary);
      if (!file_.is_open()) throw std::runtime_error("cannot open corpus file: " + path);
    }
  }

  ~LineReader() {
    if (gz_ != nullptr) gzclose(gz_);
  }

  bool next_line(std::string& out) {
    if (gz_ != nullptr) return next_gz_line(out);
    if (!std::getline(file_, out)) return false;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

 private:
  bool next_gz_line(std::string& out) {
    out.clear();
    char buf[4096];
    bool any = false;
    for (;;) {
      if (gzgets(gz_, buf, sizeof(buf)) == nullptr) return any;
      any = true;
      out += buf;
      if (!out.empty() && out.back() == '\n') {
        out.pop_back();
        if (!out.empty() && out.back() == '\r') out.pop_back();
        return true;
      }
      // buffer filled mid-line; keep reading
    }
  }

  std::ifstream file_;
  gzFile gz_ = nullptr;
};

std::string file_basename(const std::string& path) {
  const auto pos = path.find_last_of("/\\");
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

}  // namespace

struct DocumentStream::Impl {
  Impl(const std::string& path, std::string source_label, StreamOptions opts)
      : reader(path),
        basename(file_basename(path)),
        source(std::move(source_label)),
        options(std::move(opts)) {
    if (!options.estimator) options.estimator = make_token_estimator("bytes4");
  }

  LineReader reader;
  std::string basename;
  std::string source;
  StreamOptions options;
  IngestStats stats;
  std::uint64_t line_number = 0;
};

DocumentStream::DocumentStream(const std::string& path, const std::string& source_label,
                               StreamOptions opts)
    : impl_(std::make_unique<Impl>(path, source_label, std::move(opts))) {}

DocumentStream::~DocumentStream() = default;
DocumentStream::DocumentStream(DocumentStream&&) noexcept = default;
DocumentStream& DocumentStream::operator=(DocumentStream&&) noexcept = default;

std::optional<Document> DocumentStream::next() {
  std::string line;
  while (impl_->reader.next_line(line)) {
    ++impl_->line_number;
    if (is_blank(line)) continue;  // blank separator lines are not records

    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object() ||
        !record.contains(impl_->options.text_field) ||
        !record[impl_->options.text_field].is_string()) {
      // Malformed lines are not records: logged skips, outside the stats identity.
      const std::string msg = impl_->basename + ":" + std::to_string(impl_->line_number) +
                              ": malformed record";
      if (impl_->options.strict) throw std::runtime_error(msg);
      logging::warn(msg + " (skipped)");
      continue;
    }
    ++impl_->stats.read_count;

    std::string text = record[impl_->options.text_field].get<std::string>();
    if (is_blank(text)) {
      ++impl_->stats.dropped_empty;
      continue;
    }

    Document doc;
    doc.text = std::move(text);
    doc.source = impl_->source;
    if (record.contains(impl_->options.id_field) &&
        record[impl_->options.id_field].is_string()) {
      doc.id = record[impl_->options.id_field].get<std::string>();
    } else {
      doc.id = impl_->basename + ":" + std::to_string(impl_->line_number);
    }
    doc.token_estimate = impl_->options.estimator->count(doc.text);
    ++impl_->stats.kept_count;
    return doc;
  }
  return std::nullopt;
}

const IngestStats& DocumentStream::stats() const { return impl_->stats; }

std::vector<Document> read_all(DocumentStream& stream) {
  std::vector<Document> docs;
  while (auto doc = stream.next()) docs.push_back(std::move(*doc));
  return docs;
}

LengthFilterResult filter_by_length(const std::vector<Document>& docs,
                                    std::uint64_t max_tokens) {
  LengthFilterResult result;
  result.stats.read_count = docs.size();
  for (const Document& doc : docs) {
    if (doc.token_estimate <= max_tokens) {
      result.kept.push_back(doc);
      ++result.stats.kept_count;
    } else {
      ++result.stats.dropped_too_long;
    }
  }
  return result;
}

std::vector<Document> sample_documents(const std::vector<Document>& docs, std::size_t n,
                                       std::uint64_t seed) {
  Reservoir<std::size_t> reservoir(n, seed);
  for (std::size_t i = 0; i < docs.size(); ++i) reservoir.offer(i);
  std::vector<std::size_t> picked = reservoir.take();

  std::vector<Document> out;
  out.reserve(picked.size());
  for (std::size_t i : picked) out.push_back(docs[i]);
  std::sort(out.begin(), out.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  return out;
}

}  // namespace backforth
