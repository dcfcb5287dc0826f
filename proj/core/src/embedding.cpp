#include "backforth/embedding.hpp"

#include <chrono>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace backforth {

namespace {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x0085: case 0x00A0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// Minimal UTF-8 decode; invalid bytes pass through as single code units.
char32_t decode_utf8(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return b0;
  }
  if (i + len > s.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string strip_edge_punct(const std::string& token) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && is_ascii_punct(token[begin])) ++begin;
  while (end > begin && is_ascii_punct(token[end - 1])) --end;
  return token.substr(begin, end - begin);
}

}  // namespace

std::vector<std::string> simple_tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  const auto flush = [&] {
    if (current.empty()) return;
    std::string token = strip_edge_punct(current);
    current.clear();
    if (!token.empty()) tokens.push_back(std::move(token));
  };
  while (i < text.size()) {
    const char32_t cp = decode_utf8(text, i);
    if (is_unicode_space(cp)) {
      flush();
    } else if (cp < 0x80) {
      current.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(static_cast<char>(cp)))));
    } else {
      append_utf8(current, cp);  // non-ASCII passes through uncased
    }
  }
  flush();
  return tokens;
}

// --- Hashed bag-of-words -------------------------------------------------------

HashedBowEmbedder::HashedBowEmbedder(std::uint64_t seed, std::size_t dim)
    : seed_(seed), dim_(dim) {}

std::vector<Vec> HashedBowEmbedder::embed(const std::vector<std::string>& texts) const {
  std::vector<Vec> out;
  out.reserve(texts.size());
  std::unordered_map<std::string, Vec> projections;

  for (const std::string& text : texts) {
    Vec acc(dim_, 0.0);
    const std::vector<std::string> tokens = simple_tokenize(text);
    for (const std::string& token : tokens) {
      auto it = projections.find(token);
      if (it == projections.end()) {
        Vec row(dim_);
        std::uint64_t state = fnv1a64(token) ^ (seed_ * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
        for (double& v : row) {
          v = static_cast<double>(splitmix64(state) >> 11) *
                  (2.0 / 9007199254740992.0) -
              1.0;
        }
        it = projections.emplace(token, std::move(row)).first;
      }
      const Vec& row = it->second;
      for (std::size_t d = 0; d < dim_; ++d) acc[d] += row[d];
    }
    if (!tokens.empty()) {
      for (double& v : acc) v /= static_cast<double>(tokens.size());
    }
    out.push_back(std::move(acc));
  }
  return out;
}

// --- Remote embedder -----------------------------------------------------------

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::string model,
                               std::uint32_t max_retries, std::string path)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      max_retries_(max_retries),
      path_(std::move(path)) {}

std::vector<Vec> RemoteEmbedder::embed(const std::vector<std::string>& texts) const {
  using nlohmann::json;
  const json payload = {{"model", model_}, {"input", texts}};
  const std::string body = payload.dump();

  std::string last_error;
  for (std::uint32_t attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(250u * attempt));
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status >= 400 && res->status < 500) break;
      continue;
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("data") || !doc["data"].is_array() ||
        doc["data"].size() != texts.size()) {
      last_error = "unreadable embedding response";
      continue;
    }
    std::vector<Vec> out;
    out.reserve(texts.size());
    std::size_t dim = 0;
    for (const json& item : doc["data"]) {
      Vec v = item.at("embedding").get<Vec>();
      if (dim == 0) dim = v.size();
      if (v.size() != dim || dim == 0) {
        throw std::runtime_error("embedding dimension mismatch within batch");
      }
      out.push_back(std::move(v));
    }
    return out;
  }
  throw std::runtime_error("embedding endpoint failed: " + last_error);
}

std::shared_ptr<Embedder> make_embedder(const std::string& id, std::uint64_t seed,
                                        const std::string& remote_url,
                                        const std::string& remote_model) {
  if (id == "hashed-bow") return std::make_shared<HashedBowEmbedder>(seed);
  if (id == "remote") {
    if (remote_url.empty()) throw std::invalid_argument("remote embedder needs a URL");
    return std::make_shared<RemoteEmbedder>(remote_url, remote_model);
  }
  throw std::invalid_argument("unknown embedder: " + id);
}

}  // namespace backforth
