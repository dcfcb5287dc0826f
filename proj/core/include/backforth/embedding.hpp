#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace backforth {

using Vec = std::vector<double>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One fixed-dimension vector per text, same order. Throws on failure or on
  /// a dimension mismatch within the batch.
  virtual std::vector<Vec> embed(const std::vector<std::string>& texts) const = 0;
  virtual std::string id() const = 0;
};

/// Deterministic test embedder: lowercased bag-of-words counts pushed through a
/// seeded random projection to 64 dimensions. Token order never matters.
class HashedBowEmbedder final : public Embedder {
 public:
  explicit HashedBowEmbedder(std::uint64_t seed = 0, std::size_t dim = 64);
  std::vector<Vec> embed(const std::vector<std::string>& texts) const override;
  std::string id() const override { return "hashed-bow"; }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Calls an embedding endpoint (POST {base_url}{path} with {"model", "input"}).
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string base_url, std::string model, std::uint32_t max_retries = 3,
                 std::string path = "/v1/embeddings");
  std::vector<Vec> embed(const std::vector<std::string>& texts) const override;
  std::string id() const override { return "remote"; }

 private:
  std::string base_url_;
  std::string model_;
  std::uint32_t max_retries_;
  std::string path_;
};

/// Throws std::invalid_argument for an unknown id.
std::shared_ptr<Embedder> make_embedder(const std::string& id, std::uint64_t seed,
                                        const std::string& remote_url = "",
                                        const std::string& remote_model = "");

/// Tokenization shared by the hashed-bow embedder and the n-gram statistics:
/// lowercase, split on Unicode whitespace, strip leading/trailing punctuation
/// from each token. Tokens reduced to nothing are dropped.
std::vector<std::string> simple_tokenize(const std::string& text);

}  // namespace backforth
