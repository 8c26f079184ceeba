#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/text.hpp"

namespace offlang {

struct Feature {
  std::uint32_t index;
  float value;
};

using FeatureVector = std::vector<Feature>;  // sorted by index, indices unique

/// Turns text into a fixed-dimension feature vector for the classification
/// head. Implementations must be pure and thread-safe.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t dim() const = 0;
  virtual FeatureVector encode(std::string_view text) const = 0;
  /// Identity string recorded in checkpoints so a reload can detect that the
  /// encoder behind a backbone name changed.
  virtual std::string id() const = 0;
};

/// Hashed bag-of-tokens encoder backing the tiny-test backbone: token counts
/// scattered into a fixed hash space. No weights, fully deterministic.
class HashedBagEncoder final : public Encoder {
 public:
  explicit HashedBagEncoder(int max_tokens, std::size_t dim = 1u << 15)
      : max_tokens_(max_tokens), dim_(dim) {}

  std::size_t dim() const override { return dim_; }

  FeatureVector encode(std::string_view text) const override {
    std::map<std::uint32_t, float> counts;
    int used = 0;
    for (std::string_view token : tokenize(text)) {
      if (used++ >= max_tokens_) break;
      counts[static_cast<std::uint32_t>(fnv1a64(token) % dim_)] += 1.0f;
    }
    FeatureVector features;
    features.reserve(counts.size());
    for (const auto& [index, value] : counts) features.push_back({index, value});
    return features;
  }

  std::string id() const override {
    return "hashed-bag/" + std::to_string(dim_) + "/" + std::to_string(max_tokens_);
  }

 private:
  int max_tokens_;
  std::size_t dim_;
};

/// Adapter for pretrained encoders supplied as a token-embedding table
/// (word2vec text format: optional "count dim" header, then one
/// "token v1 .. vd" line per token). Texts are encoded as the mean of their
/// token embeddings; unknown tokens are skipped.
class EmbeddingTableEncoder final : public Encoder {
 public:
  static std::shared_ptr<EmbeddingTableEncoder> load(const std::filesystem::path& path,
                                                     int max_tokens) {
    std::ifstream in(path);
    if (!in) {
      raise(ErrorCode::WeightsUnavailable, "cannot open weights file '" + path.string() + "'");
    }
    auto encoder = std::shared_ptr<EmbeddingTableEncoder>(new EmbeddingTableEncoder(max_tokens));
    std::string line;
    std::size_t line_no = 0;
    HashWriter content_hash;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      std::istringstream row(line);
      std::string token;
      row >> token;
      std::vector<float> values;
      double v;
      while (row >> v) values.push_back(static_cast<float>(v));
      if (line_no == 1 && values.size() == 1 && token.find_first_not_of("0123456789") ==
                                                    std::string::npos) {
        continue;  // "count dim" header
      }
      if (values.empty()) {
        raise(ErrorCode::WeightsUnavailable,
              path.string() + " line " + std::to_string(line_no) + ": no embedding values");
      }
      if (encoder->dim_ == 0) encoder->dim_ = values.size();
      if (values.size() != encoder->dim_) {
        raise(ErrorCode::WeightsUnavailable,
              path.string() + " line " + std::to_string(line_no) + ": inconsistent dimension");
      }
      content_hash.write(token);
      for (float f : values) content_hash.write(static_cast<double>(f));
      encoder->table_.emplace(std::move(token), std::move(values));
    }
    if (encoder->table_.empty()) {
      raise(ErrorCode::WeightsUnavailable, path.string() + ": empty embedding table");
    }
    encoder->content_id_ = to_hex16(content_hash.finish());
    return encoder;
  }

  std::size_t dim() const override { return dim_; }

  FeatureVector encode(std::string_view text) const override {
    std::vector<double> sum(dim_, 0.0);
    int used = 0;
    int hits = 0;
    for (std::string_view token : tokenize(text)) {
      if (used++ >= max_tokens_) break;
      auto it = table_.find(std::string(token));
      if (it == table_.end()) continue;
      ++hits;
      for (std::size_t d = 0; d < dim_; ++d) sum[d] += it->second[d];
    }
    FeatureVector features;
    features.reserve(dim_);
    if (hits == 0) return features;
    for (std::size_t d = 0; d < dim_; ++d) {
      const float value = static_cast<float>(sum[d] / hits);
      if (value != 0.0f) features.push_back({static_cast<std::uint32_t>(d), value});
    }
    return features;
  }

  std::string id() const override { return "embedding-table/" + content_id_; }

 private:
  explicit EmbeddingTableEncoder(int max_tokens) : max_tokens_(max_tokens) {}

  int max_tokens_;
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<float>> table_;
  std::string content_id_;
};

}  // namespace offlang
