#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peract/errors.hpp"

namespace peract {

/// num_tokens x feature_dim token features for one goal string.
struct LanguageEncoding {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tokens;
};

/// Any model that maps a goal string to a fixed-length token sequence.
class LanguageEncoder {
public:
  virtual ~LanguageEncoder() = default;
  [[nodiscard]] virtual LanguageEncoding encode(const std::string& goal) const = 0;
  [[nodiscard]] virtual int num_tokens() const = 0;
  [[nodiscard]] virtual int feature_dim() const = 0;
};

[[nodiscard]] inline std::vector<std::string> tokenize_goal(const std::string& goal) {
  std::string lowered;
  lowered.reserve(goal.size());
  for (unsigned char c : goal) lowered.push_back(static_cast<char>(std::tolower(c)));
  std::istringstream in(lowered);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

/// Self-contained fallback: each lowercase whitespace token maps to a
/// pseudo-random unit-variance vector seeded by a hash of the token text.
/// Sequences are zero-padded or truncated to `num_tokens`.
class HashLanguageEncoder final : public LanguageEncoder {
public:
  HashLanguageEncoder(int num_tokens, int feature_dim, std::uint64_t seed = 0x5eedULL)
      : num_tokens_(num_tokens), feature_dim_(feature_dim), seed_(seed) {
    if (num_tokens <= 0 || feature_dim <= 0) throw InvalidInput("language encoder: dimensions must be positive");
  }

  [[nodiscard]] LanguageEncoding encode(const std::string& goal) const override {
    const auto words = tokenize_goal(goal);
    if (words.empty()) throw InvalidInput("language encoder: goal must be non-empty");
    LanguageEncoding enc;
    enc.tokens.setZero(num_tokens_, feature_dim_);
    const auto n = std::min<std::size_t>(words.size(), static_cast<std::size_t>(num_tokens_));
    for (std::size_t t = 0; t < n; ++t) enc.tokens.row(static_cast<Eigen::Index>(t)) = embed(words[t]);
    return enc;
  }

  [[nodiscard]] Eigen::RowVectorXf embed(const std::string& word) const {
    std::uint64_t state = fnv1a(word) ^ seed_;
    Eigen::RowVectorXf v(feature_dim_);
    const double half_width = std::sqrt(3.0);
    for (int i = 0; i < feature_dim_; ++i) {
      const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
      v[i] = static_cast<float>((2.0 * u - 1.0) * half_width);
    }
    return v;
  }

  [[nodiscard]] int num_tokens() const override { return num_tokens_; }
  [[nodiscard]] int feature_dim() const override { return feature_dim_; }

private:
  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  int num_tokens_;
  int feature_dim_;
  std::uint64_t seed_;
};

}  // namespace peract
