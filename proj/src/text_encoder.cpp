#include "reg/text_encoder.hpp"

#include <cctype>
#include <cstdint>

#include "reg/error.hpp"

namespace reg {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool token_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (token_byte(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

HashingEncoder::HashingEncoder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("encoder dimension must be positive");
}

Eigen::VectorXd HashingEncoder::encode(std::string_view text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& tok : tokenize(text)) {
    auto h = fnv1a(tok);
    auto slot = static_cast<Eigen::Index>(h % dim_);
    v[slot] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = v.norm();
  if (norm > 0) v /= norm;
  return v;
}

std::string HashingEncoder::tag() const { return "hash-bow-" + std::to_string(dim_); }

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm();
  double nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace reg
