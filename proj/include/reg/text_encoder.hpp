#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace reg {

// Frozen text encoder. Implementations must be deterministic.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Eigen::VectorXd encode(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
  // Identifies the embedding space; models refuse to load under another tag.
  virtual std::string tag() const = 0;
};

// Lowercased runs of ASCII alphanumerics; non-ASCII bytes are kept inside
// tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

// Signed feature hashing of the token bag (FNV-1a), L2-normalized. The
// empty string maps to the zero vector.
class HashingEncoder final : public TextEncoder {
 public:
  explicit HashingEncoder(std::size_t dim = 256);
  Eigen::VectorXd encode(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }
  std::string tag() const override;

 private:
  std::size_t dim_;
};

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace reg
