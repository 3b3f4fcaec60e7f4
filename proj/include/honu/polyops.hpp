#pragma once

// Monomial expansion of a bias-augmented input vector.
//
// For an input x = [1, x_1, ..., x_n] and a polynomial order r, the long
// vector holds one entry per non-decreasing multi-index (i_1 <= ... <= i_r)
// over {0..n}, equal to x_{i_1} * ... * x_{i_r}. Index 0 is the bias, so
// lower-degree terms appear as multi-indices padded with zeros. Entries are
// ordered lexicographically by multi-index, which fixes the position of every
// weight in the flattened weight vector.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "honu/types.hpp"

namespace honu {

/// Largest expansion a basis will build.
inline constexpr std::size_t max_weight_count = 100000;

struct MonomialIndex {
  std::vector<std::size_t> factors;

  std::size_t order() const noexcept { return factors.size(); }

  /// Number of non-bias factors, i.e. the true polynomial degree of the term.
  std::size_t degree() const noexcept {
    std::size_t d = 0;
    for (auto f : factors) d += (f != 0);
    return d;
  }

  bool contains(std::size_t input) const noexcept {
    for (auto f : factors)
      if (f == input) return true;
    return false;
  }

  friend bool operator==(const MonomialIndex&, const MonomialIndex&) = default;
};

/// Number of order-r monomials over n inputs plus bias: C(n + r, r).
/// Throws std::overflow_error instead of wrapping.
inline std::size_t weight_count(std::size_t n, std::size_t r) {
  detail::require(n >= 1, "weight_count: input count n must be >= 1");
  detail::require(r >= 1, "weight_count: order r must be >= 1");
  // c holds C(n + i, i); the update c * (n + i + 1) / (i + 1) is exact, and
  // dividing out the gcd first keeps the overflow check tight.
  std::size_t c = 1;
  for (std::size_t i = 1; i <= r; ++i) {
    std::size_t top = 0;
    if (__builtin_add_overflow(n, i, &top))
      throw std::overflow_error("weight_count: n + r overflows");
    const std::size_t g = std::gcd(c, i);
    const std::size_t rest = i / g;
    std::size_t next = 0;
    if (__builtin_mul_overflow(c / g, top / rest, &next))
      throw std::overflow_error("weight_count: C(n + r, r) overflows std::size_t");
    c = next;
  }
  return c;
}

/// All multi-indices of one order, with cached expansion helpers.
///
/// Immutable after construction; share it between weight vectors and states
/// through std::shared_ptr<const MonomialBasis>.
class MonomialBasis {
 public:
  MonomialBasis(std::size_t n, std::size_t r) : n_(n), r_(r) {
    const std::size_t count = weight_count(n, r);
    if (count > max_weight_count)
      throw std::length_error("MonomialBasis: " + std::to_string(count) +
                              " weights exceed the supported maximum of " +
                              std::to_string(max_weight_count));
    count_ = count;
    table_.reserve(count * r);
    std::vector<std::uint32_t> idx(r, 0);
    for (;;) {
      table_.insert(table_.end(), idx.begin(), idx.end());
      // Advance to the next non-decreasing tuple in lexicographic order.
      std::size_t p = r;
      while (p > 0 && idx[p - 1] == n) --p;
      if (p == 0) break;
      const std::uint32_t v = idx[p - 1] + 1;
      for (std::size_t j = p - 1; j < r; ++j) idx[j] = v;
    }
  }

  std::size_t inputs() const noexcept { return n_; }
  std::size_t order() const noexcept { return r_; }
  std::size_t size() const noexcept { return count_; }

  /// Factor q of the multi-index at position m.
  std::size_t factor(std::size_t q, std::size_t m) const noexcept {
    return table_[q * r_ + m];
  }

  MonomialIndex index(std::size_t q) const {
    MonomialIndex out;
    out.factors.assign(table_.begin() + static_cast<std::ptrdiff_t>(q * r_),
                       table_.begin() + static_cast<std::ptrdiff_t>((q + 1) * r_));
    return out;
  }

  std::vector<MonomialIndex> indices() const {
    std::vector<MonomialIndex> out;
    out.reserve(count_);
    for (std::size_t q = 0; q < count_; ++q) out.push_back(index(q));
    return out;
  }

  /// FNV-1a over (n, r, every factor). Identifies the weight layout in files.
  std::uint64_t order_hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    };
    mix(n_);
    mix(r_);
    for (auto f : table_) mix(f);
    return h;
  }

  /// Long vector colx for an augmented input (values[0] is the bias).
  Vector expand(const Eigen::Ref<const Vector>& x) const {
    check_length(x.size());
    Vector out(static_cast<Eigen::Index>(count_));
    const std::uint32_t* row = table_.data();
    for (std::size_t q = 0; q < count_; ++q, row += r_) {
      double p = x[row[0]];
      for (std::size_t m = 1; m < r_; ++m) p *= x[row[m]];
      out[static_cast<Eigen::Index>(q)] = p;
    }
    return out;
  }

  /// Design matrix: row k is the expansion of pattern row k of `patterns`.
  Matrix expand_batch(const Eigen::Ref<const Matrix>& patterns) const {
    check_length(patterns.cols());
    Matrix out(patterns.rows(), static_cast<Eigen::Index>(count_));
    for (Eigen::Index k = 0; k < patterns.rows(); ++k)
      out.row(k) = expand(patterns.row(k).transpose()).transpose();
    return out;
  }

  /// (n+1) x n_w matrix E with E(tau, q) = d colx_q / d x_tau.
  ///
  /// Column q sums, over the r factor positions m of multi-index q, the
  /// product of the remaining r-1 factors into row index_m. The bias row is
  /// filled like any other; callers that hold x_0 fixed ignore it.
  Matrix input_derivatives(const Eigen::Ref<const Vector>& x) const {
    check_length(x.size());
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n_ + 1),
                              static_cast<Eigen::Index>(count_));
    std::vector<double> prefix(r_ + 1), suffix(r_ + 1);
    const std::uint32_t* row = table_.data();
    for (std::size_t q = 0; q < count_; ++q, row += r_) {
      prefix[0] = 1.0;
      for (std::size_t m = 0; m < r_; ++m) prefix[m + 1] = prefix[m] * x[row[m]];
      suffix[r_] = 1.0;
      for (std::size_t m = r_; m > 0; --m) suffix[m - 1] = suffix[m] * x[row[m - 1]];
      for (std::size_t m = 0; m < r_; ++m)
        out(row[m], static_cast<Eigen::Index>(q)) += prefix[m] * suffix[m + 1];
    }
    return out;
  }

 private:
  void check_length(Eigen::Index len) const {
    if (len != static_cast<Eigen::Index>(n_ + 1))
      throw std::invalid_argument("MonomialBasis: expected augmented input of length " +
                                  std::to_string(n_ + 1) + ", got " +
                                  std::to_string(len));
  }

  std::size_t n_;
  std::size_t r_;
  std::size_t count_ = 0;
  std::vector<std::uint32_t> table_;
};

using BasisPtr = std::shared_ptr<const MonomialBasis>;

inline BasisPtr make_basis(std::size_t n, std::size_t r) {
  return std::make_shared<const MonomialBasis>(n, r);
}

/// Input vector with the bias x_0 = 1 in front.
class AugmentedInput {
 public:
  /// Prepends the bias to raw inputs x_1..x_n.
  static AugmentedInput from_raw(std::span<const double> inputs) {
    Vector v(static_cast<Eigen::Index>(inputs.size() + 1));
    v[0] = 1.0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      v[static_cast<Eigen::Index>(i + 1)] = inputs[i];
    return AugmentedInput(std::move(v));
  }

  /// Wraps an already augmented vector; values[0] must be exactly 1.
  static AugmentedInput from_augmented(Vector values) {
    detail::require(values.size() >= 2, "AugmentedInput: need the bias and at least one input");
    detail::require(values[0] == 1.0, "AugmentedInput: bias entry values[0] must equal 1");
    return AugmentedInput(std::move(values));
  }

  std::size_t inputs() const noexcept { return static_cast<std::size_t>(values_.size() - 1); }
  const Vector& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

 private:
  explicit AugmentedInput(Vector v) : values_(std::move(v)) {}
  Vector values_;
};

/// Canonical monomial order for (n, r).
inline std::vector<MonomialIndex> monomial_indices(std::size_t n, std::size_t r) {
  return MonomialBasis(n, r).indices();
}

/// colx = col^r(x). The row form rowx is the same entries transposed.
inline Vector row_expand(const AugmentedInput& x, std::size_t r) {
  return MonomialBasis(x.inputs(), r).expand(x.values());
}

/// Expands N patterns (rows of `patterns`, bias in column 0) into N x n_w.
inline Matrix expand_batch(const Eigen::Ref<const Matrix>& patterns, std::size_t r) {
  detail::require(patterns.cols() >= 2, "expand_batch: patterns need bias plus inputs");
  for (Eigen::Index k = 0; k < patterns.rows(); ++k)
    if (patterns(k, 0) != 1.0)
      throw std::invalid_argument("expand_batch: pattern " + std::to_string(k) +
                                  " has bias != 1");
  return MonomialBasis(static_cast<std::size_t>(patterns.cols() - 1), r).expand_batch(patterns);
}

}  // namespace honu
