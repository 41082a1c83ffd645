#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "sketchdecomp/hashing.hpp"

namespace sketchdecomp {

/// Count-min sketch: a depth x width counter matrix indexed by the rows of
/// a shared HashFamily. Counters are stored as doubles so the same type can
/// hold both insertion-built (integer-valued) sketches and the fractional
/// sketches produced by the optimizer.
class CmSketch {
 public:
  /// All-zero sketch bound to HashFamily(depth, width, seed).
  CmSketch(int depth, int width, std::uint64_t seed)
      : family_(depth, width, seed),
        counts_(Eigen::MatrixXd::Zero(depth, width)) {}

  explicit CmSketch(HashFamily family)
      : family_(std::move(family)),
        counts_(Eigen::MatrixXd::Zero(family_.depth(), family_.width())) {}

  CmSketch(HashFamily family, Eigen::MatrixXd counts)
      : family_(std::move(family)), counts_(std::move(counts)) {
    if (counts_.rows() != family_.depth() || counts_.cols() != family_.width())
      throw std::invalid_argument("CmSketch: counts shape does not match family");
  }

  const HashFamily& family() const { return family_; }
  int depth() const { return family_.depth(); }
  int width() const { return family_.width(); }
  const Eigen::MatrixXd& counts() const { return counts_; }
  Eigen::MatrixXd& counts() { return counts_; }

  /// Add `count` to one counter per row.
  void insert(const FlowKey& key, double count = 1.0) {
    if (count <= 0.0) throw std::invalid_argument("CmSketch::insert: count must be > 0");
    for (int i = 0; i < depth(); ++i) {
      counts_(i, family_.column(i, key)) += count;
    }
  }

  /// Estimated count of `key`: the minimum counter across rows. Never
  /// underestimates the true count of an insertion-built sketch.
  double query(const FlowKey& key) const {
    double v = counts_(0, family_.column(0, key));
    for (int i = 1; i < depth(); ++i) {
      v = std::min(v, counts_(i, family_.column(i, key)));
    }
    return v;
  }

 private:
  HashFamily family_;
  Eigen::MatrixXd counts_;
};

inline void require_same_family(const CmSketch& a, const CmSketch& b) {
  if (!(a.family() == b.family()))
    throw std::invalid_argument("sketch operation: hash family mismatch");
}

/// Elementwise sum. Equals the sketch of the concatenated streams.
inline CmSketch add(const CmSketch& a, const CmSketch& b) {
  require_same_family(a, b);
  return CmSketch(a.family(), a.counts() + b.counts());
}

/// Elementwise max(a - b, 0).
inline CmSketch sub_clamped(const CmSketch& a, const CmSketch& b) {
  require_same_family(a, b);
  return CmSketch(a.family(), (a.counts() - b.counts()).cwiseMax(0.0));
}

/// First-difference matrix with 1 on the diagonal and -1 on the
/// superdiagonal, shape (d-1) x d. A * C * 1 vanishes exactly iff the row
/// sums of C are all equal.
inline Eigen::MatrixXd first_difference_matrix(int d) {
  if (d < 2) throw std::invalid_argument("first_difference_matrix: d must be >= 2");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d - 1, d);
  for (int i = 0; i < d - 1; ++i) {
    a(i, i) = 1.0;
    a(i, i + 1) = -1.0;
  }
  return a;
}

/// Max-abs entry of A * counts * 1: zero exactly for any insertion-built
/// sketch, since every insert adds the same amount to every row sum.
inline double row_sum_residual(const CmSketch& s) {
  Eigen::VectorXd row_sums = s.counts().rowwise().sum();
  double r = 0.0;
  for (int i = 0; i + 1 < s.depth(); ++i) {
    r = std::max(r, std::abs(row_sums(i) - row_sums(i + 1)));
  }
  return r;
}

/// Flat JSON form: {d, w, seed, counts row-major}.
inline nlohmann::json sketch_to_json(const CmSketch& s) {
  nlohmann::json counts = nlohmann::json::array();
  for (int i = 0; i < s.depth(); ++i)
    for (int j = 0; j < s.width(); ++j) counts.push_back(s.counts()(i, j));
  return nlohmann::json{{"d", s.depth()},
                        {"w", s.width()},
                        {"seed", s.family().seed()},
                        {"counts", std::move(counts)}};
}

inline CmSketch sketch_from_json(const nlohmann::json& j) {
  int d = j.at("d").get<int>();
  int w = j.at("w").get<int>();
  std::uint64_t seed = j.at("seed").get<std::uint64_t>();
  const auto& counts = j.at("counts");
  if (static_cast<int>(counts.size()) != d * w)
    throw std::invalid_argument("sketch_from_json: counts size != d*w");
  Eigen::MatrixXd m(d, w);
  for (int i = 0; i < d; ++i)
    for (int jj = 0; jj < w; ++jj)
      m(i, jj) = counts[static_cast<std::size_t>(i) * w + jj].get<double>();
  return CmSketch(HashFamily(d, w, seed), std::move(m));
}

}  // namespace sketchdecomp
