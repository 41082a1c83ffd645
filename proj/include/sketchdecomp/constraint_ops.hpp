#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchdecomp/sketch.hpp"

namespace sketchdecomp {

/// Problem dimensions. n windows, m delay branches, sketches of depth d and
/// width w. The stacked sub-sketch matrix has lambda = n*m*d rows.
struct Dims {
  int n = 0;
  int m = 0;
  int d = 0;
  int w = 0;

  int lambda() const { return n * m * d; }
  int eq_blocks() const { return n - m + 1; }

  // n == m is legal here (one equality block); the windowing layer is the
  // one that requires n > m.
  void validate() const {
    if (m < 1) throw std::invalid_argument("dims: m must be >= 1");
    if (n < m) throw std::invalid_argument("dims: n must be >= m");
    if (d < 2) throw std::invalid_argument("dims: d must be >= 2");
    if (w < 1) throw std::invalid_argument("dims: w must be >= 1");
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Row offset of sub-sketch block (k, i), both 1-based: blocks are stacked
/// as [block(1,1); ...; block(1,m); ...; block(n,1); ...; block(n,m)].
inline int block_row(const Dims& dims, int k, int i) {
  return ((k - 1) * dims.m + (i - 1)) * dims.d;
}

/// The n x m grid of d x w sub-sketch blocks, held as one lambda x w matrix.
/// Block (k, i) holds the packets sent in window k and received in window
/// k + i - 1.
struct SubSketchStack {
  Dims dims;
  Eigen::MatrixXd data;

  SubSketchStack() = default;
  explicit SubSketchStack(const Dims& dm)
      : dims(dm), data(Eigen::MatrixXd::Zero(dm.lambda(), dm.w)) {
    dims.validate();
  }
  SubSketchStack(const Dims& dm, Eigen::MatrixXd values)
      : dims(dm), data(std::move(values)) {
    dims.validate();
    if (data.rows() != dims.lambda() || data.cols() != dims.w)
      throw std::invalid_argument("SubSketchStack: data shape mismatch");
  }

  auto block(int k, int i) { return data.middleRows(block_row(dims, k, i), dims.d); }
  auto block(int k, int i) const {
    return data.middleRows(block_row(dims, k, i), dims.d);
  }
};

/// Stacked right-hand sides of the decomposition model. R_stack holds the
/// downstream sketches of windows m..n (the windows that receive all m
/// branches), S_stack the upstream sketches of windows 1..n.
struct ConstraintSystem {
  Dims dims;
  Eigen::MatrixXd R_stack;  // (n-m+1)*d x w
  Eigen::MatrixXd S_stack;  // n*d x w

  void validate() const {
    dims.validate();
    if (R_stack.rows() != dims.eq_blocks() * dims.d || R_stack.cols() != dims.w)
      throw std::invalid_argument("ConstraintSystem: R_stack shape mismatch");
    if (S_stack.rows() != dims.n * dims.d || S_stack.cols() != dims.w)
      throw std::invalid_argument("ConstraintSystem: S_stack shape mismatch");
  }

  Eigen::MatrixXd difference_matrix() const {
    return first_difference_matrix(dims.d);
  }
};

namespace detail {

inline void check_stack_shape(const Eigen::MatrixXd& m, const Dims& dims,
                              const char* who) {
  if (m.rows() != dims.lambda() || m.cols() != dims.w)
    throw std::invalid_argument(std::string(who) + ": expected lambda x w input");
}

}  // namespace detail

/// Sum of the m branch blocks feeding each constrained downstream window:
/// output block j (j = 1..n-m+1, downstream window k = m+j-1) equals
/// sum_i block(k-i+1, i).
inline Eigen::MatrixXd apply_B1(const Eigen::MatrixXd& m, const Dims& dims) {
  detail::check_stack_shape(m, dims, "apply_B1");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dims.eq_blocks() * dims.d, dims.w);
  for (int j = 1; j <= dims.eq_blocks(); ++j) {
    const int k = dims.m + j - 1;
    auto dst = out.middleRows((j - 1) * dims.d, dims.d);
    for (int i = 1; i <= dims.m; ++i) {
      dst += m.middleRows(block_row(dims, k - i + 1, i), dims.d);
    }
  }
  return out;
}

inline Eigen::MatrixXd apply_B1_adjoint(const Eigen::MatrixXd& u, const Dims& dims) {
  if (u.rows() != dims.eq_blocks() * dims.d || u.cols() != dims.w)
    throw std::invalid_argument("apply_B1_adjoint: input shape mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dims.lambda(), dims.w);
  for (int k = 1; k <= dims.n; ++k) {
    for (int i = 1; i <= dims.m; ++i) {
      const int j = k + i - dims.m;  // equality block fed by block (k, i)
      if (j < 1 || j > dims.eq_blocks()) continue;
      out.middleRows(block_row(dims, k, i), dims.d) =
          u.middleRows((j - 1) * dims.d, dims.d);
    }
  }
  return out;
}

/// Sum of branch blocks per upstream window: output block k = sum_i block(k, i).
inline Eigen::MatrixXd apply_B2(const Eigen::MatrixXd& m, const Dims& dims) {
  detail::check_stack_shape(m, dims, "apply_B2");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dims.n * dims.d, dims.w);
  for (int k = 1; k <= dims.n; ++k) {
    auto dst = out.middleRows((k - 1) * dims.d, dims.d);
    for (int i = 1; i <= dims.m; ++i) {
      dst += m.middleRows(block_row(dims, k, i), dims.d);
    }
  }
  return out;
}

inline Eigen::MatrixXd apply_B2_adjoint(const Eigen::MatrixXd& v, const Dims& dims) {
  if (v.rows() != dims.n * dims.d || v.cols() != dims.w)
    throw std::invalid_argument("apply_B2_adjoint: input shape mismatch");
  Eigen::MatrixXd out(dims.lambda(), dims.w);
  for (int k = 1; k <= dims.n; ++k) {
    for (int i = 1; i <= dims.m; ++i) {
      out.middleRows(block_row(dims, k, i), dims.d) =
          v.middleRows((k - 1) * dims.d, dims.d);
    }
  }
  return out;
}

/// Stacks A * block(k,i) * 1 over all blocks in block order: the first
/// differences of each block's row sums, length n*m*(d-1). Zero exactly on
/// insertion-built blocks.
inline Eigen::VectorXd apply_B3_rowsum(const Eigen::MatrixXd& m, const Dims& dims) {
  detail::check_stack_shape(m, dims, "apply_B3_rowsum");
  Eigen::VectorXd out(dims.n * dims.m * (dims.d - 1));
  int pos = 0;
  for (int k = 1; k <= dims.n; ++k) {
    for (int i = 1; i <= dims.m; ++i) {
      Eigen::VectorXd row_sums =
          m.middleRows(block_row(dims, k, i), dims.d).rowwise().sum();
      for (int r = 0; r + 1 < dims.d; ++r) {
        out(pos++) = row_sums(r) - row_sums(r + 1);
      }
    }
  }
  return out;
}

/// Adjoint of the row-sum map applied to a stacked vector y: block (k, i)
/// of the output is the rank-one matrix (A^T y_block) 1^T.
inline Eigen::MatrixXd apply_B3_rowsum_adjoint(const Eigen::VectorXd& y,
                                               const Dims& dims) {
  if (y.size() != dims.n * dims.m * (dims.d - 1))
    throw std::invalid_argument("apply_B3_rowsum_adjoint: input length mismatch");
  Eigen::MatrixXd out(dims.lambda(), dims.w);
  int pos = 0;
  Eigen::VectorXd col(dims.d);
  for (int k = 1; k <= dims.n; ++k) {
    for (int i = 1; i <= dims.m; ++i) {
      auto yb = y.segment(pos, dims.d - 1);
      col(0) = yb(0);
      for (int r = 1; r + 1 < dims.d; ++r) col(r) = yb(r) - yb(r - 1);
      col(dims.d - 1) = -yb(dims.d - 2);
      out.middleRows(block_row(dims, k, i), dims.d) =
          col * Eigen::RowVectorXd::Ones(dims.w);
      pos += dims.d - 1;
    }
  }
  return out;
}

/// phi_k = max(S_k - sum_i block(k, i), 0) for k = 1..n-m+1: the sketch of
/// packets sent in window k that no branch accounts for.
inline std::vector<CmSketch> recover_loss_sketches(
    const SubSketchStack& stack, const std::vector<CmSketch>& upstream) {
  const Dims& dims = stack.dims;
  if (static_cast<int>(upstream.size()) != dims.n)
    throw std::invalid_argument("recover_loss_sketches: need all n upstream sketches");
  std::vector<CmSketch> phis;
  phis.reserve(static_cast<std::size_t>(dims.eq_blocks()));
  for (int k = 1; k <= dims.eq_blocks(); ++k) {
    const CmSketch& s = upstream[static_cast<std::size_t>(k - 1)];
    if (s.depth() != dims.d || s.width() != dims.w)
      throw std::invalid_argument("recover_loss_sketches: sketch dims mismatch");
    Eigen::MatrixXd branch_sum = Eigen::MatrixXd::Zero(dims.d, dims.w);
    for (int i = 1; i <= dims.m; ++i) branch_sum += stack.block(k, i);
    phis.emplace_back(s.family(), (s.counts() - branch_sum).cwiseMax(0.0));
  }
  return phis;
}

// ---------------------------------------------------------------------------
// Dense materializations. Used by gram_diagnostics and the startup structure
// check only; the solver path never forms these.

inline Eigen::MatrixXd dense_B1(const Dims& dims) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dims.eq_blocks() * dims.d, dims.lambda());
  for (int j = 1; j <= dims.eq_blocks(); ++j) {
    const int k = dims.m + j - 1;
    for (int i = 1; i <= dims.m; ++i) {
      const int col = block_row(dims, k - i + 1, i);
      for (int r = 0; r < dims.d; ++r) b((j - 1) * dims.d + r, col + r) = 1.0;
    }
  }
  return b;
}

inline Eigen::MatrixXd dense_B2(const Dims& dims) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dims.n * dims.d, dims.lambda());
  for (int k = 1; k <= dims.n; ++k) {
    for (int i = 1; i <= dims.m; ++i) {
      const int col = block_row(dims, k, i);
      for (int r = 0; r < dims.d; ++r) b((k - 1) * dims.d + r, col + r) = 1.0;
    }
  }
  return b;
}

inline Eigen::MatrixXd dense_B3(const Dims& dims) {
  const Eigen::MatrixXd a = first_difference_matrix(dims.d);
  Eigen::MatrixXd b =
      Eigen::MatrixXd::Zero(dims.n * dims.m * (dims.d - 1), dims.lambda());
  for (int blockno = 0; blockno < dims.n * dims.m; ++blockno) {
    b.block(blockno * (dims.d - 1), blockno * dims.d, dims.d - 1, dims.d) = a;
  }
  return b;
}

/// Structure report for the solver's closed-form updates: B1 B1^T and
/// B2 B2^T must equal m*I, and B3 B3^T must be block-diagonal with A A^T
/// blocks. Deviations are exact-arithmetic zero for any valid dims.
struct GramReport {
  double b1_deviation = 0.0;
  double b2_deviation = 0.0;
  double b3_deviation = 0.0;

  double max_deviation() const {
    return std::max({b1_deviation, b2_deviation, b3_deviation});
  }
  bool ok() const { return max_deviation() == 0.0; }
};

/// Dense verification, intended for small dims.
inline GramReport gram_diagnostics(const Dims& dims) {
  dims.validate();
  GramReport report;
  const double m = static_cast<double>(dims.m);
  {
    Eigen::MatrixXd b1 = dense_B1(dims);
    Eigen::MatrixXd gram = b1 * b1.transpose();
    gram.diagonal().array() -= m;
    report.b1_deviation = gram.cwiseAbs().maxCoeff();
  }
  {
    Eigen::MatrixXd b2 = dense_B2(dims);
    Eigen::MatrixXd gram = b2 * b2.transpose();
    gram.diagonal().array() -= m;
    report.b2_deviation = gram.cwiseAbs().maxCoeff();
  }
  {
    Eigen::MatrixXd b3 = dense_B3(dims);
    Eigen::MatrixXd gram = b3 * b3.transpose();
    const Eigen::MatrixXd a = first_difference_matrix(dims.d);
    const Eigen::MatrixXd aat = a * a.transpose();
    for (int blockno = 0; blockno < dims.n * dims.m; ++blockno) {
      gram.block(blockno * (dims.d - 1), blockno * (dims.d - 1), dims.d - 1,
                 dims.d - 1) -= aat;
    }
    report.b3_deviation = gram.cwiseAbs().maxCoeff();
  }
  return report;
}

inline nlohmann::json stack_to_json(const SubSketchStack& stack) {
  nlohmann::json blocks = nlohmann::json::array();
  for (int r = 0; r < stack.data.rows(); ++r)
    for (int c = 0; c < stack.data.cols(); ++c) blocks.push_back(stack.data(r, c));
  return nlohmann::json{{"n", stack.dims.n},
                        {"m", stack.dims.m},
                        {"d", stack.dims.d},
                        {"w", stack.dims.w},
                        {"blocks", std::move(blocks)}};
}

inline SubSketchStack stack_from_json(const nlohmann::json& j) {
  Dims dims{j.at("n").get<int>(), j.at("m").get<int>(), j.at("d").get<int>(),
            j.at("w").get<int>()};
  dims.validate();
  const auto& blocks = j.at("blocks");
  if (static_cast<int>(blocks.size()) != dims.lambda() * dims.w)
    throw std::invalid_argument("stack_from_json: blocks size mismatch");
  Eigen::MatrixXd data(dims.lambda(), dims.w);
  for (int r = 0; r < dims.lambda(); ++r)
    for (int c = 0; c < dims.w; ++c)
      data(r, c) =
          blocks[static_cast<std::size_t>(r) * dims.w + c].get<double>();
  return SubSketchStack(dims, std::move(data));
}

}  // namespace sketchdecomp
