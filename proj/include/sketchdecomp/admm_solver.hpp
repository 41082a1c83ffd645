#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sketchdecomp/constraint_ops.hpp"

namespace sketchdecomp {

struct SolverParams {
  double sigma = 1.0;
  double gamma = 1.618;
  double tol = 1e-4;
  int max_iter = 5000;

  void validate() const {
    if (sigma <= 0.0) throw std::invalid_argument("solver: sigma must be > 0");
    constexpr double kGoldenRatio = 1.6180339887498949;
    if (gamma <= 0.0 || gamma > kGoldenRatio + 1e-9)
      throw std::invalid_argument("solver: gamma must lie in (0, (1+sqrt(5))/2]");
    if (tol <= 0.0) throw std::invalid_argument("solver: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
  }
};

/// Normalized first-order optimality measures. The primal variable M is the
/// multiplier of the dual equality constraint; at a solution all six vanish.
struct KktResiduals {
  double eq = 0.0;        // ||B1 M - R||_F / (1 + ||R||_F)
  double ineq = 0.0;      // ||max(B2 M - S, 0)||_F / (1 + ||S||_F)
  double rowsum = 0.0;    // ||B3 M 1||_inf / (1 + ||M||_F)
  double nonneg = 0.0;    // ||max(-M, 0)||_F / (1 + ||M||_F)
  double dualfeas = 0.0;  // ||Gamma||_F / (1 + ||M||_F)
  double gap = 0.0;       // |  ||M||_* + <U,R> + <V,S> | / (1 + ||M||_*)

  double max_residual() const {
    return std::max({eq, ineq, rowsum, nonneg, dualfeas, gap});
  }
};

struct ResidualRecord {
  int iteration = 0;
  KktResiduals residuals;
  double objective = 0.0;       // ||M||_*
  double dual_objective = 0.0;  // <U,R> + <V,S>
};

/// Dual block iterates plus the primal recovery M. V and G stay
/// entrywise nonnegative and H stays inside the spectral unit ball after
/// every sweep.
struct SolverState {
  Dims dims;
  Eigen::MatrixXd U;  // (n-m+1)*d x w, equality multiplier
  Eigen::MatrixXd V;  // n*d x w, inequality multiplier, >= 0
  Eigen::VectorXd y;  // n*m*(d-1), row-sum multiplier
  Eigen::MatrixXd G;  // lambda x w, >= 0
  Eigen::MatrixXd H;  // lambda x w, ||H||_2 <= 1
  Eigen::MatrixXd M;  // lambda x w
  int iteration = 0;

  static SolverState zero(const Dims& dims) {
    SolverState s;
    s.dims = dims;
    s.U = Eigen::MatrixXd::Zero(dims.eq_blocks() * dims.d, dims.w);
    s.V = Eigen::MatrixXd::Zero(dims.n * dims.d, dims.w);
    s.y = Eigen::VectorXd::Zero(dims.n * dims.m * (dims.d - 1));
    s.G = Eigen::MatrixXd::Zero(dims.lambda(), dims.w);
    s.H = Eigen::MatrixXd::Zero(dims.lambda(), dims.w);
    s.M = Eigen::MatrixXd::Zero(dims.lambda(), dims.w);
    return s;
  }
};

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, std::string checkpoint = {})
      : std::runtime_error(what), checkpoint_json_(std::move(checkpoint)) {}

  /// JSON dump of the iterates at failure, when available.
  const std::string& checkpoint_json() const { return checkpoint_json_; }

 private:
  std::string checkpoint_json_;
};

/// Residual of the modified dual's equality constraint:
/// -B1^T U - B2^T V + B3^T y 1^T + G - H.
inline Eigen::MatrixXd dual_constraint_residual(
    const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, const Eigen::VectorXd& y,
    const Eigen::MatrixXd& g, const Eigen::MatrixXd& h, const Dims& dims) {
  return -apply_B1_adjoint(u, dims) - apply_B2_adjoint(v, dims) +
         apply_B3_rowsum_adjoint(y, dims) + g - h;
}

/// Nearest matrix in spectral norm <= 1: thin SVD with singular values
/// clipped at 1. Inputs already inside the ball are returned unchanged.
inline Eigen::MatrixXd project_spectral_ball(const Eigen::MatrixXd& x) {
  if (!x.allFinite())
    throw SolverError("spectral-ball projection: input has non-finite entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 1.0) return x;
  return svd.matrixU() * sv.cwiseMin(1.0).asDiagonal() * svd.matrixV().transpose();
}

inline double nuclear_norm(const Eigen::MatrixXd& x) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(x).singularValues().sum();
}

// ---------------------------------------------------------------------------
// Block updates. Each returns the exact minimizer of the augmented
// Lagrangian in its block with every other block held at its current value.

/// U-subproblem minimizer. B1 B1^T = m I collapses the normal equations to
/// U = (B1(sigma*C + M) - R) / (sigma*m) with C the U-free part of Gamma.
inline Eigen::MatrixXd update_U(const SolverState& s, const ConstraintSystem& sys,
                                double sigma) {
  const Dims& dims = sys.dims;
  Eigen::MatrixXd c = -apply_B2_adjoint(s.V, dims) +
                      apply_B3_rowsum_adjoint(s.y, dims) + s.G - s.H;
  return (apply_B1(sigma * c + s.M, dims) - sys.R_stack) / (sigma * dims.m);
}

/// V-subproblem minimizer: same scaled-identity collapse as U, followed by
/// the nonnegativity clamp (exact because the quadratic is separable).
inline Eigen::MatrixXd update_V(const SolverState& s, const ConstraintSystem& sys,
                                double sigma) {
  const Dims& dims = sys.dims;
  Eigen::MatrixXd c = -apply_B1_adjoint(s.U, dims) +
                      apply_B3_rowsum_adjoint(s.y, dims) + s.G - s.H;
  return ((apply_B2(sigma * c + s.M, dims) - sys.S_stack) / (sigma * dims.m))
      .cwiseMax(0.0);
}

/// G-subproblem minimizer: G = max(-D - M/sigma, 0) with D the G-free part
/// of Gamma.
inline Eigen::MatrixXd update_G(const SolverState& s, const ConstraintSystem& sys,
                                double sigma) {
  const Dims& dims = sys.dims;
  Eigen::MatrixXd d_part = -apply_B1_adjoint(s.U, dims) -
                           apply_B2_adjoint(s.V, dims) +
                           apply_B3_rowsum_adjoint(s.y, dims) - s.H;
  return (-d_part - s.M / sigma).cwiseMax(0.0);
}

/// H-subproblem minimizer: spectral-ball projection of E + M/sigma with E
/// the H-free part of Gamma.
inline Eigen::MatrixXd update_H(const SolverState& s, const ConstraintSystem& sys,
                                double sigma) {
  const Dims& dims = sys.dims;
  Eigen::MatrixXd e = -apply_B1_adjoint(s.U, dims) - apply_B2_adjoint(s.V, dims) +
                      apply_B3_rowsum_adjoint(s.y, dims) + s.G;
  return project_spectral_ball(e + s.M / sigma);
}

/// y-subproblem minimizer. B3 B3^T is block-diagonal with tridiagonal
/// A A^T blocks, so sigma*w*(A A^T) y_b = -A (M + sigma*F)_b 1 decouples into
/// one Thomas solve per block (A A^T is positive definite for d >= 2).
inline Eigen::VectorXd update_y(const SolverState& s, const ConstraintSystem& sys,
                                double sigma) {
  const Dims& dims = sys.dims;
  Eigen::MatrixXd f = -apply_B1_adjoint(s.U, dims) - apply_B2_adjoint(s.V, dims) +
                      s.G - s.H;
  Eigen::MatrixXd x = s.M + sigma * f;
  const double scale = sigma * static_cast<double>(dims.w);
  const int nd1 = dims.d - 1;

  // Forward-elimination coefficients of the unit tridiagonal [-1, 2, -1],
  // shared by every block.
  Eigen::VectorXd cp(nd1);
  cp(0) = -0.5;
  for (int i = 1; i < nd1; ++i) cp(i) = -1.0 / (2.0 + cp(i - 1));

  Eigen::VectorXd y(dims.n * dims.m * nd1);
  Eigen::VectorXd dp(nd1);
  int pos = 0;
  for (int k = 1; k <= dims.n; ++k) {
    for (int i = 1; i <= dims.m; ++i) {
      Eigen::VectorXd row_sums =
          x.middleRows(block_row(dims, k, i), dims.d).rowwise().sum();
      dp(0) = -(row_sums(0) - row_sums(1)) / scale / 2.0;
      for (int r = 1; r < nd1; ++r) {
        const double rhs = -(row_sums(r) - row_sums(r + 1)) / scale;
        dp(r) = (rhs + dp(r - 1)) / (2.0 + cp(r - 1));
      }
      y(pos + nd1 - 1) = dp(nd1 - 1);
      for (int r = nd1 - 2; r >= 0; --r)
        y(pos + r) = dp(r) - cp(r) * y(pos + r + 1);
      pos += nd1;
    }
  }
  return y;
}

/// One symmetric Gauss-Seidel sweep: U half-step, V, G, U, y half-step, H,
/// y, then the dual-ascent step on M.
inline void sweep(SolverState& s, const ConstraintSystem& sys,
                  const SolverParams& params) {
  s.U = update_U(s, sys, params.sigma);
  s.V = update_V(s, sys, params.sigma);
  s.G = update_G(s, sys, params.sigma);
  s.U = update_U(s, sys, params.sigma);
  s.y = update_y(s, sys, params.sigma);
  s.H = update_H(s, sys, params.sigma);
  s.y = update_y(s, sys, params.sigma);
  s.M += params.gamma * params.sigma *
         dual_constraint_residual(s.U, s.V, s.y, s.G, s.H, s.dims);
  ++s.iteration;
}

inline ResidualRecord compute_residuals(const SolverState& s,
                                        const ConstraintSystem& sys) {
  const Dims& dims = sys.dims;
  ResidualRecord rec;
  rec.iteration = s.iteration;
  const double norm_r = sys.R_stack.norm();
  const double norm_s = sys.S_stack.norm();
  const double norm_m = s.M.norm();
  rec.residuals.eq = (apply_B1(s.M, dims) - sys.R_stack).norm() / (1.0 + norm_r);
  rec.residuals.ineq =
      (apply_B2(s.M, dims) - sys.S_stack).cwiseMax(0.0).norm() / (1.0 + norm_s);
  rec.residuals.rowsum =
      apply_B3_rowsum(s.M, dims).cwiseAbs().maxCoeff() / (1.0 + norm_m);
  rec.residuals.nonneg = (-s.M).cwiseMax(0.0).norm() / (1.0 + norm_m);
  rec.residuals.dualfeas =
      dual_constraint_residual(s.U, s.V, s.y, s.G, s.H, dims).norm() /
      (1.0 + norm_m);
  rec.objective = nuclear_norm(s.M);
  rec.dual_objective = s.U.cwiseProduct(sys.R_stack).sum() +
                       s.V.cwiseProduct(sys.S_stack).sum();
  rec.residuals.gap =
      std::abs(rec.objective + rec.dual_objective) / (1.0 + rec.objective);
  return rec;
}

/// Probe check of the scaled-identity Gram structure the closed-form U and
/// V updates rely on; one random matrix through adjoint-then-forward.
inline void verify_gram_structure(const Dims& dims) {
  std::mt19937_64 rng(0x5eedULL);
  auto fill = [&rng](Eigen::MatrixXd& m) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c)
        m(r, c) = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 2.0 - 1.0;
  };
  Eigen::MatrixXd probe_u(dims.eq_blocks() * dims.d, dims.w);
  fill(probe_u);
  const double dev1 = (apply_B1(apply_B1_adjoint(probe_u, dims), dims) -
                       dims.m * probe_u)
                          .cwiseAbs()
                          .maxCoeff();
  Eigen::MatrixXd probe_v(dims.n * dims.d, dims.w);
  fill(probe_v);
  const double dev2 = (apply_B2(apply_B2_adjoint(probe_v, dims), dims) -
                       dims.m * probe_v)
                          .cwiseAbs()
                          .maxCoeff();
  if (dev1 > 1e-12 || dev2 > 1e-12)
    throw SolverError("operator Gram structure check failed");
}

struct SolveResult {
  SubSketchStack stack;  // final M with negative entries clamped to zero
  KktResiduals final_residuals;
  std::vector<ResidualRecord> history;
  bool converged = false;
  int iterations = 0;
  SolverState state;
};

inline nlohmann::json state_to_json(const SolverState& s);

/// Run sweeps from the zero start until every residual falls below tol or
/// max_iter is hit. Non-convergence is a flagged outcome, not an error.
inline SolveResult solve(const ConstraintSystem& sys, const SolverParams& params) {
  sys.validate();
  params.validate();
  verify_gram_structure(sys.dims);

  SolverState s = SolverState::zero(sys.dims);
  SolveResult result;
  result.history.reserve(static_cast<std::size_t>(params.max_iter));
  try {
    for (int it = 0; it < params.max_iter; ++it) {
      sweep(s, sys, params);
      ResidualRecord rec = compute_residuals(s, sys);
      result.history.push_back(rec);
      if (rec.residuals.max_residual() <= params.tol) {
        result.converged = true;
        break;
      }
    }
  } catch (const SolverError& e) {
    if (e.checkpoint_json().empty())
      throw SolverError(e.what(), state_to_json(s).dump());
    throw;
  }
  result.iterations = s.iteration;
  if (!result.history.empty())
    result.final_residuals = result.history.back().residuals;
  result.stack = SubSketchStack(sys.dims, s.M.cwiseMax(0.0));
  result.state = std::move(s);
  return result;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int rows, int cols) {
  if (static_cast<int>(j.size()) != rows * cols)
    throw std::invalid_argument("solver checkpoint: matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      m(r, c) = j[static_cast<std::size_t>(r) * cols + c].get<double>();
  return m;
}

}  // namespace detail

inline nlohmann::json state_to_json(const SolverState& s) {
  return nlohmann::json{
      {"n", s.dims.n},           {"m", s.dims.m},
      {"d", s.dims.d},           {"w", s.dims.w},
      {"iteration", s.iteration},
      {"U", detail::matrix_to_json(s.U)},
      {"V", detail::matrix_to_json(s.V)},
      {"y", std::vector<double>(s.y.data(), s.y.data() + s.y.size())},
      {"G", detail::matrix_to_json(s.G)},
      {"H", detail::matrix_to_json(s.H)},
      {"M", detail::matrix_to_json(s.M)}};
}

inline SolverState state_from_json(const nlohmann::json& j) {
  Dims dims{j.at("n").get<int>(), j.at("m").get<int>(), j.at("d").get<int>(),
            j.at("w").get<int>()};
  dims.validate();
  SolverState s = SolverState::zero(dims);
  s.iteration = j.at("iteration").get<int>();
  s.U = detail::matrix_from_json(j.at("U"), dims.eq_blocks() * dims.d, dims.w);
  s.V = detail::matrix_from_json(j.at("V"), dims.n * dims.d, dims.w);
  const auto yv = j.at("y").get<std::vector<double>>();
  if (static_cast<int>(yv.size()) != dims.n * dims.m * (dims.d - 1))
    throw std::invalid_argument("solver checkpoint: y size mismatch");
  s.y = Eigen::Map<const Eigen::VectorXd>(yv.data(),
                                          static_cast<Eigen::Index>(yv.size()));
  s.G = detail::matrix_from_json(j.at("G"), dims.lambda(), dims.w);
  s.H = detail::matrix_from_json(j.at("H"), dims.lambda(), dims.w);
  s.M = detail::matrix_from_json(j.at("M"), dims.lambda(), dims.w);
  return s;
}

/// CSV: iteration, the six residuals, primal objective, dual objective.
inline void write_history_csv(std::ostream& os,
                              const std::vector<ResidualRecord>& history) {
  os << "iteration,r_eq,r_ineq,r_rowsum,r_nonneg,r_dualfeas,gap,objective,"
        "dual_objective\n";
  os << std::setprecision(17);
  for (const ResidualRecord& rec : history) {
    os << rec.iteration << ',' << rec.residuals.eq << ',' << rec.residuals.ineq
       << ',' << rec.residuals.rowsum << ',' << rec.residuals.nonneg << ','
       << rec.residuals.dualfeas << ',' << rec.residuals.gap << ','
       << rec.objective << ',' << rec.dual_objective << '\n';
  }
}

}  // namespace sketchdecomp
