#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "lqrac/errors.hpp"

namespace lqrac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Absolute tolerance on max|M - M^T| accepted for "symmetric" inputs.
inline constexpr double kSymmetryTolerance = 1e-10;
/// Scale-relative threshold used by the positive-definiteness check.
inline constexpr double kDefinitenessTolerance = 1e-12;

/// Length of svec(M) for an m x m symmetric M.
constexpr std::size_t svec_dim(std::size_t m) { return m * (m + 1) / 2; }

/// Packs the upper triangle of a symmetric matrix row-major, with off-diagonal
/// entries weighted by sqrt(2) so that <svec(M), svec(N)> = <M, N>_F.
Vector svec(const Matrix& m);

/// Inverse of svec. Throws InvalidArgument if the length is not triangular.
Matrix smat(const Eigen::Ref<const Vector>& v);

/// Symmetric Kronecker product, defined by its action
///   (A (x)s B) svec(S) = svec((B S A^T + A S B^T) / 2).
Matrix sym_kron(const Matrix& a, const Matrix& b);

/// Symmetrizes `m` after checking it is square and symmetric to within the
/// scale-relative tolerance; `what` names the argument in error messages.
Matrix symmetrized(const Matrix& m, const char* what);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& sym);

/// Spectral norm (largest singular value).
double operator_norm(const Matrix& m);

/// Linear-quadratic problem data: x' = Ax + Bu + eps, eps ~ N(0, Psi), cost
/// x^T Q x + u^T R u, and exploration noise sigma for the Gaussian policy.
class ProblemInstance {
 public:
  ProblemInstance(Matrix a, Matrix b, Matrix q, Matrix r, Matrix psi, double sigma);

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& Q() const { return q_; }
  const Matrix& R() const { return r_; }
  const Matrix& Psi() const { return psi_; }
  double sigma() const { return sigma_; }

  std::size_t state_dim() const { return static_cast<std::size_t>(a_.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(b_.cols()); }
  std::size_t joint_dim() const { return state_dim() + input_dim(); }
  std::size_t feature_dim() const { return svec_dim(joint_dim()); }

  /// Psi + sigma^2 B B^T, the closed-loop state noise covariance.
  Matrix psi_sigma() const;
  /// blkdiag(Q, R).
  Matrix cost_weight() const;

 private:
  Matrix a_, b_, q_, r_, psi_;
  double sigma_;
};

/// Gain of the linear-Gaussian policy u = -Kx + sigma * eta. Stability is not
/// enforced here; unstable gains stay representable for diagnostics.
struct PolicyParams {
  Matrix K;

  PolicyParams() = default;
  explicit PolicyParams(Matrix k);
};

struct StateActionPair {
  Vector x;
  Vector u;

  Vector joint() const;
};

/// phi(x, u) = svec([x; u][x; u]^T).
Vector feature(const StateActionPair& z);

/// Allocation-free variant: writes svec(z z^T) into `out` (resized if needed).
void feature_into(const Eigen::Ref<const Vector>& z, Vector& out);

/// c(x, u) = x^T Q x + u^T R u.
double cost(const ProblemInstance& inst, const StateActionPair& z);
double cost(const ProblemInstance& inst, const Eigen::Ref<const Vector>& x,
            const Eigen::Ref<const Vector>& u);

}  // namespace lqrac
