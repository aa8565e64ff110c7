#pragma once

#include <cstddef>

#include "lqrac/json_io.hpp"
#include "lqrac/lqr_model.hpp"

namespace lqrac {

/// Gains with rho(A - BK) above 1 - kStabilityMargin are rejected as unstable.
inline constexpr double kStabilityMargin = 1e-12;
/// sigma_min of the critic system below this is reported as ill-conditioned.
inline constexpr double kIllConditionedThreshold = 1e-10;

/// Largest modulus among the (possibly complex) eigenvalues of `m`.
double spectral_radius(const Matrix& m);

/// A - BK.
Matrix closed_loop(const ProblemInstance& inst, const PolicyParams& policy);

/// Throws UnstablePolicy when rho(A - BK) >= 1 - kStabilityMargin; returns rho.
double require_stable(const ProblemInstance& inst, const PolicyParams& policy,
                      const char* where);

/// Solves X = M X M^T + W for stable M. Dense Kronecker solve up to n = 20,
/// squared Smith (doubling) iteration beyond that.
Matrix solve_discrete_lyapunov(const Matrix& m, const Matrix& w);

/// Stationary state covariance: Sigma = Psi_sigma + (A-BK) Sigma (A-BK)^T.
Matrix solve_sigma(const ProblemInstance& inst, const PolicyParams& policy);

/// Value matrix: P = (Q + K^T R K) + (A-BK)^T P (A-BK).
Matrix solve_p(const ProblemInstance& inst, const PolicyParams& policy);

struct ExactEvaluation {
  PolicyParams K;
  Matrix P;
  Matrix Sigma;
  /// [[Q + A^T P A, A^T P B], [B^T P A, R + B^T P B]].
  Matrix Theta;
  double J = 0.0;
  /// Natural gradient direction E = Theta22 K - Theta21.
  Matrix E;
  /// grad J = 2 E Sigma.
  Matrix grad;
  double spectral_radius = 0.0;
};

ExactEvaluation evaluate(const ProblemInstance& inst, const PolicyParams& policy);

/// Keys "P", "Sigma", "Theta", "J", "E", "grad", "rho" (plus "K").
json evaluation_to_json(const ExactEvaluation& ev);

struct ValuePair {
  double V = 0.0;
  double Q_value = 0.0;
};

/// V_K(x) = x^T P x - tr(P Sigma) and
/// Q_K(x,u) = [x;u]^T Theta [x;u] - sigma^2 tr(R + P B B^T) - tr(P Sigma).
ValuePair value_functions(const ProblemInstance& inst, const ExactEvaluation& ev,
                          const StateActionPair& z);
ValuePair value_functions(const ProblemInstance& inst, const PolicyParams& policy,
                          const StateActionPair& z);

/// Joint transition matrix of z = (x, u): z' = L z + noise, L = [I; -K][A B].
Matrix joint_dynamics(const ProblemInstance& inst, const PolicyParams& policy);

/// Covariance of the joint transition noise, [[Psi, -Psi K^T], [-K Psi, K Psi K^T + sigma^2 I]].
Matrix joint_noise(const ProblemInstance& inst, const PolicyParams& policy);

/// Stationary covariance of (x, u):
/// [[Sigma, -Sigma K^T], [-K Sigma, K Sigma K^T + sigma^2 I]].
Matrix joint_covariance(const ProblemInstance& inst, const PolicyParams& policy);

/// Population quantities of the critic's linear system, with
/// Xi = E{phi(z) [phi(z) - phi(z')]^T}, mean_feature = E[phi(z)] = svec(joint cov)
/// and b = E[c(z) phi(z)].
struct CriticSystem {
  Matrix joint_cov;
  Matrix L;
  Matrix Xi;
  Vector mean_feature;
  Vector b;
  double J = 0.0;
  /// [[1, 0], [mean_feature, Xi]].
  Matrix system;
  /// (J, b).
  Vector rhs;
  /// sigma_min(system).
  double kappa = 0.0;
};

/// Builds the critic system from closed forms without solving it; safe to call
/// on ill-conditioned (e.g. sigma = 0) instances.
CriticSystem critic_system(const ProblemInstance& inst, const PolicyParams& policy);

struct CriticTarget {
  /// (J(K), svec(Theta_K)), obtained by solving system * v = rhs.
  Vector vartheta_star;
  /// Full block system matrix [[1, 0], [E phi, Xi]].
  Matrix system;
  Matrix Xi;
  Vector mean_feature;
  Vector bK;
  double J = 0.0;
  double kappa = 0.0;
  /// Relative residual of the linear solve.
  double residual = 0.0;
};

/// Solves the critic's linear system. Throws IllConditioned if kappa < 1e-10.
CriticTarget xi_matrix(const ProblemInstance& inst, const PolicyParams& policy);

struct DareSolution {
  PolicyParams K_star;
  Matrix P_star;
  double J_star = 0.0;
  std::size_t iterations = 0;
};

struct DareOptions {
  std::size_t max_iterations = 100000;
  double tolerance = 1e-12;
};

/// Fixed-point iteration of the Riccati map from P0 = Q, falling back to policy
/// iteration when the iteration stalls. Throws NoConvergence.
DareSolution solve_dare(const ProblemInstance& inst, const DareOptions& opts = {});

/// Hewer's policy iteration K <- (R + B^T P_K B)^{-1} B^T P_K A from a stable K0.
DareSolution policy_iteration(const ProblemInstance& inst, const PolicyParams& k0,
                              std::size_t max_iterations = 1000, double tolerance = 1e-13);

/// sum_{t=0}^{horizon} A_{K,K'}(x'_t) along x'_{t+1} = (A - BK') x'_t, x'_0 = x0,
/// which tends to x0^T (P_{K'} - P_K) x0.
double cost_difference_series(const ProblemInstance& inst, const PolicyParams& k,
                              const PolicyParams& k_prime, const Vector& x0,
                              std::size_t horizon);

struct GradientDominance {
  double lower = 0.0;
  double gap = 0.0;
  double upper = 0.0;
};

/// sigma_min(Psi) tr(E^T E) / ||R + B^T P B||  <=  J(K) - J(K*)
///   <=  ||Sigma_{K*}|| tr(E^T E) / sigma_min(R).
GradientDominance gradient_dominance_bounds(const ProblemInstance& inst,
                                            const PolicyParams& policy);
GradientDominance gradient_dominance_bounds(const ProblemInstance& inst,
                                            const PolicyParams& policy,
                                            const DareSolution& optimum);

/// Fisher information of pi_K over vec(K) (row-major index i*d + j):
/// sigma^{-2} 1{i = i'} Sigma_{j j'}. Requires sigma > 0.
Matrix fisher_information(const ProblemInstance& inst, const PolicyParams& policy);

}  // namespace lqrac
