#include "lqrac/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lqrac {

namespace {

constexpr Eigen::Index kDenseLyapunovLimit = 20;

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix solve_lyapunov_dense(const Matrix& m, const Matrix& w) {
  const Eigen::Index n = m.rows();
  const Eigen::Index n2 = n * n;
  // Column-major vec: vec(M X M^T) = (M kron M) vec(X).
  Matrix op = Matrix::Identity(n2, n2);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = i + n * j;
      for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index k = 0; k < n; ++k) {
          op(row, k + n * l) -= m(i, k) * m(j, l);
        }
      }
    }
  }
  const Vector rhs = Eigen::Map<const Vector>(w.data(), n2);
  const Vector x = op.partialPivLu().solve(rhs);
  return sym(Eigen::Map<const Matrix>(x.data(), n, n));
}

Matrix solve_lyapunov_smith(const Matrix& m, const Matrix& w) {
  Matrix x = w;
  Matrix power = m;
  for (int iter = 0; iter < 64; ++iter) {
    const Matrix increment = power * x * power.transpose();
    x += increment;
    power = power * power;
    if (increment.norm() <= 1e-16 * x.norm()) break;
  }
  return sym(x);
}

Matrix riccati_map(const ProblemInstance& inst, const Matrix& p) {
  const Matrix& a = inst.A();
  const Matrix& b = inst.B();
  const Matrix btpa = b.transpose() * p * a;
  const Matrix gram = inst.R() + b.transpose() * p * b;
  return sym(inst.Q() + a.transpose() * p * a - btpa.transpose() * gram.ldlt().solve(btpa));
}

Matrix greedy_gain(const ProblemInstance& inst, const Matrix& p) {
  const Matrix& b = inst.B();
  const Matrix gram = inst.R() + b.transpose() * p * b;
  return gram.ldlt().solve(b.transpose() * p * inst.A());
}

double average_cost(const ProblemInstance& inst, const Matrix& p) {
  return (p * inst.psi_sigma()).trace() + inst.sigma() * inst.sigma() * inst.R().trace();
}

}  // namespace

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("spectral_radius: matrix must be square");
  if (!m.allFinite()) throw InvalidArgument("spectral_radius: non-finite entries");
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) {
    throw NoConvergence("spectral_radius: eigenvalue iteration failed");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix closed_loop(const ProblemInstance& inst, const PolicyParams& policy) {
  if (static_cast<std::size_t>(policy.K.rows()) != inst.input_dim() ||
      static_cast<std::size_t>(policy.K.cols()) != inst.state_dim()) {
    throw DimensionMismatch("policy gain must be k x d");
  }
  return inst.A() - inst.B() * policy.K;
}

double require_stable(const ProblemInstance& inst, const PolicyParams& policy,
                      const char* where) {
  const double rho = spectral_radius(closed_loop(inst, policy));
  if (!(rho < 1.0 - kStabilityMargin)) throw UnstablePolicy(rho, where);
  return rho;
}

Matrix solve_discrete_lyapunov(const Matrix& m, const Matrix& w) {
  if (m.rows() != m.cols() || w.rows() != m.rows() || w.cols() != m.cols()) {
    throw DimensionMismatch("solve_discrete_lyapunov: shape mismatch");
  }
  if (m.rows() <= kDenseLyapunovLimit) return solve_lyapunov_dense(m, w);
  return solve_lyapunov_smith(m, w);
}

Matrix solve_sigma(const ProblemInstance& inst, const PolicyParams& policy) {
  require_stable(inst, policy, "solve_sigma");
  return solve_discrete_lyapunov(closed_loop(inst, policy), inst.psi_sigma());
}

Matrix solve_p(const ProblemInstance& inst, const PolicyParams& policy) {
  require_stable(inst, policy, "solve_p");
  const Matrix& k = policy.K;
  return solve_discrete_lyapunov(closed_loop(inst, policy).transpose(),
                                 inst.Q() + k.transpose() * inst.R() * k);
}

ExactEvaluation evaluate(const ProblemInstance& inst, const PolicyParams& policy) {
  ExactEvaluation ev;
  ev.K = policy;
  ev.spectral_radius = require_stable(inst, policy, "evaluate");
  const Matrix m = closed_loop(inst, policy);
  const Matrix& k = policy.K;
  ev.Sigma = solve_discrete_lyapunov(m, inst.psi_sigma());
  ev.P = solve_discrete_lyapunov(m.transpose(), inst.Q() + k.transpose() * inst.R() * k);

  const auto d = static_cast<Eigen::Index>(inst.state_dim());
  const auto kd = static_cast<Eigen::Index>(inst.input_dim());
  const Matrix& a = inst.A();
  const Matrix& b = inst.B();
  ev.Theta.resize(d + kd, d + kd);
  ev.Theta.topLeftCorner(d, d) = inst.Q() + a.transpose() * ev.P * a;
  ev.Theta.topRightCorner(d, kd) = a.transpose() * ev.P * b;
  ev.Theta.bottomLeftCorner(kd, d) = b.transpose() * ev.P * a;
  ev.Theta.bottomRightCorner(kd, kd) = inst.R() + b.transpose() * ev.P * b;
  ev.Theta = sym(ev.Theta);

  ev.J = average_cost(inst, ev.P);
  ev.E = ev.Theta.bottomRightCorner(kd, kd) * k - ev.Theta.bottomLeftCorner(kd, d);
  ev.grad = 2.0 * ev.E * ev.Sigma;
  return ev;
}

json evaluation_to_json(const ExactEvaluation& ev) {
  return json{{"K", matrix_to_json(ev.K.K)},
              {"P", matrix_to_json(ev.P)},
              {"Sigma", matrix_to_json(ev.Sigma)},
              {"Theta", matrix_to_json(ev.Theta)},
              {"J", ev.J},
              {"E", matrix_to_json(ev.E)},
              {"grad", matrix_to_json(ev.grad)},
              {"rho", ev.spectral_radius}};
}

ValuePair value_functions(const ProblemInstance& inst, const ExactEvaluation& ev,
                          const StateActionPair& z) {
  if (static_cast<std::size_t>(z.x.size()) != inst.state_dim() ||
      static_cast<std::size_t>(z.u.size()) != inst.input_dim()) {
    throw DimensionMismatch("value_functions: state-action pair does not match instance");
  }
  const double centering = (ev.P * ev.Sigma).trace();
  const double s2 = inst.sigma() * inst.sigma();
  const Matrix& b = inst.B();
  const double exploration = s2 * (inst.R().trace() + (ev.P * b * b.transpose()).trace());
  const Vector joint = z.joint();
  ValuePair out;
  out.V = z.x.dot(ev.P * z.x) - centering;
  out.Q_value = joint.dot(ev.Theta * joint) - exploration - centering;
  return out;
}

ValuePair value_functions(const ProblemInstance& inst, const PolicyParams& policy,
                          const StateActionPair& z) {
  return value_functions(inst, evaluate(inst, policy), z);
}

Matrix joint_dynamics(const ProblemInstance& inst, const PolicyParams& policy) {
  closed_loop(inst, policy);  // shape check
  const auto d = static_cast<Eigen::Index>(inst.state_dim());
  const auto k = static_cast<Eigen::Index>(inst.input_dim());
  Matrix lift(d + k, d);
  lift << Matrix::Identity(d, d), -policy.K;
  Matrix ab(d, d + k);
  ab << inst.A(), inst.B();
  return lift * ab;
}

Matrix joint_noise(const ProblemInstance& inst, const PolicyParams& policy) {
  closed_loop(inst, policy);
  const auto d = static_cast<Eigen::Index>(inst.state_dim());
  const auto k = static_cast<Eigen::Index>(inst.input_dim());
  const Matrix& kk = policy.K;
  const Matrix& psi = inst.Psi();
  Matrix out(d + k, d + k);
  out.topLeftCorner(d, d) = psi;
  out.topRightCorner(d, k) = -psi * kk.transpose();
  out.bottomLeftCorner(k, d) = -kk * psi;
  out.bottomRightCorner(k, k) =
      kk * psi * kk.transpose() + inst.sigma() * inst.sigma() * Matrix::Identity(k, k);
  return sym(out);
}

namespace {

Matrix joint_covariance_from(const ProblemInstance& inst, const PolicyParams& policy,
                             const Matrix& sigma_k) {
  const auto d = static_cast<Eigen::Index>(inst.state_dim());
  const auto k = static_cast<Eigen::Index>(inst.input_dim());
  const Matrix& kk = policy.K;
  Matrix out(d + k, d + k);
  out.topLeftCorner(d, d) = sigma_k;
  out.topRightCorner(d, k) = -sigma_k * kk.transpose();
  out.bottomLeftCorner(k, d) = -kk * sigma_k;
  out.bottomRightCorner(k, k) =
      kk * sigma_k * kk.transpose() + inst.sigma() * inst.sigma() * Matrix::Identity(k, k);
  return sym(out);
}

}  // namespace

Matrix joint_covariance(const ProblemInstance& inst, const PolicyParams& policy) {
  return joint_covariance_from(inst, policy, solve_sigma(inst, policy));
}

CriticSystem critic_system(const ProblemInstance& inst, const PolicyParams& policy) {
  const ExactEvaluation ev = evaluate(inst, policy);
  CriticSystem cs;
  cs.joint_cov = joint_covariance_from(inst, policy, ev.Sigma);
  cs.L = joint_dynamics(inst, policy);
  cs.J = ev.J;

  // Xi = 2 (S (x)s S)(I - L^T (x)s L^T), S the stationary joint covariance. The
  // factor 2 comes from the Gaussian fourth moment E[g^T A g g^T B g] =
  // 2 tr(AB) + tr(A) tr(B); the trace-trace term cancels against the noise.
  const Matrix& s = cs.joint_cov;
  const Matrix lt = cs.L.transpose();
  const Matrix skron = sym_kron(s, s);
  const Matrix lkron = sym_kron(lt, lt);
  cs.Xi = 2.0 * skron * (Matrix::Identity(skron.rows(), skron.cols()) - lkron);

  const Matrix w = inst.cost_weight();
  cs.mean_feature = svec(s);
  cs.b = svec(2.0 * s * w * s) + (s.cwiseProduct(w)).sum() * cs.mean_feature;

  const Eigen::Index p = cs.Xi.rows();
  cs.system = Matrix::Zero(p + 1, p + 1);
  cs.system(0, 0) = 1.0;
  cs.system.bottomLeftCorner(p, 1) = cs.mean_feature;
  cs.system.bottomRightCorner(p, p) = cs.Xi;
  cs.rhs.resize(p + 1);
  cs.rhs << cs.J, cs.b;

  Eigen::JacobiSVD<Matrix> svd(cs.system);
  cs.kappa = svd.singularValues()(svd.singularValues().size() - 1);
  return cs;
}

CriticTarget xi_matrix(const ProblemInstance& inst, const PolicyParams& policy) {
  CriticSystem cs = critic_system(inst, policy);
  if (!(cs.kappa >= kIllConditionedThreshold)) throw IllConditioned(cs.kappa, "xi_matrix");
  CriticTarget out;
  out.vartheta_star = cs.system.partialPivLu().solve(cs.rhs);
  out.residual = (cs.system * out.vartheta_star - cs.rhs).norm() / std::max(cs.rhs.norm(), 1e-300);
  out.system = std::move(cs.system);
  out.Xi = std::move(cs.Xi);
  out.mean_feature = std::move(cs.mean_feature);
  out.bK = std::move(cs.b);
  out.J = cs.J;
  out.kappa = cs.kappa;
  return out;
}

DareSolution policy_iteration(const ProblemInstance& inst, const PolicyParams& k0,
                              std::size_t max_iterations, double tolerance) {
  require_stable(inst, k0, "policy_iteration");
  DareSolution out;
  Matrix k = k0.K;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    const Matrix p = solve_p(inst, PolicyParams(k));
    const Matrix next = greedy_gain(inst, p);
    const double change = (next - k).norm() / std::max(1.0, next.norm());
    k = next;
    if (change < tolerance) {
      out.iterations = it;
      out.K_star = PolicyParams(k);
      out.P_star = solve_p(inst, out.K_star);
      out.J_star = average_cost(inst, out.P_star);
      return out;
    }
  }
  throw NoConvergence("policy_iteration: no convergence after " +
                      std::to_string(max_iterations) + " iterations");
}

DareSolution solve_dare(const ProblemInstance& inst, const DareOptions& opts) {
  Matrix p = inst.Q();
  double best_change = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;
  bool converged = false;
  std::size_t it = 0;
  for (it = 1; it <= opts.max_iterations; ++it) {
    const Matrix next = riccati_map(inst, p);
    if (!next.allFinite()) break;
    const double change = (next - p).norm() / std::max(next.norm(), 1e-300);
    p = next;
    if (change < opts.tolerance) {
      converged = true;
      break;
    }
    if (change < best_change) {
      best_change = change;
      since_improvement = 0;
    } else if (++since_improvement > 1000) {
      break;  // oscillating or stalled
    }
  }

  DareSolution out;
  if (converged && p.allFinite()) {
    out.K_star = PolicyParams(greedy_gain(inst, p));
    const double rho = spectral_radius(closed_loop(inst, out.K_star));
    const double residual = (riccati_map(inst, p) - p).norm() / p.norm();
    if (rho < 1.0 && residual < 1e-10) {
      out.P_star = p;
      out.J_star = average_cost(inst, p);
      out.iterations = it;
      return out;
    }
  }

  if (p.allFinite()) {
    const PolicyParams candidate(greedy_gain(inst, p));
    if (spectral_radius(closed_loop(inst, candidate)) < 1.0 - kStabilityMargin) {
      return policy_iteration(inst, candidate);
    }
  }
  throw NoConvergence("solve_dare: Riccati iteration did not converge; the pair (A, B) may "
                      "not be stabilizable");
}

double cost_difference_series(const ProblemInstance& inst, const PolicyParams& k,
                              const PolicyParams& k_prime, const Vector& x0,
                              std::size_t horizon) {
  if (static_cast<std::size_t>(x0.size()) != inst.state_dim()) {
    throw DimensionMismatch("cost_difference_series: x0 must have length d");
  }
  const ExactEvaluation ev = evaluate(inst, k);
  require_stable(inst, k_prime, "cost_difference_series");
  const Matrix m_prime = closed_loop(inst, k_prime);
  const Matrix dk = k_prime.K - k.K;
  const Matrix& b = inst.B();
  const Matrix first = 2.0 * dk.transpose() * ev.E;
  const Matrix second = dk.transpose() * (inst.R() + b.transpose() * ev.P * b) * dk;
  const Matrix advantage = first + second;

  double total = 0.0;
  Vector x = x0;
  for (std::size_t t = 0; t <= horizon; ++t) {
    total += x.dot(advantage * x);
    x = m_prime * x;
  }
  return total;
}

GradientDominance gradient_dominance_bounds(const ProblemInstance& inst,
                                            const PolicyParams& policy,
                                            const DareSolution& optimum) {
  const ExactEvaluation ev = evaluate(inst, policy);
  const Matrix& b = inst.B();
  const double e2 = (ev.E.transpose() * ev.E).trace();
  const Matrix sigma_star = solve_sigma(inst, optimum.K_star);
  GradientDominance out;
  out.lower = min_eigenvalue(inst.Psi()) * e2 /
              operator_norm(inst.R() + b.transpose() * ev.P * b);
  out.gap = ev.J - optimum.J_star;
  out.upper = operator_norm(sigma_star) * e2 / min_eigenvalue(inst.R());
  return out;
}

GradientDominance gradient_dominance_bounds(const ProblemInstance& inst,
                                            const PolicyParams& policy) {
  return gradient_dominance_bounds(inst, policy, solve_dare(inst));
}

Matrix fisher_information(const ProblemInstance& inst, const PolicyParams& policy) {
  if (!(inst.sigma() > 0.0)) {
    throw InvalidArgument("fisher_information: requires sigma > 0");
  }
  const Matrix sigma_k = solve_sigma(inst, policy);
  const auto d = static_cast<Eigen::Index>(inst.state_dim());
  const auto k = static_cast<Eigen::Index>(inst.input_dim());
  const double scale = 1.0 / (inst.sigma() * inst.sigma());
  Matrix out = Matrix::Zero(k * d, k * d);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.block(i * d, i * d, d, d) = scale * sigma_k;
  }
  return out;
}

}  // namespace lqrac
