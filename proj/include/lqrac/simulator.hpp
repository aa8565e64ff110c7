#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <variant>
#include <vector>

#include "lqrac/lqr_model.hpp"

namespace lqrac {

/// States with norm above this abort the rollout with Overflow.
inline constexpr double kStateOverflow = 1e12;
/// Importance ratios above this abort with DistributionMismatch.
inline constexpr double kRatioOverflow = 1e12;

/// One stream of pseudo-random numbers. A stream is a std::mt19937_64 seeded
/// through std::seed_seq from the 64-bit (seed, stream) pair, so distinct stream
/// indices under one seed give independent, reproducible sequences.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  double normal() { return normal_(engine_); }
  void fill_normal(Eigen::Ref<Vector> out);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Draws from N(0, C) through a factor F with F F^T = C: lower Cholesky when it
/// succeeds, otherwise an eigendecomposition with negative eigenvalues clamped.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& covariance);

  void sample(RandomStream& rng, Eigen::Ref<Vector> out);
  Vector sample(RandomStream& rng);
  const Matrix& factor() const { return factor_; }

 private:
  Matrix factor_;
  Vector scratch_;
};

struct TrajectoryStep {
  Vector x;
  Vector u;
  double c = 0.0;
  Vector x_next;
  Vector u_next;
};

namespace init {
struct ExactStationary {};
struct BurnIn {
  std::size_t n_steps = 0;
};
struct FromState {
  Vector x0;
};
}  // namespace init

using InitMode = std::variant<init::ExactStationary, init::BurnIn, init::FromState>;

struct SimConfig {
  std::uint64_t seed = 0;
  /// Rollout index within the seed; each index is an independent stream.
  std::uint64_t stream = 0;
  InitMode init = init::ExactStationary{};
};

/// ceil(20 / (1 - rho(A - BK))), used when exact stationary sampling is not wanted.
std::size_t default_burn_in(const ProblemInstance& inst, const Matrix& k);

/// Closed-loop trajectory under u = -Kx + sigma * eta, produced one step at a time.
/// Consecutive steps share their middle state-action pair.
class Rollout {
 public:
  Rollout(const ProblemInstance& inst, const PolicyParams& policy, const SimConfig& cfg);

  /// Advances one step, writing into `step` without reallocating its buffers.
  void next(TrajectoryStep& step);
  TrajectoryStep next();

  const Vector& state() const { return x_; }
  const Vector& action() const { return u_; }
  std::size_t steps_taken() const { return t_; }

 private:
  void advance_into(Vector& x_next, Vector& u_next);

  Matrix a_, b_, q_, r_, k_;
  double sigma_;
  GaussianSampler process_noise_;
  RandomStream rng_;
  Vector x_, u_, eta_, scratch_;
  std::size_t t_ = 0;
};

/// T consecutive steps of a fresh rollout.
std::vector<TrajectoryStep> rollout(const ProblemInstance& inst, const PolicyParams& policy,
                                    const SimConfig& cfg, std::size_t T);

/// pi_K(u | x) / pi_b(u | x) = exp[(|u + K_b x|^2 - |u + K x|^2) / (2 sigma^2)].
/// Throws DistributionMismatch when the ratio is non-finite or exceeds kRatioOverflow.
double importance_ratio(const Matrix& target, const Matrix& behavior, double sigma,
                        const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u);

/// Trajectory under a behavior policy, annotated with the importance ratio of the
/// target policy evaluated at each step's successor pair (x_next, u_next).
class BehaviorRollout {
 public:
  BehaviorRollout(const ProblemInstance& inst, const PolicyParams& behavior,
                  const PolicyParams& target, const SimConfig& cfg);

  /// Returns the ratio tau_K(x_next, u_next).
  double next(TrajectoryStep& step);

 private:
  Rollout base_;
  Matrix target_, behavior_;
  double sigma_;
};

struct WeightedStep {
  TrajectoryStep step;
  double ratio = 1.0;
};

std::vector<WeightedStep> rollout_behavior(const ProblemInstance& inst,
                                           const PolicyParams& behavior,
                                           const PolicyParams& target, const SimConfig& cfg,
                                           std::size_t T);

/// CSV with header x_0..x_{d-1},u_0..u_{k-1},c, one row per step.
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryStep>& steps);

}  // namespace lqrac
