#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "lqrac/exact_oracle.hpp"
#include "lqrac/lqr_model.hpp"
#include "lqrac/simulator.hpp"

namespace lqrac {

/// Radii of the primal set {0 <= v1 <= j_max, |v2| <= r_theta} and the dual set
/// {|w1| <= j_max, |w2| <= r_omega_effective}.
struct ProjectionSpec {
  double j_max = 0.0;
  double r_theta = 0.0;
  double r_omega_base = 0.0;
  double r_omega_effective = 0.0;
  double c_omega = 0.0;
};

inline constexpr double kDefaultOmegaConstant = 10.0;

/// r_theta = |Q|_F + |R|_F + sqrt(d) / sigma_min(Psi) (|A|_F^2 + |B|_F^2) J0,
/// r_omega_base = C r_theta J0^2 / sigma_min(Q)^2,
/// r_omega_effective = (1 + |K|_F^2)^2 r_omega_base.
ProjectionSpec projection_spec(const ProblemInstance& inst, const PolicyParams& policy,
                               double k0_cost, double c_omega = kDefaultOmegaConstant);

struct ProjectionHit {
  bool first = false;
  bool second = false;
};

/// Euclidean projection onto the primal set: clamp v1 into [0, j_max] and pull v2
/// back onto the r_theta ball.
ProjectionHit project_theta(double& v1, Vector& v2, const ProjectionSpec& spec);
/// Clamp w1 into [-j_max, j_max] and pull w2 back onto the r_omega_effective ball.
ProjectionHit project_omega(double& w1, Vector& w2, const ProjectionSpec& spec);

struct ProjectionCounts {
  std::size_t theta1 = 0;
  std::size_t theta2 = 0;
  std::size_t omega1 = 0;
  std::size_t omega2 = 0;

  std::size_t total() const { return theta1 + theta2 + omega1 + omega2; }
};

/// Primal (vartheta) and dual (omega) iterates with their step-size-weighted
/// running averages sum(alpha_t x_t) / sum(alpha_t).
struct CriticState {
  double vartheta1 = 0.0;
  Vector vartheta2;
  double omega1 = 0.0;
  Vector omega2;

  std::size_t t = 0;
  double alpha_sum = 0.0;
  double avg_vartheta1 = 0.0;
  Vector avg_vartheta2;
  double avg_omega1 = 0.0;
  Vector avg_omega2;
  ProjectionCounts hits;

  /// Zero iterates for feature dimension p.
  static CriticState zeros(std::size_t p);

  // Per-step scratch, kept here so the update loop does not allocate.
  Vector z_, z_next_, phi_, phi_next_, diff_;
};

/// One on-policy GTD update from the transition (x, u, c, x', u'). All right-hand
/// sides read the pre-step state; projections run last, then averaging.
void gtd_step_on_policy(CriticState& state, const TrajectoryStep& step, double alpha,
                        const ProjectionSpec& spec);

/// Off-policy GTD update; `ratio` is tau_K(x', u') for the successor pair.
void gtd_step_off_policy(CriticState& state, const TrajectoryStep& step, double ratio,
                         double alpha, const ProjectionSpec& spec);

/// Gradient of the saddle objective F(vartheta, omega) (or a single-sample
/// estimate of it). The primal descent direction is (theta1, theta2); the dual
/// ascent direction is (omega1, omega2).
struct SaddleGradient {
  double theta1 = 0.0;
  Vector theta2;
  double omega1 = 0.0;
  Vector omega2;
};

SaddleGradient population_gradient(const CriticSystem& sys, double v1, const Vector& v2,
                                   double w1, const Vector& w2);
SaddleGradient sample_gradient(const TrajectoryStep& step, double v1, const Vector& v2,
                               double w1, const Vector& w2);

/// F(v, w) = (v1 - J) w1 + <v1 E[phi] + Xi v2 - b, w2> - |w|^2 / 2.
double saddle_objective(const CriticSystem& sys, double v1, const Vector& v2, double w1,
                        const Vector& w2);

/// max_{w in dual set} F(v_hat, w) - min_{v in primal set} F(v, w_hat), in closed form.
double primal_dual_gap(const CriticSystem& sys, const ProjectionSpec& spec, double v1,
                       const Vector& v2, double w1, const Vector& w2);

struct TraceRow {
  std::size_t t = 0;
  double vartheta1 = 0.0;
  double theta_err = 0.0;
  double omega_norm = 0.0;
  std::size_t proj_hits = 0;
};

struct CriticDiagnostics {
  std::size_t iterations = 0;
  ProjectionCounts hits;
  /// Oracle-based, NaN when oracle diagnostics are disabled.
  double theta_err = 0.0;
  double j_err = 0.0;
  /// |system * vartheta_hat - rhs| with the on-policy population system.
  double residual = 0.0;
  double gap = 0.0;
  double kappa = 0.0;
  std::vector<TraceRow> trace;
};

struct CriticResult {
  double J_hat = 0.0;
  Matrix Theta_hat;
  double vartheta1_hat = 0.0;
  Vector vartheta2_hat;
  double omega1_hat = 0.0;
  Vector omega2_hat;
  CriticDiagnostics diagnostics;
};

inline constexpr double kDefaultCriticAlpha = 0.1;

/// Where vartheta1 starts inside [0, j_max]. The other iterates start at zero.
enum class PrimalStart { Zero, UpperBound };

struct CriticRunConfig {
  std::size_t T = 1;
  /// alpha_t = alpha / sqrt(t).
  double alpha = kDefaultCriticAlpha;
  SimConfig sim;
  /// Record a TraceRow every this many steps (0 = off).
  std::size_t trace_every = 0;
  PrimalStart start = PrimalStart::UpperBound;
  /// Compute theta_err, residual and gap from the exact oracle.
  bool oracle_diagnostics = true;
};

/// On-policy GTD over one unbroken trajectory of pi_K.
CriticResult evaluate_policy(const ProblemInstance& inst, const PolicyParams& policy,
                             const ProjectionSpec& spec, const CriticRunConfig& cfg);

/// Off-policy GTD: the trajectory follows `behavior`, the estimate targets `policy`.
CriticResult evaluate_policy_off_policy(const ProblemInstance& inst, const PolicyParams& policy,
                                        const PolicyParams& behavior, const ProjectionSpec& spec,
                                        const CriticRunConfig& cfg);

/// Columns t,vartheta1,theta_err,omega_norm,proj_hits.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

}  // namespace lqrac
