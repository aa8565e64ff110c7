#include "lqrac/gtd_critic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "lqrac/csv.hpp"

namespace lqrac {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool clip_to_ball(Vector& v, double radius) {
  const double norm = v.norm();
  if (norm > radius) {
    v *= radius / norm;
    return true;
  }
  return false;
}

void check_finite(const CriticState& s) {
  if (!std::isfinite(s.vartheta1)) throw Divergence("vartheta1", s.t);
  if (!s.vartheta2.allFinite()) throw Divergence("vartheta2", s.t);
  if (!std::isfinite(s.omega1)) throw Divergence("omega1", s.t);
  if (!s.omega2.allFinite()) throw Divergence("omega2", s.t);
}

void load_features(CriticState& s, const TrajectoryStep& step) {
  const auto d = step.x.size();
  const auto k = step.u.size();
  if (s.z_.size() != d + k) {
    s.z_.resize(d + k);
    s.z_next_.resize(d + k);
  }
  s.z_.head(d) = step.x;
  s.z_.tail(k) = step.u;
  s.z_next_.head(d) = step.x_next;
  s.z_next_.tail(k) = step.u_next;
  feature_into(s.z_, s.phi_);
  feature_into(s.z_next_, s.phi_next_);
  if (s.phi_.size() != s.vartheta2.size()) {
    throw DimensionMismatch("gtd step: transition does not match the critic's feature dimension");
  }
}

void finish_step(CriticState& s, double alpha, const ProjectionSpec& spec) {
  const ProjectionHit th = project_theta(s.vartheta1, s.vartheta2, spec);
  const ProjectionHit om = project_omega(s.omega1, s.omega2, spec);
  s.hits.theta1 += th.first;
  s.hits.theta2 += th.second;
  s.hits.omega1 += om.first;
  s.hits.omega2 += om.second;
  ++s.t;
  check_finite(s);

  s.alpha_sum += alpha;
  const double w = alpha / s.alpha_sum;
  s.avg_vartheta1 += w * (s.vartheta1 - s.avg_vartheta1);
  s.avg_vartheta2 += w * (s.vartheta2 - s.avg_vartheta2);
  s.avg_omega1 += w * (s.omega1 - s.avg_omega1);
  s.avg_omega2 += w * (s.omega2 - s.avg_omega2);
}

void require_step_size(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("gtd step: alpha must be positive and finite");
  }
}

}  // namespace

ProjectionSpec projection_spec(const ProblemInstance& inst, const PolicyParams& policy,
                               double k0_cost, double c_omega) {
  if (!(k0_cost > 0.0) || !std::isfinite(k0_cost)) {
    throw InvalidArgument("projection_spec: J(K0) must be positive and finite");
  }
  if (!(c_omega > 0.0) || !std::isfinite(c_omega)) {
    throw InvalidArgument("projection_spec: c_omega must be positive and finite");
  }
  ProjectionSpec spec;
  spec.j_max = k0_cost;
  spec.c_omega = c_omega;
  const double d = static_cast<double>(inst.state_dim());
  spec.r_theta = inst.Q().norm() + inst.R().norm() +
                 std::sqrt(d) / min_eigenvalue(inst.Psi()) *
                     (inst.A().squaredNorm() + inst.B().squaredNorm()) * k0_cost;
  const double q_min = min_eigenvalue(inst.Q());
  spec.r_omega_base = c_omega * spec.r_theta * k0_cost * k0_cost / (q_min * q_min);
  const double scale = 1.0 + policy.K.squaredNorm();
  spec.r_omega_effective = scale * scale * spec.r_omega_base;
  return spec;
}

ProjectionHit project_theta(double& v1, Vector& v2, const ProjectionSpec& spec) {
  ProjectionHit hit;
  if (v1 < 0.0) {
    v1 = 0.0;
    hit.first = true;
  } else if (v1 > spec.j_max) {
    v1 = spec.j_max;
    hit.first = true;
  }
  hit.second = clip_to_ball(v2, spec.r_theta);
  return hit;
}

ProjectionHit project_omega(double& w1, Vector& w2, const ProjectionSpec& spec) {
  ProjectionHit hit;
  if (std::abs(w1) > spec.j_max) {
    w1 = std::copysign(spec.j_max, w1);
    hit.first = true;
  }
  hit.second = clip_to_ball(w2, spec.r_omega_effective);
  return hit;
}

CriticState CriticState::zeros(std::size_t p) {
  CriticState s;
  const auto n = static_cast<Eigen::Index>(p);
  s.vartheta2 = Vector::Zero(n);
  s.omega2 = Vector::Zero(n);
  s.avg_vartheta2 = Vector::Zero(n);
  s.avg_omega2 = Vector::Zero(n);
  s.diff_.resize(n);
  return s;
}

void gtd_step_on_policy(CriticState& s, const TrajectoryStep& step, double alpha,
                        const ProjectionSpec& spec) {
  require_step_size(alpha);
  load_features(s, step);
  s.diff_ = s.phi_ - s.phi_next_;

  const double v1 = s.vartheta1;
  const double w1 = s.omega1;
  const double phi_w2 = s.phi_.dot(s.omega2);
  const double td_error = v1 - step.c + s.diff_.dot(s.vartheta2);

  s.vartheta1 = v1 - alpha * (w1 + phi_w2);
  s.vartheta2 -= (alpha * phi_w2) * s.diff_;
  s.omega1 = (1.0 - alpha) * w1 + alpha * (v1 - step.c);
  s.omega2 *= (1.0 - alpha);
  s.omega2 += (alpha * td_error) * s.phi_;

  finish_step(s, alpha, spec);
}

void gtd_step_off_policy(CriticState& s, const TrajectoryStep& step, double ratio, double alpha,
                         const ProjectionSpec& spec) {
  require_step_size(alpha);
  if (!std::isfinite(ratio)) throw Divergence("ratio", s.t);
  load_features(s, step);
  s.diff_ = s.phi_ - ratio * s.phi_next_;

  const double v1 = s.vartheta1;
  const double w1 = s.omega1;
  const double phi_w2 = s.phi_.dot(s.omega2);
  // Here the TD error coincides with the first residual v1 + [phi - tau phi']^T v2 - c.
  const double td_error = v1 - step.c + s.diff_.dot(s.vartheta2);

  s.vartheta1 = v1 - alpha * (w1 + phi_w2);
  s.vartheta2 -= (alpha * (phi_w2 + w1)) * s.diff_;
  s.omega1 = (1.0 - alpha) * w1 + alpha * td_error;
  s.omega2 *= (1.0 - alpha);
  s.omega2 += (alpha * td_error) * s.phi_;

  finish_step(s, alpha, spec);
}

SaddleGradient population_gradient(const CriticSystem& sys, double v1, const Vector& v2,
                                   double w1, const Vector& w2) {
  SaddleGradient g;
  g.theta1 = w1 + sys.mean_feature.dot(w2);
  g.theta2 = sys.Xi.transpose() * w2;
  g.omega1 = v1 - sys.J - w1;
  g.omega2 = v1 * sys.mean_feature + sys.Xi * v2 - sys.b - w2;
  return g;
}

SaddleGradient sample_gradient(const TrajectoryStep& step, double v1, const Vector& v2,
                               double w1, const Vector& w2) {
  Vector z(step.x.size() + step.u.size());
  Vector z_next(z.size());
  z << step.x, step.u;
  z_next << step.x_next, step.u_next;
  Vector phi, phi_next;
  feature_into(z, phi);
  feature_into(z_next, phi_next);
  const Vector diff = phi - phi_next;
  const double phi_w2 = phi.dot(w2);
  const double td_error = v1 - step.c + diff.dot(v2);
  SaddleGradient g;
  g.theta1 = w1 + phi_w2;
  g.theta2 = phi_w2 * diff;
  g.omega1 = v1 - step.c - w1;
  g.omega2 = td_error * phi - w2;
  return g;
}

double saddle_objective(const CriticSystem& sys, double v1, const Vector& v2, double w1,
                        const Vector& w2) {
  const Vector r2 = v1 * sys.mean_feature + sys.Xi * v2 - sys.b;
  return (v1 - sys.J) * w1 + r2.dot(w2) - 0.5 * (w1 * w1 + w2.squaredNorm());
}

double primal_dual_gap(const CriticSystem& sys, const ProjectionSpec& spec, double v1,
                       const Vector& v2, double w1, const Vector& w2) {
  // Inner max over the dual set: F is separable, concave, and maximized by the
  // projection of the residual onto the set.
  const double r1 = v1 - sys.J;
  const Vector r2 = v1 * sys.mean_feature + sys.Xi * v2 - sys.b;
  const double best_w1 = std::clamp(r1, -spec.j_max, spec.j_max);
  Vector best_w2 = r2;
  clip_to_ball(best_w2, spec.r_omega_effective);
  const double upper = r1 * best_w1 - 0.5 * best_w1 * best_w1 + r2.dot(best_w2) -
                       0.5 * best_w2.squaredNorm();

  // Inner min over the primal set: F is affine in vartheta.
  const double coef1 = w1 + sys.mean_feature.dot(w2);
  const Vector coef2 = sys.Xi.transpose() * w2;
  const double best_v1 = coef1 > 0.0 ? 0.0 : spec.j_max;
  const double lower = best_v1 * coef1 - spec.r_theta * coef2.norm() - sys.J * w1 -
                       sys.b.dot(w2) - 0.5 * (w1 * w1 + w2.squaredNorm());
  return upper - lower;
}

namespace {

CriticResult finalize(const CriticState& state, const std::optional<CriticSystem>& sys,
                      const std::optional<Matrix>& theta_k, const ProjectionSpec& spec,
                      std::vector<TraceRow> trace) {
  CriticResult out;
  out.vartheta1_hat = state.avg_vartheta1;
  out.vartheta2_hat = state.avg_vartheta2;
  out.omega1_hat = state.avg_omega1;
  out.omega2_hat = state.avg_omega2;
  out.J_hat = state.avg_vartheta1;
  out.Theta_hat = smat(state.avg_vartheta2);

  CriticDiagnostics& diag = out.diagnostics;
  diag.iterations = state.t;
  diag.hits = state.hits;
  diag.trace = std::move(trace);
  diag.theta_err = theta_k ? (out.Theta_hat - *theta_k).norm() : kNaN;
  diag.j_err = sys ? std::abs(out.J_hat - sys->J) : kNaN;
  if (sys) {
    Vector v(out.vartheta2_hat.size() + 1);
    v << out.vartheta1_hat, out.vartheta2_hat;
    diag.residual = (sys->system * v - sys->rhs).norm();
    diag.gap = primal_dual_gap(*sys, spec, out.vartheta1_hat, out.vartheta2_hat,
                               out.omega1_hat, out.omega2_hat);
    diag.kappa = sys->kappa;
  } else {
    diag.residual = kNaN;
    diag.gap = kNaN;
    diag.kappa = kNaN;
  }
  return out;
}

template <typename StepFn>
CriticResult run_critic(const ProblemInstance& inst, const PolicyParams& policy,
                        const ProjectionSpec& spec, const CriticRunConfig& cfg,
                        bool on_policy_diagnostics, StepFn&& step_fn) {
  if (cfg.T == 0) throw InvalidArgument("evaluate_policy: T must be at least 1");
  if (!(cfg.alpha > 0.0)) throw InvalidArgument("evaluate_policy: alpha must be positive");
  require_stable(inst, policy, "evaluate_policy");

  std::optional<CriticSystem> sys;
  std::optional<Matrix> theta_k;
  if (cfg.oracle_diagnostics) {
    const ExactEvaluation ev = evaluate(inst, policy);
    theta_k = ev.Theta;
    if (on_policy_diagnostics) sys = critic_system(inst, policy);
  }

  CriticState state = CriticState::zeros(inst.feature_dim());
  if (cfg.start == PrimalStart::UpperBound) state.vartheta1 = spec.j_max;
  std::vector<TraceRow> trace;
  TrajectoryStep step;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    const double alpha_t = cfg.alpha / std::sqrt(static_cast<double>(t));
    step_fn(state, step, alpha_t);
    if (cfg.trace_every != 0 && t % cfg.trace_every == 0) {
      TraceRow row;
      row.t = t;
      row.vartheta1 = state.avg_vartheta1;
      row.theta_err = theta_k ? (smat(state.avg_vartheta2) - *theta_k).norm() : kNaN;
      row.omega_norm = std::sqrt(state.omega1 * state.omega1 + state.omega2.squaredNorm());
      row.proj_hits = state.hits.total();
      trace.push_back(row);
    }
  }
  return finalize(state, sys, theta_k, spec, std::move(trace));
}

}  // namespace

CriticResult evaluate_policy(const ProblemInstance& inst, const PolicyParams& policy,
                             const ProjectionSpec& spec, const CriticRunConfig& cfg) {
  require_stable(inst, policy, "evaluate_policy");
  Rollout sim(inst, policy, cfg.sim);
  return run_critic(inst, policy, spec, cfg, true,
                    [&](CriticState& state, TrajectoryStep& step, double alpha) {
                      sim.next(step);
                      gtd_step_on_policy(state, step, alpha, spec);
                    });
}

CriticResult evaluate_policy_off_policy(const ProblemInstance& inst, const PolicyParams& policy,
                                        const PolicyParams& behavior, const ProjectionSpec& spec,
                                        const CriticRunConfig& cfg) {
  require_stable(inst, behavior, "evaluate_policy_off_policy");
  BehaviorRollout sim(inst, behavior, policy, cfg.sim);
  return run_critic(inst, policy, spec, cfg, false,
                    [&](CriticState& state, TrajectoryStep& step, double alpha) {
                      const double ratio = sim.next(step);
                      gtd_step_off_policy(state, step, ratio, alpha, spec);
                    });
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "t,vartheta1,theta_err,omega_norm,proj_hits\n";
  for (const auto& r : rows) {
    out << r.t << ',' << csv::number(r.vartheta1) << ',' << csv::number(r.theta_err) << ','
        << csv::number(r.omega_norm) << ',' << r.proj_hits << '\n';
  }
}

}  // namespace lqrac
