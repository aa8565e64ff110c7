#include "lqrac/natural_actor_critic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "lqrac/csv.hpp"
#include "lqrac/simulator.hpp"

namespace lqrac {

const char* to_string(CriticMode mode) {
  switch (mode) {
    case CriticMode::Gtd:
      return "gtd";
    case CriticMode::GtdOffPolicy:
      return "gtd-off-policy";
    case CriticMode::Exact:
      return "exact";
  }
  return "unknown";
}

CriticMode critic_mode_from_string(const std::string& name) {
  if (name == "gtd") return CriticMode::Gtd;
  if (name == "gtd-off-policy" || name == "off-policy") return CriticMode::GtdOffPolicy;
  if (name == "exact") return CriticMode::Exact;
  throw InvalidArgument("unknown critic mode '" + name + "'");
}

std::size_t CriticSchedule::at(std::size_t t) const {
  if (T0 == 0) throw InvalidArgument("critic schedule: T0 must be at least 1");
  if (!(growth >= 1.0) || !std::isfinite(growth)) {
    throw InvalidArgument("critic schedule: growth must be finite and >= 1");
  }
  if (growth == 1.0) return T0;
  return static_cast<std::size_t>(
      std::ceil(static_cast<double>(T0) * std::pow(growth, static_cast<double>(t))));
}

PolicyParams natural_gradient_step(const PolicyParams& policy, const Matrix& theta_hat,
                                   double gamma) {
  const auto k = policy.K.rows();
  const auto d = policy.K.cols();
  if (theta_hat.rows() != d + k || theta_hat.cols() != d + k) {
    throw DimensionMismatch("natural_gradient_step: Theta_hat must be (d+k) x (d+k)");
  }
  const Matrix step = theta_hat.bottomRightCorner(k, k) * policy.K - theta_hat.bottomLeftCorner(k, d);
  return PolicyParams(policy.K - gamma * step);
}

double auto_gamma(const ProblemInstance& inst, double j_k0) {
  if (!(j_k0 > 0.0) || !std::isfinite(j_k0)) {
    throw InvalidArgument("auto_gamma: J(K0) must be positive and finite");
  }
  const double b = operator_norm(inst.B());
  return 1.0 / (operator_norm(inst.R()) + b * b * j_k0 / min_eigenvalue(inst.Psi()));
}

double estimate_cost(const ProblemInstance& inst, const PolicyParams& policy,
                     std::size_t samples, std::uint64_t seed, std::uint64_t stream) {
  if (samples == 0) throw InvalidArgument("estimate_cost: samples must be at least 1");
  Rollout sim(inst, policy, SimConfig{seed, stream, init::ExactStationary{}});
  TrajectoryStep step;
  double mean = 0.0;
  for (std::size_t i = 1; i <= samples; ++i) {
    sim.next(step);
    mean += (step.c - mean) / static_cast<double>(i);
  }
  return mean;
}

namespace {

RunRow make_row(std::size_t t, const ExactEvaluation& ev, double j_star) {
  RunRow row;
  row.t = t;
  row.K = ev.K.K;
  row.J = ev.J;
  row.gap = ev.J - j_star;
  row.rho = ev.spectral_radius;
  return row;
}

}  // namespace

RunLog run(const ProblemInstance& inst, const PolicyParams& k0, const ActorConfig& cfg) {
  if (cfg.n_outer == 0) throw InvalidArgument("run: n_outer must be at least 1");
  if (cfg.critic_mode == CriticMode::GtdOffPolicy && !cfg.behavior) {
    throw InvalidArgument("run: off-policy critic requires a behavior gain");
  }
  const auto start = std::chrono::steady_clock::now();
  require_stable(inst, k0, "run");

  RunLog log;
  log.J_star = solve_dare(inst).J_star;
  ExactEvaluation ev = evaluate(inst, k0);
  log.J0 = cfg.model_free_j0 ? estimate_cost(inst, k0, cfg.j0_samples, cfg.seed, 0) : ev.J;
  log.gamma = cfg.gamma ? *cfg.gamma : auto_gamma(inst, log.J0);
  if (!(log.gamma >= 0.0) || !std::isfinite(log.gamma)) {
    throw InvalidArgument("run: gamma must be finite and nonnegative");
  }

  PolicyParams k = k0;
  for (std::size_t t = 0; t < cfg.n_outer; ++t) {
    RunRow row = make_row(t, ev, log.J_star);
    Matrix theta_hat;
    try {
      if (cfg.critic_mode == CriticMode::Exact) {
        theta_hat = ev.Theta;
      } else {
        const double j_max = cfg.model_free_j0 ? log.J0 : std::max(log.J0, ev.J);
        const ProjectionSpec spec = projection_spec(inst, k, j_max, cfg.c_omega);
        CriticRunConfig critic;
        critic.T = cfg.critic_T.at(t);
        critic.alpha = cfg.alpha;
        critic.sim = SimConfig{cfg.seed, t + 1, init::ExactStationary{}};
        critic.oracle_diagnostics = false;
        const CriticResult est =
            cfg.critic_mode == CriticMode::Gtd
                ? evaluate_policy(inst, k, spec, critic)
                : evaluate_policy_off_policy(inst, k, *cfg.behavior, spec, critic);
        theta_hat = est.Theta_hat;
        row.critic_iters = est.diagnostics.iterations;
      }
    } catch (const Error& e) {
      log.rows.push_back(row);
      log.abort = RunAbort{t, e.what(), k};
      break;
    }
    row.theta_err = (theta_hat - ev.Theta).norm();
    log.rows.push_back(row);

    PolicyParams next = natural_gradient_step(k, theta_hat, log.gamma);
    const double rho = spectral_radius(closed_loop(inst, next));
    if (!(rho < 1.0 - kStabilityMargin)) {
      log.abort = RunAbort{t + 1, "unstable iterate, spectral radius " + csv::number(rho), k};
      break;
    }
    k = std::move(next);
    ev = evaluate(inst, k);
  }
  if (!log.abort) log.rows.push_back(make_row(cfg.n_outer, ev, log.J_star));
  log.final_K = log.abort ? log.abort->last_stable : k;
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

void write_run_csv(std::ostream& out, const RunLog& log) {
  out << "t,J,gap,theta_err,rho,critic_iters\n";
  for (const auto& r : log.rows) {
    out << r.t << ',' << csv::number(r.J) << ',' << csv::number(r.gap) << ','
        << csv::number(r.theta_err) << ',' << csv::number(r.rho) << ',' << r.critic_iters
        << '\n';
  }
}

json run_summary(const RunLog& log) {
  json j;
  j["steps"] = log.rows.empty() ? 0 : log.rows.back().t;
  j["initial_gap"] = log.initial_gap();
  j["final_gap"] = log.final_gap();
  j["gamma"] = log.gamma;
  j["J0"] = log.J0;
  j["J_star"] = log.J_star;
  j["final_K"] = matrix_to_json(log.final_K.K);
  j["stable"] = log.stable_throughout();
  j["wall_seconds"] = log.wall_seconds;
  if (log.abort) {
    j["abort"] = {{"t", log.abort->t}, {"reason", log.abort->reason}};
  }
  return j;
}

}  // namespace lqrac
