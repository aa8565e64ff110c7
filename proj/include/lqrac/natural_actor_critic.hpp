#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lqrac/exact_oracle.hpp"
#include "lqrac/gtd_critic.hpp"
#include "lqrac/json_io.hpp"

namespace lqrac {

enum class CriticMode { Gtd, GtdOffPolicy, Exact };

const char* to_string(CriticMode mode);
/// Accepts "gtd", "gtd-off-policy" (or "off-policy") and "exact".
CriticMode critic_mode_from_string(const std::string& name);

/// Critic budget T_t = ceil(T0 * growth^t); growth = 1 is a constant budget.
struct CriticSchedule {
  std::size_t T0 = 100000;
  double growth = 1.0;

  std::size_t at(std::size_t t) const;
};

struct ActorConfig {
  /// Policy step size; empty selects auto_gamma.
  std::optional<double> gamma;
  std::size_t n_outer = 1;
  CriticSchedule critic_T;
  CriticMode critic_mode = CriticMode::Exact;
  /// Behavior gain for CriticMode::GtdOffPolicy.
  std::optional<PolicyParams> behavior;
  std::uint64_t seed = 0;
  double alpha = kDefaultCriticAlpha;
  double c_omega = kDefaultOmegaConstant;
  /// Estimate J(K0) from a trajectory average instead of the oracle.
  bool model_free_j0 = false;
  std::size_t j0_samples = 100000;
};

struct RunRow {
  std::size_t t = 0;
  Matrix K;
  double J = 0.0;
  double gap = 0.0;
  /// |Theta_hat - Theta_K|_F of the critic estimate used for the step from K_t.
  double theta_err = 0.0;
  double rho = 0.0;
  std::size_t critic_iters = 0;
};

/// Set when a run stops early. `last_stable` is the last iterate with rho < 1.
struct RunAbort {
  std::size_t t = 0;
  std::string reason;
  PolicyParams last_stable;
};

/// Rows t = 0..N for K_0..K_N. The last row has no critic run attached.
struct RunLog {
  std::vector<RunRow> rows;
  PolicyParams final_K{Matrix()};
  double gamma = 0.0;
  double J0 = 0.0;
  double J_star = 0.0;
  std::optional<RunAbort> abort;
  double wall_seconds = 0.0;

  bool stable_throughout() const { return !abort.has_value(); }
  double initial_gap() const { return rows.empty() ? 0.0 : rows.front().gap; }
  double final_gap() const { return rows.empty() ? 0.0 : rows.back().gap; }
};

/// K - gamma (Theta22 K - Theta21).
PolicyParams natural_gradient_step(const PolicyParams& policy, const Matrix& theta_hat,
                                   double gamma);

/// 1 / (|R| + |B|^2 J(K0) / sigma_min(Psi)).
double auto_gamma(const ProblemInstance& inst, double j_k0);

/// Time-average cost over `samples` steps of pi_K started from its stationary law.
double estimate_cost(const ProblemInstance& inst, const PolicyParams& policy,
                     std::size_t samples, std::uint64_t seed, std::uint64_t stream);

/// Alternates a critic estimate of Theta_{K_t} with the natural
/// gradient actor step. Throws UnstablePolicy if K0 is unstable; later
/// instability or critic failure ends the run with RunLog::abort set.
RunLog run(const ProblemInstance& inst, const PolicyParams& k0, const ActorConfig& cfg);

/// Header t,J,gap,theta_err,rho,critic_iters.
void write_run_csv(std::ostream& out, const RunLog& log);

/// Final gap, step count, wall time and abort details.
json run_summary(const RunLog& log);

}  // namespace lqrac
