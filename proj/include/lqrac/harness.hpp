#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lqrac/exact_oracle.hpp"
#include "lqrac/json_io.hpp"
#include "lqrac/natural_actor_critic.hpp"

namespace lqrac {

struct GeneratorSpec {
  std::size_t d = 1;
  std::size_t k = 1;
  /// rho(A) = 1 + stability_margin; the open loop is unstable.
  double stability_margin = 0.2;
  std::uint64_t seed = 0;
  double sigma = 1.0;
};

/// Random A scaled to spectral radius 1 + margin, Gaussian B of full rank,
/// Q = qI and R = rI with q, r in [0.5, 2], Psi = I. Redraws until the DARE is
/// solvable; throws GenerationFailed after 100 attempts.
ProblemInstance generate_instance(const GeneratorSpec& spec);
ProblemInstance generate_instance(std::size_t d, std::size_t k, double stability_margin,
                                  std::uint64_t seed);

/// A stable K0 = K* + zeta Delta with rho(A - BK0) <= 0.95, preferring
/// J(K0) >= 2 J(K*). Uses the model; intended for setting up experiments.
PolicyParams initial_stable_gain(const ProblemInstance& inst, std::uint64_t seed);

inline constexpr double kMaxInitialRadius = 0.95;

struct GradientReport {
  Matrix closed_form;
  Matrix finite_difference;
  Matrix stein_mean;
  Matrix stein_stderr;
  Matrix z;
  double fd_abs_error = 0.0;
  /// |closed - fd|_F / |closed|_F.
  double fd_rel_error = 0.0;
  double max_abs_z = 0.0;
  std::size_t n_mc = 0;
  bool pass = false;
};

/// Closed-form grad J against central differences of the oracle J (step h) and
/// against the Stein estimator -sigma^{-1} eta x^T Q_K(x, -Kx + sigma eta) with x
/// drawn from the stationary law. Pass: relative FD error < 1e-5 and |z| < 3.
GradientReport verify_gradient(const ProblemInstance& inst, const PolicyParams& policy,
                               double h, std::size_t n_mc, std::uint64_t seed);

struct CriticTargetReport {
  Matrix xi_mc, xi_stderr, xi_z;
  Vector b_mc, b_stderr, b_z;
  Vector mean_feature_mc, mean_feature_stderr, mean_feature_z;
  double max_abs_z = 0.0;
  double kappa = 0.0;
  bool ill_conditioned = false;
  /// Relative error of the solved (J, svec Theta) against the oracle; NaN when
  /// the system is ill-conditioned.
  double solve_rel_error = 0.0;
  std::size_t n_mc = 0;
  bool pass = false;
};

/// Monte-Carlo Xi_K, b_K and E[phi] from independent stationary transitions
/// against their closed forms. Pass: every |z| < 5 and, when well conditioned,
/// the linear solve reproduces (J, Theta) to 1e-8 relative.
CriticTargetReport verify_critic_target(const ProblemInstance& inst,
                                        const PolicyParams& policy, std::size_t n_mc,
                                        std::uint64_t seed);

json to_json(const GradientReport& r);
json to_json(const CriticTargetReport& r);

struct AutoGain {};

struct ExperimentConfig {
  std::variant<ProblemInstance, GeneratorSpec> instance = GeneratorSpec{};
  std::variant<AutoGain, PolicyParams> k0 = AutoGain{};
  ActorConfig actor;
  std::size_t trials = 1;
  std::filesystem::path out_dir = "lqrac-out";
  /// A trial succeeds when it stays stable and final gap <= fraction * initial gap.
  double success_gap_fraction = 0.05;
  /// 0 uses the hardware concurrency.
  std::size_t threads = 0;
};

/// Reads the JSON schema documented in the README. Missing keys keep defaults.
ExperimentConfig experiment_config_from_json(const json& j);
json experiment_config_to_json(const ExperimentConfig& cfg);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "LQRAC_OUT_DIR";

struct TrialOutcome {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string csv;
  std::optional<double> initial_gap;
  std::optional<double> final_gap;
  bool stable = false;
  bool success = false;
  std::string error;
};

struct ExperimentSummary {
  std::vector<TrialOutcome> trials;
  double median_final_gap = 0.0;
  double iqr_final_gap = 0.0;
  double success_rate = 0.0;
  double wall_seconds = 0.0;
};

/// Runs cfg.trials independent trials (trial i uses actor seed + i) across
/// threads, writing trial_NNN.csv, summary.json and manifest.json to out_dir.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

json to_json(const ExperimentSummary& s);

/// Library version recorded in manifests.
const char* version();

}  // namespace lqrac
