#include "lqrac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "lqrac/simulator.hpp"

#ifndef LQRAC_VERSION
#define LQRAC_VERSION "unknown"
#endif

namespace lqrac {

const char* version() { return LQRAC_VERSION; }

namespace {

constexpr std::size_t kMaxAttempts = 100;
constexpr std::uint64_t kGeneratorStreamBase = 0x67656e00;
constexpr std::uint64_t kGainStreamBase = 0x6b300000;
constexpr std::uint64_t kSteinStream = 0x7374;
constexpr std::uint64_t kCriticTargetStream = 0x7869;

/// Running mean and variance of a fixed-shape array of statistics.
class Moments {
 public:
  explicit Moments(Eigen::Index n) : mean_(Vector::Zero(n)), m2_(Vector::Zero(n)) {}

  void add(const Eigen::Ref<const Vector>& sample) {
    ++n_;
    delta_ = sample - mean_;
    mean_ += delta_ / static_cast<double>(n_);
    m2_.array() += delta_.array() * (sample - mean_).array();
  }

  const Vector& mean() const { return mean_; }
  Vector stderr_of_mean() const {
    const double n = static_cast<double>(n_);
    return (m2_ / (n - 1.0) / n).cwiseSqrt();
  }

 private:
  std::size_t n_ = 0;
  Vector mean_, m2_, delta_;
};

double z_score(double estimate, double exact, double se) {
  const double diff = estimate - exact;
  if (se > 0.0) return diff / se;
  return std::abs(diff) <= 1e-12 * (1.0 + std::abs(exact))
             ? 0.0
             : std::numeric_limits<double>::infinity();
}

Vector z_scores(const Vector& estimate, const Vector& exact, const Vector& se) {
  Vector z(estimate.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = z_score(estimate(i), exact(i), se(i));
  return z;
}

Matrix reshape(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Matrix gaussian_matrix(RandomStream& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

ProblemInstance generate_instance(const GeneratorSpec& spec) {
  if (spec.d == 0 || spec.k == 0) throw InvalidArgument("generate_instance: d and k must be >= 1");
  if (!(spec.stability_margin > 0.0 && spec.stability_margin < 1.0)) {
    throw InvalidArgument("generate_instance: stability_margin must lie in (0, 1)");
  }
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw InvalidArgument("generate_instance: sigma must be finite and nonnegative");
  }
  const auto d = static_cast<Eigen::Index>(spec.d);
  const auto k = static_cast<Eigen::Index>(spec.k);
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    RandomStream rng(spec.seed, kGeneratorStreamBase + attempt);
    Matrix a = gaussian_matrix(rng, d, d);
    const double rho = spectral_radius(a);
    if (!(rho > 1e-8)) continue;
    a *= (1.0 + spec.stability_margin) / rho;

    const Matrix b = gaussian_matrix(rng, d, k);
    if (Eigen::FullPivLU<Matrix>(b).rank() < std::min(d, k)) continue;

    std::uniform_real_distribution<double> scale(0.5, 2.0);
    const double q = scale(rng.engine());
    const double r = scale(rng.engine());
    try {
      ProblemInstance inst(a, b, q * Matrix::Identity(d, d), r * Matrix::Identity(k, k),
                           Matrix::Identity(d, d), spec.sigma);
      solve_dare(inst);
      return inst;
    } catch (const Error&) {
    }
  }
  throw GenerationFailed("generate_instance: no stabilizable instance after 100 attempts");
}

ProblemInstance generate_instance(std::size_t d, std::size_t k, double stability_margin,
                                  std::uint64_t seed) {
  return generate_instance(GeneratorSpec{d, k, stability_margin, seed, 1.0});
}

PolicyParams initial_stable_gain(const ProblemInstance& inst, std::uint64_t seed) {
  const DareSolution opt = solve_dare(inst);
  const Matrix& k_star = opt.K_star.K;
  const double zeta0 = 4.0 * (1.0 + k_star.norm());

  std::optional<PolicyParams> fallback;
  double fallback_cost = -1.0;
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    RandomStream rng(seed, kGainStreamBase + attempt);
    Matrix delta = gaussian_matrix(rng, k_star.rows(), k_star.cols());
    if (!(delta.norm() > 0.0)) continue;
    delta /= delta.norm();

    // Scan zeta downwards and keep the smallest perturbation that still doubles J.
    std::optional<PolicyParams> best;
    for (int i = 0; i < 80; ++i) {
      const double zeta = zeta0 * std::pow(0.8, i);
      PolicyParams candidate(k_star + zeta * delta);
      const double rho = spectral_radius(closed_loop(inst, candidate));
      if (rho > kMaxInitialRadius) continue;
      const double j = evaluate(inst, candidate).J;
      if (j >= 2.0 * opt.J_star) {
        best = candidate;
      } else {
        if (j > fallback_cost) {
          fallback = candidate;
          fallback_cost = j;
        }
        if (best) break;
      }
    }
    if (best) return *best;
    if (fallback) return *fallback;
  }
  throw GenerationFailed("initial_stable_gain: no perturbation of K* reaches rho <= 0.95");
}

GradientReport verify_gradient(const ProblemInstance& inst, const PolicyParams& policy,
                               double h, std::size_t n_mc, std::uint64_t seed) {
  if (!(h > 0.0)) throw InvalidArgument("verify_gradient: h must be positive");
  if (n_mc < 2) throw InvalidArgument("verify_gradient: n_mc must be at least 2");
  if (!(inst.sigma() > 0.0)) throw InvalidArgument("verify_gradient: requires sigma > 0");
  const ExactEvaluation ev = evaluate(inst, policy);
  const auto k = policy.K.rows();
  const auto d = policy.K.cols();

  GradientReport r;
  r.n_mc = n_mc;
  r.closed_form = ev.grad;
  r.finite_difference.resize(k, d);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Matrix plus = policy.K, minus = policy.K;
      plus(i, j) += h;
      minus(i, j) -= h;
      r.finite_difference(i, j) =
          (evaluate(inst, PolicyParams(plus)).J - evaluate(inst, PolicyParams(minus)).J) /
          (2.0 * h);
    }
  }
  r.fd_abs_error = (r.closed_form - r.finite_difference).norm();
  r.fd_rel_error = r.fd_abs_error / std::max(r.closed_form.norm(), 1e-300);

  const double sigma = inst.sigma();
  const double offset = sigma * sigma * (inst.R() + ev.P * inst.B() * inst.B().transpose()).trace() +
                        (ev.P * ev.Sigma).trace();
  RandomStream rng(seed, kSteinStream);
  GaussianSampler stationary(ev.Sigma);
  Vector x(d), eta(k), z(d + k), g(k * d);
  Moments moments(k * d);
  for (std::size_t n = 0; n < n_mc; ++n) {
    stationary.sample(rng, x);
    rng.fill_normal(eta);
    z.head(d) = x;
    z.tail(k).noalias() = -policy.K * x;
    z.tail(k) += sigma * eta;
    const double q_value = z.dot(ev.Theta * z) - offset;
    Eigen::Map<Matrix>(g.data(), k, d).noalias() = (-q_value / sigma) * eta * x.transpose();
    moments.add(g);
  }
  r.stein_mean = reshape(moments.mean(), k, d);
  r.stein_stderr = reshape(moments.stderr_of_mean(), k, d);
  const Vector closed = Eigen::Map<const Vector>(ev.grad.data(), k * d);
  const Vector zv = z_scores(moments.mean(), closed, moments.stderr_of_mean());
  r.z = reshape(zv, k, d);
  r.max_abs_z = max_abs(zv);
  r.pass = r.fd_rel_error < 1e-5 && r.max_abs_z < 3.0;
  return r;
}

CriticTargetReport verify_critic_target(const ProblemInstance& inst,
                                        const PolicyParams& policy, std::size_t n_mc,
                                        std::uint64_t seed) {
  if (n_mc < 2) throw InvalidArgument("verify_critic_target: n_mc must be at least 2");
  require_stable(inst, policy, "verify_critic_target");
  const CriticSystem sys = critic_system(inst, policy);
  const Matrix sigma_k = solve_sigma(inst, policy);
  const auto d = inst.state_dim();
  const auto k = inst.input_dim();
  const auto p = static_cast<Eigen::Index>(inst.feature_dim());
  const double sigma = inst.sigma();

  RandomStream rng(seed, kCriticTargetStream);
  GaussianSampler stationary(sigma_k);
  GaussianSampler process(inst.Psi());
  Vector x(d), w(d), eta(k), z(d + k), z_next(d + k), phi, phi_next;
  Moments xi_moments(p * p), b_moments(p), phi_moments(p);
  Vector xi_sample(p * p);
  for (std::size_t n = 0; n < n_mc; ++n) {
    stationary.sample(rng, x);
    rng.fill_normal(eta);
    z.head(d) = x;
    z.tail(k).noalias() = -policy.K * x;
    z.tail(k) += sigma * eta;
    process.sample(rng, w);
    z_next.head(d).noalias() = inst.A() * z.head(d) + inst.B() * z.tail(k);
    z_next.head(d) += w;
    rng.fill_normal(eta);
    z_next.tail(k).noalias() = -policy.K * z_next.head(d);
    z_next.tail(k) += sigma * eta;

    feature_into(z, phi);
    feature_into(z_next, phi_next);
    const double c = cost(inst, z.head(d), z.tail(k));
    Eigen::Map<Matrix>(xi_sample.data(), p, p).noalias() = phi * (phi - phi_next).transpose();
    xi_moments.add(xi_sample);
    b_moments.add(c * phi);
    phi_moments.add(phi);
  }

  CriticTargetReport r;
  r.n_mc = n_mc;
  const Vector xi_exact = Eigen::Map<const Vector>(sys.Xi.data(), p * p);
  const Vector xi_z = z_scores(xi_moments.mean(), xi_exact, xi_moments.stderr_of_mean());
  r.xi_mc = reshape(xi_moments.mean(), p, p);
  r.xi_stderr = reshape(xi_moments.stderr_of_mean(), p, p);
  r.xi_z = reshape(xi_z, p, p);
  r.b_mc = b_moments.mean();
  r.b_stderr = b_moments.stderr_of_mean();
  r.b_z = z_scores(r.b_mc, sys.b, r.b_stderr);
  r.mean_feature_mc = phi_moments.mean();
  r.mean_feature_stderr = phi_moments.stderr_of_mean();
  r.mean_feature_z = z_scores(r.mean_feature_mc, sys.mean_feature, r.mean_feature_stderr);
  r.max_abs_z = std::max({max_abs(xi_z), max_abs(r.b_z), max_abs(r.mean_feature_z)});
  r.kappa = sys.kappa;
  r.ill_conditioned = sys.kappa < kIllConditionedThreshold;

  if (r.ill_conditioned) {
    r.solve_rel_error = std::numeric_limits<double>::quiet_NaN();
  } else {
    const CriticTarget target = xi_matrix(inst, policy);
    const ExactEvaluation ev = evaluate(inst, policy);
    Vector exact(p + 1);
    exact << ev.J, svec(ev.Theta);
    r.solve_rel_error = (target.vartheta_star - exact).norm() / exact.norm();
  }
  r.pass = r.max_abs_z < 5.0 && (r.ill_conditioned || r.solve_rel_error < 1e-8);
  return r;
}

json to_json(const GradientReport& r) {
  return {{"closed_form", matrix_to_json(r.closed_form)},
          {"finite_difference", matrix_to_json(r.finite_difference)},
          {"stein_mean", matrix_to_json(r.stein_mean)},
          {"stein_stderr", matrix_to_json(r.stein_stderr)},
          {"z", matrix_to_json(r.z)},
          {"fd_abs_error", r.fd_abs_error},
          {"fd_rel_error", r.fd_rel_error},
          {"max_abs_z", r.max_abs_z},
          {"n_mc", r.n_mc},
          {"pass", r.pass}};
}

json to_json(const CriticTargetReport& r) {
  json j = {{"xi_mc", matrix_to_json(r.xi_mc)},
            {"xi_z", matrix_to_json(r.xi_z)},
            {"b_mc", vector_to_json(r.b_mc)},
            {"b_z", vector_to_json(r.b_z)},
            {"mean_feature_mc", vector_to_json(r.mean_feature_mc)},
            {"mean_feature_z", vector_to_json(r.mean_feature_z)},
            {"max_abs_z", r.max_abs_z},
            {"kappa", r.kappa},
            {"ill_conditioned", r.ill_conditioned},
            {"n_mc", r.n_mc},
            {"pass", r.pass}};
  if (std::isfinite(r.solve_rel_error)) {
    j["solve_rel_error"] = r.solve_rel_error;
  } else {
    j["solve_rel_error"] = nullptr;
  }
  return j;
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw InvalidArgument(std::string(where) + ": unknown key '" + item.key() + "'");
    }
  }
}

GeneratorSpec generator_from_json(const json& j) {
  reject_unknown_keys(j, {"d", "k", "stability_margin", "seed", "sigma"}, "instance.generate");
  GeneratorSpec g;
  g.d = j.value("d", g.d);
  g.k = j.value("k", g.k);
  g.stability_margin = j.value("stability_margin", g.stability_margin);
  g.seed = j.value("seed", g.seed);
  g.sigma = j.value("sigma", g.sigma);
  if (g.d == 0 || g.k == 0) throw InvalidArgument("instance.generate: d and k must be >= 1");
  if (!(g.stability_margin > 0.0 && g.stability_margin < 1.0)) {
    throw InvalidArgument("instance.generate: stability_margin must lie in (0, 1)");
  }
  return g;
}

void actor_from_json(const json& j, ActorConfig& a) {
  reject_unknown_keys(j,
                      {"gamma", "n_outer", "critic_T", "mode", "behavior", "seed", "alpha",
                       "c_omega", "model_free_j0", "j0_samples"},
                      "actor");
  if (j.contains("gamma")) {
    const json& g = j["gamma"];
    if (g.is_string() && g.get<std::string>() == "auto") {
      a.gamma.reset();
    } else if (g.is_number()) {
      a.gamma = g.get<double>();
    } else {
      throw InvalidArgument("actor.gamma: expected a number or \"auto\"");
    }
  }
  a.n_outer = j.value("n_outer", a.n_outer);
  if (j.contains("critic_T")) {
    const json& t = j["critic_T"];
    if (t.is_number_integer()) {
      a.critic_T = CriticSchedule{t.get<std::size_t>(), 1.0};
    } else {
      reject_unknown_keys(t, {"T0", "growth"}, "actor.critic_T");
      a.critic_T.T0 = t.value("T0", a.critic_T.T0);
      a.critic_T.growth = t.value("growth", 1.0);
    }
  }
  if (j.contains("mode")) a.critic_mode = critic_mode_from_string(j["mode"].get<std::string>());
  if (j.contains("behavior")) a.behavior = PolicyParams(matrix_from_json(j["behavior"], "actor.behavior"));
  a.seed = j.value("seed", a.seed);
  a.alpha = j.value("alpha", a.alpha);
  a.c_omega = j.value("c_omega", a.c_omega);
  a.model_free_j0 = j.value("model_free_j0", a.model_free_j0);
  a.j0_samples = j.value("j0_samples", a.j0_samples);

  if (a.n_outer == 0) throw InvalidArgument("actor.n_outer must be >= 1");
  if (a.critic_T.T0 == 0) throw InvalidArgument("actor.critic_T must be >= 1");
  if (!(a.critic_T.growth >= 1.0)) throw InvalidArgument("actor.critic_T.growth must be >= 1");
  if (!(a.alpha > 0.0)) throw InvalidArgument("actor.alpha must be positive");
  if (!(a.c_omega > 0.0)) throw InvalidArgument("actor.c_omega must be positive");
  if (a.critic_mode == CriticMode::GtdOffPolicy && !a.behavior) {
    throw InvalidArgument("actor.mode gtd-off-policy requires actor.behavior");
  }
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    reject_unknown_keys(j,
                        {"instance", "k0", "actor", "trials", "out_dir", "success_gap_fraction",
                         "threads"},
                        "config");
    ExperimentConfig cfg;
    if (j.contains("instance")) {
      const json& inst = j["instance"];
      if (inst.is_object() && inst.contains("generate")) {
        reject_unknown_keys(inst, {"generate"}, "instance");
        cfg.instance = generator_from_json(inst["generate"]);
      } else {
        cfg.instance = instance_from_json(inst);
      }
    }
    if (j.contains("k0")) {
      const json& k0 = j["k0"];
      if (k0.is_string() && k0.get<std::string>() == "auto") {
        cfg.k0 = AutoGain{};
      } else {
        cfg.k0 = PolicyParams(matrix_from_json(k0, "k0"));
      }
    }
    if (j.contains("actor")) actor_from_json(j["actor"], cfg.actor);
    cfg.trials = j.value("trials", cfg.trials);
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    cfg.success_gap_fraction = j.value("success_gap_fraction", cfg.success_gap_fraction);
    cfg.threads = j.value("threads", cfg.threads);
    if (cfg.trials == 0) throw InvalidArgument("config.trials must be >= 1");
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (const auto* inst = std::get_if<ProblemInstance>(&cfg.instance)) {
    j["instance"] = instance_to_json(*inst);
  } else {
    const auto& g = std::get<GeneratorSpec>(cfg.instance);
    j["instance"] = {{"generate",
                      {{"d", g.d},
                       {"k", g.k},
                       {"stability_margin", g.stability_margin},
                       {"seed", g.seed},
                       {"sigma", g.sigma}}}};
  }
  if (const auto* k0 = std::get_if<PolicyParams>(&cfg.k0)) {
    j["k0"] = matrix_to_json(k0->K);
  } else {
    j["k0"] = "auto";
  }
  const ActorConfig& a = cfg.actor;
  json actor;
  if (a.gamma) {
    actor["gamma"] = *a.gamma;
  } else {
    actor["gamma"] = "auto";
  }
  actor["n_outer"] = a.n_outer;
  actor["critic_T"] = {{"T0", a.critic_T.T0}, {"growth", a.critic_T.growth}};
  actor["mode"] = to_string(a.critic_mode);
  if (a.behavior) actor["behavior"] = matrix_to_json(a.behavior->K);
  actor["seed"] = a.seed;
  actor["alpha"] = a.alpha;
  actor["c_omega"] = a.c_omega;
  actor["model_free_j0"] = a.model_free_j0;
  actor["j0_samples"] = a.j0_samples;
  j["actor"] = actor;
  j["trials"] = cfg.trials;
  j["out_dir"] = cfg.out_dir.string();
  j["success_gap_fraction"] = cfg.success_gap_fraction;
  j["threads"] = cfg.threads;
  return j;
}

namespace {

/// Linear-interpolation quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string trial_file(std::size_t i) {
  std::ostringstream name;
  name << "trial_";
  name.width(3);
  name.fill('0');
  name << i << ".csv";
  return name.str();
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials == 0) throw InvalidArgument("run_experiment: trials must be >= 1");
  const auto start = std::chrono::steady_clock::now();

  ExperimentConfig resolved = cfg;
  const ProblemInstance inst = std::holds_alternative<ProblemInstance>(cfg.instance)
                                   ? std::get<ProblemInstance>(cfg.instance)
                                   : generate_instance(std::get<GeneratorSpec>(cfg.instance));
  const PolicyParams k0 = std::holds_alternative<PolicyParams>(cfg.k0)
                              ? std::get<PolicyParams>(cfg.k0)
                              : initial_stable_gain(inst, cfg.actor.seed);
  resolved.instance = inst;
  resolved.k0 = k0;

  std::filesystem::create_directories(cfg.out_dir);

  ExperimentSummary summary;
  summary.trials.resize(cfg.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.trials; i = next++) {
      TrialOutcome& outcome = summary.trials[i];
      outcome.trial = i;
      ActorConfig actor = cfg.actor;
      actor.seed = cfg.actor.seed + i;
      outcome.seed = actor.seed;
      try {
        const RunLog log = run(inst, k0, actor);
        outcome.csv = trial_file(i);
        std::ofstream out(cfg.out_dir / outcome.csv, std::ios::binary);
        if (!out) throw Error("cannot write " + (cfg.out_dir / outcome.csv).string());
        write_run_csv(out, log);
        outcome.initial_gap = log.initial_gap();
        outcome.final_gap = log.final_gap();
        outcome.stable = log.stable_throughout();
        if (log.abort) outcome.error = log.abort->reason;
        outcome.success =
            outcome.stable && log.final_gap() <= cfg.success_gap_fraction * log.initial_gap();
      } catch (const std::exception& e) {
        outcome.error = e.what();
      }
    }
  };

  std::size_t n_threads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  n_threads = std::clamp<std::size_t>(n_threads, 1, cfg.trials);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<double> gaps;
  std::size_t successes = 0;
  for (const auto& t : summary.trials) {
    if (t.final_gap) gaps.push_back(*t.final_gap);
    successes += t.success ? 1 : 0;
  }
  std::sort(gaps.begin(), gaps.end());
  summary.median_final_gap = quantile(gaps, 0.5);
  summary.iqr_final_gap = quantile(gaps, 0.75) - quantile(gaps, 0.25);
  summary.success_rate = static_cast<double>(successes) / static_cast<double>(cfg.trials);
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_json(cfg.out_dir / "summary.json", to_json(summary));
  json manifest;
  manifest["version"] = version();
  manifest["config"] = experiment_config_to_json(resolved);
  json seeds = json::array();
  for (const auto& t : summary.trials) seeds.push_back(t.seed);
  manifest["trial_seeds"] = seeds;
  write_json(cfg.out_dir / "manifest.json", manifest);
  return summary;
}

json to_json(const ExperimentSummary& s) {
  auto number_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json trials = json::array();
  for (const auto& t : s.trials) {
    json row = {{"trial", t.trial},
                {"seed", t.seed},
                {"csv", t.csv},
                {"stable", t.stable},
                {"success", t.success}};
    row["initial_gap"] = t.initial_gap ? json(*t.initial_gap) : json(nullptr);
    row["final_gap"] = t.final_gap ? json(*t.final_gap) : json(nullptr);
    if (!t.error.empty()) row["error"] = t.error;
    trials.push_back(row);
  }
  return {{"trials", trials},
          {"median_final_gap", number_or_null(s.median_final_gap)},
          {"iqr_final_gap", number_or_null(s.iqr_final_gap)},
          {"success_rate", s.success_rate},
          {"wall_seconds", s.wall_seconds}};
}

}  // namespace lqrac
