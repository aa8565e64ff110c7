// lqrac: command-line front end for the oracle, the GTD critic, the
// actor-critic loop, the verification suites and instance generation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lqrac/exact_oracle.hpp"
#include "lqrac/gtd_critic.hpp"
#include "lqrac/harness.hpp"
#include "lqrac/json_io.hpp"
#include "lqrac/natural_actor_critic.hpp"

namespace fs = std::filesystem;
using namespace lqrac;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

ProblemInstance scalar_benchmark(double sigma) {
  Matrix a(1, 1), one = Matrix::Identity(1, 1);
  a << 0.5;
  return ProblemInstance(a, one, one, one, one, sigma);
}

/// --instance FILE holds either an instance or {"generate": {...}}; without it
/// the scalar benchmark (A = 0.5, B = Q = R = Psi = 1) is used.
struct InstanceArgs {
  std::string path;
  double sigma = 1.0;
  std::string gain = "auto";
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--instance", path, "Instance JSON file (default: scalar benchmark)");
    app->add_option("--sigma", sigma, "Policy noise for the scalar benchmark");
    app->add_option("--K", gain, "Gain as a JSON matrix, a JSON file, or 'auto'");
  }

  ProblemInstance instance() const {
    if (path.empty()) return scalar_benchmark(sigma);
    const json j = read_json_file(path);
    if (j.contains("generate")) {
      const ExperimentConfig cfg = experiment_config_from_json(json{{"instance", j}});
      return generate_instance(std::get<GeneratorSpec>(cfg.instance));
    }
    return instance_from_json(j);
  }

  PolicyParams policy(const ProblemInstance& inst) const {
    if (gain == "auto") {
      if (path.empty()) return PolicyParams(Matrix::Zero(1, 1));
      return initial_stable_gain(inst, seed);
    }
    if (fs::exists(gain)) return PolicyParams(matrix_from_json(read_json_file(gain), "K"));
    return PolicyParams(matrix_from_json(json::parse(gain), "K"));
  }
};

std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : "lqrac-out";
}

int cmd_oracle(const InstanceArgs& args) {
  const ProblemInstance inst = args.instance();
  const PolicyParams k = args.policy(inst);
  json out = evaluation_to_json(evaluate(inst, k));
  const DareSolution opt = solve_dare(inst);
  out["K_star"] = matrix_to_json(opt.K_star.K);
  out["P_star"] = matrix_to_json(opt.P_star);
  out["J_star"] = opt.J_star;
  try {
    const CriticTarget target = xi_matrix(inst, k);
    out["kappa"] = target.kappa;
  } catch (const IllConditioned& e) {
    out["kappa"] = e.kappa();
    out["ill_conditioned"] = true;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct GtdArgs {
  std::size_t T = 100000;
  double alpha = kDefaultCriticAlpha;
  double c_omega = kDefaultOmegaConstant;
  std::size_t trace_every = 0;
  std::string behavior;
  std::string out;
  bool zero_start = false;
};

int cmd_gtd(const InstanceArgs& args, const GtdArgs& g) {
  const ProblemInstance inst = args.instance();
  const PolicyParams k = args.policy(inst);
  const ProjectionSpec spec = projection_spec(inst, k, evaluate(inst, k).J, g.c_omega);
  CriticRunConfig cfg;
  cfg.T = g.T;
  cfg.alpha = g.alpha;
  cfg.sim.seed = args.seed;
  cfg.trace_every = g.trace_every;
  cfg.start = g.zero_start ? PrimalStart::Zero : PrimalStart::UpperBound;
  const CriticResult r =
      g.behavior.empty()
          ? evaluate_policy(inst, k, spec, cfg)
          : evaluate_policy_off_policy(
                inst, k, PolicyParams(matrix_from_json(json::parse(g.behavior), "behavior")),
                spec, cfg);
  const CriticDiagnostics& d = r.diagnostics;
  json out = {{"J_hat", r.J_hat},
              {"Theta_hat", matrix_to_json(r.Theta_hat)},
              {"iterations", d.iterations},
              {"theta_err", d.theta_err},
              {"j_err", d.j_err},
              {"projection_hits", d.hits.total()}};
  if (g.behavior.empty()) {
    out["residual"] = d.residual;
    out["gap"] = d.gap;
    out["kappa"] = d.kappa;
  }
  if (!g.out.empty() && g.trace_every) {
    fs::create_directories(g.out);
    std::ofstream trace(fs::path(g.out) / "trace.csv", std::ios::binary);
    write_trace_csv(trace, d.trace);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct AcArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> mode;
  std::optional<std::size_t> critic_T;
  std::optional<std::string> gamma;
  std::optional<std::size_t> n_outer;
  std::optional<std::string> out;
};

int cmd_ac(const AcArgs& a) {
  json raw = a.config.empty() ? json::object() : read_json_file(a.config);
  ExperimentConfig cfg = experiment_config_from_json(raw);
  if (!raw.contains("instance")) cfg.instance = scalar_benchmark(1.0);
  if (!raw.contains("k0") && !raw.contains("instance")) cfg.k0 = PolicyParams(Matrix::Zero(1, 1));
  if (!raw.contains("out_dir")) cfg.out_dir = default_out_dir();

  if (a.seed) cfg.actor.seed = *a.seed;
  if (a.trials) cfg.trials = *a.trials;
  if (a.mode) cfg.actor.critic_mode = critic_mode_from_string(*a.mode);
  if (a.critic_T) cfg.actor.critic_T = CriticSchedule{*a.critic_T, 1.0};
  if (a.n_outer) cfg.actor.n_outer = *a.n_outer;
  if (a.gamma) {
    if (*a.gamma == "auto") {
      cfg.actor.gamma.reset();
    } else {
      cfg.actor.gamma = std::stod(*a.gamma);
    }
  }
  if (a.out) cfg.out_dir = *a.out;
  if (cfg.trials == 0) throw InvalidArgument("--trials must be >= 1");
  if (cfg.actor.critic_mode == CriticMode::GtdOffPolicy && !cfg.actor.behavior) {
    throw InvalidArgument("off-policy mode needs actor.behavior in the config");
  }

  const ExperimentSummary s = run_experiment(cfg);
  json out = to_json(s);
  out["out_dir"] = cfg.out_dir.string();
  std::cout << out.dump(2) << '\n';
  return s.success_rate > 0.0 ? 0 : 1;
}

struct VerifyArgs {
  std::string suite = "all";
  std::size_t n_mc = 1000000;
  double h = 1e-5;
};

int cmd_verify(const InstanceArgs& args, const VerifyArgs& v) {
  const ProblemInstance inst = args.instance();
  const PolicyParams k = args.policy(inst);
  json out;
  bool pass = true;
  if (v.suite == "gradient" || v.suite == "all") {
    const GradientReport r = verify_gradient(inst, k, v.h, v.n_mc, args.seed);
    out["gradient"] = to_json(r);
    pass = pass && r.pass;
  }
  if (v.suite == "critic" || v.suite == "all") {
    const CriticTargetReport r = verify_critic_target(inst, k, v.n_mc, args.seed);
    out["critic_target"] = to_json(r);
    pass = pass && r.pass;
  }
  if (out.empty()) throw InvalidArgument("--suite must be gradient, critic or all");
  out["pass"] = pass;
  std::cout << out.dump(2) << '\n';
  return pass ? 0 : 1;
}

int cmd_gen(const GeneratorSpec& spec, bool with_k0) {
  const ProblemInstance inst = generate_instance(spec);
  json out = instance_to_json(inst);
  if (with_k0) out = {{"instance", out}, {"k0", matrix_to_json(initial_stable_gain(inst, spec.seed).K)}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural actor-critic for ergodic LQR with an exact oracle"};
  app.require_subcommand(1);

  InstanceArgs inst_args;

  auto* oracle = app.add_subcommand("oracle", "Closed-form evaluation of a gain");
  inst_args.add_to(oracle);
  oracle->add_option("--seed", inst_args.seed, "Seed for --K auto");

  GtdArgs gtd_args;
  auto* gtd = app.add_subcommand("gtd", "One GTD critic run");
  inst_args.add_to(gtd);
  gtd->add_option("--seed", inst_args.seed, "Random seed");
  gtd->add_option("--T,--critic-T", gtd_args.T, "Iterations")->check(CLI::PositiveNumber);
  gtd->add_option("--alpha", gtd_args.alpha, "Step size scale, alpha_t = alpha / sqrt(t)");
  gtd->add_option("--c-omega", gtd_args.c_omega, "Dual radius constant");
  gtd->add_option("--trace", gtd_args.trace_every, "Trace every n steps");
  gtd->add_option("--behavior", gtd_args.behavior, "Behavior gain (JSON) for off-policy GTD");
  gtd->add_option("--out", gtd_args.out, "Directory for trace.csv");
  gtd->add_flag("--zero-start", gtd_args.zero_start, "Start vartheta1 at 0 instead of J(K0)");

  AcArgs ac_args;
  auto* ac = app.add_subcommand("ac", "Actor-critic experiment");
  ac->add_option("--config", ac_args.config, "Experiment config JSON");
  ac->add_option("--seed", ac_args.seed, "Base seed");
  ac->add_option("--trials", ac_args.trials, "Number of trials");
  ac->add_option("--mode", ac_args.mode, "gtd, gtd-off-policy or exact");
  ac->add_option("--critic-T", ac_args.critic_T, "GTD iterations per actor step");
  ac->add_option("--n-outer", ac_args.n_outer, "Actor steps");
  ac->add_option("--gamma", ac_args.gamma, "Actor step size or 'auto'");
  ac->add_option("--out", ac_args.out, "Output directory");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Gradient and critic-target checks");
  inst_args.add_to(verify);
  verify->add_option("--seed", inst_args.seed, "Random seed");
  verify->add_option("--suite", verify_args.suite, "gradient, critic or all");
  verify->add_option("--n-mc", verify_args.n_mc, "Monte-Carlo samples");
  verify->add_option("--fd-step", verify_args.h, "Finite-difference step");

  GeneratorSpec gen_spec;
  bool with_k0 = false;
  auto* gen = app.add_subcommand("gen", "Generate a random instance");
  gen->add_option("--d", gen_spec.d, "State dimension");
  gen->add_option("--k", gen_spec.k, "Input dimension");
  gen->add_option("--margin", gen_spec.stability_margin, "rho(A) - 1");
  gen->add_option("--seed", gen_spec.seed, "Random seed");
  gen->add_option("--sigma", gen_spec.sigma, "Policy noise");
  gen->add_flag("--with-k0", with_k0, "Also emit a stable initial gain");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*oracle) return cmd_oracle(inst_args);
    if (*gtd) return cmd_gtd(inst_args, gtd_args);
    if (*ac) return cmd_ac(ac_args);
    if (*verify) return cmd_verify(inst_args, verify_args);
    if (*gen) return cmd_gen(gen_spec, with_k0);
  } catch (const std::exception& e) {
    std::cerr << "lqrac: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
