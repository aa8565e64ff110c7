#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lqrac/harness.hpp"
#include "reference.hpp"

using namespace lqrac;
namespace fs = std::filesystem;

namespace {

PolicyParams scalar_gain(double k) { return PolicyParams(Matrix::Constant(1, 1, k)); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lqrac-test-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("instance generator") {
  const ProblemInstance a = generate_instance(4, 2, 0.2, 7);
  const ProblemInstance b = generate_instance(4, 2, 0.2, 7);
  CHECK(a.A() == b.A());
  CHECK(a.B() == b.B());
  CHECK(a.Q() == b.Q());
  CHECK(generate_instance(4, 2, 0.2, 8).A() != a.A());

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ProblemInstance inst = generate_instance(4, 2, 0.2, seed);
    CHECK(spectral_radius(inst.A()) == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(Eigen::FullPivLU<Matrix>(inst.B()).rank() == 2);
    const double q = inst.Q()(0, 0), r = inst.R()(0, 0);
    CHECK((inst.Q() - q * Matrix::Identity(4, 4)).norm() == 0.0);
    CHECK((inst.R() - r * Matrix::Identity(2, 2)).norm() == 0.0);
    CHECK(q >= 0.5);
    CHECK(q <= 2.0);
    CHECK(r >= 0.5);
    CHECK(r <= 2.0);
    CHECK(inst.Psi() == Matrix::Identity(4, 4));
    CHECK(inst.sigma() == 1.0);
    CHECK_NOTHROW(solve_dare(inst));
  }
  GeneratorSpec spec;
  spec.d = 2;
  spec.sigma = 0.3;
  CHECK(generate_instance(spec).sigma() == 0.3);
  spec.stability_margin = 0.0;
  CHECK_THROWS_AS(generate_instance(spec), InvalidArgument);
  CHECK_THROWS_AS(generate_instance(0, 1, 0.2, 0), InvalidArgument);
}

TEST_CASE("initial stable gain") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ProblemInstance inst = generate_instance(4, 2, 0.2, seed);
    const PolicyParams k0 = initial_stable_gain(inst, seed);
    const DareSolution opt = solve_dare(inst);
    CHECK(spectral_radius(closed_loop(inst, k0)) <= kMaxInitialRadius);
    CHECK((k0.K - opt.K_star.K).norm() > 1e-6);
    CHECK(evaluate(inst, k0).J > opt.J_star);
  }
  const ProblemInstance inst = generate_instance(3, 2, 0.2, 1);
  CHECK(initial_stable_gain(inst, 5).K == initial_stable_gain(inst, 5).K);
  CHECK(spectral_radius(closed_loop(ref::scalar_benchmark(1.0), scalar_gain(0))) == doctest::Approx(0.5));
}

TEST_CASE("gradient verification") {
  const GradientReport r = verify_gradient(ref::scalar_benchmark(1.0), scalar_gain(0), 1e-5, 200000, 1);
  // sigma = 1: E = -2/3 as before and Sigma = 8/3.
  CHECK(r.closed_form(0, 0) == doctest::Approx(-32.0 / 9.0));
  CHECK(r.fd_rel_error < 1e-7);
  CHECK(r.max_abs_z < 4.0);
  CHECK(r.n_mc == 200000);

  const ProblemInstance bench = ref::scalar_benchmark(0.5);
  const DareSolution opt = solve_dare(bench);
  const GradientReport at_opt = verify_gradient(bench, opt.K_star, 1e-5, 1000, 2);
  CHECK(std::abs(at_opt.closed_form(0, 0)) < 1e-10);
  CHECK(at_opt.fd_abs_error < 1e-8);

  const ProblemInstance inst = generate_instance(3, 2, 0.2, 6);
  const GradientReport g = verify_gradient(inst, initial_stable_gain(inst, 6), 1e-5, 20000, 3);
  CHECK(g.fd_rel_error < 1e-5);
  CHECK(g.z.rows() == 2);
  CHECK(g.z.cols() == 3);
  const json j = to_json(g);
  CHECK(j.contains("pass"));
  CHECK(j.contains("max_abs_z"));

  CHECK_THROWS_AS(verify_gradient(ref::scalar_benchmark(0.0), scalar_gain(0), 1e-5, 100, 0), InvalidArgument);
  CHECK_THROWS_AS(verify_gradient(bench, scalar_gain(0), 0.0, 100, 0), InvalidArgument);
  CHECK_THROWS_AS(verify_gradient(bench, scalar_gain(0), 1e-5, 1, 0), InvalidArgument);
}

TEST_CASE("critic target verification") {
  const CriticTargetReport r = verify_critic_target(ref::scalar_benchmark(1.0), scalar_gain(0), 200000, 1);
  CHECK(!r.ill_conditioned);
  CHECK(r.solve_rel_error < 1e-8);
  CHECK(r.max_abs_z < 5.0);
  CHECK(r.pass);
  CHECK(r.xi_mc.rows() == 3);

  const CriticTargetReport degenerate =
      verify_critic_target(ref::scalar_benchmark(0.0), scalar_gain(0), 20000, 2);
  CHECK(degenerate.ill_conditioned);
  CHECK(std::isnan(degenerate.solve_rel_error));

  // With A = 0 and K = 0 the next state is pure noise and independent of z.
  const ProblemInstance white = ref::scalar_instance(0.0, 1, 1, 1, 1, 0.0);
  const CriticTargetReport w = verify_critic_target(white, scalar_gain(0), 20000, 3);
  CHECK(w.ill_conditioned);
  CHECK(w.max_abs_z < 5.0);
  const json j = to_json(w);
  CHECK(j["ill_conditioned"] == true);
}

TEST_CASE("experiment config JSON") {
  const json raw = json::parse(R"({
    "instance": {"generate": {"d": 3, "k": 2, "stability_margin": 0.2, "seed": 5, "sigma": 0.5}},
    "k0": "auto",
    "actor": {"gamma": "auto", "n_outer": 7, "critic_T": {"T0": 100, "growth": 1.5},
              "mode": "gtd", "seed": 3, "alpha": 0.02, "c_omega": 4},
    "trials": 2, "out_dir": "somewhere", "success_gap_fraction": 0.1, "threads": 1
  })");
  const ExperimentConfig cfg = experiment_config_from_json(raw);
  REQUIRE(std::holds_alternative<GeneratorSpec>(cfg.instance));
  CHECK(std::get<GeneratorSpec>(cfg.instance).d == 3);
  CHECK(std::get<GeneratorSpec>(cfg.instance).sigma == 0.5);
  CHECK(std::holds_alternative<AutoGain>(cfg.k0));
  CHECK(!cfg.actor.gamma);
  CHECK(cfg.actor.n_outer == 7);
  CHECK(cfg.actor.critic_T.T0 == 100);
  CHECK(cfg.actor.critic_T.growth == 1.5);
  CHECK(cfg.actor.critic_mode == CriticMode::Gtd);
  CHECK(cfg.actor.alpha == 0.02);
  CHECK(cfg.trials == 2);
  CHECK(cfg.out_dir == fs::path("somewhere"));

  const ExperimentConfig back = experiment_config_from_json(experiment_config_to_json(cfg));
  CHECK(experiment_config_to_json(back) == experiment_config_to_json(cfg));

  const json inline_inst = {{"instance", instance_to_json(ref::scalar_benchmark(1.0))},
                            {"k0", json::array({json::array({0.1})})},
                            {"actor", {{"gamma", 0.2}, {"critic_T", 500}}}};
  const ExperimentConfig c2 = experiment_config_from_json(inline_inst);
  CHECK(std::get<PolicyParams>(c2.k0).K(0, 0) == 0.1);
  CHECK(*c2.actor.gamma == 0.2);
  CHECK(c2.actor.critic_T.T0 == 500);

  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"trails": 3})")), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"actor": {"gama": 1}})")), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"actor": {"n_outer": "x"}})")), InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"actor": {"mode": "gtd-off-policy"}})")),
                  InvalidArgument);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"trials": 0})")), InvalidArgument);
}

TEST_CASE("run_experiment writes reproducible artifacts") {
  ExperimentConfig cfg;
  cfg.instance = ref::scalar_benchmark(1.0);
  cfg.k0 = scalar_gain(0);
  cfg.actor.critic_mode = CriticMode::Gtd;
  cfg.actor.critic_T = CriticSchedule{5000, 1.0};
  cfg.actor.alpha = 0.015;
  cfg.actor.n_outer = 3;
  cfg.actor.seed = 40;
  cfg.trials = 3;
  cfg.threads = 2;
  cfg.success_gap_fraction = 0.9;
  cfg.out_dir = scratch_dir("a");
  const ExperimentSummary s = run_experiment(cfg);

  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(cfg.out_dir)) files += e.is_regular_file();
  CHECK(files == 5);
  REQUIRE(s.trials.size() == 3);
  std::size_t ok = 0;
  for (const auto& t : s.trials) {
    CHECK(t.seed == 40 + t.trial);
    CHECK(t.stable);
    ok += t.success;
    REQUIRE(t.final_gap.has_value());
    CHECK(t.success == (*t.final_gap <= 0.9 * *t.initial_gap));
  }
  CHECK(s.success_rate == doctest::Approx(static_cast<double>(ok) / 3.0));

  const json summary = json::parse(slurp(cfg.out_dir / "summary.json"));
  CHECK(summary["trials"].size() == 3);
  const json manifest = json::parse(slurp(cfg.out_dir / "manifest.json"));
  CHECK(manifest["trial_seeds"] == json::array({40, 41, 42}));
  CHECK(manifest["version"] == version());

  const fs::path first = cfg.out_dir;
  cfg.out_dir = scratch_dir("b");
  cfg.threads = 1;
  run_experiment(cfg);
  for (const char* name : {"trial_000.csv", "trial_001.csv", "trial_002.csv"})
    CHECK(slurp(first / name) == slurp(cfg.out_dir / name));
  CHECK(json::parse(slurp(cfg.out_dir / "manifest.json"))["trial_seeds"] == manifest["trial_seeds"]);
  fs::remove_all(first);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("run_experiment records failing trials") {
  ExperimentConfig cfg;
  cfg.instance = ref::scalar_benchmark(0.0);
  cfg.k0 = scalar_gain(0);
  cfg.actor.gamma = 10.0;
  cfg.actor.n_outer = 3;
  cfg.trials = 2;
  cfg.threads = 1;
  cfg.out_dir = scratch_dir("c");
  const ExperimentSummary s = run_experiment(cfg);
  CHECK(s.success_rate == 0.0);
  for (const auto& t : s.trials) {
    CHECK(!t.stable);
    CHECK(!t.error.empty());
  }
  fs::remove_all(cfg.out_dir);
}
