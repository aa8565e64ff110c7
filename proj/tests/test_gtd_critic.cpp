#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "lqrac/gtd_critic.hpp"
#include "lqrac/harness.hpp"
#include "reference.hpp"

using namespace lqrac;

namespace {

PolicyParams scalar_gain(double k) { return PolicyParams(Matrix::Constant(1, 1, k)); }

/// Running mean and standard error per component.
struct VecMoments {
  Vector sum, sum_sq;
  std::size_t n = 0;

  void add(const Vector& v) {
    if (n == 0) {
      sum = Vector::Zero(v.size());
      sum_sq = Vector::Zero(v.size());
    }
    sum += v;
    sum_sq += v.cwiseProduct(v);
    ++n;
  }
  Vector mean() const { return sum / static_cast<double>(n); }
  Vector se() const {
    const double m = static_cast<double>(n);
    const Vector var = (sum_sq / m - mean().cwiseProduct(mean())) * (m / (m - 1));
    return (var / m).cwiseSqrt();
  }
};

/// Draws i.i.d. transitions with z from the stationary law of `behavior` and
/// the next action from `behavior` as well.
class TransitionSampler {
 public:
  TransitionSampler(const ProblemInstance& inst, const PolicyParams& behavior, std::uint64_t seed)
      : inst_(inst),
        kb_(behavior.K),
        joint_(joint_covariance(inst, behavior)),
        noise_(inst.Psi()),
        rng_(seed, 77) {}

  TrajectoryStep draw() {
    const auto d = static_cast<Eigen::Index>(inst_.state_dim());
    const auto k = static_cast<Eigen::Index>(inst_.input_dim());
    const Vector z = joint_.sample(rng_);
    TrajectoryStep s;
    s.x = z.head(d);
    s.u = z.tail(k);
    s.c = cost(inst_, s.x, s.u);
    s.x_next = inst_.A() * s.x + inst_.B() * s.u + noise_.sample(rng_);
    Vector eta(k);
    rng_.fill_normal(eta);
    s.u_next = -kb_ * s.x_next + inst_.sigma() * eta;
    return s;
  }

 private:
  const ProblemInstance& inst_;
  Matrix kb_;
  GaussianSampler joint_, noise_;
  RandomStream rng_;
};

Vector pack(const SaddleGradient& g) {
  Vector v(2 + g.theta2.size() + g.omega2.size());
  v << g.theta1, g.theta2, g.omega1, g.omega2;
  return v;
}

Vector theta_star(const ProblemInstance& inst, const PolicyParams& k) {
  return svec(evaluate(inst, k).Theta);
}

/// Textbook off-policy primal-dual step written out independently, with the
/// set projections and without the averaging.
void reference_off_policy(double& v1, Vector& v2, double& w1, Vector& w2, const TrajectoryStep& s,
                          double tau, double a, const ProjectionSpec& spec) {
  const Vector phi = ref::svec((Vector(s.x.size() + s.u.size()) << s.x, s.u).finished() *
                               (Vector(s.x.size() + s.u.size()) << s.x, s.u).finished().transpose());
  const Vector zn = (Vector(s.x.size() + s.u.size()) << s.x_next, s.u_next).finished();
  const Vector phin = ref::svec(zn * zn.transpose());
  const double delta = v1 + (phi - tau * phin).dot(v2) - s.c;
  const double nv1 = v1 - a * (w1 + phi.dot(w2));
  Vector nv2 = v2 - a * (phi.dot(w2) + w1) * (phi - tau * phin);
  double nw1 = w1 + a * (delta - w1);
  Vector nw2 = w2 + a * (delta * phi - w2);
  v1 = std::clamp(nv1, 0.0, spec.j_max);
  if (nv2.norm() > spec.r_theta) nv2 *= spec.r_theta / nv2.norm();
  v2 = nv2;
  w1 = std::clamp(nw1, -spec.j_max, spec.j_max);
  if (nw2.norm() > spec.r_omega_effective) nw2 *= spec.r_omega_effective / nw2.norm();
  w2 = nw2;
}

}  // namespace

TEST_CASE("projection radii") {
  const ProblemInstance bench = ref::scalar_benchmark(0.0);
  const ProjectionSpec s0 = projection_spec(bench, scalar_gain(0), 4.0 / 3.0);
  CHECK(s0.r_theta == doctest::Approx(11.0 / 3.0));
  CHECK(s0.j_max == doctest::Approx(4.0 / 3.0));
  CHECK(s0.r_omega_base == doctest::Approx(10.0 * 11.0 / 3.0 * 16.0 / 9.0));
  CHECK(s0.r_omega_effective == s0.r_omega_base);
  const ProjectionSpec s1 = projection_spec(bench, scalar_gain(1.0), 4.0 / 3.0);
  CHECK(s1.r_omega_effective == doctest::Approx(4.0 * s1.r_omega_base));
  CHECK_THROWS_AS(projection_spec(bench, scalar_gain(0), 0.0), InvalidArgument);
  CHECK_THROWS_AS(projection_spec(bench, scalar_gain(0), 1.0, -1.0), InvalidArgument);

  // The target lies in the primal set for every iterate along a descent path from K0.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ProblemInstance inst = generate_instance(3, 2, 0.2, seed);
    const PolicyParams k0 = initial_stable_gain(inst, seed);
    const double j0 = evaluate(inst, k0).J;
    const ProjectionSpec spec = projection_spec(inst, k0, j0);
    CHECK(theta_star(inst, k0).norm() <= spec.r_theta);
    const PolicyParams ks = solve_dare(inst).K_star;
    CHECK(theta_star(inst, ks).norm() <= projection_spec(inst, ks, j0).r_theta);
  }
}

TEST_CASE("projection operators") {
  ProjectionSpec spec;
  spec.j_max = 2.0;
  spec.r_theta = 1.0;
  spec.r_omega_effective = 3.0;
  double v1 = 5.0;
  Vector v2 = Vector::Constant(2, 1.0);
  ProjectionHit h = project_theta(v1, v2, spec);
  CHECK(v1 == 2.0);
  CHECK(v2.norm() == doctest::Approx(1.0));
  CHECK(v2(0) == doctest::Approx(std::sqrt(0.5)));
  CHECK((h.first && h.second));
  v1 = -1.0;
  v2 = Vector::Constant(2, 0.1);
  h = project_theta(v1, v2, spec);
  CHECK(v1 == 0.0);
  CHECK(h.first);
  CHECK(!h.second);
  CHECK(v2(0) == 0.1);

  double w1 = -7.0;
  Vector w2 = Vector::Constant(1, -4.0);
  h = project_omega(w1, w2, spec);
  CHECK(w1 == -2.0);
  CHECK(w2(0) == doctest::Approx(-3.0));
  w1 = 1.5;
  h = project_omega(w1, w2, spec);
  CHECK(!h.first);
  CHECK(w1 == 1.5);
}

TEST_CASE("single GTD steps by hand") {
  const ProblemInstance bench = ref::scalar_benchmark(1.0);
  const ProjectionSpec spec = projection_spec(bench, scalar_gain(0), 11.0 / 3.0);
  TrajectoryStep s;
  s.x = Vector::Constant(1, 1.0);
  s.u = Vector::Constant(1, 0.5);
  s.c = 1.25;
  s.x_next = Vector::Constant(1, 0.2);
  s.u_next = Vector::Constant(1, -0.3);

  SUBCASE("vartheta1 is clipped at zero") {
    CriticState st = CriticState::zeros(3);
    st.vartheta1 = 0.5;
    st.omega1 = 1.0;
    gtd_step_on_policy(st, s, 1.0, spec);
    CHECK(st.vartheta1 == 0.0);
    CHECK(st.hits.theta1 == 1);
    // omega1 <- (1 - a) w1 + a (v1 - c) reads the pre-step v1.
    CHECK(st.omega1 == doctest::Approx(0.5 - 1.25));
    CHECK(st.t == 1);
    CHECK(st.avg_vartheta1 == 0.0);
  }
  SUBCASE("zero dual leaves the primal unchanged") {
    CriticState st = CriticState::zeros(3);
    st.vartheta1 = 2.0;
    st.vartheta2 = Vector::Constant(3, 0.3);
    gtd_step_on_policy(st, s, 0.1, spec);
    CHECK(st.vartheta1 == 2.0);
    CHECK(st.vartheta2 == Vector::Constant(3, 0.3));
    const Vector phi = feature(StateActionPair{s.x, s.u});
    const Vector phin = feature(StateActionPair{s.x_next, s.u_next});
    const double td = 2.0 - 1.25 + (phi - phin).dot(Vector::Constant(3, 0.3));
    CHECK((st.omega2 - 0.1 * td * phi).norm() < 1e-14);
    CHECK(st.omega1 == doctest::Approx(0.1 * 0.75));
  }
  SUBCASE("off-policy step against a reference implementation") {
    for (double tau : {1.0, 0.7, 1.9}) {
      CriticState st = CriticState::zeros(3);
      st.vartheta1 = 1.0;
      st.vartheta2 << 0.2, -0.1, 0.4;
      st.omega1 = -0.3;
      st.omega2 << 0.5, 0.1, -0.2;
      double v1 = st.vartheta1, w1 = st.omega1;
      Vector v2 = st.vartheta2, w2 = st.omega2;
      for (int i = 1; i <= 5; ++i) {
        const double a = 0.2 / std::sqrt(i);
        gtd_step_off_policy(st, s, tau, a, spec);
        reference_off_policy(v1, v2, w1, w2, s, tau, a, spec);
      }
      CHECK(st.vartheta1 == doctest::Approx(v1).epsilon(1e-13));
      CHECK((st.vartheta2 - v2).norm() < 1e-12);
      CHECK(st.omega1 == doctest::Approx(w1).epsilon(1e-13));
      CHECK((st.omega2 - w2).norm() < 1e-12);
    }
  }
  SUBCASE("errors") {
    CriticState st = CriticState::zeros(3);
    CHECK_THROWS_AS(gtd_step_off_policy(st, s, std::numeric_limits<double>::quiet_NaN(), 0.1, spec),
                    Divergence);
    try {
      gtd_step_off_policy(st, s, std::numeric_limits<double>::infinity(), 0.1, spec);
    } catch (const Divergence& e) {
      CHECK(e.field() == "ratio");
    }
    CHECK_THROWS_AS(gtd_step_on_policy(st, s, 0.0, spec), InvalidArgument);
    CriticState wrong = CriticState::zeros(6);
    CHECK_THROWS_AS(gtd_step_on_policy(wrong, s, 0.1, spec), DimensionMismatch);
  }
}

TEST_CASE("saddle point and gradients") {
  const ProblemInstance bench = ref::scalar_benchmark(1.0);
  const PolicyParams k = scalar_gain(0);
  const CriticSystem sys = critic_system(bench, k);
  const ExactEvaluation ev = evaluate(bench, k);
  const Vector ts = svec(ev.Theta);
  const Vector zero = Vector::Zero(3);

  const SaddleGradient g = population_gradient(sys, ev.J, ts, 0.0, zero);
  CHECK(std::abs(g.theta1) < 1e-12);
  CHECK(g.theta2.norm() < 1e-12);
  CHECK(std::abs(g.omega1) < 1e-12);
  CHECK(g.omega2.norm() < 1e-9);
  CHECK(std::abs(saddle_objective(sys, ev.J, ts, 0.0, zero)) < 1e-12);

  SUBCASE("sample gradients are unbiased") {
    const Vector v2 = ts + Vector::Constant(3, 0.2);
    const double v1 = 3.0, w1 = 0.4;
    const Vector w2 = Vector::Constant(3, -0.1);
    const SaddleGradient pop = population_gradient(sys, v1, v2, w1, w2);
    TransitionSampler draw(bench, k, 5);
    VecMoments m;
    for (int i = 0; i < 200000; ++i) m.add(pack(sample_gradient(draw.draw(), v1, v2, w1, w2)));
    const Vector z = (m.mean() - pack(pop)).cwiseQuotient(m.se());
    CHECK(z.cwiseAbs().maxCoeff() < 4.5);
  }

  SUBCASE("off-policy increments vanish in expectation at the target") {
    const PolicyParams kb = scalar_gain(0.1);
    TransitionSampler draw(bench, kb, 6);
    const ProjectionSpec big = projection_spec(bench, k, 100.0);
    VecMoments m;
    for (int i = 0; i < 200000; ++i) {
      const TrajectoryStep s = draw.draw();
      const double tau = importance_ratio(k.K, kb.K, 1.0, s.x_next, s.u_next);
      CriticState st = CriticState::zeros(3);
      st.vartheta1 = ev.J;
      st.vartheta2 = ts;
      gtd_step_off_policy(st, s, tau, 1.0, big);
      Vector inc(5);
      inc << st.omega1, st.omega2, st.vartheta1 - ev.J;
      m.add(inc);
    }
    const Vector z = m.mean().head(4).cwiseQuotient(m.se().head(4));
    CHECK(z.cwiseAbs().maxCoeff() < 4.5);
    CHECK(m.se()(4) == 0.0);
  }
}

TEST_CASE("gap bounds the distance to the target") {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ProblemInstance inst = generate_instance(2, 1, 0.2, seed);
    const PolicyParams k = initial_stable_gain(inst, seed);
    const CriticSystem sys = critic_system(inst, k);
    const ExactEvaluation ev = evaluate(inst, k);
    const ProjectionSpec spec = projection_spec(inst, k, 2.0 * ev.J);
    const Vector ts = svec(ev.Theta);
    for (int i = 0; i < 20; ++i) {
      const double v1 = std::clamp(ev.J + 0.1 * ref::random_matrix(rng, 1, 1)(0, 0), 0.0, spec.j_max);
      const Vector v2 = ts + 0.05 * ref::random_matrix(rng, ts.size(), 1);
      const double w1 = 0.01 * ref::random_matrix(rng, 1, 1)(0, 0);
      const Vector w2 = 0.01 * ref::random_matrix(rng, ts.size(), 1);
      const double gap = primal_dual_gap(sys, spec, v1, v2, w1, w2);
      const double err2 = (v1 - ev.J) * (v1 - ev.J) + (v2 - ts).squaredNorm();
      CHECK(gap >= 0.0);
      CHECK(err2 <= 2.0 * gap / (sys.kappa * sys.kappa) * (1 + 1e-9));
    }
    CHECK(std::abs(primal_dual_gap(sys, spec, ev.J, ts, 0.0, Vector::Zero(ts.size()))) < 1e-8);
  }
}

TEST_CASE("GTD critic on the scalar benchmark") {
  const ProblemInstance bench = ref::scalar_benchmark(1.0);
  const PolicyParams k = scalar_gain(0);
  const double j = 11.0 / 3.0;
  const ProjectionSpec spec = projection_spec(bench, k, j);
  CriticRunConfig cfg;
  cfg.alpha = 0.015;

  std::vector<double> short_err, long_err, j_hat;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.sim.seed = seed;
    cfg.T = 2000;
    short_err.push_back(evaluate_policy(bench, k, spec, cfg).diagnostics.theta_err);
    cfg.T = 100000;
    const CriticResult r = evaluate_policy(bench, k, spec, cfg);
    long_err.push_back(r.diagnostics.theta_err);
    j_hat.push_back(r.J_hat);
    CHECK(r.vartheta1_hat >= 0.0);
    CHECK(r.vartheta1_hat <= spec.j_max);
    CHECK(r.vartheta2_hat.norm() <= spec.r_theta + 1e-12);
    CHECK(std::abs(r.omega1_hat) <= spec.j_max);
    CHECK(r.omega2_hat.norm() <= spec.r_omega_effective + 1e-9);
  }
  CHECK(ref::median(long_err) < 0.5 * ref::median(short_err));
  CHECK(std::abs(ref::median(j_hat) - j) < 0.1 * j);
}

TEST_CASE("GTD runs are reproducible and traced") {
  const ProblemInstance inst = generate_instance(2, 1, 0.2, 3);
  const PolicyParams k = initial_stable_gain(inst, 3);
  const ProjectionSpec spec = projection_spec(inst, k, evaluate(inst, k).J);
  CriticRunConfig cfg;
  cfg.T = 3000;
  cfg.sim.seed = 9;
  cfg.trace_every = 1000;
  const CriticResult a = evaluate_policy(inst, k, spec, cfg);
  const CriticResult b = evaluate_policy(inst, k, spec, cfg);
  CHECK(a.J_hat == b.J_hat);
  CHECK(a.Theta_hat == b.Theta_hat);
  CHECK(a.diagnostics.iterations == 3000);
  REQUIRE(a.diagnostics.trace.size() == 3);
  CHECK(a.diagnostics.trace.back().t == 3000);
  CHECK(std::isfinite(a.diagnostics.gap));

  std::ostringstream out;
  write_trace_csv(out, a.diagnostics.trace);
  CHECK(out.str().rfind("t,vartheta1,theta_err,omega_norm,proj_hits\n", 0) == 0);

  cfg.start = PrimalStart::Zero;
  cfg.oracle_diagnostics = false;
  const CriticResult z = evaluate_policy(inst, k, spec, cfg);
  CHECK(std::isnan(z.diagnostics.theta_err));
  CHECK(std::isnan(z.diagnostics.gap));

  cfg.oracle_diagnostics = true;
  const CriticResult off = evaluate_policy_off_policy(inst, k, PolicyParams(k.K * 1.05), spec, cfg);
  CHECK(std::isfinite(off.diagnostics.theta_err));
  CHECK(std::isnan(off.diagnostics.gap));

  cfg.T = 0;
  CHECK_THROWS_AS(evaluate_policy(inst, k, spec, cfg), InvalidArgument);
}
