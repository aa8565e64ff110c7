#include "lqrac/simulator.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "lqrac/csv.hpp"
#include "lqrac/exact_oracle.hpp"

namespace lqrac {

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream),
                       static_cast<std::uint32_t>(stream >> 32), 0x6c717261u};
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) {
  auto seq = make_seed_seq(seed, stream);
  engine_.seed(seq);
}

void RandomStream::fill_normal(Eigen::Ref<Vector> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = normal_(engine_);
}

GaussianSampler::GaussianSampler(const Matrix& covariance) {
  if (covariance.rows() != covariance.cols()) {
    throw DimensionMismatch("GaussianSampler: covariance must be square");
  }
  const Matrix c = 0.5 * (covariance + covariance.transpose());
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor_ = es.eigenvectors() * root.asDiagonal();
  }
  scratch_.resize(c.rows());
}

void GaussianSampler::sample(RandomStream& rng, Eigen::Ref<Vector> out) {
  rng.fill_normal(scratch_);
  out.noalias() = factor_ * scratch_;
}

Vector GaussianSampler::sample(RandomStream& rng) {
  Vector out(factor_.rows());
  sample(rng, out);
  return out;
}

std::size_t default_burn_in(const ProblemInstance& inst, const Matrix& k) {
  const double rho = spectral_radius(inst.A() - inst.B() * k);
  if (!(rho < 1.0)) throw UnstablePolicy(rho, "default_burn_in");
  return static_cast<std::size_t>(std::ceil(20.0 / (1.0 - rho)));
}

Rollout::Rollout(const ProblemInstance& inst, const PolicyParams& policy, const SimConfig& cfg)
    : a_(inst.A()),
      b_(inst.B()),
      q_(inst.Q()),
      r_(inst.R()),
      k_(policy.K),
      sigma_(inst.sigma()),
      process_noise_(inst.Psi()),
      rng_(cfg.seed, cfg.stream) {
  closed_loop(inst, policy);  // shape check
  const auto d = a_.rows();
  const auto k = b_.cols();
  x_ = Vector::Zero(d);
  u_ = Vector::Zero(k);
  eta_.resize(k);
  scratch_.resize(d);

  if (std::holds_alternative<init::ExactStationary>(cfg.init)) {
    GaussianSampler stationary(solve_sigma(inst, policy));
    stationary.sample(rng_, x_);
  } else if (const auto* from = std::get_if<init::FromState>(&cfg.init)) {
    if (from->x0.size() != d) throw DimensionMismatch("FromState: x0 must have length d");
    if (!from->x0.allFinite()) throw InvalidArgument("FromState: x0 has non-finite entries");
    x_ = from->x0;
  }
  rng_.fill_normal(eta_);
  u_.noalias() = -k_ * x_;
  u_ += sigma_ * eta_;

  if (const auto* burn = std::get_if<init::BurnIn>(&cfg.init)) {
    Vector xn(d), un(k);
    for (std::size_t i = 0; i < burn->n_steps; ++i) {
      advance_into(xn, un);
      x_.swap(xn);
      u_.swap(un);
    }
  }
}

void Rollout::advance_into(Vector& x_next, Vector& u_next) {
  process_noise_.sample(rng_, scratch_);
  x_next.noalias() = a_ * x_;
  x_next.noalias() += b_ * u_;
  x_next += scratch_;
  if (!(x_next.norm() <= kStateOverflow)) {
    throw Overflow("rollout: state norm exceeded 1e12 at step " + std::to_string(t_ + 1));
  }
  rng_.fill_normal(eta_);
  u_next.noalias() = -k_ * x_next;
  u_next += sigma_ * eta_;
}

void Rollout::next(TrajectoryStep& step) {
  step.x = x_;
  step.u = u_;
  step.c = x_.dot(q_ * x_) + u_.dot(r_ * u_);
  if (step.x_next.size() != x_.size()) step.x_next.resize(x_.size());
  if (step.u_next.size() != u_.size()) step.u_next.resize(u_.size());
  advance_into(step.x_next, step.u_next);
  x_ = step.x_next;
  u_ = step.u_next;
  ++t_;
}

TrajectoryStep Rollout::next() {
  TrajectoryStep step;
  next(step);
  return step;
}

std::vector<TrajectoryStep> rollout(const ProblemInstance& inst, const PolicyParams& policy,
                                    const SimConfig& cfg, std::size_t T) {
  if (T == 0) throw InvalidArgument("rollout: T must be at least 1");
  Rollout sim(inst, policy, cfg);
  std::vector<TrajectoryStep> out(T);
  for (auto& step : out) sim.next(step);
  return out;
}

double importance_ratio(const Matrix& target, const Matrix& behavior, double sigma,
                        const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u) {
  if (!(sigma > 0.0)) {
    throw InvalidArgument("importance_ratio: requires sigma > 0");
  }
  const double log_ratio =
      ((u + behavior * x).squaredNorm() - (u + target * x).squaredNorm()) / (2.0 * sigma * sigma);
  const double ratio = std::exp(log_ratio);
  if (!std::isfinite(log_ratio) || !(ratio <= kRatioOverflow)) {
    throw DistributionMismatch("importance ratio " + std::to_string(ratio) +
                               " exceeds the overflow cap");
  }
  return ratio;
}

BehaviorRollout::BehaviorRollout(const ProblemInstance& inst, const PolicyParams& behavior,
                                 const PolicyParams& target, const SimConfig& cfg)
    : base_(inst, behavior, cfg), target_(target.K), behavior_(behavior.K), sigma_(inst.sigma()) {
  if (target_.rows() != behavior_.rows() || target_.cols() != behavior_.cols()) {
    throw DimensionMismatch("BehaviorRollout: target and behavior gains differ in shape");
  }
  if (!(sigma_ > 0.0)) throw InvalidArgument("BehaviorRollout: requires sigma > 0");
}

double BehaviorRollout::next(TrajectoryStep& step) {
  base_.next(step);
  return importance_ratio(target_, behavior_, sigma_, step.x_next, step.u_next);
}

std::vector<WeightedStep> rollout_behavior(const ProblemInstance& inst,
                                           const PolicyParams& behavior,
                                           const PolicyParams& target, const SimConfig& cfg,
                                           std::size_t T) {
  if (T == 0) throw InvalidArgument("rollout_behavior: T must be at least 1");
  BehaviorRollout sim(inst, behavior, target, cfg);
  std::vector<WeightedStep> out(T);
  for (auto& ws : out) ws.ratio = sim.next(ws.step);
  return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryStep>& steps) {
  if (steps.empty()) return;
  const auto d = steps.front().x.size();
  const auto k = steps.front().u.size();
  for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << "x_" << i;
  for (Eigen::Index i = 0; i < k; ++i) out << ",u_" << i;
  out << ",c\n";
  for (const auto& s : steps) {
    for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << csv::number(s.x(i));
    for (Eigen::Index i = 0; i < k; ++i) out << ',' << csv::number(s.u(i));
    out << ',' << csv::number(s.c) << '\n';
  }
}

}  // namespace lqrac
