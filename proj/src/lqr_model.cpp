#include "lqrac/lqr_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lqrac {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch(std::string(what) + " must be a non-empty square matrix, got " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidArgument(std::string(what) + " has non-finite entries");
  }
}

void require_positive_definite(const Matrix& m, const char* what) {
  const double lo = min_eigenvalue(m);
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(lo > kDefinitenessTolerance * scale)) {
    throw InvalidArgument(std::string(what) + " is not positive definite (min eigenvalue " +
                          std::to_string(lo) + ")");
  }
}

std::size_t triangular_root(std::size_t n) {
  const auto m = static_cast<std::size_t>(
      std::llround((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0));
  return svec_dim(m) == n ? m : 0;
}

}  // namespace

Matrix symmetrized(const Matrix& m, const char* what) {
  require_square(m, what);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    throw InvalidArgument(std::string(what) + " is not symmetric (max asymmetry " +
                          std::to_string(asym) + ")");
  }
  return 0.5 * (m + m.transpose());
}

double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Vector svec(const Matrix& m) {
  const Matrix s = symmetrized(m, "svec argument");
  const auto n = static_cast<std::size_t>(s.rows());
  Vector out(static_cast<Eigen::Index>(svec_dim(n)));
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    out(idx++) = s(i, i);
    for (Eigen::Index j = i + 1; j < s.cols(); ++j) {
      out(idx++) = std::numbers::sqrt2 * s(i, j);
    }
  }
  return out;
}

Matrix smat(const Eigen::Ref<const Vector>& v) {
  const std::size_t m = triangular_root(static_cast<std::size_t>(v.size()));
  if (m == 0) {
    throw InvalidArgument("smat: length " + std::to_string(v.size()) +
                          " is not a triangular number");
  }
  const auto n = static_cast<Eigen::Index>(m);
  Matrix out(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = v(idx++);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = v(idx++) / std::numbers::sqrt2;
      out(i, j) = w;
      out(j, i) = w;
    }
  }
  return out;
}

Matrix sym_kron(const Matrix& a, const Matrix& b) {
  require_square(a, "sym_kron lhs");
  require_square(b, "sym_kron rhs");
  if (a.rows() != b.rows()) {
    throw DimensionMismatch("sym_kron: operands differ in size");
  }
  const auto m = static_cast<std::size_t>(a.rows());
  const auto p = static_cast<Eigen::Index>(svec_dim(m));
  Matrix out(p, p);
  Vector e = Vector::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    e(j) = 1.0;
    const Matrix s = smat(e);
    e(j) = 0.0;
    const Matrix image = b * s * a.transpose();
    out.col(j) = svec(0.5 * (image + image.transpose()));
  }
  return out;
}

ProblemInstance::ProblemInstance(Matrix a, Matrix b, Matrix q, Matrix r, Matrix psi,
                                 double sigma)
    : sigma_(sigma) {
  require_square(a, "A");
  if (b.rows() != a.rows() || b.cols() == 0) {
    throw DimensionMismatch("B must be d x k with d = rows(A) and k >= 1");
  }
  require_finite(a, "A");
  require_finite(b, "B");
  require_finite(q, "Q");
  require_finite(r, "R");
  require_finite(psi, "Psi");
  if (q.rows() != a.rows()) throw DimensionMismatch("Q must be d x d");
  if (r.rows() != b.cols()) throw DimensionMismatch("R must be k x k");
  if (psi.rows() != a.rows()) throw DimensionMismatch("Psi must be d x d");
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw InvalidArgument("sigma must be finite and nonnegative");
  }
  a_ = std::move(a);
  b_ = std::move(b);
  q_ = symmetrized(q, "Q");
  r_ = symmetrized(r, "R");
  psi_ = symmetrized(psi, "Psi");
  require_positive_definite(q_, "Q");
  require_positive_definite(r_, "R");
  require_positive_definite(psi_, "Psi");
}

Matrix ProblemInstance::psi_sigma() const {
  return psi_ + sigma_ * sigma_ * b_ * b_.transpose();
}

Matrix ProblemInstance::cost_weight() const {
  const auto d = a_.rows();
  const auto k = b_.cols();
  Matrix w = Matrix::Zero(d + k, d + k);
  w.topLeftCorner(d, d) = q_;
  w.bottomRightCorner(k, k) = r_;
  return w;
}

PolicyParams::PolicyParams(Matrix k) : K(std::move(k)) {
  if (!K.allFinite()) {
    throw InvalidArgument("policy gain has non-finite entries");
  }
}

Vector StateActionPair::joint() const {
  Vector z(x.size() + u.size());
  z << x, u;
  return z;
}

void feature_into(const Eigen::Ref<const Vector>& z, Vector& out) {
  const Eigen::Index n = z.size();
  const auto p = static_cast<Eigen::Index>(svec_dim(static_cast<std::size_t>(n)));
  if (out.size() != p) out.resize(p);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(idx++) = z(i) * z(i);
    const double zi = std::numbers::sqrt2 * z(i);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      out(idx++) = zi * z(j);
    }
  }
}

Vector feature(const StateActionPair& z) {
  Vector out;
  feature_into(z.joint(), out);
  return out;
}

double cost(const ProblemInstance& inst, const Eigen::Ref<const Vector>& x,
            const Eigen::Ref<const Vector>& u) {
  return x.dot(inst.Q() * x) + u.dot(inst.R() * u);
}

double cost(const ProblemInstance& inst, const StateActionPair& z) {
  if (static_cast<std::size_t>(z.x.size()) != inst.state_dim() ||
      static_cast<std::size_t>(z.u.size()) != inst.input_dim()) {
    throw DimensionMismatch("cost: state-action pair does not match instance dimensions");
  }
  return cost(inst, z.x, z.u);
}

}  // namespace lqrac
