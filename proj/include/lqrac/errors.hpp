#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lqrac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a gain K does not satisfy rho(A - BK) < 1 - margin.
class UnstablePolicy : public Error {
 public:
  UnstablePolicy(double rho, const std::string& where)
      : Error(where + ": unstable policy, spectral radius " + std::to_string(rho)),
        rho_(rho) {}

  double spectral_radius() const noexcept { return rho_; }

 private:
  double rho_;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class IllConditioned : public Error {
 public:
  IllConditioned(double kappa, const std::string& where)
      : Error(where + ": ill-conditioned system, sigma_min " + std::to_string(kappa)),
        kappa_(kappa) {}

  double kappa() const noexcept { return kappa_; }

 private:
  double kappa_;
};

/// A critic iterate became NaN or Inf.
class Divergence : public Error {
 public:
  Divergence(const std::string& field, std::size_t iteration)
      : Error("divergence in '" + field + "' at iteration " + std::to_string(iteration)),
        field_(field),
        iteration_(iteration) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::string field_;
  std::size_t iteration_;
};

/// State norm exceeded the simulator's overflow threshold.
class Overflow : public Error {
 public:
  using Error::Error;
};

/// Importance ratio between target and behavior policies blew past its cap.
class DistributionMismatch : public Error {
 public:
  using Error::Error;
};

class GenerationFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace lqrac
