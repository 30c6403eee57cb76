#pragma once

// Damped least squares (Levenberg-Marquardt) and the dispersion fits that
// recover mc^2, c hbar and the band center from measured levels.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kleinbox/core.hpp"
#include "kleinbox/dirac_continuum.hpp"

namespace kleinbox::fit {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LmOptions {
  double gradient_tol = 1e-10;  // scaled gradient (cosine) test
  double step_tol = 1e-12;      // relative step test
  int max_iterations = 200;
  double lambda_init = 1e-3;
  double lambda_max = 1e16;
  bool record_trace = false;
};

enum class Termination {
  Gradient,       // gradient test met
  Step,           // step test met
  MaxIterations,
  LambdaOverflow,  // no decrease possible up to lambda_max
};

std::string to_string(Termination t);

struct LmIterate {
  int iteration = 0;
  double cost = 0.0;  // 0.5 |r|^2
  double lambda = 0.0;
  Eigen::VectorXd params;
};

struct LmResult {
  Eigen::VectorXd params;
  double residual_norm = 0.0;
  double gradient_norm = 0.0;  // max scaled gradient at the solution
  int iterations = 0;
  bool converged = false;
  bool rank_deficient = false;
  Termination termination = Termination::MaxIterations;
  /// s^2 (J^T J)^+ with s^2 = |r|^2 / (m - n) (or |r|^2 when m == n).
  Eigen::MatrixXd covariance;
  std::vector<LmIterate> trace;
};

/// Central differences with step 1e-6 max(|p_j|, 1).
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual,
                                 const Eigen::VectorXd& x);

/// Minimizes 0.5 |r(x)|^2. A null jacobian selects numeric differences.
/// Throws DomainError if the residual has fewer entries than parameters.
/// A rank-deficient Jacobian at the solution flags the result as not
/// converged.
LmResult lm_minimize(const ResidualFn& residual, const JacobianFn& jacobian,
                     const Eigen::VectorXd& init, const LmOptions& options = {});

struct DispersionPair {
  double frequency = 0.0;   // MHz, absolute
  double wavevector = 0.0;  // 1/mm
};

/// Band parameters. `center` is f0 for the particle branch and f0 + df for
/// the hole branch.
struct BandParams {
  double mass_energy = 0.0;  // MHz
  double hbar_c = 0.0;       // MHz mm
  double center = 0.0;       // MHz
};

struct FitResult {
  BandParams params;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (mc2, hbar_c, center)
  LmResult engine;
};

/// (f - f0)^2 = (mc^2)^2 + (c hbar k)^2. Default start: f0 = min f - 10,
/// mc^2 = 10, c hbar from the two-point slope. Needs at least 3 pairs.
FitResult fit_dispersion_particle(std::span<const DispersionPair> pairs,
                                  std::optional<BandParams> init = std::nullopt,
                                  const LmOptions& options = {});

/// (f0 + df - f)^2 = (mc^2)^2 + (c hbar k)^2 for hole states below the band
/// center. Default start: center = max f + 10. Throws DomainError for
/// negative or non-finite k.
FitResult fit_dispersion_hole(std::span<const DispersionPair> pairs,
                              std::optional<BandParams> init = std::nullopt,
                              const LmOptions& options = {});

struct SequenceOptions {
  /// Absolute frequency window holding the measured levels. When set, the
  /// model level count inside it must match; during iteration a mismatch is
  /// a smooth penalty, at the end it throws LevelCountMismatch.
  std::optional<Interval> scan_window;
  double penalty_weight = 10.0;
  LmOptions lm;
};

/// Matches sorted levels to a uniform box of length L: particle levels
/// f0 + eps_n (n = 1 at the bottom), hole levels f0 + df - eps_n (n = 1 at
/// the top). Needs at least 4 levels.
FitResult fit_level_sequence(std::span<const double> levels, double length,
                             continuum::Branch branch, BandParams init,
                             const SequenceOptions& options = {});

}  // namespace kleinbox::fit
