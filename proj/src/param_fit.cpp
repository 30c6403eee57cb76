#include "kleinbox/param_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kleinbox::fit {
namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

/// max_j |J_j . r| / (|J_j| |r|), zero for a zero residual.
double scaled_gradient(const Eigen::MatrixXd& J, const Eigen::VectorXd& r) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  const Eigen::VectorXd g = J.transpose() * r;
  double best = 0.0;
  for (Eigen::Index j = 0; j < J.cols(); ++j) {
    const double cn = J.col(j).norm();
    if (cn > 0.0) best = std::max(best, std::abs(g(j)) / (cn * rn));
  }
  return best;
}

/// Solves min |J d + r|^2 + lambda |D d|^2 by QR on the stacked system.
Eigen::VectorXd damped_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& r,
                            const Eigen::VectorXd& scale, double lambda) {
  const Eigen::Index m = J.rows();
  const Eigen::Index n = J.cols();
  if (lambda == 0.0) return J.colPivHouseholderQr().solve(-r);
  Eigen::MatrixXd A(m + n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m + n);
  A.topRows(m) = J;
  A.bottomRows(n) = (std::sqrt(lambda) * scale).asDiagonal();
  b.head(m) = -r;
  return A.colPivHouseholderQr().solve(b);
}

void assert_pairs(std::span<const DispersionPair> pairs) {
  if (pairs.size() < 3) throw DomainError("dispersion fit needs at least 3 pairs");
  for (const auto& p : pairs) {
    if (!std::isfinite(p.frequency) || !std::isfinite(p.wavevector)) {
      throw DomainError("non-finite dispersion pair");
    }
    if (p.wavevector < 0.0) {
      throw DomainError("wavevector must be real and non-negative");
    }
  }
}

BandParams two_point_start(std::span<const DispersionPair> pairs,
                           double center) {
  const auto [lo, hi] = std::minmax_element(
      pairs.begin(), pairs.end(),
      [](const auto& a, const auto& b) { return a.wavevector < b.wavevector; });
  BandParams init;
  init.center = center;
  init.mass_energy = 10.0;
  const double dk2 = hi->wavevector * hi->wavevector - lo->wavevector * lo->wavevector;
  const double df2 = std::pow(hi->frequency - center, 2) -
                     std::pow(lo->frequency - center, 2);
  init.hbar_c = dk2 > 0.0 ? std::sqrt(std::abs(df2 / dk2)) : 1.0;
  return init;
}

/// Both branches share r_i = (f_i - F)^2 - M^2 - C^2 k_i^2 over (M, C, F).
FitResult fit_dispersion(std::span<const DispersionPair> pairs,
                         const BandParams& init, const LmOptions& options) {
  const std::vector<DispersionPair> data(pairs.begin(), pairs.end());
  const auto m = static_cast<Eigen::Index>(data.size());
  ResidualFn residual = [&data, m](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& d = data[static_cast<std::size_t>(i)];
      r(i) = std::pow(d.frequency - x(2), 2) - x(0) * x(0) -
             x(1) * x(1) * d.wavevector * d.wavevector;
    }
    return r;
  };
  JacobianFn jacobian = [&data, m](const Eigen::VectorXd& x) {
    Eigen::MatrixXd J(m, 3);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& d = data[static_cast<std::size_t>(i)];
      J(i, 0) = -2.0 * x(0);
      J(i, 1) = -2.0 * x(1) * d.wavevector * d.wavevector;
      J(i, 2) = -2.0 * (d.frequency - x(2));
    }
    return J;
  };
  const Eigen::Vector3d x0(init.mass_energy, init.hbar_c, init.center);
  FitResult out;
  out.engine = lm_minimize(residual, jacobian, x0, options);
  out.params.mass_energy = std::abs(out.engine.params(0));
  out.params.hbar_c = std::abs(out.engine.params(1));
  out.params.center = out.engine.params(2);
  out.residual_norm = out.engine.residual_norm;
  out.iterations = out.engine.iterations;
  out.converged = out.engine.converged;
  out.covariance = out.engine.covariance;
  return out;
}

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Gradient: return "gradient";
    case Termination::Step: return "step";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LambdaOverflow: return "lambda_overflow";
  }
  return "unknown";
}

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual,
                                 const Eigen::VectorXd& x) {
  const Eigen::VectorXd r0 = residual(x);
  Eigen::MatrixXd J(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(std::abs(x(j)), 1.0);
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
  }
  return J;
}

LmResult lm_minimize(const ResidualFn& residual, const JacobianFn& jacobian,
                     const Eigen::VectorXd& init, const LmOptions& options) {
  auto jac = [&](const Eigen::VectorXd& x) {
    return jacobian ? jacobian(x) : numeric_jacobian(residual, x);
  };
  LmResult out;
  Eigen::VectorXd x = init;
  Eigen::VectorXd r = residual(x);
  if (r.size() < x.size()) {
    throw DomainError("fewer residuals than parameters");
  }
  if (!all_finite(r)) throw DomainError("residual is not finite at the start");
  Eigen::MatrixXd J = jac(x);
  double cost = 0.5 * r.squaredNorm();
  Eigen::VectorXd scale = J.colwise().norm().transpose();

  // Start undamped: a Gauss-Newton step that reduces the cost is always
  // taken, so linear problems finish in one step.
  double lambda = 0.0;
  int it = 0;
  auto record = [&] {
    if (options.record_trace) out.trace.push_back({it, cost, lambda, x});
  };
  record();
  out.termination = Termination::MaxIterations;
  while (it < options.max_iterations) {
    if (scaled_gradient(J, r) < options.gradient_tol) {
      out.termination = Termination::Gradient;
      break;
    }
    scale = scale.cwiseMax(J.colwise().norm().transpose());
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
      if (scale(j) == 0.0) scale(j) = 1.0;
    }
    bool accepted = false;
    bool tiny_step = false;
    while (!accepted) {
      const Eigen::VectorXd step = damped_step(J, r, scale, lambda);
      tiny_step = step.norm() <= options.step_tol * (x.norm() + options.step_tol);
      const Eigen::VectorXd x_new = x + step;
      const Eigen::VectorXd r_new = residual(x_new);
      const double cost_new = all_finite(r_new)
                                  ? 0.5 * r_new.squaredNorm()
                                  : std::numeric_limits<double>::infinity();
      if (cost_new < cost) {
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = lambda / 10.0 < 1e-12 ? 0.0 : lambda / 10.0;
        accepted = true;
      } else if (tiny_step) {
        break;
      } else {
        lambda = std::max(lambda * 10.0, options.lambda_init);
        if (lambda > options.lambda_max) break;
      }
    }
    if (!accepted) {
      out.termination = tiny_step ? Termination::Step : Termination::LambdaOverflow;
      break;
    }
    ++it;
    J = jac(x);
    record();
    if (tiny_step) {
      out.termination = Termination::Step;
      break;
    }
  }

  out.params = x;
  out.iterations = it;
  out.residual_norm = r.norm();
  out.gradient_norm = scaled_gradient(J, r);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-10 * (s.size() > 0 ? s(0) : 0.0);
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(x.size(), x.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) {
      inv += svd.matrixV().col(i) * svd.matrixV().col(i).transpose() / (s(i) * s(i));
    } else {
      out.rank_deficient = true;
    }
  }
  const auto dof = r.size() - x.size();
  const double s2 = r.squaredNorm() / static_cast<double>(dof > 0 ? dof : 1);
  out.covariance = s2 * inv;
  out.converged = (out.termination == Termination::Gradient ||
                   out.termination == Termination::Step) &&
                  !out.rank_deficient;
  return out;
}

FitResult fit_dispersion_particle(std::span<const DispersionPair> pairs,
                                  std::optional<BandParams> init,
                                  const LmOptions& options) {
  assert_pairs(pairs);
  if (!init) {
    double f_min = pairs.front().frequency;
    for (const auto& p : pairs) f_min = std::min(f_min, p.frequency);
    init = two_point_start(pairs, f_min - 10.0);
  }
  return fit_dispersion(pairs, *init, options);
}

FitResult fit_dispersion_hole(std::span<const DispersionPair> pairs,
                              std::optional<BandParams> init,
                              const LmOptions& options) {
  assert_pairs(pairs);
  if (!init) {
    double f_max = pairs.front().frequency;
    for (const auto& p : pairs) f_max = std::max(f_max, p.frequency);
    init = two_point_start(pairs, f_max + 10.0);
  }
  return fit_dispersion(pairs, *init, options);
}

FitResult fit_level_sequence(std::span<const double> levels, double length,
                             continuum::Branch branch, BandParams init,
                             const SequenceOptions& options) {
  if (levels.size() < 4) throw DomainError("level sequence fit needs at least 4 levels");
  if (!(length > 0.0)) throw DomainError("box length must be positive");
  std::vector<double> measured(levels.begin(), levels.end());
  std::sort(measured.begin(), measured.end());
  const bool hole = branch == continuum::Branch::Hole;
  if (hole) std::reverse(measured.begin(), measured.end());
  const auto n = static_cast<Eigen::Index>(measured.size());
  const auto window = options.scan_window;

  // Level n (1-based) of the model, in absolute frequency.
  auto model_level = [length, hole](const Eigen::VectorXd& x, int level) {
    const double eps =
        continuum::box_level_energy(length, level, std::abs(x(0)), std::abs(x(1)));
    return hole ? x(2) - eps : x(2) + eps;
  };
  // Distance by which the model violates "levels 1..N inside, N+1 outside".
  auto violation = [&](const Eigen::VectorXd& x) {
    if (!window) return 0.0;
    const double first = model_level(x, 1);
    const double last = model_level(x, static_cast<int>(n));
    const double next = model_level(x, static_cast<int>(n) + 1);
    if (hole) {
      return std::max(0.0, first - window->hi) + std::max(0.0, window->lo - last) +
             std::max(0.0, next - window->lo);
    }
    return std::max(0.0, window->lo - first) + std::max(0.0, last - window->hi) +
           std::max(0.0, window->hi - next);
  };
  ResidualFn residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(window ? n + 1 : n);
    for (Eigen::Index i = 0; i < n; ++i) {
      r(i) = measured[static_cast<std::size_t>(i)] - model_level(x, static_cast<int>(i) + 1);
    }
    if (window) r(n) = options.penalty_weight * violation(x);
    return r;
  };

  FitResult out;
  const Eigen::Vector3d x0(init.mass_energy, init.hbar_c, init.center);
  out.engine = lm_minimize(residual, nullptr, x0, options.lm);
  const auto& x = out.engine.params;
  out.params = {std::abs(x(0)), std::abs(x(1)), x(2)};
  out.residual_norm = out.engine.residual_norm;
  out.iterations = out.engine.iterations;
  out.converged = out.engine.converged;
  out.covariance = out.engine.covariance;

  if (window && violation(x) > 0.0) {
    std::size_t count = 0;
    for (int level = 1; level <= static_cast<int>(n) + 8; ++level) {
      if (window->contains(model_level(x, level))) ++count;
    }
    throw LevelCountMismatch(measured.size(), count,
                             "model levels inside the scan window");
  }
  return out;
}

}  // namespace kleinbox::fit
