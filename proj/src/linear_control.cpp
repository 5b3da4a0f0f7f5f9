#include "gva/linear_control.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gva/errors.hpp"

namespace gva {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double quad_form(const Matrix& M, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < M.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < M.cols(); ++j) row += M(i, j) * x[j];
    s += x[i] * row;
  }
  return s;
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Vector InitSampler::sample(Rng& rng, std::size_t dim) const {
  switch (kind) {
    case Kind::kGaussian: {
      const Vector zero(dim, 0.0);
      return gaussian_vector(rng, dim, zero, scale);
    }
    case Kind::kUnitCircle: {
      const double a = 2.0 * std::numbers::pi * rng.uniform();
      return {std::cos(a), std::sin(a)};
    }
    case Kind::kArc: {
      const double a = (arc_lo_deg + (arc_hi_deg - arc_lo_deg) * rng.uniform()) * kDeg;
      return {std::cos(a), std::sin(a)};
    }
    case Kind::kFixed:
      return fixed;
  }
  return Vector(dim, 0.0);
}

void InitSampler::validate(std::size_t dim) const {
  switch (kind) {
    case Kind::kGaussian:
      if (!(scale >= 0.0)) throw ArgumentError("init sampler: scale must be >= 0");
      break;
    case Kind::kUnitCircle:
      if (dim != 2) throw ArgumentError("init sampler: unit circle requires a 2-d state");
      break;
    case Kind::kArc:
      if (dim != 2) throw ArgumentError("init sampler: arc requires a 2-d state");
      if (!(arc_hi_deg >= arc_lo_deg)) throw ArgumentError("init sampler: arc bounds out of order");
      break;
    case Kind::kFixed:
      if (fixed.size() != dim) throw ArgumentError("init sampler: fixed state has the wrong dimension");
      if (!all_finite(fixed)) throw ArgumentError("init sampler: fixed state is not finite");
      break;
  }
}

void LinearSystem::validate() const {
  if (A.empty() || !A.square()) throw ArgumentError("linear system: A must be square and non-empty, got " + shape(A));
  if (B.rows() != A.rows() || B.cols() == 0)
    throw ArgumentError("linear system: B is " + shape(B) + ", expected " + std::to_string(A.rows()) + "xm");
  if (Q.rows() != A.rows() || !Q.square()) throw ArgumentError("linear system: Q is " + shape(Q));
  if (R.rows() != B.cols() || !R.square()) throw ArgumentError("linear system: R is " + shape(R));
  if (!A.all_finite() || !B.all_finite() || !Q.all_finite() || !R.all_finite())
    throw ArgumentError("linear system: non-finite matrix entry");
  if (!is_psd(Q)) throw ArgumentError("linear system: Q must be symmetric PSD");
  if (!is_psd(R)) throw ArgumentError("linear system: R must be symmetric PSD");
  if (!(sigma_w >= 0.0)) throw ArgumentError("linear system: sigma_w must be >= 0");
  if (horizon < 1) throw ArgumentError("linear system: horizon must be >= 1");
  if (cliff) {
    if (cliff->coordinate >= A.rows()) throw ArgumentError("linear system: cliff coordinate out of range");
    if (!(cliff->kappa < 0.0)) throw ArgumentError("linear system: cliff kappa must be < 0");
  }
  init.validate(A.rows());
}

PolicyFn as_policy(const LinearPolicy& policy) {
  return [K = policy.K](std::span<const double> x, std::span<const double>) { return K * x; };
}

RolloutResult rollout(const LinearSystem& system, const PolicyFn& policy, std::span<const double> x0,
                      Rng& rng) {
  const std::size_t dx = system.state_dim();
  const std::size_t du = system.action_dim();
  if (x0.size() != dx)
    throw ArgumentError("rollout: x0 has dimension " + std::to_string(x0.size()) + ", system has " +
                        std::to_string(dx));
  RolloutResult r;
  r.states.reserve(system.horizon + 1);
  r.actions.reserve(system.horizon);
  r.states.emplace_back(x0.begin(), x0.end());
  Vector prev_u(du, 0.0);
  Vector next(dx);
  for (std::size_t t = 0; t < system.horizon; ++t) {
    const Vector& x = r.states.back();
    if (system.cliff && x[system.cliff->coordinate] < system.cliff->kappa) {
      r.terminated_at = t;
      return r;
    }
    Vector u = policy(x, prev_u);
    if (u.size() != du)
      throw ArgumentError("rollout: policy returned " + std::to_string(u.size()) + " actions, expected " +
                          std::to_string(du));
    for (std::size_t i = 0; i < dx; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < dx; ++j) v += system.A(i, j) * x[j];
      for (std::size_t j = 0; j < du; ++j) v += system.B(i, j) * u[j];
      if (system.sigma_w > 0.0) v += system.sigma_w * rng.normal();
      next[i] = v;
    }
    if (!all_finite(u) || !all_finite(next)) {
      r.diverged = true;
      r.terminated_at = t;
      return r;
    }
    r.total_reward += system.cliff ? 1.0 : -(quad_form(system.Q, x) + quad_form(system.R, u));
    r.actions.push_back(u);
    prev_u = std::move(u);
    r.states.push_back(next);
  }
  if (system.cliff && r.states.back()[system.cliff->coordinate] < system.cliff->kappa)
    r.terminated_at = system.horizon;
  return r;
}

RolloutResult rollout(const LinearSystem& system, const LinearPolicy& policy,
                      std::span<const double> x0, Rng& rng) {
  if (policy.K.rows() != system.action_dim() || policy.K.cols() != system.state_dim())
    throw ArgumentError("rollout: K is " + shape(policy.K) + ", system needs " +
                        std::to_string(system.action_dim()) + "x" + std::to_string(system.state_dim()));
  return rollout(system, as_policy(policy), x0, rng);
}

namespace {

Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& S,
                   Matrix* gain) {
  const Matrix At = A.transpose();
  const Matrix Bt = B.transpose();
  const Matrix SA = S * A;
  const Matrix G = inverse(R + Bt * S * B);
  const Matrix BtSA = Bt * SA;
  if (gain) *gain = -1.0 * (G * BtSA);
  Matrix next = Q + At * SA - (At * S * B) * G * BtSA;
  // Symmetrize to keep round-off from accumulating in the off-diagonal.
  for (std::size_t i = 0; i < next.rows(); ++i)
    for (std::size_t j = i + 1; j < next.cols(); ++j) {
      const double m = 0.5 * (next(i, j) + next(j, i));
      next(i, j) = next(j, i) = m;
    }
  return next;
}

}  // namespace

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& S) {
  return max_abs_diff(S, riccati_map(A, B, Q, R, S, nullptr));
}

DareResult dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double tol,
                      std::size_t max_iter) {
  if (!A.square() || B.rows() != A.rows() || Q.rows() != A.rows() || !Q.square() ||
      R.rows() != B.cols() || !R.square())
    throw ArgumentError("dare_solve: incompatible shapes A " + shape(A) + ", B " + shape(B) + ", Q " +
                        shape(Q) + ", R " + shape(R));
  if (!is_psd(Q) || !is_psd(R)) throw ArgumentError("dare_solve: Q and R must be symmetric PSD");
  if (!(tol > 0.0)) throw ArgumentError("dare_solve: tol must be > 0");
  DareResult out;
  Matrix S = Q;
  double delta = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Matrix next = riccati_map(A, B, Q, R, S, nullptr);
    if (!next.all_finite()) throw NumericError("dare_solve: iterate diverged at iteration " + std::to_string(it));
    delta = max_abs_diff(next, S);
    S = std::move(next);
    if (delta < tol) {
      out.iterations = it;
      riccati_map(A, B, Q, R, S, &out.K);
      out.S = S;
      out.residual = dare_residual(A, B, Q, R, S);
      return out;
    }
  }
  throw NumericError("dare_solve: no convergence after " + std::to_string(max_iter) +
                     " iterations, last change " + std::to_string(delta));
}

LinearSystem make_marginally_stable(Rng& rng, std::size_t d, double alpha, std::size_t horizon,
                                    std::optional<Matrix> rotation) {
  if (!(alpha > 0.0)) throw ArgumentError("make_marginally_stable: alpha must be > 0");
  if (horizon < 1) throw ArgumentError("make_marginally_stable: horizon must be >= 1");
  if (d < 1) throw ArgumentError("make_marginally_stable: d must be >= 1");
  const double eps = alpha / static_cast<double>(horizon);
  Matrix O = rotation ? *rotation : random_rotation(rng, d);
  if (O.rows() != d || O.cols() != d) throw ArgumentError("make_marginally_stable: rotation has the wrong shape");
  LinearSystem s;
  s.A = (1.0 + eps) * Matrix::identity(d);
  s.B = -eps * O;
  s.Q = Matrix::identity(d);
  s.R = Matrix::identity(d);
  s.sigma_w = 1e-3;
  s.horizon = horizon;
  s.init.kind = InitSampler::Kind::kGaussian;
  return s;
}

LinearSystem reference_marginal_system(std::size_t horizon) {
  const double phi = std::atan2(0.8250, 1.3867);
  const Matrix O{{std::cos(phi), std::sin(phi)}, {std::sin(phi), -std::cos(phi)}};
  LinearSystem s;
  s.A = 1.0025 * Matrix::identity(2);
  s.B = -0.005 * O;
  s.Q = Matrix::identity(2);
  s.R = Matrix::identity(2);
  s.sigma_w = 1e-3;
  s.horizon = horizon;
  s.init.kind = InitSampler::Kind::kGaussian;
  return s;
}

LinearSystem make_spring_cliff(double eta_time, double kappa, std::size_t horizon) {
  if (!(eta_time > 0.0)) throw ArgumentError("make_spring_cliff: eta must be > 0");
  if (!(kappa < 0.0)) throw ArgumentError("make_spring_cliff: kappa must be < 0");
  LinearSystem s;
  s.A = mat_exp(eta_time * Matrix{{0.0, 1.0}, {-1.0, 0.0}});
  s.B = Matrix{{0.0}, {1.0}};
  s.Q = Matrix::identity(2);
  s.R = Matrix::identity(1);
  s.sigma_w = 0.0;
  s.horizon = horizon;
  s.init.kind = InitSampler::Kind::kUnitCircle;
  s.cliff = CliffTermination{0, kappa};
  return s;
}

std::vector<AmplificationRow> error_amplification_probe(std::size_t d, double eps, double c,
                                                        std::span<const double> eps_primes,
                                                        std::size_t horizon) {
  if (!(eps > 0.0) || !(c > 0.0)) throw ArgumentError("error_amplification_probe: eps and c must be > 0");
  if (d < 1 || horizon < 1) throw ArgumentError("error_amplification_probe: d and H must be >= 1");
  LinearSystem sys;
  sys.A = Matrix::identity(d);
  sys.B = c * Matrix::identity(d);
  sys.Q = Matrix::identity(d);
  sys.R = Matrix(d, d, 0.0);
  sys.horizon = horizon;
  const LinearPolicy expert{-(eps / c) * Matrix::identity(d)};
  Rng unused(0);

  auto total = [&](const LinearPolicy& pi) {
    double j = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      Vector x0(d, 0.0);
      x0[i] = 1.0;
      const RolloutResult r = rollout(sys, pi, x0, unused);
      if (r.diverged)
        throw NumericError("error_amplification_probe: state overflow at step " +
                           std::to_string(*r.terminated_at));
      j += r.total_reward;
    }
    if (!std::isfinite(j)) throw NumericError("error_amplification_probe: reward overflow");
    return j;
  };

  const double j_star = total(expert);
  std::vector<AmplificationRow> rows;
  for (double ep : eps_primes) {
    const LinearPolicy pi{expert.K + ep * Matrix::identity(d)};
    rows.push_back({ep, c * ep - eps, j_star - total(pi)});
  }
  return rows;
}

StabilityMarginReport stability_margin_check(const LinearSystem& system, const Matrix& k_star,
                                             const Matrix& k_hat, double eps,
                                             std::span<const double> x0, std::size_t grid,
                                             Rng& rng) {
  system.validate();
  if (!(eps > 0.0)) throw ArgumentError("stability_margin_check: eps must be > 0");
  StabilityMarginReport rep;
  rep.closed_loop_norm = op_norm(system.A + system.B * k_star);
  if (rep.closed_loop_norm > 1.0 + 1e-8)
    throw ArgumentError("stability_margin_check: |A + B K*|_op = " + std::to_string(rep.closed_loop_norm) +
                        " exceeds 1");
  const double H = static_cast<double>(system.horizon);
  rep.radius = eps / (H * op_norm(system.B));
  const double dist = op_norm(k_star - k_hat);
  if (dist > rep.radius * (1.0 + 1e-12))
    throw ArgumentError("stability_margin_check: |K* - K_hat|_op = " + std::to_string(dist) +
                        " exceeds eps / (H |B|_op) = " + std::to_string(rep.radius));
  rep.constant = op_norm(system.Q + k_hat.transpose() * system.R * k_hat);
  const double x2 = squared_norm(x0);
  rep.bound = 100.0 * (rep.constant * H * H + H * op_norm(system.R)) * x2 * eps;

  LinearSystem quiet = system;
  quiet.sigma_w = 0.0;
  Rng unused(0);
  const double j_star = rollout(quiet, LinearPolicy{k_star}, x0, unused).total_reward;
  rep.gaps.push_back(j_star - rollout(quiet, LinearPolicy{k_hat}, x0, unused).total_reward);
  for (std::size_t g = 0; g < grid; ++g) {
    Matrix dir(k_star.rows(), k_star.cols());
    for (double& v : dir.data()) v = rng.normal();
    const double r = rep.radius * static_cast<double>(g + 1) / static_cast<double>(grid);
    const Matrix K = k_star + (r / op_norm(dir)) * dir;
    rep.gaps.push_back(j_star - rollout(quiet, LinearPolicy{K}, x0, unused).total_reward);
  }
  rep.max_gap = rep.gaps.front();
  for (double g : rep.gaps) rep.max_gap = std::max(rep.max_gap, g);
  rep.ok = rep.max_gap <= rep.bound;
  return rep;
}

}  // namespace gva
