#pragma once

// Linear-quadratic environments, the Riccati expert, rollouts and the
// error-amplification probes.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gva/numerics.hpp"

namespace gva {

/// Initial-state distribution nu.
struct InitSampler {
  enum class Kind { kGaussian, kUnitCircle, kArc, kFixed };
  Kind kind = Kind::kGaussian;
  double scale = 1.0;       // kGaussian standard deviation
  double arc_lo_deg = 0.0;  // kArc, angle measured from the +x1 axis
  double arc_hi_deg = 360.0;
  Vector fixed;             // kFixed

  Vector sample(Rng& rng, std::size_t dim) const;
  void validate(std::size_t dim) const;
};

/// Episode ends the first time x[coordinate] < kappa; reward is 1 per survived step.
struct CliffTermination {
  std::size_t coordinate = 0;
  double kappa = -0.05;
};

struct LinearSystem {
  Matrix A;
  Matrix B;
  Matrix Q;
  Matrix R;
  double sigma_w = 0.0;
  std::size_t horizon = 1000;
  InitSampler init;
  std::optional<CliffTermination> cliff;

  std::size_t state_dim() const { return A.rows(); }
  std::size_t action_dim() const { return B.cols(); }
  void validate() const;
};

struct LinearPolicy {
  Matrix K;  // d_u x d_x
  Vector act(std::span<const double> x) const { return K * x; }
};

/// u = policy(x, previous u); the previous action is zero at the first step.
using PolicyFn = std::function<Vector(std::span<const double>, std::span<const double>)>;

PolicyFn as_policy(const LinearPolicy& policy);

struct RolloutResult {
  std::vector<Vector> states;
  std::vector<Vector> actions;
  double total_reward = 0.0;
  std::optional<std::size_t> terminated_at;
  /// Set when a state stopped being finite; the trajectory is truncated there.
  bool diverged = false;
};

RolloutResult rollout(const LinearSystem& system, const PolicyFn& policy, std::span<const double> x0,
                      Rng& rng);
RolloutResult rollout(const LinearSystem& system, const LinearPolicy& policy,
                      std::span<const double> x0, Rng& rng);

struct DareResult {
  Matrix S;
  Matrix K;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Fixed-point iteration of the Riccati map from S = Q; K = -(R + B'SB)^{-1} B'SA.
DareResult dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                      double tol = 1e-12, std::size_t max_iter = 1000000);
/// max-norm of S - Riccati(S)
double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& S);

/// A = (1 + alpha/H) I, B = -(alpha/H) O for a uniformly random rotation O.
/// Pass `rotation` to fix O.
LinearSystem make_marginally_stable(Rng& rng, std::size_t d, double alpha, std::size_t horizon,
                                    std::optional<Matrix> rotation = std::nullopt);

/// The 2-d marginally stable system with A = 1.0025 I and B = -0.005 O for the
/// reflection O that gives the Riccati gain [[1.3867, 0.8250], [0.8250, -1.3867]].
LinearSystem reference_marginal_system(std::size_t horizon = 1000);

/// Discretized spring A = exp(eta [[0,1],[-1,0]]), velocity-only control,
/// survival reward with a cliff at x1 < kappa.
LinearSystem make_spring_cliff(double eta_time, double kappa, std::size_t horizon);

struct AmplificationRow {
  double eps_prime = 0.0;
  double delta = 0.0;  // c eps' - eps
  double gap = 0.0;    // J(K*) - J(K* + eps' I), summed over unit basis starts
};

/// A = I, B = c I, K* = -(eps/c) I, perturbation eps' I, reward -sum_h |x_h|^2.
std::vector<AmplificationRow> error_amplification_probe(std::size_t d, double eps, double c,
                                                        std::span<const double> eps_primes,
                                                        std::size_t horizon);

struct StabilityMarginReport {
  double closed_loop_norm = 0.0;  // |A + B K*|_op
  double radius = 0.0;            // eps / (H |B|_op)
  double constant = 0.0;          // |Q + K^T R K|_op at K_hat
  double bound = 0.0;             // 100 (C H^2 + H |R|_op) |x0|^2 eps
  std::vector<double> gaps;       // J(K*) - J(K) over the perturbation grid
  double max_gap = 0.0;
  bool ok = false;
};

/// Rolls out K* and a grid of gains inside the ball |K - K*|_op <= radius
/// from x0 without noise and compares the reward gaps with the bound.
StabilityMarginReport stability_margin_check(const LinearSystem& system, const Matrix& k_star,
                                             const Matrix& k_hat, double eps,
                                             std::span<const double> x0, std::size_t grid,
                                             Rng& rng);

}  // namespace gva
