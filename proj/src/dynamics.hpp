// Time integration for the slow-fast system and its limit equations.
//
// All linear parts are advanced exactly (wave group, heat semigroup) and all
// stochastic convolutions are sampled exactly, so the only discretization
// error is drift freezing over one micro step.  The micro step obeys
// dt <= micro_factor * eps with micro_factor <= 0.05, which keeps the fast
// equation resolved; the macro grid only controls where states are recorded.
//
// Coupling convention: every simulator derives its slow Wiener stream as
// child("W1") of the stream handed in and consumes one (pos, vel) kick per
// mode per micro step.  Two runs given the same parent stream and the same
// grid therefore see the identical slow noise path, which is how paired
// slow-fast / averaged trajectories are produced.
#pragma once

#include <functional>
#include <vector>

#include "coefficients.hpp"
#include "noise.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace slowfast {

struct SimConfig {
  BasisPtr basis;
  double T = 0.5;
  int checkpoints = 20;        // number of macro intervals
  double micro_factor = 0.02;  // dt_micro <= micro_factor * eps
  NoiseSpec q1, q2;
  std::vector<double> u0, v0, y0;

  void validate() const;
  double dt_macro() const { return T / checkpoints; }
  // Largest divisor of dt_macro not exceeding micro_factor * eps.
  double dt_micro(double eps) const;
  long micro_per_macro(double eps) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> pos, vel;

  size_t size() const { return times.size(); }
};

// Averaged drift and its directional derivative.
class DriftProvider {
 public:
  virtual ~DriftProvider() = default;
  virtual void fbar(const double* u, double* out) = 0;
  // out = D Fbar(u)[z]; default: symmetric difference along z.
  virtual void dfbar(const double* u, const double* z, double* out);
  virtual int dim() const = 0;
};

// Diagonal closed-form drift of the linear family.
class LinearDrift : public DriftProvider {
 public:
  LinearDrift(const LinearFamily& fam, const SpectralBasis& b);
  void fbar(const double* u, double* out) override;
  void dfbar(const double* u, const double* z, double* out) override;
  int dim() const override { return static_cast<int>(coeff_.size()); }
  const std::vector<double>& coeffs() const { return coeff_; }

 private:
  std::vector<double> coeff_;
};

class ZeroDrift : public DriftProvider {
 public:
  explicit ZeroDrift(int n) : n_(n) {}
  void fbar(const double*, double* out) override {
    for (int i = 0; i < n_; ++i) out[i] = 0.0;
  }
  int dim() const override { return n_; }

 private:
  int n_;
};

// Nested ergodic estimate of the averaged drift: each call runs a fresh
// short frozen simulation (burn-in then time average).  Estimator noise is
// independent across calls, so it accumulates like additional diffusion of
// size O(se * sqrt(dt)) instead of biasing the drift.
class ErgodicDrift : public DriftProvider {
 public:
  ErgodicDrift(BasisPtr basis, CoefficientPtr family, NoiseSpec q2,
               double burn_in, double horizon, double dt,
               NoiseStream stream);
  void fbar(const double* u, double* out) override;
  int dim() const override { return basis_->n; }

 private:
  BasisPtr basis_;
  CoefficientPtr family_;
  NoiseSpec q2_;
  double burn_in_, horizon_, dt_;
  NoiseStream stream_;
  long calls_ = 0;
};

// Deviation noise intensity.  Diagonal providers report (Sigma Sigma*)_kk;
// a full-matrix provider carries one fixed n x n matrix.
class SigmaProvider {
 public:
  virtual ~SigmaProvider() = default;
  virtual bool diagonal() const = 0;
  virtual void sigma_sq_diag(const double* u, double* out) const = 0;
  virtual const std::vector<double>* full_matrix() const { return nullptr; }
  virtual int dim() const = 0;
};

class DiagonalSigma : public SigmaProvider {
 public:
  explicit DiagonalSigma(std::vector<double> sigma_sq)
      : s2_(std::move(sigma_sq)) {}
  bool diagonal() const override { return true; }
  void sigma_sq_diag(const double*, double* out) const override {
    for (size_t i = 0; i < s2_.size(); ++i) out[i] = s2_[i];
  }
  int dim() const override { return static_cast<int>(s2_.size()); }

 private:
  std::vector<double> s2_;
};

class MatrixSigma : public SigmaProvider {
 public:
  // mat is Sigma Sigma^*, row-major n x n, symmetric PSD.
  MatrixSigma(int n, std::vector<double> mat);
  bool diagonal() const override { return false; }
  void sigma_sq_diag(const double*, double* out) const override;
  const std::vector<double>* full_matrix() const override { return &mat_; }
  int dim() const override { return n_; }

 private:
  int n_;
  std::vector<double> mat_;
};

struct SlowFastRun {
  Trajectory traj;        // checkpoints of (pos, vel)
  Trajectory fast;        // checkpoints of y (in .pos; .vel empty) if kept
  bool aborted = false;
  long steps = 0;
};

SlowFastRun simulate_slow_fast(const SimConfig& cfg,
                               const CoefficientPair& family, double eps,
                               const NoiseStream& noise,
                               bool keep_fast = false);

struct AveragedRun {
  Trajectory traj;   // macro checkpoints
  Trajectory micro;  // every micro step if kept (for the deviation equation)
  bool aborted = false;
  long steps = 0;
};

// grid_eps selects the micro grid so a paired slow-fast run can share W1.
AveragedRun simulate_averaged(const SimConfig& cfg, DriftProvider& drift,
                              double grid_eps, const NoiseStream& noise,
                              bool keep_micro = false);

// Frozen fast equation at fixed u; visits every grid node (including t = 0)
// with both spectral and grid values of y.  step_sizes may be non-uniform
// (graded grids resolve the fast transient cheaply).
using FrozenVisitor =
    std::function<void(long step, double t, const std::vector<double>& y,
                       const std::vector<double>& y_phys)>;
void simulate_frozen(const SpectralBasis& b, const CoefficientPair& family,
                     const NoiseSpec& q2, const std::vector<double>& u_fixed,
                     std::vector<double>& y,
                     const std::vector<double>& step_sizes,
                     const NoiseStream& w2, const FrozenVisitor& visit);

// Pointwise (X_eps - X_bar)/sqrt(eps) on matching checkpoint grids.
Trajectory compute_deviation(const Trajectory& eps_traj,
                             const Trajectory& bar_traj, double eps);

// Limit deviation equation driven along a recorded averaged path: one step
// per interval of bar_micro, reported every `thin` steps.
struct DeviationRun {
  Trajectory traj;
  bool aborted = false;
};
DeviationRun simulate_limit_deviation(const Trajectory& bar_micro,
                                      DriftProvider& drift,
                                      const SigmaProvider& sigma,
                                      const NoiseStream& noise, long thin);

// RK4 integration of the 2x2 Lyapunov equation for one deviation mode:
//   z'' = -(lambda - kappa) z + sigma dW,  P' = M P + P M^T + N.
// Returns {Var(z), Cov(z, z'), Var(z')} at time T.  Independent oracle for
// the sampled covariance of the limit equation.
void lyapunov_mode_covariance(double lambda, double kappa, double sigma_sq,
                              double T, int steps, double out[3]);

}  // namespace slowfast
