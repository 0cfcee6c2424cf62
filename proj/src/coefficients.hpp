// Reaction coefficients for the slow and fast equations.
//
// A CoefficientPair holds two scalar maps (f, g) applied pointwise on the
// grid (Nemytskii operators): f drives the wave velocity, g the fast heat
// equation.  Frozen-equation mixing requires the y-Lipschitz constant of g
// to stay below lambda_1; constructors enforce it, and the margin
// a_eff = lambda_1 - lip_y(g) paces burn-in and truncation horizons.
#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "noise.hpp"
#include "spectral.hpp"

namespace slowfast {

class CoefficientPair {
 public:
  virtual ~CoefficientPair() = default;

  virtual void f(const double* u, const double* y, double* out,
                 int n) const = 0;
  virtual void g(const double* u, const double* y, double* out,
                 int n) const = 0;

  virtual double lip_y_g() const = 0;
  virtual bool linear() const { return false; }
  virtual std::string name() const = 0;

  double mixing_margin() const { return kLambda1 - lip_y_g(); }

 protected:
  static void require_mixing(double lip_y);
};

// f = c u + d y, g = -a y + b u.  Everything about the averaged dynamics is
// closed-form; this family anchors the estimator and rate oracles.
class LinearFamily : public CoefficientPair {
 public:
  LinearFamily(double a, double b, double c, double d);

  void f(const double* u, const double* y, double* out, int n) const override;
  void g(const double* u, const double* y, double* out, int n) const override;
  double lip_y_g() const override { return std::abs(a_); }
  bool linear() const override { return true; }
  std::string name() const override { return "linear"; }

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double d() const { return d_; }

  // Frozen equation per mode: dY = -(a + lambda) Y dt + b u dt + dW.
  double frozen_rate(double lambda) const { return a_ + lambda; }
  double stationary_mean_coeff(double lambda) const {
    return b_ / frozen_rate(lambda);
  }
  double stationary_var(double lambda, double beta) const {
    return beta / (2.0 * frozen_rate(lambda));
  }
  // Averaged drift is diagonal: Fbar(u)_k = (c + d b/(a + lambda_k)) u_k.
  double fbar_coeff(double lambda) const {
    return c_ + d_ * stationary_mean_coeff(lambda);
  }
  // Poisson solution: Psi_k = d (y_k - m_k)/(a + lambda_k).
  double psi_coeff(double lambda) const { return d_ / frozen_rate(lambda); }
  // Deviation noise: (Sigma Sigma*)_kk = d^2 beta_k/(a + lambda_k)^2.
  double sigma_sq_coeff(double lambda, double beta) const {
    const double r = frozen_rate(lambda);
    return d_ * d_ * beta / (r * r);
  }

 private:
  double a_, b_, c_, d_;
};

// f = sin(u) + d tanh(y), g = tanh(b u) - a clamp(y, +-clip); with kappa > 0
// the extra kappa (|y| ^ 1)^(1/2) term makes g only 1/2-Hoelder in y near 0.
class BoundedFamily : public CoefficientPair {
 public:
  BoundedFamily(double a, double b, double d, double clip, double kappa);

  void f(const double* u, const double* y, double* out, int n) const override;
  void g(const double* u, const double* y, double* out, int n) const override;
  double lip_y_g() const override { return a_; }
  std::string name() const override {
    return kappa_ > 0.0 ? "bounded-holder" : "bounded";
  }

  double holder_kappa() const { return kappa_; }

 private:
  double a_, b_, d_, clip_, kappa_;
};

using CoefficientPtr = std::shared_ptr<const CoefficientPair>;

// Scratch buffers for grid round-trips.
struct Workspace {
  std::vector<double> pu, py, pf;
  explicit Workspace(int n) : pu(n), py(n), pf(n) {}
};

// Galerkin image of the Nemytskii operator: transform to the grid, apply the
// scalar map, transform back (projection onto the first n modes).
void apply_F(const SpectralBasis& b, const CoefficientPair& cp,
             const double* u, const double* y, double* out, Workspace& ws);
void apply_G(const SpectralBasis& b, const CoefficientPair& cp,
             const double* u, const double* y, double* out, Workspace& ws);

SpectralField apply_F(const CoefficientPair& cp, const SpectralField& u,
                      const SpectralField& y);
SpectralField apply_G(const CoefficientPair& cp, const SpectralField& u,
                      const SpectralField& y);

}  // namespace slowfast
