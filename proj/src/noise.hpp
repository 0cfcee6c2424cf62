// Trace-class diagonal noise and exact Gaussian convolution increments.
//
// Both Wiener processes are diagonal in the sine basis: Q e_k = beta_k e_k
// with summable beta_k.  The integrators never take an Euler noise step;
// each stochastic convolution over one step is sampled exactly from its
// per-mode Gaussian law, so step sizes are limited by drift accuracy only.
#pragma once

#include <vector>

#include "rng.hpp"
#include "spectral.hpp"

namespace slowfast {

enum class NoiseRole { Slow, Fast };

struct NoiseSpec {
  NoiseRole role;
  std::vector<double> beta;  // per-mode intensities, index k-1

  double trace() const {
    double s = 0.0;
    for (double b : beta) s += b;
    return s;
  }
};

// beta_k = scale * k^{-exponent}, k = 1..n.  Summability needs exponent > 1
// unless scale is 0.
NoiseSpec power_law_noise(NoiseRole role, int n, double exponent,
                          double scale);

// Plain Wiener increment: coefficients N(0, beta_k dt).
SpectralField sample_increment(const NoiseSpec& spec, const BasisPtr& basis,
                               double dt, Rng& rng);

// Fast-equation convolution over one step:
//   integral_0^dt exp(-lambda (dt-s)/eps) dW(s)/sqrt(eps)
// has per-mode variance beta (1 - exp(-2 lambda dt/eps)) / (2 lambda).
double ou_conv_variance(double lambda, double beta, double dt, double eps);

// Wave convolution over one step injects noise into the velocity and spreads
// onto position through the group.  With w = sqrt(lambda):
//   pos kernel sin(w (dt-s))/w, vel kernel cos(w (dt-s)).
// Exact 2x2 covariance by the Ito isometry:
//   Var(pos) = beta (dt/2 - sin(2 w dt)/(4 w)) / lambda
//   Var(vel) = beta (dt/2 + sin(2 w dt)/(4 w))
//   Cov      = beta sin(w dt)^2 / (2 lambda)
void wave_conv_covariance(double lambda, double beta, double dt,
                          double* var_pos, double* var_vel, double* cov);

// Precomputed per-mode step tables; all step draws reduce to a few fused
// multiply-adds per mode.
struct FastOuStep {
  std::vector<double> decay;  // exp(-lambda dt/eps)
  std::vector<double> gain;   // (1 - decay)/lambda, multiplies frozen drift
  std::vector<double> sd;     // sqrt of the convolution variance
};
FastOuStep make_fast_ou_step(const SpectralBasis& b, const NoiseSpec& q,
                             double dt, double eps);

struct WaveKick {
  // Lower Cholesky factor of the per-mode 2x2 covariance.
  std::vector<double> l11, l21, l22;

  // Draws the correlated (pos, vel) kick for mode index i.
  inline void sample(int i, Rng& rng, double* dpos, double* dvel) const {
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    *dpos = l11[i] * g1;
    *dvel = l21[i] * g1 + l22[i] * g2;
  }
};
WaveKick make_wave_kick(const SpectralBasis& b, const NoiseSpec& q, double dt);

}  // namespace slowfast
