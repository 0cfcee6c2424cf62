#include "noise.hpp"

#include <cmath>
#include <stdexcept>

namespace slowfast {

NoiseSpec power_law_noise(NoiseRole role, int n, double exponent,
                          double scale) {
  if (n < 1) throw std::invalid_argument("noise needs at least one mode");
  if (scale < 0.0) throw std::invalid_argument("noise scale must be >= 0");
  if (scale > 0.0 && exponent <= 1.0)
    throw std::invalid_argument("power-law exponent must exceed 1 (trace)");
  NoiseSpec spec{role, std::vector<double>(n)};
  for (int k = 1; k <= n; ++k)
    spec.beta[k - 1] = scale * std::pow(static_cast<double>(k), -exponent);
  return spec;
}

SpectralField sample_increment(const NoiseSpec& spec, const BasisPtr& basis,
                               double dt, Rng& rng) {
  if (static_cast<int>(spec.beta.size()) != basis->n)
    throw std::invalid_argument("noise spec does not match basis");
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  SpectralField f(basis);
  for (int i = 0; i < basis->n; ++i)
    f.c[i] = std::sqrt(spec.beta[i] * dt) * rng.normal();
  return f;
}

double ou_conv_variance(double lambda, double beta, double dt, double eps) {
  if (lambda <= 0.0 || dt <= 0.0 || eps <= 0.0)
    throw std::invalid_argument("ou_conv_variance needs positive arguments");
  return beta * (1.0 - std::exp(-2.0 * lambda * dt / eps)) / (2.0 * lambda);
}

void wave_conv_covariance(double lambda, double beta, double dt,
                          double* var_pos, double* var_vel, double* cov) {
  if (lambda <= 0.0 || dt <= 0.0)
    throw std::invalid_argument("wave_conv_covariance needs positive args");
  const double w = std::sqrt(lambda);
  const double s2 = std::sin(2.0 * w * dt) / (4.0 * w);
  const double sw = std::sin(w * dt);
  *var_pos = beta * (0.5 * dt - s2) / lambda;
  *var_vel = beta * (0.5 * dt + s2);
  *cov = beta * sw * sw / (2.0 * lambda);
}

FastOuStep make_fast_ou_step(const SpectralBasis& b, const NoiseSpec& q,
                             double dt, double eps) {
  if (static_cast<int>(q.beta.size()) != b.n)
    throw std::invalid_argument("noise spec does not match basis");
  FastOuStep st;
  st.decay.resize(b.n);
  st.gain.resize(b.n);
  st.sd.resize(b.n);
  for (int i = 0; i < b.n; ++i) {
    const double lam = b.lambda[i];
    st.decay[i] = std::exp(-lam * dt / eps);
    st.gain[i] = (1.0 - st.decay[i]) / lam;
    st.sd[i] = std::sqrt(ou_conv_variance(lam, q.beta[i], dt, eps));
  }
  return st;
}

WaveKick make_wave_kick(const SpectralBasis& b, const NoiseSpec& q,
                        double dt) {
  if (static_cast<int>(q.beta.size()) != b.n)
    throw std::invalid_argument("noise spec does not match basis");
  WaveKick kick;
  kick.l11.resize(b.n);
  kick.l21.resize(b.n);
  kick.l22.resize(b.n);
  for (int i = 0; i < b.n; ++i) {
    double vp, vv, cv;
    wave_conv_covariance(b.lambda[i], q.beta[i], dt, &vp, &vv, &cv);
    if (vp <= 0.0) {  // beta = 0: degenerate mode, no kick
      kick.l11[i] = kick.l21[i] = kick.l22[i] = 0.0;
      continue;
    }
    const double l11 = std::sqrt(vp);
    const double l21 = cv / l11;
    const double rem = vv - l21 * l21;
    kick.l11[i] = l11;
    kick.l21[i] = l21;
    kick.l22[i] = std::sqrt(rem > 0.0 ? rem : 0.0);
  }
  return kick;
}

}  // namespace slowfast
