#include "spectral.hpp"

#include <cmath>

namespace slowfast {

static std::vector<double> dirichlet_eigenvalues(int n) {
  if (n < 1) throw std::invalid_argument("basis needs at least one mode");
  std::vector<double> lam(n);
  for (int k = 1; k <= n; ++k) lam[k - 1] = (k * kPi) * (k * kPi);
  return lam;
}

SpectralBasis::SpectralBasis(int n_modes)
    : SpectralBasis(n_modes, dirichlet_eigenvalues(n_modes)) {}

SpectralBasis::SpectralBasis(int n_modes, std::vector<double> eigenvalues)
    : n(n_modes), lambda(std::move(eigenvalues)) {
  if (n < 1) throw std::invalid_argument("basis needs at least one mode");
  if (static_cast<int>(lambda.size()) != n)
    throw std::invalid_argument("eigenvalue count does not match mode count");
  lambda_inv.resize(n);
  omega.resize(n);
  for (int i = 0; i < n; ++i) {
    if (lambda[i] <= 0.0)
      throw std::invalid_argument("eigenvalues must be positive");
    lambda_inv[i] = 1.0 / lambda[i];
    omega[i] = std::sqrt(lambda[i]);
  }
  grid.resize(n);
  sinmat.resize(static_cast<size_t>(n) * n);
  const double h = 1.0 / (n + 1);
  const double sqrt2 = std::sqrt(2.0);
  for (int j = 0; j < n; ++j) grid[j] = (j + 1) * h;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      sinmat[static_cast<size_t>(k) * n + j] =
          sqrt2 * std::sin((k + 1) * kPi * grid[j]);
}

BasisPtr make_basis(int n_modes) {
  return std::make_shared<const SpectralBasis>(n_modes);
}

SpectralField::SpectralField(BasisPtr b, std::vector<double> coeffs)
    : basis(std::move(b)), c(std::move(coeffs)) {
  if (static_cast<int>(c.size()) != basis->n)
    throw std::invalid_argument("coefficient count does not match basis");
}

void to_physical(const SpectralBasis& b, const double* coef, double* phys) {
  const int n = b.n;
  for (int j = 0; j < n; ++j) phys[j] = 0.0;
  for (int k = 0; k < n; ++k) {
    const double ck = coef[k];
    if (ck == 0.0) continue;
    const double* row = &b.sinmat[static_cast<size_t>(k) * n];
    for (int j = 0; j < n; ++j) phys[j] += ck * row[j];
  }
}

void to_spectral(const SpectralBasis& b, const double* phys, double* coef) {
  const int n = b.n;
  const double w = 1.0 / (n + 1);
  for (int k = 0; k < n; ++k) {
    const double* row = &b.sinmat[static_cast<size_t>(k) * n];
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * phys[j];
    coef[k] = acc * w;
  }
}

std::vector<double> to_physical(const SpectralField& f) {
  std::vector<double> phys(f.basis->n);
  to_physical(*f.basis, f.c.data(), phys.data());
  return phys;
}

SpectralField to_spectral(const BasisPtr& basis,
                          const std::vector<double>& phys) {
  if (static_cast<int>(phys.size()) != basis->n)
    throw std::invalid_argument("grid value count does not match basis");
  SpectralField f(basis);
  to_spectral(*basis, phys.data(), f.c.data());
  return f;
}

static double weighted_sq(const SpectralBasis& b, const std::vector<double>& c,
                          double alpha) {
  double acc = 0.0;
  if (alpha == 0.0) {
    for (double v : c) acc += v * v;
  } else if (alpha == 1.0) {
    for (size_t i = 0; i < c.size(); ++i) acc += b.lambda[i] * c[i] * c[i];
  } else if (alpha == -1.0) {
    for (size_t i = 0; i < c.size(); ++i) acc += b.lambda_inv[i] * c[i] * c[i];
  } else {
    for (size_t i = 0; i < c.size(); ++i)
      acc += std::pow(b.lambda[i], alpha) * c[i] * c[i];
  }
  return acc;
}

double sobolev_norm_sq(const SpectralField& f, double alpha) {
  return weighted_sq(*f.basis, f.c, alpha);
}

double sobolev_norm(const SpectralField& f, double alpha) {
  return std::sqrt(sobolev_norm_sq(f, alpha));
}

double energy_norm_sq(const PhaseState& x, double alpha) {
  return sobolev_norm_sq(x.pos, alpha) + sobolev_norm_sq(x.vel, alpha - 1.0);
}

double energy_norm(const PhaseState& x, double alpha) {
  return std::sqrt(energy_norm_sq(x, alpha));
}

void apply_wave_group_inplace(const SpectralBasis& b, double t, double* pos,
                              double* vel) {
  for (int i = 0; i < b.n; ++i) {
    const double w = b.omega[i];
    const double co = std::cos(w * t);
    const double si = std::sin(w * t);
    const double p = pos[i];
    const double v = vel[i];
    pos[i] = co * p + si / w * v;
    vel[i] = -w * si * p + co * v;
  }
}

PhaseState apply_wave_group(const PhaseState& x, double t) {
  if (x.pos.basis->n != x.vel.basis->n)
    throw std::invalid_argument("position and velocity bases disagree");
  PhaseState out = x;
  apply_wave_group_inplace(*x.pos.basis, t, out.pos.c.data(),
                           out.vel.c.data());
  return out;
}

SpectralField galerkin_project(const SpectralField& f, int m) {
  if (m < 1 || m > f.basis->n)
    throw std::out_of_range("projection level out of range");
  SpectralField out = f;
  for (int k = m; k < f.basis->n; ++k) out.c[k] = 0.0;
  return out;
}

}  // namespace slowfast
