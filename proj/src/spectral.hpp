// Sine spectral basis on (0,1) with Dirichlet boundary.
//
// Basis functions e_k(x) = sqrt(2) sin(k pi x), eigenvalues lambda_k =
// (k pi)^2 of -d^2/dx^2, k = 1..n.  Physical evaluation lives on the interior
// grid x_j = j/(n+1); on that grid the discrete sine transform is an exact
// involution on span{e_1..e_n} (S^2 = (n+1) I for the unnormalized matrix).
#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

namespace slowfast {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kLambda1 = kPi * kPi;

struct SpectralBasis {
  explicit SpectralBasis(int n_modes);
  // Explicit eigenvalues, for fault-injection checks in the oracle battery.
  SpectralBasis(int n_modes, std::vector<double> eigenvalues);

  int n;
  std::vector<double> lambda;      // lambda_k, 1-based mode k at index k-1
  std::vector<double> lambda_inv;
  std::vector<double> omega;       // sqrt(lambda_k)
  std::vector<double> grid;        // x_j = j/(n+1), j = 1..n
  std::vector<double> sinmat;      // [k][j] = sqrt(2) sin((k+1) pi x_j), row-major

  double eigenvalue(int k) const {  // k is 1-based
    if (k < 1 || k > n) throw std::out_of_range("mode index out of range");
    return lambda[k - 1];
  }
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;
BasisPtr make_basis(int n_modes);

struct SpectralField {
  BasisPtr basis;
  std::vector<double> c;  // coefficient of e_k at index k-1

  SpectralField() = default;
  explicit SpectralField(BasisPtr b)
      : basis(std::move(b)), c(basis->n, 0.0) {}
  SpectralField(BasisPtr b, std::vector<double> coeffs);
};

// Position-velocity pair for the second-order equation.
struct PhaseState {
  SpectralField pos;
  SpectralField vel;
};

void to_physical(const SpectralBasis& b, const double* coef, double* phys);
void to_spectral(const SpectralBasis& b, const double* phys, double* coef);
std::vector<double> to_physical(const SpectralField& f);
SpectralField to_spectral(const BasisPtr& basis,
                          const std::vector<double>& phys);

// ||x||_alpha^2 = sum_k lambda_k^alpha <x, e_k>^2, any real alpha.
double sobolev_norm_sq(const SpectralField& f, double alpha);
double sobolev_norm(const SpectralField& f, double alpha);

// Energy norm on the phase space: ||pos||_alpha^2 + ||vel||_{alpha-1}^2.
double energy_norm_sq(const PhaseState& x, double alpha);
double energy_norm(const PhaseState& x, double alpha);

// Exact wave group: per mode with w = sqrt(lambda_k),
//   pos' =  cos(wt) pos + sin(wt)/w vel
//   vel' = -w sin(wt) pos + cos(wt) vel
PhaseState apply_wave_group(const PhaseState& x, double t);
void apply_wave_group_inplace(const SpectralBasis& b, double t, double* pos,
                              double* vel);

// Zero all coefficients above mode m (1 <= m <= n).
SpectralField galerkin_project(const SpectralField& f, int m);

}  // namespace slowfast
