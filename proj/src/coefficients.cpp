#include "coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slowfast {

void CoefficientPair::require_mixing(double lip_y) {
  if (!(lip_y < kLambda1))
    throw std::invalid_argument(
        "frozen equation not mixing: lip_y(g) must stay below pi^2");
}

LinearFamily::LinearFamily(double a, double b, double c, double d)
    : a_(a), b_(b), c_(c), d_(d) {
  require_mixing(std::abs(a));
}

void LinearFamily::f(const double* u, const double* y, double* out,
                     int n) const {
  for (int i = 0; i < n; ++i) out[i] = c_ * u[i] + d_ * y[i];
}

void LinearFamily::g(const double* u, const double* y, double* out,
                     int n) const {
  for (int i = 0; i < n; ++i) out[i] = -a_ * y[i] + b_ * u[i];
}

BoundedFamily::BoundedFamily(double a, double b, double d, double clip,
                             double kappa)
    : a_(a), b_(b), d_(d), clip_(clip), kappa_(kappa) {
  if (a < 0.0) throw std::invalid_argument("restoring rate must be >= 0");
  if (clip <= 0.0) throw std::invalid_argument("clip level must be positive");
  if (kappa < 0.0) throw std::invalid_argument("kappa must be >= 0");
  require_mixing(a);
}

void BoundedFamily::f(const double* u, const double* y, double* out,
                      int n) const {
  for (int i = 0; i < n; ++i) out[i] = std::sin(u[i]) + d_ * std::tanh(y[i]);
}

void BoundedFamily::g(const double* u, const double* y, double* out,
                      int n) const {
  for (int i = 0; i < n; ++i) {
    const double yc = std::clamp(y[i], -clip_, clip_);
    double v = std::tanh(b_ * u[i]) - a_ * yc;
    if (kappa_ > 0.0) {
      const double r = std::min(std::abs(y[i]), 1.0);
      v += kappa_ * std::sqrt(r);
    }
    out[i] = v;
  }
}

void apply_F(const SpectralBasis& b, const CoefficientPair& cp,
             const double* u, const double* y, double* out, Workspace& ws) {
  to_physical(b, u, ws.pu.data());
  to_physical(b, y, ws.py.data());
  cp.f(ws.pu.data(), ws.py.data(), ws.pf.data(), b.n);
  to_spectral(b, ws.pf.data(), out);
}

void apply_G(const SpectralBasis& b, const CoefficientPair& cp,
             const double* u, const double* y, double* out, Workspace& ws) {
  to_physical(b, u, ws.pu.data());
  to_physical(b, y, ws.py.data());
  cp.g(ws.pu.data(), ws.py.data(), ws.pf.data(), b.n);
  to_spectral(b, ws.pf.data(), out);
}

static void check_match(const SpectralField& u, const SpectralField& y) {
  if (!u.basis || !y.basis || u.basis->n != y.basis->n)
    throw std::invalid_argument("fields live on different bases");
}

SpectralField apply_F(const CoefficientPair& cp, const SpectralField& u,
                      const SpectralField& y) {
  check_match(u, y);
  Workspace ws(u.basis->n);
  SpectralField out(u.basis);
  apply_F(*u.basis, cp, u.c.data(), y.c.data(), out.c.data(), ws);
  return out;
}

SpectralField apply_G(const CoefficientPair& cp, const SpectralField& u,
                      const SpectralField& y) {
  check_match(u, y);
  Workspace ws(u.basis->n);
  SpectralField out(u.basis);
  apply_G(*u.basis, cp, u.c.data(), y.c.data(), out.c.data(), ws);
  return out;
}

}  // namespace slowfast
