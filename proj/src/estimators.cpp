#include "estimators.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace slowfast {

void ErgodicConfig::validate(double margin) const {
  if (!(margin > 0.0))
    throw ConfigError("frozen equation not mixing: margin <= 0");
  if (!(dt > 0.0)) throw ConfigError("ergodic dt must be positive");
  if (replicas < 1) throw ConfigError("ergodic replicas must be >= 1");
  if (thinning < 1) throw ConfigError("ergodic thinning must be >= 1");
  if (!(burn_in >= 5.0 / margin))
    throw ConfigError("burn-in shorter than 5/a_eff (margin " +
                      std::to_string(margin) + ")");
  if (!(horizon >= 4.0 * burn_in))
    throw ConfigError("ergodic horizon must cover 4x the burn-in");
}

void PsiOptions::validate(double margin) const {
  if (!(margin > 0.0))
    throw ConfigError("frozen equation not mixing: margin <= 0");
  if (replicas < 1) throw ConfigError("psi replicas must be >= 1");
  if (!(grading > 0.0) || !(dt_max > 0.0))
    throw ConfigError("psi grid parameters must be positive");
  if (!(t_cut >= 8.0 / margin))
    throw ConfigError("psi truncation shorter than 8/a_eff (margin " +
                      std::to_string(margin) + ")");
}

std::vector<double> PsiOptions::grid(double t0) const {
  std::vector<double> steps;
  double t = 0.0;
  while (t < t_cut) {
    double h = grading * (t + t0);
    if (h > dt_max) h = dt_max;
    if (t + h > t_cut) h = t_cut - t;
    if (h <= 0.0) break;
    steps.push_back(h);
    t += h;
  }
  return steps;
}

namespace {

struct MeanVar {
  // Running mean and SE over replicate vectors, one component at a time.
  std::vector<double> sum, sumsq;
  long count = 0;
  explicit MeanVar(size_t n) : sum(n, 0.0), sumsq(n, 0.0) {}
  void push(const std::vector<double>& v) {
    for (size_t i = 0; i < v.size(); ++i) {
      sum[i] += v[i];
      sumsq[i] += v[i] * v[i];
    }
    ++count;
  }
  FieldEstimate finish() const {
    FieldEstimate est;
    est.value.resize(sum.size());
    est.se.resize(sum.size());
    const double r = static_cast<double>(count);
    for (size_t i = 0; i < sum.size(); ++i) {
      est.value[i] = sum[i] / r;
      double var = 0.0;
      if (count > 1) {
        var = (sumsq[i] - sum[i] * sum[i] / r) / (r - 1.0);
        if (var < 0.0) var = 0.0;
      }
      est.se[i] = std::sqrt(var / r);
    }
    return est;
  }
};

}  // namespace

FieldEstimate estimate_fbar(const BasisPtr& basis,
                            const CoefficientPair& family,
                            const NoiseSpec& q2,
                            const std::vector<double>& u,
                            const ErgodicConfig& cfg,
                            const NoiseStream& stream) {
  cfg.validate(family.mixing_margin());
  const int n = basis->n;
  const long total = static_cast<long>(std::ceil(cfg.horizon / cfg.dt));
  const long skip = static_cast<long>(std::ceil(cfg.burn_in / cfg.dt));
  const std::vector<double> steps(total, cfg.dt);

  std::vector<double> pu(n), fbuf(n);
  to_physical(*basis, u.data(), pu.data());

  MeanVar across(n);
  for (int r = 0; r < cfg.replicas; ++r) {
    std::vector<double> y(n, 0.0), acc(n, 0.0);
    long kept = 0;
    simulate_frozen(*basis, family, q2, u, y, steps,
                    stream.child_indexed("rep", r),
                    [&](long step, double, const std::vector<double>&,
                        const std::vector<double>& py) {
                      if (step <= skip) return;
                      if ((step - skip) % cfg.thinning != 0) return;
                      family.f(pu.data(), py.data(), fbuf.data(), n);
                      for (int i = 0; i < n; ++i) acc[i] += fbuf[i];
                      ++kept;
                    });
    if (kept == 0) throw ConfigError("ergodic budget keeps no samples");
    std::vector<double> mean_spec(n);
    for (int i = 0; i < n; ++i) acc[i] /= static_cast<double>(kept);
    to_spectral(*basis, acc.data(), mean_spec.data());
    across.push(mean_spec);
  }
  return across.finish();
}

FieldEstimate estimate_psi(const BasisPtr& basis,
                           const CoefficientPair& family, const NoiseSpec& q2,
                           const std::vector<double>& u,
                           const std::vector<double>& y,
                           const std::vector<double>& fbar_u,
                           const PsiOptions& opt, const NoiseStream& stream,
                           double* tail_bound) {
  const double margin = family.mixing_margin();
  opt.validate(margin);
  const int n = basis->n;
  if (static_cast<int>(fbar_u.size()) != n)
    throw std::invalid_argument("fbar vector does not match basis");

  const double t0 = 1.0 / (basis->lambda[n - 1] + 1.0);
  const std::vector<double> steps = opt.grid(t0);

  std::vector<double> pu(n), fbar_phys(n), fbuf(n);
  to_physical(*basis, u.data(), pu.data());
  to_physical(*basis, fbar_u.data(), fbar_phys.data());

  MeanVar across(n);
  double dF0 = 0.0;  // |deltaF(u, y)| at t = 0, for the tail bound
  for (int r = 0; r < opt.replicas; ++r) {
    std::vector<double> yr = y;
    std::vector<double> trap(n, 0.0), prev(n, 0.0);
    bool have_prev = false;
    double h_prev = 0.0;
    size_t idx = 0;
    simulate_frozen(
        *basis, family, q2, u, yr, steps, stream.child_indexed("rep", r),
        [&](long step, double, const std::vector<double>&,
            const std::vector<double>& py) {
          family.f(pu.data(), py.data(), fbuf.data(), n);
          for (int i = 0; i < n; ++i) fbuf[i] -= fbar_phys[i];
          if (step == 0 && r == 0) {
            double s = 0.0;
            // Grid functional norm matches the L2 pairing on n modes.
            for (int i = 0; i < n; ++i) s += fbuf[i] * fbuf[i];
            dF0 = std::sqrt(s / (n + 1));
          }
          if (have_prev) {
            const double h = h_prev;
            for (int i = 0; i < n; ++i)
              trap[i] += 0.5 * h * (prev[i] + fbuf[i]);
          }
          prev = fbuf;
          have_prev = true;
          if (step < static_cast<long>(steps.size()))
            h_prev = steps[idx = static_cast<size_t>(step)];
        });
    std::vector<double> psi_spec(n);
    to_spectral(*basis, trap.data(), psi_spec.data());
    across.push(psi_spec);
  }
  if (tail_bound) *tail_bound = dF0 * std::exp(-margin * opt.t_cut) / margin;
  return across.finish();
}

SigmaEstimate estimate_sigma(const BasisPtr& basis,
                             const CoefficientPair& family,
                             const NoiseSpec& q2, const std::vector<double>& u,
                             const std::vector<double>& fbar_u,
                             const ErgodicConfig& outer, const PsiOptions& psi,
                             const NoiseStream& stream) {
  const double margin = family.mixing_margin();
  outer.validate(margin);
  psi.validate(margin);
  const int n = basis->n;
  const size_t nn = static_cast<size_t>(n) * n;

  const long total = static_cast<long>(std::ceil(outer.horizon / outer.dt));
  const long skip = static_cast<long>(std::ceil(outer.burn_in / outer.dt));
  const std::vector<double> steps(total, outer.dt);

  std::vector<double> pu(n), fbar_phys(n), fbuf(n), dF(n);
  to_physical(*basis, u.data(), pu.data());
  to_physical(*basis, fbar_u.data(), fbar_phys.data());

  MeanVar across(nn);
  for (int r = 0; r < outer.replicas; ++r) {
    const NoiseStream rep = stream.child_indexed("rep", r);
    std::vector<double> y(n, 0.0), accM(nn, 0.0);
    long kept = 0;
    simulate_frozen(
        *basis, family, q2, u, y, steps, rep.child("traj"),
        [&](long step, double, const std::vector<double>& ys,
            const std::vector<double>& py) {
          if (step <= skip) return;
          if ((step - skip) % outer.thinning != 0) return;
          family.f(pu.data(), py.data(), fbuf.data(), n);
          for (int i = 0; i < n; ++i) fbuf[i] -= fbar_phys[i];
          to_spectral(*basis, fbuf.data(), dF.data());
          FieldEstimate corr =
              estimate_psi(basis, family, q2, u, ys, fbar_u, psi,
                           rep.child_indexed("psi", kept), nullptr);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              accM[static_cast<size_t>(i) * n + j] +=
                  dF[i] * corr.value[j];
          ++kept;
        });
    if (kept == 0) throw ConfigError("sigma budget keeps no samples");
    for (auto& v : accM) v /= static_cast<double>(kept);
    across.push(accM);
  }
  const FieldEstimate M = across.finish();

  SigmaEstimate out;
  out.n = n;
  out.matrix.resize(nn);
  out.se.resize(nn);
  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const size_t ij = static_cast<size_t>(i) * n + j;
      const size_t ji = static_cast<size_t>(j) * n + i;
      S(i, j) = M.value[ij] + M.value[ji];
      out.se[ij] = std::sqrt(M.se[ij] * M.se[ij] + M.se[ji] * M.se[ji]);
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.info() != Eigen::Success)
    throw ExperimentError("sigma eigendecomposition failed");
  Eigen::VectorXd ew = eig.eigenvalues();
  double neg = 0.0, pos = 0.0;
  for (int i = 0; i < n; ++i) {
    if (ew[i] < 0.0) {
      neg -= ew[i];
      ew[i] = 0.0;
    } else {
      pos += ew[i];
    }
  }
  out.clipped_mass = pos > 0.0 ? neg / pos : (neg > 0.0 ? 1.0 : 0.0);
  Eigen::MatrixXd clipped =
      eig.eigenvectors() * ew.asDiagonal() * eig.eigenvectors().transpose();
  Eigen::VectorXd root = ew.cwiseSqrt();
  Eigen::MatrixXd factor =
      eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  out.factor.resize(nn);
  out.trace = 0.0;
  for (int i = 0; i < n; ++i) {
    out.trace += clipped(i, i);
    for (int j = 0; j < n; ++j) {
      out.matrix[static_cast<size_t>(i) * n + j] = clipped(i, j);
      out.factor[static_cast<size_t>(i) * n + j] = factor(i, j);
    }
  }
  return out;
}

FieldEstimate estimate_dfbar(const BasisPtr& basis,
                             const CoefficientPair& family,
                             const NoiseSpec& q2, const std::vector<double>& u,
                             const std::vector<double>& z,
                             const ErgodicConfig& cfg,
                             const NoiseStream& stream, double delta) {
  cfg.validate(family.mixing_margin());
  const int n = basis->n;
  if (static_cast<int>(z.size()) != n)
    throw std::invalid_argument("direction does not match basis");
  if (delta <= 0.0) {
    double nu = 0.0;
    for (int i = 0; i < n; ++i) nu += basis->lambda[i] * u[i] * u[i];
    delta = 1e-3 * (1.0 + std::sqrt(nu));
  }

  const long total = static_cast<long>(std::ceil(cfg.horizon / cfg.dt));
  const long skip = static_cast<long>(std::ceil(cfg.burn_in / cfg.dt));
  const std::vector<double> steps(total, cfg.dt);

  std::vector<double> up(n), um(n), pup(n), pum(n), fbuf(n);
  for (int i = 0; i < n; ++i) {
    up[i] = u[i] + delta * z[i];
    um[i] = u[i] - delta * z[i];
  }
  to_physical(*basis, up.data(), pup.data());
  to_physical(*basis, um.data(), pum.data());

  MeanVar across(n);
  for (int r = 0; r < cfg.replicas; ++r) {
    // Same stream for both displaced runs: common random numbers.
    const NoiseStream rep = stream.child_indexed("rep", r);
    std::vector<double> acc_p(n, 0.0), acc_m(n, 0.0);
    long kept = 0;
    for (int side = 0; side < 2; ++side) {
      const std::vector<double>& us = side == 0 ? up : um;
      const std::vector<double>& pus = side == 0 ? pup : pum;
      std::vector<double>& acc = side == 0 ? acc_p : acc_m;
      std::vector<double> y(n, 0.0);
      long kept_side = 0;
      simulate_frozen(*basis, family, q2, us, y, steps, rep,
                      [&](long step, double, const std::vector<double>&,
                          const std::vector<double>& py) {
                        if (step <= skip) return;
                        if ((step - skip) % cfg.thinning != 0) return;
                        family.f(pus.data(), py.data(), fbuf.data(), n);
                        for (int i = 0; i < n; ++i) acc[i] += fbuf[i];
                        ++kept_side;
                      });
      kept = kept_side;
    }
    std::vector<double> diff(n);
    for (int i = 0; i < n; ++i)
      diff[i] = (acc_p[i] - acc_m[i]) /
                (static_cast<double>(kept) * 2.0 * delta);
    std::vector<double> diff_spec(n);
    to_spectral(*basis, diff.data(), diff_spec.data());
    across.push(diff_spec);
  }
  return across.finish();
}

RateFit fit_rate(const std::vector<RatePoint>& points) {
  if (points.size() < 4)
    throw ExperimentError("rate fit needs at least 4 grid points");
  std::vector<double> x, yv, var;
  bool weighted = false;
  for (const auto& p : points) {
    if (!(p.eps > 0.0)) throw ExperimentError("rate fit: eps must be > 0");
    if (!(p.err > 0.0)) throw ExperimentError("rate fit: errors must be > 0");
    if (p.se < 0.0) throw ExperimentError("rate fit: negative SE");
    if (p.se > 0.0 && p.err <= 3.0 * p.se)
      throw ExperimentError(
          "rate fit: error at eps=" + std::to_string(p.eps) +
          " is noise-dominated (err <= 3 se); raise replicas");
    x.push_back(std::log(p.eps));
    yv.push_back(std::log(p.err));
    const double v = (p.se / p.err) * (p.se / p.err);
    var.push_back(v);
    if (v > 0.0) weighted = true;
  }
  const size_t m = x.size();
  std::vector<double> w(m, 1.0);
  if (weighted) {
    double vmin = 0.0;
    for (double v : var) vmin = std::max(vmin, v * 1e-12);
    for (size_t i = 0; i < m; ++i) w[i] = 1.0 / std::max(var[i], vmin);
  }
  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * yv[i];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (yv[i] - ybar);
  }
  if (sxx <= 0.0) throw ExperimentError("rate fit: degenerate grid");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double var_slope;
  if (weighted) {
    var_slope = 1.0 / sxx;  // propagated from the per-point SEs
  } else {
    double rss = 0.0;
    for (size_t i = 0; i < m; ++i) {
      const double resid = yv[i] - fit.intercept - fit.slope * x[i];
      rss += resid * resid;
    }
    var_slope = m > 2 ? rss / (static_cast<double>(m) - 2.0) / sxx : 0.0;
  }
  fit.half_width = 1.96 * std::sqrt(var_slope);
  return fit;
}

}  // namespace slowfast
