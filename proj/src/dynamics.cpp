#include "dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace slowfast {

void SimConfig::validate() const {
  if (!basis) throw std::invalid_argument("sim config has no basis");
  const int n = basis->n;
  if (!(T > 0.0)) throw std::invalid_argument("horizon T must be positive");
  if (checkpoints < 1)
    throw std::invalid_argument("need at least one checkpoint interval");
  if (!(micro_factor > 0.0) || micro_factor > 0.05)
    throw std::invalid_argument("micro_factor must lie in (0, 0.05]");
  if (static_cast<int>(q1.beta.size()) != n ||
      static_cast<int>(q2.beta.size()) != n)
    throw std::invalid_argument("noise spec does not match basis");
  if (static_cast<int>(u0.size()) != n || static_cast<int>(v0.size()) != n ||
      static_cast<int>(y0.size()) != n)
    throw std::invalid_argument("initial data does not match basis");
}

long SimConfig::micro_per_macro(double eps) const {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double cap = micro_factor * eps;
  return static_cast<long>(std::ceil(dt_macro() / cap - 1e-12));
}

double SimConfig::dt_micro(double eps) const {
  return dt_macro() / static_cast<double>(micro_per_macro(eps));
}

void DriftProvider::dfbar(const double* u, const double* z, double* out) {
  const int n = dim();
  const double nz = [&] {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += z[i] * z[i];
    return std::sqrt(s);
  }();
  if (nz == 0.0) {
    for (int i = 0; i < n; ++i) out[i] = 0.0;
    return;
  }
  double nu = 0.0;
  for (int i = 0; i < n; ++i) nu += u[i] * u[i];
  const double delta = 1e-4 * (1.0 + std::sqrt(nu)) / nz;
  std::vector<double> up(n), um(n), fp(n), fm(n);
  for (int i = 0; i < n; ++i) {
    up[i] = u[i] + delta * z[i];
    um[i] = u[i] - delta * z[i];
  }
  fbar(up.data(), fp.data());
  fbar(um.data(), fm.data());
  for (int i = 0; i < n; ++i) out[i] = (fp[i] - fm[i]) / (2.0 * delta);
}

LinearDrift::LinearDrift(const LinearFamily& fam, const SpectralBasis& b) {
  coeff_.resize(b.n);
  for (int i = 0; i < b.n; ++i) coeff_[i] = fam.fbar_coeff(b.lambda[i]);
}

void LinearDrift::fbar(const double* u, double* out) {
  for (size_t i = 0; i < coeff_.size(); ++i) out[i] = coeff_[i] * u[i];
}

void LinearDrift::dfbar(const double*, const double* z, double* out) {
  for (size_t i = 0; i < coeff_.size(); ++i) out[i] = coeff_[i] * z[i];
}

ErgodicDrift::ErgodicDrift(BasisPtr basis, CoefficientPtr family,
                           NoiseSpec q2, double burn_in, double horizon,
                           double dt, NoiseStream stream)
    : basis_(std::move(basis)),
      family_(std::move(family)),
      q2_(std::move(q2)),
      burn_in_(burn_in),
      horizon_(horizon),
      dt_(dt),
      stream_(std::move(stream)) {
  if (!(dt_ > 0.0) || !(horizon_ > burn_in_))
    throw std::invalid_argument("ergodic drift budget is empty");
}

void ErgodicDrift::fbar(const double* u, double* out) {
  const int n = basis_->n;
  const long total = static_cast<long>(std::ceil(horizon_ / dt_));
  const long skip = static_cast<long>(std::ceil(burn_in_ / dt_));
  std::vector<double> steps(total, dt_);
  std::vector<double> y(n, 0.0);
  std::vector<double> uvec(u, u + n), pu(n), fbuf(n), acc(n, 0.0);
  to_physical(*basis_, u, pu.data());
  long kept = 0;
  const NoiseStream call = stream_.child_indexed("call", calls_++);
  simulate_frozen(*basis_, *family_, q2_, uvec, y, steps, call,
                  [&](long step, double, const std::vector<double>&,
                      const std::vector<double>& y_phys) {
                    if (step <= skip) return;
                    family_->f(pu.data(), y_phys.data(), fbuf.data(), n);
                    for (int i = 0; i < n; ++i) acc[i] += fbuf[i];
                    ++kept;
                  });
  for (int i = 0; i < n; ++i) acc[i] /= static_cast<double>(kept);
  to_spectral(*basis_, acc.data(), out);
}

MatrixSigma::MatrixSigma(int n, std::vector<double> mat)
    : n_(n), mat_(std::move(mat)) {
  if (static_cast<int>(mat_.size()) != n * n)
    throw std::invalid_argument("sigma matrix has wrong size");
}

void MatrixSigma::sigma_sq_diag(const double*, double* out) const {
  for (int i = 0; i < n_; ++i) out[i] = mat_[static_cast<size_t>(i) * n_ + i];
}

namespace {

struct Rotation {
  std::vector<double> co, si_ow, wsi;
  Rotation(const SpectralBasis& b, double dt) {
    co.resize(b.n);
    si_ow.resize(b.n);
    wsi.resize(b.n);
    for (int i = 0; i < b.n; ++i) {
      const double w = b.omega[i];
      co[i] = std::cos(w * dt);
      const double si = std::sin(w * dt);
      si_ow[i] = si / w;
      wsi[i] = w * si;
    }
  }
  inline void apply(int n, double* pos, double* vel) const {
    for (int i = 0; i < n; ++i) {
      const double p = pos[i];
      const double v = vel[i];
      pos[i] = co[i] * p + si_ow[i] * v;
      vel[i] = -wsi[i] * p + co[i] * v;
    }
  }
};

inline void add_wave_kicks(const WaveKick& wk, int n, Rng& rng, double* pos,
                           double* vel) {
  for (int i = 0; i < n; ++i) {
    double dp, dv;
    wk.sample(i, rng, &dp, &dv);
    pos[i] += dp;
    vel[i] += dv;
  }
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void record(Trajectory& t, double time, const std::vector<double>& pos,
            const std::vector<double>& vel) {
  t.times.push_back(time);
  t.pos.push_back(pos);
  t.vel.push_back(vel);
}

}  // namespace

SlowFastRun simulate_slow_fast(const SimConfig& cfg,
                               const CoefficientPair& family, double eps,
                               const NoiseStream& noise, bool keep_fast) {
  cfg.validate();
  const SpectralBasis& b = *cfg.basis;
  const int n = b.n;
  const long m = cfg.micro_per_macro(eps);
  const double dt = cfg.dt_macro() / static_cast<double>(m);

  const FastOuStep fs = make_fast_ou_step(b, cfg.q2, dt, eps);
  const WaveKick wk = make_wave_kick(b, cfg.q1, dt);
  const Rotation rot(b, dt);
  Rng w1(noise.child("W1"));
  Rng w2(noise.child("W2"));

  std::vector<double> pos = cfg.u0, vel = cfg.v0, y = cfg.y0;
  std::vector<double> pu(n), py(n), buf(n), F(n), G(n);

  SlowFastRun run;
  record(run.traj, 0.0, pos, vel);
  if (keep_fast) run.fast.times.push_back(0.0), run.fast.pos.push_back(y);

  for (int j = 1; j <= cfg.checkpoints; ++j) {
    for (long s = 0; s < m; ++s) {
      to_physical(b, pos.data(), pu.data());
      to_physical(b, y.data(), py.data());
      family.f(pu.data(), py.data(), buf.data(), n);
      to_spectral(b, buf.data(), F.data());
      family.g(pu.data(), py.data(), buf.data(), n);
      to_spectral(b, buf.data(), G.data());

      for (int i = 0; i < n; ++i) vel[i] += dt * F[i];
      rot.apply(n, pos.data(), vel.data());
      add_wave_kicks(wk, n, w1, pos.data(), vel.data());

      for (int i = 0; i < n; ++i)
        y[i] = fs.decay[i] * y[i] + fs.gain[i] * G[i] +
               fs.sd[i] * w2.normal();
    }
    run.steps += m;
    if (!all_finite(pos) || !all_finite(vel) || !all_finite(y)) {
      run.aborted = true;
      return run;
    }
    record(run.traj, j * cfg.dt_macro(), pos, vel);
    if (keep_fast) {
      run.fast.times.push_back(j * cfg.dt_macro());
      run.fast.pos.push_back(y);
    }
  }
  return run;
}

AveragedRun simulate_averaged(const SimConfig& cfg, DriftProvider& drift,
                              double grid_eps, const NoiseStream& noise,
                              bool keep_micro) {
  cfg.validate();
  const SpectralBasis& b = *cfg.basis;
  const int n = b.n;
  if (drift.dim() != n)
    throw std::invalid_argument("drift provider does not match basis");
  const long m = cfg.micro_per_macro(grid_eps);
  const double dt = cfg.dt_macro() / static_cast<double>(m);

  const WaveKick wk = make_wave_kick(b, cfg.q1, dt);
  const Rotation rot(b, dt);
  Rng w1(noise.child("W1"));

  std::vector<double> pos = cfg.u0, vel = cfg.v0;
  std::vector<double> F(n);

  AveragedRun run;
  record(run.traj, 0.0, pos, vel);
  if (keep_micro) record(run.micro, 0.0, pos, vel);

  for (int j = 1; j <= cfg.checkpoints; ++j) {
    for (long s = 0; s < m; ++s) {
      drift.fbar(pos.data(), F.data());
      for (int i = 0; i < n; ++i) vel[i] += dt * F[i];
      rot.apply(n, pos.data(), vel.data());
      add_wave_kicks(wk, n, w1, pos.data(), vel.data());
      if (keep_micro)
        record(run.micro, (j - 1) * cfg.dt_macro() + (s + 1) * dt, pos, vel);
    }
    run.steps += m;
    if (!all_finite(pos) || !all_finite(vel)) {
      run.aborted = true;
      return run;
    }
    record(run.traj, j * cfg.dt_macro(), pos, vel);
  }
  return run;
}

void simulate_frozen(const SpectralBasis& b, const CoefficientPair& family,
                     const NoiseSpec& q2, const std::vector<double>& u_fixed,
                     std::vector<double>& y,
                     const std::vector<double>& step_sizes,
                     const NoiseStream& w2, const FrozenVisitor& visit) {
  const int n = b.n;
  if (static_cast<int>(u_fixed.size()) != n ||
      static_cast<int>(y.size()) != n)
    throw std::invalid_argument("frozen state does not match basis");
  if (static_cast<int>(q2.beta.size()) != n)
    throw std::invalid_argument("noise spec does not match basis");
  Rng rng(w2);
  std::vector<double> pu(n), py(n), buf(n), G(n);
  to_physical(b, u_fixed.data(), pu.data());

  // Uniform grids reuse one step table; graded grids rebuild when h changes.
  double h_cached = -1.0;
  FastOuStep fs;
  auto ensure_table = [&](double h) {
    if (h == h_cached) return;
    fs = make_fast_ou_step(b, q2, h, 1.0);
    h_cached = h;
  };

  double t = 0.0;
  to_physical(b, y.data(), py.data());
  if (visit) visit(0, t, y, py);
  for (size_t s = 0; s < step_sizes.size(); ++s) {
    const double h = step_sizes[s];
    if (!(h > 0.0)) throw std::invalid_argument("step sizes must be positive");
    ensure_table(h);
    family.g(pu.data(), py.data(), buf.data(), n);
    to_spectral(b, buf.data(), G.data());
    for (int i = 0; i < n; ++i)
      y[i] = fs.decay[i] * y[i] + fs.gain[i] * G[i] + fs.sd[i] * rng.normal();
    t += h;
    to_physical(b, y.data(), py.data());
    if (visit) visit(static_cast<long>(s) + 1, t, y, py);
  }
}

Trajectory compute_deviation(const Trajectory& eps_traj,
                             const Trajectory& bar_traj, double eps) {
  if (eps_traj.size() != bar_traj.size())
    throw std::invalid_argument("trajectories have different lengths");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double root = std::sqrt(eps);
  Trajectory out;
  for (size_t j = 0; j < eps_traj.size(); ++j) {
    if (std::abs(eps_traj.times[j] - bar_traj.times[j]) > 1e-12)
      throw std::invalid_argument("checkpoint grids disagree");
    const size_t n = eps_traj.pos[j].size();
    std::vector<double> zp(n), zv(n);
    for (size_t i = 0; i < n; ++i) {
      zp[i] = (eps_traj.pos[j][i] - bar_traj.pos[j][i]) / root;
      zv[i] = (eps_traj.vel[j][i] - bar_traj.vel[j][i]) / root;
    }
    record(out, eps_traj.times[j], zp, zv);
  }
  return out;
}

namespace {

// Exact one-step noise covariance for the deviation equation with a full
// Sigma Sigma^* matrix: modes couple, so the (2n)x(2n) covariance is built
// from the cross-frequency kernel integrals and factored once per step size.
Eigen::MatrixXd full_step_covariance(const SpectralBasis& b,
                                     const std::vector<double>& ss, double h) {
  const int n = b.n;
  auto int_ss = [&](double wa, double wb) {
    if (wa == wb) return 0.5 * h - std::sin(2.0 * wa * h) / (4.0 * wa);
    return std::sin((wa - wb) * h) / (2.0 * (wa - wb)) -
           std::sin((wa + wb) * h) / (2.0 * (wa + wb));
  };
  auto int_cc = [&](double wa, double wb) {
    if (wa == wb) return 0.5 * h + std::sin(2.0 * wa * h) / (4.0 * wa);
    return std::sin((wa - wb) * h) / (2.0 * (wa - wb)) +
           std::sin((wa + wb) * h) / (2.0 * (wa + wb));
  };
  auto int_sc = [&](double wa, double wb) {  // sin(wa s) cos(wb s)
    if (wa == wb) {
      const double s = std::sin(wa * h);
      return s * s / (2.0 * wa);
    }
    return 0.5 * ((1.0 - std::cos((wa + wb) * h)) / (wa + wb) +
                  (1.0 - std::cos((wa - wb) * h)) / (wa - wb));
  };
  Eigen::MatrixXd C(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      const double q = ss[static_cast<size_t>(k) * n + l];
      const double wk = b.omega[k], wl = b.omega[l];
      C(k, l) = q * int_ss(wk, wl) / (wk * wl);
      C(n + k, n + l) = q * int_cc(wk, wl);
      C(k, n + l) = q * int_sc(wk, wl) / wk;
      C(n + l, k) = C(k, n + l);
    }
  }
  return C;
}

}  // namespace

DeviationRun simulate_limit_deviation(const Trajectory& bar_micro,
                                      DriftProvider& drift,
                                      const SigmaProvider& sigma,
                                      const NoiseStream& noise, long thin) {
  if (bar_micro.size() < 2)
    throw std::invalid_argument("averaged path has no steps");
  const int n = drift.dim();
  if (sigma.dim() != n)
    throw std::invalid_argument("sigma provider does not match drift");
  if (thin < 1) throw std::invalid_argument("thinning must be >= 1");
  if (static_cast<int>(bar_micro.pos[0].size()) != n)
    throw std::invalid_argument("averaged path does not match providers");

  // The deviation equation shares the eigenstructure of the slow equation.
  SpectralBasis basis(n);
  Rng w(noise.child("W"));

  std::vector<double> z(n, 0.0), zd(n, 0.0), F(n), s2(n);
  DeviationRun run;
  record(run.traj, bar_micro.times[0], z, zd);

  double h_cached = -1.0;
  Rotation rot(basis, 1.0);
  WaveKick wk;
  Eigen::MatrixXd chol;  // lower factor, full-matrix providers only
  std::vector<double> g(2 * n), kick(2 * n);
  const std::vector<double>* full = sigma.full_matrix();

  const size_t steps = bar_micro.size() - 1;
  for (size_t s = 0; s < steps; ++s) {
    const double h = bar_micro.times[s + 1] - bar_micro.times[s];
    if (!(h > 0.0)) throw std::invalid_argument("times must increase");
    const double* ubar = bar_micro.pos[s].data();
    if (h != h_cached) {
      rot = Rotation(basis, h);
      if (full) {
        Eigen::LLT<Eigen::MatrixXd> llt(full_step_covariance(basis, *full, h));
        if (llt.info() != Eigen::Success) {
          Eigen::MatrixXd C = full_step_covariance(basis, *full, h);
          const double jitter = 1e-14 * C.trace() / (2 * n);
          for (int i = 0; i < 2 * n; ++i) C(i, i) += jitter;
          llt.compute(C);
          if (llt.info() != Eigen::Success)
            throw std::runtime_error("step covariance not factorable");
        }
        chol = llt.matrixL();
      } else {
        sigma.sigma_sq_diag(ubar, s2.data());
        NoiseSpec eff{NoiseRole::Slow, s2};
        wk = make_wave_kick(basis, eff, h);
      }
      h_cached = h;
    }

    drift.dfbar(ubar, z.data(), F.data());
    for (int i = 0; i < n; ++i) zd[i] += h * F[i];
    rot.apply(n, z.data(), zd.data());

    if (full) {
      for (int i = 0; i < 2 * n; ++i) g[i] = w.normal();
      for (int i = 0; i < 2 * n; ++i) {
        double acc = 0.0;
        for (int j = 0; j <= i; ++j) acc += chol(i, j) * g[j];
        kick[i] = acc;
      }
      for (int i = 0; i < n; ++i) {
        z[i] += kick[i];
        zd[i] += kick[n + i];
      }
    } else {
      add_wave_kicks(wk, n, w, z.data(), zd.data());
    }

    if ((static_cast<long>(s) + 1) % thin == 0 || s + 1 == steps) {
      if (!all_finite(z) || !all_finite(zd)) {
        run.aborted = true;
        return run;
      }
      record(run.traj, bar_micro.times[s + 1], z, zd);
    }
  }
  return run;
}

void lyapunov_mode_covariance(double lambda, double kappa, double sigma_sq,
                              double T, int steps, double out[3]) {
  const double leff = lambda - kappa;
  if (!(leff > 0.0))
    throw std::invalid_argument("deviation mode must stay oscillatory");
  if (steps < 1) throw std::invalid_argument("need at least one step");
  double P[3] = {0.0, 0.0, 0.0};  // Var(z), Cov(z, z'), Var(z')
  const double h = T / steps;
  auto rhs = [&](const double p[3], double d[3]) {
    d[0] = 2.0 * p[1];
    d[1] = p[2] - leff * p[0];
    d[2] = -2.0 * leff * p[1] + sigma_sq;
  };
  double k1[3], k2[3], k3[3], k4[3], tmp[3];
  for (int s = 0; s < steps; ++s) {
    rhs(P, k1);
    for (int i = 0; i < 3; ++i) tmp[i] = P[i] + 0.5 * h * k1[i];
    rhs(tmp, k2);
    for (int i = 0; i < 3; ++i) tmp[i] = P[i] + 0.5 * h * k2[i];
    rhs(tmp, k3);
    for (int i = 0; i < 3; ++i) tmp[i] = P[i] + h * k3[i];
    rhs(tmp, k4);
    for (int i = 0; i < 3; ++i)
      P[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  out[0] = P[0];
  out[1] = P[1];
  out[2] = P[2];
}

}  // namespace slowfast
