// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_SIMULATE_HPP
#define STRMOR_SIMULATE_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "model.hpp"
#include "signal.hpp"

namespace strmor
{

class DivergenceError : public NumericalError
{
public:
  DivergenceError(const std::string &what, double t) : NumericalError(what), t_(t) {}
  double time() const { return t_; }

private:
  double t_;
};

class UnsupportedStructureError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

enum class Structure
{
  FirstOrder,
  SecondOrder,
  FirstOrderDelay,
  Unsupported
};

inline std::string to_string(Structure s)
{
  switch (s)
  {
    case Structure::FirstOrder:
      return "first-order";
    case Structure::SecondOrder:
      return "second-order";
    case Structure::FirstOrderDelay:
      return "first-order-delay";
    case Structure::Unsupported:
      return "unsupported";
  }
  return "";
}

//
// Time-domain form of a system folded at a fixed parameter:
//   first order   E x' = A x + sum_tau A_tau x(t - tau) + f(x, u) + B u
//   second order  M x'' + D x' + K x = f(x, u) + B u
//
struct Classification
{
  Structure kind = Structure::Unsupported;
  std::string reason;
  SparseMatrixXd E, A, M, D, K;
  std::vector<std::pair<double, SparseMatrixXd>> delays;
  MatrixXd B, C;
  std::vector<std::pair<double, const SparseUnfolding *>> poly, bilin;
};

namespace detail
{

inline bool close(Complex a, Complex b)
{
  return std::abs(a - b) <= 1e-10 * (1.0 + std::abs(a) + std::abs(b));
}

// kappa(s) = a0 + a1 s + a2 s^2 with real coefficients, or c e^{-tau s} with tau > 0.
struct KappaForm
{
  bool poly = false, delay = false;
  double a0 = 0, a1 = 0, a2 = 0, c = 0, tau = 0;
};

inline KappaForm fit_kappa(const ScalarExpr &k, std::span<const double> p)
{
  KappaForm F;
  auto f = [&](Complex s) { return k(s, p); };
  try
  {
    Complex k0 = f(0.0), kp = f(1.0), km = f(-1.0);
    Complex a1 = 0.5 * (kp - km), a2 = 0.5 * (kp + km) - k0;
    bool real = std::abs(k0.imag()) <= 1e-12 * (1 + std::abs(k0)) &&
                std::abs(a1.imag()) <= 1e-12 * (1 + std::abs(a1)) &&
                std::abs(a2.imag()) <= 1e-12 * (1 + std::abs(a2));
    auto model = [&](Complex s) { return k0 + a1 * s + a2 * s * s; };
    if (real && close(f(2.0), model(2.0)) && close(f(Complex(0, 0.5)), model(Complex(0, 0.5))) &&
        close(f(1.7), model(1.7)) && close(f(Complex(-0.3, 2.2)), model(Complex(-0.3, 2.2))))
    {
      F.poly = true;
      F.a0 = k0.real();
      F.a1 = a1.real();
      F.a2 = a2.real();
      return F;
    }
    if (k0 != Complex(0.0, 0.0) && std::abs(k0.imag()) <= 1e-12 * std::abs(k0))
    {
      Complex ratio = kp / k0;
      if (ratio.real() > 0.0 && std::abs(ratio.imag()) <= 1e-12 * std::abs(ratio))
      {
        double tau = -std::log(ratio.real());
        double c = k0.real();
        auto model2 = [&](Complex s) { return c * std::exp(-tau * s); };
        if (tau > 0.0 && close(f(2.0), model2(2.0)) && close(f(Complex(0, 0.5)), model2(Complex(0, 0.5))) &&
            close(f(Complex(-0.3, 2.2)), model2(Complex(-0.3, 2.2))))
        {
          F.delay = true;
          F.c = c;
          F.tau = tau;
        }
      }
    }
  }
  catch (const Error &)
  {
  }
  return F;
}

inline bool is_identity(const SparseMatrixXd &M)
{
  if (M.rows() != M.cols())
  {
    return false;
  }
  for (Index j = 0; j < M.outerSize(); j++)
  {
    for (SparseMatrixXd::InnerIterator it(M, j); it; ++it)
    {
      if (it.value() != (it.row() == it.col() ? 1.0 : 0.0))
      {
        return false;
      }
    }
  }
  // Every diagonal entry must be present.
  SparseMatrixXd Mc = M;
  for (Index i = 0; i < M.rows(); i++)
  {
    if (Mc.coeff(i, i) != 1.0)
    {
      return false;
    }
  }
  return true;
}

inline double gershgorin(const SparseMatrixXd &A)
{
  VectorXd rs = VectorXd::Zero(A.rows());
  for (Index j = 0; j < A.outerSize(); j++)
  {
    for (SparseMatrixXd::InnerIterator it(A, j); it; ++it)
    {
      rs(it.row()) += std::abs(it.value());
    }
  }
  return rs.size() ? rs.maxCoeff() : 0.0;
}

// Real linear solver for E or M: skipped for the identity, dense LU when small, sparse otherwise.
class MassSolver
{
  bool identity_ = true;
  bool dense_ = false;
  Eigen::PartialPivLU<MatrixXd> dlu_;
  Eigen::SparseLU<SparseMatrixXd, Eigen::COLAMDOrdering<int>> slu_;

public:
  void init(const SparseMatrixXd &E)
  {
    identity_ = is_identity(E);
    if (identity_)
    {
      return;
    }
    dense_ = E.rows() < StructuredOperator::dense_threshold;
    if (dense_)
    {
      MatrixXd Ed = MatrixXd(E);
      dlu_.compute(Ed);
      if (dlu_.matrixLU().diagonal().cwiseAbs().minCoeff() == 0.0)
      {
        throw NumericalError("mass matrix is singular");
      }
    }
    else
    {
      SparseMatrixXd Ec = E;
      Ec.makeCompressed();
      slu_.compute(Ec);
      if (slu_.info() != Eigen::Success)
      {
        throw NumericalError("mass matrix is singular");
      }
    }
  }
  bool identity() const { return identity_; }
  void apply(VectorXd &x) const
  {
    if (identity_)
    {
      return;
    }
    x = dense_ ? VectorXd(dlu_.solve(x)) : VectorXd(slu_.solve(x));
  }
};

}  // namespace detail

inline Classification classify(const System &sys, std::span<const double> p)
{
  Classification c;
  const Index n = sys.n();
  if (sys.B.freq_dependent() || sys.C.freq_dependent())
  {
    c.reason = "frequency-dependent input or output map";
    return c;
  }
  SparseMatrixXd E(n, n), A(n, n), M(n, n);
  std::map<double, SparseMatrixXd> delays;
  bool has_m = false, has_e = false;
  for (const auto &t : sys.op.terms())
  {
    detail::KappaForm F = detail::fit_kappa(t.kappa, p);
    if (F.poly)
    {
      if (F.a2 != 0.0)
      {
        M += F.a2 * t.A;
        has_m = true;
      }
      if (F.a1 != 0.0)
      {
        E += F.a1 * t.A;
        has_e = true;
      }
      if (F.a0 != 0.0)
      {
        A -= F.a0 * t.A;
      }
    }
    else if (F.delay)
    {
      auto it = delays.find(F.tau);
      if (it == delays.end())
      {
        delays[F.tau] = -F.c * t.A;
      }
      else
      {
        it->second -= F.c * t.A;
      }
    }
    else
    {
      c.reason = "coefficient " + t.kappa.to_string() + " is neither polynomial of degree <= 2 nor c e^{-tau s}";
      return c;
    }
  }
  c.B = sys.B.eval_real(p);
  c.C = sys.C.eval_real(p);
  for (const auto &h : sys.poly)
  {
    for (const auto &pc : h.pieces())
    {
      c.poly.push_back({pc.coeff(0.0, p).real(), &pc.mode1});
    }
  }
  for (const auto &b : sys.bilin)
  {
    for (const auto &pc : b.pieces())
    {
      c.bilin.push_back({pc.coeff(0.0, p).real(), &pc.mode1});
    }
  }
  if (has_m)
  {
    if (!delays.empty())
    {
      c.reason = "second-order system with delay";
      return c;
    }
    c.kind = Structure::SecondOrder;
    c.M = M;
    c.D = E;
    c.K = -A;
    return c;
  }
  if (!has_e)
  {
    c.reason = "no s-dependent operator term";
    return c;
  }
  c.E = E;
  c.A = A;
  for (auto &[tau, Ad] : delays)
  {
    c.delays.push_back({tau, Ad});
  }
  c.kind = c.delays.empty() ? Structure::FirstOrder : Structure::FirstOrderDelay;
  return c;
}

struct TimeGrid
{
  double t0 = 0.0;
  double T = 1.0;
  double dt = 1e-3;
  int substeps = 0;  // internal Euler steps per sample; 0 selects a stable count

  std::size_t samples() const
  {
    return static_cast<std::size_t>(std::llround((T - t0) / dt)) + 1;
  }
  void validate() const
  {
    if (!(dt > 0.0) || !(T > t0) || substeps < 0)
    {
      throw ValidationError("time grid needs dt > 0, T > t0 and substeps >= 0");
    }
  }
};

struct Trajectory
{
  std::vector<double> t;
  MatrixXd y;  // samples x p_out
};

//
// Largest stable explicit Euler step estimate. Small systems use the spectrum of the
// first-order companion form (h <= 2 |Re l| / |l|^2), large ones a Gershgorin radius.
//
inline double stable_step(const Classification &c)
{
  double h = std::numeric_limits<double>::infinity();
  auto from_eigs = [&h](const MatrixXd &J)
  {
    Eigen::EigenSolver<MatrixXd> es(J, false);
    for (Index i = 0; i < es.eigenvalues().size(); i++)
    {
      Complex l = es.eigenvalues()(i);
      if (std::abs(l) == 0.0)
      {
        continue;
      }
      if (l.real() < 0.0)
      {
        h = std::min(h, 0.9 * 2.0 * std::abs(l.real()) / std::norm(l));
      }
      else
      {
        h = std::min(h, 1.8 / std::abs(l));
      }
    }
  };
  if (c.kind == Structure::FirstOrder || c.kind == Structure::FirstOrderDelay)
  {
    const Index n = c.A.rows();
    double rho_d = 0.0;
    for (const auto &d : c.delays)
    {
      rho_d += detail::gershgorin(d.second);
    }
    bool eye = detail::is_identity(c.E);
    if (n <= 400)
    {
      MatrixXd J = eye ? MatrixXd(c.A) : MatrixXd(MatrixXd(c.E).partialPivLu().solve(MatrixXd(c.A)));
      from_eigs(J);
      if (rho_d > 0.0)
      {
        double rho = J.cwiseAbs().rowwise().sum().maxCoeff() + rho_d;
        h = std::min(h, 1.8 / rho);
      }
    }
    else if (eye)
    {
      h = std::min(h, 1.8 / (detail::gershgorin(c.A) + rho_d));
    }
    else
    {
      // Power iteration for the spectral radius of E^{-1} A.
      detail::MassSolver ms;
      ms.init(c.E);
      VectorXd v = VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
      double rho = 0.0;
      for (int it = 0; it < 50; it++)
      {
        VectorXd w = c.A * v;
        ms.apply(w);
        rho = w.norm();
        if (rho == 0.0)
        {
          break;
        }
        v = w / rho;
      }
      h = std::min(h, 1.8 / (1.5 * rho + rho_d));
    }
  }
  else if (c.kind == Structure::SecondOrder)
  {
    const Index n = c.M.rows();
    MatrixXd Md = MatrixXd(c.M);
    if (2 * n <= 400)
    {
      MatrixXd J = MatrixXd::Zero(2 * n, 2 * n);
      auto lu = Md.partialPivLu();
      J.topRightCorner(n, n).setIdentity();
      J.bottomLeftCorner(n, n) = -lu.solve(MatrixXd(c.K));
      J.bottomRightCorner(n, n) = -lu.solve(MatrixXd(c.D));
      from_eigs(J);
    }
    else
    {
      double rho = std::max(1.0, detail::gershgorin(c.K) + detail::gershgorin(c.D));
      h = std::min(h, 1.8 / rho);
    }
  }
  return h;
}

inline int stable_substeps(const Classification &c, double dt)
{
  double h = stable_step(c);
  if (!std::isfinite(h))
  {
    return 1;
  }
  return std::max(1, static_cast<int>(std::ceil(dt / h - 1e-9)));
}

//
// Explicit Euler with zero initial state and zero delay history. Outputs are recorded every dt;
// the state advances with step dt / substeps.
//
inline Trajectory simulate(const System &sys, std::span<const double> p, const Signal &u,
                           const TimeGrid &grid)
{
  grid.validate();
  Classification c = classify(sys, p);
  if (c.kind == Structure::Unsupported)
  {
    throw UnsupportedStructureError("cannot simulate: " + c.reason);
  }
  if (static_cast<Index>(u.channels()) != sys.m())
  {
    throw DimensionError("input signal has " + std::to_string(u.channels()) +
                         " channel(s), system has " + std::to_string(sys.m()) + " input(s)");
  }
  const int sub = grid.substeps > 0 ? grid.substeps : stable_substeps(c, grid.dt);
  const double h = grid.dt / sub;
  const Index n = sys.n();
  const std::size_t ns = grid.samples();

  Trajectory tr;
  tr.t.resize(ns);
  tr.y.resize(static_cast<Index>(ns), sys.p_out());

  VectorXd x = VectorXd::Zero(n), v = VectorXd::Zero(n), rhs(n), uu(sys.m()), tmp(n);
  auto nonlinear = [&](const VectorXd &xs, VectorXd &out)
  {
    for (const auto &[w, U] : c.poly)
    {
      if (w != 0.0)
      {
        U->apply_state(xs, nullptr, out, w);
      }
    }
    for (const auto &[w, U] : c.bilin)
    {
      if (w != 0.0)
      {
        U->apply_state(xs, &uu, out, w);
      }
    }
  };
  auto check = [&](std::size_t k, double t)
  {
    if (!x.allFinite() || (c.kind == Structure::SecondOrder && !v.allFinite()))
    {
      throw DivergenceError("simulation diverged at t = " + format_double(t), t);
    }
    tr.t[k] = t;
    tr.y.row(static_cast<Index>(k)) = (c.C * x).transpose();
  };

  detail::MassSolver mass;
  mass.init(c.kind == Structure::SecondOrder ? c.M : c.E);

  // Delay ring buffer of past states at the internal step.
  std::vector<std::pair<long, const SparseMatrixXd *>> lags;
  long Lmax = 0;
  for (const auto &[tau, Ad] : c.delays)
  {
    double steps_d = tau / grid.dt;
    if (std::abs(steps_d - std::round(steps_d)) > 1e-9 * std::max(1.0, steps_d))
    {
      throw ValidationError("delay " + format_double(tau) + " is not a multiple of dt = " +
                            format_double(grid.dt));
    }
    long L = std::lround(steps_d) * sub;
    lags.push_back({L, &Ad});
    Lmax = std::max(Lmax, L);
  }
  MatrixXd hist;
  if (Lmax > 0)
  {
    hist = MatrixXd::Zero(n, Lmax);
  }

  long step = 0;
  check(0, grid.t0);
  for (std::size_t k = 1; k < ns; k++)
  {
    for (int j = 0; j < sub; j++, step++)
    {
      const double t = grid.t0 + (static_cast<double>(k - 1) + static_cast<double>(j) / sub) * grid.dt;
      u(t, uu);
      if (c.kind == Structure::SecondOrder)
      {
        rhs.noalias() = c.B * uu;
        rhs.noalias() -= c.K * x;
        rhs.noalias() -= c.D * v;
        nonlinear(x, rhs);
        mass.apply(rhs);
        x += h * v;
        v += h * rhs;
        continue;
      }
      rhs.noalias() = c.A * x;
      rhs.noalias() += c.B * uu;
      for (const auto &[L, Ad] : lags)
      {
        if (step >= L)
        {
          rhs.noalias() += (*Ad) * hist.col((step - L) % Lmax);
        }
      }
      nonlinear(x, rhs);
      mass.apply(rhs);
      if (Lmax > 0)
      {
        hist.col(step % Lmax) = x;
      }
      x += h * rhs;
    }
    check(k, grid.t0 + static_cast<double>(k) * grid.dt);
  }
  return tr;
}

struct ErrorMetrics
{
  double L2 = 0.0;
  double Linf = 0.0;
  std::vector<double> pointwise;
};

// Trapezoidal L2 and max-norm of the output difference ||y(t) - y_hat(t)||_2.
inline ErrorMetrics error_metrics(const Trajectory &a, const Trajectory &b)
{
  if (a.t.size() != b.t.size() || a.y.cols() != b.y.cols())
  {
    throw DimensionError("trajectories have different grids");
  }
  for (std::size_t k = 0; k < a.t.size(); k++)
  {
    if (std::abs(a.t[k] - b.t[k]) > 1e-12 * std::max(1.0, std::abs(a.t[k])))
    {
      throw DimensionError("trajectories have different grids");
    }
  }
  ErrorMetrics m;
  m.pointwise.resize(a.t.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < a.t.size(); k++)
  {
    Index i = static_cast<Index>(k);
    m.pointwise[k] = (a.y.row(i) - b.y.row(i)).norm();
    m.Linf = std::max(m.Linf, m.pointwise[k]);
    if (k > 0)
    {
      double dt = a.t[k] - a.t[k - 1];
      acc += 0.5 * dt * (m.pointwise[k] * m.pointwise[k] + m.pointwise[k - 1] * m.pointwise[k - 1]);
    }
  }
  m.L2 = std::sqrt(acc);
  return m;
}

inline double signal_l2(const Trajectory &a)
{
  Trajectory z = a;
  z.y.setZero();
  return error_metrics(a, z).L2;
}

struct SweepResult
{
  std::vector<std::vector<double>> params;
  std::vector<double> t;
  MatrixXd E;  // params x samples
  double E_max = 0.0;
  double y_max = 0.0;
};

// Error table from paired full and reduced trajectories on a common grid.
inline SweepResult sweep_table(const std::vector<std::vector<double>> &params,
                               const std::vector<Trajectory> &yf, const std::vector<Trajectory> &yr)
{
  const std::size_t np = params.size();
  if (np == 0 || yf.size() != np || yr.size() != np)
  {
    throw ValidationError("sweep needs one full and one reduced trajectory per parameter");
  }
  SweepResult R;
  R.params = params;
  R.t = yf[0].t;
  for (std::size_t i = 0; i < np; i++)
  {
    R.y_max = std::max(R.y_max, yf[i].y.rowwise().norm().maxCoeff());
  }
  R.E.resize(static_cast<Index>(np), static_cast<Index>(R.t.size()));
  for (std::size_t i = 0; i < np; i++)
  {
    std::vector<double> pw = error_metrics(yf[i], yr[i]).pointwise;
    VectorXd e = Eigen::Map<VectorXd>(pw.data(), static_cast<Index>(pw.size()));
    R.E.row(static_cast<Index>(i)) = (R.y_max > 0.0 ? e / R.y_max : e).transpose();
  }
  R.E_max = R.E.maxCoeff();
  return R;
}

//
// E(t, p) = ||y(t; p) - y_hat(t; p)|| / max_t max_p ||y(t; p)||. Both models use the same internal
// step: the larger of their stable substep counts unless the grid fixes one.
//
inline SweepResult sweep_error(const System &fom, const System &rom,
                               const std::vector<std::vector<double>> &params, const Signal &u,
                               const TimeGrid &grid)
{
  if (params.empty())
  {
    throw ValidationError("parameter set is empty");
  }
  const std::size_t np = params.size();
  std::vector<Trajectory> yf(np), yr(np);
  parallel_for(np, [&](std::size_t i)
               {
                 TimeGrid g = grid;
                 if (g.substeps == 0)
                 {
                   g.substeps = std::max(stable_substeps(classify(fom, params[i]), g.dt),
                                         stable_substeps(classify(rom, params[i]), g.dt));
                 }
                 yf[i] = simulate(fom, params[i], u, g);
                 yr[i] = simulate(rom, params[i], u, g);
               });
  return sweep_table(params, yf, yr);
}

}  // namespace strmor

#endif  // STRMOR_SIMULATE_HPP
