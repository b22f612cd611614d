// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_TESTS_SUPPORT_HPP
#define STRMOR_TESTS_SUPPORT_HPP

#include <random>
#include <string>
#include <vector>

#include "strmor/drop.hpp"
#include "strmor/transfer.hpp"

namespace strmor::testing
{

inline double rel_err(const MatrixXcd &exact, const MatrixXcd &approx)
{
  const double d = (exact - approx).norm();
  const double e = exact.norm();
  return e > 0.0 ? d / e : d;
}

inline MatrixXcd kron(const MatrixXcd &A, const MatrixXcd &B)
{
  MatrixXcd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); i++)
  {
    for (Index j = 0; j < A.cols(); j++)
    {
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return K;
}

inline MatrixXd kron(const MatrixXd &A, const MatrixXd &B)
{
  return kron(MatrixXcd(A.cast<Complex>()), MatrixXcd(B.cast<Complex>())).real();
}

// v (x) ... (x) v, k times; the empty product is [1].
inline MatrixXcd kron_power(const MatrixXcd &v, int k)
{
  MatrixXcd out = MatrixXcd::Ones(1, 1);
  for (int i = 0; i < k; i++)
  {
    out = kron(out, v);
  }
  return out;
}

// Dense Kronecker product of a list of vectors, first one slowest.
inline VectorXd kron_vectors(const std::vector<VectorXd> &vs)
{
  MatrixXd out = MatrixXd::Ones(1, 1);
  for (const auto &v : vs)
  {
    out = kron(out, MatrixXd(v));
  }
  return out.col(0);
}

// Petrov-Galerkin projection with the full interpolation bases of a plan.
inline ReducedSystem project_full(const System &sys, const InterpPlan &plan)
{
  BasisBundle B = build_VW(sys, plan, 0.0);
  if (B.V.cols() != B.W.cols())
  {
    throw DimensionError("V has " + std::to_string(B.V.cols()) + " columns but W has " +
                         std::to_string(B.W.cols()));
  }
  return project(sys, B.V, B.W);
}

inline std::vector<Complex> args_of(const Family &f, Complex a, Complex last)
{
  std::vector<Complex> s(f.num_args(), a);
  s.back() = last;
  return s;
}

// Worst relative mismatch over the value conditions of one plan entry:
//   F_L(sigma), F_L(mu), F(sigma..sigma), F(sigma..sigma, mu) for every selected family.
inline double value_conditions(const TransferEvaluator &fom, const TransferEvaluator &rom,
                               const InterpEntry &e, const std::vector<Family> &fams)
{
  double worst = 0.0;
  const std::span<const double> p(e.p);
  for (const Family &f : fams)
  {
    std::vector<std::vector<Complex>> pts;
    if (f.kind == 'L')
    {
      pts = {{e.sigma}, {e.mu}};
    }
    else
    {
      pts = {args_of(f, e.sigma, e.sigma), args_of(f, e.sigma, e.mu)};
    }
    for (const auto &s : pts)
    {
      worst = std::max(worst, rel_err(fom.eval(f, s, p), rom.eval(f, s, p)));
    }
  }
  return worst;
}

// Worst relative mismatch of every d/ds_j at sigma = mu.
inline double hermite_conditions(const TransferEvaluator &fom, const TransferEvaluator &rom,
                                 const InterpEntry &e, const std::vector<Family> &fams)
{
  double worst = 0.0;
  const std::span<const double> p(e.p);
  for (const Family &f : fams)
  {
    std::vector<Complex> s(f.num_args(), e.sigma);
    for (int j = 1; j <= f.num_args(); j++)
    {
      worst = std::max(worst, rel_err(fom.eval(f, s, p, Deriv::ds(j)),
                                      rom.eval(f, s, p, Deriv::ds(j))));
    }
  }
  return worst;
}

// Central difference of F along s_j, compared with the analytic derivative.
inline double fd_check(const TransferEvaluator &ev, const Family &f, std::vector<Complex> s,
                       std::span<const double> p, int j, double h = 1e-5)
{
  MatrixXcd exact = ev.eval(f, s, p, Deriv::ds(j));
  std::vector<Complex> sp = s, sm = s;
  sp[j - 1] += h;
  sm[j - 1] -= h;
  MatrixXcd fd = (ev.eval(f, sp, p) - ev.eval(f, sm, p)) / (2.0 * h);
  return rel_err(exact, fd);
}

//
// Tangential conditions for sigma = mu with directions b, c:
//   F_L b, c^T F_L, d/ds c^T F_L b,
//   F_N (I (x) b^eta), c^T F_N (I (x) I (x) b^(eta-1)), d/ds_j c^T F_N (I (x) b^eta),
//   F_H b^xi, c^T F_H (I (x) b^(xi-1)), d/ds_j c^T F_H b^xi.
//
inline double tangential_conditions(const TransferEvaluator &fom, const TransferEvaluator &rom,
                                    const InterpEntry &e, const std::vector<Family> &fams)
{
  const std::span<const double> p(e.p);
  const Index m = e.b.size();
  const MatrixXcd I = MatrixXcd::Identity(m, m);
  const MatrixXcd cT = e.c.transpose();
  double worst = 0.0;
  auto upd = [&worst](const MatrixXcd &a, const MatrixXcd &b) { worst = std::max(worst, rel_err(a, b)); };
  for (const Family &f : fams)
  {
    std::vector<Complex> s(f.num_args(), e.sigma);
    const MatrixXcd F = fom.eval(f, s, p), Fr = rom.eval(f, s, p);
    MatrixXcd right, left;
    if (f.kind == 'L')
    {
      right = e.b;
      left = I;
    }
    else if (f.kind == 'N')
    {
      right = kron(I, kron_power(e.b, f.order));
      left = kron(kron(I, I), kron_power(e.b, f.order - 1));
    }
    else
    {
      right = kron_power(e.b, f.order);
      left = kron(I, kron_power(e.b, f.order - 1));
    }
    upd(F * right, Fr * right);
    upd(cT * F * left, cT * Fr * left);
    for (int j = 1; j <= f.num_args(); j++)
    {
      upd(cT * fom.eval(f, s, p, Deriv::ds(j)) * right, cT * rom.eval(f, s, p, Deriv::ds(j)) * right);
    }
  }
  return worst;
}

// Value and d/dp_k mismatch at (sigma, p) with sigma = mu.
inline double parametric_conditions(const TransferEvaluator &fom, const TransferEvaluator &rom,
                                    const InterpEntry &e, const std::vector<Family> &fams, int q)
{
  double worst = value_conditions(fom, rom, e, fams);
  const std::span<const double> p(e.p);
  for (const Family &f : fams)
  {
    std::vector<Complex> s(f.num_args(), e.sigma);
    for (int k = 0; k < q; k++)
    {
      worst = std::max(worst, rel_err(fom.eval(f, s, p, Deriv::dp(k)), rom.eval(f, s, p, Deriv::dp(k))));
    }
  }
  return worst;
}

inline InterpEntry siso_entry(Complex sigma, Complex mu, std::vector<double> p = {})
{
  InterpEntry e;
  e.sigma = sigma;
  e.mu = mu;
  e.p = std::move(p);
  e.b = VectorXcd::Ones(1);
  e.c = VectorXcd::Ones(1);
  return e;
}

}  // namespace strmor::testing

#endif  // STRMOR_TESTS_SUPPORT_HPP
