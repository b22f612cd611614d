// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_BASIS_HPP
#define STRMOR_BASIS_HPP

#include <random>
#include <vector>

#include <Eigen/SVD>

#include "model.hpp"
#include "transfer.hpp"

namespace strmor
{

struct LabeledColumn
{
  VectorXcd v;
  Family family;
  std::size_t entry = 0;
  char side = 'V';
  int input = -1;  // free input index of N-family columns
};

struct PrimitiveColumns
{
  std::vector<LabeledColumn> V;
  std::vector<LabeledColumn> W;
};

//
// Interpolation columns of one plan entry (sigma, mu, p, b, c):
//   V: K^{-1}(s) B b, K^{-1}(s) N (e_k (x) x^eta), K^{-1}(s) H x^xi           with x = K^{-1}(s) B b
//   W: K^{-T}(m) C^T c, K^{-T}(s) N_(2)(e_k (x) x^(eta-1) (x) w), K^{-T}(s) H_(2)(x^(xi-1) (x) w)
// where s = sigma, m = mu and w = K^{-T}(mu) C^T c.
//
inline PrimitiveColumns primitive_columns(const TransferEvaluator &ev, const InterpEntry &e,
                                          std::size_t index, const std::vector<Family> &families)
{
  const System &sys = ev.system();
  const std::span<const double> p(e.p);
  const Index m = sys.m();
  PrimitiveColumns out;

  const VectorXcd x = ev.solve(e.sigma, p, ev.input(e.sigma, p) * e.b).col(0);
  const VectorXcd w =
      ev.solve(e.mu, p, ev.output(e.mu, p).transpose() * e.c, true).col(0);

  std::vector<Family> fams = families;
  std::sort(fams.begin(), fams.end());
  for (const Family &f : fams)
  {
    if (f.kind == 'L')
    {
      out.V.push_back({x, f, index, 'V'});
      out.W.push_back({w, f, index, 'W'});
      continue;
    }
    const TensorTerm *T = f.kind == 'N' ? sys.find_bilin(f.order) : sys.find_poly(f.order);
    if (!T)
    {
      throw ValidationError("system has no " + f.to_string() + " term");
    }
    if (f.kind == 'H')
    {
      std::vector<VectorXcd> fv(f.order, x);
      VectorXcd y = apply_term(*T, fv, p);
      out.V.push_back({ev.solve(e.sigma, p, y).col(0), f, index, 'V'});
      std::vector<VectorXcd> fw(f.order, x);
      fw.back() = w;
      VectorXcd z = apply_term(*T, fw, p, -1, true);
      out.W.push_back({ev.solve(e.sigma, p, z, true).col(0), f, index, 'W'});
      continue;
    }
    MatrixXcd Yv(sys.n(), m), Yw(sys.n(), m);
    for (Index k = 0; k < m; k++)
    {
      VectorXcd ek = VectorXcd::Zero(m);
      ek(k) = 1.0;
      std::vector<VectorXcd> fv(f.order + 1, x);
      fv[0] = ek;
      Yv.col(k) = apply_term(*T, fv, p);
      std::vector<VectorXcd> fw(f.order + 1, x);
      fw[0] = ek;
      fw.back() = w;
      Yw.col(k) = apply_term(*T, fw, p, -1, true);
    }
    MatrixXcd Zv = ev.solve(e.sigma, p, Yv);
    MatrixXcd Zw = ev.solve(e.sigma, p, Yw, true);
    for (Index k = 0; k < m; k++)
    {
      out.V.push_back({Zv.col(k), f, index, 'V', static_cast<int>(k)});
      out.W.push_back({Zw.col(k), f, index, 'W', static_cast<int>(k)});
    }
  }
  return out;
}

// [Re Z, Im Z]; imaginary parts with norm <= 1e-14 ||Z|| are dropped column by column.
inline MatrixXd realify(const MatrixXcd &Z)
{
  const double scale = Z.norm();
  std::vector<Index> keep;
  for (Index j = 0; j < Z.cols(); j++)
  {
    if (Z.col(j).imag().norm() > 1e-14 * scale)
    {
      keep.push_back(j);
    }
  }
  MatrixXd R(Z.rows(), Z.cols() + static_cast<Index>(keep.size()));
  R.leftCols(Z.cols()) = Z.real();
  for (std::size_t t = 0; t < keep.size(); t++)
  {
    R.col(Z.cols() + static_cast<Index>(t)) = Z.col(keep[t]).imag();
  }
  return R;
}

inline MatrixXcd stack_columns(const std::vector<LabeledColumn> &cols, Index n)
{
  MatrixXcd Z(n, static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); j++)
  {
    Z.col(static_cast<Index>(j)) = cols[j].v;
  }
  return Z;
}

//
// Orthonormal basis U of range(M) from the SVD of the column-normalized matrix, together with the
// retained singular values S. Singular values below max(tol, 1e3 eps) sigma_max are discarded, so
// U diag(S) reproduces the normalized columns up to that cutoff.
//
struct WeightedBasis
{
  MatrixXd U;
  VectorXd S;
};

// Left singular vectors and values of M, dropping zero columns. With normalize the columns are
// scaled to unit length first, so only the span is kept.
inline WeightedBasis orth_weighted(const MatrixXd &M, double tol = 0.0, bool normalize = false)
{
  if (M.cols() == 0 || M.rows() == 0)
  {
    warn("orthonormalization of an empty matrix");
    return {MatrixXd(M.rows(), 0), VectorXd()};
  }
  std::vector<Index> nz;
  for (Index j = 0; j < M.cols(); j++)
  {
    if (M.col(j).norm() > 0.0)
    {
      nz.push_back(j);
    }
  }
  if (nz.empty())
  {
    warn("orthonormalization of a zero matrix returns an empty basis");
    return {MatrixXd(M.rows(), 0), VectorXd()};
  }
  MatrixXd A(M.rows(), static_cast<Index>(nz.size()));
  for (std::size_t t = 0; t < nz.size(); t++)
  {
    A.col(static_cast<Index>(t)) = normalize ? M.col(nz[t]).normalized() : M.col(nz[t]);
  }
  Eigen::BDCSVD<MatrixXd> svd(A, Eigen::ComputeThinU);
  const VectorXd &sv = svd.singularValues();
  const double thr = std::max(tol, 1e3 * machine_eps) * sv(0);
  Index k = 0;
  while (k < sv.size() && sv(k) > thr)
  {
    k++;
  }
  return {svd.matrixU().leftCols(k), sv.head(k)};
}

inline MatrixXd orth_dedup(const MatrixXd &M, double tol = 0.0)
{
  return orth_weighted(M, tol, true).U;
}

//
// V and W are orthonormal spans of the primitive columns. Vw and Ww are U diag(S) from the thin
// SVD of the raw columns, so they carry the Gram structure of the interpolation data; the rank
// revealing SVDs and the truncation work on these.
//
struct BasisBundle
{
  std::vector<LabeledColumn> V_raw;
  std::vector<LabeledColumn> W_raw;
  MatrixXd V;
  MatrixXd W;
  MatrixXd Vw;
  MatrixXd Ww;
  double tol = 0.0;
  bool galerkin = false;

  const MatrixXd &V_weighted() const { return Vw; }
  const MatrixXd &W_weighted() const { return Ww; }
};

inline BasisBundle build_VW(const System &sys, const InterpPlan &plan, double tol = 0.0)
{
  plan.validate(sys);
  std::vector<Family> fams = plan.families.empty() ? InterpPlan::all_families(sys) : plan.families;
  TransferEvaluator ev(sys, true, 4 * plan.entries.size() + 8);
  std::vector<PrimitiveColumns> per(plan.entries.size());
  parallel_for(plan.entries.size(), [&](std::size_t i)
               { per[i] = primitive_columns(ev, plan.entries[i], i, fams); });
  BasisBundle B;
  B.tol = tol;
  B.galerkin = plan.galerkin;
  for (auto &pc : per)
  {
    for (auto &c : pc.V)
    {
      B.V_raw.push_back(std::move(c));
    }
    for (auto &c : pc.W)
    {
      B.W_raw.push_back(std::move(c));
    }
  }
  const Index n = sys.n();
  if (plan.galerkin)
  {
    std::vector<LabeledColumn> pooled = B.V_raw;
    pooled.insert(pooled.end(), B.W_raw.begin(), B.W_raw.end());
    const MatrixXd M = realify(stack_columns(pooled, n));
    B.V = B.W = orth_dedup(M, tol);
    WeightedBasis wb = orth_weighted(M, tol);
    B.Vw = B.Ww = wb.U * wb.S.asDiagonal();
  }
  else
  {
    const MatrixXd Mv = realify(stack_columns(B.V_raw, n));
    const MatrixXd Mw = realify(stack_columns(B.W_raw, n));
    B.V = orth_dedup(Mv, tol);
    B.W = orth_dedup(Mw, tol);
    WeightedBasis wv = orth_weighted(Mv, tol);
    WeightedBasis ww = orth_weighted(Mw, tol);
    B.Vw = wv.U * wv.S.asDiagonal();
    B.Ww = ww.U * ww.S.asDiagonal();
  }
  if (B.V.cols() == 0 || B.W.cols() == 0)
  {
    throw NumericalError("interpolation basis is empty");
  }
  return B;
}

//
// Plan construction helpers.
//
inline std::vector<double> logspace(double a, double b, std::size_t count)
{
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; i++)
  {
    double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    v[i] = std::pow(10.0, std::log10(a) + t * (std::log10(b) - std::log10(a)));
  }
  return v;
}

inline std::vector<double> linspace(double a, double b, std::size_t count)
{
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; i++)
  {
    double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    v[i] = a + t * (b - a);
  }
  return v;
}

// SISO directions b = c = 1, or random unit directions when the system is MIMO.
inline void set_directions(InterpEntry &e, Index m, Index p_out, std::mt19937_64 &rng, bool random)
{
  std::normal_distribution<double> g(0.0, 1.0);
  e.b = VectorXcd::Ones(m);
  e.c = VectorXcd::Ones(p_out);
  if (random && m > 1)
  {
    for (Index i = 0; i < m; i++)
    {
      e.b(i) = g(rng);
    }
    e.b /= e.b.norm();
  }
  if (random && p_out > 1)
  {
    for (Index i = 0; i < p_out; i++)
    {
      e.c(i) = g(rng);
    }
    e.c /= e.c.norm();
  }
}

// Imaginary-axis plan sigma = mu = i w over a frequency grid crossed with parameter samples.
inline InterpPlan imaginary_axis_plan(const System &sys, const std::vector<double> &omegas,
                                      const std::vector<std::vector<double>> &params,
                                      std::vector<Family> families, bool galerkin,
                                      std::uint64_t seed, bool random_directions = true)
{
  InterpPlan plan;
  plan.families = std::move(families);
  plan.galerkin = galerkin;
  plan.hermite = true;
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> ps = params.empty() ? std::vector<std::vector<double>>{{}} : params;
  for (const auto &pv : ps)
  {
    for (double w : omegas)
    {
      InterpEntry e;
      e.sigma = e.mu = Complex(0.0, w);
      e.p = pv;
      set_directions(e, sys.m(), sys.p_out(), rng, random_directions);
      plan.entries.push_back(std::move(e));
    }
  }
  return plan;
}

}  // namespace strmor

#endif  // STRMOR_BASIS_HPP
