// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_BENCH_HPP
#define STRMOR_BENCH_HPP

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "model.hpp"

namespace strmor
{

namespace detail
{

using Triplets = std::vector<Eigen::Triplet<double>>;

inline SparseMatrixXd from_triplets(Index n, Index m, const Triplets &t)
{
  SparseMatrixXd A(n, m);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

inline SparseMatrixXd speye(Index n)
{
  SparseMatrixXd I(n, n);
  I.setIdentity();
  return I;
}

// tridiag(lo, diag, hi) scaled by a.
inline SparseMatrixXd tridiag(Index n, double lo, double diag, double hi, double a = 1.0)
{
  Triplets t;
  for (Index i = 0; i < n; i++)
  {
    t.emplace_back(i, i, a * diag);
    if (i > 0)
    {
      t.emplace_back(i, i - 1, a * lo);
    }
    if (i + 1 < n)
    {
      t.emplace_back(i, i + 1, a * hi);
    }
  }
  return from_triplets(n, n, t);
}

// Mode-1 unfolding [N_1, ..., N_m] of a bilinear eta = 1 term.
inline SparseUnfolding bilinear_unfolding(Index n, const std::vector<SparseMatrixXd> &Ns)
{
  std::vector<SparseUnfolding::Entry> e;
  for (std::size_t k = 0; k < Ns.size(); k++)
  {
    for (Index j = 0; j < Ns[k].outerSize(); j++)
    {
      for (SparseMatrixXd::InnerIterator it(Ns[k], j); it; ++it)
      {
        e.push_back({it.row(), it.col() + n * static_cast<Index>(k), it.value()});
      }
    }
  }
  return SparseUnfolding(n, {n, static_cast<Index>(Ns.size())}, std::move(e));
}

inline MatrixXd random_orthogonal(Index n, std::mt19937_64 &rng)
{
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd G(n, n);
  for (Index j = 0; j < n; j++)
  {
    for (Index i = 0; i < n; i++)
    {
      G(i, j) = g(rng);
    }
  }
  Eigen::HouseholderQR<MatrixXd> qr(G);
  MatrixXd Q = qr.householderQ();
  // Sign fix so the result does not depend on the QR sign convention.
  for (Index j = 0; j < n; j++)
  {
    if (qr.matrixQR()(j, j) < 0.0)
    {
      Q.col(j) = -Q.col(j);
    }
  }
  return Q;
}

inline MatrixXd gaussian(Index r, Index c, std::mt19937_64 &rng, double scale = 1.0)
{
  std::normal_distribution<double> g(0.0, scale);
  MatrixXd M(r, c);
  for (Index j = 0; j < c; j++)
  {
    for (Index i = 0; i < r; i++)
    {
      M(i, j) = g(rng);
    }
  }
  return M;
}

}  // namespace detail

//
// Parametric Chafee-Infante: v_t = v_xx + v (p - v^2) on (0, 1), v(0, t) = u(t), v_x(1, t) = 0.
// k interior nodes with h = 1/(k+1); the Neumann end mirrors v_{k+1} = v_k. Output v at the
// right end.
//
inline System gen_chafee(Index k)
{
  if (k < 3)
  {
    throw ValidationError("chafee grid size must be at least 3");
  }
  const double h2 = static_cast<double>((k + 1) * (k + 1));
  detail::Triplets t;
  for (Index i = 0; i < k; i++)
  {
    t.emplace_back(i, i, i + 1 == k ? -h2 : -2.0 * h2);
    if (i > 0)
    {
      t.emplace_back(i, i - 1, h2);
    }
    if (i + 1 < k)
    {
      t.emplace_back(i, i + 1, h2);
    }
  }
  SparseMatrixXd A1 = detail::from_triplets(k, k, t);
  SparseMatrixXd I = detail::speye(k);
  System sys;
  sys.op = StructuredOperator({{ScalarExpr::freq(), I},
                               {ScalarExpr::constant(1.0), -A1},
                               {ScalarExpr::param(0), -I}});
  MatrixXd B = MatrixXd::Zero(k, 1);
  B(0, 0) = h2;
  MatrixXd C = MatrixXd::Zero(1, k);
  C(0, k - 1) = 1.0;
  sys.B = ParamMatrix::constant(B);
  sys.C = ParamMatrix::constant(C);
  std::vector<SparseUnfolding::Entry> h3;
  for (Index i = 0; i < k; i++)
  {
    h3.push_back({i, i + i * k + i * k * k, -1.0});
  }
  std::vector<std::pair<ScalarExpr, SparseUnfolding>> pieces;
  pieces.push_back({ScalarExpr::constant(1.0), SparseUnfolding(k, {k, k, k}, std::move(h3))});
  sys.poly.emplace_back(TensorTerm::Kind::Poly, 3, k, 1, std::move(pieces), true);
  sys.d = 3;
  sys.q = 1;
  sys.validate();
  return sys;
}

struct MsdOptions
{
  double damping = 0.1;       // D = damping * K
  double modulation = 0.005;  // N_i = modulation * K restricted to half i
};

//
// Mass-spring-damper chain surrogate: unit masses, springs of stiffness 2 to both neighbours and
// to ground, proportional damping, forcing and observation at both ends.
//
inline System gen_msd(Index n, const MsdOptions &opt = {})
{
  if (n < 4)
  {
    throw ValidationError("mass-spring chain needs at least 4 masses");
  }
  detail::Triplets tk;
  for (Index i = 0; i < n; i++)
  {
    double deg = 2.0 * ((i > 0) + (i + 1 < n)) + 2.0;
    tk.emplace_back(i, i, deg);
    if (i > 0)
    {
      tk.emplace_back(i, i - 1, -2.0);
    }
    if (i + 1 < n)
    {
      tk.emplace_back(i, i + 1, -2.0);
    }
  }
  SparseMatrixXd K = detail::from_triplets(n, n, tk);
  SparseMatrixXd D = opt.damping * K;
  SparseMatrixXd M = detail::speye(n);
  std::vector<SparseMatrixXd> Ns(2, SparseMatrixXd(n, n));
  const Index half = n / 2;
  for (int k = 0; k < 2; k++)
  {
    detail::Triplets t;
    Index lo = k == 0 ? 0 : half, hi = k == 0 ? half : n;
    for (Index j = 0; j < K.outerSize(); j++)
    {
      for (SparseMatrixXd::InnerIterator it(K, j); it; ++it)
      {
        if (it.row() >= lo && it.row() < hi && it.col() >= lo && it.col() < hi)
        {
          t.emplace_back(it.row(), it.col(), opt.modulation * it.value());
        }
      }
    }
    Ns[k] = detail::from_triplets(n, n, t);
  }
  System sys;
  sys.op = StructuredOperator({{ScalarExpr::pow(ScalarExpr::freq(), 2.0), M},
                               {ScalarExpr::freq(), D},
                               {ScalarExpr::constant(1.0), K}});
  MatrixXd B = MatrixXd::Zero(n, 2);
  B(0, 0) = 1.0;
  B(n - 1, 1) = 1.0;
  sys.B = ParamMatrix::constant(B);
  sys.C = ParamMatrix::constant(B.transpose());
  std::vector<std::pair<ScalarExpr, SparseUnfolding>> pieces;
  pieces.push_back({ScalarExpr::constant(1.0), detail::bilinear_unfolding(n, Ns)});
  sys.bilin.emplace_back(TensorTerm::Kind::Bilin, 1, n, 2, std::move(pieces), true);
  sys.d = 2;
  sys.q = 0;
  sys.validate();
  return sys;
}

//
// Heated rod with delayed feedback on (0, pi), Dirichlet ends:
//   K(s, p) = s I - (A0 - p Ad) - p e^{-s} Ad,  Ad = diag(sin x_i),
// B = ones, C = ones^T / n, bilinear surrogate N = 0.2 diag(sin x_i).
//
inline System gen_delay_rod(Index n)
{
  if (n < 3)
  {
    throw ValidationError("delay rod needs at least 3 grid points");
  }
  const double h = std::numbers::pi / static_cast<double>(n + 1);
  SparseMatrixXd A0 = detail::tridiag(n, 1.0, -2.0, 1.0, 1.0 / (h * h));
  detail::Triplets td, tn;
  for (Index i = 0; i < n; i++)
  {
    double sx = std::sin(static_cast<double>(i + 1) * h);
    td.emplace_back(i, i, sx);
    tn.emplace_back(i, i, 0.2 * sx);
  }
  SparseMatrixXd Ad = detail::from_triplets(n, n, td);
  SparseMatrixXd N = detail::from_triplets(n, n, tn);
  ScalarExpr s = ScalarExpr::freq(), p = ScalarExpr::param(0);
  System sys;
  sys.op = StructuredOperator({{s, detail::speye(n)},
                               {ScalarExpr::constant(1.0), -A0},
                               {p, Ad},
                               {ScalarExpr::neg(p * ScalarExpr::exp(-1.0, s)), Ad}});
  sys.B = ParamMatrix::constant(MatrixXd::Ones(n, 1));
  sys.C = ParamMatrix::constant(MatrixXd::Constant(1, n, 1.0 / static_cast<double>(n)));
  std::vector<std::pair<ScalarExpr, SparseUnfolding>> pieces;
  pieces.push_back({ScalarExpr::constant(1.0), detail::bilinear_unfolding(n, {N})});
  sys.bilin.emplace_back(TensorTerm::Kind::Bilin, 1, n, 1, std::move(pieces), true);
  sys.d = 2;
  sys.q = 1;
  sys.validate();
  return sys;
}

struct PlantedSystem
{
  System full;
  System hidden;
  MatrixXd embedding;  // n x r0, orthonormal; x = embedding * x_hidden
};

//
// Quadratic-bilinear first-order system (H2, N1) whose minimal part has order r0. In rotated
// coordinates the state splits into x1 (size r0, reachable and observable), x2 (reachable only)
// and x3 (observable only); all three are mixed by a random orthogonal matrix.
//
inline PlantedSystem gen_planted(Index r0, Index n, std::uint64_t seed, Index m = 1, Index p_out = 1)
{
  if (r0 < 1 || r0 > n)
  {
    throw ValidationError("planted order must satisfy 1 <= r0 <= n");
  }
  std::mt19937_64 rng(seed);
  const Index a = (n - r0 + 1) / 2, b = n - r0 - a;
  const Index i1 = 0, i2 = r0, i3 = r0 + a;
  MatrixXd At = MatrixXd::Zero(n, n);
  auto stable_block = [&](Index off, Index size)
  {
    if (size == 0)
    {
      return;
    }
    MatrixXd R = detail::gaussian(size, size, rng, 0.5 / std::sqrt(static_cast<double>(size)));
    At.block(off, off, size, size) = R - 2.0 * MatrixXd::Identity(size, size);
  };
  stable_block(i1, r0);
  stable_block(i2, a);
  stable_block(i3, b);
  if (a > 0)
  {
    At.block(i2, i1, a, r0) = detail::gaussian(a, r0, rng, 0.3);
  }
  if (b > 0)
  {
    At.block(i1, i3, r0, b) = detail::gaussian(r0, b, rng, 0.3);
  }
  MatrixXd Bt = MatrixXd::Zero(n, m), Ct = MatrixXd::Zero(p_out, n);
  Bt.topRows(r0 + a) = detail::gaussian(r0 + a, m, rng);
  Ct.leftCols(r0) = detail::gaussian(p_out, r0, rng);
  if (b > 0)
  {
    Ct.rightCols(b) = detail::gaussian(p_out, b, rng);
  }

  // H2: x1 rows read x1 (x) x1; x2 rows read (x1, x2) pairs.
  MatrixXd Ht = MatrixXd::Zero(n, n * n);
  std::normal_distribution<double> g(0.0, 0.2);
  for (Index i = 0; i < r0 + a; i++)
  {
    Index lim = i < r0 ? r0 : r0 + a;
    for (Index j = 0; j < lim; j++)
    {
      for (Index k = 0; k < lim; k++)
      {
        Ht(i, j + n * k) = g(rng);
      }
    }
  }
  std::vector<MatrixXd> Nt(m, MatrixXd::Zero(n, n));
  for (Index k = 0; k < m; k++)
  {
    Nt[k].topLeftCorner(r0, r0) = detail::gaussian(r0, r0, rng, 0.2);
    if (a > 0)
    {
      Nt[k].block(i2, 0, a, r0 + a) = detail::gaussian(a, r0 + a, rng, 0.2);
    }
  }

  MatrixXd Q = r0 == n ? MatrixXd::Identity(n, n) : detail::random_orthogonal(n, rng);
  auto build = [&](const MatrixXd &P, Index dim)
  {
    // P is the n x dim embedding; the system is P^T (.) P in every mode.
    System sys;
    MatrixXd A = P.transpose() * At * P;
    sys.op = StructuredOperator({{ScalarExpr::freq(), detail::speye(dim)},
                                 {ScalarExpr::constant(-1.0), A.sparseView(0.0, 0.0)}});
    sys.B = ParamMatrix::constant(P.transpose() * Bt);
    sys.C = ParamMatrix::constant(Ct * P);
    MatrixXd PH = P.transpose() * Ht;
    MatrixXd H(dim, dim * dim);
    for (Index c = 0; c < dim; c++)
    {
      // Column block c (slowest digit) of H (P (x) P).
      MatrixXd acc = MatrixXd::Zero(dim, dim);
      for (Index k = 0; k < n; k++)
      {
        if (P(k, c) == 0.0)
        {
          continue;
        }
        acc += P(k, c) * (PH.middleCols(n * k, n) * P);
      }
      H.middleCols(dim * c, dim) = acc;
    }
    std::vector<std::pair<ScalarExpr, SparseUnfolding>> hp;
    hp.push_back({ScalarExpr::constant(1.0), SparseUnfolding::from_dense(H, {dim, dim})});
    sys.poly.emplace_back(TensorTerm::Kind::Poly, 2, dim, 1, std::move(hp), false);
    MatrixXd N(dim, dim * m);
    for (Index k = 0; k < m; k++)
    {
      N.middleCols(dim * k, dim) = P.transpose() * Nt[k] * P;
    }
    std::vector<std::pair<ScalarExpr, SparseUnfolding>> np;
    np.push_back({ScalarExpr::constant(1.0), SparseUnfolding::from_dense(N, {dim, m})});
    sys.bilin.emplace_back(TensorTerm::Kind::Bilin, 1, dim, m, std::move(np), false);
    sys.d = 2;
    sys.q = 0;
    sys.validate();
    return sys;
  };
  PlantedSystem out;
  out.embedding = Q.leftCols(r0);
  out.full = build(Q.transpose(), n);
  out.hidden = build(MatrixXd::Identity(n, n).leftCols(r0), r0);
  return out;
}

enum class RandomStructure
{
  FirstOrder,
  SecondOrder,
  Delay
};

//
// Random dense-ish structured test system with every family L, N1..N(d-1), H2..Hd. Pencils are
// shifted so K(s) is comfortably nonsingular for Re s > 0.
//
inline System gen_random(RandomStructure kind, Index n, int d, std::uint64_t seed, Index m = 1,
                         Index p_out = 1, double density = 0.3)
{
  if (n < 1 || d < 1 || m < 1 || p_out < 1)
  {
    throw ValidationError("random system needs positive sizes");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double sn = 1.0 / std::sqrt(static_cast<double>(n));
  auto sym_pd = [&]()
  {
    MatrixXd G = detail::gaussian(n, n, rng, sn);
    return MatrixXd(G * G.transpose() + MatrixXd::Identity(n, n));
  };
  System sys;
  ScalarExpr s = ScalarExpr::freq();
  switch (kind)
  {
    case RandomStructure::FirstOrder:
    {
      MatrixXd A = detail::gaussian(n, n, rng, 0.5 * sn) - 2.0 * MatrixXd::Identity(n, n);
      sys.op = StructuredOperator(
          {{s, detail::speye(n)}, {ScalarExpr::constant(-1.0), A.sparseView(0.0, 0.0)}});
      break;
    }
    case RandomStructure::SecondOrder:
    {
      MatrixXd M = sym_pd(), D = sym_pd(), K = sym_pd();
      sys.op = StructuredOperator({{ScalarExpr::pow(s, 2.0), M.sparseView(0.0, 0.0)},
                                   {s, D.sparseView(0.0, 0.0)},
                                   {ScalarExpr::constant(1.0), K.sparseView(0.0, 0.0)}});
      break;
    }
    case RandomStructure::Delay:
    {
      MatrixXd A = detail::gaussian(n, n, rng, 0.5 * sn) - 3.0 * MatrixXd::Identity(n, n);
      MatrixXd Ad = detail::gaussian(n, n, rng, 0.5 * sn);
      sys.op = StructuredOperator({{s, detail::speye(n)},
                                   {ScalarExpr::constant(-1.0), A.sparseView(0.0, 0.0)},
                                   {ScalarExpr::exp(-1.0, s) * ScalarExpr::constant(-1.0),
                                    Ad.sparseView(0.0, 0.0)}});
      break;
    }
  }
  sys.B = ParamMatrix::constant(detail::gaussian(n, m, rng));
  sys.C = ParamMatrix::constant(detail::gaussian(p_out, n, rng));
  auto random_unfolding = [&](std::vector<Index> rad, double scale)
  {
    Index cols = 1;
    for (Index r : rad)
    {
      cols *= r;
    }
    std::normal_distribution<double> g(0.0, scale);
    std::vector<SparseUnfolding::Entry> e;
    for (Index j = 0; j < cols; j++)
    {
      for (Index i = 0; i < n; i++)
      {
        if (uni(rng) < density)
        {
          e.push_back({i, j, g(rng)});
        }
      }
    }
    return SparseUnfolding(n, std::move(rad), std::move(e));
  };
  for (int xi = 2; xi <= d; xi++)
  {
    std::vector<std::pair<ScalarExpr, SparseUnfolding>> pc;
    pc.push_back({ScalarExpr::constant(1.0),
                  random_unfolding(std::vector<Index>(xi, n), std::pow(sn, xi))});
    sys.poly.emplace_back(TensorTerm::Kind::Poly, xi, n, 1, std::move(pc), false);
  }
  for (int eta = 1; eta <= std::max(d - 1, 1) && d > 1; eta++)
  {
    std::vector<Index> rad(eta, n);
    rad.push_back(m);
    std::vector<std::pair<ScalarExpr, SparseUnfolding>> pc;
    pc.push_back({ScalarExpr::constant(1.0), random_unfolding(rad, std::pow(sn, eta))});
    sys.bilin.emplace_back(TensorTerm::Kind::Bilin, eta, n, m, std::move(pc), false);
  }
  sys.d = d;
  sys.q = 0;
  sys.validate();
  return sys;
}

}  // namespace strmor

#endif  // STRMOR_BENCH_HPP
