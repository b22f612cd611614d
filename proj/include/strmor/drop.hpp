// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_DROP_HPP
#define STRMOR_DROP_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "basis.hpp"
#include "model.hpp"

namespace strmor
{

//
// W^T A_i V for every operator term, with SVDs of the side-by-side and stacked arrangements:
//   [W^T A_1 V, ..., W^T A_l V] = W1 S_h *     [W^T A_1 V; ...; W^T A_l V] = * S_v V1^T
//
struct PencilBlocks
{
  std::vector<MatrixXd> blocks;
  MatrixXd W1;
  VectorXd sigma_h;
  MatrixXd V1;
  VectorXd sigma_v;
};

inline PencilBlocks pencil_blocks(const System &sys, const MatrixXd &V, const MatrixXd &W)
{
  if (V.rows() != sys.n() || W.rows() != sys.n())
  {
    throw DimensionError("basis row count does not match the state dimension");
  }
  if (V.cols() == 0 || W.cols() == 0)
  {
    throw DimensionError("pencil blocks need nonempty bases");
  }
  const auto &terms = sys.op.terms();
  const Index l = static_cast<Index>(terms.size());
  PencilBlocks P;
  P.blocks.resize(terms.size());
  parallel_for(terms.size(), [&](std::size_t i)
               { P.blocks[i] = W.transpose() * (terms[i].A * V); });
  const Index kw = W.cols(), kv = V.cols();
  MatrixXd Hcat(kw, l * kv), Vcat(l * kw, kv);
  for (Index i = 0; i < l; i++)
  {
    Hcat.middleCols(i * kv, kv) = P.blocks[i];
    Vcat.middleRows(i * kw, kw) = P.blocks[i];
  }
  Eigen::BDCSVD<MatrixXd> sh(Hcat, Eigen::ComputeThinU);
  Eigen::BDCSVD<MatrixXd> sv(Vcat, Eigen::ComputeThinV);
  P.W1 = sh.matrixU();
  P.sigma_h = sh.singularValues();
  P.V1 = sv.matrixV();
  P.sigma_v = sv.singularValues();
  return P;
}

// Count of singular values >= tol_rel * sigma_0.
inline Index numerical_rank(const VectorXd &sigma, double tol_rel = 1e-10)
{
  if (sigma.size() == 0)
  {
    throw ValidationError("numerical rank of an empty spectrum");
  }
  if (sigma(0) == 0.0)
  {
    return 0;
  }
  Index r = 0;
  while (r < sigma.size() && sigma(r) >= tol_rel * sigma(0))
  {
    r++;
  }
  return r;
}

struct RankReport
{
  Index horizontal = 0;
  Index vertical = 0;
  Index chosen = 0;
};

// Both stacked ranks; on disagreement the larger one is taken (capped by available vectors).
inline RankReport pencil_rank(const PencilBlocks &P, double tol_rel = 1e-10)
{
  RankReport R;
  R.horizontal = numerical_rank(P.sigma_h, tol_rel);
  R.vertical = numerical_rank(P.sigma_v, tol_rel);
  R.chosen = std::max(R.horizontal, R.vertical);
  if (R.horizontal != R.vertical)
  {
    warn("rank estimates disagree: horizontal " + std::to_string(R.horizontal) + ", vertical " +
         std::to_string(R.vertical) + "; using " + std::to_string(R.chosen));
  }
  R.chosen = std::min({R.chosen, P.W1.cols(), P.V1.cols()});
  return R;
}

inline MatrixXd orthonormal_columns(const MatrixXd &A)
{
  Eigen::HouseholderQR<MatrixXd> qr(A);
  return qr.householderQ() * MatrixXd::Identity(A.rows(), A.cols());
}

// V_e = V V1(:, 1:r), W_e = W W1(:, 1:r), returned with orthonormalized columns (the projected
// model depends only on the spans). Galerkin uses W_e = V_e.
inline std::pair<MatrixXd, MatrixXd> truncate(const MatrixXd &V, const MatrixXd &W,
                                              const PencilBlocks &P, Index r, bool galerkin)
{
  if (r < 1)
  {
    throw ValidationError("truncation order must be at least 1");
  }
  if (r > P.V1.cols() || r > P.W1.cols())
  {
    throw ValidationError("truncation order " + std::to_string(r) + " exceeds the " +
                          std::to_string(std::min(P.V1.cols(), P.W1.cols())) +
                          " available singular vectors");
  }
  MatrixXd Ve = orthonormal_columns(V * P.V1.leftCols(r));
  MatrixXd We = galerkin ? Ve : orthonormal_columns(W * P.W1.leftCols(r));
  return {Ve, We};
}

inline SparseMatrixXd dense_to_sparse(const MatrixXd &M)
{
  return M.sparseView(0.0, 0.0);
}

//
// Petrov-Galerkin projection of every affine piece; coefficient expressions are reused as is.
//
inline ReducedSystem project(const System &sys, const MatrixXd &Ve, const MatrixXd &We)
{
  if (Ve.rows() != sys.n() || We.rows() != sys.n() || Ve.cols() != We.cols() || Ve.cols() == 0)
  {
    throw DimensionError("projection bases must both be n x r with r >= 1");
  }
  const Index r = Ve.cols();
  System red;
  std::vector<StructuredOperator::Term> ops;
  for (const auto &t : sys.op.terms())
  {
    MatrixXd Ah = We.transpose() * (t.A * Ve);
    ops.push_back({t.kappa, dense_to_sparse(Ah)});
  }
  red.op = StructuredOperator(std::move(ops));
  std::vector<ParamMatrix::Term> bt, ct;
  for (const auto &t : sys.B.terms())
  {
    bt.push_back({t.coeff, We.transpose() * t.mat});
  }
  for (const auto &t : sys.C.terms())
  {
    ct.push_back({t.coeff, t.mat * Ve});
  }
  red.B = ParamMatrix(std::move(bt));
  red.C = ParamMatrix(std::move(ct));
  auto reduce = [&](const TensorTerm &T)
  {
    std::vector<const MatrixXd *> per(T.order(), &Ve);
    if (T.kind() == TensorTerm::Kind::Bilin)
    {
      per.push_back(nullptr);
    }
    std::vector<Index> rad(T.order(), r);
    if (T.kind() == TensorTerm::Kind::Bilin)
    {
      rad.push_back(T.m());
    }
    std::vector<std::pair<ScalarExpr, SparseUnfolding>> pieces;
    for (const auto &pc : T.pieces())
    {
      MatrixXd R = pc.mode1.contract<double>(We, per);
      pieces.push_back({pc.coeff, SparseUnfolding::from_dense(R, rad)});
    }
    return TensorTerm(T.kind(), T.order(), r, T.m(), std::move(pieces), true, true);
  };
  for (const auto &h : sys.poly)
  {
    red.poly.push_back(reduce(h));
  }
  for (const auto &b : sys.bilin)
  {
    red.bilin.push_back(reduce(b));
  }
  red.d = sys.d;
  red.q = sys.q;
  red.validate();
  ReducedSystem rom;
  rom.sys = std::move(red);
  rom.V = Ve;
  rom.W = We;
  rom.provenance.order = r;
  return rom;
}

struct OrderSpec
{
  std::optional<Index> order;
  double tol = 1e-10;
};

struct DropResult
{
  ReducedSystem rom;
  BasisBundle bundle;
  PencilBlocks blocks;
  RankReport rank;
};

// Deterministic FNV-1a digest of a plan, used for provenance.
inline std::string plan_hash(const InterpPlan &plan)
{
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void *data, std::size_t len)
  {
    const auto *b = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < len; i++)
    {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto &e : plan.entries)
  {
    mix(&e.sigma, sizeof(Complex));
    mix(&e.mu, sizeof(Complex));
    mix(e.p.data(), e.p.size() * sizeof(double));
    mix(e.b.data(), static_cast<std::size_t>(e.b.size()) * sizeof(Complex));
    mix(e.c.data(), static_cast<std::size_t>(e.c.size()) * sizeof(Complex));
  }
  for (const auto &f : plan.families)
  {
    std::string s = f.to_string();
    mix(s.data(), s.size());
  }
  unsigned char g = plan.galerkin ? 1 : 0;
  mix(&g, 1);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline DropResult run_drop(const System &sys, const InterpPlan &plan, const OrderSpec &spec)
{
  if (spec.order && *spec.order < 1)
  {
    throw ValidationError("truncation order must be at least 1");
  }
  DropResult D;
  D.bundle = build_VW(sys, plan, 0.0);
  const MatrixXd Vw = D.bundle.V_weighted(), Ww = D.bundle.W_weighted();
  D.blocks = pencil_blocks(sys, Vw, Ww);
  D.rank = pencil_rank(D.blocks, spec.tol);
  Index r = spec.order.value_or(D.rank.chosen);
  if (r < 1)
  {
    throw NumericalError("estimated rank is zero");
  }
  auto [Ve, We] = truncate(Vw, Ww, D.blocks, r, plan.galerkin);
  D.rom = project(sys, Ve, We);
  D.rom.provenance.plan_hash = plan_hash(plan);
  D.rom.provenance.rank_horizontal = D.rank.horizontal;
  D.rom.provenance.rank_vertical = D.rank.vertical;
  D.rom.provenance.sigma_horizontal = D.blocks.sigma_h;
  D.rom.provenance.sigma_vertical = D.blocks.sigma_v;
  return D;
}

}  // namespace strmor

#endif  // STRMOR_DROP_HPP
