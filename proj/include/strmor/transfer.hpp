// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_TRANSFER_HPP
#define STRMOR_TRANSFER_HPP

#include <vector>

#include "model.hpp"
#include "solve.hpp"

namespace strmor
{

// Derivative selector: none, d/ds_j (arg = j, 1-based) or d/dp_k (param = k).
struct Deriv
{
  int arg = 0;
  int param = -1;

  static Deriv none() { return {}; }
  static Deriv ds(int j) { return {j, -1}; }
  static Deriv dp(int k) { return {0, k}; }
  bool active() const { return arg > 0 || param >= 0; }
};

// Sum over affine pieces of coeff(p) * X_(1)(factors); with dcoeff, uses d coeff / dp_var.
inline VectorXcd apply_term(const TensorTerm &T, std::span<const VectorXcd> factors,
                            std::span<const double> p, int dcoeff_var = -1, bool mode2 = false)
{
  VectorXcd y = VectorXcd::Zero(T.n());
  for (const auto &pc : T.pieces())
  {
    ScalarExpr c = dcoeff_var >= 0 ? pc.coeff.diff_p(dcoeff_var) : pc.coeff;
    if (c.is_zero())
    {
      continue;
    }
    const SparseUnfolding &U = mode2 ? pc.mode2 : pc.mode1;
    y += c(Complex(0.0, 0.0), p) * U.apply<Complex>(factors);
  }
  return y;
}

//
// Evaluates the multivariate transfer functions
//   F_L(s1)             = C(s1) K^{-1}(s1) B(s1)
//   F_H^(xi)(s1..sxi+1) = C K^{-1}(s_xi+1) H_xi (K^{-1}(s_xi) B (x) ... (x) K^{-1}(s1) B)
//   F_N^(eta)(...)      = C K^{-1}(s_eta+1) N_eta (I_m (x) K^{-1}(s_eta) B (x) ... )
// and their analytic partial derivatives. Column j of F_H is sum_l k_l m^(l-1) with k_l the input
// column attached to s_l; F_N adds the free input index as the slowest digit.
//
class TransferEvaluator
{
  const System &sys_;
  SolveCache cache_;

  std::vector<const TensorTerm *> terms_for(const Family &f) const
  {
    std::vector<const TensorTerm *> out;
    if (f.kind == 'H')
    {
      for (const auto &h : sys_.poly)
      {
        if (h.order() == f.order)
        {
          out.push_back(&h);
        }
      }
    }
    else if (f.kind == 'N')
    {
      for (const auto &b : sys_.bilin)
      {
        if (b.order() == f.order)
        {
          out.push_back(&b);
        }
      }
    }
    return out;
  }

public:
  explicit TransferEvaluator(const System &sys, bool use_cache = true, std::size_t capacity = 256)
    : sys_(sys), cache_(sys.op, capacity, use_cache)
  {
  }

  const System &system() const { return sys_; }
  const SolveCache &cache() const { return cache_; }

  MatrixXcd solve(Complex s, std::span<const double> p, const MatrixXcd &R,
                  bool transpose = false) const
  {
    return cache_.solve(s, p, R, transpose);
  }

  MatrixXcd input(Complex s, std::span<const double> p) const { return sys_.B.eval(p, s); }
  MatrixXcd output(Complex s, std::span<const double> p) const { return sys_.C.eval(p, s); }

  MatrixXcd eval(const Family &f, std::span<const Complex> s, std::span<const double> p,
                 Deriv d = Deriv::none()) const
  {
    const int nargs = f.num_args();
    if (static_cast<int>(s.size()) != nargs)
    {
      throw ArityError("family " + f.to_string() + " takes " + std::to_string(nargs) +
                       " frequency argument(s), got " + std::to_string(s.size()));
    }
    if (static_cast<int>(p.size()) != sys_.q)
    {
      throw ArityError("system expects " + std::to_string(sys_.q) + " parameter(s), got " +
                       std::to_string(p.size()));
    }
    if (d.arg > nargs || (d.param >= 0 && d.param >= sys_.q))
    {
      throw ArityError("derivative index out of range for family " + f.to_string());
    }
    const auto terms = terms_for(f);
    if (f.kind != 'L' && terms.empty())
    {
      throw ValidationError("system has no " + f.to_string() + " term");
    }
    const int var = d.param >= 0 ? d.param : -1;
    auto affects = [&](int j) { return d.param >= 0 || d.arg == j; };
    const int k = nargs - 1;
    const Index n = sys_.n(), m = sys_.m();

    std::vector<MatrixXcd> X(k), dX(k);
    for (int j = 1; j <= k; j++)
    {
      const Complex sj = s[j - 1];
      X[j - 1] = solve(sj, p, input(sj, p));
      if (affects(j))
      {
        MatrixXcd rhs = sys_.B.eval_derivative(var, p, sj) -
                        sys_.op.apply(sys_.op.derivative_coefficients(var, sj, p), X[j - 1]);
        dX[j - 1] = solve(sj, p, rhs);
      }
    }

    const Complex so = s[k];
    MatrixXcd Y, dY;
    if (f.kind == 'L')
    {
      Y = input(so, p);
      if (d.active())
      {
        dY = affects(1) ? sys_.B.eval_derivative(var, p, so) : MatrixXcd::Zero(n, m);
      }
    }
    else
    {
      const bool bil = f.kind == 'N';
      Index cols = bil ? m : 1;
      for (int j = 0; j < k; j++)
      {
        cols *= m;
      }
      Y = MatrixXcd::Zero(n, cols);
      if (d.active())
      {
        dY = MatrixXcd::Zero(n, cols);
      }
      std::vector<VectorXcd> fac(bil ? k + 1 : k);
      const int off = bil ? 1 : 0;
      for (Index c = 0; c < cols; c++)
      {
        Index rem = c;
        // fac in Kronecker order: [e_u,] X_k col, ..., X_1 col
        for (int j = 1; j <= k; j++)
        {
          fac[off + k - j] = X[j - 1].col(rem % m);
          rem /= m;
        }
        if (bil)
        {
          fac[0] = VectorXcd::Zero(m);
          fac[0](rem) = 1.0;
        }
        for (const TensorTerm *T : terms)
        {
          Y.col(c) += apply_term(*T, fac, p);
          if (!d.active())
          {
            continue;
          }
          for (int j = 1; j <= k; j++)
          {
            if (!affects(j))
            {
              continue;
            }
            VectorXcd keep = fac[off + k - j];
            Index rj = c;
            for (int t = 1; t < j; t++)
            {
              rj /= m;
            }
            fac[off + k - j] = dX[j - 1].col(rj % m);
            dY.col(c) += apply_term(*T, fac, p);
            fac[off + k - j] = keep;
          }
          if (d.param >= 0)
          {
            dY.col(c) += apply_term(*T, fac, p, d.param);
          }
        }
      }
    }

    MatrixXcd Z = solve(so, p, Y);
    MatrixXcd Co = output(so, p);
    if (!d.active())
    {
      return Co * Z;
    }
    MatrixXcd rhs = dY;
    if (affects(nargs))
    {
      rhs -= sys_.op.apply(sys_.op.derivative_coefficients(var, so, p), Z);
    }
    MatrixXcd dZ = solve(so, p, rhs);
    MatrixXcd dF = Co * dZ;
    if (affects(nargs))
    {
      dF += sys_.C.eval_derivative(var, p, so) * Z;
    }
    return dF;
  }

  MatrixXcd tf_linear(Complex s, std::span<const double> p) const
  {
    return eval({'L', 0}, std::span<const Complex>(&s, 1), p);
  }
  MatrixXcd tf_poly(int xi, std::span<const Complex> s, std::span<const double> p) const
  {
    return eval({'H', xi}, s, p);
  }
  MatrixXcd tf_bilin(int eta, std::span<const Complex> s, std::span<const double> p) const
  {
    return eval({'N', eta}, s, p);
  }
  MatrixXcd dtf(const Family &f, int j, std::span<const Complex> s, std::span<const double> p) const
  {
    return eval(f, s, p, Deriv::ds(j));
  }
  std::vector<MatrixXcd> grad_p_tf(const Family &f, std::span<const Complex> s,
                                   std::span<const double> p) const
  {
    std::vector<MatrixXcd> g;
    for (int k = 0; k < sys_.q; k++)
    {
      g.push_back(eval(f, s, p, Deriv::dp(k)));
    }
    return g;
  }
};

}  // namespace strmor

#endif  // STRMOR_TRANSFER_HPP
