// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_MODEL_HPP
#define STRMOR_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "expr.hpp"
#include "tensor.hpp"

namespace strmor
{

//
// Affine matrix family M(p[, s]) = sum_i coeff_i(p[, s]) M_i with constant real M_i.
//
class ParamMatrix
{
public:
  struct Term
  {
    ScalarExpr coeff;
    MatrixXd mat;
  };

private:
  Index rows_ = 0, cols_ = 0;
  std::vector<Term> terms_;

public:
  ParamMatrix() = default;

  ParamMatrix(std::vector<Term> terms) : terms_(std::move(terms))
  {
    if (terms_.empty())
    {
      throw ValidationError("parametric matrix needs at least one term");
    }
    rows_ = terms_[0].mat.rows();
    cols_ = terms_[0].mat.cols();
    for (const auto &t : terms_)
    {
      if (t.mat.rows() != rows_ || t.mat.cols() != cols_)
      {
        throw DimensionError("parametric matrix terms have different shapes");
      }
      if (!t.mat.allFinite())
      {
        throw ValidationError("non-finite entry in parametric matrix term");
      }
    }
  }

  static ParamMatrix constant(const MatrixXd &M)
  {
    return ParamMatrix({{ScalarExpr::constant(1.0), M}});
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::vector<Term> &terms() const { return terms_; }

  bool freq_dependent() const
  {
    for (const auto &t : terms_)
    {
      if (t.coeff.depends_on_s())
      {
        return true;
      }
    }
    return false;
  }

  int arity() const
  {
    int a = 0;
    for (const auto &t : terms_)
    {
      a = std::max(a, t.coeff.arity());
    }
    return a;
  }

  MatrixXcd eval(std::span<const double> p, std::optional<Complex> s = std::nullopt) const
  {
    if (freq_dependent() && !s)
    {
      throw ValidationError("frequency-dependent matrix evaluated without s");
    }
    const Complex sv = s.value_or(Complex(0.0, 0.0));
    MatrixXcd M = MatrixXcd::Zero(rows_, cols_);
    for (const auto &t : terms_)
    {
      M += t.coeff(sv, p) * t.mat.cast<Complex>();
    }
    return M;
  }

  MatrixXd eval_real(std::span<const double> p) const
  {
    if (freq_dependent())
    {
      throw ValidationError("frequency-dependent matrix has no real value without s");
    }
    MatrixXd M = MatrixXd::Zero(rows_, cols_);
    for (const auto &t : terms_)
    {
      M += t.coeff(Complex(0.0, 0.0), p).real() * t.mat;
    }
    return M;
  }

  // d/ds (var < 0) or d/dp_var of the family, evaluated.
  MatrixXcd eval_derivative(int var, std::span<const double> p, Complex s) const
  {
    MatrixXcd M = MatrixXcd::Zero(rows_, cols_);
    for (const auto &t : terms_)
    {
      ScalarExpr d = t.coeff.diff(var);
      if (!d.is_zero())
      {
        M += d(s, p) * t.mat.cast<Complex>();
      }
    }
    return M;
  }
};

//
// K(s, p) = sum_i kappa_i(s, p) A_i over constant real n x n matrices.
//
class StructuredOperator
{
public:
  struct Term
  {
    ScalarExpr kappa;
    SparseMatrixXd A;
    double norm1 = 0.0;
  };

  // Below this size evaluation and factorization use dense storage.
  static constexpr Index dense_threshold = 64;

private:
  Index n_ = 0;
  std::vector<Term> terms_;

public:
  StructuredOperator() = default;

  StructuredOperator(std::vector<Term> terms) : terms_(std::move(terms))
  {
    if (terms_.empty())
    {
      throw ValidationError("structured operator needs at least one term");
    }
    n_ = terms_[0].A.rows();
    for (auto &t : terms_)
    {
      if (t.A.rows() != n_ || t.A.cols() != n_)
      {
        throw DimensionError("operator term matrices must all be n x n");
      }
      t.A.makeCompressed();
      double nrm = 0.0;
      for (Index j = 0; j < t.A.outerSize(); j++)
      {
        double col = 0.0;
        for (SparseMatrixXd::InnerIterator it(t.A, j); it; ++it)
        {
          if (!std::isfinite(it.value()))
          {
            throw ValidationError("non-finite entry in operator term");
          }
          col += std::abs(it.value());
        }
        nrm = std::max(nrm, col);
      }
      t.norm1 = nrm;
    }
  }

  Index n() const { return n_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<Term> &terms() const { return terms_; }

  int arity() const
  {
    int a = 0;
    for (const auto &t : terms_)
    {
      a = std::max(a, t.kappa.arity());
    }
    return a;
  }

  std::vector<Complex> coefficients(Complex s, std::span<const double> p) const
  {
    std::vector<Complex> c(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); i++)
    {
      c[i] = terms_[i].kappa(s, p);
    }
    return c;
  }

  std::vector<Complex> derivative_coefficients(int var, Complex s, std::span<const double> p) const
  {
    std::vector<Complex> c(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); i++)
    {
      ScalarExpr d = terms_[i].kappa.diff(var);
      c[i] = d.is_zero() ? Complex(0.0, 0.0) : d(s, p);
    }
    return c;
  }

  SparseMatrixXcd combine_sparse(const std::vector<Complex> &c) const
  {
    SparseMatrixXcd K(n_, n_);
    for (std::size_t i = 0; i < terms_.size(); i++)
    {
      if (c[i] != Complex(0.0, 0.0))
      {
        K += c[i] * terms_[i].A.cast<Complex>();
      }
    }
    K.makeCompressed();
    return K;
  }

  MatrixXcd combine_dense(const std::vector<Complex> &c) const
  {
    MatrixXcd K = MatrixXcd::Zero(n_, n_);
    for (std::size_t i = 0; i < terms_.size(); i++)
    {
      if (c[i] == Complex(0.0, 0.0))
      {
        continue;
      }
      for (Index j = 0; j < terms_[i].A.outerSize(); j++)
      {
        for (SparseMatrixXd::InnerIterator it(terms_[i].A, j); it; ++it)
        {
          K(it.row(), it.col()) += c[i] * it.value();
        }
      }
    }
    return K;
  }

  SparseMatrixXcd eval_sparse(Complex s, std::span<const double> p) const
  {
    return combine_sparse(coefficients(s, p));
  }
  MatrixXcd eval_dense(Complex s, std::span<const double> p) const
  {
    return combine_dense(coefficients(s, p));
  }

  // (sum_i c_i A_i) X without assembling the sum.
  MatrixXcd apply(const std::vector<Complex> &c, const MatrixXcd &X) const
  {
    MatrixXcd Y = MatrixXcd::Zero(n_, X.cols());
    for (std::size_t i = 0; i < terms_.size(); i++)
    {
      if (c[i] != Complex(0.0, 0.0))
      {
        Y += c[i] * (terms_[i].A.cast<Complex>() * X);
      }
    }
    return Y;
  }

  // Structured magnitude sum_i |c_i| ||A_i||_1, an upper bound for ||K||_1.
  double structured_norm(const std::vector<Complex> &c) const
  {
    double v = 0.0;
    for (std::size_t i = 0; i < terms_.size(); i++)
    {
      v += std::abs(c[i]) * terms_[i].norm1;
    }
    return v;
  }
};

//
// Polynomial H_xi (kind Poly) or bilinear N_eta (kind Bilin) term. Each affine piece holds the
// mode-1 unfolding; mode-2 is derived once at construction. Column modes of a bilinear term are
// eta state modes (fastest) followed by the input mode.
//
class TensorTerm
{
public:
  enum class Kind
  {
    Poly,
    Bilin
  };

  struct Piece
  {
    ScalarExpr coeff;
    SparseUnfolding mode1;
    SparseUnfolding mode2;
  };

private:
  Kind kind_ = Kind::Poly;
  int order_ = 0;
  Index n_ = 0, m_ = 1;
  std::vector<Piece> pieces_;

public:
  TensorTerm() = default;

  // Builds a term from mode-1 unfoldings. Unflagged pieces are symmetrized over the state modes,
  // flagged pieces are verified. `trusted` skips both (used for projected terms).
  TensorTerm(Kind kind, int order, Index n, Index m,
             std::vector<std::pair<ScalarExpr, SparseUnfolding>> pieces, bool symmetric,
             bool trusted = false)
    : kind_(kind), order_(order), n_(n), m_(kind == Kind::Poly ? 1 : m)
  {
    if (kind == Kind::Poly && order < 2)
    {
      throw ValidationError("polynomial term order must be at least 2");
    }
    if (kind == Kind::Bilin && order < 1)
    {
      throw ValidationError("bilinear term order must be at least 1");
    }
    if (pieces.empty())
    {
      throw ValidationError("tensor term needs at least one piece");
    }
    const std::vector<Index> rad = radices();
    for (auto &[coeff, U] : pieces)
    {
      if (coeff.depends_on_s())
      {
        throw ValidationError("tensor term coefficients may depend on p only");
      }
      if (U.rows() != n_ || U.radices() != rad)
      {
        throw DimensionError("tensor term unfolding has shape " + std::to_string(U.rows()) +
                             " x " + std::to_string(U.cols()) + ", expected " +
                             std::to_string(n_) + " x " + std::to_string(expected_cols()));
      }
      SparseUnfolding S = U;
      if (!trusted)
      {
        if (symmetric)
        {
          if (!U.is_symmetric(order_, 1e-12))
          {
            throw ValidationError("tensor term flagged symmetric fails the permutation test");
          }
        }
        else
        {
          S = U.symmetrize(order_);
        }
      }
      SparseUnfolding M2 = S.mode_matricization(2);
      pieces_.push_back({coeff, std::move(S), std::move(M2)});
    }
  }

  Kind kind() const { return kind_; }
  int order() const { return order_; }
  Index n() const { return n_; }
  Index m() const { return m_; }
  const std::vector<Piece> &pieces() const { return pieces_; }
  bool parametric() const
  {
    for (const auto &pc : pieces_)
    {
      if (pc.coeff.depends_on_p())
      {
        return true;
      }
    }
    return false;
  }

  std::vector<Index> radices() const
  {
    std::vector<Index> r(order_, n_);
    if (kind_ == Kind::Bilin)
    {
      r.push_back(m_);
    }
    return r;
  }
  Index expected_cols() const
  {
    Index c = kind_ == Kind::Bilin ? m_ : 1;
    for (int i = 0; i < order_; i++)
    {
      c *= n_;
    }
    return c;
  }

  int arity() const
  {
    int a = 0;
    for (const auto &pc : pieces_)
    {
      a = std::max(a, pc.coeff.arity());
    }
    return a;
  }

  std::string label() const
  {
    return (kind_ == Kind::Poly ? "H" : "N") + std::to_string(order_);
  }
};

//
// Polynomial structured system
//   (L x)(t) = sum_xi H_xi x^xi + sum_eta N_eta (u (x) x^eta) + B u,   y = C x.
//
struct System
{
  StructuredOperator op;
  ParamMatrix B;
  ParamMatrix C;
  std::vector<TensorTerm> poly;
  std::vector<TensorTerm> bilin;
  int d = 1;
  int q = 0;

  Index n() const { return op.n(); }
  Index m() const { return B.cols(); }
  Index p_out() const { return C.rows(); }

  void validate() const
  {
    const Index nn = n();
    if (nn <= 0)
    {
      throw DimensionError("system has no states");
    }
    if (B.rows() != nn)
    {
      throw DimensionError("input map has " + std::to_string(B.rows()) + " rows, expected " +
                           std::to_string(nn));
    }
    if (C.cols() != nn)
    {
      throw DimensionError("output map has " + std::to_string(C.cols()) + " columns, expected " +
                           std::to_string(nn));
    }
    if (d < 1)
    {
      throw ValidationError("degree must be at least 1");
    }
    int needed = std::max({op.arity(), B.arity(), C.arity()});
    for (const auto &h : poly)
    {
      if (h.kind() != TensorTerm::Kind::Poly || h.n() != nn)
      {
        throw DimensionError("polynomial term " + h.label() + " has inconsistent dimensions");
      }
      if (h.order() > d)
      {
        throw ValidationError("polynomial term " + h.label() + " exceeds the degree");
      }
      needed = std::max(needed, h.arity());
    }
    for (const auto &b : bilin)
    {
      if (b.kind() != TensorTerm::Kind::Bilin || b.n() != nn || b.m() != m())
      {
        throw DimensionError("bilinear term " + b.label() + " has inconsistent dimensions");
      }
      if (b.order() > std::max(d - 1, 1))
      {
        throw ValidationError("bilinear term " + b.label() + " exceeds the degree");
      }
      needed = std::max(needed, b.arity());
    }
    if (needed > q)
    {
      throw ArityError("coefficients reference " + std::to_string(needed) +
                       " parameter(s) but the system declares q = " + std::to_string(q));
    }
  }

  const TensorTerm *find_poly(int xi) const
  {
    for (const auto &h : poly)
    {
      if (h.order() == xi)
      {
        return &h;
      }
    }
    return nullptr;
  }
  const TensorTerm *find_bilin(int eta) const
  {
    for (const auto &b : bilin)
    {
      if (b.order() == eta)
      {
        return &b;
      }
    }
    return nullptr;
  }
};

// Transfer function family selector: L, N_eta or H_xi.
struct Family
{
  char kind = 'L';
  int order = 0;

  // Number of frequency arguments (order + 1; 1 for L).
  int num_args() const { return kind == 'L' ? 1 : order + 1; }

  std::string to_string() const { return kind == 'L' ? "L" : kind + std::to_string(order); }

  static Family parse(const std::string &s)
  {
    if (s == "L")
    {
      return {'L', 0};
    }
    if (s.size() >= 2 && (s[0] == 'N' || s[0] == 'H'))
    {
      int k = 0;
      auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), k);
      if (ec == std::errc() && ptr == s.data() + s.size() &&
          ((s[0] == 'N' && k >= 1) || (s[0] == 'H' && k >= 2)))
      {
        return {s[0], k};
      }
    }
    throw ParseError("unknown transfer function family '" + s + "'");
  }

  friend bool operator==(const Family &a, const Family &b)
  {
    return a.kind == b.kind && a.order == b.order;
  }
  // Canonical order: L, then N by order, then H by order.
  friend bool operator<(const Family &a, const Family &b)
  {
    auto rank = [](char k) { return k == 'L' ? 0 : (k == 'N' ? 1 : 2); };
    return std::make_pair(rank(a.kind), a.order) < std::make_pair(rank(b.kind), b.order);
  }
};

struct InterpEntry
{
  Complex sigma;
  Complex mu;
  std::vector<double> p;
  VectorXcd b;
  VectorXcd c;
};

struct InterpPlan
{
  std::vector<InterpEntry> entries;
  std::vector<Family> families;
  bool galerkin = false;
  bool hermite = false;

  // Families a system supports, in canonical order.
  static std::vector<Family> all_families(const System &sys)
  {
    std::vector<Family> f{{'L', 0}};
    for (const auto &b : sys.bilin)
    {
      f.push_back({'N', b.order()});
    }
    for (const auto &h : sys.poly)
    {
      f.push_back({'H', h.order()});
    }
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    return f;
  }

  void validate(const System &sys) const
  {
    if (entries.empty())
    {
      throw ValidationError("interpolation plan has no entries");
    }
    for (const auto &f : families)
    {
      if ((f.kind == 'N' && !sys.find_bilin(f.order)) || (f.kind == 'H' && !sys.find_poly(f.order)))
      {
        throw ValidationError("plan family " + f.to_string() + " has no matching system term");
      }
    }
    for (std::size_t i = 0; i < entries.size(); i++)
    {
      const auto &e = entries[i];
      const std::string where = "plan entry " + std::to_string(i);
      if (static_cast<int>(e.p.size()) != sys.q)
      {
        throw ArityError(where + " has " + std::to_string(e.p.size()) +
                         " parameter values, system expects " + std::to_string(sys.q));
      }
      if (e.b.size() != sys.m() || e.c.size() != sys.p_out())
      {
        throw DimensionError(where + " has tangential directions of the wrong length");
      }
      if (e.b.norm() == 0.0 || e.c.norm() == 0.0)
      {
        throw ValidationError(where + " has a zero tangential direction");
      }
      if (hermite && e.sigma != e.mu)
      {
        throw ValidationError(where + " violates the Hermite flag (sigma != mu)");
      }
    }
  }
};

struct Provenance
{
  std::string plan_hash;
  Index order = 0;
  Index rank_horizontal = 0;
  Index rank_vertical = 0;
  VectorXd sigma_horizontal;
  VectorXd sigma_vertical;
};

// Projected model: the reduced system shares every coefficient expression with the full one.
struct ReducedSystem
{
  System sys;
  MatrixXd V;
  MatrixXd W;
  Provenance provenance;
};

}  // namespace strmor

#endif  // STRMOR_MODEL_HPP
