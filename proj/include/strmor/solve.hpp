// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_SOLVE_HPP
#define STRMOR_SOLVE_HPP

#include <list>
#include <map>
#include <memory>
#include <mutex>

#include <Eigen/SparseLU>

#include "common.hpp"
#include "model.hpp"

namespace strmor
{

class SolveError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

//
// LU factorization of K(s, p). Dense partial pivoting below StructuredOperator::dense_threshold,
// sparse LU above. One factorization serves both K X = R and K^T X = R.
//
class Factorization
{
  Complex s_;
  std::vector<double> p_;
  Index n_;
  bool dense_;
  MatrixXcd Kd_;
  SparseMatrixXcd Ks_;
  Eigen::PartialPivLU<MatrixXcd> dlu_;
  mutable Eigen::SparseLU<SparseMatrixXcd, Eigen::COLAMDOrdering<int>> slu_;  // transpose() is non-const
  double cond_ = 0.0;
  double knorm_ = 0.0;

  MatrixXcd raw_solve(const MatrixXcd &R, bool transpose) const
  {
    if (dense_)
    {
      return transpose ? MatrixXcd(dlu_.transpose().solve(R)) : MatrixXcd(dlu_.solve(R));
    }
    return transpose ? MatrixXcd(slu_.transpose().solve(R)) : MatrixXcd(slu_.solve(R));
  }

  MatrixXcd multiply(const MatrixXcd &X, bool transpose) const
  {
    if (dense_)
    {
      return transpose ? MatrixXcd(Kd_.transpose() * X) : MatrixXcd(Kd_ * X);
    }
    return transpose ? MatrixXcd(Ks_.transpose() * X) : MatrixXcd(Ks_ * X);
  }

  [[noreturn]] void singular(const std::string &why) const
  {
    throw SingularPencilError("K(s,p) is singular or ill-conditioned at " + format_point(s_, p_) +
                                  " (" + why + ")",
                              s_, p_);
  }

  // Hager/Higham estimate of ||K^{-1}||_1.
  double inverse_norm1_estimate() const
  {
    const Index n = n_;
    if (n == 1)
    {
      return std::abs(raw_solve(MatrixXcd::Ones(1, 1), false)(0, 0));
    }
    auto sgn = [](const VectorXcd &y)
    {
      VectorXcd z(y.size());
      for (Index i = 0; i < y.size(); i++)
      {
        double a = std::abs(y(i));
        z(i) = a == 0.0 ? Complex(1.0, 0.0) : y(i) / a;
      }
      return z;
    };
    // K^{-H} x = conj(K^{-T} conj(x)).
    auto solve_h = [this](const VectorXcd &x)
    { return VectorXcd(raw_solve(x.conjugate(), true).conjugate()); };

    VectorXcd x = VectorXcd::Constant(n, Complex(1.0 / n, 0.0));
    double est = 0.0;
    Index jlast = -1;
    for (int it = 0; it < 5; it++)
    {
      VectorXcd y = raw_solve(x, false);
      double e = y.cwiseAbs().sum();
      if (it > 0 && e <= est)
      {
        break;
      }
      est = e;
      VectorXcd z = solve_h(sgn(y));
      Index j;
      z.cwiseAbs().maxCoeff(&j);
      if (j == jlast)
      {
        break;
      }
      jlast = j;
      x.setZero();
      x(j) = 1.0;
    }
    VectorXcd alt(n);
    for (Index i = 0; i < n; i++)
    {
      alt(i) = (i % 2 ? -1.0 : 1.0) * (1.0 + static_cast<double>(i) / (n - 1));
    }
    double e2 = 2.0 * raw_solve(alt, false).cwiseAbs().sum() / (3.0 * n);
    return std::max(est, e2);
  }

public:
  Factorization(const StructuredOperator &op, Complex s, std::span<const double> p)
    : s_(s), p_(p.begin(), p.end()), n_(op.n()), dense_(op.n() < StructuredOperator::dense_threshold)
  {
    std::vector<Complex> c = op.coefficients(s, p);
    if (dense_)
    {
      Kd_ = op.combine_dense(c);
      dlu_.compute(Kd_);
      const MatrixXcd &LU = dlu_.matrixLU();
      for (Index i = 0; i < n_; i++)
      {
        if (LU(i, i) == Complex(0.0, 0.0) || !std::isfinite(std::abs(LU(i, i))))
        {
          singular("zero pivot");
        }
      }
    }
    else
    {
      Ks_ = op.combine_sparse(c);
      slu_.analyzePattern(Ks_);
      slu_.factorize(Ks_);
      if (slu_.info() != Eigen::Success)
      {
        singular("sparse LU failed: " + slu_.lastErrorMessage());
      }
    }
    const double knorm = op.structured_norm(c);
    const double inv = inverse_norm1_estimate();
    knorm_ = knorm;
    cond_ = knorm * inv;
    if (!std::isfinite(cond_) || cond_ > 1.0 / (100.0 * machine_eps))
    {
      singular("condition estimate " + format_double(cond_));
    }
  }

  Complex s() const { return s_; }
  const std::vector<double> &p() const { return p_; }
  double condition_estimate() const { return cond_; }

  // Solves K X = R (or K^T X = R), enforcing a relative residual of 1e-10 with up to three
  // refinement steps. For stiff operators the residual floor is eps*||K||*||X||, so a solve whose
  // normwise backward error is below 1e-13 is also accepted.
  MatrixXcd solve(const MatrixXcd &R, bool transpose = false) const
  {
    if (R.rows() != n_)
    {
      throw DimensionError("right-hand side has " + std::to_string(R.rows()) + " rows, expected " +
                           std::to_string(n_));
    }
    MatrixXcd X = raw_solve(R, transpose);
    const double rnorm = R.norm();
    if (rnorm == 0.0)
    {
      return X;
    }
    MatrixXcd res = R - multiply(X, transpose);
    double rel = res.norm() / rnorm;
    for (int it = 0; it < 3 && !(rel <= 1e-10); it++)
    {
      MatrixXcd Xn = X + raw_solve(res, transpose);
      MatrixXcd rn = R - multiply(Xn, transpose);
      const double reln = rn.norm() / rnorm;
      if (!(reln < rel))
      {
        break;
      }
      X = std::move(Xn);
      res = std::move(rn);
      rel = reln;
    }
    if (!(rel <= 1e-10))
    {
      const double backward = res.norm() / (knorm_ * X.norm() + rnorm);
      if (!(backward <= 1e-13))
      {
        throw SolveError("solve residual " + format_double(rel) + " exceeds 1e-10 at " +
                         format_point(s_, p_));
      }
    }
    return X;
  }
};

//
// Thread-safe LRU cache of factorizations of one operator, keyed by (s, p).
//
class SolveCache
{
  using Key = std::pair<std::pair<double, double>, std::vector<double>>;

  const StructuredOperator *op_;
  std::size_t capacity_;
  bool enabled_;
  mutable std::mutex mtx_;
  mutable std::list<std::pair<Key, std::shared_ptr<const Factorization>>> lru_;
  mutable std::map<Key, decltype(lru_)::iterator> index_;
  mutable std::size_t hits_ = 0, misses_ = 0;

public:
  explicit SolveCache(const StructuredOperator &op, std::size_t capacity = 256, bool enabled = true)
    : op_(&op), capacity_(std::max<std::size_t>(capacity, 1)), enabled_(enabled)
  {
  }

  SolveCache(const SolveCache &) = delete;
  SolveCache &operator=(const SolveCache &) = delete;

  const StructuredOperator &op() const { return *op_; }

  std::shared_ptr<const Factorization> get(Complex s, std::span<const double> p) const
  {
    if (!enabled_)
    {
      std::lock_guard<std::mutex> lock(mtx_);
      misses_++;
    }
    if (!enabled_)
    {
      return std::make_shared<const Factorization>(*op_, s, p);
    }
    Key key{{s.real(), s.imag()}, std::vector<double>(p.begin(), p.end())};
    {
      std::lock_guard<std::mutex> lock(mtx_);
      auto it = index_.find(key);
      if (it != index_.end())
      {
        hits_++;
        lru_.splice(lru_.begin(), lru_, it->second);
        return it->second->second;
      }
      misses_++;
    }
    // Factor outside the lock; a concurrent duplicate computes the same result.
    auto f = std::make_shared<const Factorization>(*op_, s, p);
    std::lock_guard<std::mutex> lock(mtx_);
    if (index_.find(key) == index_.end())
    {
      lru_.emplace_front(key, f);
      index_[key] = lru_.begin();
      while (lru_.size() > capacity_)
      {
        index_.erase(lru_.back().first);
        lru_.pop_back();
      }
    }
    return f;
  }

  MatrixXcd solve(Complex s, std::span<const double> p, const MatrixXcd &R,
                  bool transpose = false) const
  {
    return get(s, p)->solve(R, transpose);
  }

  std::size_t hits() const
  {
    std::lock_guard<std::mutex> lock(mtx_);
    return hits_;
  }
  std::size_t misses() const
  {
    std::lock_guard<std::mutex> lock(mtx_);
    return misses_;
  }
  std::size_t size() const
  {
    std::lock_guard<std::mutex> lock(mtx_);
    return lru_.size();
  }
};

}  // namespace strmor

#endif  // STRMOR_SOLVE_HPP
