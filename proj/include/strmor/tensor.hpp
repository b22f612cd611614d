// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_TENSOR_HPP
#define STRMOR_TENSOR_HPP

#include <algorithm>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include "common.hpp"

namespace strmor
{

class DimensionError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

//
// Column index of a multi-index with the first digit varying fastest. Digits are 0-based here;
// in 1-based terms this is omega = i_1 + sum_l (i_l - 1) prod_{j<l} n_j.
//
inline Index col_index(std::span<const Index> digits, std::span<const Index> radices)
{
  if (digits.size() != radices.size())
  {
    throw DimensionError("multi-index length does not match the number of modes");
  }
  Index col = 0, stride = 1;
  for (std::size_t l = 0; l < digits.size(); l++)
  {
    if (digits[l] < 0 || digits[l] >= radices[l])
    {
      throw DimensionError("multi-index digit out of range");
    }
    col += digits[l] * stride;
    stride *= radices[l];
  }
  return col;
}

inline std::vector<Index> decode(Index col, std::span<const Index> radices)
{
  Index total = 1;
  for (Index r : radices)
  {
    total *= r;
  }
  if (col < 0 || col >= total)
  {
    throw DimensionError("column index " + std::to_string(col) + " out of range [0, " +
                         std::to_string(total) + ")");
  }
  std::vector<Index> digits(radices.size());
  for (std::size_t l = 0; l < radices.size(); l++)
  {
    digits[l] = col % radices[l];
    col /= radices[l];
  }
  return digits;
}

// Number of distinct permutations of a digit multiset.
inline double multinomial(std::vector<Index> digits)
{
  std::sort(digits.begin(), digits.end());
  double num = 1.0;
  for (std::size_t i = 2; i <= digits.size(); i++)
  {
    num *= static_cast<double>(i);
  }
  std::size_t run = 1;
  for (std::size_t i = 1; i <= digits.size(); i++)
  {
    if (i < digits.size() && digits[i] == digits[i - 1])
    {
      run++;
      continue;
    }
    for (std::size_t j = 2; j <= run; j++)
    {
      num /= static_cast<double>(j);
    }
    run = 1;
  }
  return num;
}

//
// Sparse matricization of a tensor with one row mode and k column modes. Column digits are listed
// fastest first, so for v_1 (x) ... (x) v_k (Kronecker order, v_1 slowest) digit l pairs with
// v_{k-l}. Entries are stored sorted by (row, col) with duplicates summed.
//
class SparseUnfolding
{
public:
  struct Entry
  {
    Index row;
    Index col;
    double value;
  };

private:
  Index rows_ = 0;
  std::vector<Index> radices_;
  std::vector<Entry> entries_;
  std::vector<Index> digits_;  // nnz x k, row-major

  void finalize(bool drop_zeros)
  {
    std::sort(entries_.begin(), entries_.end(), [](const Entry &a, const Entry &b)
              { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
    std::vector<Entry> merged;
    merged.reserve(entries_.size());
    for (const auto &e : entries_)
    {
      if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col)
      {
        merged.back().value += e.value;
      }
      else
      {
        merged.push_back(e);
      }
    }
    if (drop_zeros)
    {
      std::erase_if(merged, [](const Entry &e) { return e.value == 0.0; });
    }
    entries_ = std::move(merged);
    const std::size_t k = radices_.size();
    digits_.assign(entries_.size() * k, 0);
    for (std::size_t e = 0; e < entries_.size(); e++)
    {
      Index c = entries_[e].col;
      for (std::size_t l = 0; l < k; l++)
      {
        digits_[e * k + l] = c % radices_[l];
        c /= radices_[l];
      }
    }
  }

public:
  SparseUnfolding() = default;

  SparseUnfolding(Index rows, std::vector<Index> radices, std::vector<Entry> entries,
                  bool drop_zeros = true)
    : rows_(rows), radices_(std::move(radices)), entries_(std::move(entries))
  {
    if (rows_ <= 0 || radices_.empty())
    {
      throw DimensionError("unfolding needs at least one row and one column mode");
    }
    const Index ncols = cols();
    for (const auto &e : entries_)
    {
      if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= ncols)
      {
        throw DimensionError("unfolding entry (" + std::to_string(e.row) + ", " +
                             std::to_string(e.col) + ") out of range");
      }
      if (!std::isfinite(e.value))
      {
        throw ValidationError("non-finite unfolding entry");
      }
    }
    finalize(drop_zeros);
  }

  static SparseUnfolding from_dense(const MatrixXd &M, std::vector<Index> radices)
  {
    std::vector<Entry> entries;
    for (Index j = 0; j < M.cols(); j++)
    {
      for (Index i = 0; i < M.rows(); i++)
      {
        if (M(i, j) != 0.0)
        {
          entries.push_back({i, j, M(i, j)});
        }
      }
    }
    SparseUnfolding U(M.rows(), std::move(radices), std::move(entries));
    if (U.cols() != M.cols())
    {
      throw DimensionError("dense unfolding column count does not match the mode sizes");
    }
    return U;
  }

  Index rows() const { return rows_; }
  Index cols() const
  {
    Index c = 1;
    for (Index r : radices_)
    {
      c *= r;
    }
    return c;
  }
  const std::vector<Index> &radices() const { return radices_; }
  std::size_t num_modes() const { return radices_.size(); }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<Entry> &entries() const { return entries_; }
  const Index *digits(std::size_t e) const { return digits_.data() + e * radices_.size(); }

  MatrixXd to_dense() const
  {
    MatrixXd M = MatrixXd::Zero(rows_, cols());
    for (const auto &e : entries_)
    {
      M(e.row, e.col) = e.value;
    }
    return M;
  }

  SparseMatrixXd to_sparse() const
  {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(entries_.size());
    for (const auto &e : entries_)
    {
      t.emplace_back(e.row, e.col, e.value);
    }
    SparseMatrixXd S(rows_, cols());
    S.setFromTriplets(t.begin(), t.end());
    return S;
  }

  SparseUnfolding scaled(double a) const
  {
    std::vector<Entry> e = entries_;
    for (auto &x : e)
    {
      x.value *= a;
    }
    return SparseUnfolding(rows_, radices_, std::move(e), false);
  }

  // Y = X_(1) (v_1 (x) ... (x) v_k), factors given in Kronecker order.
  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1>
  apply(std::span<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> factors) const
  {
    const std::size_t k = radices_.size();
    if (factors.size() != k)
    {
      throw DimensionError("unfolding expects " + std::to_string(k) + " factors, got " +
                           std::to_string(factors.size()));
    }
    for (std::size_t l = 0; l < k; l++)
    {
      if (factors[k - 1 - l].size() != radices_[l])
      {
        throw DimensionError("factor length does not match its mode size");
      }
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y =
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(rows_);
    for (std::size_t e = 0; e < entries_.size(); e++)
    {
      const Index *d = digits(e);
      Scalar acc = entries_[e].value;
      for (std::size_t l = 0; l < k; l++)
      {
        acc *= factors[k - 1 - l](d[l]);
      }
      y(entries_[e].row) += acc;
    }
    return y;
  }

  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1>
  apply(const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> &factors) const
  {
    return apply<Scalar>(std::span<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(factors));
  }

  // y += scale X_(1) (u (x) x (x) ... (x) x) without building the factor list; u may be null
  // when every mode takes x.
  template <typename Derived>
  void apply_state(const Eigen::MatrixBase<Derived> &x, const VectorXd *u, VectorXd &y,
                   double scale = 1.0) const
  {
    const std::size_t k = radices_.size();
    const std::size_t ks = u ? k - 1 : k;
    for (std::size_t e = 0; e < entries_.size(); e++)
    {
      const Index *d = digits(e);
      double acc = scale * entries_[e].value;
      for (std::size_t l = 0; l < ks; l++)
      {
        acc *= x(d[l]);
      }
      if (u)
      {
        acc *= (*u)(d[k - 1]);
      }
      y(entries_[e].row) += acc;
    }
  }

  //
  // Mode-m matricization (m = 1 is the row mode, m = l + 1 is column digit l). Remaining modes
  // keep increasing order with the lowest mode fastest.
  //
  SparseUnfolding mode_matricization(std::size_t m) const
  {
    const std::size_t k = radices_.size();
    if (m < 1 || m > k + 1)
    {
      throw DimensionError("matricization mode out of range");
    }
    if (m == 1)
    {
      return *this;
    }
    std::vector<Index> mode_size(k + 1);
    mode_size[0] = rows_;
    std::copy(radices_.begin(), radices_.end(), mode_size.begin() + 1);
    std::vector<Index> new_radices;
    for (std::size_t j = 0; j <= k; j++)
    {
      if (j != m - 1)
      {
        new_radices.push_back(mode_size[j]);
      }
    }
    std::vector<Entry> out;
    out.reserve(entries_.size());
    std::vector<Index> idx(k + 1), rest(k);
    for (std::size_t e = 0; e < entries_.size(); e++)
    {
      idx[0] = entries_[e].row;
      std::copy(digits(e), digits(e) + k, idx.begin() + 1);
      std::size_t t = 0;
      for (std::size_t j = 0; j <= k; j++)
      {
        if (j != m - 1)
        {
          rest[t++] = idx[j];
        }
      }
      out.push_back({idx[m - 1], col_index(rest, new_radices), entries_[e].value});
    }
    return SparseUnfolding(mode_size[m - 1], std::move(new_radices), std::move(out), false);
  }

  //
  // Symmetrize over the first `count` column digits: every column receives the average of the
  // distinct permutations of its first `count` digits. Orbits that are already constant are
  // copied unchanged so the operation is exactly idempotent.
  //
  SparseUnfolding symmetrize(std::size_t count) const
  {
    const std::size_t k = radices_.size();
    if (count > k)
    {
      throw DimensionError("cannot symmetrize more modes than the unfolding has");
    }
    for (std::size_t l = 1; l < count; l++)
    {
      if (radices_[l] != radices_[0])
      {
        throw DimensionError("symmetrized modes must share one size");
      }
    }
    if (count <= 1)
    {
      return *this;
    }
    struct Item
    {
      Index row;
      std::vector<Index> key;  // sorted symmetric digits then the remaining digits
      Index col;
      double value;
    };
    std::vector<Item> items;
    items.reserve(entries_.size());
    for (std::size_t e = 0; e < entries_.size(); e++)
    {
      const Index *d = digits(e);
      std::vector<Index> key(d, d + k);
      std::sort(key.begin(), key.begin() + count);
      items.push_back({entries_[e].row, std::move(key), entries_[e].col, entries_[e].value});
    }
    std::sort(items.begin(), items.end(), [](const Item &a, const Item &b)
              { return std::tie(a.row, a.key, a.col) < std::tie(b.row, b.key, b.col); });

    std::vector<Entry> out;
    out.reserve(entries_.size());
    std::size_t i = 0;
    while (i < items.size())
    {
      std::size_t j = i;
      double total = 0.0;
      bool uniform = true;
      while (j < items.size() && items[j].row == items[i].row && items[j].key == items[i].key)
      {
        total += items[j].value;
        uniform = uniform && items[j].value == items[i].value;
        j++;
      }
      std::vector<Index> sym(items[i].key.begin(), items[i].key.begin() + count);
      const double alpha = multinomial(sym);
      if (uniform && static_cast<double>(j - i) == alpha)
      {
        for (std::size_t t = i; t < j; t++)
        {
          out.push_back({items[t].row, items[t].col, items[t].value});
        }
      }
      else
      {
        const double v = total / alpha;
        std::vector<Index> digits_full = items[i].key;
        do
        {
          std::copy(sym.begin(), sym.end(), digits_full.begin());
          out.push_back({items[i].row, col_index(digits_full, radices_), v});
        } while (std::next_permutation(sym.begin(), sym.end()));
      }
      i = j;
    }
    return SparseUnfolding(rows_, radices_, std::move(out));
  }

  // True when entries are invariant under permutations of the first `count` digits.
  bool is_symmetric(std::size_t count, double rtol = 0.0) const
  {
    if (count <= 1)
    {
      return true;
    }
    const std::size_t k = radices_.size();
    double scale = 0.0;
    for (const auto &e : entries_)
    {
      scale = std::max(scale, std::abs(e.value));
    }
    auto lookup = [this](Index row, Index col)
    {
      auto it = std::lower_bound(entries_.begin(), entries_.end(), Entry{row, col, 0.0},
                                 [](const Entry &a, const Entry &b)
                                 { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
      return (it != entries_.end() && it->row == row && it->col == col) ? it->value : 0.0;
    };
    for (std::size_t e = 0; e < entries_.size(); e++)
    {
      std::vector<Index> d(digits(e), digits(e) + k);
      std::vector<Index> sym(d.begin(), d.begin() + count);
      std::sort(sym.begin(), sym.end());
      do
      {
        std::copy(sym.begin(), sym.end(), d.begin());
        if (std::abs(lookup(entries_[e].row, col_index(d, radices_)) - entries_[e].value) >
            rtol * scale)
        {
          return false;
        }
      } while (std::next_permutation(sym.begin(), sym.end()));
    }
    return true;
  }

  //
  // R = L^T X_(1) (U_1 (x) ... (x) U_k)-style contraction. per_digit[l] multiplies column digit l
  // (n_l x r_l); a null entry keeps that mode as is. L (rows x r0) contracts the row mode. The
  // result is dense r0 x prod r_l with the first digit fastest. Digits are contracted from the
  // slowest one down, so intermediates stay O(nnz * prod r).
  //
  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
  contract(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> &L,
           const std::vector<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> *>
               &per_digit) const
  {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const std::size_t k = radices_.size();
    if (per_digit.size() != k)
    {
      throw DimensionError("contraction needs one entry per column mode");
    }
    if (L.rows() != rows_)
    {
      throw DimensionError("row contraction matrix has the wrong number of rows");
    }
    std::vector<Index> out_r(k);
    double total = static_cast<double>(L.cols());
    for (std::size_t l = 0; l < k; l++)
    {
      if (per_digit[l] && per_digit[l]->rows() != radices_[l])
      {
        throw DimensionError("mode contraction matrix has the wrong number of rows");
      }
      out_r[l] = per_digit[l] ? per_digit[l]->cols() : radices_[l];
      total *= static_cast<double>(out_r[l]);
    }
    if (total > 1e8)
    {
      throw DimensionError("reduced unfolding would exceed 1e8 entries");
    }

    // Groups keyed by (row, digits not yet contracted); payload over contracted digits.
    struct Group
    {
      Index row;
      std::vector<Index> prefix;
      std::vector<Scalar> vec;
    };
    std::vector<Group> groups;
    groups.reserve(entries_.size());
    for (std::size_t e = 0; e < entries_.size(); e++)
    {
      groups.push_back({entries_[e].row, std::vector<Index>(digits(e), digits(e) + k),
                        std::vector<Scalar>{Scalar(entries_[e].value)}});
    }
    std::size_t block = 1;
    for (std::size_t t = k; t-- > 0;)
    {
      const Index rt = out_r[t];
      std::vector<Group> next;
      // Entries are processed in an order where equal keys are adjacent.
      std::sort(groups.begin(), groups.end(), [t](const Group &a, const Group &b)
                {
                  if (a.row != b.row)
                  {
                    return a.row < b.row;
                  }
                  return std::lexicographical_compare(a.prefix.begin(), a.prefix.begin() + t,
                                                      b.prefix.begin(), b.prefix.begin() + t);
                });
      for (std::size_t g = 0; g < groups.size(); g++)
      {
        const Group &G = groups[g];
        bool same = !next.empty() && next.back().row == G.row &&
                    std::equal(G.prefix.begin(), G.prefix.begin() + t, next.back().prefix.begin());
        if (!same)
        {
          next.push_back({G.row, std::vector<Index>(G.prefix.begin(), G.prefix.begin() + t),
                          std::vector<Scalar>(block * rt, Scalar(0))});
        }
        auto &dst = next.back().vec;
        const Index dt = G.prefix[t];
        for (std::size_t b = 0; b < block; b++)
        {
          const Scalar v = G.vec[b];
          if (v == Scalar(0))
          {
            continue;
          }
          if (per_digit[t])
          {
            const Mat &U = *per_digit[t];
            for (Index j = 0; j < rt; j++)
            {
              dst[j + rt * b] += U(dt, j) * v;
            }
          }
          else
          {
            dst[dt + rt * b] += v;
          }
        }
      }
      groups = std::move(next);
      block *= rt;
    }
    Mat R = Mat::Zero(L.cols(), static_cast<Index>(block));
    for (const auto &G : groups)
    {
      Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> v(G.vec.data(),
                                                                   static_cast<Index>(block));
      R.noalias() += L.row(G.row).transpose() * v;
    }
    return R;
  }
};

}  // namespace strmor

#endif  // STRMOR_TENSOR_HPP
