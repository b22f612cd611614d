// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_COMMON_HPP
#define STRMOR_COMMON_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <complex>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace strmor
{

using Index = Eigen::Index;
using Complex = std::complex<double>;

using VectorXd = Eigen::VectorXd;
using VectorXcd = Eigen::VectorXcd;
using MatrixXd = Eigen::MatrixXd;
using MatrixXcd = Eigen::MatrixXcd;
using SparseMatrixXd = Eigen::SparseMatrix<double>;
using SparseMatrixXcd = Eigen::SparseMatrix<Complex>;

inline constexpr double machine_eps = std::numeric_limits<double>::epsilon();

//
// Error hierarchy. Everything thrown by the library derives from strmor::Error so callers
// (the CLI in particular) can map failures onto exit codes.
//
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, inconsistent dimensions, wrong arity, bad flags.
class ValidationError : public Error
{
public:
  using Error::Error;
};

class ParseError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

// Numerical failures: singular pencils, non-finite values, diverging simulations.
class NumericalError : public Error
{
public:
  using Error::Error;
};

class SingularPencilError : public NumericalError
{
public:
  SingularPencilError(const std::string &what, Complex s, std::vector<double> p)
    : NumericalError(what), s_(s), p_(std::move(p))
  {
  }
  Complex s() const { return s_; }
  const std::vector<double> &p() const { return p_; }

private:
  Complex s_;
  std::vector<double> p_;
};

// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_complex(Complex z)
{
  return "(" + format_double(z.real()) + (z.imag() < 0 ? "-" : "+") +
         format_double(std::abs(z.imag())) + "i)";
}

inline std::string format_point(Complex s, const std::vector<double> &p)
{
  std::string out = "s=" + format_complex(s);
  if (!p.empty())
  {
    out += " p=[";
    for (std::size_t i = 0; i < p.size(); i++)
    {
      out += (i ? "," : "") + format_double(p[i]);
    }
    out += "]";
  }
  return out;
}

inline std::vector<double> to_std(const VectorXd &v)
{
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Warnings go to stderr unless STRMOR_QUIET is set.
inline void warn(const std::string &msg)
{
  static const bool quiet = std::getenv("STRMOR_QUIET") != nullptr;
  if (!quiet)
  {
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    std::cerr << "strmor: warning: " << msg << "\n";
  }
}

// Worker count, bounded by STRMOR_THREADS when set.
inline unsigned worker_count()
{
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("STRMOR_THREADS"))
  {
    unsigned v = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (ec == std::errc() && v > 0)
    {
      return v;
    }
  }
  return hw;
}

// Runs body(i) for i in [0, count). Work is distributed dynamically, results must be
// written to per-index slots so the outcome does not depend on scheduling. The first
// exception thrown by any worker is rethrown on the calling thread.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)> &body)
{
  unsigned workers = std::min<std::size_t>(worker_count(), count);
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < count; i++)
    {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mtx;
  auto run = [&]()
  {
    for (std::size_t i = next++; i < count; i = next++)
    {
      try
      {
        body(i);
      }
      catch (...)
      {
        std::lock_guard<std::mutex> lock(failure_mtx);
        if (!failure)
        {
          failure = std::current_exception();
        }
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; w++)
  {
    pool.emplace_back(run);
  }
  run();
  for (auto &t : pool)
  {
    t.join();
  }
  if (failure)
  {
    std::rethrow_exception(failure);
  }
}

}  // namespace strmor

#endif  // STRMOR_COMMON_HPP
