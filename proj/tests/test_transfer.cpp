// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "strmor/bench.hpp"
#include "support.hpp"

using namespace strmor;
using strmor::testing::rel_err;
using strmor::detail::bilinear_unfolding;
using strmor::detail::gaussian;
using strmor::detail::speye;

namespace
{

// K(s) = s, B = C = 1.
System integrator()
{
  System sys;
  SparseMatrixXd one = MatrixXd::Ones(1, 1).sparseView();
  sys.op = StructuredOperator({{ScalarExpr::freq(), one}});
  sys.B = ParamMatrix::constant(MatrixXd::Ones(1, 1));
  sys.C = ParamMatrix::constant(MatrixXd::Ones(1, 1));
  sys.validate();
  return sys;
}

// Small first-order system with two bilinear inputs and hand-built N_1, N_2.
System bilinear_pair(std::vector<MatrixXd> &Ns, std::uint64_t seed)
{
  const Index n = 5, m = 2;
  std::mt19937_64 rng(seed);
  System sys;
  MatrixXd A = gaussian(n, n, rng, 0.3);
  A -= 3.0 * MatrixXd::Identity(n, n);
  SparseMatrixXd As = A.sparseView();
  sys.op = StructuredOperator({{ScalarExpr::freq(), speye(n)}, {ScalarExpr::constant(-1.0), As}});
  sys.B = ParamMatrix::constant(gaussian(n, m, rng));
  sys.C = ParamMatrix::constant(gaussian(2, n, rng));
  Ns = {gaussian(n, n, rng), gaussian(n, n, rng)};
  std::vector<SparseMatrixXd> sp{Ns[0].sparseView(), Ns[1].sparseView()};
  std::vector<std::pair<ScalarExpr, SparseUnfolding>> pc{{ScalarExpr::constant(1.0), bilinear_unfolding(n, sp)}};
  sys.bilin.emplace_back(TensorTerm::Kind::Bilin, 1, n, m, std::move(pc), true);
  sys.d = 1;
  sys.validate();
  return sys;
}

MatrixXcd dense_resolvent(const System &sys, Complex s, std::span<const double> p)
{
  return sys.op.eval_dense(s, p).inverse();
}

}  // namespace

// --- solve ----------------------------------------------------------------------------------------

TEST(Solve, ResidualOnLargeSparseOperator)
{
  System sys = gen_chafee(500);
  std::vector<double> p{1.0};
  Factorization F(sys.op, Complex(0.0, 3.0), p);
  MatrixXcd R = MatrixXcd::Random(500, 3);
  MatrixXcd X = F.solve(R);
  MatrixXcd K = sys.op.eval_dense(Complex(0.0, 3.0), p);
  EXPECT_LE((K * X - R).norm() / R.norm(), 1e-10);
  MatrixXcd Xt = F.solve(R, true);
  EXPECT_LE((K.transpose() * Xt - R).norm() / R.norm(), 1e-10);
}

TEST(Solve, SingularPencilIsReported)
{
  System sys = integrator();
  try
  {
    Factorization F(sys.op, Complex(0.0, 0.0), {});
    FAIL() << "expected SingularPencilError";
  }
  catch (const SingularPencilError &e)
  {
    EXPECT_EQ(e.s(), Complex(0.0, 0.0));
  }
  TransferEvaluator ev(sys);
  std::vector<Complex> s{Complex(0.0, 0.0)};
  EXPECT_THROW(ev.eval({'L', 0}, s, {}), SingularPencilError);
}

TEST(Solve, CacheReusesFactorizations)
{
  System sys = gen_random(RandomStructure::FirstOrder, 30, 2, 7);
  TransferEvaluator ev(sys);
  std::vector<Complex> s{Complex(0.5, 1.0)};
  MatrixXcd a = ev.eval({'L', 0}, s, {});
  const std::size_t misses = ev.cache().misses();
  MatrixXcd b = ev.eval({'L', 0}, s, {});
  EXPECT_EQ(ev.cache().misses(), misses);
  EXPECT_GE(ev.cache().hits(), 1u);
  EXPECT_EQ(a, b);

  TransferEvaluator cold(sys, false);
  EXPECT_LE(rel_err(a, cold.eval({'L', 0}, s, {})), 1e-15);
  EXPECT_EQ(cold.cache().hits(), 0u);
}

// --- transfer functions ---------------------------------------------------------------------------

TEST(Transfer, IntegratorOracle)
{
  System sys = integrator();
  TransferEvaluator ev(sys);
  std::vector<Complex> s{Complex(0.0, 2.0)};
  MatrixXcd F = ev.eval({'L', 0}, s, {});
  EXPECT_NEAR(F(0, 0).real(), 0.0, 1e-15);
  EXPECT_NEAR(F(0, 0).imag(), -0.5, 1e-15);
  MatrixXcd dF = ev.eval({'L', 0}, s, {}, Deriv::ds(1));
  EXPECT_NEAR(std::abs(dF(0, 0) - Complex(0.25, 0.0)), 0.0, 1e-15);
}

TEST(Transfer, ScalarSecondOrderOracle)
{
  SparseMatrixXd one = MatrixXd::Ones(1, 1).sparseView();
  System sys;
  sys.op = StructuredOperator({{ScalarExpr::parse("s^2"), one}, {ScalarExpr::freq(), one},
                               {ScalarExpr::constant(1.0), one}});
  sys.B = ParamMatrix::constant(MatrixXd::Ones(1, 1));
  sys.C = ParamMatrix::constant(MatrixXd::Ones(1, 1));
  TransferEvaluator ev(sys);
  std::vector<Complex> s{Complex(0.0, 1.0)};
  EXPECT_LE(std::abs(ev.eval({'L', 0}, s, {})(0, 0) - Complex(0.0, -1.0)), 1e-15);
}

TEST(Transfer, ChafeeMatchesDenseInverse)
{
  System sys = gen_chafee(500);
  std::vector<double> p{1.0};
  TransferEvaluator ev(sys);
  std::vector<Complex> s{Complex(1.0, 0.0)};
  MatrixXcd F = ev.eval({'L', 0}, s, p);
  MatrixXcd oracle = sys.C.eval(p, s[0]) * dense_resolvent(sys, s[0], p) * sys.B.eval(p, s[0]);
  EXPECT_TRUE(F.allFinite());
  EXPECT_LE(rel_err(oracle, F), 1e-10);
}

TEST(Transfer, ArityIsChecked)
{
  System sys = gen_random(RandomStructure::FirstOrder, 10, 3, 1);
  TransferEvaluator ev(sys);
  std::vector<Complex> two{1.0, 2.0};
  EXPECT_THROW(ev.eval({'L', 0}, two, {}), ArityError);
  EXPECT_THROW(ev.eval({'H', 3}, two, {}), ArityError);
}

TEST(Transfer, QuadraticKernelOracle)
{
  System sys = gen_random(RandomStructure::FirstOrder, 8, 2, 21);
  TransferEvaluator ev(sys);
  std::vector<Complex> s{Complex(0.3, 1.0), Complex(1.2, -0.4), Complex(0.8, 0.0)};
  MatrixXcd F = ev.eval({'H', 2}, s, {});

  MatrixXcd H = sys.find_poly(2)->pieces()[0].mode1.to_dense().cast<Complex>();
  const Complex coeff = sys.find_poly(2)->pieces()[0].coeff.eval(0.0);
  MatrixXcd B = sys.B.eval({}, 0.0);
  MatrixXcd v1 = dense_resolvent(sys, s[0], {}) * B;
  MatrixXcd v2 = dense_resolvent(sys, s[1], {}) * B;
  MatrixXcd oracle = sys.C.eval({}, 0.0) * dense_resolvent(sys, s[2], {}) * (coeff * H) *
                     strmor::testing::kron(v2, v1);
  EXPECT_LE(rel_err(oracle, F), 1e-12);
}

TEST(Transfer, BilinearColumnOrdering)
{
  std::vector<MatrixXd> Ns;
  System sys = bilinear_pair(Ns, 4);
  TransferEvaluator ev(sys);
  std::vector<Complex> s{Complex(0.2, 0.7), Complex(-0.1, 1.5)};
  MatrixXcd F = ev.eval({'N', 1}, s, {});
  ASSERT_EQ(F.cols(), 4);
  MatrixXcd B = sys.B.eval({}, 0.0), C = sys.C.eval({}, 0.0);
  MatrixXcd R1 = dense_resolvent(sys, s[0], {}), R2 = dense_resolvent(sys, s[1], {});
  for (Index i = 0; i < 2; i++)
  {
    for (Index k = 0; k < 2; k++)
    {
      VectorXcd col = C * R2 * Ns[i].cast<Complex>() * R1 * B.col(k);
      EXPECT_LE((F.col(k + 2 * i) - col).norm(), 1e-12 * col.norm()) << "input " << i << ", column " << k;
    }
  }
}

TEST(Transfer, DerivativesMatchFiniteDifferences)
{
  System sys = gen_delay_rod(20);
  TransferEvaluator ev(sys);
  std::vector<double> p{3.0};
  std::vector<Complex> s1{Complex(0.0, 2.0)};
  EXPECT_LE(strmor::testing::fd_check(ev, {'L', 0}, s1, p, 1), 1e-7);
  std::vector<Complex> s2{Complex(0.0, 1.0), Complex(0.0, 2.5)};
  EXPECT_LE(strmor::testing::fd_check(ev, {'N', 1}, s2, p, 1), 1e-7);
  EXPECT_LE(strmor::testing::fd_check(ev, {'N', 1}, s2, p, 2), 1e-7);

  const double h = 1e-5;
  std::vector<double> pp{3.0 + h}, pm{3.0 - h};
  MatrixXcd fd = (ev.eval({'L', 0}, s1, pp) - ev.eval({'L', 0}, s1, pm)) / (2.0 * h);
  EXPECT_LE(rel_err(ev.eval({'L', 0}, s1, p, Deriv::dp(0)), fd), 1e-7);
}

// --- bases ----------------------------------------------------------------------------------------

TEST(Basis, RealifySplitsComplexColumns)
{
  MatrixXcd Z(3, 2);
  Z << Complex(1, 2), 1.0, Complex(3, 0), 2.0, Complex(0, -1), 3.0;
  MatrixXd R = realify(Z);
  ASSERT_EQ(R.cols(), 3);
  EXPECT_EQ(R.leftCols(2), Z.real());
  EXPECT_EQ(R.col(2), Z.col(0).imag());
}

TEST(Basis, OrthDedupDropsDependentColumns)
{
  std::mt19937_64 rng(3);
  MatrixXd A = gaussian(20, 4, rng);
  MatrixXd M(20, 7);
  M << A, 2.0 * A.col(0), A.col(1) - A.col(2), 1e6 * A.col(3);
  MatrixXd Q = orth_dedup(M, 1e-10);
  ASSERT_EQ(Q.cols(), 4);
  EXPECT_LE((Q.transpose() * Q - MatrixXd::Identity(4, 4)).norm(), 1e-13);
  EXPECT_LE((A - Q * (Q.transpose() * A)).norm(), 1e-12 * A.norm());
}

TEST(Basis, GalerkinSharesOneBasis)
{
  System sys = gen_random(RandomStructure::FirstOrder, 25, 2, 5);
  std::vector<Family> fams{{'L', 0}, {'H', 2}};
  InterpPlan plan = imaginary_axis_plan(sys, {0.5, 2.0}, {}, fams, true, 9);
  BasisBundle B = build_VW(sys, plan, 0.0);
  EXPECT_TRUE(B.galerkin);
  EXPECT_EQ(B.V, B.W);
  EXPECT_EQ(B.V.cols(), B.Vw.cols());
  EXPECT_LE((B.V.transpose() * B.V - MatrixXd::Identity(B.V.cols(), B.V.cols())).norm(), 1e-12);
}

TEST(Basis, ImaginaryAxisPlanLayout)
{
  System sys = gen_delay_rod(10);
  InterpPlan plan = imaginary_axis_plan(sys, {1.0, 2.0, 3.0}, {{1.0}, {2.0}}, {{'L', 0}}, false, 1);
  ASSERT_EQ(plan.entries.size(), 6u);
  EXPECT_TRUE(plan.hermite);
  for (const auto &e : plan.entries)
  {
    EXPECT_EQ(e.sigma, e.mu);
    EXPECT_EQ(e.sigma.real(), 0.0);
    EXPECT_EQ(e.p.size(), 1u);
    EXPECT_NEAR(e.b.norm(), 1.0, 1e-14);
  }
  EXPECT_EQ(plan.entries[4].p[0], 2.0);
  EXPECT_EQ(plan.entries[4].sigma, Complex(0.0, 2.0));
}

TEST(Basis, FullBasesInterpolate)
{
  System sys = gen_random(RandomStructure::SecondOrder, 20, 2, 13);
  std::vector<Family> fams = InterpPlan::all_families(sys);
  InterpPlan plan;
  plan.families = fams;
  plan.entries = {strmor::testing::siso_entry(1.0, 2.0), strmor::testing::siso_entry(0.7, 1.5)};
  ReducedSystem rom = strmor::testing::project_full(sys, plan);
  TransferEvaluator fom_ev(sys), rom_ev(rom.sys);
  for (const auto &e : plan.entries)
  {
    EXPECT_LE(strmor::testing::value_conditions(fom_ev, rom_ev, e, fams), 1e-9);
  }
}
