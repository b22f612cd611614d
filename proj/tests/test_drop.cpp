// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "strmor/bench.hpp"
#include "support.hpp"

using namespace strmor;
using namespace strmor::testing;

namespace
{

InterpPlan random_plan(const System &sys, int points, std::uint64_t seed, bool galerkin = false)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> re(0.5, 2.0), im(-2.0, 2.0);
  InterpPlan plan;
  plan.families = InterpPlan::all_families(sys);
  plan.galerkin = galerkin;
  for (int i = 0; i < points; i++)
  {
    const Complex s(re(rng), im(rng));
    plan.entries.push_back(siso_entry(s, galerkin ? s : Complex(re(rng), im(rng))));
  }
  return plan;
}

bool same_matrix(const SparseMatrixXd &a, const SparseMatrixXd &b)
{
  return a.rows() == b.rows() && a.cols() == b.cols() && MatrixXd(a - b).norm() == 0.0;
}

}  // namespace

// --- rank and truncation --------------------------------------------------------------------------

TEST(Drop, NumericalRankExamples)
{
  VectorXd s(4);
  s << 1.0, 1e-3, 1e-9, 1e-12;
  EXPECT_EQ(numerical_rank(s), 3);
  EXPECT_EQ(numerical_rank(s, 1e-6), 2);
  EXPECT_EQ(numerical_rank(VectorXd::Zero(3)), 0);
  EXPECT_EQ(numerical_rank(VectorXd::Ones(5)), 5);
  EXPECT_THROW(numerical_rank(VectorXd()), ValidationError);
}

TEST(Drop, TruncationOrderIsValidated)
{
  System sys = gen_random(RandomStructure::FirstOrder, 20, 2, 3);
  InterpPlan plan = random_plan(sys, 2, 8);
  BasisBundle B = build_VW(sys, plan, 0.0);
  PencilBlocks P = pencil_blocks(sys, B.V_weighted(), B.W_weighted());
  EXPECT_THROW(truncate(B.V, B.W, P, 0, false), ValidationError);
  EXPECT_THROW(truncate(B.V, B.W, P, P.V1.cols() + 1, false), ValidationError);
  EXPECT_THROW(run_drop(sys, plan, OrderSpec{0}), ValidationError);
  auto [Ve, We] = truncate(B.V, B.W, P, 3, false);
  EXPECT_EQ(Ve.cols(), 3);
  EXPECT_LE((Ve.transpose() * Ve - MatrixXd::Identity(3, 3)).norm(), 1e-13);
  EXPECT_LE((We.transpose() * We - MatrixXd::Identity(3, 3)).norm(), 1e-13);
}

TEST(Drop, PencilBlocksMatchTheOperatorTerms)
{
  System sys = gen_delay_rod(15);
  InterpPlan plan = random_plan(sys, 2, 1);
  for (auto &e : plan.entries)
  {
    e.p = {2.0};
  }
  BasisBundle B = build_VW(sys, plan, 0.0);
  PencilBlocks P = pencil_blocks(sys, B.V, B.W);
  ASSERT_EQ(P.blocks.size(), sys.op.size());
  for (std::size_t i = 0; i < P.blocks.size(); i++)
  {
    MatrixXd ref = B.W.transpose() * MatrixXd(sys.op.terms()[i].A) * B.V;
    EXPECT_LE((P.blocks[i] - ref).norm(), 1e-12 * std::max(1.0, ref.norm()));
  }
  for (Index k = 1; k < P.sigma_h.size(); k++)
  {
    EXPECT_GE(P.sigma_h(k - 1), P.sigma_h(k));
  }
  EXPECT_THROW(pencil_blocks(sys, MatrixXd::Zero(3, 2), B.W), DimensionError);
}

// --- reduced models -------------------------------------------------------------------------------

// Keeping every singular direction reproduces the interpolation conditions.
TEST(Drop, FullOrderInterpolates)
{
  System sys = gen_random(RandomStructure::FirstOrder, 30, 2, 17);
  InterpPlan plan = random_plan(sys, 3, 5);
  BasisBundle B = build_VW(sys, plan, 0.0);
  const Index full = std::min(B.V.cols(), B.W.cols());
  DropResult D = run_drop(sys, plan, OrderSpec{full});
  EXPECT_EQ(D.rom.sys.n(), full);
  EXPECT_EQ(D.rom.sys.m(), sys.m());
  EXPECT_EQ(D.rom.sys.p_out(), sys.p_out());
  TransferEvaluator fom(sys), rom(D.rom.sys);
  for (const auto &e : plan.entries)
  {
    EXPECT_LE(value_conditions(fom, rom, e, plan.families), 1e-8);
  }
}

TEST(Drop, GalerkinUsesOneBasis)
{
  System sys = gen_random(RandomStructure::SecondOrder, 25, 2, 2);
  InterpPlan plan = random_plan(sys, 3, 6, true);
  DropResult D = run_drop(sys, plan, OrderSpec{4});
  EXPECT_EQ(D.rom.sys.n(), 4);
  EXPECT_EQ(D.rom.V, D.rom.W);
}

TEST(Drop, GalerkinKeepsSecondOrderSymmetry)
{
  System sys = gen_msd(30);
  InterpPlan plan = imaginary_axis_plan(sys, {0.3, 1.0, 3.0}, {}, {{'L', 0}, {'N', 1}}, true, 4);
  DropResult D = run_drop(sys, plan, OrderSpec{8});
  ASSERT_EQ(D.rom.sys.op.size(), 3u);
  for (const auto &t : D.rom.sys.op.terms())
  {
    MatrixXd A(t.A);
    EXPECT_LE((A - A.transpose()).norm(), 1e-12 * A.norm());
  }
  Eigen::LLT<MatrixXd> chol{MatrixXd(D.rom.sys.op.terms()[2].A)};
  EXPECT_EQ(chol.info(), Eigen::Success);
}

TEST(Drop, RankGrowsWithThePlan)
{
  System sys = gen_random(RandomStructure::FirstOrder, 40, 2, 11);
  InterpPlan big = random_plan(sys, 4, 12);
  InterpPlan small = big;
  small.entries.resize(2);
  DropResult Ds = run_drop(sys, small, {}), Db = run_drop(sys, big, {});
  EXPECT_LE(Ds.rank.chosen, Db.rank.chosen);
}

TEST(Drop, PlantedOrderIsRecovered)
{
  for (Index r0 : {1, 3})
  {
    PlantedSystem ps = gen_planted(r0, 16, 40 + r0);
    InterpPlan plan = random_plan(ps.full, static_cast<int>(r0) + 2, 70 + r0);
    DropResult D = run_drop(ps.full, plan, {});
    EXPECT_EQ(D.rank.chosen, r0);
    TransferEvaluator hidden(ps.hidden), rom(D.rom.sys);
    for (const Complex s : {Complex(0.4, 1.0), Complex(1.7, -0.3)})
    {
      std::vector<Complex> a{s};
      EXPECT_LE(rel_err(hidden.eval({'L', 0}, a, {}), rom.eval({'L', 0}, a, {})), 1e-8);
    }
  }
}

TEST(Drop, PlanHashIsStable)
{
  System sys = gen_random(RandomStructure::Delay, 10, 2, 1);
  InterpPlan a = random_plan(sys, 2, 3), b = random_plan(sys, 2, 3);
  EXPECT_EQ(plan_hash(a), plan_hash(b));
  EXPECT_EQ(plan_hash(a).size(), 16u);
  b.entries[1].mu += 1e-9;
  EXPECT_NE(plan_hash(a), plan_hash(b));
}

// --- benchmark generators -------------------------------------------------------------------------

TEST(Bench, ChafeeStructure)
{
  System sys = gen_chafee(12);
  EXPECT_EQ(sys.n(), 12);
  EXPECT_EQ(sys.d, 3);
  EXPECT_EQ(sys.q, 1);
  ASSERT_NE(sys.find_poly(3), nullptr);
  EXPECT_TRUE(sys.find_poly(3)->pieces()[0].mode1.is_symmetric(3));
  MatrixXd A1 = -MatrixXd(sys.op.terms()[1].A);
  EXPECT_LE((A1 - A1.transpose()).norm(), 0.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A1);
  EXPECT_LT(es.eigenvalues().maxCoeff(), 0.0);
}

TEST(Bench, MechanicalStructure)
{
  System sys = gen_msd(10);
  EXPECT_EQ(sys.n(), 10);
  EXPECT_EQ(sys.m(), 2);
  EXPECT_EQ(sys.p_out(), 2);
  MatrixXd K(sys.op.terms()[2].A), D(sys.op.terms()[1].A);
  EXPECT_LE((D - 0.1 * K).norm(), 1e-14);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  MatrixXd N = sys.find_bilin(1)->pieces()[0].mode1.to_dense();
  ASSERT_EQ(N.cols(), 20);
  MatrixXd Kb = K;  // each half keeps its own springs only
  Kb(4, 5) = Kb(5, 4) = 0.0;
  EXPECT_LE((N.leftCols(10) + N.rightCols(10) - 0.005 * Kb).norm(), 1e-15);
  EXPECT_EQ(N.leftCols(10).bottomRows(5).norm(), 0.0);
  EXPECT_THROW(gen_msd(3), ValidationError);
}

TEST(Bench, DelayRodStructure)
{
  System sys = gen_delay_rod(9);
  EXPECT_EQ(sys.op.size(), 4u);
  EXPECT_EQ(sys.q, 1);
  EXPECT_EQ(sys.op.arity(), 1);
  MatrixXd Ad(sys.op.terms()[2].A);
  EXPECT_TRUE(Ad.isDiagonal());
  EXPECT_GT(Ad.diagonal().minCoeff(), 0.0);
  EXPECT_THROW(gen_delay_rod(2), ValidationError);
}

TEST(Bench, RandomSystemsCarryEveryFamily)
{
  for (auto kind : {RandomStructure::FirstOrder, RandomStructure::SecondOrder, RandomStructure::Delay})
  {
    System sys = gen_random(kind, 12, 3, 9, 2, 3);
    EXPECT_EQ(InterpPlan::all_families(sys).size(), 5u);
    EXPECT_EQ(sys.m(), 2);
    EXPECT_EQ(sys.p_out(), 3);
    System again = gen_random(kind, 12, 3, 9, 2, 3);
    for (std::size_t i = 0; i < sys.op.size(); i++)
    {
      EXPECT_TRUE(same_matrix(sys.op.terms()[i].A, again.op.terms()[i].A));
    }
  }
}

TEST(Bench, PlantedEmbedding)
{
  PlantedSystem ps = gen_planted(3, 12, 5);
  EXPECT_EQ(ps.full.n(), 12);
  EXPECT_EQ(ps.hidden.n(), 3);
  EXPECT_LE((ps.embedding.transpose() * ps.embedding - MatrixXd::Identity(3, 3)).norm(), 1e-13);
  std::mt19937_64 rng(2);
  MatrixXd Q = detail::random_orthogonal(7, rng);
  EXPECT_LE((Q.transpose() * Q - MatrixXd::Identity(7, 7)).norm(), 1e-13);
}
