// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "strmor/experiment.hpp"
#include "support.hpp"

using namespace strmor;
using strmor::testing::rel_err;

namespace
{

SparseMatrixXd scalar(double v)
{
  return (v * MatrixXd::Ones(1, 1)).sparseView();
}

// 1 x 1 system with operator terms {(kappa, a)} and B = C = 1.
System scalar_system(std::vector<StructuredOperator::Term> terms)
{
  System sys;
  sys.op = StructuredOperator(std::move(terms));
  sys.B = ParamMatrix::constant(MatrixXd::Ones(1, 1));
  sys.C = ParamMatrix::constant(MatrixXd::Ones(1, 1));
  sys.validate();
  return sys;
}

TimeGrid grid(double T, double dt, int substeps)
{
  TimeGrid g;
  g.T = T;
  g.dt = dt;
  g.substeps = substeps;
  return g;
}

fs::path scratch(const std::string &name)
{
  fs::path p = fs::temp_directory_path() / ("strmor_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

// --- classification -------------------------------------------------------------------------------

TEST(Simulate, ClassifiesBenchmarks)
{
  std::vector<double> p{1.0};
  EXPECT_EQ(classify(gen_chafee(8), p).kind, Structure::FirstOrder);
  EXPECT_EQ(classify(gen_msd(8), {}).kind, Structure::SecondOrder);
  Classification c = classify(gen_delay_rod(8), p);
  ASSERT_EQ(c.kind, Structure::FirstOrderDelay);
  ASSERT_EQ(c.delays.size(), 1u);
  EXPECT_EQ(c.delays[0].first, 1.0);

  System cubic = scalar_system({{ScalarExpr::parse("s^3"), scalar(1.0)}, {ScalarExpr::constant(1.0), scalar(1.0)}});
  EXPECT_EQ(classify(cubic, {}).kind, Structure::Unsupported);
  Signal u = Signal::parse("1");
  EXPECT_THROW(simulate(cubic, {}, u, grid(1.0, 0.1, 1)), UnsupportedStructureError);
}

// --- time stepping --------------------------------------------------------------------------------

TEST(Simulate, EulerRecurrenceIsExact)
{
  // x' = -x + 1: x_{k+1} = (1 - h) x_k + h
  System sys = scalar_system({{ScalarExpr::freq(), scalar(1.0)}, {ScalarExpr::constant(1.0), scalar(1.0)}});
  Signal u = Signal::parse("1");
  Trajectory tr = simulate(sys, {}, u, grid(1.0, 0.1, 1));
  ASSERT_EQ(tr.t.size(), 11u);
  double x = 0.0;
  for (std::size_t k = 0; k < tr.t.size(); k++)
  {
    EXPECT_NEAR(tr.t[k], 0.1 * static_cast<double>(k), 1e-15);
    EXPECT_NEAR(tr.y(static_cast<Index>(k), 0), x, 1e-15);
    x = 0.9 * x + 0.1;
  }
}

TEST(Simulate, FirstOrderConvergesToAnalytic)
{
  System sys = scalar_system({{ScalarExpr::freq(), scalar(1.0)}, {ScalarExpr::constant(1.0), scalar(1.0)}});
  Signal u = Signal::parse("1");
  Trajectory tr = simulate(sys, {}, u, grid(2.0, 0.01, 200));
  for (std::size_t k = 0; k < tr.t.size(); k++)
  {
    EXPECT_NEAR(tr.y(static_cast<Index>(k), 0), 1.0 - std::exp(-tr.t[k]), 1e-4);
  }
}

TEST(Simulate, SecondOrderConvergesToAnalytic)
{
  // x'' + x = 1, x(0) = x'(0) = 0: x = 1 - cos t
  System sys = scalar_system({{ScalarExpr::parse("s^2"), scalar(1.0)}, {ScalarExpr::constant(1.0), scalar(1.0)}});
  Signal u = Signal::parse("1");
  Trajectory tr = simulate(sys, {}, u, grid(2.0, 0.01, 200));
  for (std::size_t k = 0; k < tr.t.size(); k++)
  {
    EXPECT_NEAR(tr.y(static_cast<Index>(k), 0), 1.0 - std::cos(tr.t[k]), 1e-3);
  }
}

TEST(Simulate, DelayUsesZeroHistory)
{
  // x'(t) = -x(t - 1) + 1: x = t on [0, 1], x = t - (t - 1)^2 / 2 on [1, 2]
  System sys = scalar_system({{ScalarExpr::freq(), scalar(1.0)}, {ScalarExpr::exp(-1.0, ScalarExpr::freq()), scalar(1.0)}});
  Signal u = Signal::parse("1");
  Trajectory tr = simulate(sys, {}, u, grid(2.0, 0.01, 100));
  for (std::size_t k = 0; k < tr.t.size(); k++)
  {
    const double t = tr.t[k];
    const double exact = t <= 1.0 ? t : t - 0.5 * (t - 1.0) * (t - 1.0);
    EXPECT_NEAR(tr.y(static_cast<Index>(k), 0), exact, 1e-3) << "t = " << t;
  }
  EXPECT_THROW(simulate(sys, {}, u, grid(2.0, 0.3, 1)), ValidationError);
}

TEST(Simulate, DivergenceIsReported)
{
  System sys = scalar_system({{ScalarExpr::freq(), scalar(1.0)}, {ScalarExpr::constant(-1.0), scalar(1.0)}});
  Signal u = Signal::parse("1");
  try
  {
    simulate(sys, {}, u, grid(3000.0, 1.0, 1));
    FAIL() << "expected DivergenceError";
  }
  catch (const DivergenceError &e)
  {
    EXPECT_GT(e.time(), 100.0);
    EXPECT_LT(e.time(), 3000.0);
  }
}

TEST(Simulate, InputChannelsAreChecked)
{
  System sys = gen_msd(6);
  EXPECT_THROW(simulate(sys, {}, Signal::parse("1"), grid(1.0, 0.1, 1)), DimensionError);
  EXPECT_THROW(simulate(sys, {}, Signal::parse("1;1"), grid(1.0, -0.1, 1)), ValidationError);
}

// --- error metrics --------------------------------------------------------------------------------

TEST(Simulate, ErrorMetricsOracle)
{
  Trajectory a, b;
  a.t = b.t = {0.0, 0.5, 1.0, 1.5, 2.0};
  a.y = MatrixXd::Zero(5, 2);
  b.y = MatrixXd::Zero(5, 2);
  b.y.col(0).setConstant(3.0);
  b.y.col(1).setConstant(4.0);
  ErrorMetrics m = error_metrics(a, b);
  EXPECT_NEAR(m.Linf, 5.0, 1e-15);
  EXPECT_NEAR(m.L2, 5.0 * std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(signal_l2(b), 5.0 * std::sqrt(2.0), 1e-14);
  b.t[3] = 1.4;
  EXPECT_THROW(error_metrics(a, b), DimensionError);
}

TEST(Simulate, SweepTableNormalization)
{
  Trajectory f, r;
  f.t = r.t = {0.0, 1.0};
  f.y = MatrixXd::Constant(2, 1, 2.0);
  r.y = MatrixXd::Constant(2, 1, 1.5);
  SweepResult S = sweep_table({{1.0}, {2.0}}, {f, f}, {r, f});
  EXPECT_EQ(S.y_max, 2.0);
  EXPECT_NEAR(S.E_max, 0.25, 1e-15);
  EXPECT_EQ(S.E.row(1).norm(), 0.0);
  EXPECT_THROW(sweep_table({}, {}, {}), ValidationError);
}

// --- file formats ---------------------------------------------------------------------------------

TEST(Io, MatrixMarketRoundTrip)
{
  fs::path dir = scratch("mm");
  SparseMatrixXd A = gen_delay_rod(7).op.terms()[1].A;
  write_market(dir / "a.mtx", A);
  EXPECT_EQ(MatrixXd(read_sparse(dir / "a.mtx") - A).norm(), 0.0);
  MatrixXd D = MatrixXd::Random(4, 3);
  write_market_array(dir / "d.mtx", D);
  EXPECT_EQ((read_dense(dir / "d.mtx") - D).norm(), 0.0);

  std::ofstream(dir / "sym.mtx") << "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 2\n1 1 4\n3 1 -2\n";
  MatrixXd S = read_dense(dir / "sym.mtx");
  EXPECT_EQ(S(0, 0), 4.0);
  EXPECT_EQ(S(2, 0), -2.0);
  EXPECT_EQ(S(0, 2), -2.0);

  std::ofstream(dir / "bad.mtx") << "not a matrix\n";
  EXPECT_THROW(read_market(dir / "bad.mtx"), ParseError);
  EXPECT_THROW(read_market(dir / "missing.mtx"), IoError);
}

TEST(Io, SystemBundleRoundTrip)
{
  fs::path dir = scratch("sys");
  System sys = gen_delay_rod(12);
  write_system(sys, dir);
  System back = read_system(dir);
  EXPECT_EQ(back.n(), 12);
  EXPECT_EQ(back.q, 1);
  EXPECT_EQ(back.d, sys.d);
  TransferEvaluator a(sys), b(back);
  std::vector<double> p{2.0};
  std::vector<Complex> s1{Complex(0.0, 1.5)};
  std::vector<Complex> s2{Complex(0.0, 1.5), Complex(0.2, 0.4)};
  EXPECT_LE(rel_err(a.eval({'L', 0}, s1, p), b.eval({'L', 0}, s1, p)), 1e-15);
  EXPECT_LE(rel_err(a.eval({'N', 1}, s2, p), b.eval({'N', 1}, s2, p)), 1e-15);
}

TEST(Io, PlanRoundTrip)
{
  System sys = gen_msd(6);
  InterpPlan plan = imaginary_axis_plan(sys, {0.5, 4.0}, {}, {{'L', 0}, {'N', 1}}, false, 3);
  plan.entries[0].mu = Complex(1.0, -2.0);
  InterpPlan back = plan_from_json(plan_json(plan));
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.families.size(), 2u);
  EXPECT_EQ(back.galerkin, plan.galerkin);
  EXPECT_EQ(plan_hash(back), plan_hash(plan));
}

TEST(Io, TrajectoryAndReducedRoundTrip)
{
  fs::path dir = scratch("traj");
  Trajectory tr;
  tr.t = {0.0, 0.25, 0.5};
  tr.y = MatrixXd::Random(3, 2);
  {
    std::ofstream out(dir / "y.csv");
    write_trajectory(out, tr);
  }
  Trajectory back = read_trajectory(dir / "y.csv");
  ASSERT_EQ(back.t.size(), 3u);
  EXPECT_LE((back.y - tr.y).norm(), 1e-15 * tr.y.norm());

  System sys = gen_random(RandomStructure::FirstOrder, 15, 2, 6);
  InterpPlan plan = imaginary_axis_plan(sys, {1.0, 2.0}, {}, InterpPlan::all_families(sys), false, 1);
  DropResult D = run_drop(sys, plan, OrderSpec{3});
  write_reduced(D.rom, dir / "rom");
  ReducedSystem R = read_reduced(dir / "rom");
  EXPECT_EQ(R.sys.n(), 3);
  EXPECT_EQ(R.V, D.rom.V);
  EXPECT_EQ(R.provenance.order, 3);
}

// --- experiments ----------------------------------------------------------------------------------

TEST(Experiment, ManifestRunsEndToEnd)
{
  json j = json::parse(R"({
    "name": "tiny",
    "system": {"bench": "msd", "size": 20},
    "plan": {"omega": {"min": 0.1, "max": 10, "count": 12}, "families": ["L", "N1"], "galerkin": true},
    "orders": [4, 8],
    "simulation": {"inputs": ["sin(t); 0"], "T": 1.0, "dt": 0.01}
  })");
  ExperimentSpec spec = parse_experiment(j);
  ASSERT_EQ(spec.orders.size(), 2u);
  fs::path dir = scratch("exp");
  ExperimentResult R = run_experiment(spec, dir);
  EXPECT_EQ(R.n, 20);
  EXPECT_EQ(R.plan_size, 12u);
  ASSERT_EQ(R.runs.size(), 2u);
  EXPECT_EQ(R.order_used.at(8), 8);
  EXPECT_LT(R.runs[1].L2_rel, R.runs[0].L2_rel);
  for (const char *f : {"singular_values.csv", "plan.json", "errors.csv", "emax.csv", "rom_r4"})
  {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
}

TEST(Experiment, ManifestErrors)
{
  EXPECT_THROW(parse_experiment(json::parse(R"({"orders": [1]})")), ParseError);
  EXPECT_THROW(make_bench("nope", 10, 0), ValidationError);
  json bad = json::parse(R"({"system": {"bench": "msd", "size": 8}, "simulation": {"dt": 0}})");
  EXPECT_THROW(parse_experiment(bad), ValidationError);
}
