// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_EXPERIMENT_HPP
#define STRMOR_EXPERIMENT_HPP

#include <map>
#include <random>
#include <string>
#include <vector>

#include "basis.hpp"
#include "bench.hpp"
#include "drop.hpp"
#include "io.hpp"
#include "simulate.hpp"

namespace strmor
{

//
// Manifest layout (all keys but "system" optional):
//   system:     {"bench": "chafee|msd|delay-rod|planted", "size": N, "seed": S, ...} or {"bundle": DIR}
//   plan:       {"omega": {"min", "max", "count"}, "params": {"min": [..], "max": [..], "count",
//                "sampling": "linspace|random", "pairing": "cross|zip"}, "families", "galerkin",
//                "seed", "random_directions"}
//   orders:     [r, ...]
//   simulation: {"inputs": [signal, ...], "params": [[..], ...], "T", "dt", "t0", "substeps"}
//
struct ExperimentSpec
{
  std::string name = "experiment";
  json system;
  json plan;
  std::vector<Index> orders;
  std::vector<std::string> inputs;
  std::vector<std::vector<double>> sim_params;
  TimeGrid grid;
  fs::path base;  // directory relative paths resolve against
};

inline ExperimentSpec parse_experiment(const json &j, const fs::path &base = ".")
{
  try
  {
    ExperimentSpec s;
    s.base = base;
    s.name = j.value("name", s.name);
    s.system = j.at("system");
    s.plan = j.value("plan", json::object());
    s.orders = j.value("orders", std::vector<Index>{});
    if (j.contains("simulation"))
    {
      const json &sim = j["simulation"];
      s.inputs = sim.value("inputs", std::vector<std::string>{});
      s.sim_params = sim.value("params", std::vector<std::vector<double>>{});
      s.grid.t0 = sim.value("t0", 0.0);
      s.grid.T = sim.value("T", 1.0);
      s.grid.dt = sim.value("dt", 1e-3);
      s.grid.substeps = sim.value("substeps", 0);
      s.grid.validate();
    }
    return s;
  }
  catch (const json::exception &e)
  {
    throw ParseError(std::string("experiment manifest: ") + e.what());
  }
}

inline ExperimentSpec read_experiment(const fs::path &path)
{
  return parse_experiment(read_json(path), path.parent_path());
}

inline System make_bench(const std::string &name, Index size, std::uint64_t seed, const json &opt = {})
{
  if (name == "chafee")
  {
    return gen_chafee(size);
  }
  if (name == "msd")
  {
    MsdOptions o;
    o.damping = opt.value("damping", o.damping);
    o.modulation = opt.value("modulation", o.modulation);
    return gen_msd(size, o);
  }
  if (name == "delay-rod")
  {
    return gen_delay_rod(size);
  }
  if (name == "planted")
  {
    Index r0 = opt.value("r0", std::min<Index>(3, size));
    return gen_planted(r0, size, seed).full;
  }
  throw ValidationError("unknown benchmark '" + name + "'");
}

inline System experiment_system(const ExperimentSpec &s)
{
  if (s.system.contains("bundle"))
  {
    return read_system(s.base / s.system["bundle"].get<std::string>());
  }
  return make_bench(s.system.at("bench").get<std::string>(), s.system.at("size").get<Index>(),
                    s.system.value("seed", std::uint64_t(0)), s.system);
}

//
// Imaginary-axis plan from the manifest's plan section. Parameter samples are either crossed with
// every frequency or paired one to one with them.
//
inline InterpPlan experiment_plan(const System &sys, const json &pj)
{
  const json om = pj.value("omega", json{{"min", 1e-2}, {"max", 1e2}, {"count", 20}});
  const std::size_t nw = om.value("count", std::size_t(20));
  std::vector<double> omegas = logspace(om.value("min", 1e-2), om.value("max", 1e2), nw);
  const std::uint64_t seed = pj.value("seed", std::uint64_t(1));
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> params;
  bool zip = false;
  if (sys.q > 0)
  {
    const json pp = pj.value("params", json::object());
    std::vector<double> lo = pp.value("min", std::vector<double>(sys.q, 1.0));
    std::vector<double> hi = pp.value("max", lo);
    if (static_cast<int>(lo.size()) != sys.q || static_cast<int>(hi.size()) != sys.q)
    {
      throw ArityError("plan parameter range has the wrong length");
    }
    const std::string sampling = pp.value("sampling", "linspace");
    zip = pp.value("pairing", "cross") == "zip";
    const std::size_t count = zip ? nw : pp.value("count", std::size_t(1));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t i = 0; i < count; i++)
    {
      std::vector<double> p(sys.q);
      for (int k = 0; k < sys.q; k++)
      {
        double t = sampling == "random" ? uni(rng)
                                        : (count == 1 ? 0.0 : static_cast<double>(i) / (count - 1));
        p[k] = lo[k] + t * (hi[k] - lo[k]);
      }
      params.push_back(std::move(p));
    }
  }
  std::vector<Family> fams;
  for (const auto &f : pj.value("families", json::array()))
  {
    fams.push_back(Family::parse(f.get<std::string>()));
  }
  const bool galerkin = pj.value("galerkin", false);
  const bool random_dirs = pj.value("random_directions", true);
  if (!zip)
  {
    return imaginary_axis_plan(sys, omegas, params, fams, galerkin, seed + 1, random_dirs);
  }
  InterpPlan plan;
  plan.families = fams;
  plan.galerkin = galerkin;
  plan.hermite = true;
  std::mt19937_64 drng(seed + 1);
  for (std::size_t i = 0; i < nw; i++)
  {
    InterpEntry e;
    e.sigma = e.mu = Complex(0.0, omegas[i]);
    e.p = params[i];
    set_directions(e, sys.m(), sys.p_out(), drng, random_dirs);
    plan.entries.push_back(std::move(e));
  }
  return plan;
}

struct RunMetrics
{
  Index order = 0;
  std::size_t input = 0;
  std::vector<double> p;
  double L2 = 0.0, L2_rel = 0.0, Linf = 0.0, Linf_rel = 0.0;
  int substeps = 0;
};

struct ExperimentResult
{
  std::string name;
  Index n = 0;
  std::size_t plan_size = 0;
  RankReport rank;
  VectorXd sigma_h, sigma_v;
  std::vector<RunMetrics> runs;
  // E_max per (order, input): max over params and t of ||y - y_hat|| / max_{t,p} ||y||.
  std::map<std::pair<Index, std::size_t>, double> e_max;
  // Requested order -> order actually built. They differ when the oversampled basis is exhausted.
  std::map<Index, Index> order_used;
};

inline ExperimentResult run_experiment(const ExperimentSpec &spec, const fs::path &out_dir = {})
{
  ExperimentResult R;
  R.name = spec.name;
  System sys = experiment_system(spec);
  R.n = sys.n();
  InterpPlan plan = experiment_plan(sys, spec.plan);
  R.plan_size = plan.entries.size();
  BasisBundle bundle = build_VW(sys, plan, 0.0);
  const MatrixXd Vw = bundle.V_weighted(), Ww = bundle.W_weighted();
  PencilBlocks blocks = pencil_blocks(sys, Vw, Ww);
  R.rank = pencil_rank(blocks);
  R.sigma_h = blocks.sigma_h;
  R.sigma_v = blocks.sigma_v;
  if (!out_dir.empty())
  {
    fs::create_directories(out_dir);
    write_singular_values(out_dir / "singular_values.csv", R.sigma_h, R.sigma_v);
    write_plan(plan, out_dir / "plan.json");
  }
  std::vector<Index> orders = spec.orders;
  if (orders.empty())
  {
    orders.push_back(R.rank.chosen);
  }
  std::vector<ReducedSystem> roms;
  const Index available = std::min(blocks.V1.cols(), blocks.W1.cols());
  for (Index r : orders)
  {
    Index r_used = r;
    if (r > available)
    {
      warn("order " + std::to_string(r) + " exceeds the " + std::to_string(available) +
           " available singular vectors; using " + std::to_string(available));
      r_used = available;
    }
    R.order_used[r] = r_used;
    auto [Ve, We] = truncate(Vw, Ww, blocks, r_used, plan.galerkin);
    roms.push_back(project(sys, Ve, We));
    roms.back().provenance.plan_hash = plan_hash(plan);
    roms.back().provenance.rank_horizontal = R.rank.horizontal;
    roms.back().provenance.rank_vertical = R.rank.vertical;
    if (!out_dir.empty())
    {
      write_reduced(roms.back(), out_dir / ("rom_r" + std::to_string(r)));
    }
  }
  if (spec.inputs.empty())
  {
    return R;
  }
  std::vector<std::vector<double>> params = spec.sim_params;
  if (params.empty())
  {
    params.push_back({});
  }
  const std::size_t np = params.size();

  for (std::size_t ui = 0; ui < spec.inputs.size(); ui++)
  {
    Signal u = Signal::parse(spec.inputs[ui]);
    // Full-order runs are shared by every order; they are redone only when a reduced model needs
    // a finer internal step.
    std::map<std::pair<std::size_t, int>, Trajectory> fom;
    std::vector<int> base_sub(np);
    for (std::size_t i = 0; i < np; i++)
    {
      base_sub[i] = spec.grid.substeps > 0 ? spec.grid.substeps
                                           : stable_substeps(classify(sys, params[i]), spec.grid.dt);
    }
    auto full_run = [&](std::size_t i, int sub) -> const Trajectory &
    {
      auto key = std::make_pair(i, sub);
      auto it = fom.find(key);
      if (it == fom.end())
      {
        TimeGrid g = spec.grid;
        g.substeps = sub;
        it = fom.emplace(key, simulate(sys, params[i], u, g)).first;
      }
      return it->second;
    };
    std::vector<Trajectory> base(np);
    std::vector<std::string> err(np);
    parallel_for(np, [&](std::size_t i)
                 {
                   try
                   {
                     TimeGrid g = spec.grid;
                     g.substeps = base_sub[i];
                     base[i] = simulate(sys, params[i], u, g);
                   }
                   catch (const Error &e)
                   {
                     err[i] = e.what();
                   }
                 });
    for (std::size_t i = 0; i < np; i++)
    {
      if (!err[i].empty())
      {
        throw NumericalError("full-order simulation failed: " + err[i]);
      }
      fom.emplace(std::make_pair(i, base_sub[i]), std::move(base[i]));
    }
    double ymax = 0.0;
    for (std::size_t i = 0; i < np; i++)
    {
      ymax = std::max(ymax, full_run(i, base_sub[i]).y.rowwise().norm().maxCoeff());
    }
    for (std::size_t o = 0; o < roms.size(); o++)
    {
      double emax = 0.0;
      for (std::size_t i = 0; i < np; i++)
      {
        const System &rs = roms[o].sys;
        int sub = spec.grid.substeps > 0
                      ? spec.grid.substeps
                      : std::max(base_sub[i], stable_substeps(classify(rs, params[i]), spec.grid.dt));
        const Trajectory &yf = full_run(i, sub);
        TimeGrid g = spec.grid;
        g.substeps = sub;
        Trajectory yr = simulate(rs, params[i], u, g);
        ErrorMetrics m = error_metrics(yf, yr);
        double yl2 = signal_l2(yf);
        double yinf = yf.y.rowwise().norm().maxCoeff();
        RunMetrics rm;
        rm.order = orders[o];
        rm.input = ui;
        rm.p = params[i];
        rm.L2 = m.L2;
        rm.L2_rel = yl2 > 0.0 ? m.L2 / yl2 : m.L2;
        rm.Linf = m.Linf;
        rm.Linf_rel = yinf > 0.0 ? m.Linf / yinf : m.Linf;
        rm.substeps = sub;
        R.runs.push_back(rm);
        emax = std::max(emax, ymax > 0.0 ? m.Linf / ymax : m.Linf);
      }
      R.e_max[{orders[o], ui}] = emax;
    }
  }
  if (!out_dir.empty())
  {
    std::ofstream out(out_dir / "errors.csv");
    out << "order,input,p,L2,L2_rel,Linf,Linf_rel,substeps\n";
    for (const auto &m : R.runs)
    {
      std::string p;
      for (std::size_t k = 0; k < m.p.size(); k++)
      {
        p += (k ? ";" : "") + format_double(m.p[k]);
      }
      out << m.order << ',' << m.input << ',' << p << ',' << format_double(m.L2) << ','
          << format_double(m.L2_rel) << ',' << format_double(m.Linf) << ','
          << format_double(m.Linf_rel) << ',' << m.substeps << '\n';
    }
    std::ofstream em(out_dir / "emax.csv");
    em << "order,order_used,input,E_max\n";
    for (const auto &[key, v] : R.e_max)
    {
      em << key.first << ',' << R.order_used.at(key.first) << ',' << key.second << ','
         << format_double(v) << '\n';
    }
  }
  return R;
}

}  // namespace strmor

#endif  // STRMOR_EXPERIMENT_HPP
