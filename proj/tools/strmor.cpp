// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: benchmark generation, plans, reduction, transfer function evaluation,
// simulation and comparison. Exit codes: 0 success, 1 numerical failure, 2 usage or validation.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "strmor/experiment.hpp"

using namespace strmor;

namespace
{

constexpr int kNumerical = 1;
constexpr int kUsage = 2;

std::vector<double> parse_list(const std::string &text)
{
  std::vector<double> v;
  if (text.empty())
  {
    return v;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
  {
    double x = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    {
      throw ParseError("malformed number '" + tok + "' in list '" + text + "'");
    }
    v.push_back(x);
  }
  return v;
}

Complex parse_complex(const std::string &text)
{
  ScalarExpr e = ScalarExpr::parse(text);
  if (e.depends_on_s() || e.depends_on_p())
  {
    throw ParseError("'" + text + "' is not a complex constant");
  }
  return e(Complex(0.0, 0.0), std::span<const double>{});
}

// log:a:b:N -> N points i*w with w logarithmically spaced in [a, b].
std::vector<double> parse_grid(const std::string &text)
{
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ':'))
  {
    parts.push_back(tok);
  }
  if (parts.size() != 4 || (parts[0] != "log" && parts[0] != "lin"))
  {
    throw ParseError("grid must be log:a:b:N or lin:a:b:N, got '" + text + "'");
  }
  double a = parse_list(parts[1]).at(0), b = parse_list(parts[2]).at(0);
  double count = parse_list(parts[3]).at(0);
  if (count < 1 || count != std::floor(count) || (parts[0] == "log" && (a <= 0 || b <= 0)))
  {
    throw ParseError("invalid grid '" + text + "'");
  }
  auto n = static_cast<std::size_t>(count);
  return parts[0] == "log" ? logspace(a, b, n) : linspace(a, b, n);
}

std::ostream &open_out(const std::string &path, std::ofstream &file)
{
  if (path.empty() || path == "-")
  {
    return std::cout;
  }
  file.open(path);
  if (!file)
  {
    throw IoError("cannot write " + path);
  }
  return file;
}

System load_system(const std::string &dir) { return read_system(dir); }

void write_tf_row(std::ostream &out, const MatrixXcd &F)
{
  for (Index i = 0; i < F.rows(); i++)
  {
    for (Index j = 0; j < F.cols(); j++)
    {
      out << ',' << format_double(F(i, j).real()) << ',' << format_double(F(i, j).imag());
    }
  }
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"strmor: structure-preserving interpolatory reduction of polynomial systems"};
  app.require_subcommand(1);

  // bench gen
  auto *bench = app.add_subcommand("bench", "benchmark generators");
  bench->require_subcommand(1);
  auto *bgen = bench->add_subcommand("gen", "write a benchmark system bundle");
  std::string b_name, b_out = "bundle";
  Index b_size = 0, b_r0 = 0;
  std::uint64_t b_seed = 0;
  double b_damping = MsdOptions{}.damping, b_mod = MsdOptions{}.modulation;
  bgen->add_option("--name", b_name, "chafee | msd | delay-rod | planted")->required();
  bgen->add_option("--size", b_size, "state dimension or grid size")->required();
  bgen->add_option("--seed", b_seed, "random seed (planted)");
  bgen->add_option("--r0", b_r0, "planted minimal order (default min(3, size))");
  bgen->add_option("--damping", b_damping, "msd: D = damping * K");
  bgen->add_option("--modulation", b_mod, "msd: N_i = modulation * K on half i");
  bgen->add_option("--out", b_out, "output directory");

  // plan gen
  auto *plan = app.add_subcommand("plan", "interpolation plans");
  plan->require_subcommand(1);
  auto *pgen = plan->add_subcommand("gen", "imaginary-axis plan over a frequency grid");
  std::string p_sys, p_grid = "log:1e-2:1e2:20", p_pmin, p_pmax, p_sampling = "linspace",
                     p_pairing = "cross", p_families, p_out = "plan.json";
  std::size_t p_pcount = 1;
  std::uint64_t p_seed = 1;
  bool p_galerkin = false, p_fixed_dirs = false;
  pgen->add_option("--system", p_sys, "system bundle directory")->required();
  pgen->add_option("--grid", p_grid, "frequency grid log:a:b:N");
  pgen->add_option("--pmin", p_pmin, "parameter lower bounds, comma separated");
  pgen->add_option("--pmax", p_pmax, "parameter upper bounds, comma separated");
  pgen->add_option("--pcount", p_pcount, "parameter samples (cross pairing)");
  pgen->add_option("--sampling", p_sampling, "linspace | random");
  pgen->add_option("--pairing", p_pairing, "cross | zip");
  pgen->add_option("--families", p_families, "comma separated, e.g. L,N1,H2 (default: all)");
  pgen->add_option("--seed", p_seed, "seed for parameters and directions");
  pgen->add_flag("--galerkin", p_galerkin, "mark the plan for one-sided projection");
  pgen->add_flag("--fixed-directions", p_fixed_dirs, "use all-ones tangential directions");
  pgen->add_option("--out", p_out, "output file");

  // rom build
  auto *rom = app.add_subcommand("rom", "reduced models");
  rom->require_subcommand(1);
  auto *rbuild = rom->add_subcommand("build", "dominant-subspace reduction from a plan");
  std::string r_sys, r_plan, r_out = "rom";
  Index r_order = 0;
  double r_tol = 1e-10;
  bool r_galerkin = false;
  rbuild->add_option("--system", r_sys, "system bundle directory")->required();
  rbuild->add_option("--plan", r_plan, "plan JSON")->required();
  auto *r_order_opt = rbuild->add_option("--order", r_order, "reduced order");
  rbuild->add_option("--tol", r_tol, "relative singular value cutoff when --order is absent")
      ->excludes(r_order_opt);
  rbuild->add_flag("--galerkin", r_galerkin, "one-sided projection (overrides the plan flag)");
  rbuild->add_option("--out", r_out, "output directory");

  // tf eval
  auto *tf = app.add_subcommand("tf", "transfer functions");
  tf->require_subcommand(1);
  auto *teval = tf->add_subcommand("eval", "evaluate a generalized transfer function");
  std::string t_sys, t_family = "L", t_p, t_grid, t_compare, t_out;
  std::vector<std::string> t_s;
  teval->add_option("--system", t_sys, "system bundle directory")->required();
  teval->add_option("--family", t_family, "L | N<eta> | H<xi>");
  teval->add_option("--s", t_s, "frequency arguments, one per family argument (e.g. 0+2i)");
  teval->add_option("--p", t_p, "parameter values, comma separated");
  teval->add_option("--grid", t_grid, "imaginary-axis sweep log:a:b:N (all arguments equal)");
  teval->add_option("--compare", t_compare, "second bundle evaluated at the same points");
  teval->add_option("--out", t_out, "CSV file (default stdout)");

  // sim
  auto *sim = app.add_subcommand("sim", "explicit Euler simulation");
  std::string s_sys, s_input, s_p, s_out;
  TimeGrid s_grid;
  sim->add_option("--system", s_sys, "system bundle directory")->required();
  sim->add_option("--input", s_input, "input signal, channels separated by ';'")->required();
  sim->add_option("--p", s_p, "parameter values, comma separated");
  sim->add_option("--T", s_grid.T, "final time");
  sim->add_option("--t0", s_grid.t0, "initial time");
  sim->add_option("--dt", s_grid.dt, "output sampling step");
  sim->add_option("--substeps", s_grid.substeps, "Euler steps per sample (0 = stable default)");
  sim->add_option("--out", s_out, "trajectory CSV (default stdout)");

  // compare
  auto *cmp = app.add_subcommand("compare", "output errors between two bundles");
  std::string c_full, c_rom, c_input, c_out, c_sweep;
  std::vector<std::string> c_params;
  TimeGrid c_grid;
  cmp->add_option("--full", c_full, "full-order bundle")->required();
  cmp->add_option("--rom", c_rom, "reduced bundle")->required();
  cmp->add_option("--input", c_input, "input signal")->required();
  cmp->add_option("--p", c_params, "parameter vector, comma separated; repeat for a sweep");
  cmp->add_option("--T", c_grid.T, "final time");
  cmp->add_option("--t0", c_grid.t0, "initial time");
  cmp->add_option("--dt", c_grid.dt, "output sampling step");
  cmp->add_option("--substeps", c_grid.substeps, "Euler steps per sample (0 = stable default)");
  cmp->add_option("--out", c_out, "metrics CSV (default stdout)");
  cmp->add_option("--sweep", c_sweep, "also write the (p, t, E) table here");

  // experiment
  auto *exp = app.add_subcommand("experiment", "run a checked-in experiment manifest");
  std::string e_manifest, e_out = "results";
  exp->add_option("manifest", e_manifest, "manifest JSON")->required();
  exp->add_option("--out", e_out, "output directory");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try
  {
    if (*bgen)
    {
      json opt = {{"damping", b_damping}, {"modulation", b_mod}};
      if (b_r0 > 0)
      {
        opt["r0"] = b_r0;
      }
      System sys = make_bench(b_name, b_size, b_seed, opt);
      write_system(sys, b_out);
      std::cout << "wrote " << b_name << " bundle (n = " << sys.n() << ") to " << b_out << '\n';
    }
    else if (*pgen)
    {
      System sys = load_system(p_sys);
      std::vector<double> w = parse_grid(p_grid);
      json pj;
      pj["omega"] = {{"min", w.front()}, {"max", w.back()}, {"count", w.size()}};
      std::vector<double> lo = parse_list(p_pmin), hi = parse_list(p_pmax);
      if (!lo.empty())
      {
        pj["params"] = {{"min", lo},
                        {"max", hi.empty() ? lo : hi},
                        {"count", p_pcount},
                        {"sampling", p_sampling},
                        {"pairing", p_pairing}};
      }
      json fams = json::array();
      std::stringstream ss(p_families);
      std::string f;
      while (std::getline(ss, f, ','))
      {
        fams.push_back(f);
      }
      pj["families"] = fams;
      pj["galerkin"] = p_galerkin;
      pj["seed"] = p_seed;
      pj["random_directions"] = !p_fixed_dirs;
      InterpPlan pl = experiment_plan(sys, pj);
      pl.validate(sys);
      write_plan(pl, p_out);
      std::cout << "wrote plan with " << pl.entries.size() << " entries to " << p_out << '\n';
    }
    else if (*rbuild)
    {
      System sys = load_system(r_sys);
      InterpPlan pl = read_plan(r_plan);
      if (r_galerkin)
      {
        pl.galerkin = true;
      }
      OrderSpec spec;
      spec.tol = r_tol;
      if (r_order_opt->count() > 0)
      {
        spec.order = r_order;
      }
      DropResult D = run_drop(sys, pl, spec);
      write_reduced(D.rom, r_out);
      write_singular_values(fs::path(r_out) / "singular_values.csv", D.blocks.sigma_h,
                            D.blocks.sigma_v);
      std::cout << "rank horizontal " << D.rank.horizontal << ", vertical " << D.rank.vertical
                << "; wrote order " << D.rom.sys.n() << " model to " << r_out << '\n';
    }
    else if (*teval)
    {
      System sys = load_system(t_sys);
      std::optional<System> other;
      if (!t_compare.empty())
      {
        other = load_system(t_compare);
      }
      Family fam = Family::parse(t_family);
      std::vector<double> p = parse_list(t_p);
      std::vector<std::vector<Complex>> points;
      if (!t_grid.empty())
      {
        if (!t_s.empty())
        {
          throw ValidationError("--grid and --s are mutually exclusive");
        }
        for (double w : parse_grid(t_grid))
        {
          points.emplace_back(static_cast<std::size_t>(fam.num_args()), Complex(0.0, w));
        }
      }
      else
      {
        if (static_cast<int>(t_s.size()) != fam.num_args())
        {
          throw ArityError("family " + fam.to_string() + " needs " + std::to_string(fam.num_args()) +
                           " --s argument(s)");
        }
        std::vector<Complex> pt;
        for (const auto &s : t_s)
        {
          pt.push_back(parse_complex(s));
        }
        points.push_back(pt);
      }
      TransferEvaluator ev(sys);
      std::optional<TransferEvaluator> ev2;
      if (other)
      {
        ev2.emplace(*other);
      }
      std::ofstream file;
      std::ostream &out = open_out(t_out, file);
      // Header: family, s1_re, s1_im, ..., p0.., F<i>_<j>_re/im ..., [G.. rel_err], status
      Index rows = sys.p_out(), cols = fam.kind == 'L' ? sys.m() : 1;
      for (int k = 0; k < fam.order; k++)
      {
        cols *= sys.m();
      }
      if (fam.kind == 'N')
      {
        cols *= sys.m();
      }
      out << "family";
      for (int j = 0; j < fam.num_args(); j++)
      {
        out << ",s" << j + 1 << "_re,s" << j + 1 << "_im";
      }
      for (std::size_t k = 0; k < p.size(); k++)
      {
        out << ",p" << k;
      }
      auto head = [&](const std::string &tag)
      {
        for (Index i = 0; i < rows; i++)
        {
          for (Index j = 0; j < cols; j++)
          {
            out << ',' << tag << i + 1 << '_' << j + 1 << "_re," << tag << i + 1 << '_' << j + 1
                << "_im";
          }
        }
      };
      head("F");
      if (ev2)
      {
        head("G");
        out << ",rel_err";
      }
      out << ",status\n";
      bool failed = false;
      for (const auto &pt : points)
      {
        out << fam.to_string();
        for (Complex s : pt)
        {
          out << ',' << format_double(s.real()) << ',' << format_double(s.imag());
        }
        for (double v : p)
        {
          out << ',' << format_double(v);
        }
        try
        {
          MatrixXcd F = ev.eval(fam, pt, p);
          std::ostringstream row;
          write_tf_row(row, F);
          if (ev2)
          {
            MatrixXcd G = ev2->eval(fam, pt, p);
            write_tf_row(row, G);
            double den = F.norm();
            row << ',' << format_double(den > 0.0 ? (F - G).norm() / den : (F - G).norm());
          }
          out << row.str() << ",ok\n";
        }
        catch (const NumericalError &e)
        {
          failed = true;
          const Index blanks = 2 * rows * cols * (ev2 ? 2 : 1) + (ev2 ? 1 : 0);
          for (Index k = 0; k < blanks; k++)
          {
            out << ',';
          }
          std::string msg = e.what();
          std::replace(msg.begin(), msg.end(), ',', ';');
          out << ",\"" << msg << "\"\n";
        }
      }
      if (failed)
      {
        std::cerr << "error: one or more points could not be evaluated\n";
        return kNumerical;
      }
    }
    else if (*sim)
    {
      System sys = load_system(s_sys);
      std::vector<double> p = parse_list(s_p);
      Trajectory tr = simulate(sys, p, Signal::parse(s_input), s_grid);
      std::ofstream file;
      write_trajectory(open_out(s_out, file), tr);
    }
    else if (*cmp)
    {
      System full = load_system(c_full);
      System red = load_system(c_rom);
      std::vector<std::vector<double>> params;
      for (const auto &s : c_params)
      {
        params.push_back(parse_list(s));
      }
      if (params.empty())
      {
        params.push_back({});
      }
      Signal u = Signal::parse(c_input);
      std::ofstream file;
      std::ostream &out = open_out(c_out, file);
      out << "p,L2,L2_rel,Linf,Linf_rel,E_max\n";
      const std::size_t np = params.size();
      std::vector<Trajectory> yf(np), yr(np);
      for (std::size_t i = 0; i < np; i++)
      {
        TimeGrid g = c_grid;
        if (g.substeps == 0)
        {
          g.substeps = std::max(stable_substeps(classify(full, params[i]), g.dt),
                                stable_substeps(classify(red, params[i]), g.dt));
        }
        yf[i] = simulate(full, params[i], u, g);
        yr[i] = simulate(red, params[i], u, g);
      }
      SweepResult S = sweep_table(params, yf, yr);
      for (std::size_t i = 0; i < np; i++)
      {
        ErrorMetrics m = error_metrics(yf[i], yr[i]);
        double yl2 = signal_l2(yf[i]), yinf = yf[i].y.rowwise().norm().maxCoeff();
        std::string ps;
        for (std::size_t k = 0; k < params[i].size(); k++)
        {
          ps += (k ? ";" : "") + format_double(params[i][k]);
        }
        out << ps << ',' << format_double(m.L2) << ',' << format_double(yl2 > 0 ? m.L2 / yl2 : m.L2)
            << ',' << format_double(m.Linf) << ','
            << format_double(yinf > 0 ? m.Linf / yinf : m.Linf) << ','
            << format_double(S.E.row(static_cast<Index>(i)).maxCoeff()) << '\n';
      }
      if (!c_sweep.empty())
      {
        std::ofstream sw(c_sweep);
        write_sweep(sw, S);
      }
    }
    else if (*exp)
    {
      ExperimentSpec spec = read_experiment(e_manifest);
      ExperimentResult R = run_experiment(spec, e_out);
      std::cout << R.name << ": n = " << R.n << ", plan size " << R.plan_size << ", rank "
                << R.rank.horizontal << "/" << R.rank.vertical << '\n';
      for (const auto &[key, v] : R.e_max)
      {
        const Index used = R.order_used.at(key.first);
        std::cout << "  r = " << key.first;
        if (used != key.first)
        {
          std::cout << " (built " << used << ")";
        }
        std::cout << ", input " << key.second << ": E_max = " << format_double(v) << '\n';
      }
      std::cout << "results in " << e_out << '\n';
    }
  }
  catch (const NumericalError &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  catch (const Error &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  catch (const fs::filesystem_error &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return 0;
}
