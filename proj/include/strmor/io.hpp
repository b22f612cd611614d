// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_IO_HPP
#define STRMOR_IO_HPP

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "drop.hpp"
#include "model.hpp"
#include "simulate.hpp"

namespace strmor
{

namespace fs = std::filesystem;
using json = nlohmann::json;

class IoError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

//
// Matrix Market. Writers emit "general" storage with shortest round-trip decimals, so a
// write/read cycle reproduces every value bit for bit.
//
struct MarketData
{
  Index rows = 0;
  Index cols = 0;
  std::vector<SparseUnfolding::Entry> entries;  // 0-based
};

inline MarketData read_market(const fs::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw IoError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
  {
    throw ParseError(path.string() + ": missing Matrix Market header");
  }
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  for (auto *s : {&object, &format, &field, &symmetry})
  {
    std::transform(s->begin(), s->end(), s->begin(), [](unsigned char c) { return std::tolower(c); });
  }
  if (object != "matrix" || (format != "coordinate" && format != "array") ||
      (field != "real" && field != "integer" && field != "double") ||
      (symmetry != "general" && symmetry != "symmetric"))
  {
    throw ParseError(path.string() + ": unsupported Matrix Market variant '" + line + "'");
  }
  while (std::getline(in, line))
  {
    if (!line.empty() && line[0] != '%')
    {
      break;
    }
  }
  MarketData M;
  std::istringstream ss(line);
  long long r = 0, c = 0, nnz = 0;
  if (!(ss >> r >> c) || r < 0 || c < 0)
  {
    throw ParseError(path.string() + ": malformed size line");
  }
  M.rows = r;
  M.cols = c;
  auto number = [&](const std::string &tok)
  {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    {
      throw ParseError(path.string() + ": malformed value '" + tok + "'");
    }
    return v;
  };
  if (format == "coordinate")
  {
    if (!(ss >> nnz) || nnz < 0)
    {
      throw ParseError(path.string() + ": malformed size line");
    }
    M.entries.reserve(static_cast<std::size_t>(nnz));
    std::string tok;
    for (long long k = 0; k < nnz; k++)
    {
      long long i = 0, j = 0;
      if (!(in >> i >> j >> tok))
      {
        throw ParseError(path.string() + ": expected " + std::to_string(nnz) + " entries");
      }
      if (i < 1 || i > r || j < 1 || j > c)
      {
        throw ParseError(path.string() + ": entry index out of range");
      }
      double v = number(tok);
      M.entries.push_back({i - 1, j - 1, v});
      if (symmetry == "symmetric" && i != j)
      {
        M.entries.push_back({j - 1, i - 1, v});
      }
    }
  }
  else
  {
    if (symmetry != "general")
    {
      throw ParseError(path.string() + ": symmetric array storage is not supported");
    }
    std::string tok;
    for (long long j = 0; j < c; j++)
    {
      for (long long i = 0; i < r; i++)
      {
        if (!(in >> tok))
        {
          throw ParseError(path.string() + ": array data ended early");
        }
        double v = number(tok);
        if (v != 0.0)
        {
          M.entries.push_back({i, j, v});
        }
      }
    }
  }
  return M;
}

inline void write_market_entries(const fs::path &path, Index rows, Index cols,
                                 const std::vector<SparseUnfolding::Entry> &entries)
{
  std::ofstream out(path);
  if (!out)
  {
    throw IoError("cannot write " + path.string());
  }
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << rows << ' ' << cols << ' ' << entries.size() << '\n';
  for (const auto &e : entries)
  {
    out << e.row + 1 << ' ' << e.col + 1 << ' ' << format_double(e.value) << '\n';
  }
}

inline void write_market(const fs::path &path, const SparseMatrixXd &A)
{
  std::vector<SparseUnfolding::Entry> e;
  for (Index j = 0; j < A.outerSize(); j++)
  {
    for (SparseMatrixXd::InnerIterator it(A, j); it; ++it)
    {
      e.push_back({it.row(), it.col(), it.value()});
    }
  }
  std::sort(e.begin(), e.end(), [](const auto &a, const auto &b)
            { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  write_market_entries(path, A.rows(), A.cols(), e);
}

inline void write_market_array(const fs::path &path, const MatrixXd &A)
{
  std::ofstream out(path);
  if (!out)
  {
    throw IoError("cannot write " + path.string());
  }
  out << "%%MatrixMarket matrix array real general\n";
  out << A.rows() << ' ' << A.cols() << '\n';
  for (Index j = 0; j < A.cols(); j++)
  {
    for (Index i = 0; i < A.rows(); i++)
    {
      out << format_double(A(i, j)) << '\n';
    }
  }
}

inline SparseMatrixXd read_sparse(const fs::path &path)
{
  MarketData M = read_market(path);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(M.entries.size());
  for (const auto &e : M.entries)
  {
    t.emplace_back(e.row, e.col, e.value);
  }
  SparseMatrixXd A(M.rows, M.cols);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

inline MatrixXd read_dense(const fs::path &path)
{
  MarketData M = read_market(path);
  MatrixXd A = MatrixXd::Zero(M.rows, M.cols);
  for (const auto &e : M.entries)
  {
    A(e.row, e.col) += e.value;
  }
  return A;
}

//
// System bundle: a directory with system.json and one Matrix Market file per matrix or
// mode-1 unfolding.
//
inline void write_system(const System &sys, const fs::path &dir, const std::string &prefix = "")
{
  fs::create_directories(dir);
  json j;
  j["format"] = "strmor-system";
  j["n"] = sys.n();
  j["m"] = sys.m();
  j["p_out"] = sys.p_out();
  j["q"] = sys.q;
  j["d"] = sys.d;
  json ops = json::array();
  for (std::size_t i = 0; i < sys.op.terms().size(); i++)
  {
    const auto &t = sys.op.terms()[i];
    std::string f = prefix + "K" + std::to_string(i) + ".mtx";
    write_market(dir / f, t.A);
    ops.push_back({{"kappa", t.kappa.to_string()}, {"matrix", f}});
  }
  j["operator"] = ops;
  auto affine = [&](const ParamMatrix &P, const std::string &name)
  {
    json arr = json::array();
    for (std::size_t i = 0; i < P.terms().size(); i++)
    {
      std::string f = prefix + name + std::to_string(i) + ".mtx";
      write_market_array(dir / f, P.terms()[i].mat);
      arr.push_back({{"coeff", P.terms()[i].coeff.to_string()}, {"matrix", f}});
    }
    return arr;
  };
  j["B"] = affine(sys.B, "B");
  j["C"] = affine(sys.C, "C");
  auto tensors = [&](const std::vector<TensorTerm> &terms)
  {
    json arr = json::array();
    for (const auto &T : terms)
    {
      json t;
      t["order"] = T.order();
      t["n"] = T.n();
      if (T.kind() == TensorTerm::Kind::Bilin)
      {
        t["m"] = T.m();
      }
      t["symmetric"] = true;
      json pieces = json::array();
      for (std::size_t i = 0; i < T.pieces().size(); i++)
      {
        const auto &pc = T.pieces()[i];
        std::string f = prefix + T.label() + "_" + std::to_string(i) + ".mtx";
        write_market_entries(dir / f, pc.mode1.rows(), pc.mode1.cols(), pc.mode1.entries());
        pieces.push_back({{"coeff", pc.coeff.to_string()}, {"matrix", f}});
      }
      t["pieces"] = pieces;
      arr.push_back(t);
    }
    return arr;
  };
  j["poly"] = tensors(sys.poly);
  j["bilin"] = tensors(sys.bilin);
  std::ofstream out(dir / (prefix + "system.json"));
  if (!out)
  {
    throw IoError("cannot write " + (dir / (prefix + "system.json")).string());
  }
  out << j.dump(2) << '\n';
}

inline json read_json(const fs::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw IoError("cannot open " + path.string());
  }
  try
  {
    return json::parse(in);
  }
  catch (const json::exception &e)
  {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline System read_system(const fs::path &dir, const std::string &prefix = "")
{
  const fs::path file = dir / (prefix + "system.json");
  json j = read_json(file);
  try
  {
    System sys;
    std::vector<StructuredOperator::Term> ops;
    for (const auto &t : j.at("operator"))
    {
      ops.push_back({ScalarExpr::parse(t.at("kappa").get<std::string>()),
                     read_sparse(dir / t.at("matrix").get<std::string>())});
    }
    sys.op = StructuredOperator(std::move(ops));
    auto affine = [&](const json &arr)
    {
      std::vector<ParamMatrix::Term> terms;
      for (const auto &t : arr)
      {
        terms.push_back({ScalarExpr::parse(t.at("coeff").get<std::string>()),
                         read_dense(dir / t.at("matrix").get<std::string>())});
      }
      return ParamMatrix(std::move(terms));
    };
    sys.B = affine(j.at("B"));
    sys.C = affine(j.at("C"));
    sys.q = j.at("q").get<int>();
    sys.d = j.at("d").get<int>();
    const Index n = sys.n();
    auto tensors = [&](const json &arr, TensorTerm::Kind kind)
    {
      std::vector<TensorTerm> out;
      for (const auto &t : arr)
      {
        int order = t.at("order").get<int>();
        Index m = kind == TensorTerm::Kind::Bilin ? t.at("m").get<Index>() : 1;
        std::vector<Index> rad(order, n);
        if (kind == TensorTerm::Kind::Bilin)
        {
          rad.push_back(m);
        }
        std::vector<std::pair<ScalarExpr, SparseUnfolding>> pieces;
        for (const auto &pc : t.at("pieces"))
        {
          MarketData M = read_market(dir / pc.at("matrix").get<std::string>());
          SparseUnfolding U(M.rows, rad, std::move(M.entries));
          if (U.cols() != M.cols)
          {
            throw DimensionError("unfolding " + pc.at("matrix").get<std::string>() +
                                 " has the wrong column count");
          }
          pieces.push_back({ScalarExpr::parse(pc.at("coeff").get<std::string>()), std::move(U)});
        }
        out.emplace_back(kind, order, n, m, std::move(pieces), t.value("symmetric", false));
      }
      return out;
    };
    sys.poly = tensors(j.value("poly", json::array()), TensorTerm::Kind::Poly);
    sys.bilin = tensors(j.value("bilin", json::array()), TensorTerm::Kind::Bilin);
    sys.validate();
    if (j.contains("m") && j["m"].get<Index>() != sys.m())
    {
      throw DimensionError("bundle declares m = " + j["m"].dump() + " but B has " +
                           std::to_string(sys.m()) + " column(s)");
    }
    if (j.contains("p_out") && j["p_out"].get<Index>() != sys.p_out())
    {
      throw DimensionError("bundle declares p_out = " + j["p_out"].dump() + " but C has " +
                           std::to_string(sys.p_out()) + " row(s)");
    }
    return sys;
  }
  catch (const json::exception &e)
  {
    throw ParseError(file.string() + ": " + e.what());
  }
}

inline json provenance_json(const Provenance &p)
{
  return {{"plan_hash", p.plan_hash},
          {"order", p.order},
          {"rank_horizontal", p.rank_horizontal},
          {"rank_vertical", p.rank_vertical},
          {"sigma_horizontal", to_std(p.sigma_horizontal)},
          {"sigma_vertical", to_std(p.sigma_vertical)}};
}

// Reduced bundle: system files plus lifting bases V.mtx, W.mtx and provenance.json.
inline void write_reduced(const ReducedSystem &rom, const fs::path &dir)
{
  write_system(rom.sys, dir);
  write_market_array(dir / "V.mtx", rom.V);
  write_market_array(dir / "W.mtx", rom.W);
  std::ofstream out(dir / "provenance.json");
  out << provenance_json(rom.provenance).dump(2) << '\n';
}

inline ReducedSystem read_reduced(const fs::path &dir)
{
  ReducedSystem rom;
  rom.sys = read_system(dir);
  rom.V = read_dense(dir / "V.mtx");
  rom.W = read_dense(dir / "W.mtx");
  if (fs::exists(dir / "provenance.json"))
  {
    json j = read_json(dir / "provenance.json");
    rom.provenance.plan_hash = j.value("plan_hash", "");
    rom.provenance.order = j.value("order", Index(0));
    rom.provenance.rank_horizontal = j.value("rank_horizontal", Index(0));
    rom.provenance.rank_vertical = j.value("rank_vertical", Index(0));
    auto vec = [](const json &a)
    {
      std::vector<double> v = a.get<std::vector<double>>();
      return VectorXd(Eigen::Map<VectorXd>(v.data(), static_cast<Index>(v.size())));
    };
    rom.provenance.sigma_horizontal = vec(j.value("sigma_horizontal", json::array()));
    rom.provenance.sigma_vertical = vec(j.value("sigma_vertical", json::array()));
  }
  return rom;
}

//
// Plans.
//
inline json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline Complex json_complex(const json &j)
{
  if (j.is_number())
  {
    return {j.get<double>(), 0.0};
  }
  if (!j.is_array() || j.size() != 2)
  {
    throw ParseError("complex value must be [re, im]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json plan_json(const InterpPlan &plan)
{
  json j;
  json entries = json::array();
  for (const auto &e : plan.entries)
  {
    json b = json::array(), c = json::array();
    for (Index i = 0; i < e.b.size(); i++)
    {
      b.push_back(complex_json(e.b(i)));
    }
    for (Index i = 0; i < e.c.size(); i++)
    {
      c.push_back(complex_json(e.c(i)));
    }
    entries.push_back(
        {{"sigma", complex_json(e.sigma)}, {"mu", complex_json(e.mu)}, {"p", e.p}, {"b", b}, {"c", c}});
  }
  j["entries"] = entries;
  json fam = json::array();
  for (const auto &f : plan.families)
  {
    fam.push_back(f.to_string());
  }
  j["families"] = fam;
  j["galerkin"] = plan.galerkin;
  j["hermite"] = plan.hermite;
  return j;
}

inline InterpPlan plan_from_json(const json &j)
{
  try
  {
    InterpPlan plan;
    const json &flags = j.contains("flags") ? j["flags"] : j;
    for (const auto &f : flags.value("families", json::array()))
    {
      plan.families.push_back(Family::parse(f.get<std::string>()));
    }
    plan.galerkin = flags.value("galerkin", false);
    plan.hermite = flags.value("hermite", false);
    for (const auto &e : j.at("entries"))
    {
      InterpEntry x;
      x.sigma = json_complex(e.at("sigma"));
      x.mu = json_complex(e.at("mu"));
      x.p = e.value("p", std::vector<double>{});
      auto vec = [](const json &a)
      {
        VectorXcd v(static_cast<Index>(a.size()));
        for (std::size_t i = 0; i < a.size(); i++)
        {
          v(static_cast<Index>(i)) = json_complex(a[i]);
        }
        return v;
      };
      x.b = vec(e.at("b"));
      x.c = vec(e.at("c"));
      plan.entries.push_back(std::move(x));
    }
    return plan;
  }
  catch (const json::exception &e)
  {
    throw ParseError(std::string("plan: ") + e.what());
  }
}

inline void write_plan(const InterpPlan &plan, const fs::path &path)
{
  std::ofstream out(path);
  if (!out)
  {
    throw IoError("cannot write " + path.string());
  }
  out << plan_json(plan).dump(2) << '\n';
}

inline InterpPlan read_plan(const fs::path &path) { return plan_from_json(read_json(path)); }

//
// CSV writers.
//
// singular_values.csv: index,sigma_horizontal,sigma_vertical,ratio (sigma_h / sigma_h1);
// missing cells are left empty when the spectra differ in length.
inline void write_singular_values(const fs::path &path, const VectorXd &sh, const VectorXd &sv)
{
  std::ofstream out(path);
  if (!out)
  {
    throw IoError("cannot write " + path.string());
  }
  out << "index,sigma_horizontal,sigma_vertical,ratio\n";
  const Index len = std::max(sh.size(), sv.size());
  for (Index i = 0; i < len; i++)
  {
    out << i + 1 << ',';
    if (i < sh.size())
    {
      out << format_double(sh(i));
    }
    out << ',';
    if (i < sv.size())
    {
      out << format_double(sv(i));
    }
    out << ',';
    if (i < sh.size() && sh(0) > 0.0)
    {
      out << format_double(sh(i) / sh(0));
    }
    out << '\n';
  }
}

// trajectory.csv: t,y1..y_p
inline void write_trajectory(std::ostream &out, const Trajectory &tr)
{
  out << "t";
  for (Index j = 0; j < tr.y.cols(); j++)
  {
    out << ",y" << j + 1;
  }
  out << '\n';
  for (std::size_t k = 0; k < tr.t.size(); k++)
  {
    out << format_double(tr.t[k]);
    for (Index j = 0; j < tr.y.cols(); j++)
    {
      out << ',' << format_double(tr.y(static_cast<Index>(k), j));
    }
    out << '\n';
  }
}

inline Trajectory read_trajectory(const fs::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw IoError("cannot open " + path.string());
  }
  std::string line;
  std::getline(in, line);
  Index cols = static_cast<Index>(std::count(line.begin(), line.end(), ','));
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line))
  {
    if (line.empty())
    {
      continue;
    }
    std::vector<double> r;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ','))
    {
      double v = 0.0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc())
      {
        throw ParseError(path.string() + ": malformed value '" + tok + "'");
      }
      r.push_back(v);
    }
    if (static_cast<Index>(r.size()) != cols + 1)
    {
      throw ParseError(path.string() + ": inconsistent column count");
    }
    rows.push_back(std::move(r));
  }
  Trajectory tr;
  tr.y.resize(static_cast<Index>(rows.size()), cols);
  for (std::size_t k = 0; k < rows.size(); k++)
  {
    tr.t.push_back(rows[k][0]);
    for (Index j = 0; j < cols; j++)
    {
      tr.y(static_cast<Index>(k), j) = rows[k][static_cast<std::size_t>(j) + 1];
    }
  }
  return tr;
}

// sweep.csv: p0..p_{q-1},t,E
inline void write_sweep(std::ostream &out, const SweepResult &R)
{
  const std::size_t q = R.params.empty() ? 0 : R.params[0].size();
  for (std::size_t k = 0; k < q; k++)
  {
    out << 'p' << k << ',';
  }
  out << "t,E\n";
  for (std::size_t i = 0; i < R.params.size(); i++)
  {
    for (std::size_t k = 0; k < R.t.size(); k++)
    {
      for (double v : R.params[i])
      {
        out << format_double(v) << ',';
      }
      out << format_double(R.t[k]) << ',' << format_double(R.E(static_cast<Index>(i), static_cast<Index>(k)))
          << '\n';
    }
  }
}

}  // namespace strmor

#endif  // STRMOR_IO_HPP
