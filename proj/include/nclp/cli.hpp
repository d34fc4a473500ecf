#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage/structural error,
// 2 finished but an enforced margin or hard invariant failed.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nclp/factorization.hpp"
#include "nclp/holder.hpp"
#include "nclp/io.hpp"
#include "nclp/lewis.hpp"
#include "nclp/opspace.hpp"
#include "nclp/random.hpp"

namespace nclp {

enum ExitCode : int { kExitOk = 0, kExitStructural = 1, kExitMargin = 2 };

/// Seeded random instance. `blocks` lists block sizes; for the commutative
/// ensemble their sum is the number of points.
inline Instance gen_instance(const std::vector<int>& blocks, std::vector<double> weights, int n,
                             std::uint64_t seed, const std::string& ensemble) {
  if (blocks.empty()) throw StructuralError("--blocks is empty");
  for (int m : blocks)
    if (m < 1) throw StructuralError("block dimensions must be >= 1");
  std::vector<int> dims = blocks;
  if (ensemble == "commutative") {
    int points = 0;
    for (int m : blocks) points += m;
    dims.assign(points, 1);
  } else if (ensemble != "gaussian-dense" && ensemble != "corner") {
    throw StructuralError("unknown ensemble '" + ensemble + "'");
  }
  if (weights.empty()) weights.assign(dims.size(), 1.0);
  Instance inst;
  inst.algebra = TracialAlgebra(dims, weights);
  inst.seed = seed;
  if (n < 1) throw StructuralError("--n must be >= 1");

  // Corner e M e: the leading ceil(m/2) coordinates of each block, or all
  // blocks but the last when every block is 1 x 1.
  std::vector<int> keep(dims.size());
  for (std::size_t b = 0; b < dims.size(); ++b) keep[b] = ensemble == "corner" ? (dims[b] + 1) / 2 : dims[b];
  if (ensemble == "corner" && keep == dims) {
    if (dims.size() < 2) throw StructuralError("corner ensemble needs a block of size >= 2 or two blocks");
    keep.back() = 0;
  }
  int avail = 0;
  for (int k : keep) avail += k * k;
  if (n > avail) throw StructuralError("--n exceeds the dimension of the sampled space");

  auto rng = make_rng(seed, {0x6e6u});
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<Op> xs;
    for (int i = 0; i < n; ++i) {
      std::vector<Matrix> bl;
      for (std::size_t b = 0; b < dims.size(); ++b) {
        Matrix m = Matrix::Zero(dims[b], dims[b]);
        m.topLeftCorner(keep[b], keep[b]) = random_gaussian(rng, keep[b], keep[b]);
        bl.push_back(std::move(m));
      }
      xs.emplace_back(std::move(bl));
    }
    try {
      Subspace(inst.algebra, xs);
      inst.basis = std::move(xs);
      return inst;
    } catch (const StructuralError&) {
    }
  }
  throw StructuralError("could not sample an independent basis");
}

namespace detail {

inline double parse_exponent(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInf;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw StructuralError("bad exponent '" + s + "'");
  }
  if (pos != s.size()) throw StructuralError("bad exponent '" + s + "'");
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StructuralError("cannot write '" + path + "'");
  f << text;
}

inline void csv_rows(std::ostream& csv, const std::string& command, const std::string& instance,
                     const Certificate& c) {
  for (const auto& m : c.norms)
    for (const auto& [k, v] : m.levels)
      csv << command << ',' << instance << ',' << c.kind << ',' << c.p << ',' << c.n << ',' << m.name << ','
          << k << ',' << v << ',' << m.bound << ',' << m.bound * (1.0 + kBoundRelTol) - v << ','
          << (m.enforced ? 1 : 0) << '\n';
}

inline const char* kCsvHeader = "command,instance,kind,p,n,norm,k,measured,bound,margin,enforced\n";

}  // namespace detail

/// Runs one command line (without the program name). Reports go to --out
/// or `out`; diagnostics and usage go to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Lewis bases, change-of-density factorizations and certificates in noncommutative L_p",
               "nclp"};
  app.require_subcommand(1);

  std::string in_path, out_path, csv_path, p_text;
  double tol = 1e-9;
  int max_iter = 2000;
  double damping = 0.0;
  int amplify = 4;
  int trials = 200;
  int restarts = 16;
  std::uint64_t seed = 0;
  double eq_tol = 1e-9;
  std::vector<int> blocks, n_list{1, 2, 3, 4, 5};
  std::vector<double> weights;
  int gen_n = 1;
  std::string ensemble = "gaussian-dense";

  auto add_io = [&](CLI::App* s) {
    s->add_option("--in", in_path, "instance JSON")->required();
    s->add_option("--out", out_path, "report JSON (default: stdout)");
    s->add_option("--csv", csv_path, "per-level CSV table");
    s->add_option("--p", p_text, "exponent (default: the instance's p)");
  };
  auto add_lewis = [&](CLI::App* s) {
    s->add_option("--tol", tol, "Lewis Gram tolerance")->capture_default_str();
    s->add_option("--max-iter", max_iter, "Lewis iteration cap")->capture_default_str();
    s->add_option("--damping", damping, "iteration exponent in (0, 1] (default: 1 below p = 4, 2/p above)");
  };
  auto add_measure = [&](CLI::App* s) {
    s->add_option("--amplify", amplify, "largest amplification level k_max")->capture_default_str();
    s->add_option("--trials", trials, "random coefficient families per level")->capture_default_str();
    s->add_option("--restarts", restarts, "random starts per level for norm ascents")->capture_default_str();
    s->add_option("--seed", seed, "random seed")->capture_default_str();
  };

  CLI::App* lewis = app.add_subcommand("lewis", "Lewis basis of the instance subspace");
  add_io(lewis);
  add_lewis(lewis);
  CLI::App* fact = app.add_subcommand("factorize", "change-of-density factorization through C_p^n");
  CLI::App* proj = app.add_subcommand("project", "projection onto E with measured norms");
  CLI::App* quot = app.add_subcommand("quotient", "quotient factorization from E* in L_p'");
  CLI::App* dist = app.add_subcommand("distance", "distance certificate against the RC proxy");
  for (CLI::App* s : {fact, proj, quot, dist}) {
    add_io(s);
    add_lewis(s);
    add_measure(s);
  }
  CLI::App* sharp = app.add_subcommand("sharpness", "certificates and lower witnesses for R_p^n");
  sharp->add_option("--p", p_text, "exponent > 2")->required();
  sharp->add_option("--n-list", n_list, "dimensions n")->delimiter(',')->capture_default_str();
  sharp->add_option("--out", out_path, "report JSON (default: stdout)");
  sharp->add_option("--csv", csv_path, "per-level CSV table");
  add_lewis(sharp);
  add_measure(sharp);
  CLI::App* hold = app.add_subcommand("holder", "Hoelder equality classification for the pair (a, b)");
  add_io(hold);
  hold->add_option("--eq-tol", eq_tol, "relative equality band")->capture_default_str();
  CLI::App* norms = app.add_subcommand("norms", "row, column, intersection and sum norms of a family");
  add_io(norms);
  norms->add_option("--seed", seed, "random seed")->capture_default_str();
  CLI::App* gen = app.add_subcommand("gen", "seeded random instance");
  gen->add_option("--blocks", blocks, "block sizes")->delimiter(',')->required();
  gen->add_option("--weights", weights, "trace weights (default: all 1)")->delimiter(',');
  gen->add_option("--n", gen_n, "subspace dimension")->required();
  gen->add_option("--seed", seed, "random seed")->capture_default_str();
  gen->add_option("--ensemble", ensemble, "gaussian-dense | corner | commutative")->capture_default_str();
  gen->add_option("--p", p_text, "exponent recorded in the instance");
  gen->add_option("--out", out_path, "instance JSON (default: stdout)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitStructural;
  }

  const auto t0 = std::chrono::steady_clock::now();
  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    if (cmd == gen) {
      Instance inst = gen_instance(blocks, weights, gen_n, seed, ensemble);
      if (!p_text.empty()) inst.p = detail::parse_exponent(p_text);
      detail::write_text(out_path, dump(instance_to_json(inst)), out);
      return kExitOk;
    }

    LewisOptions lopt;
    lopt.tol = tol;
    lopt.max_iter = max_iter;
    if (damping != 0.0) lopt.damping = damping;
    MeasureOptions mopt;
    mopt.k_max = amplify;
    mopt.trials = restarts;
    mopt.random_families = trials;
    mopt.seed = seed;
    if (amplify < 1 || trials < 0 || restarts < 1) throw StructuralError("--amplify and --restarts must be >= 1");

    json report;
    report["command"] = name;
    json inputs;
    std::optional<Instance> inst;
    double p = 0.0;
    if (cmd != sharp) {
      inst = instance_from_json(parse_json(detail::read_file(in_path)));
      if (!p_text.empty()) p = detail::parse_exponent(p_text);
      else if (inst->p) p = *inst->p;
      else throw StructuralError("no exponent: pass --p or set p in the instance");
      inputs["in"] = in_path;
    } else {
      p = detail::parse_exponent(p_text);
      inputs["n_list"] = n_list;
    }
    inputs["p"] = exponent_to_json(p);
    if (cmd != hold && cmd != norms) {
      inputs["tol"] = tol;
      inputs["max_iter"] = max_iter;
      inputs["damping"] = lopt.damping ? json(*lopt.damping) : json(nullptr);
    }
    if (cmd == fact || cmd == proj || cmd == quot || cmd == dist || cmd == sharp) {
      inputs["amplify"] = amplify;
      inputs["trials"] = trials;
      inputs["restarts"] = restarts;
      inputs["seed"] = seed;
    }
    if (cmd == hold) inputs["eq_tol"] = eq_tol;
    if (inst) inputs["instance"] = instance_to_json(*inst);
    report["inputs"] = inputs;

    int code = kExitOk;
    std::ostringstream csv;
    csv << detail::kCsvHeader;
    const std::string label = in_path.empty() ? "-" : in_path;

    if (cmd == lewis) {
      const Subspace e = inst->subspace();
      const LewisBasisResult r = lewis_basis(e, p, lopt);
      const LewisResidualReport v = verify_conditions(r, p, lopt.eps_rel);
      report["result"] = lewis_to_json(r);
      report["verified"] = residuals_to_json(v);
      if (!r.converged) code = kExitMargin;
      csv.str("");
      csv << "instance,iteration,gram_residual\n";
      for (std::size_t i = 0; i < r.residual_trace.size(); ++i)
        csv << label << ',' << i << ',' << r.residual_trace[i] << '\n';
    } else if (cmd == fact || cmd == proj || cmd == quot || cmd == dist) {
      const Subspace e = inst->subspace();
      Certificate c;
      json extra;
      if (cmd == fact) {
        const Factorization f = factorize_subspace(e, p, lopt, mopt);
        c = f.certificate;
        extra["lewis"] = lewis_to_json(f.lewis);
        extra["A"] = dense_to_json(f.a);
        extra["B"] = dense_to_json(f.b);
      } else if (cmd == proj) {
        const Projection pr = build_projection(e, p, lopt, mopt);
        c = pr.certificate;
        extra["P"] = dense_to_json(pr.p);
      } else if (cmd == quot) {
        const QuotientFactorization q = factorize_quotient(e, p, lopt, mopt);
        c = q.certificate;
        extra["A"] = dense_to_json(q.a);
        extra["B"] = dense_to_json(q.b);
        extra["Q"] = dense_to_json(q.q);
      } else {
        c = rc_distance_certificate(e, p, lopt, mopt);
      }
      report["certificate"] = certificate_to_json(c);
      report["maps"] = extra;
      if (!c.ok()) code = kExitMargin;
      detail::csv_rows(csv, name, label, c);
    } else if (cmd == sharp) {
      const std::vector<SharpnessRow> rows = sharpness_probe(n_list, p, mopt, lopt);
      json table = json::array();
      bool monotone = true;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const SharpnessRow& r = rows[i];
        if (i > 0 && r.upper_value < rows[i - 1].upper_value) monotone = false;
        table.push_back({{"n", r.n},
                         {"upper_value", r.upper_value},
                         {"upper_ratio", r.upper_ratio},
                         {"lower_witness", r.lower_witness},
                         {"lower_ratio", r.lower_ratio},
                         {"certificate", certificate_to_json(r.certificate)}});
        if (!r.certificate.ok()) code = kExitMargin;
        detail::csv_rows(csv, name, "R_p^" + std::to_string(r.n), r.certificate);
      }
      report["rows"] = table;
      report["upper_monotone"] = monotone;
    } else if (cmd == hold) {
      if (inst->basis.size() != 2) throw StructuralError("holder needs an instance with exactly two operators");
      const HolderReport h = holder_check(inst->algebra, inst->basis[0], inst->basis[1], p, eq_tol);
      report["result"] = holder_to_json(h);
      if (h.gap < -1e-10 * std::max(1.0, h.rhs)) code = kExitMargin;
    } else if (cmd == norms) {
      if (inst->algebra.num_blocks() != 1)
        throw StructuralError("norms needs a single-block instance holding the k x k coefficients");
      Family f;
      for (const auto& x : inst->basis) f.push_back(x.block(0));
      SumNormOptions so;
      so.seed = seed;
      const SumNormResult s = sum_norm_solve(f, p, so);
      report["result"] = {{"k", inst->algebra.block_dim(0)},
                          {"n", f.size()},
                          {"column", column_norm(f, p)},
                          {"row", row_norm(f, p)},
                          {"intersection", intersection_norm(f, p)},
                          {"sum", s.witness.value},
                          {"sum_lower_bound", s.lower_bound},
                          {"sum_converged", s.converged}};
      if (!s.converged) code = kExitMargin;
    }

    report["exit_code"] = code;
    report["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_text(out_path, dump(report), out);
    if (!csv_path.empty()) detail::write_text(csv_path, csv.str(), out);
    return code;
  } catch (const StructuralError& e) {
    err << "error: " << e.what() << "\n";
    return kExitStructural;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitStructural;
  } catch (const SolverError& e) {
    err << "solver: " << e.what() << "\n";
    return kExitMargin;
  }
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace nclp
