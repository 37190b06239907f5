#include "nusar/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "nusar/covariance.hpp"
#include "nusar/error.hpp"
#include "nusar/estimate.hpp"
#include "nusar/field_io.hpp"
#include "nusar/harness.hpp"
#include "nusar/limits.hpp"
#include "nusar/replicate.hpp"
#include "nusar/simulate.hpp"
#include "nusar/tail_bound.hpp"

namespace nusar {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::InvalidConfig, path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

// A design file is either a bare design object or a config holding one.
NearlyUnstableDesign load_design(const std::string& path) {
  const json j = parse_json_file(path);
  try {
    return parse_design(j.is_object() && j.contains("design") ? j.at("design") : j);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

std::vector<SizePoint> ladder_from_file(const std::string& path) {
  const json j = parse_json_file(path);
  std::vector<SizePoint> out;
  if (!j.is_object() || !j.contains("ladder")) return out;
  for (const json& e : j.at("ladder")) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw Error(ErrorCode::InvalidConfig, path + ": ladder entries must be [m, s]");
    out.push_back({e[0].get<long>(), e[1].get<int>()});
  }
  return out;
}

// "64,64;128,128"
std::vector<SizePoint> parse_ladder(const std::string& spec) {
  std::vector<SizePoint> out;
  std::istringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    long m = 0;
    int s = 0;
    char comma = 0;
    std::istringstream is(item);
    if (!(is >> m >> comma >> s) || comma != ',' || !(is >> std::ws).eof())
      throw Error(ErrorCode::InvalidConfig, "bad ladder entry '" + item + "' (expected m,s)");
    out.push_back({m, s});
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "ladder is empty");
  return out;
}

std::vector<SizePoint> resolve_ladder(const std::string& spec, const std::string& design_path) {
  if (!spec.empty()) return parse_ladder(spec);
  auto from_file = ladder_from_file(design_path);
  if (from_file.empty()) throw Error(ErrorCode::InvalidConfig, "no ladder given (use --ladder or a config file)");
  return from_file;
}

SimMethod resolve_method(const std::string& name, int margin, const ModelParams& p, InnovationDist dist) {
  if (name == "auto") return default_method(p, dist);
  const SimMethod::Kind kind = sim_method_kind_from_string(name);
  switch (kind) {
    case SimMethod::Kind::BoundaryCholesky: return SimMethod::boundary_cholesky();
    case SimMethod::Kind::FullCholesky: return SimMethod::full_cholesky();
    case SimMethod::Kind::TruncatedSeries:
    case SimMethod::Kind::SeriesBoundary: {
      const int mg = margin >= 0 ? margin : margin_for_tolerance(p.radius(), 1e-12);
      return kind == SimMethod::Kind::TruncatedSeries ? SimMethod::truncated_series(mg) : SimMethod::series_boundary(mg);
    }
  }
  return SimMethod::boundary_cholesky();
}

std::vector<double> acceptance_grid() { return {-0.45, -0.25, -0.1, 0.1, 0.25, 0.45}; }

json estimate_json(const EstimateResult& r) {
  json j{{"alpha_hat", r.alpha_hat},
         {"beta_hat", r.beta_hat},
         {"B", to_json(r.B)},
         {"C", json::array({r.C[0], r.C[1]})},
         {"detB", r.detB}};
  j["A"] = r.A ? json::array({(*r.A)[0], (*r.A)[1]}) : json(nullptr);
  return j;
}

std::vector<CovlimProbe> parse_probes(const std::vector<std::string>& specs) {
  std::vector<CovlimProbe> out;
  for (const std::string& spec : specs) {
    CovlimProbe p;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream is(spec);
    if (!(is >> p.t1 >> c1 >> p.s1 >> c2 >> p.t2 >> c3 >> p.s2) || c1 != ',' || c2 != ',' || c3 != ',')
      throw Error(ErrorCode::InvalidConfig, "bad probe '" + spec + "' (expected t1,s1,t2,s2)");
    out.push_back(p);
  }
  return out;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nearly unstable spatial AR(1,1): covariance, simulation, estimation and limit checks", "nusar"};
  app.require_subcommand(1);
  int threads = 0;
  std::string policy_name = "openmp";
  app.add_option("--threads", threads, "OpenMP worker count (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--policy", policy_name, "serial or openmp")->check(CLI::IsMember({"serial", "openmp"}));

  // Shared parameter options.
  double alpha = 0.0, beta = 0.0, tol = 1e-14;
  int k = 0, l = 0, kmax = 6, lmax = 6, yw_max = 20, margin = -1;
  std::string method = "closed", sim_method = "auto", dist_name = "gaussian", out_path, in_path, design_path, ladder_spec,
              config_path, out_dir;
  std::uint64_t seed = 0, rep = 0;
  std::optional<std::uint64_t> seed_override;
  bool as_json = false;
  long m = 0, n = 0, reps = 0;
  int s = 0;
  std::vector<std::string> probes;

  auto* cov = app.add_subcommand("cov", "stationary covariance R(k,l)");
  cov->require_subcommand(1);
  auto* cov_eval = cov->add_subcommand("eval", "evaluate one lag");
  cov_eval->add_option("--alpha", alpha)->required();
  cov_eval->add_option("--beta", beta)->required();
  cov_eval->add_option("--k", k)->required();
  cov_eval->add_option("--l", l)->required();
  cov_eval->add_option("--method", method)->check(CLI::IsMember({"closed", "f4", "binrep", "series"}));
  cov_eval->add_option("--tol", tol)->check(CLI::PositiveNumber);
  auto* cov_table = cov->add_subcommand("table", "CSV of R(k,l) for |k| <= kmax, |l| <= lmax");
  cov_table->add_option("--alpha", alpha)->required();
  cov_table->add_option("--beta", beta)->required();
  cov_table->add_option("--kmax", kmax)->check(CLI::NonNegativeNumber);
  cov_table->add_option("--lmax", lmax)->check(CLI::NonNegativeNumber);
  cov_table->add_option("--method", method)->check(CLI::IsMember({"closed", "f4", "binrep", "series"}));
  cov_table->add_option("--out", out_path, "CSV path (stdout if omitted)");
  auto* cov_verify = cov->add_subcommand("verify", "four-way cross-check on the acceptance grid");
  cov_verify->add_option("--kmax", kmax)->check(CLI::NonNegativeNumber);
  cov_verify->add_option("--yw-max", yw_max)->check(CLI::NonNegativeNumber);

  auto* sim = app.add_subcommand("sim", "field simulation");
  sim->require_subcommand(1);
  auto* sim_field = sim->add_subcommand("field", "simulate one field on a window hull");
  sim_field->add_option("--alpha", alpha)->required();
  sim_field->add_option("--beta", beta)->required();
  sim_field->add_option("--k", k)->required();
  sim_field->add_option("--l", l)->required();
  sim_field->add_option("--method", sim_method)
      ->check(CLI::IsMember({"auto", "boundary_cholesky", "full_cholesky", "truncated_series", "series_boundary"}));
  sim_field->add_option("--margin", margin, "series depth (default: tail bound <= 1e-12)");
  sim_field->add_option("--dist", dist_name)->check(CLI::IsMember({"gaussian", "rademacher", "uniform"}));
  sim_field->add_option("--seed", seed);
  sim_field->add_option("--rep", rep);
  sim_field->add_option("--out", out_path, "CSV path (stdout if omitted)");

  auto* est = app.add_subcommand("estimate", "least squares estimate from a field CSV");
  est->add_option("--in", in_path)->required();
  auto* est_k = est->add_option("--k", k, "window k (default: the file's window)");
  auto* est_l = est->add_option("--l", l, "window l");
  est->add_flag("--json", as_json);

  auto* lim = app.add_subcommand("limits", "theoretical limit objects");
  lim->require_subcommand(1);
  auto* lim_describe = lim->add_subcommand("describe", "limit law and condition statistics of a design");
  lim_describe->add_option("--design", design_path, "design JSON or a config containing one")->required();
  lim_describe->add_option("--ladder", ladder_spec, "m,s;m,s;... (default: the file's ladder)");

  auto* exp = app.add_subcommand("experiment", "Monte Carlo CLT experiments");
  exp->require_subcommand(1);
  auto* exp_run = exp->add_subcommand("run", "run a config");
  exp_run->add_option("--config", config_path)->required();
  exp_run->add_option("--seed", seed_override, "overrides the config seed");
  exp_run->add_option("--out-dir", out_dir, "overrides the config out_dir");

  auto* ver = app.add_subcommand("verify", "verification suites");
  ver->require_subcommand(1);
  auto* ver_cov = ver->add_subcommand("cov", "same as `cov verify`");
  ver_cov->add_option("--kmax", kmax)->check(CLI::NonNegativeNumber);
  ver_cov->add_option("--yw-max", yw_max)->check(CLI::NonNegativeNumber);
  auto* ver_prop1 = ver->add_subcommand("prop1", "exact E[B] convergence along a ladder");
  ver_prop1->add_option("--design", design_path)->required();
  ver_prop1->add_option("--ladder", ladder_spec);
  auto* ver_covlim = ver->add_subcommand("covlim", "scaled covariance bounds and decay");
  ver_covlim->add_option("--design", design_path)->required();
  ver_covlim->add_option("--m", m)->required();
  ver_covlim->add_option("--n", n)->required();
  ver_covlim->add_option("--probe", probes, "t1,s1,t2,s2 (repeatable)")->required();
  auto* ver_detb = ver->add_subcommand("detb", "scaled mean det B");
  auto* ver_score = ver->add_subcommand("score", "scaled score covariance");
  for (auto* sub : {ver_detb, ver_score}) {
    sub->add_option("--design", design_path)->required();
    sub->add_option("--m", m)->required();
    sub->add_option("--s", s)->required();
    sub->add_option("--reps", reps)->required();
    sub->add_option("--seed", seed);
  }

  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    set_worker_count(threads);
    const ExecPolicy policy = exec_policy_from_string(policy_name);

    if (*cov_eval) {
      const CovKernel kernel({alpha, beta}, cov_method_from_string(method), tol);
      out << fmt17(kernel.evaluate(k, l)) << "\n";
      return kExitOk;
    }
    if (*cov_table) {
      const CovKernel kernel({alpha, beta}, cov_method_from_string(method), tol);
      const CovTable t = covariance_table(kernel, kmax, lmax, policy);
      std::ostringstream csv;
      csv << "k,l,value\n";
      for (int a = -kmax; a <= kmax; ++a)
        for (int b = -lmax; b <= lmax; ++b) csv << a << ',' << b << ',' << fmt17(t.at(a, b)) << '\n';
      if (out_path.empty()) {
        out << csv.str();
      } else {
        std::ofstream f(out_path);
        if (!f) throw Error(ErrorCode::Io, "cannot open '" + out_path + "'");
        f << csv.str();
      }
      return kExitOk;
    }
    if (*cov_verify || *ver_cov) {
      const CovGridReport r = verify_cov_grid(acceptance_grid(), kmax, yw_max, 1e-8, 1e-10, policy);
      out << to_json(r).dump(2) << "\n";
      return r.pass ? kExitOk : kExitAcceptance;
    }
    if (*sim_field) {
      const ModelParams p{alpha, beta};
      const InnovationDist dist = innovation_dist_from_string(dist_name);
      const Field f = simulate(p, {k, l}, resolve_method(sim_method, margin, p, dist), dist, RngStream(seed, rep));
      if (out_path.empty())
        write_field_csv(out, f);
      else
        write_field_csv(out_path, f);
      return kExitOk;
    }
    if (*est) {
      const Field f = read_field_csv(in_path);
      TriangleWindow w = f.window();
      if (*est_k) w.k = k;
      if (*est_l) w.l = l;
      const EstimateResult r = lse(f, w);
      if (as_json) {
        out << estimate_json(r).dump(2) << "\n";
      } else {
        out << "alpha_hat " << fmt17(r.alpha_hat) << "\nbeta_hat  " << fmt17(r.beta_hat) << "\ndetB      "
            << fmt17(r.detB) << "\n";
      }
      return kExitOk;
    }
    if (*lim_describe) {
      const NearlyUnstableDesign design = load_design(design_path);
      const auto ladder = resolve_ladder(ladder_spec, design_path);
      long m_probe = 0;
      for (const SizePoint& sp : ladder) m_probe = std::max(m_probe, sp.m);
      const LimitLaw law = limit_law(design, m_probe);
      json sizes = json::array();
      for (const SizePoint& sp : ladder) {
        const ModelParams p = design.params_at(sp.m);
        sizes.push_back({{"m", sp.m},
                         {"s", sp.s},
                         {"alpha_m", p.alpha},
                         {"beta_m", p.beta},
                         {"rate", law.rate(sp.m, sp.s)},
                         {"condition_statistic", condition_statistic(design, sp.m, sp.s)}});
      }
      const FisherScaleConstants fc = fisher_constants(design, m_probe);
      json fisher{{"sigma_sq_ab", fc.sigma_sq_ab},
                  {"rho", fc.rho},
                  {"sigma_alpha_sq", fc.sigma_alpha_sq},
                  {"gamma_matrix", to_json(fc.gamma_matrix)},
                  {"info_exponent", fc.info_exponent},
                  {"at_m", m_probe}};
      out << json{{"design", to_json(design)}, {"limit_law", to_json(law)}, {"ladder", sizes}, {"fisher", fisher}}.dump(2)
          << "\n";
      return kExitOk;
    }
    if (*exp_run) {
      ExperimentConfig config = load_config(config_path);
      if (seed_override) config.seed = *seed_override;
      if (!out_dir.empty()) config.out_dir = out_dir;
      const ExperimentReport r = run_clt(config, policy);
      if (config.out_dir.empty()) {
        out << report_text(r);
      } else {
        write_outputs(r, config.out_dir);
        for (const Check& c : r.checks)
          out << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << fmt17(c.value) << " in [" << fmt17(c.lo) << ", "
              << fmt17(c.hi) << "]\n";
        if (!r.acceptance_evaluated) out << "acceptance not evaluated (reps < " << kMinAcceptanceReps << ")\n";
        out << "report written to " << config.out_dir << "\n";
      }
      return r.pass ? kExitOk : kExitAcceptance;
    }
    if (*ver_prop1) {
      const Prop1Report r = verify_prop1(load_design(design_path), resolve_ladder(ladder_spec, design_path));
      out << to_json(r).dump(2) << "\n";
      return r.pass ? kExitOk : kExitAcceptance;
    }
    if (*ver_covlim) {
      const CovlimReport r = verify_covlim(load_design(design_path), m, n, parse_probes(probes));
      out << to_json(r).dump(2) << "\n";
      return r.pass ? kExitOk : kExitAcceptance;
    }
    if (*ver_detb || *ver_score) {
      const NearlyUnstableDesign design = load_design(design_path);
      const McCheckReport r = *ver_detb ? verify_detB(design, {m, s}, reps, seed, policy)
                                        : verify_score(design, {m, s}, reps, seed, policy);
      out << to_json(r).dump(2) << "\n";
      return (!r.evaluated || r.pass) ? kExitOk : kExitAcceptance;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  err << app.help();
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace nusar
