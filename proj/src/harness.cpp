#include "nusar/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "nusar/covariance.hpp"
#include "nusar/error.hpp"
#include "nusar/estimate.hpp"
#include "nusar/tail_bound.hpp"

namespace nusar {

using nlohmann::json;

namespace {

constexpr double kOnDiagonalHeadroom = 1e-6;
constexpr double kSingularAbortFraction = 0.01;
constexpr double kProp1Ceiling = 0.10;
constexpr double kMcTolerance = 0.20;

// A config problem tied to a key path such as {"design", "gamma", "kind"}.
struct FieldError {
  std::vector<std::string> path;
  std::string message;
};

[[noreturn]] void fail(std::vector<std::string> path, std::string message) {
  throw FieldError{std::move(path), std::move(message)};
}

std::string dotted(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

// Position of the innermost key of `path` that appears in the text, searching
// each component after its parent.
std::size_t locate(const std::string& text, const std::vector<std::string>& path) {
  std::size_t found = 0;
  std::size_t from = 0;
  for (const auto& key : path) {
    const std::size_t pos = text.find("\"" + key + "\"", from);
    if (pos == std::string::npos) break;
    found = pos;
    from = pos + 1;
  }
  return found;
}

const json& require(const json& obj, const std::vector<std::string>& path, const std::string& key) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) {
    auto p = path;
    p.push_back(key);
    fail(path, "missing required field '" + dotted(p) + "'");
  }
  return *it;
}

double as_number(const json& j, const std::vector<std::string>& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

long as_integer(const json& j, const std::vector<std::string>& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long>();
}

std::string as_string(const json& j, const std::vector<std::string>& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

// Wraps library errors raised while interpreting a field.
template <class Fn>
auto at_path(const std::vector<std::string>& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

Schedule parse_schedule(const json& j, const std::vector<std::string>& path) {
  if (j.is_number()) return Schedule::constant(as_number(j, path));
  const auto kind = at_path(path, [&] { return schedule_kind_from_string(as_string(require(j, path, "kind"), path)); });
  const double c = as_number(require(j, path, "c"), path);
  switch (kind) {
    case Schedule::Kind::Constant: return Schedule::constant(c);
    case Schedule::Kind::Log: return Schedule::log(c);
    case Schedule::Kind::Power: {
      auto p = path;
      p.push_back("p");
      const double e = as_number(require(j, path, "p"), p);
      return at_path(p, [&] { return Schedule::power(c, e); });
    }
  }
  return Schedule::constant(c);
}

NearlyUnstableDesign parse_design_at(const json& j, const std::vector<std::string>& path) {
  const auto sub = [&](const char* key) {
    auto p = path;
    p.push_back(key);
    return p;
  };
  const double alpha = as_number(require(j, path, "alpha"), sub("alpha"));
  const double beta = as_number(require(j, path, "beta"), sub("beta"));
  const BoundaryPoint bp = at_path(sub("beta"), [&] { return BoundaryPoint::from_pair(alpha, beta); });
  NearlyUnstableDesign d(bp, parse_schedule(require(j, path, "gamma"), sub("gamma")),
                         parse_schedule(require(j, path, "delta"), sub("delta")));
  if (const auto it = j.find("case"); it != j.end()) {
    const std::string tag = as_string(*it, sub("case"));
    if (tag != "interior" && tag != "boundary") fail(sub("case"), "case must be 'interior' or 'boundary'");
    if (tag != to_string(d.case_tag()))
      fail(sub("case"), "case '" + tag + "' does not match alpha (the design is " + to_string(d.case_tag()) + ")");
  }
  return d;
}

SimMethod parse_method(const json& j, const std::vector<std::string>& path) {
  if (j.is_string()) {
    const auto kind = at_path(path, [&] { return sim_method_kind_from_string(j.get<std::string>()); });
    if (kind == SimMethod::Kind::BoundaryCholesky) return SimMethod::boundary_cholesky();
    if (kind == SimMethod::Kind::FullCholesky) return SimMethod::full_cholesky();
    fail(path, "series methods need an object {kind, margin}");
  }
  const auto kind =
      at_path(path, [&] { return sim_method_kind_from_string(as_string(require(j, path, "kind"), path)); });
  if (kind == SimMethod::Kind::BoundaryCholesky) return SimMethod::boundary_cholesky();
  if (kind == SimMethod::Kind::FullCholesky) return SimMethod::full_cholesky();
  auto mp = path;
  mp.push_back("margin");
  const long margin = as_integer(require(j, path, "margin"), mp);
  if (margin < 0 || margin > std::numeric_limits<int>::max()) fail(mp, "margin must be a nonnegative int");
  return kind == SimMethod::Kind::TruncatedSeries ? SimMethod::truncated_series(static_cast<int>(margin))
                                                  : SimMethod::series_boundary(static_cast<int>(margin));
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) fail({}, "config must be a JSON object");
  ExperimentConfig c;
  c.design = parse_design_at(require(j, {}, "design"), {"design"});

  const json& ladder = require(j, {}, "ladder");
  if (!ladder.is_array()) fail({"ladder"}, "ladder must be an array of [m, s] pairs");
  for (const json& entry : ladder) {
    if (!entry.is_array() || entry.size() != 2) fail({"ladder"}, "each ladder entry must be [m, s]");
    const long m = as_integer(entry[0], {"ladder"});
    const long s = as_integer(entry[1], {"ladder"});
    if (s > std::numeric_limits<int>::max()) fail({"ladder"}, "window sum too large");
    c.ladder.push_back({m, static_cast<int>(s)});
  }

  c.reps = as_integer(require(j, {}, "reps"), {"reps"});
  if (const auto it = j.find("dist"); it != j.end())
    c.dist = at_path({"dist"}, [&] { return innovation_dist_from_string(as_string(*it, {"dist"})); });
  if (const auto it = j.find("method"); it != j.end() && !(it->is_string() && it->get<std::string>() == "auto"))
    c.method = parse_method(*it, {"method"});
  if (const auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) fail({"seed"}, "seed must be a nonnegative integer");
    c.seed = it->get<std::uint64_t>();
  }
  if (const auto it = j.find("tolerances"); it != j.end()) {
    if (!it->is_object()) fail({"tolerances"}, "tolerances must be an object");
    if (const auto t = it->find("cov_rel"); t != it->end()) c.tolerances.cov_rel = as_number(*t, {"tolerances", "cov_rel"});
    if (const auto t = it->find("zero_var"); t != it->end())
      c.tolerances.zero_var = as_number(*t, {"tolerances", "zero_var"});
  }
  if (const auto it = j.find("out_dir"); it != j.end()) c.out_dir = as_string(*it, {"out_dir"});
  return c;
}

void check_config(const ExperimentConfig& c) {
  if (c.reps < 1) fail({"reps"}, "reps must be >= 1");
  if (c.ladder.empty()) fail({"ladder"}, "ladder must not be empty");
  if (!(c.tolerances.cov_rel > 0.0)) fail({"tolerances", "cov_rel"}, "cov_rel must be positive");
  if (!(c.tolerances.zero_var > 0.0)) fail({"tolerances", "zero_var"}, "zero_var must be positive");
  if (c.method && c.method->uses_cholesky() && c.dist != InnovationDist::Gaussian)
    fail({"method"}, std::string("Cholesky methods need gaussian innovations, not ") + to_string(c.dist));

  double prev = -std::numeric_limits<double>::infinity();
  for (const SizePoint& sp : c.ladder) {
    const std::string where = "[" + std::to_string(sp.m) + ", " + std::to_string(sp.s) + "]";
    if (sp.m < 1) fail({"ladder"}, "ladder entry " + where + ": m must be >= 1");
    if (sp.s < 2) fail({"ladder"}, "ladder entry " + where + ": s must be >= 2");
    at_path({"ladder"}, [&] { return c.design.params_at(sp.m); });
    if (c.design.case_tag() == LimitCase::Boundary) {
      const double g = c.design.gamma_at(sp.m);
      const double d = c.design.delta_at(sp.m);
      if (g * g == d * d) fail({"ladder"}, "ladder entry " + where + ": gamma^2 = delta^2, the rate is undefined");
    }
    const double stat = condition_statistic(c.design, sp.m, sp.s);
    if (!(stat > prev))
      fail({"ladder"}, "condition statistic must increase strictly along the ladder; entry " + where + " gives " +
                           std::to_string(stat) + " after " + std::to_string(prev));
    prev = stat;
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double quad_form(const Matrix2& m, double u1, double u2) {
  return u1 * (m.a11 * u1 + m.a12 * u2) + u2 * (m.a21 * u1 + m.a22 * u2);
}

ProjectionStats projection(const std::vector<Vec2>& xs, const Matrix2& limit, double sign) {
  const double h = 1.0 / std::numbers::sqrt2;
  std::vector<double> proj;
  proj.reserve(xs.size());
  for (const Vec2& x : xs) proj.push_back(h * (x[0] + sign * x[1]));
  ProjectionStats st;
  double mean = 0.0;
  for (double v : proj) mean += v;
  mean /= static_cast<double>(proj.size());
  double ss = 0.0;
  for (double v : proj) ss += (v - mean) * (v - mean);
  st.variance = proj.size() > 1 ? ss / static_cast<double>(proj.size() - 1) : 0.0;
  st.expected = quad_form(limit, h, sign * h);
  st.ks_d = ks_normal_statistic(proj);
  st.ks_threshold = 1.63 / std::sqrt(static_cast<double>(proj.size()));
  st.ks_ok = st.ks_d <= st.ks_threshold;
  return st;
}

Matrix2 entrywise_deviation(const Matrix2& a, const Matrix2& b) {
  const double scale = std::max({std::abs(b.a11), std::abs(b.a12), std::abs(b.a21), std::abs(b.a22)});
  const auto rel = [scale](double x, double t) {
    const double den = t != 0.0 ? std::abs(t) : scale;
    return den != 0.0 ? (x - t) / den : x - t;
  };
  return {rel(a.a11, b.a11), rel(a.a12, b.a12), rel(a.a21, b.a21), rel(a.a22, b.a22)};
}

Check band_check(std::string name, double value, double target, double tol) {
  const double lo = target - tol * std::abs(target);
  const double hi = target + tol * std::abs(target);
  return {std::move(name), value, lo, hi, value >= lo && value <= hi};
}

std::vector<Check> matrix_checks(const std::string& prefix, const Matrix2& emp, const Matrix2& target, double tol) {
  const double scale = std::max({std::abs(target.a11), std::abs(target.a12), std::abs(target.a22)});
  const auto one = [&](const char* name, double v, double t) {
    if (t != 0.0) return band_check(prefix + name, v, t, tol);
    return Check{prefix + name, v, -tol * scale, tol * scale, std::abs(v) <= tol * scale};
  };
  return {one("11", emp.a11, target.a11), one("12", emp.a12, target.a12), one("22", emp.a22, target.a22)};
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json vec_json(const Vec2& v) { return json::array({v[0], v[1]}); }

json moments_json(const Moments2& m) { return {{"n", m.n}, {"mean", vec_json(m.mean)}, {"covariance", to_json(m.cov)}}; }

json projection_json(const ProjectionStats& p) {
  return {{"variance", p.variance},
          {"expected", p.expected},
          {"ks_d", p.ks_d},
          {"ks_threshold", p.ks_threshold},
          {"ks_ok", p.ks_ok}};
}

json schedule_json(const Schedule& s) {
  json j{{"kind", to_string(s.kind)}, {"c", s.c}};
  if (s.kind == Schedule::Kind::Power) j["p"] = s.p;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

FieldSampler gaussian_sampler(const NearlyUnstableDesign& design, SizePoint size) {
  return FieldSampler(design.params_at(size.m), TriangleWindow::balanced(size.s), SimMethod::boundary_cholesky(),
                      InnovationDist::Gaussian);
}

}  // namespace

NearlyUnstableDesign parse_design(const json& j) {
  try {
    return parse_design_at(j, {});
  } catch (const FieldError& e) {
    throw Error(ErrorCode::InvalidConfig, (e.path.empty() ? "" : dotted(e.path) + ": ") + e.message);
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string what = e.what();
    // Drop nlohmann's "[json.exception.parse_error.N] " tag.
    if (const auto close = what.find("] "); what.rfind("[json.", 0) == 0 && close != std::string::npos)
      what = what.substr(close + 2);
    throw Error(ErrorCode::InvalidConfig, source + ":" + line_col(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + what);
  }
  try {
    ExperimentConfig c = config_from_json(j);
    check_config(c);
    return c;
  } catch (const FieldError& e) {
    throw Error(ErrorCode::InvalidConfig, source + ":" + line_col(text, locate(text, e.path)) + ": " + e.message);
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, path + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void validate_config(const ExperimentConfig& c) {
  try {
    check_config(c);
  } catch (const FieldError& e) {
    throw Error(ErrorCode::InvalidConfig, (e.path.empty() ? "" : dotted(e.path) + ": ") + e.message);
  }
}

json to_json(const Matrix2& m) { return json::array({json::array({m.a11, m.a12}), json::array({m.a21, m.a22})}); }

json to_json(const NearlyUnstableDesign& d) {
  return {{"alpha", d.boundary().alpha()},
          {"beta", d.boundary().beta()},
          {"gamma", schedule_json(d.gamma())},
          {"delta", schedule_json(d.delta())},
          {"case", to_string(d.case_tag())}};
}

json to_json(const ExperimentConfig& c) {
  json ladder = json::array();
  for (const SizePoint& sp : c.ladder) ladder.push_back(json::array({sp.m, sp.s}));
  json method = "auto";
  if (c.method) {
    method = {{"kind", to_string(c.method->kind)}};
    if (!c.method->uses_cholesky()) method["margin"] = c.method->margin;
  }
  return {{"design", to_json(c.design)},
          {"ladder", ladder},
          {"reps", c.reps},
          {"dist", to_string(c.dist)},
          {"method", method},
          {"seed", c.seed},
          {"tolerances", {{"cov_rel", c.tolerances.cov_rel}, {"zero_var", c.tolerances.zero_var}}},
          {"out_dir", c.out_dir}};
}

json to_json(const LimitLaw& law) {
  json j{{"case", to_string(law.case_tag)}, {"covariance", to_json(law.covariance)}, {"singular", law.singular}};
  if (law.case_tag == LimitCase::Boundary) {
    j["omega"] = std::isinf(law.omega) ? json(law.omega > 0 ? "+inf" : "-inf") : json(law.omega);
    j["theta"] = law.theta;
    j["omega_settled"] = law.omega_settled;
    j["normalized_only"] = law.normalized_only;
  }
  return j;
}

std::uint64_t replication_id(std::size_t ladder_index, std::size_t rep) noexcept {
  return (static_cast<std::uint64_t>(ladder_index) << 32) | static_cast<std::uint64_t>(rep);
}

Moments2 moments(const std::vector<Vec2>& xs) {
  Moments2 m;
  m.n = xs.size();
  if (xs.empty()) return m;
  const double n = static_cast<double>(xs.size());
  for (const Vec2& x : xs) {
    m.mean[0] += x[0];
    m.mean[1] += x[1];
  }
  m.mean[0] /= n;
  m.mean[1] /= n;
  if (xs.size() < 2) return m;
  double s11 = 0.0, s12 = 0.0, s22 = 0.0;
  for (const Vec2& x : xs) {
    const double d0 = x[0] - m.mean[0];
    const double d1 = x[1] - m.mean[1];
    s11 += d0 * d0;
    s12 += d0 * d1;
    s22 += d1 * d1;
  }
  m.cov = {s11 / (n - 1.0), s12 / (n - 1.0), s12 / (n - 1.0), s22 / (n - 1.0)};
  return m;
}

double ks_normal_statistic(std::vector<double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf((xs[i] - mean) / sd);
    d = std::max({d, static_cast<double>(i + 1) / static_cast<double>(n) - f, f - static_cast<double>(i) / static_cast<double>(n)});
  }
  return d;
}

double relative_frobenius(const Matrix2& a, const Matrix2& b) noexcept { return (a - b).frobenius() / b.frobenius(); }

bool elementwise_within(const Matrix2& a, const Matrix2& b, double tol) noexcept {
  const double scale = std::max({std::abs(b.a11), std::abs(b.a12), std::abs(b.a21), std::abs(b.a22)});
  const auto ok = [&](double x, double t) { return std::abs(x - t) <= tol * (t != 0.0 ? std::abs(t) : scale); };
  return ok(a.a11, b.a11) && ok(a.a12, b.a12) && ok(a.a21, b.a21) && ok(a.a22, b.a22);
}

ExperimentReport run_clt(const ExperimentConfig& config, ExecPolicy policy) {
  validate_config(config);
  long m_probe = 0;
  for (const SizePoint& sp : config.ladder) m_probe = std::max(m_probe, sp.m);

  ExperimentReport report{config, limit_law(config.design, m_probe), {}, false, {}, false};
  const LimitLaw& law = report.law;
  const bool boundary = law.case_tag == LimitCase::Boundary;

  for (std::size_t idx = 0; idx < config.ladder.size(); ++idx) {
    const SizePoint sp = config.ladder[idx];
    SizeReport sr;
    sr.size = sp;
    sr.params = config.design.params_at(sp.m);
    sr.rate = law.rate(sp.m, sp.s);
    sr.condition = condition_statistic(config.design, sp.m, sp.s);
    const TriangleWindow w = TriangleWindow::balanced(sp.s);
    const FieldSampler sampler(sr.params, w, config.method.value_or(default_method(sr.params, config.dist)), config.dist);
    sr.jitter = sampler.applied_jitter();
    const Matrix2 normalizer = boundary ? law.normalizer_at(sp.m) : Matrix2::identity();

    const auto start = std::chrono::steady_clock::now();
    sr.outcomes = run_replications<RepOutcome>(
        static_cast<std::size_t>(config.reps),
        [&](std::size_t r) {
          const RngStream stream(config.seed, replication_id(idx, r));
          const WindowSums sums = window_sums(sampler.sample(stream), w);
          RepOutcome out;
          out.det_b = det2(sums.B);
          if (is_singular_design(sums.B)) {
            out.singular = true;
            return out;
          }
          const EstimateResult est = solve_normal_equations(sums);
          out.alpha_hat = est.alpha_hat;
          out.beta_hat = est.beta_hat;
          out.scaled_error = {sr.rate * (est.alpha_hat - sr.params.alpha), sr.rate * (est.beta_hat - sr.params.beta)};
          out.normalized_error = normalizer * out.scaled_error;
          return out;
        },
        policy);
    sr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::vector<Vec2> errs;
    std::vector<Vec2> norm;
    for (const RepOutcome& o : sr.outcomes) {
      if (o.singular) {
        ++sr.singular_count;
        continue;
      }
      errs.push_back(o.scaled_error);
      norm.push_back(o.normalized_error);
    }
    if (static_cast<double>(sr.singular_count) > kSingularAbortFraction * static_cast<double>(config.reps)) {
      std::ostringstream msg;
      msg << sr.singular_count << " of " << config.reps << " replications at (m=" << sp.m << ", s=" << sp.s
          << ") had a singular design";
      throw Error(ErrorCode::SingularDesign, msg.str());
    }
    sr.reps_used = errs.size();
    sr.scaled = moments(errs);
    const Matrix2 limit = law.normalized_only ? Matrix2{} : law.covariance;
    sr.axis_sum = projection(errs, limit, 1.0);
    sr.axis_diff = projection(errs, limit, -1.0);
    if (boundary) sr.normalized = moments(norm);
    sr.deviation = law.normalized_only ? entrywise_deviation(sr.normalized->cov, Matrix2::identity())
                                       : entrywise_deviation(sr.scaled.cov, law.covariance);
    report.sizes.push_back(std::move(sr));
  }

  report.acceptance_evaluated = config.reps >= kMinAcceptanceReps;
  if (report.acceptance_evaluated) {
    const SizeReport& last = report.sizes.back();
    const double tol = config.tolerances.cov_rel;
    report.checks.push_back({"cholesky_jitter", last.jitter, 0.0, 0.0, last.jitter == 0.0});
    if (!boundary) {
      for (const auto* axis : {&last.axis_sum, &last.axis_diff}) {
        const std::string name = axis == &last.axis_sum ? "var_axis_sum" : "var_axis_diff";
        if (axis->expected <= 1e-12)
          report.checks.push_back(
              {name, axis->variance, 0.0, config.tolerances.zero_var, axis->variance < config.tolerances.zero_var});
        else
          report.checks.push_back(band_check(name, axis->variance, axis->expected, tol));
      }
    } else if (law.normalized_only) {
      for (Check& c : matrix_checks("normalized_cov", last.normalized->cov, Matrix2::identity(), tol))
        report.checks.push_back(std::move(c));
    } else {
      for (Check& c : matrix_checks("cov", last.scaled.cov, law.covariance, tol)) report.checks.push_back(std::move(c));
    }
  }
  report.pass = std::all_of(report.checks.begin(), report.checks.end(), [](const Check& c) { return c.pass; });
  return report;
}

json to_json(const ExperimentReport& r) {
  json sizes = json::array();
  for (const SizeReport& s : r.sizes) {
    json j{{"m", s.size.m},
           {"s", s.size.s},
           {"alpha_m", s.params.alpha},
           {"beta_m", s.params.beta},
           {"rate", s.rate},
           {"condition_statistic", s.condition},
           {"cholesky_jitter", s.jitter},
           {"reps_used", s.reps_used},
           {"singular_count", s.singular_count},
           {"scaled_error", moments_json(s.scaled)},
           {"limit_covariance", to_json(r.law.covariance)},
           {"deviation", to_json(s.deviation)},
           {"projections", {{"axis_sum", projection_json(s.axis_sum)}, {"axis_diff", projection_json(s.axis_diff)}}}};
    if (s.normalized) j["normalized_error"] = moments_json(*s.normalized);
    sizes.push_back(std::move(j));
  }
  json checks = json::array();
  for (const Check& c : r.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"lo", c.lo}, {"hi", c.hi}, {"pass", c.pass}});
  json acceptance{{"evaluated", r.acceptance_evaluated}, {"checks", checks}};
  if (!r.acceptance_evaluated)
    acceptance["note"] = "reps below " + std::to_string(kMinAcceptanceReps) + "; no statistical check made";
  return {{"config", to_json(r.config)},
          {"limit_law", to_json(r.law)},
          {"sizes", sizes},
          {"acceptance", acceptance},
          {"pass", r.pass}};
}

std::string report_text(const ExperimentReport& r) { return to_json(r).dump(2) + "\n"; }

std::string raw_csv_text(const SizeReport& s) {
  std::string out = "rep_id,alpha_hat,beta_hat,scaled_err_a,scaled_err_b\n";
  for (std::size_t r = 0; r < s.outcomes.size(); ++r) {
    const RepOutcome& o = s.outcomes[r];
    if (o.singular) continue;
    out += std::to_string(r) + "," + fmt17(o.alpha_hat) + "," + fmt17(o.beta_hat) + "," + fmt17(o.scaled_error[0]) +
           "," + fmt17(o.scaled_error[1]) + "\n";
  }
  return out;
}

std::string raw_csv_name(const SizeReport& s) {
  return "raw_m" + std::to_string(s.size.m) + "_s" + std::to_string(s.size.s) + ".csv";
}

std::string timing_text(const ExperimentReport& r) {
  json sizes = json::array();
  double total = 0.0;
  for (const SizeReport& s : r.sizes) {
    sizes.push_back({{"m", s.size.m}, {"s", s.size.s}, {"seconds", s.seconds}});
    total += s.seconds;
  }
  return json{{"workers", worker_count()}, {"sizes", sizes}, {"total_seconds", total}}.dump(2) + "\n";
}

void write_outputs(const ExperimentReport& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  write_text(base / "report.json", report_text(r));
  for (const SizeReport& s : r.sizes) write_text(base / raw_csv_name(s), raw_csv_text(s));
  write_text(base / "timing.json", timing_text(r));
}

Prop1Report verify_prop1(const NearlyUnstableDesign& design, const std::vector<SizePoint>& ladder) {
  if (ladder.empty()) throw Error(ErrorCode::InvalidConfig, "ladder must not be empty");
  long m_probe = 0;
  for (const SizePoint& sp : ladder) m_probe = std::max(m_probe, sp.m);
  Prop1Report r;
  r.target = information_limit(design, m_probe);
  for (const SizePoint& sp : ladder) {
    const Matrix2 scaled = information_scale(design, sp.m, sp.s) * expected_B(design.params_at(sp.m), sp.s);
    r.entries.push_back({sp, scaled, relative_frobenius(scaled, r.target)});
  }
  r.decreasing = true;
  for (std::size_t i = 1; i < r.entries.size(); ++i)
    r.decreasing = r.decreasing && r.entries[i].deviation < r.entries[i - 1].deviation;
  r.final_within = r.entries.back().deviation < kProp1Ceiling;
  r.pass = r.decreasing && r.final_within;
  return r;
}

CovlimReport verify_covlim(const NearlyUnstableDesign& design, long m, long n, const std::vector<CovlimProbe>& probes) {
  if (n < 1) throw Error(ErrorCode::OutOfRange, "probe scale n must be >= 1");
  const ModelParams p = design.params_at(m);
  const BoundaryPoint& bp = design.boundary();
  const double g = design.gamma_at(m);
  const double d = design.delta_at(m);
  CovlimReport r;
  r.m = m;
  r.n = n;
  if (design.case_tag() == LimitCase::Interior) {
    r.scale = std::sqrt(std::abs(g) + std::abs(d)) / std::sqrt(static_cast<double>(m));
    r.bound = 1.0 / std::sqrt(8.0 * std::abs(bp.alpha() * bp.beta()));
  } else {
    r.scale = std::sqrt(std::abs(g * g - d * d)) / static_cast<double>(m);
    r.bound = 0.5;
  }
  const CovKernel kernel(p);
  const auto lag_value = [&](const CovlimProbe& q, long scale) {
    const auto fl = [scale](double x) { return static_cast<long>(std::floor(static_cast<double>(scale) * x)); };
    const long dk = fl(q.t1) - fl(q.t2);
    const long dl = fl(q.s1) - fl(q.s2);
    if (std::abs(dk) > std::numeric_limits<int>::max() || std::abs(dl) > std::numeric_limits<int>::max())
      throw Error(ErrorCode::OutOfRange, "probe lag exceeds the int range");
    return r.scale * kernel.evaluate(static_cast<int>(dk), static_cast<int>(dl));
  };
  r.pass = true;
  for (const CovlimProbe& q : probes) {
    CovlimEntry e{q, q.t1 == q.t2 && q.s1 == q.s2, lag_value(q, n), lag_value(q, 2 * n), false};
    if (e.on_diagonal)
      e.pass = e.value_n <= r.bound * (1.0 + kOnDiagonalHeadroom);
    else
      e.pass = std::abs(e.value_2n) <= 0.5 * std::abs(e.value_n);
    r.pass = r.pass && e.pass;
    r.entries.push_back(e);
  }
  return r;
}

McCheckReport verify_detB(const NearlyUnstableDesign& design, SizePoint size, long reps, std::uint64_t seed,
                          ExecPolicy policy) {
  if (design.case_tag() != LimitCase::Interior)
    throw Error(ErrorCode::OutOfRange, "the det B check is defined for interior designs");
  if (reps < 1) throw Error(ErrorCode::InvalidConfig, "reps must be >= 1");
  const BoundaryPoint& bp = design.boundary();
  McCheckReport r;
  r.size = size;
  r.reps = reps;
  const double ds = static_cast<double>(size.s);
  r.scale = std::sqrt(std::abs(design.gamma_at(size.m)) + std::abs(design.delta_at(size.m))) /
            std::sqrt(static_cast<double>(size.m)) / (ds * ds * ds * ds);
  r.target_scalar = 2.0 * std::pow(8.0 * std::abs(bp.alpha() * bp.beta()), -1.5);
  r.target = Matrix2::symmetric(r.target_scalar, 0.0);
  const FieldSampler sampler = gaussian_sampler(design, size);
  const TriangleWindow w = TriangleWindow::balanced(size.s);
  const auto outs = run_replications<std::pair<double, bool>>(
      static_cast<std::size_t>(reps),
      [&](std::size_t rep) {
        const WindowSums sums = window_sums(sampler.sample(RngStream(seed, replication_id(0, rep))), w);
        return std::make_pair(r.scale * det2(sums.B), is_singular_design(sums.B));
      },
      policy);
  std::vector<Vec2> xs;
  for (const auto& [v, singular] : outs) {
    xs.push_back({v, 0.0});
    r.singular_count += singular ? 1 : 0;
  }
  r.moments = moments(xs);
  r.evaluated = size.s >= 64 && reps >= 500;
  r.pass = r.evaluated && std::abs(r.moments.mean[0] - r.target_scalar) <= kMcTolerance * r.target_scalar;
  return r;
}

McCheckReport verify_score(const NearlyUnstableDesign& design, SizePoint size, long reps, std::uint64_t seed,
                           ExecPolicy policy) {
  if (reps < 1) throw Error(ErrorCode::InvalidConfig, "reps must be >= 1");
  McCheckReport r;
  r.size = size;
  r.reps = reps;
  r.scale = std::sqrt(information_scale(design, size.m, size.s));
  r.target = information_limit(design, size.m);
  const FieldSampler sampler = gaussian_sampler(design, size);
  const TriangleWindow w = TriangleWindow::balanced(size.s);
  const auto xs = run_replications<Vec2>(
      static_cast<std::size_t>(reps),
      [&](std::size_t rep) {
        const Field f = sampler.sample(RngStream(seed, replication_id(0, rep)));
        const Vec2 a = score_vector(f, w);
        return Vec2{r.scale * a[0], r.scale * a[1]};
      },
      policy);
  r.moments = moments(xs);
  r.evaluated = size.s >= 128 && reps >= 1000;
  r.pass = r.evaluated && elementwise_within(r.moments.cov, r.target, kMcTolerance);
  return r;
}

CovGridReport verify_cov_grid(const std::vector<double>& grid, int kmax, int yw_max, double agree_tol,
                              double identity_tol, ExecPolicy policy) {
  std::vector<ModelParams> points;
  for (double a : grid)
    for (double b : grid)
      if (a * b != 0.0 && std::abs(a) + std::abs(b) <= 0.9 + 1e-12) points.push_back({a, b});

  struct PointResult {
    double gap = 0.0;
    double yw = 0.0;
    double origin = 0.0;
    std::string worst;
  };
  const auto results = run_replications<PointResult>(
      points.size(),
      [&](std::size_t idx) {
        const ModelParams p = points[idx];
        const int margin = margin_for_tolerance(p.radius(), 1e-3 * agree_tol);
        PointResult out;
        for (int k = -kmax; k <= kmax; ++k)
          for (int l = -kmax; l <= kmax; ++l) {
            const double c = cov_closed(p, k, l);
            double g = std::max(std::abs(cov_f4(p, k, l) - c), std::abs(cov_series_oracle(p, k, l, margin) - c));
            if (static_cast<long long>(k) * l >= 0) g = std::max(g, std::abs(cov_binrep(p, k, l) - c));
            if (g > out.gap) {
              out.gap = g;
              std::ostringstream w;
              w << "(" << p.alpha << "," << p.beta << ") lag (" << k << "," << l << ")";
              out.worst = w.str();
            }
          }
        const CovKernel kernel(p);
        for (int k = -yw_max; k <= yw_max; ++k)
          for (int l = -yw_max; l <= yw_max; ++l)
            if (k >= 1 || l >= 1)
              out.yw = std::max(out.yw, std::abs(kernel(k, l) - p.alpha * kernel(k - 1, l) - p.beta * kernel(k, l - 1)));
        out.origin = std::abs(kernel(0, 0) - p.alpha * kernel(-1, 0) - p.beta * kernel(0, -1) - 1.0);
        return out;
      },
      policy);

  CovGridReport r;
  r.points = points.size();
  for (const PointResult& pr : results) {
    if (pr.gap >= r.max_method_gap) {
      r.max_method_gap = pr.gap;
      r.worst = pr.worst;
    }
    r.max_yule_walker = std::max(r.max_yule_walker, pr.yw);
    r.max_origin = std::max(r.max_origin, pr.origin);
  }
  r.pass = !points.empty() && r.max_method_gap <= agree_tol && r.max_yule_walker <= identity_tol &&
           r.max_origin <= identity_tol;
  return r;
}

json to_json(const Prop1Report& r) {
  json entries = json::array();
  for (const Prop1Entry& e : r.entries)
    entries.push_back({{"m", e.size.m}, {"s", e.size.s}, {"scaled", to_json(e.scaled)}, {"deviation", e.deviation}});
  return {{"target", to_json(r.target)},
          {"entries", entries},
          {"decreasing", r.decreasing},
          {"final_within", r.final_within},
          {"pass", r.pass}};
}

json to_json(const CovlimReport& r) {
  json entries = json::array();
  for (const CovlimEntry& e : r.entries)
    entries.push_back({{"t1", e.probe.t1},
                       {"s1", e.probe.s1},
                       {"t2", e.probe.t2},
                       {"s2", e.probe.s2},
                       {"on_diagonal", e.on_diagonal},
                       {"value_n", e.value_n},
                       {"value_2n", e.value_2n},
                       {"pass", e.pass}});
  return {{"m", r.m}, {"n", r.n}, {"scale", r.scale}, {"bound", r.bound}, {"entries", entries}, {"pass", r.pass}};
}

json to_json(const McCheckReport& r) {
  return {{"m", r.size.m},
          {"s", r.size.s},
          {"reps", r.reps},
          {"singular_count", r.singular_count},
          {"scale", r.scale},
          {"moments", moments_json(r.moments)},
          {"target", to_json(r.target)},
          {"evaluated", r.evaluated},
          {"pass", r.pass}};
}

json to_json(const CovGridReport& r) {
  return {{"points", r.points},
          {"max_method_gap", r.max_method_gap},
          {"max_yule_walker", r.max_yule_walker},
          {"max_origin", r.max_origin},
          {"worst", r.worst},
          {"pass", r.pass}};
}

}  // namespace nusar
