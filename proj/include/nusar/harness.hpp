#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nusar/limits.hpp"
#include "nusar/replicate.hpp"
#include "nusar/rng.hpp"
#include "nusar/simulate.hpp"

namespace nusar {

struct SizePoint {
  long m = 1;
  int s = 1;

  friend bool operator==(const SizePoint&, const SizePoint&) = default;
};

struct Tolerances {
  /// Relative tolerance for covariance entries (and the nonzero eigenvalue).
  double cov_rel = 0.3;
  /// Ceiling for the variance along a direction whose limit variance is 0.
  double zero_var = 0.05;
};

/// Below this many replications no statistical acceptance check is made.
inline constexpr long kMinAcceptanceReps = 100;

struct ExperimentConfig {
  NearlyUnstableDesign design{BoundaryPoint(0.5, 1), Schedule::constant(1.0), Schedule::constant(1.0)};
  std::vector<SizePoint> ladder;
  long reps = 0;
  InnovationDist dist = InnovationDist::Gaussian;
  /// Unset: default_method() per ladder size.
  std::optional<SimMethod> method;
  std::uint64_t seed = 0;
  Tolerances tolerances;
  std::string out_dir;
};

/// Parses and validates a config. Every error is InvalidConfig with a
/// "source:line:col: " prefix pointing into `text`.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);
/// Throws InvalidConfig when the config breaks an invariant.
void validate_config(const ExperimentConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);

/// Replication r at ladder position i uses stream (seed, i << 32 | r).
std::uint64_t replication_id(std::size_t ladder_index, std::size_t rep) noexcept;

struct Moments2 {
  Vec2 mean{};
  /// Sample covariance (n - 1 denominator).
  Matrix2 cov;
  std::size_t n = 0;
};

/// Ordered accumulation, so the result depends only on the input order.
Moments2 moments(const std::vector<Vec2>& xs);

/// sup |F_n - Phi| of the standardized sample.
double ks_normal_statistic(std::vector<double> xs);

/// ||a - b||_F / ||b||_F.
double relative_frobenius(const Matrix2& a, const Matrix2& b) noexcept;

/// |a - b| <= tol |b| entrywise; zero entries of b use tol max|b|.
bool elementwise_within(const Matrix2& a, const Matrix2& b, double tol) noexcept;

struct ProjectionStats {
  double variance = 0.0;
  double expected = 0.0;
  double ks_d = 0.0;
  double ks_threshold = 0.0;
  bool ks_ok = false;
};

struct RepOutcome {
  bool singular = false;
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  Vec2 scaled_error{};
  Vec2 normalized_error{};
  double det_b = 0.0;
};

struct SizeReport {
  SizePoint size;
  ModelParams params;
  double rate = 0.0;
  double condition = 0.0;
  double jitter = 0.0;
  std::size_t reps_used = 0;
  std::size_t singular_count = 0;
  Moments2 scaled;
  /// Along (1,1)/sqrt2 and (1,-1)/sqrt2, the principal axes of every limit.
  ProjectionStats axis_sum;
  ProjectionStats axis_diff;
  std::optional<Moments2> normalized;
  Matrix2 deviation;
  std::vector<RepOutcome> outcomes;
  double seconds = 0.0;
};

struct Check {
  std::string name;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool pass = false;
};

struct ExperimentReport {
  ExperimentConfig config;
  LimitLaw law;
  std::vector<SizeReport> sizes;
  bool acceptance_evaluated = false;
  std::vector<Check> checks;
  bool pass = false;
};

ExperimentReport run_clt(const ExperimentConfig& config, ExecPolicy policy = ExecPolicy::OpenMP);

nlohmann::json to_json(const ExperimentReport& r);
/// 2-space JSON with a trailing newline; identical inputs give identical bytes.
std::string report_text(const ExperimentReport& r);
/// rep_id,alpha_hat,beta_hat,scaled_err_a,scaled_err_b; singular reps omitted.
std::string raw_csv_text(const SizeReport& s);
std::string raw_csv_name(const SizeReport& s);
std::string timing_text(const ExperimentReport& r);
/// Writes report.json, one raw CSV per size and timing.json into dir.
void write_outputs(const ExperimentReport& r, const std::string& dir);

struct Prop1Entry {
  SizePoint size;
  Matrix2 scaled;
  double deviation = 0.0;
};

struct Prop1Report {
  Matrix2 target;
  std::vector<Prop1Entry> entries;
  bool decreasing = false;
  bool final_within = false;
  bool pass = false;
};

/// information_scale * expected_B along the ladder against information_limit.
/// Passes iff the relative Frobenius deviation strictly decreases and ends
/// below 10%.
Prop1Report verify_prop1(const NearlyUnstableDesign& design, const std::vector<SizePoint>& ladder);

/// Two points of the scaled domain; the lattice lag at scale n is
/// (floor(n t1) - floor(n t2), floor(n s1) - floor(n s2)).
struct CovlimProbe {
  double t1 = 0.0;
  double s1 = 0.0;
  double t2 = 0.0;
  double s2 = 0.0;
};

struct CovlimEntry {
  CovlimProbe probe;
  bool on_diagonal = false;
  double value_n = 0.0;
  double value_2n = 0.0;
  bool pass = false;
};

struct CovlimReport {
  long m = 0;
  long n = 0;
  double scale = 0.0;
  double bound = 0.0;
  std::vector<CovlimEntry> entries;
  bool pass = false;
};

/// Scaled covariance scale * R(lag), scale = (|g|+|d|)^(1/2) m^(-1/2) in the
/// interior and |g^2-d^2|^(1/2) m^(-1) on the boundary. Zero lags must stay
/// below (8|a||b|)^(-1/2) resp. 1/2 times (1 + 1e-6); other probes must at
/// least halve from n to 2n.
CovlimReport verify_covlim(const NearlyUnstableDesign& design, long m, long n, const std::vector<CovlimProbe>& probes);

struct McCheckReport {
  SizePoint size;
  long reps = 0;
  std::size_t singular_count = 0;
  double scale = 0.0;
  Moments2 moments;
  Matrix2 target;
  double target_scalar = 0.0;
  bool evaluated = false;
  bool pass = false;
};

/// Mean of s^-4 m^-1/2 (|g|+|d|)^1/2 det B against 2 (8|a||b|)^(-3/2), interior
/// designs only. Evaluated (20%) when s >= 64 and reps >= 500.
McCheckReport verify_detB(const NearlyUnstableDesign& design, SizePoint size, long reps, std::uint64_t seed,
                          ExecPolicy policy = ExecPolicy::OpenMP);

/// Sample covariance of sqrt(information_scale) A against information_limit.
/// Evaluated (20% elementwise) when s >= 128 and reps >= 1000.
McCheckReport verify_score(const NearlyUnstableDesign& design, SizePoint size, long reps, std::uint64_t seed,
                           ExecPolicy policy = ExecPolicy::OpenMP);

struct CovGridReport {
  std::size_t points = 0;
  double max_method_gap = 0.0;
  double max_yule_walker = 0.0;
  double max_origin = 0.0;
  std::string worst;
  bool pass = false;
};

/// Four-way agreement (closed, F4, binomial in its quadrant, series oracle)
/// for |k|,|l| <= kmax, plus the Yule-Walker and origin identities for
/// |k|,|l| <= yw_max, over every grid pair with |a| + |b| <= 0.9.
CovGridReport verify_cov_grid(const std::vector<double>& grid, int kmax, int yw_max, double agree_tol = 1e-8,
                              double identity_tol = 1e-10, ExecPolicy policy = ExecPolicy::OpenMP);

nlohmann::json to_json(const Prop1Report& r);
nlohmann::json to_json(const CovlimReport& r);
nlohmann::json to_json(const McCheckReport& r);
nlohmann::json to_json(const CovGridReport& r);
nlohmann::json to_json(const LimitLaw& law);
nlohmann::json to_json(const NearlyUnstableDesign& d);
nlohmann::json to_json(const Matrix2& m);

/// Parses the "design" object of a config (also accepted on its own).
NearlyUnstableDesign parse_design(const nlohmann::json& j);

}  // namespace nusar
