#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hypokin/cauchy.hpp"
#include "hypokin/holder.hpp"
#include "hypokin/sde.hpp"

namespace hypokin {

/// Problem definition as written in a suite file; built lazily so that a structural
/// failure can be reported instead of thrown.
struct ProblemSpec {
  int d = 1;
  MatX B;  // empty means the Langevin drift in dimension 2d
  double T = 1.0;
  double alpha = 0.25;
  nlohmann::json coefficients = {{"family", "constant"}};
  nlohmann::json datum = {{"family", "zero"}};
  nlohmann::json source = {{"family", "zero"}};

  MatX drift() const;
  /// Throws HormanderViolation / NotCanonicalForm for bad B.
  CauchyProblem build() const;
};

struct SuiteConfig {
  std::string name = "unnamed";
  ProblemSpec problem;
  std::vector<double> ladder{0.4, 0.2, 0.1, 0.05, 0.025};  // T - t, shrinking toward T
  std::vector<Vec> x_probes;
  std::vector<double> oracle_times{0.0, 0.5};
  SolverConfig solver;
  SdeConfig sde;
  SamplerSpec sampler;
  std::vector<std::string> stages{"structure", "kernel", "potential", "oracle", "holder", "taylor"};
  std::string out_dir = "out";
  std::vector<std::string> formats{"json", "csv", "md"};

  void validate() const;
  bool runs(const std::string& stage) const;
};

SuiteConfig parse_suite_config(const nlohmann::json& j);
SuiteConfig load_suite_config(const std::string& path);

/// One verification record. `relation` is "le" (measured <= target), "ge"
/// (measured >= target - tolerance) or "within" (|measured - target| <= tolerance).
struct CheckRecord {
  std::string stage;
  std::string name;
  double measured = 0.0;  // NaN when the check raised
  double target = 0.0;
  double tolerance = 0.0;
  std::string relation = "le";
  bool pass = false;
  bool mandatory = true;
  std::string note;
};

struct VerificationReport {
  std::string suite;
  nlohmann::json environment;  // seed and node counts; wall time is kept out of json
  std::vector<CheckRecord> checks;
  std::vector<std::string> skipped_stages;
  double wall_seconds = 0.0;

  bool pass() const;
  void add(CheckRecord r);
};

void to_json(nlohmann::json& j, const CheckRecord& r);
void from_json(const nlohmann::json& j, CheckRecord& r);
void to_json(nlohmann::json& j, const VerificationReport& r);
void from_json(const nlohmann::json& j, VerificationReport& r);

struct BlowupFit {
  double slope = 0.0;
  double residual = 0.0;
  bool unreliable = false;  // residual above 0.3 log units
};

/// Least-squares slope of log(norm) against log(T - t); needs at least 4 pairs.
BlowupFit fit_blowup_exponent(const std::vector<std::pair<double, double>>& pairs);

/// Closed-form solution for constant coefficients with a1 = a0 = 0, f = 0 and a
/// trig or affine datum; empty levels otherwise.
SampledField closed_form_solution(const CauchyProblem& pb);

/// Runs the enabled stages in order; module errors become failed checks.
VerificationReport run_verification_suite(const SuiteConfig& cfg);

enum class ReportFormat { Json, Csv, Markdown };

/// Writes one format to `path`; throws IoError when the file cannot be written.
void emit_report(const VerificationReport& report, ReportFormat format, const std::string& path);
/// report.json, tables.csv and report.md under `dir` for the requested formats.
void emit_reports(const VerificationReport& report, const std::string& dir,
                  const std::vector<std::string>& formats);

}  // namespace hypokin
