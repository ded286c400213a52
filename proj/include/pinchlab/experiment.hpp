#pragma once

// Experiment driver: scenario registry, TOML configuration, run execution and
// result emission under runs/<scenario>/<hash>/.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pinchlab/certificate.hpp"
#include "pinchlab/linearization.hpp"
#include "pinchlab/ode.hpp"
#include "pinchlab/warped.hpp"

namespace pinchlab::experiment {

enum class ExitCode : int { Pass = 0, Config = 2, Hypothesis = 3, Assertion = 4, Internal = 5 };

enum class Kind { Homogeneous, Warped, Certificate, Variation, Proposition };

std::string to_string(Kind k);
/// Throws ConfigError.
Kind kind_from_string(const std::string& s);

struct Scenario {
  std::string name;
  std::string description;
  Kind kind = Kind::Homogeneous;
  std::string group = "full";  // "quick" or "full"

  // Homogeneous geometry.
  std::string milnor_class = "su2";
  std::array<double, 3> metric{1.0, 1.0, 1.0};

  // Warped geometry: f = 1 (times 1 + 0.05 sin x for "generic"),
  // psi = radius (1 + amplitude cos x).
  std::string profile = "perturbed-cylinder";  // cylinder | perturbed-cylinder | generic
  double radius = 1.0;
  double amplitude = 0.1;
  std::size_t grid = 128;

  // Initial h: rc | metric | custom | random. For warped kinds, custom h is
  // given by Fourier coefficients [c0, cos1, sin1, cos2, sin2, ...] of alpha
  // and beta. For proposition runs alpha and beta are the relative variations
  // of f and psi along the family.
  std::string h_recipe = "rc";
  std::vector<double> h_coefficients;  // homogeneous custom: (a, b, c)
  std::vector<double> h_alpha;
  std::vector<double> h_beta;
  std::optional<std::uint64_t> h_seed;
  double h_scale = 1.0;

  double rho = 0.0;
  double horizon = 0.1;

  ode::Controls ode{};
  double blowup_factor = 1e8;
  warped::RunControls warped{};
  cert::SamplingPlan plan{};

  std::vector<double> s_values{1e-2, 5e-3};
  linearization::Scheme scheme = linearization::Scheme::Central;
  double proposition_cfl_safety = 0.5;
  double gap_tolerance = 1e-2;

  // Assertions beyond the pinching bound.
  std::optional<double> expect_phi;
  double phi_tolerance = 1e-8;
  std::optional<double> expect_rc_gap;
  bool expect_first_order = false;  // gap ratio 2 +- 0.2 under each s halving
  int expect_exit = 0;

  /// Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const Scenario& s);

/// Registered scenarios in a fixed order.
const std::vector<Scenario>& registry();
/// Throws ConfigError for unknown names.
const Scenario& find_scenario(const std::string& name);

/// Parses TOML text. A top-level `scenario = "<name>"` selects a registered
/// base; every other key overrides it. Unknown keys are ConfigErrors.
Scenario parse_config(const std::string& toml_text, const std::string& source = "<config>");
Scenario load_config(const std::filesystem::path& path);

/// Git blob hash (SHA-1 of "blob <len>\0" + content), lowercase hex.
std::string git_blob_hash(const std::string& content);

/// Hash of the resolved configuration.
std::string config_hash(const Scenario& s);

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunRecord {
  std::string scenario;
  nlohmann::json config;
  std::string hash;
  std::filesystem::path directory;
  std::vector<std::filesystem::path> outputs;
  std::vector<Assertion> assertions;
  nlohmann::json results;
  double wall_seconds = 0.0;
  ExitCode exit = ExitCode::Pass;
  std::string error;
};

nlohmann::json to_json(const RunRecord& r);

/// $PINCHLAB_OUT if set, else "runs".
std::filesystem::path output_root();

/// Executes a validated scenario and writes its outputs under
/// root/<name>/<hash>/. Never throws: failures are reported through `exit`
/// and `error`, and summary.json is written in every case.
RunRecord execute(const Scenario& s, const std::filesystem::path& root);

struct SuiteResult {
  std::string tier;
  std::vector<RunRecord> runs;
  nlohmann::json summary;
  ExitCode exit = ExitCode::Pass;
};

/// Tiers: "quick", "full", "acceptance". Runs concurrently on up to `workers`
/// threads and writes root/suite-<tier>.json. Throws ConfigError for unknown tiers.
SuiteResult run_suite(const std::string& tier, const std::filesystem::path& root, unsigned workers);

}  // namespace pinchlab::experiment
