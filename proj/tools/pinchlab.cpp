// pinchlab: command-line driver for scenarios, suites and the certificate.
//
//   pinchlab run <config.toml> [--out DIR]
//   pinchlab suite <quick|full|acceptance> [--workers N] [--out DIR]
//   pinchlab certify [--samples N] [--seed S]
//   pinchlab list-scenarios [--json]
//
// Exit codes: 0 pass, 2 config, 3 hypothesis, 4 assertion, 5 internal.

#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "pinchlab/acceptance.hpp"
#include "pinchlab/certificate.hpp"
#include "pinchlab/errors.hpp"
#include "pinchlab/experiment.hpp"

namespace ex = pinchlab::experiment;

namespace {

int code(ex::ExitCode c) { return static_cast<int>(c); }

void print_run(const ex::RunRecord& rec) {
  std::cout << rec.scenario << " [" << rec.hash.substr(0, 12) << "] exit " << code(rec.exit) << " ("
            << rec.wall_seconds << " s)\n";
  for (const auto& a : rec.assertions)
    std::cout << "  " << (a.passed ? "ok   " : "FAIL ") << a.name << ": " << a.detail << '\n';
  if (!rec.error.empty()) std::cout << "  error: " << rec.error << '\n';
  std::cout << "  output: " << rec.directory.generic_string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linearized Ricci flow pinching experiments"};
  app.require_subcommand(1);

  std::string out_dir;
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one scenario from a TOML config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output root (default $PINCHLAB_OUT or ./runs)");

  std::string tier;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  auto* suite = app.add_subcommand("suite", "Run a scenario tier: quick, full or acceptance");
  suite->add_option("tier", tier, "Tier name")->required();
  suite->add_option("--workers", workers, "Concurrent scenarios")->check(CLI::PositiveNumber);
  suite->add_option("--out", out_dir, "Output root (default $PINCHLAB_OUT or ./runs)");

  pinchlab::cert::SamplingPlan plan;
  auto* certify = app.add_subcommand("certify", "Sample the quartic certificate and print a JSON report");
  certify->add_option("--samples", plan.samples, "Number of random points");
  certify->add_option("--seed", plan.seed, "Random seed");

  bool as_json = false;
  auto* list = app.add_subcommand("list-scenarios", "List registered scenarios");
  list->add_flag("--json", as_json, "Print resolved configs as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ex::ExitCode::Config);
  }

  const std::filesystem::path root = out_dir.empty() ? ex::output_root() : std::filesystem::path(out_dir);
  try {
    if (*run) {
      const auto scenario = ex::load_config(config_path);
      const auto rec = ex::execute(scenario, root);
      print_run(rec);
      return code(rec.exit);
    }
    if (*suite) {
      const auto res = ex::run_suite(tier, root, workers);
      if (tier == "acceptance") {
        for (const auto& c : res.summary["criteria"])
          std::cout << (c["passed"].get<bool>() ? "[PASS] " : "[FAIL] ") << "criterion " << c["id"] << ": "
                    << c["title"].get<std::string>() << ": " << c["detail"].get<std::string>() << '\n';
      } else {
        for (const auto& r : res.runs) print_run(r);
      }
      std::cout << "suite " << tier << ": " << (res.summary["passed"].get<bool>() ? "passed" : "FAILED")
                << " (summary " << (root / ("suite-" + tier + ".json")).generic_string() << ")\n";
      return code(res.exit);
    }
    if (*certify) {
      if (plan.samples == 0) throw pinchlab::ConfigError("--samples must be positive");
      plan.workers = std::max(1u, std::thread::hardware_concurrency());
      const auto rep = pinchlab::cert::certify(plan);
      std::cout << pinchlab::cert::to_json(rep).dump(2) << '\n';
      return rep.status == "violated" ? code(ex::ExitCode::Assertion) : 0;
    }
    if (*list) {
      if (as_json) {
        nlohmann::json all = nlohmann::json::array();
        for (const auto& s : ex::registry()) all.push_back(ex::to_json(s));
        std::cout << all.dump(2) << '\n';
      } else {
        for (const auto& s : ex::registry())
          std::cout << s.name << "  [" << ex::to_string(s.kind) << ", " << s.group << "]  " << s.description << '\n';
      }
      return 0;
    }
  } catch (const pinchlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return code(ex::ExitCode::Config);
  } catch (const pinchlab::HypothesisError& e) {
    std::cerr << "hypothesis violated: " << e.what() << '\n';
    return code(ex::ExitCode::Hypothesis);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return code(ex::ExitCode::Internal);
  }
  return code(ex::ExitCode::Internal);
}
