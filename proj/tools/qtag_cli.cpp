// qtag: deterministic simulator for relativistic position authentication of
// a tag holding secret classical data.
//
// Subcommands:
//   run       execute an experiment from a scenario config
//   replay    re-execute a trace and verify it record by record
//   validate  check a scenario config and report all problems

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qtag/qtag.hpp"

namespace {

// Exit codes: 0 success, 2 config validation failure, 3 internal invariant
// violation (e.g. a causality abort in a supposedly-valid strategy).
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInvariant = 3;

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::strtoull(v, nullptr, 10);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum tagging protocol simulator"};
  app.require_subcommand(1);

  std::string config_path, trace_path, out_trace, format = "table";
  std::optional<std::uint64_t> seed_flag, trials_flag;
  std::optional<int> workers_flag;

  auto* run = app.add_subcommand("run", "run an experiment from a scenario config");
  run->add_option("config", config_path, "scenario config file (JSON)")->required();
  run->add_option("--seed", seed_flag, "override experiment.seed");
  run->add_option("--trials", trials_flag, "override experiment.trials");
  run->add_option("--workers", workers_flag, "override experiment.workers");
  run->add_option("--format", format, "report format: table | records")
      ->check(CLI::IsMember({"table", "records"}));
  run->add_option("--trace", out_trace, "write a replayable trace to this file");

  auto* replay = app.add_subcommand("replay", "re-execute and verify a trace");
  replay->add_option("trace", trace_path, "trace file produced by run --trace")->required();

  auto* validate = app.add_subcommand("validate", "validate a scenario config");
  validate->add_option("config", config_path, "scenario config file (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      try {
        (void)qtag::load_config(config_path);
      } catch (const qtag::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
      }
      std::cout << "config ok\n";
      return kExitOk;
    }

    if (run->parsed()) {
      qtag::Scenario sc;
      try {
        sc = qtag::load_config(config_path);
      } catch (const qtag::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
      }
      if (auto s = env_u64("QTAG_SEED")) sc.experiment.seed = *s;
      if (auto w = env_u64("QTAG_WORKERS")) sc.experiment.workers = static_cast<int>(*w);
      if (seed_flag) sc.experiment.seed = *seed_flag;
      if (trials_flag) sc.experiment.trials = *trials_flag;
      if (workers_flag) sc.experiment.workers = *workers_flag;

      if (!out_trace.empty()) {
        qtag::TracedRun traced = qtag::run_traced(sc);
        std::ofstream os(out_trace);
        if (!os) {
          std::cerr << "cannot write trace file: " << out_trace << "\n";
          return 1;
        }
        qtag::write_trace(traced, os);
      }
      qtag::ExperimentReport rep = qtag::run_experiment(sc);
      qtag::emit_report(rep, format == "records" ? qtag::ReportFormat::Records
                                                 : qtag::ReportFormat::Table,
                        std::cout);
      return kExitOk;
    }

    if (replay->parsed()) {
      std::ifstream in(trace_path);
      if (!in) {
        std::cerr << "cannot open trace file: " << trace_path << "\n";
        return 1;
      }
      qtag::ReplayReport rep = qtag::replay_trace(in);
      if (!rep.error.empty()) {
        std::cerr << "replay failed: " << rep.error << "\n";
        return 1;
      }
      if (!rep.equal)
        std::cout << "divergence at record " << *rep.first_divergence << "\n";
      for (const auto& v : rep.causality_violations)
        std::cout << "causality audit: " << v << "\n";
      if (rep.ok()) {
        std::cout << "trace verified: records equal, causality audit clean\n";
        return kExitOk;
      }
      return 1;
    }
  } catch (const qtag::CausalityViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const qtag::CapabilityViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
