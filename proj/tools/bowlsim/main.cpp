#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "bowlsim/config.hpp"
#include "bowlsim/error.hpp"
#include "bowlsim/pipeline.hpp"
#include "ws_server.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDesign = 3;

bowlsim::SessionConfig config_or_default(const std::string& path) {
  return path.empty() ? bowlsim::parse_config("") : bowlsim::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ball-in-bowl task simulator, analysis pipeline and live session server"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string in_dir;
  int subjects_per_group = 6;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool per_trial_spectra = false;
  std::uint16_t port = 8080;

  auto* simulate = app.add_subcommand("simulate", "Run the full protocol for a synthetic cohort");
  simulate->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  simulate->add_option("--out", out_dir, "Output archive directory")->required();
  simulate->add_option("--subjects-per-group", subjects_per_group, "Synthetic subjects per group")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Cohort seed");
  simulate->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* analyze = app.add_subcommand("analyze", "Compute metrics, spectra and ANOVA tables from an archive");
  analyze->add_option("--in", in_dir, "Trial-log archive directory")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--out", out_dir, "Directory for the CSV outputs")->required();
  analyze->add_flag("--per-trial-spectra", per_trial_spectra, "Also write every trial's spectrum");
  analyze->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* serve = app.add_subcommand("serve", "Host a live session over WebSocket");
  serve->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port");

  auto* protocol = app.add_subcommand("protocol", "Print the randomised trial order for a seed");
  protocol->add_option("--seed", seed, "Protocol seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) {
      const bowlsim::SessionConfig config = config_or_default(config_path);
      bowlsim::CohortSpec spec;
      spec.subjects_per_group = subjects_per_group;
      spec.seed = seed;
      spec.threads = threads;
      const bowlsim::Manifest m = bowlsim::simulate_cohort_to(config, spec, out_dir);
      std::size_t invalid = 0;
      for (const auto& t : m.trials) invalid += t.valid ? 0 : 1;
      std::cout << fmt::format("wrote {} trial logs to {} ({} invalid)\n", m.trials.size(), out_dir, invalid);
      return 0;
    }
    if (*analyze) {
      bowlsim::AnalyzeOptions options;
      options.per_trial_spectra = per_trial_spectra;
      options.threads = threads;
      const bowlsim::AnalysisOutputs out = bowlsim::analyze_archive(in_dir, out_dir, options);
      for (const std::string& w : out.warnings) std::cerr << "warning: " << w << '\n';
      std::size_t tables = 0;
      for (const auto& [metric, t] : out.anova) tables += t.empty() ? 0 : 1;
      std::cout << fmt::format("analysed {} trials; {} ANOVA tables written to {}\n", out.records.size(), tables,
                               out_dir);
      return out.design_error ? kExitDesign : 0;
    }
    if (*serve) {
      return bowlsim::server::run_server(config_or_default(config_path), port);
    }
    if (*protocol) {
      std::cout << bowlsim::protocol_table(seed);
      return 0;
    }
  } catch (const bowlsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
