// fmm: command-line driver. The summary record goes to stdout, progress to
// stderr. Exit codes: 0 ok, 1 selftest failures, 2 bad config, 3 numerical
// or domain error, 4 anything else.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fmm/error.hpp"
#include "fmm/experiment.hpp"

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
  std::cout << fmm::error_record(kind, message).dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fractional-moment experiments for 1D Anderson models"};
  std::string subcommand;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool print_defaults = false;

  app.add_option("command", subcommand, "lyapunov | floquet | moments | apriori | correlator | green-probe | selftest")
      ->check(CLI::IsMember(fmm::subcommand_names()));
  app.add_option("--subcommand", subcommand, "same as the positional argument")
      ->check(CLI::IsMember(fmm::subcommand_names()));
  app.add_option("-c,--config", config_path, "JSON config; missing keys take defaults")->check(CLI::ExistingFile);
  app.add_option("-s,--seed", seed, "overrides master_seed");
  app.add_option("-w,--workers", workers, "overrides workers")->check(CLI::PositiveNumber);
  app.add_option("-o,--out", out_dir, "output directory");
  app.add_flag("--print-defaults", print_defaults, "print the default config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("SchemaViolation", e.what(), 2);
  }

  if (print_defaults) {
    std::cout << fmm::default_config().dump(2) << std::endl;
    return 0;
  }
  if (subcommand.empty()) return fail("SchemaViolation", "no subcommand given", 2);

  try {
    nlohmann::json user = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        user = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        return fail("SchemaViolation", config_path + ": " + e.what(), 2);
      }
    }
    if (user.is_object()) {
      if (seed) user["master_seed"] = *seed;
      if (workers) user["workers"] = *workers;
    }
    const auto result = fmm::run_experiment(subcommand, user, out_dir, &std::cerr);
    std::cout << result.manifest.dump() << std::endl;
    if (subcommand == "selftest" && result.manifest["summary"].value("failed_suites", 0) > 0) return 1;
    return 0;
  } catch (const fmm::Error& e) {
    const bool config = e.kind() == fmm::ErrorKind::SchemaViolation || e.kind() == fmm::ErrorKind::InvalidSpec;
    return fail(std::string(fmm::to_string(e.kind())), e.what(), config ? 2 : 3);
  } catch (const std::exception& e) {
    return fail("Internal", e.what(), 4);
  }
}
