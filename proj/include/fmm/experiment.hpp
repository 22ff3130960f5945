#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fmm/model.hpp"
#include "json.hpp"

namespace fmm {

inline constexpr int kSchemaVersion = 1;

/// Subcommands understood by run_experiment.
const std::vector<std::string>& subcommand_names();

/// The full configuration with every default filled in.
nlohmann::json default_config();

/// Overlays `user` on the defaults. Unknown keys and wrongly typed values
/// throw SchemaViolation; the result is the resolved config.
nlohmann::json resolve_config(const nlohmann::json& user);

ModelSpec model_from_json(const nlohmann::json& model);
nlohmann::json model_to_json(const ModelSpec& spec);

/// %.17g
std::string format_double(double v);

struct RunResult {
  nlohmann::json manifest;
  std::vector<std::filesystem::path> outputs;
};

/// Runs one subcommand with a resolved config, writing <name>.csv (plus
/// <name>.fit.csv where a decay fit applies) and <name>.manifest.json into
/// out_dir. Progress lines go to `progress` when given.
RunResult run_experiment(const std::string& subcommand, const nlohmann::json& config,
                         const std::filesystem::path& out_dir, std::ostream* progress = nullptr);

/// {"error": {"kind": ..., "message": ...}}
nlohmann::json error_record(const std::string& kind, const std::string& message);

}  // namespace fmm
