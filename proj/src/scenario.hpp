#pragma once

// JSON scenarios: schema validation, construction, checks, reports, dumps.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wardforge/wardforge.hpp"

namespace wardforge::cli {

inline constexpr const char* kToolVersion = "wardforge 1.0.0";

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kSchemaError = 2, kConstructionError = 3 };

/// Schema violation at a JSON-pointer path.
class SchemaError : public Error {
 public:
  SchemaError(std::string pointer, const std::string& what)
      : Error(ErrorCode::SchemaError, (pointer.empty() ? std::string("/") : pointer) + ": " + what),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

struct CheckSpec {
  std::string check;
  double tol = 0.0;
  nlohmann::json options;  // remaining keys, validated per check
};

struct Scenario {
  nlohmann::json construction;
  std::vector<CheckSpec> checks;
  Grid3 grid;
  bool dump = false;
};

/// Validates and converts a parsed document; throws SchemaError.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

/// Result of building a construction.
struct Built {
  std::string kind;
  Field ward;
  std::optional<ExtendedSolution> psi;
  std::optional<HomoclinicRecipe> homoclinic;
  std::optional<HeteroclinicStep> heteroclinic;
  double time_period = 0.0;           // triply periodic common period
  std::pair<double, double> tau_shift{0.0, 0.0};  // doubly periodic (dx, dy)
};

/// Throws wardforge::Error on construction failure.
Built build(const Scenario& s);

/// Runs every check; returns the report document.
nlohmann::json verify(const Scenario& s, const Built& b);

/// CSV of J over the grid plus a manifest document.
void write_dump(const Scenario& s, const Built& b, const std::string& dir);

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace wardforge::cli
