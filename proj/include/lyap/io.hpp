#pragma once

#include "lyap/bounds.hpp"
#include "lyap/family.hpp"
#include "lyap/monte_carlo.hpp"
#include "lyap/structure.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lyap::io {

/// Shortest decimal that parses back to the same double ("-inf"/"inf"/"nan"
/// for non-finite values).
std::string format_double(double v);

// Family files: {"dim": d, "matrices": [[row-major reals] ...], "probs": [...]}
// with probs optional (uniform when absent). Numbers round-trip bit-exactly.
MatrixFamily read_family_json(const std::string& text);
MatrixFamily load_family(const std::string& path);
std::string family_to_json(const MatrixFamily& fam);
void save_family(const MatrixFamily& fam, const std::string& path);

/// Structure report as a stable JSON object; indices are 1-based in the file
/// format. `nonnegative` and `recommendation` wrap the report for the CLI,
/// where signed input carries no structure fields at all.
std::string classify_json(const StructureReport* rep, bool nonnegative,
                          const std::string& recommendation);

std::string recommend(const MatrixFamily& fam, const StructureReport* rep);

std::string mc_json(const McEstimate& est);

// One bound per CSV row; the parameter vector travels in a JSON sidecar.
std::string bound_report_csv_header();
std::string bound_report_csv_row(const BoundReport& rep);

struct ConvergenceRow {
  int k = 1;
  std::string lower_kind = "none";
  std::optional<double> lower;
  std::string upper_kind;
  std::optional<double> upper;
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  std::int64_t wall_ms = 0;
};

std::string convergence_csv_header();
std::string convergence_csv(const std::vector<ConvergenceRow>& rows);

struct ParamRow {
  int k = 1;
  std::optional<Eigen::VectorXd> lower_param;
  std::optional<Eigen::VectorXd> upper_param;
};

std::string params_sidecar_json(const std::string& family_path, std::uint64_t seed,
                                const std::vector<ParamRow>& rows);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace lyap::io
