#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "debiased/dictionary.hpp"
#include "debiased/estimators.hpp"
#include "debiased/harness.hpp"

namespace debiased {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct CsvColumns {
  std::string y = "y";
  /// Auxiliary column; absent from the file is fine unless required later.
  std::string z = "z";
  /// Name of a binary x column to mark as the treatment.
  std::optional<std::string> treatment;
};

/// Header row required. Every column other than y and z becomes an x column
/// in file order. ParseError messages carry the 1-based line and column.
Dataset read_dataset_csv(const std::filesystem::path& path, const CsvColumns& columns = {});
Dataset parse_dataset_csv(const std::string& text, const CsvColumns& columns = {});
std::string dataset_to_csv(const Dataset& data);

/// "raw", "intercept" or "poly:<degree>".
Dictionary parse_dictionary(const std::string& spec, Index input_dim);

/// "avg_product", "ate", "ate:<col>", "wad:<col>". A column is an x name or a
/// 0-based index. Plain "ate" uses `default_treatment`.
FunctionalSpec parse_functional(const std::string& spec, const std::vector<std::string>& x_names,
                                std::optional<Index> default_treatment = std::nullopt);

/// "a,b,c" or "start:step:end" (inclusive).
std::vector<double> parse_grid(const std::string& spec);

Json report_to_json(const EstimateReport& report, double level, std::optional<std::uint64_t> seed);

McConfig mc_config_from_json(const Json& j);
Json mc_config_to_json(const McConfig& cfg);
McConfig read_mc_config(const std::filesystem::path& path);

Json summary_to_json(const McSummary& summary);
std::string summary_to_csv(const McSummary& summary);
std::string boundaries_to_csv(const std::vector<BoundaryRow>& rows);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace debiased
