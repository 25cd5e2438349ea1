#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genpred/dataset.hpp"

namespace genpred::cli {

/// Reads a headed numeric CSV. The named target column becomes the response;
/// every other column is a feature, in file order. Blank, non-numeric or
/// non-finite cells raise InputError naming the line and column.
Dataset ingest_csv(const std::filesystem::path& path, const std::string& target);

/// Like ingest_csv, but the target column is optional and dropped when
/// present. Targets of the result are zero.
Dataset ingest_features(const std::filesystem::path& path, const std::string& target);

// Header x-columns then the target, values at round-trip precision.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& target = "y");

using CsvRow = std::vector<std::string>;

void write_csv(const std::filesystem::path& path, const CsvRow& header,
               const std::vector<CsvRow>& rows);
void write_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows);

// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);

}  // namespace genpred::cli
