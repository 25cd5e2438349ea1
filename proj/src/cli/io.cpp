#include "genpred/cli/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "genpred/errors.hpp"
#include "genpred/format.hpp"

namespace genpred::cli {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  const std::string where = path.string();
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      for (auto& f : fields) {
        f = trim(f);
        if (f.empty()) throw InputError(where + ":" + std::to_string(line_no) + ": empty column name");
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw InputError(where + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> values(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string location =
          where + ":" + std::to_string(line_no) + " column " + table.header[j];
      const std::string cell = trim(fields[j]);
      if (cell.empty()) throw InputError(location + ": blank cell");
      try {
        values[j] = parse_double(cell);
      } catch (const InputError&) {
        throw InputError(location + ": not a number: '" + cell + "'");
      }
      if (!std::isfinite(values[j])) throw InputError(location + ": non-finite value '" + cell + "'");
    }
    table.rows.push_back(std::move(values));
  }
  if (!have_header) throw InputError(where + ": missing header row");
  return table;
}

Dataset to_dataset(const Table& table, std::ptrdiff_t target_col) {
  const std::size_t d = table.header.size() - (target_col >= 0 ? 1 : 0);
  Dataset data(table.rows.size(), d);
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (static_cast<std::ptrdiff_t>(j) != target_col) data.feature_names.push_back(table.header[j]);
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == target_col) {
        data.targets[i] = table.rows[i][j];
      } else {
        data.features[i * d + c++] = table.rows[i][j];
      }
    }
  }
  return data;
}

std::ptrdiff_t column_index(const Table& table, const std::string& name) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  return it == table.header.end() ? -1 : it - table.header.begin();
}

}  // namespace

Dataset ingest_csv(const std::filesystem::path& path, const std::string& target) {
  const Table table = read_table(path);
  const auto col = column_index(table, target);
  if (col < 0) throw InputError(path.string() + ": no column named '" + target + "'");
  return to_dataset(table, col);
}

Dataset ingest_features(const std::filesystem::path& path, const std::string& target) {
  const Table table = read_table(path);
  return to_dataset(table, column_index(table, target));
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& target) {
  CsvRow header;
  for (std::size_t j = 0; j < data.cols; ++j) {
    header.push_back(j < data.feature_names.size() ? data.feature_names[j]
                                                   : "x" + std::to_string(j + 1));
  }
  header.push_back(target);
  std::vector<CsvRow> rows(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (double v : data.row(i)) rows[i].push_back(format_double(v));
    rows[i].push_back(format_double(data.targets[i]));
  }
  write_csv(path, header, rows);
}

void write_csv(const std::filesystem::path& path, const CsvRow& header,
               const std::vector<CsvRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path.string() + ": cannot open for writing");
  auto put = [&](const CsvRow& row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << row[j];
    }
    out << '\n';
  };
  put(header);
  for (const auto& row : rows) put(row);
  if (!out) throw InputError(path.string() + ": write failed");
}

void write_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows) {
  std::vector<CsvRow> text(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (double v : rows[i]) text[i].push_back(format_double(v));
  }
  write_csv(path, header, text);
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path.string() + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw InputError(path.string() + ": write failed");
}

}  // namespace genpred::cli
