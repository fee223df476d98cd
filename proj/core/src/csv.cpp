#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "malfuse/tabular.hpp"
#include "malfuse/text_io.hpp"

namespace malfuse::tabular {

namespace {

[[noreturn]] void csv_error(std::string_view source, std::size_t line, const std::string& what) {
  throw std::runtime_error(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

std::optional<double> parse_cell(std::string_view cell) {
  double v = 0.0;
  if (!try_parse_real(cell, v) || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

CsvTable parse_csv(std::string_view text, std::string_view source) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool have_record = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  bool record_quoted = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    record_quoted = record_quoted || field_quoted;
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty() && !record_quoted;
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else {
        if (record.size() != table.header.size()) {
          csv_error(source, record_line,
                    "expected " + std::to_string(table.header.size()) + " columns, found " +
                        std::to_string(record.size()));
        }
        table.rows.push_back(std::move(record));
      }
    }
    record.clear();
    record_quoted = false;
    have_record = false;
    record_line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) csv_error(source, line, "unexpected quote inside unquoted field");
        in_quotes = true;
        field_quoted = true;
        have_record = true;
        break;
      case ',':
        end_field();
        have_record = true;
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
        have_record = true;
    }
  }
  if (in_quotes) csv_error(source, line, "unterminated quoted field");
  if (have_record || !field.empty()) end_record();
  if (table.header.empty()) csv_error(source, 1, "missing header row");
  return table;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

LabeledDataset load_csv(const std::filesystem::path& path, std::string_view label_column) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("missing file: " + path.string());
  }
  const std::string text = read_file(path);
  return dataset_from_csv(parse_csv(text, path.string()), label_column, path.string());
}

LabeledDataset dataset_from_csv(const CsvTable& table, std::string_view label_column,
                                std::string_view source) {
  const auto it = std::find(table.header.begin(), table.header.end(), label_column);
  if (it == table.header.end()) {
    throw std::invalid_argument(std::string(source) + ": missing label column '" +
                                std::string(label_column) + "'");
  }
  const auto label_idx = static_cast<std::size_t>(it - table.header.begin());

  std::map<std::string, std::size_t> distinct;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string_view raw = trim(table.rows[r][label_idx]);
    if (raw.empty()) {
      throw std::invalid_argument(std::string(source) + ": row " + std::to_string(r + 2) +
                                  ": empty label");
    }
    distinct.emplace(std::string(raw), 0);
  }
  if (distinct.size() != 2) {
    throw std::invalid_argument(std::string(source) + ": label cardinality is " +
                                std::to_string(distinct.size()) + ", expected 2");
  }
  // std::map orders keys, so the lexicographically smaller label encodes to 0.
  LabeledDataset ds;
  std::size_t code = 0;
  for (auto& [name, value] : distinct) {
    value = code;
    ds.label_names[code] = name;
    ++code;
  }

  std::vector<std::string> names;
  std::array<std::string, 1> ignore{std::string(label_column)};
  ds.features = matrix_from_csv(table, names, ignore, source);
  ds.feature_names = std::move(names);
  ds.labels.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    ds.labels.push_back(static_cast<std::uint8_t>(distinct.at(std::string(trim(row[label_idx])))));
  }
  ds.validate();
  return ds;
}

FeatureMatrix matrix_from_csv(const CsvTable& table, std::vector<std::string>& names,
                              std::span<const std::string> ignore, std::string_view source) {
  std::vector<std::size_t> keep;
  names.clear();
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (std::find(ignore.begin(), ignore.end(), table.header[c]) != ignore.end()) continue;
    keep.push_back(c);
    names.push_back(table.header[c]);
  }
  {
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
      throw std::invalid_argument(std::string(source) + ": duplicate column '" + *dup + "'");
    }
  }
  FeatureMatrix m(table.rows.size(), keep.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t j = 0; j < keep.size(); ++j) {
      if (auto v = parse_cell(table.rows[r][keep[j]])) {
        m.set(r, j, *v);
      } else {
        m.set_absent(r, j);
      }
    }
  }
  return m;
}

std::string to_csv(const LabeledDataset& ds, std::string_view label_column) {
  std::string out;
  for (const auto& name : ds.feature_names) {
    out += csv_escape(name);
    out.push_back(',');
  }
  out += csv_escape(label_column);
  out.push_back('\n');
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t c = 0; c < ds.n_cols(); ++c) {
      if (ds.features.is_present(r, c)) out += format_real(ds.features.value(r, c));
      out.push_back(',');
    }
    const std::string& name = ds.label_names[ds.labels[r]];
    out += name.empty() ? std::to_string(ds.labels[r]) : csv_escape(name);
    out.push_back('\n');
  }
  return out;
}

}  // namespace malfuse::tabular
