#include "kinseq/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kinseq {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, Index row, Index col) {
  const std::string v = trim(field);
  double out = 0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw DataError("csv: non-numeric value '" + field + "' in row " +
                    std::to_string(row) + ", column " + std::to_string(col));
  return out;
}

}  // namespace

Trajectory load_csv(const std::filesystem::path& path,
                    const std::vector<std::string>& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw DataError("csv: empty file " + path.string());

  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  bool has_label = !header.empty() && header.back() == "label";
  const Index n_x = static_cast<Index>(header.size()) - (has_label ? 1 : 0);
  if (n_x < 1) throw DataError("csv: header has no channel columns in " +
                               path.string());
  if (schema.empty()) {
    for (Index k = 0; k < n_x; ++k)
      if (header[static_cast<std::size_t>(k)] != "ch_" + std::to_string(k))
        throw DataError("csv: expected header column 'ch_" +
                        std::to_string(k) + "', got '" +
                        header[static_cast<std::size_t>(k)] + "' in " +
                        path.string());
  } else {
    if (static_cast<std::size_t>(n_x) != schema.size())
      throw DataError("csv: header has " + std::to_string(n_x) +
                      " channels, schema expects " +
                      std::to_string(schema.size()));
    for (Index k = 0; k < n_x; ++k)
      if (header[static_cast<std::size_t>(k)] !=
          schema[static_cast<std::size_t>(k)])
        throw DataError("csv: header column '" +
                        header[static_cast<std::size_t>(k)] +
                        "' does not match schema entry '" +
                        schema[static_cast<std::size_t>(k)] + "'");
  }

  std::vector<Vec> frames;
  std::vector<std::string> labels;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    const std::size_t expected = header.size();
    if (fields.size() != expected)
      throw DataError("csv: row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(expected));
    Vec frame(n_x);
    for (Index k = 0; k < n_x; ++k)
      frame[k] = parse_double(fields[static_cast<std::size_t>(k)], row, k);
    frames.push_back(std::move(frame));
    if (has_label) labels.push_back(trim(fields.back()));
  }
  if (frames.empty()) throw DataError("csv: no data rows in " + path.string());

  Trajectory t;
  t.frames.resize(n_x, static_cast<Index>(frames.size()));
  for (Index c = 0; c < t.frames.cols(); ++c)
    t.frames.col(c) = frames[static_cast<std::size_t>(c)];
  t.labels = std::move(labels);
  return t;
}

void save_csv(const std::filesystem::path& path, const Trajectory& t) {
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot write " + path.string());
  for (Index k = 0; k < t.channels(); ++k)
    out << (k ? "," : "") << "ch_" << k;
  if (t.labeled()) out << ",label";
  out << "\n";
  char buf[32];
  for (Index c = 0; c < t.length(); ++c) {
    for (Index k = 0; k < t.channels(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", t.frames(k, c));
      out << (k ? "," : "") << buf;
    }
    if (t.labeled()) out << "," << t.labels[static_cast<std::size_t>(c)];
    out << "\n";
  }
}

void save_stats(const std::filesystem::path& path, const ChannelStats& s) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(s.mean.begin(), s.mean.end());
  j["std"] = std::vector<double>(s.stddev.begin(), s.stddev.end());
  std::ofstream out(path);
  if (!out) throw DataError("stats: cannot write " + path.string());
  out << j.dump(2) << "\n";
}

ChannelStats load_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("stats: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std_ = j.at("std").get<std::vector<double>>();
  if (mean.size() != std_.size())
    throw DataError("stats: mean and std lengths differ in " + path.string());
  ChannelStats s;
  s.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Index>(mean.size()));
  s.stddev =
      Eigen::Map<const Vec>(std_.data(), static_cast<Index>(std_.size()));
  return s;
}

}  // namespace kinseq
