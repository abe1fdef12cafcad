#include "pgee/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "pgee/error.hpp"

namespace pgee {
namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": cannot parse '" +
                                               std::string(field) + "' as a number");
  }
  return value;
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, ptr);
}

}  // namespace

RawTable parse_csv(std::istream& in) {
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.find_first_not_of(" \t") == std::string_view::npos) continue;

    auto fields = split(view);
    if (!have_header) {
      if (fields.size() < 2 || fields[0] != "cluster" || fields[1] != "y") {
        throw Error(ErrorCode::MalformedInput, "header must start with 'cluster,y'");
      }
      for (std::size_t k = 2; k < fields.size(); ++k) {
        if (fields[k].empty()) throw Error(ErrorCode::MalformedInput, "empty column name in header");
        table.covariate_names.emplace_back(fields[k]);
      }
      width = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != width) {
      throw Error(ErrorCode::RaggedCovariates, "line " + std::to_string(line_no) + " has " +
                                                   std::to_string(fields.size()) + " fields, header has " +
                                                   std::to_string(width));
    }
    RawRecord rec;
    rec.cluster = std::string(fields[0]);
    if (rec.cluster.empty()) {
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": empty cluster id");
    }
    rec.y = parse_number(fields[1], line_no);
    rec.covariates.reserve(width - 2);
    for (std::size_t k = 2; k < width; ++k) rec.covariates.push_back(parse_number(fields[k], line_no));
    table.rows.push_back(std::move(rec));
  }
  if (!have_header) throw Error(ErrorCode::MalformedInput, "empty input");
  return table;
}

RawTable parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_csv(in);
}

LongitudinalDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open " + path.string());
  return validate_dataset(parse_csv(in));
}

void write_dataset_csv(std::ostream& out, const LongitudinalDataset& data) {
  const auto& names = data.coef_names();
  std::string buf = "cluster,y";
  for (std::size_t k = 1; k < names.size(); ++k) {
    buf += ',';
    buf += names[k];
  }
  buf += '\n';
  for (const auto& c : data.clusters()) {
    for (Eigen::Index j = 0; j < c.y.size(); ++j) {
      buf += c.id;
      buf += ',';
      buf += c.y(j) != 0.0 ? '1' : '0';
      for (Eigen::Index k = 1; k < c.X.cols(); ++k) {
        buf += ',';
        append_number(buf, c.X(j, k));
      }
      buf += '\n';
    }
  }
  out << buf;
}

void write_dataset_csv(const std::filesystem::path& path, const LongitudinalDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MalformedInput, "cannot write " + path.string());
  write_dataset_csv(out, data);
}

}  // namespace pgee
