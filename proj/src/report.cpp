#include "lgan/report.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace lgan {
namespace {

std::optional<double> try_parse_double(std::string_view cell) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t' || cell.front() == '\r')) {
    cell.remove_prefix(1);
  }
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
    cell.remove_suffix(1);
  }
  if (cell.empty()) return std::nullopt;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
  return out;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("failed to format double");
  return std::string(buffer.data(), ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw std::invalid_argument("csv row has " + std::to_string(row.size()) +
                                  " values, header has " + std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::string text = out.str();
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

Tensor read_xy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<double> flat;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> numeric;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      if (auto v = try_parse_double(std::string_view(line).substr(start, comma - start))) {
        numeric.push_back(*v);
      }
      start = comma + 1;
    }
    if (numeric.size() >= 2) {
      flat.push_back(numeric[numeric.size() - 2]);
      flat.push_back(numeric[numeric.size() - 1]);
    }
  }
  if (flat.empty()) throw std::runtime_error("no numeric (x, y) rows in '" + path + "'");
  const std::size_t rows = flat.size() / 2;
  return Tensor::matrix(rows, 2, std::move(flat));
}

void write_scatter_svg(const std::string& path, const Tensor& points) {
  if (points.rank() != 2 || points.cols() != 2 || points.rows() == 0) {
    throw std::invalid_argument("scatter plot needs a nonempty [n, 2] point matrix");
  }
  const std::size_t n = points.rows();
  double min_x = points.at(0, 0), max_x = min_x;
  double min_y = points.at(0, 1), max_y = min_y;
  for (std::size_t r = 0; r < n; ++r) {
    min_x = std::min(min_x, points.at(r, 0));
    max_x = std::max(max_x, points.at(r, 0));
    min_y = std::min(min_y, points.at(r, 1));
    max_y = std::max(max_y, points.at(r, 1));
  }
  // 5% margin per side; degenerate ranges get a unit span so points stay visible.
  double span_x = max_x - min_x;
  double span_y = max_y - min_y;
  if (span_x <= 0.0) span_x = 1.0;
  if (span_y <= 0.0) span_y = 1.0;
  const double margin_x = 0.05 * span_x;
  const double margin_y = 0.05 * span_y;
  const double lo_x = min_x - margin_x, hi_x = max_x + margin_x;
  const double lo_y = min_y - margin_y, hi_y = max_y + margin_y;
  const double size = 800.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
         "viewBox=\"0 0 800 800\">\n";
  out << "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
  for (std::size_t r = 0; r < n; ++r) {
    const double px = size * (points.at(r, 0) - lo_x) / (hi_x - lo_x);
    const double py = size * (hi_y - points.at(r, 1)) / (hi_y - lo_y);
    out << "<circle cx=\"" << format_double(px) << "\" cy=\"" << format_double(py)
        << "\" r=\"3\" fill=\"#1f6f8b\" fill-opacity=\"0.8\"/>\n";
  }
  out << "</svg>\n";

  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::string text = out.str();
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace lgan
