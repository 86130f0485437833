#ifndef LGAN_REPORT_HPP
#define LGAN_REPORT_HPP

#include <string>
#include <vector>

#include "lgan/tensor.hpp"

namespace lgan {

/// Shortest decimal form that parses back to the exact same double.
std::string format_double(double value);

/// Header row plus one line per data row, comma separated. Every run with
/// the same numbers produces byte-identical output.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Reads the last two numeric columns of each CSV row as (x, y) points.
/// Rows without two numeric cells (headers, stray text) are skipped.
Tensor read_xy_csv(const std::string& path);

/// Static scatter plot: 800x800 viewport, axes auto-scaled to the data with
/// a 5% margin, one circle per point.
void write_scatter_svg(const std::string& path, const Tensor& points);

}  // namespace lgan

#endif
