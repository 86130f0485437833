#include "lgan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

namespace lgan {

std::size_t Dataset::size() const {
  return points.rank() == 2 ? points.shape()[0] : 0;
}

std::size_t Dataset::dim() const {
  return points.rank() == 2 ? points.shape()[1] : 0;
}

void Dataset::validate(std::size_t num_classes) const {
  if (points.rank() != 2) {
    throw Error("dataset: points must be a matrix, got " +
                shape_str(points.shape()));
  }
  if (!points.all_finite()) {
    throw Error("dataset: non-finite coordinates");
  }
  if (!labels.empty()) {
    if (labels.size() != size()) {
      throw Error("dataset: " + std::to_string(labels.size()) +
                  " labels for " + std::to_string(size()) + " points");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 ||
          (num_classes > 0 &&
           labels[i] >= static_cast<int>(num_classes))) {
        throw Error("dataset: label " + std::to_string(labels[i]) +
                    " at row " + std::to_string(i) + " out of range");
      }
    }
  }
}

Tensor Dataset::point(std::size_t row) const {
  if (row >= size()) {
    throw Error("dataset: row " + std::to_string(row) + " out of range");
  }
  Tensor p(Shape{dim()});
  for (std::size_t c = 0; c < dim(); ++c) p.data()[c] = points.at(row, c);
  return p;
}

Dataset make_circle(std::size_t n, double radius, double noise_sd, Rng& rng,
                    bool deterministic_angles) {
  if (!(radius > 0.0)) throw Error("make_circle: radius must be positive");
  if (noise_sd < 0.0) throw Error("make_circle: noise must be non-negative");
  Dataset ds;
  ds.name = "circle";
  ds.points = Tensor(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    double theta = deterministic_angles
                       ? 2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n)
                       : 2.0 * std::numbers::pi * rng.uniform();
    double px = radius * std::cos(theta);
    double py = radius * std::sin(theta);
    if (noise_sd > 0.0) {
      px += noise_sd * rng.normal();
      py += noise_sd * rng.normal();
    }
    ds.points.at(i, 0) = px;
    ds.points.at(i, 1) = py;
  }
  return ds;
}

Dataset make_two_moons(std::size_t n_per_class, double noise_sd, Rng& rng) {
  if (noise_sd < 0.0) throw Error("make_two_moons: noise must be non-negative");
  Dataset ds;
  ds.name = "two_moons";
  ds.points = Tensor(Shape{2 * n_per_class, 2});
  ds.labels.resize(2 * n_per_class);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    bool second = i >= n_per_class;
    double t = std::numbers::pi * rng.uniform();
    double px = second ? 1.0 - std::cos(t) : std::cos(t);
    double py = second ? 0.5 - std::sin(t) : std::sin(t);
    if (noise_sd > 0.0) {
      px += noise_sd * rng.normal();
      py += noise_sd * rng.normal();
    }
    ds.points.at(i, 0) = px;
    ds.points.at(i, 1) = py;
    ds.labels[i] = second ? 1 : 0;
  }
  return ds;
}

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hex32(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) {
    s.push_back(digits[(v >> shift) & 0xF]);
  }
  return s;
}

}  // namespace

IdxFragment load_idx(const std::string& path) {
  std::vector<unsigned char> bytes = read_file_bytes(path);
  if (bytes.size() < 8) {
    throw Error("load_idx: '" + path + "' too short for a header (" +
                std::to_string(bytes.size()) + " bytes)");
  }
  std::uint32_t magic = read_be32(bytes.data());
  IdxFragment frag;
  if (magic == kIdxLabelsMagic) {
    std::uint32_t count = read_be32(bytes.data() + 4);
    std::size_t expected = 8 + count;
    if (bytes.size() != expected) {
      throw Error("load_idx: label payload of '" + path + "' has " +
                  std::to_string(bytes.size()) + " bytes, expected " +
                  std::to_string(expected));
    }
    frag.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      frag.labels[i] = static_cast<int>(bytes[8 + i]);
    }
    return frag;
  }
  if (magic == kIdxImagesMagic) {
    if (bytes.size() < 16) {
      throw Error("load_idx: image header of '" + path + "' has " +
                  std::to_string(bytes.size()) + " bytes, expected 16");
    }
    std::uint32_t count = read_be32(bytes.data() + 4);
    std::uint32_t rows = read_be32(bytes.data() + 8);
    std::uint32_t cols = read_be32(bytes.data() + 12);
    std::size_t expected = 16 + std::size_t(count) * rows * cols;
    if (bytes.size() != expected) {
      throw Error("load_idx: image payload of '" + path + "' has " +
                  std::to_string(bytes.size()) + " bytes, expected " +
                  std::to_string(expected));
    }
    frag.is_images = true;
    frag.rows = rows;
    frag.cols = cols;
    frag.images = Tensor(Shape{count, std::size_t(rows) * cols});
    auto dst = frag.images.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<double>(bytes[16 + i]) / 255.0;
    }
    return frag;
  }
  throw Error("load_idx: '" + path + "' has magic " + hex32(magic) +
              ", expected " + hex32(kIdxImagesMagic) + " (images) or " +
              hex32(kIdxLabelsMagic) + " (labels)");
}

void save_idx(const IdxFragment& fragment, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_idx: cannot open '" + path + "' for writing");
  if (fragment.is_images) {
    std::size_t n = fragment.images.rank() == 2 ? fragment.images.shape()[0] : 0;
    if (fragment.rows * fragment.cols !=
        (fragment.images.rank() == 2 ? fragment.images.shape()[1] : 0)) {
      throw Error("save_idx: raster dimensions do not match image width");
    }
    write_be32(out, kIdxImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(n));
    write_be32(out, static_cast<std::uint32_t>(fragment.rows));
    write_be32(out, static_cast<std::uint32_t>(fragment.cols));
    for (double v : fragment.images.data()) {
      long pixel = std::lround(v * 255.0);
      if (pixel < 0 || pixel > 255) {
        throw Error("save_idx: pixel value " + std::to_string(v) +
                    " outside [0, 1]");
      }
      unsigned char byte = static_cast<unsigned char>(pixel);
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  } else {
    write_be32(out, kIdxLabelsMagic);
    write_be32(out, static_cast<std::uint32_t>(fragment.labels.size()));
    for (int label : fragment.labels) {
      if (label < 0 || label > 255) {
        throw Error("save_idx: label " + std::to_string(label) +
                    " does not fit in a byte");
      }
      unsigned char byte = static_cast<unsigned char>(label);
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }
  if (!out) throw Error("save_idx: write to '" + path + "' failed");
}

Dataset dataset_from_idx(const IdxFragment& images, const IdxFragment* labels) {
  if (!images.is_images) {
    throw Error("dataset_from_idx: first fragment must hold images");
  }
  Dataset ds;
  ds.name = "idx";
  ds.points = images.images;
  if (labels) {
    if (labels->is_images) {
      throw Error("dataset_from_idx: second fragment must hold labels");
    }
    if (labels->labels.size() != ds.size()) {
      throw Error("dataset_from_idx: " + std::to_string(labels->labels.size()) +
                  " labels for " + std::to_string(ds.size()) + " images");
    }
    ds.labels = labels->labels;
  }
  return ds;
}

Dataset load_csv(const std::string& path, bool has_label_column) {
  std::ifstream in(path);
  if (!in) throw Error("load_csv: cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width == 0) {
      width = cells.size();
      if (has_label_column && width < 2) {
        throw Error("load_csv: row 1 has no feature columns before the label");
      }
    } else if (cells.size() != width) {
      throw Error("load_csv: row " + std::to_string(line_no) + " has " +
                  std::to_string(cells.size()) + " columns, expected " +
                  std::to_string(width));
    }
    std::vector<double> row;
    std::size_t feature_count = has_label_column ? width - 1 : width;
    for (std::size_t c = 0; c < feature_count; ++c) {
      const std::string& cell = cells[c];
      double v = 0.0;
      auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error("load_csv: non-numeric cell '" + cell + "' at row " +
                    std::to_string(line_no) + ", column " +
                    std::to_string(c + 1));
      }
      row.push_back(v);
    }
    if (has_label_column) {
      const std::string& cell = cells.back();
      int label = 0;
      auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), label);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error("load_csv: non-integer label '" + cell + "' at row " +
                    std::to_string(line_no) + ", column " +
                    std::to_string(width));
      }
      labels.push_back(label);
    }
    rows.push_back(std::move(row));
  }
  Dataset ds;
  ds.name = "csv";
  std::size_t feature_count = has_label_column && width > 0 ? width - 1 : width;
  ds.points = Tensor(Shape{rows.size(), feature_count});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < feature_count; ++c) {
      ds.points.at(r, c) = rows[r][c];
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

std::pair<Dataset, Dataset> split_labeled(const Dataset& ds,
                                          std::size_t per_class, Rng& rng) {
  ds.validate();
  if (!ds.labeled()) throw Error("split_labeled: dataset has no labels");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[ds.labels[i]].push_back(i);
  }

  std::vector<std::size_t> keep;
  for (auto& [label, members] : by_class) {
    if (per_class > members.size()) {
      throw Error("split_labeled: class " + std::to_string(label) + " has " +
                  std::to_string(members.size()) + " examples, need " +
                  std::to_string(per_class));
    }
    for (std::size_t i = 0; i < per_class; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(
                              static_cast<std::uint64_t>(members.size() - i)));
      std::swap(members[i], members[j]);
      keep.push_back(members[i]);
    }
  }
  std::sort(keep.begin(), keep.end());

  std::vector<char> kept(ds.size(), 0);
  for (std::size_t i : keep) kept[i] = 1;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!kept[i]) rest.push_back(i);
  }

  Dataset labeled;
  labeled.name = ds.name + ".labeled";
  labeled.points = take_rows(ds.points, keep);
  for (std::size_t i : keep) labeled.labels.push_back(ds.labels[i]);

  Dataset unlabeled;
  unlabeled.name = ds.name + ".unlabeled";
  unlabeled.points = take_rows(ds.points, rest);
  return {std::move(labeled), std::move(unlabeled)};
}

}  // namespace lgan
