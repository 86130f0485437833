#ifndef LGAN_DATA_HPP
#define LGAN_DATA_HPP

#include <string>
#include <utility>
#include <vector>

#include "lgan/rng.hpp"
#include "lgan/tensor.hpp"

namespace lgan {

struct Dataset {
  Tensor points;            // [n, D]
  std::vector<int> labels;  // empty when unlabeled, else one per row
  std::string name;

  std::size_t size() const;
  std::size_t dim() const;
  bool labeled() const { return !labels.empty(); }
  /// Checks label/point alignment, finiteness, and (when num_classes > 0)
  /// that labels lie in [0, num_classes).
  void validate(std::size_t num_classes = 0) const;
  /// Point at `row` as a vector [D].
  Tensor point(std::size_t row) const;
};

/// Points on a circle of the given radius plus Gaussian jitter. Angles are
/// uniform draws, or evenly spaced (2 pi k / n) when deterministic_angles.
Dataset make_circle(std::size_t n, double radius, double noise_sd, Rng& rng,
                    bool deterministic_angles = false);

/// Two interleaved half-circles with labels {0, 1}:
/// class 0 traces (cos t, sin t), class 1 traces (1 - cos t, 0.5 - sin t),
/// t uniform on [0, pi], plus Gaussian jitter. First n_per_class rows are
/// class 0.
Dataset make_two_moons(std::size_t n_per_class, double noise_sd, Rng& rng);

/// One parsed IDX file: either images (scaled to [0,1], flattened row-major,
/// original raster dimensions kept) or labels.
struct IdxFragment {
  bool is_images = false;
  Tensor images;  // [n, rows*cols]
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> labels;
};

IdxFragment load_idx(const std::string& path);
void save_idx(const IdxFragment& fragment, const std::string& path);

/// Joins an image fragment with an optional label fragment.
Dataset dataset_from_idx(const IdxFragment& images, const IdxFragment* labels);

/// Comma-separated numeric rows; the last column is an integer class label
/// when has_label_column.
Dataset load_csv(const std::string& path, bool has_label_column);

/// Keeps exactly per_class examples of each class labeled (uniform without
/// replacement) and strips labels from the rest. Together the two parts
/// contain every input row exactly once.
std::pair<Dataset, Dataset> split_labeled(const Dataset& ds,
                                          std::size_t per_class, Rng& rng);

}  // namespace lgan

#endif
