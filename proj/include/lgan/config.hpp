#ifndef LGAN_CONFIG_HPP
#define LGAN_CONFIG_HPP

#include <string>
#include <vector>

#include "lgan/training.hpp"

namespace lgan {

/// Everything a run needs beyond TrainConfig: architecture widths, dataset
/// choice, and output locations. Parsed from flat "key = value" text.
struct RunConfig {
  TrainConfig train;
  std::vector<std::size_t> gen_hidden{64, 64};
  std::vector<std::size_t> clf_hidden{128, 128};
  std::size_t coord_dim = 1;
  std::string dataset = "circle";  // circle | two_moons | csv | idx
  std::size_t data_n = 1000;       // circle: total points; moons: per class
  double data_noise = 0.02;
  double radius = 1.0;
  std::size_t labels_per_class = 3;
  std::size_t val_n = 500;
  std::string data_path;  // source file for csv/idx datasets
  std::string log_csv;    // per-epoch log destination; empty disables

  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment, blank lines are
/// ignored, unknown keys are rejected with the offending line number.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace lgan

#endif
