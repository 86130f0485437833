// lgan: train local-chart GANs and semi-supervised classifiers on small
// datasets, then inspect the learned geometry (tangent ranks, coordinate
// walks, scatter plots) from saved checkpoints.

#include <charconv>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lgan/checkpoint.hpp"
#include "lgan/config.hpp"
#include "lgan/data.hpp"
#include "lgan/eval.hpp"
#include "lgan/geometry.hpp"
#include "lgan/report.hpp"
#include "lgan/rng.hpp"
#include "lgan/semisup.hpp"
#include "lgan/training.hpp"

namespace {

using namespace lgan;

/// Bad flag values discovered after parsing (index out of range and the
/// like). Reported as usage errors: message plus exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model initialization seeds are derived from the run seed so that the data
// stream and each network get independent, reproducible randomness.
constexpr std::uint64_t kGeneratorSeedOffset = 1;
constexpr std::uint64_t kAdversarySeedOffset = 2;

Dataset build_dataset(const RunConfig& config, bool need_labels, Rng& rng) {
  if (config.dataset == "circle") {
    if (need_labels) {
      throw std::runtime_error("dataset 'circle' has no labels; pick two_moons, csv, or idx");
    }
    return make_circle(config.data_n, config.radius, config.data_noise, rng);
  }
  if (config.dataset == "two_moons") {
    return make_two_moons(config.data_n, config.data_noise, rng);
  }
  if (config.dataset == "csv") {
    return load_csv(config.data_path, need_labels);
  }
  // idx: data_path names the image file; a label file is found by the
  // images -> labels naming convention used by the standard digit corpora.
  IdxFragment images = load_idx(config.data_path);
  std::string labels_path = config.data_path;
  if (std::size_t pos = labels_path.find("images"); pos != std::string::npos) {
    labels_path.replace(pos, 6, "labels");
  }
  if (labels_path != config.data_path && std::ifstream(labels_path).good()) {
    IdxFragment labels = load_idx(labels_path);
    return dataset_from_idx(images, &labels);
  }
  if (need_labels) {
    throw std::runtime_error("no label file found next to '" + config.data_path +
                             "' (expected an images->labels twin)");
  }
  return dataset_from_idx(images, nullptr);
}

void write_gan_log(const std::string& path, const std::vector<GanEpochRow>& log) {
  std::vector<std::vector<double>> rows;
  rows.reserve(log.size());
  for (const auto& r : log) {
    rows.push_back({double(r.epoch), r.lr_disc, r.lr_gen, r.disc_loss, r.gen_adv, r.omega,
                    r.locality, r.orthonormality});
  }
  write_csv(path, {"epoch", "lr_disc", "lr_gen", "disc_loss", "gen_adv", "omega", "locality",
                   "orthonormality"},
            rows);
}

void write_ssl_log(const std::string& path, const std::vector<SemiSupEpochRow>& log) {
  std::vector<std::vector<double>> rows;
  rows.reserve(log.size());
  for (const auto& r : log) {
    rows.push_back({double(r.epoch), r.lr_clf, r.lr_gen, r.labeled_ce, r.unlabeled_real,
                    r.fake_ce, r.grad_penalty, r.clf_total, r.label_preservation,
                    r.feature_matching, r.omega, r.gen_total, r.val_error});
  }
  write_csv(path,
            {"epoch", "lr_clf", "lr_gen", "labeled_ce", "unlabeled_real", "fake_ce",
             "grad_penalty", "clf_total", "label_preservation", "feature_matching", "omega",
             "gen_total", "val_error"},
            rows);
}

int cmd_train_gan(const std::string& config_path, const std::string& out_path) {
  RunConfig config = load_run_config(config_path);
  Rng rng(config.train.seed);
  Dataset data = build_dataset(config, false, rng);

  GanModels models;
  models.generator = make_local_generator(data.dim(), config.coord_dim, config.gen_hidden,
                                          Activation::Tanh, config.train.seed + kGeneratorSeedOffset);
  models.discriminator =
      init_params(mlp_spec(data.dim(), config.clf_hidden, 1, Activation::LeakyRelu),
                  config.train.seed + kAdversarySeedOffset);

  GanTrainResult result = train_gan(config.train, data, models);
  if (!config.log_csv.empty()) write_gan_log(config.log_csv, result.log);

  Checkpoint ckpt;
  ckpt.mode = Checkpoint::Mode::Adversarial;
  ckpt.generator = result.models.generator;
  ckpt.discriminator = result.models.discriminator;
  ckpt.data = data;
  save_checkpoint(ckpt, out_path);
  std::cout << "trained " << result.log.size() << " epochs on " << data.size()
            << " points; checkpoint written to " << out_path << "\n";
  return 0;
}

int cmd_train_ssl(const std::string& config_path, const std::string& out_path) {
  RunConfig config = load_run_config(config_path);
  Rng rng(config.train.seed);
  Dataset full = build_dataset(config, true, rng);
  if (!full.labeled()) {
    throw std::runtime_error("semi-supervised training needs labels in the dataset");
  }
  int max_label = 0;
  for (int label : full.labels) max_label = std::max(max_label, label);
  const std::size_t num_classes = std::size_t(max_label) + 1;
  full.validate(num_classes);

  auto [labeled, unlabeled] = split_labeled(full, config.labels_per_class, rng);

  // Synthetic data gets a fresh validation draw; file datasets are validated
  // on every labeled point they contain.
  Dataset validation;
  if (config.dataset == "two_moons") {
    validation = make_two_moons(config.val_n, config.data_noise, rng);
  } else {
    validation = full;
  }

  SemiSupModels models;
  models.generator = make_local_generator(full.dim(), config.coord_dim, config.gen_hidden,
                                          Activation::Tanh, config.train.seed + kGeneratorSeedOffset);
  models.classifier = make_classifier(full.dim(), config.clf_hidden, num_classes,
                                      Activation::LeakyRelu,
                                      config.train.seed + kAdversarySeedOffset);

  SemiSupTrainResult result = train_semisup(config.train, labeled, unlabeled, validation, models);
  if (!config.log_csv.empty()) write_ssl_log(config.log_csv, result.log);

  Checkpoint ckpt;
  ckpt.mode = Checkpoint::Mode::SemiSupervised;
  ckpt.generator = result.models.generator;
  ckpt.classifier = result.models.classifier;
  ckpt.data = full;
  save_checkpoint(ckpt, out_path);

  std::cout << "trained " << result.log.size() << " epochs ("
            << (result.stopped_early ? "stopped early" : "ran to the end") << "); final val error "
            << (result.log.empty() ? 0.0 : result.log.back().val_error) << "; checkpoint written to "
            << out_path << "\n";
  return 0;
}

int cmd_generate(const std::string& ckpt_path, std::size_t point_index, std::size_t coord,
                 std::size_t steps, const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::size_t n = ckpt.data.size();
  const std::size_t coord_dim = ckpt.generator.coord_dim;
  if (point_index >= n) {
    throw UsageError("--point-index " + std::to_string(point_index) +
                     " out of range; valid range is [0, " + std::to_string(n) + ")");
  }
  if (coord >= coord_dim) {
    throw UsageError("--coord " + std::to_string(coord) + " out of range; valid range is [0, " +
                     std::to_string(coord_dim) + ")");
  }
  if (steps < 2) {
    throw UsageError("--steps must be at least 2, got " + std::to_string(steps));
  }

  const Tensor x = ckpt.data.point(point_index);
  const std::size_t dim = ckpt.generator.ambient_dim;
  std::vector<std::string> header = {"step", "z"};
  for (std::size_t d = 0; d < dim; ++d) header.push_back("x" + std::to_string(d));

  // Walk the chosen coordinate across [-3, 3]; the other coordinates stay 0.
  std::vector<std::vector<double>> rows;
  rows.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double z_k = -3.0 + 6.0 * double(k) / double(steps - 1);
    Tensor z = Tensor::zeros(Shape{coord_dim});
    z.data()[coord] = z_k;
    Tensor sample = local_generate(ckpt.generator, x, z);
    std::vector<double> row = {double(k), z_k};
    for (std::size_t d = 0; d < dim; ++d) row.push_back(sample.data()[d]);
    rows.push_back(std::move(row));
  }
  write_csv(out_path, header, rows);
  std::cout << "wrote " << steps << " samples along coordinate " << coord << " to " << out_path
            << "\n";
  return 0;
}

int cmd_tangents(const std::string& ckpt_path, double tol, const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (tol <= 0.0) {
    throw UsageError("--tol must be positive, got " + format_double(tol));
  }
  std::vector<Tensor> jacobians = batch_tangent_jacobians(ckpt.generator, ckpt.data.points);

  const std::size_t coord_dim = ckpt.generator.coord_dim;
  std::vector<std::string> header = {"index", "gram_deviation", "local_dimension"};
  for (std::size_t j = 0; j < coord_dim; ++j) header.push_back("sv" + std::to_string(j));

  std::vector<std::vector<double>> rows;
  rows.reserve(jacobians.size());
  double mean_deviation = 0.0;
  for (std::size_t i = 0; i < jacobians.size(); ++i) {
    std::vector<double> row = {double(i), gram_deviation(jacobians[i]),
                               double(local_dimension(jacobians[i], tol))};
    for (double sv : singular_values(jacobians[i])) row.push_back(sv);
    mean_deviation += row[1];
    rows.push_back(std::move(row));
  }
  write_csv(out_path, header, rows);
  mean_deviation /= double(jacobians.size());
  std::cout << "wrote tangent diagnostics for " << jacobians.size() << " points to " << out_path
            << "; mean gram deviation " << format_double(mean_deviation) << "\n";
  return 0;
}

/// Numeric CSV for `eval`: non-numeric rows (headers) are skipped; rows must
/// have ambient_dim columns (points) or ambient_dim + 1 (label in the last).
Dataset load_eval_data(const std::string& path, std::size_t ambient_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file '" + path + "'");
  std::vector<double> flat;
  std::vector<int> labels;
  std::size_t columns = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<double> cells;
    bool numeric = true;
    std::size_t start = 0;
    while (start <= line.size() && numeric) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      std::string cell = line.substr(start, comma - start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.erase(0, 1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
        cell.pop_back();
      }
      if (cell.empty() && comma == line.size() && cells.empty()) break;  // blank line
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        numeric = false;
        break;
      }
      cells.push_back(value);
      start = comma + 1;
    }
    if (!numeric || cells.empty()) continue;
    if (cells.size() != ambient_dim && cells.size() != ambient_dim + 1) {
      throw std::runtime_error("data row " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " numeric columns, expected " +
                               std::to_string(ambient_dim) + " or " +
                               std::to_string(ambient_dim + 1));
    }
    if (columns == 0) columns = cells.size();
    if (cells.size() != columns) {
      throw std::runtime_error("data row " + std::to_string(line_no) +
                               " is inconsistent with earlier rows");
    }
    if (columns == ambient_dim + 1) {
      const double raw = cells.back();
      if (raw != double(int(raw)) || raw < 0.0) {
        throw std::runtime_error("data row " + std::to_string(line_no) +
                                 " has non-integer label " + format_double(raw));
      }
      labels.push_back(int(raw));
      cells.pop_back();
    }
    flat.insert(flat.end(), cells.begin(), cells.end());
  }
  if (flat.empty()) throw std::runtime_error("no numeric rows in '" + path + "'");
  Dataset data;
  const std::size_t rows = flat.size() / ambient_dim;
  data.points = Tensor::matrix(rows, ambient_dim, std::move(flat));
  data.labels = std::move(labels);
  data.name = path;
  data.validate();
  return data;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Dataset data = load_eval_data(data_path, ckpt.generator.ambient_dim);
  const bool classify = ckpt.mode == Checkpoint::Mode::SemiSupervised;

  std::vector<Tensor> jacobians = batch_tangent_jacobians(ckpt.generator, data.points);
  std::vector<int> predictions;
  if (classify) {
    for (std::size_t r = 0; r < data.size(); ++r) {
      predictions.push_back(int(predict_class(ckpt.classifier, data.point(r))));
    }
  }

  std::vector<std::string> header = {"index", "gram_deviation", "local_dimension"};
  if (classify) header.push_back("prediction");
  if (classify && data.labeled()) {
    header.push_back("label");
    header.push_back("correct");
  }

  std::vector<std::vector<double>> rows;
  double mean_deviation = 0.0, mean_dim = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> row = {double(i), gram_deviation(jacobians[i]),
                               double(local_dimension(jacobians[i], 0.1))};
    if (classify) row.push_back(double(predictions[i]));
    if (classify && data.labeled()) {
      row.push_back(double(data.labels[i]));
      row.push_back(predictions[i] == data.labels[i] ? 1.0 : 0.0);
    }
    mean_deviation += row[1];
    mean_dim += row[2];
    rows.push_back(std::move(row));
  }
  write_csv(out_path, header, rows);

  std::cout << "points " << data.size() << "\n";
  std::cout << "mean_gram_deviation " << format_double(mean_deviation / double(data.size()))
            << "\n";
  std::cout << "mean_local_dimension " << format_double(mean_dim / double(data.size())) << "\n";
  if (classify && data.labeled()) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (predictions[i] != data.labels[i]) ++wrong;
    }
    std::cout << "classification_error " << format_double(double(wrong) / double(data.size()))
              << "\n";
  }
  return 0;
}

int cmd_plot(const std::string& in_path, const std::string& out_path) {
  Tensor points = read_xy_csv(in_path);
  write_scatter_svg(out_path, points);
  std::cout << "plotted " << points.rows() << " points to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"local-chart GAN training and geometry inspection"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, data_path, in_path, out_path;
  std::size_t point_index = 0, coord = 0, steps = 25;
  double tol = 0.1;

  CLI::App* train_gan = app.add_subcommand("train-gan", "train a generator against a discriminator");
  train_gan->add_option("--config", config_path, "run configuration file")->required();
  train_gan->add_option("--out", out_path, "checkpoint to write")->required();

  CLI::App* train_ssl =
      app.add_subcommand("train-ssl", "train a classifier and generator on partly labeled data");
  train_ssl->add_option("--config", config_path, "run configuration file")->required();
  train_ssl->add_option("--out", out_path, "checkpoint to write")->required();

  CLI::App* generate = app.add_subcommand("generate", "walk one chart coordinate from a base point");
  generate->add_option("--ckpt", ckpt_path, "checkpoint to read")->required();
  generate->add_option("--point-index", point_index, "row of the stored dataset to start from")
      ->required();
  generate->add_option("--coord", coord, "coordinate to walk")->required();
  generate->add_option("--steps", steps, "number of samples across [-3, 3]");
  generate->add_option("--out", out_path, "CSV to write")->required();

  CLI::App* tangents = app.add_subcommand("tangents", "per-point tangent diagnostics");
  tangents->add_option("--ckpt", ckpt_path, "checkpoint to read")->required();
  tangents->add_option("--tol", tol, "singular value threshold for the dimension count");
  tangents->add_option("--out", out_path, "CSV to write")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a data file");
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint to read")->required();
  eval_cmd->add_option("--data", data_path, "CSV of points (optional trailing label column)")
      ->required();
  eval_cmd->add_option("--out", out_path, "CSV to write")->required();

  CLI::App* plot = app.add_subcommand("plot", "scatter plot of a CSV's last two numeric columns");
  plot->add_option("--in", in_path, "CSV to read")->required();
  plot->add_option("--out", out_path, "SVG to write")->required();

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }

  try {
    app.parse(argc, argv);
    if (train_gan->parsed()) return cmd_train_gan(config_path, out_path);
    if (train_ssl->parsed()) return cmd_train_ssl(config_path, out_path);
    if (generate->parsed()) return cmd_generate(ckpt_path, point_index, coord, steps, out_path);
    if (tangents->parsed()) return cmd_tangents(ckpt_path, tol, out_path);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, data_path, out_path);
    if (plot->parsed()) return cmd_plot(in_path, out_path);
    std::cerr << app.help();
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
