#include "lgan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace lgan {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& message) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + message);
}

double parse_double(std::string_view value, std::string_view key, std::size_t line) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    fail(line, "expected a number for '" + std::string(key) + "', got '" + std::string(value) + "'");
  }
  return out;
}

std::size_t parse_size(std::string_view value, std::string_view key, std::size_t line) {
  unsigned long long out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    fail(line, "expected a non-negative integer for '" + std::string(key) + "', got '" +
                   std::string(value) + "'");
  }
  return static_cast<std::size_t>(out);
}

bool parse_bool(std::string_view value, std::string_view key, std::size_t line) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(line, "expected true/false for '" + std::string(key) + "', got '" + std::string(value) + "'");
}

std::vector<std::size_t> parse_size_list(std::string_view value, std::string_view key,
                                         std::size_t line) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    std::string_view item = trim(value.substr(start, comma - start));
    if (item.empty()) fail(line, "empty entry in list for '" + std::string(key) + "'");
    out.push_back(parse_size(item, key, line));
    start = comma + 1;
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (coord_dim == 0) throw std::invalid_argument("coord_dim must be positive");
  if (dataset != "circle" && dataset != "two_moons" && dataset != "csv" && dataset != "idx") {
    throw std::invalid_argument("unknown dataset '" + dataset + "'");
  }
  if ((dataset == "csv" || dataset == "idx") && data_path.empty()) {
    throw std::invalid_argument("dataset '" + dataset + "' requires data_path");
  }
  if ((dataset == "circle" || dataset == "two_moons") && data_n == 0) {
    throw std::invalid_argument("data_n must be positive");
  }
  if (dataset == "circle" && radius <= 0.0) {
    throw std::invalid_argument("radius must be positive");
  }
  if (data_noise < 0.0) throw std::invalid_argument("data_noise must be non-negative");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::istringstream stream(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(line_no, "expected 'key = value', got '" + std::string(line) + "'");
    }
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "missing key before '='");
    if (value.empty()) fail(line_no, "missing value for '" + std::string(key) + "'");

    if (key == "lr_disc") {
      config.train.lr_discriminator = parse_double(value, key, line_no);
    } else if (key == "lr_gen") {
      config.train.lr_generator = parse_double(value, key, line_no);
    } else if (key == "mu") {
      config.train.mu = parse_double(value, key, line_no);
    } else if (key == "eta") {
      config.train.eta = parse_double(value, key, line_no);
    } else if (key == "batch_size") {
      config.train.batch_size = parse_size(value, key, line_no);
    } else if (key == "epochs") {
      config.train.epochs = parse_size(value, key, line_no);
    } else if (key == "coord_sample") {
      config.train.coord_sample_size = parse_size(value, key, line_no);
    } else if (key == "zero_weight") {
      config.train.zero_weight = parse_double(value, key, line_no);
    } else if (key == "anneal_start") {
      config.train.anneal_start_epoch = parse_size(value, key, line_no);
    } else if (key == "patience") {
      config.train.early_stop_patience = parse_size(value, key, line_no);
    } else if (key == "min_epoch") {
      config.train.early_stop_min_epoch = parse_size(value, key, line_no);
    } else if (key == "seed") {
      config.train.seed = parse_size(value, key, line_no);
    } else if (key == "beta1") {
      config.train.adam.beta1 = parse_double(value, key, line_no);
    } else if (key == "beta2") {
      config.train.adam.beta2 = parse_double(value, key, line_no);
    } else if (key == "epsilon") {
      config.train.adam.epsilon = parse_double(value, key, line_no);
    } else if (key == "grad_penalty") {
      config.train.grad_penalty = parse_bool(value, key, line_no);
    } else if (key == "gen_hidden") {
      config.gen_hidden = parse_size_list(value, key, line_no);
    } else if (key == "clf_hidden") {
      config.clf_hidden = parse_size_list(value, key, line_no);
    } else if (key == "coord_dim") {
      config.coord_dim = parse_size(value, key, line_no);
    } else if (key == "dataset") {
      config.dataset = std::string(value);
    } else if (key == "data_n") {
      config.data_n = parse_size(value, key, line_no);
    } else if (key == "data_noise") {
      config.data_noise = parse_double(value, key, line_no);
    } else if (key == "radius") {
      config.radius = parse_double(value, key, line_no);
    } else if (key == "labels_per_class") {
      config.labels_per_class = parse_size(value, key, line_no);
    } else if (key == "val_n") {
      config.val_n = parse_size(value, key, line_no);
    } else if (key == "data_path") {
      config.data_path = std::string(value);
    } else if (key == "log_csv") {
      config.log_csv = std::string(value);
    } else {
      fail(line_no, "unknown key '" + std::string(key) + "'");
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

}  // namespace lgan
