#include "lgan/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

namespace lgan {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'A', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4, "a 32-bit field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8, "a 64-bit field");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string str(std::size_t len) {
    need(len, "a name of " + std::to_string(len) + " bytes");
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  void need(std::size_t count, const std::string& what) {
    if (pos_ + count > bytes_.size()) {
      throw Error("checkpoint '" + path_ + "' truncated: expected " +
                  std::to_string(pos_ + count) + " bytes for " + what +
                  ", file has " + std::to_string(bytes_.size()));
    }
  }

  const std::string& raw() const { return bytes_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

double activation_code(Activation act) {
  switch (act) {
    case Activation::Linear: return 0.0;
    case Activation::LeakyRelu: return 1.0;
    case Activation::Tanh: return 2.0;
    case Activation::Sigmoid: return 3.0;
  }
  throw Error("checkpoint: unknown activation");
}

Activation activation_from_code(double code) {
  if (code == 0.0) return Activation::Linear;
  if (code == 1.0) return Activation::LeakyRelu;
  if (code == 2.0) return Activation::Tanh;
  if (code == 3.0) return Activation::Sigmoid;
  throw Error("checkpoint: unknown activation code " + std::to_string(code));
}

void append_mlp(NamedTensors& out, const Mlp& net, const std::string& prefix) {
  Tensor acts(Shape{net.layers.size()});
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    acts.data()[i] = activation_code(net.layers[i].activation);
  }
  out.emplace_back(prefix + "acts", std::move(acts));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::string layer = prefix + "layer" + std::to_string(i);
    out.emplace_back(layer + ".weights", net.layers[i].weights);
    out.emplace_back(layer + ".bias", net.layers[i].bias);
  }
}

class TensorMap {
 public:
  explicit TensorMap(NamedTensors tensors) : tensors_(std::move(tensors)) {}

  const Tensor& get(const std::string& name) const {
    for (const auto& [key, value] : tensors_) {
      if (key == name) return value;
    }
    throw Error("checkpoint missing tensor '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (const auto& [key, value] : tensors_) {
      if (key == name) return true;
    }
    return false;
  }

 private:
  NamedTensors tensors_;
};

Mlp read_mlp(const TensorMap& map, const std::string& prefix) {
  const Tensor& acts = map.get(prefix + "acts");
  Mlp net;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    const std::string layer = prefix + "layer" + std::to_string(i);
    DenseLayer dense;
    dense.weights = map.get(layer + ".weights");
    dense.bias = map.get(layer + ".bias");
    dense.activation = activation_from_code(acts.data()[i]);
    net.layers.push_back(std::move(dense));
  }
  return net;
}

}  // namespace

void save_tensors(const NamedTensors& tensors, const std::string& path) {
  std::set<std::string> seen;
  for (const auto& [name, value] : tensors) {
    if (!seen.insert(name).second) {
      throw Error("checkpoint: duplicate tensor name '" + name + "'");
    }
  }

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, std::uint32_t(tensors.size()));
  for (const auto& [name, value] : tensors) {
    put_u32(out, std::uint32_t(name.size()));
    out.append(name);
    const Shape& shape = value.shape();
    put_u32(out, std::uint32_t(shape.size()));
    for (std::size_t extent : shape) put_u64(out, extent);
    for (double v : value.data()) put_f64(out, v);
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw Error("checkpoint: cannot open '" + path + "' for writing");
  }
  file.write(out.data(), std::streamsize(out.size()));
  if (!file) throw Error("checkpoint: write to '" + path + "' failed");
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error("checkpoint: cannot open '" + path + "'");
  std::string bytes{std::istreambuf_iterator<char>(file),
                    std::istreambuf_iterator<char>()};
  Reader reader(std::move(bytes), path);

  reader.need(4, "the magic");
  std::string magic = reader.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw Error("checkpoint '" + path + "' has bad magic '" + magic +
                "', expected 'LGAN'");
  }
  std::uint32_t version = reader.u32();
  if (version != kVersion) {
    throw Error("checkpoint '" + path + "' has unsupported version " +
                std::to_string(version) + ", expected " +
                std::to_string(kVersion));
  }

  std::uint32_t count = reader.u32();
  NamedTensors tensors;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = reader.u32();
    std::string name = reader.str(name_len);
    if (!seen.insert(name).second) {
      throw Error("checkpoint '" + path + "' has duplicate tensor name '" +
                  name + "'");
    }
    std::uint32_t rank = reader.u32();
    Shape shape(rank);
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape[r] = std::size_t(reader.u64());
      total *= shape[r];
    }
    reader.need(total * 8, "tensor '" + name + "'");
    Tensor value(shape);
    for (double& v : value.data()) v = reader.f64();
    tensors.emplace_back(std::move(name), std::move(value));
  }
  return tensors;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  checkpoint.generator.validate();
  checkpoint.data.validate();

  NamedTensors tensors;
  tensors.emplace_back("meta.mode",
                       Tensor::from_vector({double(int(checkpoint.mode))}));
  tensors.emplace_back(
      "gen.shape",
      Tensor::from_vector({double(checkpoint.generator.ambient_dim),
                           double(checkpoint.generator.coord_dim),
                           checkpoint.generator.residual ? 1.0 : 0.0}));
  append_mlp(tensors, checkpoint.generator.core, "gen.");

  if (checkpoint.mode == Checkpoint::Mode::Adversarial) {
    append_mlp(tensors, checkpoint.discriminator, "disc.");
  } else {
    checkpoint.classifier.validate();
    tensors.emplace_back(
        "clf.meta",
        Tensor::from_vector({double(checkpoint.classifier.num_classes)}));
    append_mlp(tensors, checkpoint.classifier.as_mlp(), "clf.");
  }

  tensors.emplace_back("data.points", checkpoint.data.points);
  if (checkpoint.data.labeled()) {
    Tensor labels(Shape{checkpoint.data.labels.size()});
    for (std::size_t i = 0; i < checkpoint.data.labels.size(); ++i) {
      labels.data()[i] = double(checkpoint.data.labels[i]);
    }
    tensors.emplace_back("data.labels", std::move(labels));
  }
  save_tensors(tensors, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  TensorMap map(load_tensors(path));

  Checkpoint checkpoint;
  double mode = map.get("meta.mode").data()[0];
  if (mode != 0.0 && mode != 1.0) {
    throw Error("checkpoint '" + path + "' has unknown mode " +
                std::to_string(mode));
  }
  checkpoint.mode = mode == 0.0 ? Checkpoint::Mode::Adversarial
                                : Checkpoint::Mode::SemiSupervised;

  const Tensor& gen_shape = map.get("gen.shape");
  checkpoint.generator.ambient_dim = std::size_t(gen_shape.data()[0]);
  checkpoint.generator.coord_dim = std::size_t(gen_shape.data()[1]);
  checkpoint.generator.residual = gen_shape.data()[2] != 0.0;
  checkpoint.generator.core = read_mlp(map, "gen.");
  checkpoint.generator.validate();

  if (checkpoint.mode == Checkpoint::Mode::Adversarial) {
    checkpoint.discriminator = read_mlp(map, "disc.");
  } else {
    std::size_t num_classes = std::size_t(map.get("clf.meta").data()[0]);
    checkpoint.classifier =
        ClassifierModel::from_mlp(read_mlp(map, "clf."), num_classes);
  }

  checkpoint.data.points = map.get("data.points");
  checkpoint.data.name = "checkpoint";
  if (map.has("data.labels")) {
    const Tensor& labels = map.get("data.labels");
    checkpoint.data.labels.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      checkpoint.data.labels[i] = int(labels.data()[i]);
    }
  }
  checkpoint.data.validate();
  return checkpoint;
}

}  // namespace lgan
