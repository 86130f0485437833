#ifndef LGAN_CHECKPOINT_HPP
#define LGAN_CHECKPOINT_HPP

#include <string>
#include <utility>
#include <vector>

#include "lgan/classifier.hpp"
#include "lgan/data.hpp"
#include "lgan/geometry.hpp"
#include "lgan/nets.hpp"

namespace lgan {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Binary tensor container: "LGAN" magic, format version, then named tensors
/// (name, rank, extents, row-major 64-bit little-endian floats). Round trips
/// are bit-exact. Names must be unique.
void save_tensors(const NamedTensors& tensors, const std::string& path);
NamedTensors load_tensors(const std::string& path);

/// A complete training artifact: the generator, its adversary (discriminator
/// or classifier depending on mode), and the dataset it was trained on, so
/// later commands can walk coordinates from real base points.
struct Checkpoint {
  enum class Mode { Adversarial = 0, SemiSupervised = 1 };

  Mode mode = Mode::Adversarial;
  LocalGeneratorModel generator;
  Mlp discriminator;           // adversarial mode
  ClassifierModel classifier;  // semi-supervised mode
  Dataset data;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lgan

#endif
