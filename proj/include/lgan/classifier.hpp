#ifndef LGAN_CLASSIFIER_HPP
#define LGAN_CLASSIFIER_HPP

#include <cstddef>
#include <vector>

#include "lgan/nets.hpp"
#include "lgan/tensor.hpp"

namespace lgan {

/// (K+1)-way classifier: a trunk producing the feature representation used
/// by feature matching, and a linear head producing K+1 logits. Class K
/// (zero-based) is the fake class; classes 0..K-1 are real.
struct ClassifierModel {
  Mlp trunk;
  DenseLayer head;
  std::size_t num_classes = 0;  // K, the real classes

  void validate() const;
  std::size_t feature_dim() const { return head.in_dim(); }
  std::size_t logit_count() const { return num_classes + 1; }

  /// Trunk plus head as one network (the head is the last, linear layer).
  Mlp as_mlp() const;
  /// Inverse of as_mlp: the last layer becomes the head.
  static ClassifierModel from_mlp(const Mlp& joint, std::size_t num_classes);
};

ClassifierModel make_classifier(std::size_t in_dim,
                                const std::vector<std::size_t>& hidden,
                                std::size_t num_classes, Activation hidden_act,
                                std::uint64_t seed);

/// K+1 logits for a point [D] or batch [n, D].
Tensor classifier_logits(const ClassifierModel& clf, const Tensor& x);

/// Trunk output (the feature representation) for a point or batch.
Tensor classifier_features(const ClassifierModel& clf, const Tensor& x);

/// Stable log-softmax over the last axis of a vector or matrix.
Tensor log_softmax(const Tensor& logits);

/// Class probabilities P(y | x) over all K+1 classes for a single point.
Tensor class_probabilities(const ClassifierModel& clf, const Tensor& x);

/// Predicted real class: argmax over the first K logits, ties to the lowest
/// index. The fake logit never wins at test time.
std::size_t predict_class(const ClassifierModel& clf, const Tensor& x);

}  // namespace lgan

#endif
