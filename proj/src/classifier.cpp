#include "lgan/classifier.hpp"

#include <cmath>

namespace lgan {

void ClassifierModel::validate() const {
  if (num_classes == 0) throw Error("classifier: need at least one real class");
  if (trunk.layers.empty()) throw Error("classifier: trunk has no layers");
  if (head.activation != Activation::Linear) {
    throw Error("classifier: head must be linear");
  }
  if (head.in_dim() != trunk.out_dim()) {
    throw Error("classifier: head expects " + std::to_string(head.in_dim()) +
                " features, trunk produces " + std::to_string(trunk.out_dim()));
  }
  if (head.out_dim() != num_classes + 1) {
    throw Error("classifier: head must produce " +
                std::to_string(num_classes + 1) + " logits, produces " +
                std::to_string(head.out_dim()));
  }
}

Mlp ClassifierModel::as_mlp() const {
  Mlp joint = trunk;
  joint.layers.push_back(head);
  return joint;
}

ClassifierModel ClassifierModel::from_mlp(const Mlp& joint,
                                          std::size_t num_classes) {
  if (joint.layers.size() < 2) {
    throw Error("classifier: joint network needs a trunk and a head");
  }
  ClassifierModel clf;
  clf.num_classes = num_classes;
  clf.trunk.layers.assign(joint.layers.begin(), joint.layers.end() - 1);
  clf.head = joint.layers.back();
  clf.validate();
  return clf;
}

ClassifierModel make_classifier(std::size_t in_dim,
                                const std::vector<std::size_t>& hidden,
                                std::size_t num_classes, Activation hidden_act,
                                std::uint64_t seed) {
  if (hidden.empty()) {
    throw Error("make_classifier: need at least one hidden layer for features");
  }
  ClassifierModel clf;
  clf.num_classes = num_classes;
  Mlp joint =
      init_params(mlp_spec(in_dim, hidden, num_classes + 1, hidden_act), seed);
  return ClassifierModel::from_mlp(joint, num_classes);
}

Tensor classifier_logits(const ClassifierModel& clf, const Tensor& x) {
  clf.validate();
  return mlp_forward(clf.as_mlp(), x);
}

Tensor classifier_features(const ClassifierModel& clf, const Tensor& x) {
  clf.validate();
  return mlp_forward(clf.trunk, x);
}

Tensor log_softmax(const Tensor& logits) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw Error("log_softmax: expected a vector or matrix, got " +
                shape_str(logits.shape()));
  }
  std::size_t rows = logits.rank() == 2 ? logits.shape()[0] : 1;
  std::size_t cols = logits.rank() == 2 ? logits.shape()[1] : logits.shape()[0];
  Tensor out(logits.shape());
  auto ld = logits.data();
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = ld.data() + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(row[c] - mx);
    double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) od[r * cols + c] = row[c] - lse;
  }
  return out;
}

Tensor class_probabilities(const ClassifierModel& clf, const Tensor& x) {
  Tensor lp = log_softmax(classifier_logits(clf, x));
  for (double& v : lp.data()) v = std::exp(v);
  return lp;
}

std::size_t predict_class(const ClassifierModel& clf, const Tensor& x) {
  Tensor logits = classifier_logits(clf, x);
  if (logits.rank() != 1) {
    throw Error("predict_class: expected a single point");
  }
  auto ld = logits.data();
  std::size_t best = 0;
  for (std::size_t k = 1; k < clf.num_classes; ++k) {
    if (ld[k] > ld[best]) best = k;
  }
  return best;
}

}  // namespace lgan
