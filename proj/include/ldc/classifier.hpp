#pragma once

#include <cstdint>

#include "ldc/linstats.hpp"
#include "ldc/matrix.hpp"

namespace ldc {

// Cosine classifier: one row per class, prediction by scaled cosine
// similarity. Rows are only ever appended, never reordered.
struct ClassifierState {
  Matrix vectors;      // N x d
  double scale = 16.0;

  std::size_t n_classes() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
};

// Row i = mean of class-i features. Class order follows the list order.
ClassifierState init_prototypes(const std::vector<Matrix>& per_class_features,
                                double scale = 16.0);

// logit_i = scale * (x . w_i) / (|x| |w_i|)
Vector cosine_logits(const Vector& x, const ClassifierState& c);
int predict(const Vector& x, const ClassifierState& c);

struct CrossEntropyResult {
  double loss;         // mean over the batch
  Matrix dlogits;      // (softmax - onehot) / batch
};

CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels);

ClassifierState expand(const ClassifierState& c, const Matrix& new_prototypes);

struct ClassifierGrad {
  double loss;      // mean cross-entropy of cosine logits over data
  Matrix dvectors;  // N x d gradient of that loss in the classifier rows
};

ClassifierGrad classifier_gradient(const ClassifierState& c, const SampleSet& data);

enum class TrainableRows { All, NewOnly };

// SGD on cross-entropy of cosine logits. first_new_row marks where "new"
// rows begin when masking is NewOnly.
ClassifierState train_classifier(ClassifierState c, const SampleSet& data, std::size_t epochs,
                                 double lr, TrainableRows rows = TrainableRows::All,
                                 std::size_t first_new_row = 0);

double classification_accuracy(const ClassifierState& c, const SampleSet& data);

}  // namespace ldc
