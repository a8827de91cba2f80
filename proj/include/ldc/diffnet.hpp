#pragma once

#include <cstdint>
#include <vector>

#include "ldc/matrix.hpp"

namespace ldc {

enum class Activation : std::uint8_t { Relu = 0, Identity = 1 };

struct Layer {
  Matrix w;  // out x in
  Vector b;  // out
  Activation act = Activation::Identity;

  std::size_t in_dim() const { return w.cols(); }
  std::size_t out_dim() const { return w.rows(); }
};

// Dense stack. When residual is set the (equal-dimension) input is added to
// the final layer's output, so an all-zero net is the identity map.
struct Net {
  std::vector<Layer> layers;
  bool residual = false;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  std::size_t param_count() const;
};

struct GradBundle {
  std::vector<Matrix> dw;
  std::vector<Vector> db;

  static GradBundle zeros_like(const Net& net);
  void accumulate(const GradBundle& other, double factor = 1.0);
  void scale(double factor);
  double max_abs() const;
};

struct ForwardCache {
  Matrix input;             // n x in
  std::vector<Matrix> pre;  // per layer, n x out, before activation
};

// Rows of x are independent inputs. The cache, when supplied, feeds backward.
Matrix forward(const Net& net, const Matrix& x, ForwardCache* cache = nullptr);
Vector forward(const Net& net, const Vector& x);

struct BackwardResult {
  GradBundle grads;
  Matrix input_grad;  // n x in
};

// Reverse-mode gradients for the forward map. upstream is n x out.
BackwardResult backward(const Net& net, const ForwardCache& cache, const Matrix& upstream);

// Plain SGD, value in, value out; shapes must match.
Net sgd_step(Net net, const GradBundle& grads, double lr);

enum class InitScheme { He, Xavier };

// sizes = {in, hidden..., out}; ReLU on all but the last layer, biases zero,
// weights drawn per scheme, deterministic per seed.
Net init_net(const std::vector<std::size_t>& sizes, InitScheme scheme, std::uint64_t seed,
             bool residual = false);

std::vector<std::uint8_t> serialize_net(const Net& net);
class ByteReader;
Net deserialize_net(ByteReader& in);
Net deserialize_net(const std::vector<std::uint8_t>& blob);
class ByteWriter;
void serialize_net(const Net& net, ByteWriter& out);

}  // namespace ldc
