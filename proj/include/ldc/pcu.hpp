#pragma once

#include <cstdint>

#include "ldc/classifier.hpp"
#include "ldc/diffnet.hpp"
#include "ldc/linalg.hpp"
#include "ldc/linstats.hpp"

namespace ldc {

// Calibration unit: a covariance-mapping net, a recurrent feature-calibration
// net, and the shared covariance. Its serialized size depends on d alone, so
// stored state never grows with the class count.
struct PcuState {
  Net mapping_net;   // maps (w w^T, shared sigma) to a per-class covariance
  Net calib_net;     // residual d -> d refinement applied R times per row
  SharedCovariance shared;
  std::size_t samples_per_class = 64;
  std::size_t recur_iters = 3;

  std::size_t dim() const { return shared.dim(); }
};

// Mapping net is {2d^2, 4d, d^2} with ReLU, calibration net {d, 4d, d}
// residual with ReLU; both last layers are scaled down so the unit starts
// near the identity mapping.
PcuState make_pcu(std::size_t d, std::uint64_t seed, std::size_t samples_per_class = 64,
                  std::size_t recur_iters = 3);

// Everything backward needs to push matching-loss gradients into the
// mapping net for one class.
struct MapCovCache {
  ForwardCache net_cache;
  EigResult eig;        // of the pre-clamp matrix
  Matrix mapped;        // the clamped output
  Matrix lower;         // cholesky factor of mapped
  double jitter = 0.0;
};

constexpr double kPsdClampFloor = 1e-6;

// Sigma_i = psd_clamp(sym(reshape(net(w w^T, sigma))) + sigma, 1e-6)
Matrix map_covariance(const PcuState& pcu, const Vector& w, MapCovCache* cache = nullptr);

// Gradient of a loss wrt the mapping net, given the symmetric-convention
// gradient wrt the clamped covariance. Returns the accumulated net grads.
void map_covariance_backward(const PcuState& pcu, const MapCovCache& cache,
                             const Matrix& mapped_bar, GradBundle& mapping_grads);

// Per class: samples_per_class rows of w_i + L_i u, labels = class id.
SampleSet sample_biased(const PcuState& pcu, const ClassifierState& classifier,
                        const std::vector<int>& class_ids, std::uint64_t seed);

// Applies calib_net row-wise recur_iters times; labels pass through.
SampleSet calibrate(const PcuState& pcu, const SampleSet& biased);

struct MatchingLossResult {
  double loss;     // mean divergence across classes
  Matrix dfeatures;  // same shape as calibrated.features
};

// Fits Gaussians per class to both sets, averages the divergence across
// classes, and differentiates through the fitted mean and covariance.
MatchingLossResult matching_loss(const SampleSet& calibrated, const SampleSet& real,
                                 DivergenceKind kind = DivergenceKind::KL);

struct PcuTrainResult {
  PcuState pcu;
  std::vector<double> loss_trace;  // one entry per epoch
};

// Base-session training: sample all base classes, calibrate, match against
// the real features, and descend theta_m and theta_r jointly. Bitwise
// reproducible per seed.
PcuTrainResult train_pcu_base(PcuState pcu, const ClassifierState& classifier,
                              const SampleSet& base_data, std::size_t epochs, double lr,
                              std::uint64_t seed, DivergenceKind kind = DivergenceKind::KL);

class ByteWriter;
class ByteReader;
std::vector<std::uint8_t> serialize_pcu(const PcuState& pcu);
PcuState deserialize_pcu(const std::vector<std::uint8_t>& blob);

}  // namespace ldc
