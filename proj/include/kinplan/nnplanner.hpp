#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinplan/envsim.hpp"
#include "kinplan/refpath.hpp"

namespace kinplan {

/// Layer sizes. The encoder is two strided 1D convolutions over the range
/// scan; its flattened output (F = conv2_channels * N / 4) is concatenated
/// with the goal embedding and fed to a three-layer head emitting 2k waypoint
/// deltas plus one safety logit.
struct NetworkShape {
  int n_beams = 64;
  int k = 5;
  int conv1_channels = 4;
  int conv2_channels = 8;
  int kernel = 5;  // odd; stride 2, padding kernel / 2
  int goal_hidden = 32;
  int hidden1 = 128;
  int hidden2 = 64;

  /// Throws std::invalid_argument for non-positive sizes or an even kernel.
  void validate() const;
  int conv1_length() const;
  int conv2_length() const;
  int feature_size() const { return conv2_channels * conv2_length(); }
  int output_size() const { return 2 * k + 1; }
  bool operator==(const NetworkShape&) const = default;

  /// Small network for finite-difference checks.
  static NetworkShape micro(int n_beams = 8, int k = 2);
};

/// Goal coordinates are multiplied by this before the goal embedding.
inline constexpr double kGoalInputScale = 0.1;
inline constexpr double kLeakySlope = 0.01;

/// Flat parameter vector with named views. Layer order: conv1 (W, b), conv2
/// (W, b), goal (W, b), fc1 (W, b), fc2 (W, b), out (W, b). Dense weights are
/// row-major [out][in]; conv weights are [out_channel][in_channel][tap].
class PlannerParams {
 public:
  struct Layer {
    int rows = 0;  // outputs (channels for conv)
    int cols = 0;  // inputs (in_channels * kernel for conv)
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    int fan_in() const { return cols; }
  };
  enum LayerId { kConv1, kConv2, kGoal, kFc1, kFc2, kOut, kLayerCount };

  PlannerParams() : PlannerParams(NetworkShape{}) {}
  explicit PlannerParams(const NetworkShape& shape);  // all zeros

  /// He-style init: weights N(0, 2 / fan_in), biases zero; deterministic per
  /// seed.
  static PlannerParams init(const NetworkShape& shape, std::uint64_t seed);

  const NetworkShape& shape() const { return shape_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const Layer& layer(LayerId id) const { return layers_[id]; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  double weight(LayerId id, int r, int c) const {
    const Layer& l = layers_[id];
    return values_[static_cast<Eigen::Index>(l.weight_offset) + r * l.cols + c];
  }
  double bias(LayerId id, int r) const {
    return values_[static_cast<Eigen::Index>(layers_[id].bias_offset) + r];
  }

  bool all_finite() const { return values_.allFinite(); }
  bool operator==(const PlannerParams& o) const {
    return shape_ == o.shape_ && values_.size() == o.values_.size() &&
           (values_.array() == o.values_.array()).all();
  }

 private:
  NetworkShape shape_;
  Layer layers_[kLayerCount];
  Eigen::VectorXd values_;
};

/// Every pre-activation of one forward call, kept for backward.
struct ForwardCache {
  NetworkShape shape;
  std::size_t param_count = 0;
  Eigen::VectorXd scan;   // normalized input, N
  Eigen::Vector2d goal;   // scaled input
  Eigen::VectorXd z1, z2;  // conv pre-activations, channel-major
  Eigen::VectorXd zg;
  Eigen::VectorXd h0;      // concat(leaky(z2), leaky(zg))
  Eigen::VectorXd z3, z4;
  Eigen::VectorXd out;     // raw output, 2k + 1
};

struct PlannerOutput {
  Waypoints waypoints;  // body frame, cumulative sums of the deltas
  double safety_logit = 0.0;
};

/// Scan ranges are divided by scan.max_range. Throws std::invalid_argument
/// when the scan length differs from the network input or the goal is not
/// finite.
PlannerOutput forward(const PlannerParams& params, const RangeScan& scan, const Vec2& goal,
                      ForwardCache* cache = nullptr);

/// Same, with already normalized ranges.
PlannerOutput forward_normalized(const PlannerParams& params, std::span<const double> scan,
                                 const Vec2& goal, ForwardCache* cache = nullptr);

/// Accumulates dL/dparams into grad (resized and zeroed when empty) given
/// dL/dwaypoints (2k, x-y interleaved) and dL/dsafety_logit. Throws
/// CacheMismatch when the cache, gradients or buffer do not match params.
void backward(const PlannerParams& params, const ForwardCache& cache,
              std::span<const double> grad_waypoints, double grad_logit,
              Eigen::VectorXd& grad);

double sigmoid(double x);

// Parameter file (all integers little-endian):
//   bytes 0-3   "KPNN"
//   byte  4     format version (1)
//   int32       number of shape fields S (8)
//   int32 x S   n_beams k conv1 conv2 kernel goal_hidden hidden1 hidden2
//   uint64      parameter count P
//   float64 x P values in flat layout order
//   uint64      FNV-1a 64 hash of every preceding byte
void write_params(std::ostream& os, const PlannerParams& params);
PlannerParams read_params(std::istream& is);
void save_params(const std::string& path, const PlannerParams& params);
PlannerParams load_params(const std::string& path);

namespace detail {

/// Little-endian binary helpers shared with the checkpoint format.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}
  void bytes(const void* p, std::size_t n);
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void i32(std::int32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void finish();  // appends the running hash
 private:
  std::ostream& os_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}
  void bytes(void* p, std::size_t n);
  std::uint8_t u8();
  std::int32_t i32();
  std::uint64_t u64();
  double f64();
  void verify();  // reads the trailing hash; throws FormatError on mismatch
 private:
  std::istream& is_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

void write_params_body(BinaryWriter& w, const PlannerParams& params);
PlannerParams read_params_body(BinaryReader& r);

}  // namespace detail
}  // namespace kinplan
