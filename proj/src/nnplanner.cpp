#include "kinplan/nnplanner.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "kinplan/errors.hpp"
#include "kinplan/random.hpp"

namespace kinplan {
namespace {

constexpr char kMagic[4] = {'K', 'P', 'N', 'N'};
constexpr std::uint8_t kVersion = 1;
constexpr int kShapeFields = 8;

double leaky(double z) { return z > 0.0 ? z : kLeakySlope * z; }
double leaky_slope(double z) { return z > 0.0 ? 1.0 : kLeakySlope; }

int strided_length(int n, int kernel) { return (n + 2 * (kernel / 2) - kernel) / 2 + 1; }

// Stride-2 convolution with zero padding kernel / 2.
Eigen::VectorXd conv_forward(const PlannerParams& p, PlannerParams::LayerId id,
                             const Eigen::VectorXd& x, int in_ch, int in_len, int out_len) {
  const int K = p.shape().kernel, pad = K / 2;
  const int out_ch = p.layer(id).rows;
  Eigen::VectorXd z(out_ch * out_len);
  for (int c = 0; c < out_ch; ++c)
    for (int o = 0; o < out_len; ++o) {
      double acc = p.bias(id, c);
      for (int ci = 0; ci < in_ch; ++ci)
        for (int t = 0; t < K; ++t) {
          const int i = 2 * o - pad + t;
          if (i < 0 || i >= in_len) continue;
          acc += p.weight(id, c, ci * K + t) * x[ci * in_len + i];
        }
      z[c * out_len + o] = acc;
    }
  return z;
}

// Accumulates weight/bias gradients and returns dL/dx.
Eigen::VectorXd conv_backward(const PlannerParams& p, PlannerParams::LayerId id,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& dz, int in_ch,
                              int in_len, int out_len, Eigen::VectorXd& grad) {
  const int K = p.shape().kernel, pad = K / 2;
  const auto& L = p.layer(id);
  const auto wo = static_cast<Eigen::Index>(L.weight_offset);
  const auto bo = static_cast<Eigen::Index>(L.bias_offset);
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(in_ch * in_len);
  for (int c = 0; c < L.rows; ++c)
    for (int o = 0; o < out_len; ++o) {
      const double g = dz[c * out_len + o];
      if (g == 0.0) continue;
      grad[bo + c] += g;
      for (int ci = 0; ci < in_ch; ++ci)
        for (int t = 0; t < K; ++t) {
          const int i = 2 * o - pad + t;
          if (i < 0 || i >= in_len) continue;
          grad[wo + c * L.cols + ci * K + t] += g * x[ci * in_len + i];
          dx[ci * in_len + i] += g * p.weight(id, c, ci * K + t);
        }
    }
  return dx;
}

Eigen::VectorXd dense_forward(const PlannerParams& p, PlannerParams::LayerId id,
                              const Eigen::VectorXd& x) {
  const auto& L = p.layer(id);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
      p.values().data() + L.weight_offset, L.rows, L.cols);
  return W * x + p.values().segment(static_cast<Eigen::Index>(L.bias_offset), L.rows);
}

Eigen::VectorXd dense_backward(const PlannerParams& p, PlannerParams::LayerId id,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& dz,
                               Eigen::VectorXd& grad) {
  const auto& L = p.layer(id);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
      p.values().data() + L.weight_offset, L.rows, L.cols);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dW(
      grad.data() + L.weight_offset, L.rows, L.cols);
  dW.noalias() += dz * x.transpose();
  grad.segment(static_cast<Eigen::Index>(L.bias_offset), L.rows) += dz;
  return W.transpose() * dz;
}

Eigen::VectorXd apply_leaky(const Eigen::VectorXd& z) { return z.unaryExpr(&leaky); }

Eigen::VectorXd leaky_back(const Eigen::VectorXd& z, const Eigen::VectorXd& da) {
  return da.cwiseProduct(z.unaryExpr(&leaky_slope));
}

}  // namespace

void NetworkShape::validate() const {
  for (int v : {n_beams, k, conv1_channels, conv2_channels, kernel, goal_hidden, hidden1, hidden2})
    if (v <= 0) throw std::invalid_argument("NetworkShape: sizes must be positive");
  if (kernel % 2 == 0) throw std::invalid_argument("NetworkShape: kernel must be odd");
}

int NetworkShape::conv1_length() const { return strided_length(n_beams, kernel); }
int NetworkShape::conv2_length() const { return strided_length(conv1_length(), kernel); }

NetworkShape NetworkShape::micro(int n_beams, int k) {
  NetworkShape s;
  s.n_beams = n_beams;
  s.k = k;
  s.conv1_channels = 2;
  s.conv2_channels = 3;
  s.kernel = 3;
  s.goal_hidden = 4;
  s.hidden1 = 6;
  s.hidden2 = 5;
  return s;
}

PlannerParams::PlannerParams(const NetworkShape& shape) : shape_(shape) {
  shape_.validate();
  const int K = shape_.kernel;
  const int dims[kLayerCount][2] = {
      {shape_.conv1_channels, K},
      {shape_.conv2_channels, shape_.conv1_channels * K},
      {shape_.goal_hidden, 2},
      {shape_.hidden1, shape_.feature_size() + shape_.goal_hidden},
      {shape_.hidden2, shape_.hidden1},
      {shape_.output_size(), shape_.hidden2},
  };
  std::size_t off = 0;
  for (int l = 0; l < kLayerCount; ++l) {
    Layer& L = layers_[l];
    L.rows = dims[l][0];
    L.cols = dims[l][1];
    L.weight_offset = off;
    off += static_cast<std::size_t>(L.rows) * static_cast<std::size_t>(L.cols);
    L.bias_offset = off;
    off += static_cast<std::size_t>(L.rows);
  }
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(off));
}

PlannerParams PlannerParams::init(const NetworkShape& shape, std::uint64_t seed) {
  PlannerParams p(shape);
  Rng rng(seed);
  for (const Layer& L : p.layers_) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / L.fan_in()));
    const std::size_t n = static_cast<std::size_t>(L.rows) * static_cast<std::size_t>(L.cols);
    for (std::size_t i = 0; i < n; ++i)
      p.values_[static_cast<Eigen::Index>(L.weight_offset + i)] = dist(rng);
  }
  return p;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PlannerOutput forward(const PlannerParams& params, const RangeScan& scan, const Vec2& goal,
                      ForwardCache* cache) {
  if (!(scan.max_range > 0.0)) throw std::invalid_argument("forward: scan max_range must be > 0");
  std::vector<double> normalized(scan.beams.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) normalized[i] = scan.beams[i] / scan.max_range;
  return forward_normalized(params, normalized, goal, cache);
}

PlannerOutput forward_normalized(const PlannerParams& params, std::span<const double> scan,
                                 const Vec2& goal, ForwardCache* cache) {
  const NetworkShape& s = params.shape();
  if (static_cast<int>(scan.size()) != s.n_beams)
    throw std::invalid_argument("forward: scan length does not match the network input");
  if (!goal.allFinite()) throw std::invalid_argument("forward: goal must be finite");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.shape = s;
  c.param_count = params.size();
  c.scan = Eigen::Map<const Eigen::VectorXd>(scan.data(), s.n_beams);
  c.goal = kGoalInputScale * goal;

  const int L1 = s.conv1_length(), L2 = s.conv2_length();
  c.z1 = conv_forward(params, PlannerParams::kConv1, c.scan, 1, s.n_beams, L1);
  c.z2 = conv_forward(params, PlannerParams::kConv2, apply_leaky(c.z1), s.conv1_channels, L1, L2);
  c.zg = dense_forward(params, PlannerParams::kGoal, c.goal);
  c.h0.resize(s.feature_size() + s.goal_hidden);
  c.h0 << apply_leaky(c.z2), apply_leaky(c.zg);
  c.z3 = dense_forward(params, PlannerParams::kFc1, c.h0);
  c.z4 = dense_forward(params, PlannerParams::kFc2, apply_leaky(c.z3));
  c.out = dense_forward(params, PlannerParams::kOut, apply_leaky(c.z4));

  PlannerOutput r;
  Vec2 acc = Vec2::Zero();
  for (int i = 0; i < s.k; ++i) {
    acc += c.out.segment<2>(2 * i);
    r.waypoints.points.push_back(acc);
  }
  r.safety_logit = c.out[2 * s.k];
  r.waypoints.safety_score = sigmoid(r.safety_logit);
  return r;
}

void backward(const PlannerParams& params, const ForwardCache& c,
              std::span<const double> grad_waypoints, double grad_logit, Eigen::VectorXd& grad) {
  const NetworkShape& s = params.shape();
  if (!(c.shape == s) || c.param_count != params.size() || c.out.size() != s.output_size())
    throw CacheMismatch("backward: cache was produced by a different network");
  if (static_cast<int>(grad_waypoints.size()) != 2 * s.k)
    throw CacheMismatch("backward: waypoint gradient has the wrong length");
  if (grad.size() == 0) grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  if (grad.size() != static_cast<Eigen::Index>(params.size()))
    throw CacheMismatch("backward: gradient buffer has the wrong length");

  // Waypoint i is the sum of deltas 0..i, so delta j collects every later
  // waypoint gradient.
  Eigen::VectorXd d_out(s.output_size());
  Vec2 suffix = Vec2::Zero();
  for (int i = s.k - 1; i >= 0; --i) {
    suffix += Vec2(grad_waypoints[2 * i], grad_waypoints[2 * i + 1]);
    d_out.segment<2>(2 * i) = suffix;
  }
  d_out[2 * s.k] = grad_logit;

  const int L1 = s.conv1_length(), L2 = s.conv2_length(), F = s.feature_size();
  Eigen::VectorXd da4 = dense_backward(params, PlannerParams::kOut, apply_leaky(c.z4), d_out, grad);
  Eigen::VectorXd da3 = dense_backward(params, PlannerParams::kFc2, apply_leaky(c.z3),
                                       leaky_back(c.z4, da4), grad);
  Eigen::VectorXd dh0 = dense_backward(params, PlannerParams::kFc1, c.h0, leaky_back(c.z3, da3), grad);
  dense_backward(params, PlannerParams::kGoal, c.goal,
                 leaky_back(c.zg, dh0.tail(s.goal_hidden)), grad);
  Eigen::VectorXd da1 = conv_backward(params, PlannerParams::kConv2, apply_leaky(c.z1),
                                      leaky_back(c.z2, dh0.head(F)), s.conv1_channels, L1, L2, grad);
  conv_backward(params, PlannerParams::kConv1, c.scan, leaky_back(c.z1, da1), 1, s.n_beams, L1,
                grad);
}

namespace detail {

void BinaryWriter::bytes(const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    hash_ ^= b[i];
    hash_ *= 0x100000001b3ULL;
  }
  os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os_) throw std::runtime_error("write failed");
}

namespace {
template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  U out = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xff);
  return out;
}
}  // namespace

void BinaryWriter::i32(std::int32_t v) {
  const auto u = to_little(static_cast<std::uint32_t>(v));
  bytes(&u, 4);
}
void BinaryWriter::u64(std::uint64_t v) {
  const auto u = to_little(v);
  bytes(&u, 8);
}
void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
void BinaryWriter::finish() {
  const auto u = to_little(hash_);
  os_.write(reinterpret_cast<const char*>(&u), 8);
  if (!os_) throw std::runtime_error("write failed");
}

void BinaryReader::bytes(void* p, std::size_t n) {
  is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError("unexpected end of file");
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    hash_ ^= b[i];
    hash_ *= 0x100000001b3ULL;
  }
}
std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}
std::int32_t BinaryReader::i32() {
  std::uint32_t v;
  bytes(&v, 4);
  return static_cast<std::int32_t>(to_little(v));
}
std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  bytes(&v, 8);
  return to_little(v);
}
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }
void BinaryReader::verify() {
  const std::uint64_t expected = hash_;
  std::uint64_t v;
  is_.read(reinterpret_cast<char*>(&v), 8);
  if (is_.gcount() != 8) throw FormatError("missing checksum");
  if (to_little(v) != expected) throw FormatError("checksum mismatch");
}

void write_params_body(BinaryWriter& w, const PlannerParams& params) {
  w.bytes(kMagic, 4);
  w.u8(kVersion);
  const NetworkShape& s = params.shape();
  w.i32(kShapeFields);
  for (int v : {s.n_beams, s.k, s.conv1_channels, s.conv2_channels, s.kernel, s.goal_hidden,
                s.hidden1, s.hidden2})
    w.i32(v);
  w.u64(params.size());
  for (Eigen::Index i = 0; i < params.values().size(); ++i) w.f64(params.values()[i]);
}

PlannerParams read_params_body(BinaryReader& r) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a parameter file");
  if (r.u8() != kVersion) throw FormatError("unsupported parameter file version");
  if (r.i32() != kShapeFields) throw FormatError("unexpected shape header");
  NetworkShape s;
  for (int* f : {&s.n_beams, &s.k, &s.conv1_channels, &s.conv2_channels, &s.kernel,
                 &s.goal_hidden, &s.hidden1, &s.hidden2})
    *f = r.i32();
  PlannerParams p;
  try {
    p = PlannerParams(s);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid shape header: ") + e.what());
  }
  if (r.u64() != p.size()) throw FormatError("parameter count does not match shape");
  for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()[i] = r.f64();
  return p;
}

}  // namespace detail

void write_params(std::ostream& os, const PlannerParams& params) {
  detail::BinaryWriter w(os);
  detail::write_params_body(w, params);
  w.finish();
}

PlannerParams read_params(std::istream& is) {
  detail::BinaryReader r(is);
  PlannerParams p = detail::read_params_body(r);
  r.verify();
  if (!p.all_finite()) throw FormatError("non-finite parameter values");
  return p;
}

void save_params(const std::string& path, const PlannerParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_params(os, params);
}

PlannerParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_params(is);
}

}  // namespace kinplan
