#include "kinplan/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "kinplan/errors.hpp"
#include "kinplan/parallel.hpp"
#include "kinplan/random.hpp"

namespace kinplan {
namespace {

namespace fs = std::filesystem;

constexpr char kCheckpointMagic[4] = {'K', 'P', 'C', 'K'};
constexpr std::uint8_t kCheckpointVersion = 1;

// Seed streams derived from the root seed.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamTrainMaps = 2;
constexpr std::uint64_t kStreamHeldOutMaps = 3;
constexpr std::uint64_t kStreamHeldOutTasks = 4;
constexpr std::uint64_t kStreamBatches = 5;

NetworkShape effective_shape(const TrainingConfig& c) {
  NetworkShape s = c.network;
  s.n_beams = c.pipeline.sensor.n_beams;
  return s;
}

}  // namespace

void TrainingConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("config key '" + key + "': " + what);
  };
  if (batch_size < 1) fail("train.batch_size", "must be >= 1");
  if (iterations < 0) fail("train.iterations", "must be >= 0");
  if (!(learning_rate >= 0.0)) fail("train.learning_rate", "must be >= 0");
  if (optimizer != "adam" && optimizer != "sgd") fail("train.optimizer", "must be adam or sgd");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("train.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("train.beta2", "must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail("train.epsilon", "must be > 0");
  if (!(grad_clip >= 0.0)) fail("train.grad_clip", "must be >= 0");
  double sum = 0.0;
  for (double m : mix) {
    if (!(m >= 0.0)) fail("train.mix", "entries must be >= 0");
    sum += m;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("train.mix", "entries must sum to 1");
  if (maps_per_archetype < 1) fail("train.maps_per_archetype", "must be >= 1");
  if (!(max_failed_fraction >= 0.0 && max_failed_fraction <= 1.0))
    fail("train.max_failed_fraction", "must lie in [0, 1]");
  if (checkpoint_every < 0) fail("train.checkpoint_every", "must be >= 0");
  if (jobs < 1) fail("train.jobs", "must be >= 1");
  if (!(d_safe > 0.0)) fail("cost.d_safe", "must be > 0");
  if (network.k < 2) fail("network.k", "must be >= 2");
  if (pipeline.horizon < network.k) fail("plan.horizon", "must be >= network.k");
  try {
    effective_shape(*this).validate();
    pipeline.validate();
    cost.validate();
    env.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void bind_training_config(ConfigSchema& s, TrainingConfig& c) {
  s.add("seed", &c.seed, "root seed");
  s.add("train.batch_size", &c.batch_size);
  s.add("train.iterations", &c.iterations);
  s.add_choice("train.optimizer", &c.optimizer, {"adam", "sgd"});
  s.add("train.learning_rate", &c.learning_rate);
  s.add("train.beta1", &c.beta1);
  s.add("train.beta2", &c.beta2);
  s.add("train.epsilon", &c.epsilon);
  s.add("train.grad_clip", &c.grad_clip, "0 disables");
  s.add("train.mix.forest", &c.mix[0]);
  s.add("train.mix.garage", &c.mix[1]);
  s.add("train.mix.indoor", &c.mix[2]);
  s.add("train.mix.campus", &c.mix[3]);
  s.add("train.maps_per_archetype", &c.maps_per_archetype);
  s.add("train.max_failed_fraction", &c.max_failed_fraction);
  s.add("train.checkpoint_every", &c.checkpoint_every, "iterations, 0 disables");
  s.add("train.jobs", &c.jobs, "worker threads");
  s.add("network.k", &c.network.k, "waypoints");
  s.add("network.conv1_channels", &c.network.conv1_channels);
  s.add("network.conv2_channels", &c.network.conv2_channels);
  s.add("network.kernel", &c.network.kernel);
  s.add("network.goal_hidden", &c.network.goal_hidden);
  s.add("network.hidden1", &c.network.hidden1);
  s.add("network.hidden2", &c.network.hidden2);
  s.add("cost.d_safe", &c.d_safe, "ESDF hinge onset, m");
  s.add("cost.alpha", &c.cost.alpha, "fear");
  s.add("cost.beta", &c.cost.beta, "environment");
  s.add("cost.gamma", &c.cost.gamma, "trajectory");
  s.add("cost.gamma1", &c.cost.gamma1, "goal");
  s.add("cost.gamma2", &c.cost.gamma2, "straightness");
  s.add("cost.gamma3", &c.cost.gamma3, "tracking");
  s.add("env.width", &c.env.width_m, "m");
  s.add("env.height", &c.env.height_m, "m");
  s.add("env.resolution", &c.env.resolution, "m");
  s.add("env.robot_radius", &c.env.robot_radius, "m");
  s.add("env.forest_density", &c.env.forest_density, "trees per 100 m^2");
  s.add("env.goal_min_distance", &c.env.goal_min_distance, "m");
  s.add("env.goal_max_distance", &c.env.goal_max_distance, "m");
  s.add("env.max_goal_bearing", &c.env.max_goal_bearing, "rad, goal bearing bound at the start");
  s.add("env.max_detour", &c.env.max_detour, "free path length / straight distance bound, 0 off");
  bind_pipeline_config(s, c.pipeline);
}

TrainingMap make_training_map(OccupancyGrid grid, const TrainingConfig& config,
                              Archetype archetype, std::uint64_t seed) {
  TrainingMap tm;
  tm.archetype = archetype;
  tm.seed = seed;
  auto g = std::make_shared<OccupancyGrid>(std::move(grid));
  tm.esdf = std::make_shared<EsdfGrid>(build_esdf(*g, config.d_safe));
  tm.tasks = std::make_shared<TaskSampler>(*g, config.env);
  tm.grid = std::move(g);
  return tm;
}

MapPool::MapPool(const TrainingConfig& config, std::uint64_t stream_seed)
    : per_archetype_(config.maps_per_archetype) {
  for (std::size_t a = 0; a < std::size(kAllArchetypes); ++a)
    for (int m = 0; m < per_archetype_; ++m) {
      const Archetype arch = kAllArchetypes[a];
      const std::uint64_t seed = derive_seed(stream_seed, a * 100000 + static_cast<std::uint64_t>(m));
      maps_.push_back(make_training_map(generate_grid(arch, seed, config.env), config, arch, seed));
    }
}

const TrainingMap& MapPool::map(Archetype a, int index) const {
  return maps_.at(static_cast<std::size_t>(a) * static_cast<std::size_t>(per_archetype_) +
                  static_cast<std::size_t>(index));
}

std::vector<TrainingSample> sample_batch(const MapPool& pool, const TrainingConfig& config,
                                         std::uint64_t seed, int iteration, int count) {
  Rng rng(derive_seed(derive_seed(seed, kStreamBatches), static_cast<std::uint64_t>(iteration)));
  std::vector<TrainingSample> out;
  for (int b = 0; b < count; ++b) {
    const double pick = uniform(rng, 0.0, 1.0);
    std::size_t a = 0;
    double acc = config.mix[0];
    while (a + 1 < config.mix.size() && pick >= acc) acc += config.mix[++a];
    const int m = std::uniform_int_distribution<int>(0, pool.maps_per_archetype() - 1)(rng);
    const TrainingMap& map = pool.map(kAllArchetypes[a], m);
    TrainingSample s;
    s.map = &map;
    map.tasks->sample(rng(), s.start, s.goal);
    out.push_back(s);
  }
  return out;
}

SampleResult evaluate_sample(const PlannerParams& params, const TrainingSample& sample,
                             const TrainingConfig& config, bool with_gradient) {
  const PipelineConfig& pc = config.pipeline;
  const PipelineResult r = run_pipeline(params, *sample.map->grid, sample.start, sample.goal, pc);
  CostWeights w = config.cost;
  if (pc.geometric_only) w.gamma3 = 0.0;
  CostInputs in;
  in.esdf = sample.map->esdf.get();
  in.grid = sample.map->grid.get();
  in.start = sample.start;
  in.goal_body = r.goal_body;
  in.mu = r.output.waypoints;
  in.safety_logit = r.output.safety_logit;
  in.states = r.optimized;
  in.reference = r.reference.states;
  in.robot_radius = pc.robot_radius;

  SampleResult res;
  res.cost = evaluate_cost(in, w);
  res.mpc_converged = !r.solution || r.solution->converged;
  if (!with_gradient) return res;

  const int T = r.reference.horizon();
  std::vector<Vec3> d_ref = res.cost.grad_reference;
  if (r.solution) {
    const MpcGradient g = backward(*r.problem, *r.solution, res.cost.grad_states);
    res.approximate_gradient = g.approximate;
    for (int t = 0; t <= T; ++t) d_ref[t] += g.reference[t];
  } else {
    // tau* is the reference itself.
    for (int t = 0; t <= T; ++t) d_ref[t] += res.cost.grad_states[t];
  }
  Eigen::VectorXd d_ref_flat(3 * (T + 1));
  for (int t = 0; t <= T; ++t) d_ref_flat.segment<3>(3 * t) = d_ref[t];
  Eigen::VectorXd d_mu = r.reference.jacobian.transpose() * d_ref_flat;
  for (int i = 0; i < r.output.waypoints.k(); ++i) d_mu.segment<2>(2 * i) += res.cost.grad_mu[i];
  backward(params, r.cache, std::span<const double>(d_mu.data(), static_cast<std::size_t>(d_mu.size())),
           res.cost.grad_logit, res.grad);
  return res;
}

void write_record_header(std::ostream& os) {
  os << "iteration,total,fear,environment,goal,straightness,tracking,mpc_converged,"
        "collision_rate,grad_norm,skipped,clamped,wall_ms\n";
}

void write_record_row(std::ostream& os, const TrainingRecordRow& r) {
  os << r.iteration << ',' << std::setprecision(10) << r.total << ',' << r.fear << ','
     << r.environment << ',' << r.goal << ',' << r.straightness << ',' << r.tracking << ','
     << r.mpc_converged << ',' << r.collision_rate << ',' << r.grad_norm << ',' << r.skipped
     << ',' << r.clamped << ',' << std::setprecision(6) << r.wall_ms << '\n';
}

Optimizer::Optimizer(const TrainingConfig& c, std::size_t n)
    : adam_(c.optimizer == "adam"),
      lr_(c.learning_rate),
      b1_(c.beta1),
      b2_(c.beta2),
      eps_(c.epsilon),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void Optimizer::step(Eigen::VectorXd& p, const Eigen::VectorXd& g) {
  ++t_;
  if (!adam_) {
    p -= lr_ * g;
    return;
  }
  if (m_.size() != p.size()) {
    m_ = Eigen::VectorXd::Zero(p.size());
    v_ = Eigen::VectorXd::Zero(p.size());
  }
  m_ = b1_ * m_ + (1.0 - b1_) * g;
  v_ = b2_ * v_ + (1.0 - b2_) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  p.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Optimizer::write(detail::BinaryWriter& w) const {
  w.u8(adam_ ? 1 : 0);
  w.u64(t_);
  for (const Eigen::VectorXd* v : {&m_, &v_}) {
    w.u64(static_cast<std::uint64_t>(v->size()));
    for (Eigen::Index i = 0; i < v->size(); ++i) w.f64((*v)[i]);
  }
}

void Optimizer::read(detail::BinaryReader& r, std::size_t n) {
  if ((r.u8() == 1) != adam_) throw FormatError("checkpoint optimizer differs from config");
  t_ = r.u64();
  for (Eigen::VectorXd* v : {&m_, &v_}) {
    const std::uint64_t len = r.u64();
    if (len != n && len != 0) throw FormatError("optimizer state length mismatch");
    v->resize(static_cast<Eigen::Index>(len));
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = r.f64();
  }
}

TrainingRecordRow train_step(PlannerParams& params, Optimizer& opt,
                             const std::vector<TrainingSample>& batch,
                             const TrainingConfig& config, int iteration) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<SampleResult> results(batch.size());
  std::vector<std::string> failures(batch.size());
  parallel_for(batch.size(), config.jobs, [&](std::size_t i) {
    try {
      results[i] = evaluate_sample(params, batch[i], config, true);
      if (!results[i].grad.allFinite() || !std::isfinite(results[i].cost.total))
        failures[i] = "non-finite gradient";
    } catch (const DegenerateWaypoints& e) {
      failures[i] = e.what();
    } catch (const IllConditioned& e) {
      failures[i] = e.what();
    } catch (const SingularFeedback& e) {
      failures[i] = e.what();
    }
  });

  TrainingRecordRow row;
  row.iteration = iteration;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  int ok = 0, converged = 0, colliding = 0;
  // Fixed index order keeps the reduction bit-deterministic.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!failures[i].empty()) {
      ++row.skipped;
      continue;
    }
    const CostBreakdown& c = results[i].cost;
    grad += results[i].grad;
    row.total += c.total;
    row.fear += c.fear;
    row.environment += c.environment;
    row.goal += c.trajectory_goal;
    row.straightness += c.trajectory_straightness;
    row.tracking += c.trajectory_tracking;
    row.clamped += c.clamped;
    converged += results[i].mpc_converged;
    colliding += c.colliding;
    ++ok;
  }
  if (ok == 0 || row.skipped > config.max_failed_fraction * static_cast<double>(batch.size())) {
    std::string msg = "iteration " + std::to_string(iteration) + ": " +
                      std::to_string(row.skipped) + " of " + std::to_string(batch.size()) +
                      " samples failed";
    for (const auto& f : failures)
      if (!f.empty()) {
        msg += " (first: " + f + ")";
        break;
      }
    throw AllSamplesFailed(msg);
  }
  const double inv = 1.0 / ok;
  grad *= inv;
  for (double* v : {&row.total, &row.fear, &row.environment, &row.goal, &row.straightness,
                    &row.tracking})
    *v *= inv;
  row.mpc_converged = converged * inv;
  row.collision_rate = colliding * inv;
  row.grad_norm = grad.norm();
  if (config.grad_clip > 0.0 && row.grad_norm > config.grad_clip)
    grad *= config.grad_clip / row.grad_norm;
  opt.step(params.values(), grad);
  row.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

void save_checkpoint(const std::string& path, const TrainingState& s) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp);
    detail::BinaryWriter w(os);
    w.bytes(kCheckpointMagic, 4);
    w.u8(kCheckpointVersion);
    w.u64(static_cast<std::uint64_t>(s.completed));
    detail::write_params_body(w, s.params);
    s.optimizer.write(w);
    w.finish();
  }
  fs::rename(tmp, path);
}

TrainingState load_checkpoint(const std::string& path, const TrainingConfig& config) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path);
  detail::BinaryReader r(is);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint file");
  if (r.u8() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  TrainingState s{PlannerParams(effective_shape(config)), Optimizer(config), 0};
  s.completed = static_cast<int>(r.u64());
  PlannerParams p = detail::read_params_body(r);
  if (!(p.shape() == effective_shape(config)))
    throw FormatError("checkpoint network shape differs from config");
  s.params = std::move(p);
  s.optimizer.read(r, s.params.size());
  r.verify();
  return s;
}

namespace {

// Keeps record rows of iterations before `completed`; used when resuming.
void truncate_record(const std::string& path, int completed) {
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || !std::isdigit(static_cast<unsigned char>(line[0]))) continue;
    if (std::stoi(line.substr(0, line.find(','))) < completed) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  write_record_header(out);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

TrainingState train(const TrainingConfig& config, const TrainOptions& options,
                    std::vector<TrainingRecordRow>* records) {
  config.validate();
  const NetworkShape shape = effective_shape(config);
  TrainingState state{PlannerParams::init(shape, derive_seed(config.seed, kStreamInit)),
                      Optimizer(config), 0};
  const bool write = !options.output_dir.empty();
  const std::string latest = write ? (fs::path(options.output_dir) / "checkpoint_latest.bin").string() : "";
  const std::string record_path = write ? (fs::path(options.output_dir) / "record.csv").string() : "";
  if (write) fs::create_directories(options.output_dir);
  if (options.resume) {
    if (!write || !fs::exists(latest))
      throw std::runtime_error("resume requested but no checkpoint_latest.bin in output dir");
    state = load_checkpoint(latest, config);
  }
  std::ofstream record;
  if (write) {
    if (options.resume && fs::exists(record_path)) {
      truncate_record(record_path, state.completed);
      record.open(record_path, std::ios::app);
    } else {
      record.open(record_path, std::ios::trunc);
      write_record_header(record);
    }
  }

  const MapPool pool(config, derive_seed(config.seed, kStreamTrainMaps));
  for (int it = state.completed; it < config.iterations; ++it) {
    const auto batch = sample_batch(pool, config, config.seed, it, config.batch_size);
    const TrainingRecordRow row = train_step(state.params, state.optimizer, batch, config, it);
    state.completed = it + 1;
    if (records) records->push_back(row);
    if (write) {
      write_record_row(record, row);
      record.flush();
      if (config.checkpoint_every > 0 && state.completed % config.checkpoint_every == 0) {
        std::ostringstream name;
        name << "checkpoint_" << std::setw(6) << std::setfill('0') << state.completed << ".bin";
        save_checkpoint((fs::path(options.output_dir) / name.str()).string(), state);
        save_checkpoint(latest, state);
      }
    }
    if (options.verbose && (it % 50 == 0 || it + 1 == config.iterations))
      std::cerr << "iter " << it << " U=" << row.total << " fear=" << row.fear
                << " env=" << row.environment << " goal=" << row.goal
                << " straight=" << row.straightness << " track=" << row.tracking
                << " coll=" << row.collision_rate << " |g|=" << row.grad_norm
                << " skipped=" << row.skipped << "\n";
  }
  if (write) {
    save_checkpoint(latest, state);
    save_params((fs::path(options.output_dir) / "params.bin").string(), state.params);
  }
  return state;
}

SuiteStats evaluate_suite(const PlannerParams& params, const std::vector<TrainingSample>& suite,
                          const TrainingConfig& config) {
  TrainingConfig eval = config;
  eval.pipeline.geometric_only = false;
  std::vector<SampleResult> results(suite.size());
  std::vector<char> failed(suite.size(), 0);
  parallel_for(suite.size(), config.jobs, [&](std::size_t i) {
    try {
      results[i] = evaluate_sample(params, suite[i], eval, false);
    } catch (const Error&) {
      failed[i] = 1;
    }
  });
  SuiteStats s;
  int converged = 0, colliding = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    if (failed[i]) {
      ++s.failed;
      continue;
    }
    const CostBreakdown& c = results[i].cost;
    s.mean_total += c.total;
    s.mean_fear += c.fear;
    s.mean_environment += c.environment;
    s.mean_trajectory += c.trajectory();
    colliding += c.colliding;
    converged += results[i].mpc_converged;
    ++s.evaluated;
  }
  if (s.evaluated > 0) {
    const double inv = 1.0 / s.evaluated;
    s.mean_total *= inv;
    s.mean_fear *= inv;
    s.mean_environment *= inv;
    s.mean_trajectory *= inv;
    s.collision_rate = colliding * inv;
    s.mpc_converged = converged * inv;
  }
  return s;
}

HeldOutSuite make_held_out_suite(const TrainingConfig& config, int count) {
  HeldOutSuite h;
  h.pool = std::make_unique<MapPool>(config, derive_seed(config.seed, kStreamHeldOutMaps));
  h.samples = sample_batch(*h.pool, config, derive_seed(config.seed, kStreamHeldOutTasks), 0, count);
  return h;
}

}  // namespace kinplan
