#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "kinplan/blo_cost.hpp"
#include "kinplan/config.hpp"
#include "kinplan/esdf.hpp"
#include "kinplan/nnplanner.hpp"
#include "kinplan/pipeline.hpp"

namespace kinplan {

struct TrainingConfig {
  std::uint64_t seed = 1;
  int batch_size = 16;
  int iterations = 2000;
  std::string optimizer = "adam";  // adam | sgd
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 0.0;  // batch gradient norm cap, 0 disables
  /// Scenario mix, indexed like kAllArchetypes; must sum to 1.
  std::array<double, 4> mix{0.25, 0.25, 0.25, 0.25};
  int maps_per_archetype = 8;
  double max_failed_fraction = 0.2;
  int checkpoint_every = 100;
  int jobs = 1;
  double d_safe = 0.525;  // ESDF hinge onset, m

  NetworkShape network{};
  PipelineConfig pipeline{};
  CostWeights cost{};
  GenerationParams env{};

  /// Throws ConfigError with the offending key.
  void validate() const;
};

void bind_training_config(ConfigSchema& schema, TrainingConfig& c);

/// Map with its precomputed ESDF.
struct TrainingMap {
  std::shared_ptr<const OccupancyGrid> grid;
  std::shared_ptr<const EsdfGrid> esdf;
  std::shared_ptr<const TaskSampler> tasks;
  Archetype archetype = Archetype::kForest;
  std::uint64_t seed = 0;
};

/// Wraps an existing grid with its ESDF and task sampler.
TrainingMap make_training_map(OccupancyGrid grid, const TrainingConfig& config,
                              Archetype archetype = Archetype::kForest, std::uint64_t seed = 0);

/// Start/goal task on a pooled map, world frame. There is no label field:
/// supervision comes only from the cost.
struct TrainingSample {
  const TrainingMap* map = nullptr;
  Pose2 start{};
  Vec2 goal{0.0, 0.0};
};

/// Fixed pool of maps per archetype, built from one seed stream.
class MapPool {
 public:
  MapPool(const TrainingConfig& config, std::uint64_t stream_seed);
  const TrainingMap& map(Archetype a, int index) const;
  int maps_per_archetype() const { return per_archetype_; }

 private:
  int per_archetype_ = 0;
  std::vector<TrainingMap> maps_;
};

/// Batch for one iteration; a pure function of (seed, iteration).
std::vector<TrainingSample> sample_batch(const MapPool& pool, const TrainingConfig& config,
                                         std::uint64_t seed, int iteration, int count);

struct SampleResult {
  CostBreakdown cost;
  bool mpc_converged = true;
  bool approximate_gradient = false;
  Eigen::VectorXd grad;  // dU / dparams, empty unless requested
};

/// Forward pipeline, upper-level cost and, when requested, the full gradient
///   dU/dmu = dU/dmu|direct + J_ref' (dU/dref + dtau*/dref' dU/dtau*)
/// pulled back through the network.
SampleResult evaluate_sample(const PlannerParams& params, const TrainingSample& sample,
                             const TrainingConfig& config, bool with_gradient);

struct TrainingRecordRow {
  int iteration = 0;
  double total = 0.0;
  double fear = 0.0;
  double environment = 0.0;
  double goal = 0.0;
  double straightness = 0.0;
  double tracking = 0.0;
  double mpc_converged = 0.0;  // fraction of evaluated samples
  double collision_rate = 0.0;
  double grad_norm = 0.0;
  int skipped = 0;
  int clamped = 0;
  double wall_ms = 0.0;
};

void write_record_header(std::ostream& os);
void write_record_row(std::ostream& os, const TrainingRecordRow& r);

class Optimizer {
 public:
  explicit Optimizer(const TrainingConfig& config, std::size_t n = 0);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  std::uint64_t steps() const { return t_; }

  void write(detail::BinaryWriter& w) const;
  void read(detail::BinaryReader& r, std::size_t n);

 private:
  bool adam_ = true;
  double lr_, b1_, b2_, eps_;
  std::uint64_t t_ = 0;
  Eigen::VectorXd m_, v_;
};

/// One optimization step over the given batch. Samples that throw
/// DegenerateWaypoints, IllConditioned, SingularFeedback or produce a
/// non-finite gradient are skipped; throws AllSamplesFailed when more than
/// max_failed_fraction of the batch is skipped.
TrainingRecordRow train_step(PlannerParams& params, Optimizer& opt,
                             const std::vector<TrainingSample>& batch,
                             const TrainingConfig& config, int iteration);

struct TrainingState {
  PlannerParams params;
  Optimizer optimizer;
  int completed = 0;  // iterations done
};

// Checkpoint file: "KPCK", version byte, uint64 completed iterations,
// parameter body (nnplanner format without its hash), optimizer kind byte,
// uint64 step count, Adam moments as uint64 length + float64 values, then
// the FNV-1a 64 hash of everything before it.
void save_checkpoint(const std::string& path, const TrainingState& s);
TrainingState load_checkpoint(const std::string& path, const TrainingConfig& config);

struct TrainOptions {
  std::string output_dir;  // empty: nothing written
  bool resume = false;     // continue from output_dir/checkpoint_latest.bin
  bool verbose = false;
};

/// Full training loop. Deterministic for a given config; writes
/// record.csv, periodic checkpoints and params.bin into output_dir.
TrainingState train(const TrainingConfig& config, const TrainOptions& options = {},
                    std::vector<TrainingRecordRow>* records = nullptr);

struct SuiteStats {
  double mean_total = 0.0;
  double mean_fear = 0.0;
  double mean_environment = 0.0;
  double mean_trajectory = 0.0;
  double collision_rate = 0.0;
  double mpc_converged = 0.0;
  int evaluated = 0;
  int failed = 0;
};

/// Held-out evaluation with the full kinematic pipeline and cost, whatever
/// the training mode.
SuiteStats evaluate_suite(const PlannerParams& params, const std::vector<TrainingSample>& suite,
                          const TrainingConfig& config);

/// Held-out tasks on maps drawn from a seed stream disjoint from training.
struct HeldOutSuite {
  std::unique_ptr<MapPool> pool;
  std::vector<TrainingSample> samples;
};
HeldOutSuite make_held_out_suite(const TrainingConfig& config, int count);

}  // namespace kinplan
