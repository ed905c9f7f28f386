#include "kinplan/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "kinplan/errors.hpp"
#include "training_fixtures.hpp"

namespace kinplan {
namespace {

namespace fs = std::filesystem;
using testing::chain_gradient_error;
using testing::micro_config;
using testing::micro_map;
using testing::micro_sample;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kinplan_training_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Training, MicroChainMatchesFiniteDifferences) {
  TrainingConfig c = micro_config();
  const TrainingMap map = micro_map(c);
  int with_env = 0;
  for (int draw = 0; draw < 10; ++draw) {
    const PlannerParams p = PlannerParams::init(c.network, 100 + draw);
    const TrainingSample s = micro_sample(map, draw % 3);
    with_env += evaluate_sample(p, s, c, false).cost.environment > 0.0;
    EXPECT_LT(chain_gradient_error(p, s, c), 1e-2) << "draw " << draw;
  }
  EXPECT_GE(with_env, 3);  // the obstacle terms take part in the check
}

TEST(Training, GeometricChainMatchesFiniteDifferences) {
  TrainingConfig c = micro_config();
  c.pipeline.geometric_only = true;
  const TrainingMap map = micro_map(c);
  for (int draw = 0; draw < 5; ++draw) {
    const PlannerParams p = PlannerParams::init(c.network, 300 + draw);
    EXPECT_LT(chain_gradient_error(p, micro_sample(map, draw % 3), c), 1e-2) << draw;
  }
}

TEST(Training, GeometricAblationDropsMpcAndTracking) {
  TrainingConfig c = micro_config();
  const TrainingMap map = micro_map(c);
  const PlannerParams p = PlannerParams::init(c.network, 7);
  const TrainingSample s = micro_sample(map);
  const SampleResult full = evaluate_sample(p, s, c, false);
  c.pipeline.geometric_only = true;
  const SampleResult geo = evaluate_sample(p, s, c, false);
  EXPECT_GT(full.cost.trajectory_tracking, 0.0);
  EXPECT_EQ(geo.cost.trajectory_tracking, 0.0);
  EXPECT_DOUBLE_EQ(geo.cost.trajectory_goal, full.cost.trajectory_goal);
  const PipelineResult r = run_pipeline(p, *map.grid, s.start, s.goal, c.pipeline);
  EXPECT_FALSE(r.solution.has_value());
  ASSERT_EQ(r.optimized.size(), r.reference.states.size());
  for (std::size_t t = 0; t < r.optimized.size(); ++t) EXPECT_EQ(r.optimized[t], r.reference.states[t]);
}

TEST(Training, ZeroLearningRateKeepsParameters) {
  TrainingConfig c = micro_config();
  c.learning_rate = 0.0;
  const TrainingMap map = micro_map(c);
  PlannerParams p = PlannerParams::init(c.network, 3);
  const PlannerParams before = p;
  Optimizer opt(c, p.size());
  const TrainingRecordRow row = train_step(p, opt, {micro_sample(map)}, c, 41);
  EXPECT_TRUE(p == before);
  EXPECT_EQ(row.iteration, 41);
  EXPECT_GT(row.total, 0.0);
  EXPECT_GT(row.grad_norm, 0.0);
  EXPECT_EQ(row.skipped, 0);
}

TEST(Training, SingleSampleCostDecreases) {
  TrainingConfig c = micro_config();
  const TrainingMap map = micro_map(c);
  PlannerParams p = PlannerParams::init(c.network, 11);
  Optimizer opt(c, p.size());
  const std::vector<TrainingSample> batch{micro_sample(map)};
  std::vector<double> totals;
  for (int it = 0; it < 200; ++it) totals.push_back(train_step(p, opt, batch, c, it).total);
  auto window = [&](int from) {
    return std::accumulate(totals.begin() + from, totals.begin() + from + 20, 0.0) / 20.0;
  };
  for (int w = 20; w < 200; w += 20) EXPECT_LT(window(w), window(w - 20)) << "window " << w;
}

TEST(Training, SgdStepIsPlainGradientDescent) {
  TrainingConfig c = micro_config();
  c.optimizer = "sgd";
  c.learning_rate = 0.01;
  const TrainingMap map = micro_map(c);
  PlannerParams p = PlannerParams::init(c.network, 5);
  const PlannerParams before = p;
  const SampleResult r = evaluate_sample(p, micro_sample(map), c, true);
  Optimizer opt(c, p.size());
  train_step(p, opt, {micro_sample(map)}, c, 0);
  EXPECT_LT((p.values() - (before.values() - 0.01 * r.grad)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Training, AllSamplesFailedAborts) {
  TrainingConfig c = micro_config();
  const TrainingMap map = micro_map(c);
  PlannerParams p(c.network);
  p.values().setZero();  // every waypoint at the origin
  Optimizer opt(c, p.size());
  const std::vector<TrainingSample> batch(3, micro_sample(map));
  EXPECT_THROW(train_step(p, opt, batch, c, 0), AllSamplesFailed);
}

TEST(Training, PartialFailuresWithinThresholdAreSkipped) {
  TrainingConfig c = micro_config();
  c.max_failed_fraction = 0.5;
  const TrainingMap map = micro_map(c);
  // An overflowing goal poisons one sample of four.
  PlannerParams p = PlannerParams::init(c.network, 2);
  Optimizer opt(c, p.size());
  TrainingSample bad = micro_sample(map);
  bad.goal = Vec2(1e306, 1e306);
  const std::vector<TrainingSample> batch{micro_sample(map), bad, micro_sample(map, 1),
                                          micro_sample(map, 2)};
  const TrainingRecordRow row = train_step(p, opt, batch, c, 0);
  EXPECT_EQ(row.skipped, 1);
  EXPECT_TRUE(p.values().allFinite());
  c.max_failed_fraction = 0.2;
  EXPECT_THROW(train_step(p, opt, batch, c, 1), AllSamplesFailed);
}

TEST(Training, SampleBatchIsAPureFunction) {
  TrainingConfig c = micro_config();
  c.pipeline.sensor.n_beams = 64;
  c.network = NetworkShape{};
  const MapPool pool(c, 9);
  const auto a = sample_batch(pool, c, 1, 5, 12);
  const auto b = sample_batch(pool, c, 1, 5, 12);
  const auto d = sample_batch(pool, c, 1, 6, 12);
  ASSERT_EQ(a.size(), 12u);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].map, b[i].map);
    EXPECT_EQ(a[i].start, b[i].start);
    EXPECT_EQ(a[i].goal, b[i].goal);
    differs |= !(a[i].goal == d[i].goal);
    EXPECT_FALSE(in_collision(*a[i].map->grid, a[i].start, c.env.robot_radius));
    EXPECT_FALSE(in_collision(*a[i].map->grid, a[i].goal, c.env.robot_radius));
  }
  EXPECT_TRUE(differs);
}

TEST(Training, MixSelectsArchetypes) {
  TrainingConfig c = micro_config();
  c.mix = {0.0, 0.0, 1.0, 0.0};
  const MapPool pool(c, 4);
  for (const auto& s : sample_batch(pool, c, 2, 0, 10))
    EXPECT_EQ(s.map->archetype, Archetype::kIndoor);
}

TEST(Training, DeterministicAcrossRunsAndThreads) {
  TrainingConfig c = micro_config();
  c.iterations = 12;
  const TrainingState a = train(c);
  const TrainingState b = train(c);
  c.jobs = 3;
  const TrainingState d = train(c);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_TRUE(a.params == d.params);
  EXPECT_EQ(a.completed, 12);
}

TEST(Training, ResumeIsBitIdentical) {
  TrainingConfig c = micro_config();
  c.iterations = 16;
  c.checkpoint_every = 4;
  const fs::path full = scratch_dir("full"), part = scratch_dir("part");
  const TrainingState reference = train(c, {full.string()});

  TrainingConfig first = c;
  first.iterations = 9;  // stops between checkpoints; the final save covers it
  train(first, {part.string()});
  const TrainingState resumed = train(c, {part.string(), true});
  EXPECT_TRUE(resumed.params == reference.params);
  EXPECT_EQ(resumed.completed, 16);

  // Record rows agree except for wall time.
  auto rows = [](const fs::path& p) {
    std::ifstream is(p / "record.csv");
    std::vector<std::string> out;
    std::string line;
    while (std::getline(is, line)) out.push_back(line.substr(0, line.rfind(',')));
    return out;
  };
  EXPECT_EQ(rows(full), rows(part));
  EXPECT_EQ(rows(full).size(), 17u);
  EXPECT_TRUE(fs::exists(full / "checkpoint_000004.bin"));
  EXPECT_TRUE(fs::exists(full / "checkpoint_000016.bin"));
  EXPECT_TRUE(load_params((full / "params.bin").string()) == reference.params);
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST(Training, ResumeWithoutCheckpointFails) {
  TrainingConfig c = micro_config();
  c.iterations = 2;
  const fs::path dir = scratch_dir("empty");
  EXPECT_THROW(train(c, {dir.string(), true}), std::runtime_error);
}

TEST(Training, CheckpointRoundTripAndCorruption) {
  TrainingConfig c = micro_config();
  const TrainingMap map = micro_map(c);
  TrainingState s{PlannerParams::init(c.network, 8), Optimizer(c), 0};
  train_step(s.params, s.optimizer, {micro_sample(map)}, c, 0);
  s.completed = 1;
  const fs::path dir = scratch_dir("ckpt");
  fs::create_directories(dir);
  const std::string path = (dir / "a.bin").string();
  save_checkpoint(path, s);
  const TrainingState back = load_checkpoint(path, c);
  EXPECT_TRUE(back.params == s.params);
  EXPECT_EQ(back.completed, 1);
  EXPECT_EQ(back.optimizer.steps(), 1u);

  // Continuing from the loaded state matches continuing from the original.
  TrainingState x = s, y = back;
  train_step(x.params, x.optimizer, {micro_sample(map)}, c, 1);
  train_step(y.params, y.optimizer, {micro_sample(map)}, c, 1);
  EXPECT_TRUE(x.params == y.params);

  std::string bytes;
  {
    std::ifstream is(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  bytes[bytes.size() / 2] ^= 0x10;
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << bytes;
  }
  EXPECT_THROW(load_checkpoint(path, c), FormatError);

  TrainingConfig other = c;
  other.network.hidden1 += 1;
  save_checkpoint(path, s);
  EXPECT_THROW(load_checkpoint(path, other), FormatError);
  other = c;
  other.optimizer = "sgd";
  EXPECT_THROW(load_checkpoint(path, other), FormatError);
  fs::remove_all(dir);
}

TEST(Training, ConfigValidation) {
  auto rejects = [](auto mutate) {
    TrainingConfig c = micro_config();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  rejects([](TrainingConfig& c) { c.learning_rate = -1.0; });
  rejects([](TrainingConfig& c) { c.batch_size = 0; });
  rejects([](TrainingConfig& c) { c.mix = {0.5, 0.5, 0.5, 0.0}; });
  rejects([](TrainingConfig& c) { c.optimizer = "rmsprop"; });
  rejects([](TrainingConfig& c) { c.cost.beta = -1.0; });
  EXPECT_NO_THROW(micro_config().validate());
}

TEST(Training, ConfigFileBindsEveryField) {
  TrainingConfig c;
  ConfigSchema schema;
  bind_training_config(schema, c);
  std::istringstream in(
      "seed = 5\n[train]\nbatch_size = 3\nmix.forest = 1\nmix.garage = 0\nmix.indoor = 0\n"
      "mix.campus = 0\n[cost]\nbeta = 300\n[plan]\nhorizon = 20\n[network]\nk = 4\n");
  schema.apply(ConfigFile::parse(in, "test"));
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.batch_size, 3);
  EXPECT_EQ(c.mix[0], 1.0);
  EXPECT_EQ(c.cost.beta, 300.0);
  EXPECT_EQ(c.pipeline.horizon, 20);
  EXPECT_EQ(c.network.k, 4);
  EXPECT_NO_THROW(c.validate());
}

TEST(Training, RecordCsvHasOneColumnPerField) {
  std::ostringstream os;
  write_record_header(os);
  TrainingRecordRow r;
  r.iteration = 3;
  r.total = 1.5;
  write_record_row(os, r);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 12);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 12);
  EXPECT_EQ(row.substr(0, 6), "3,1.5,");
}

}  // namespace
}  // namespace kinplan
