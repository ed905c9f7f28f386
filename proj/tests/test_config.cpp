#include "kinplan/config.hpp"

#include <sstream>

#include <gtest/gtest.h>

#include "kinplan/errors.hpp"

namespace kinplan {
namespace {

struct Sample {
  double lr = 1e-3;
  int batch = 16;
  std::uint64_t seed = 7;
  bool ablation = false;
  std::string name = "run";
  std::string optimizer = "adam";
  double weight = 0.1;
};

ConfigSchema schema_for(Sample& s) {
  ConfigSchema sc;
  sc.add("train.lr", &s.lr, "step size");
  sc.add("train.batch", &s.batch);
  sc.add("seed", &s.seed);
  sc.add("train.geometric_only", &s.ablation);
  sc.add("name", &s.name);
  sc.add_choice("train.optimizer", &s.optimizer, {"adam", "sgd"});
  sc.add("cost.env.weight", &s.weight);
  return sc;
}

ConfigFile parse(const std::string& text) {
  std::istringstream is(text);
  return ConfigFile::parse(is);
}

TEST(Config, ParsesSectionsCommentsAndQuotes) {
  const auto f = parse(
      "# header comment\n"
      "seed = 42\n"
      "name = \"a # not a comment\"  # trailing\n"
      "\n"
      "[train]\n"
      "lr = 0.01\n"
      "  geometric_only = true\n"
      "[cost.env]\n"
      "weight=2.5\n");
  EXPECT_EQ(f.entries().at("seed"), "42");
  EXPECT_EQ(f.entries().at("name"), "a # not a comment");
  EXPECT_EQ(f.entries().at("train.lr"), "0.01");
  EXPECT_EQ(f.entries().at("train.geometric_only"), "true");
  EXPECT_EQ(f.entries().at("cost.env.weight"), "2.5");
  Sample s;
  schema_for(s).apply(f);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.lr, 0.01);
  EXPECT_TRUE(s.ablation);
  EXPECT_EQ(s.weight, 2.5);
  EXPECT_EQ(s.batch, 16);  // untouched default
}

TEST(Config, MalformedInputRejected) {
  EXPECT_THROW(parse("just words\n"), ConfigError);
  EXPECT_THROW(parse("[open\n"), ConfigError);
  EXPECT_THROW(parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse("bad key = 1\n"), ConfigError);
  EXPECT_THROW(parse("a = \"x\n"), ConfigError);
  EXPECT_THROW(ConfigFile::load("/nonexistent/file.toml"), ConfigError);
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
  Sample s;
  const auto sc = schema_for(s);
  EXPECT_THROW(sc.apply(parse("train.lrr = 1\n")), ConfigError);
  EXPECT_THROW(sc.apply(parse("[train]\nbatch = 1.5\n")), ConfigError);
  EXPECT_THROW(sc.apply(parse("[train]\nlr = fast\n")), ConfigError);
  EXPECT_THROW(sc.apply(parse("[train]\nlr = nan\n")), ConfigError);
  EXPECT_THROW(sc.apply(parse("[train]\ngeometric_only = yes\n")), ConfigError);
  EXPECT_THROW(sc.apply(parse("[train]\noptimizer = rmsprop\n")), ConfigError);
  EXPECT_THROW(sc.apply(parse("seed = -1\n")), ConfigError);
  EXPECT_NO_THROW(sc.apply(parse("[train]\noptimizer = sgd\n")));
  EXPECT_EQ(s.optimizer, "sgd");
}

TEST(Config, OverridesWinOverFile) {
  auto f = parse("[train]\nlr = 0.5\n");
  f.apply_override("train.lr=0.25");
  f.apply_override("train.batch = 4");
  EXPECT_THROW(f.apply_override("train.lr"), ConfigError);
  Sample s;
  schema_for(s).apply(f);
  EXPECT_EQ(s.lr, 0.25);
  EXPECT_EQ(s.batch, 4);
}

TEST(Config, EffectiveConfigRoundTrips) {
  Sample a;
  a.lr = 0.1 + 0.2;  // not exactly representable as a short decimal
  a.batch = 3;
  a.seed = 18446744073709551615ULL;
  a.ablation = true;
  a.name = "x y";
  a.weight = -1.25e-7;
  std::stringstream ss;
  schema_for(a).write(ss);
  Sample b;
  schema_for(b).apply(ConfigFile::parse(ss));
  EXPECT_EQ(b.lr, a.lr);
  EXPECT_EQ(b.batch, a.batch);
  EXPECT_EQ(b.seed, a.seed);
  EXPECT_EQ(b.ablation, a.ablation);
  EXPECT_EQ(b.name, a.name);
  EXPECT_EQ(b.weight, a.weight);
  EXPECT_NE(ss.str().find("[train]"), std::string::npos);
  EXPECT_NE(ss.str().find("# step size"), std::string::npos);
}

}  // namespace
}  // namespace kinplan
