#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fednewton/config.hpp"

using namespace fednewton;

namespace {

std::string errors_of(const ConfigMap& kv) {
  try {
    build_config(kv);
  } catch (const ContractError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, FlagsExample) {
  const RunConfig c = build_config({}, {{"algo", "done"}, {"alpha", "0.03"}, {"R", "40"}, {"T", "100"}});
  EXPECT_EQ(c.algo, Algorithm::Done);
  EXPECT_DOUBLE_EQ(c.alpha, 0.03);
  EXPECT_EQ(c.rounds_local, 40);
  EXPECT_EQ(c.rounds_global, 100);
}

TEST(Config, Defaults) {
  const RunConfig c = build_config({});
  EXPECT_EQ(c.algo, Algorithm::Done);
  EXPECT_EQ(c.dataset, DatasetSource::Synthetic);
  EXPECT_FALSE(c.batch);
  EXPECT_FALSE(c.subset);
  EXPECT_TRUE(c.adaptive_step);
  EXPECT_EQ(c.repeats, 1);
  EXPECT_EQ(c.effective_run_id(), "done-synthetic");
}

TEST(Config, FlagsOverrideFile) {
  std::istringstream in("# experiment\nalgo = gd\nalpha=0.2  # tuned\n\nT = 5\nstepsize = fixed:0.5\n");
  const ConfigMap file = parse_config_text(in);
  const RunConfig c = build_config(file, {{"alpha", "0.4"}});
  EXPECT_EQ(c.algo, Algorithm::Gd);
  EXPECT_DOUBLE_EQ(c.alpha, 0.4);
  EXPECT_EQ(c.rounds_global, 5);
  EXPECT_FALSE(c.adaptive_step);
  EXPECT_DOUBLE_EQ(c.fixed_step, 0.5);
}

TEST(Config, SpecialValues) {
  const RunConfig c = build_config({{"batch", "full"}, {"subset", "all"}, {"seed", "7"}});
  EXPECT_FALSE(c.batch);
  EXPECT_FALSE(c.subset);
  EXPECT_EQ(c.data_seed, 7u);
  EXPECT_EQ(c.run_seed, 7u);
  EXPECT_EQ(build_config({{"seed", "7"}, {"run_seed", "3"}}).run_seed, 3u);
  EXPECT_EQ(*build_config({{"batch", "32"}, {"subset", "8"}}).batch, 32u);
}

TEST(Config, AlphaMustBePositive) { EXPECT_NE(errors_of({{"alpha", "0"}}).find("alpha"), std::string::npos); }

TEST(Config, SubsetAboveWorkers) {
  EXPECT_NE(errors_of({{"subset", "33"}}).find("subset"), std::string::npos);
  EXPECT_NE(errors_of({{"subset", "5"}, {"n", "4"}}).find("subset"), std::string::npos);
}

TEST(Config, EveryErrorListed) {
  const std::string msg = errors_of(
      {{"alpha", "-1"}, {"R", "0"}, {"repeats", "0"}, {"bogus", "1"}, {"stepsize", "sometimes"}, {"lambda", "x"}});
  for (const char* key : {"alpha", "R:", "repeats", "bogus: unknown key", "stepsize", "lambda"})
    EXPECT_NE(msg.find(key), std::string::npos) << key << "\n" << msg;
}

TEST(Config, DatasetRequirements) {
  EXPECT_NE(errors_of({{"dataset", "idx"}}).find("images"), std::string::npos);
  EXPECT_NE(errors_of({{"dataset", "libsvm"}}).find("libsvm"), std::string::npos);
  EXPECT_NE(errors_of({{"dataset", "mnist"}}).find("dataset"), std::string::npos);
}

TEST(Config, ParseErrors) {
  std::istringstream missing_eq("alpha 0.1\n");
  EXPECT_THROW(parse_config_text(missing_eq), FormatError);
  std::istringstream dup("alpha=1\nalpha=2\n");
  try {
    parse_config_text(dup);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.position(), 2u);
  }
  EXPECT_THROW(read_config_file("/nonexistent/config.conf"), std::runtime_error);
}

TEST(Config, EveryKeyDocumentedOnce) {
  const auto& keys = config_keys();
  std::set<std::string> uniq(keys.begin(), keys.end());
  EXPECT_EQ(uniq.size(), keys.size());
  for (const char* k : {"algo", "dataset", "alpha", "R", "T", "batch", "subset", "lambda", "stepsize", "seed",
                        "repeats", "out"})
    EXPECT_TRUE(uniq.count(k)) << k;
}
