#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "stgp/experiment.hpp"
#include "support.hpp"

namespace stgp::experiment {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json small_config() {
  return json::parse(R"({
    "mesh": {"shape": "cup", "level": 2},
    "seed": 11,
    "eigenpairs": 60,
    "training_size": 20,
    "noise": 0.01,
    "simulation": {
      "steps": 600, "record_every": 30,
      "stimuli": [{"near": [0, 0, -0.75], "radius": 0.4, "period": 25.0}]
    },
    "active_learning": {"strategies": ["A-AL", "R-AL"], "rounds": 2, "batch_size": 2, "initial_count": 10},
    "fit": {"max_iterations": 150},
    "benchmark": {"eigen_sweep": [8, 16, 32], "sizes": [10, 20], "noise_levels": [0.0, 0.01, 0.05],
                  "replications": 1, "al_strategies": ["A-AL", "R-AL", "U-AL", "S-AL", "F-AL"],
                  "al_seeds": 1, "persist_predictions": true}
  })");
}

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stgp_exp_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  ExperimentConfig config(json j = small_config()) const {
    ExperimentConfig c = parse_config(j, dir_);
    c.out_dir = dir_ / "out";
    return c;
  }

  fs::path dir_;
};

TEST(DeriveSeed, DistinctStreams) {
  EXPECT_EQ(derive_seed(1, "noise", 0), derive_seed(1, "noise", 0));
  EXPECT_NE(derive_seed(1, "noise", 0), derive_seed(1, "noise", 1));
  EXPECT_NE(derive_seed(1, "noise", 0), derive_seed(1, "training", 0));
  EXPECT_NE(derive_seed(1, "noise", 0), derive_seed(2, "noise", 0));
}

TEST_F(ExperimentTest, ConfigRejectsUnknownKeysAndBadValues) {
  json j = small_config();
  j["trainng_size"] = 5;
  EXPECT_THROW(config(j), InputError);
  j = small_config();
  j["simulation"]["dt"] = -0.1;
  EXPECT_THROW(config(j), InputError);
  j = small_config();
  j["active_learning"]["strategies"] = {"Z-AL"};
  EXPECT_THROW(config(j), InputError);
  j = small_config();
  j["noise"] = "high";
  EXPECT_THROW(config(j), InputError);
  j = small_config();
  j["simulation"]["stimuli"][0]["center"] = 3;
  EXPECT_THROW(config(j), InputError);
  j = small_config();
  j.erase("mesh");
  EXPECT_THROW(config(j), InputError);
}

TEST_F(ExperimentTest, PathsResolveAgainstConfigDirectory) {
  json j = small_config();
  j["mesh"] = "meshes/tetra.off";
  j["out"] = "results";
  std::ofstream(dir_ / "c.json") << j.dump();
  const ExperimentConfig c = load_config(dir_ / "c.json");
  EXPECT_EQ(*c.mesh_path, dir_ / "meshes/tetra.off");
  EXPECT_EQ(c.out_dir, dir_ / "results");
}

TEST_F(ExperimentTest, EigsOnTetrahedron) {
  fs::create_directories(dir_ / "m");
  save_mesh(dir_ / "m/tetra.off", test::tetrahedron());
  json j = small_config();
  j["mesh"] = "m/tetra.off";
  j["eigenpairs"] = 4;
  const json s = cmd_eigs(config(j));
  EXPECT_EQ(s.at("eigenpairs"), 4);
  const auto values = io::read_eigenvalues(dir_ / "out/eigenvalues.csv");
  ASSERT_EQ(values.size(), 4u);
  EXPECT_LT(std::abs(values[0]), 1e-10);
  j["eigenpairs"] = 5;
  EXPECT_THROW(cmd_eigs(config(j)), InputError);
}

TEST_F(ExperimentTest, EigsOnUnitSquareMatchAnalytic) {
  json j = small_config();
  j["mesh"] = {{"shape", "grid"}, {"cells", 24}};
  j["eigenpairs"] = 8;
  cmd_eigs(config(j));
  const auto values = io::read_eigenvalues(dir_ / "out/eigenvalues.csv");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double expected[] = {0, 1, 1, 2, 4, 4, 5, 5};
  for (int k = 1; k < 8; ++k) EXPECT_NEAR(values[static_cast<std::size_t>(k)], expected[k] * pi2, 0.05 * expected[k] * pi2);
}

TEST_F(ExperimentTest, SimulateWritesDeterministicFiles) {
  json j = small_config();
  j["noise"] = 0.0;
  cmd_simulate(config(j));
  EXPECT_EQ(slurp(dir_ / "out/truth.csv"), slurp(dir_ / "out/observed.csv"));
  const std::string first = slurp(dir_ / "out/truth.csv");
  cmd_simulate(config(j));
  EXPECT_EQ(slurp(dir_ / "out/truth.csv"), first);
  const io::Signals s = io::read_signals(dir_ / "out/truth.csv");
  EXPECT_EQ(s.times.size(), 21u);
  EXPECT_GT(s.values.maxCoeff(), 0.8);

  j["noise"] = 0.01;
  cmd_simulate(config(j));
  const std::string noisy = slurp(dir_ / "out/observed.csv");
  cmd_simulate(config(j));
  EXPECT_EQ(slurp(dir_ / "out/observed.csv"), noisy);
  EXPECT_NE(noisy, first);
}

TEST_F(ExperimentTest, MissingMeshIsInputError) {
  json j = small_config();
  j["mesh"] = "nowhere.off";
  EXPECT_THROW(cmd_simulate(config(j)), InputError);
}

TEST_F(ExperimentTest, FitPredictOnAllVerticesBeatsSparseDesign) {
  json j = small_config();
  j["noise"] = 0.0;
  const double sparse = cmd_fit_predict(config(j)).at("RE").get<double>();
  j["training_size"] = 162;
  j["eigenpairs"] = 162;
  const json s = cmd_fit_predict(config(j));
  EXPECT_LT(s.at("RE").get<double>(), 0.5 * sparse);
  EXPECT_LT(s.at("RE").get<double>(), 0.1);
  EXPECT_TRUE(fs::exists(dir_ / "out/prediction.csv"));
}

TEST_F(ExperimentTest, KernelsShareTrainingIndices) {
  json j = small_config();
  const json g = cmd_fit_predict(config(j));
  j["kernel"] = "E-ST-GP";
  const json e = cmd_fit_predict(config(j));
  EXPECT_EQ(g.at("training_locations"), e.at("training_locations"));
  EXPECT_EQ(g.at("kernel"), "laplacian");
  EXPECT_EQ(e.at("kernel"), "euclidean");
}

TEST_F(ExperimentTest, FitPredictFromMalformedCsvIsParseError) {
  std::ofstream(dir_ / "truth.csv") << "time,v0\n0,oops\n";
  json j = small_config();
  j["data"] = {{"truth", "truth.csv"}};
  EXPECT_THROW(cmd_fit_predict(config(j)), ParseError);
}

TEST_F(ExperimentTest, FitPredictFromSignalFiles) {
  json j = small_config();
  cmd_simulate(config(j));
  const json simulated = cmd_fit_predict(config(j));
  j["data"] = {{"truth", "out/truth.csv"}, {"observed", "out/observed.csv"}};
  const json from_files = cmd_fit_predict(config(j));
  EXPECT_EQ(simulated.at("RE"), from_files.at("RE"));
}

TEST_F(ExperimentTest, ActiveLearnHistories) {
  const json s = cmd_active_learn(config());
  ASSERT_EQ(s.at("runs").size(), 2u);
  std::ifstream in(dir_ / "out/history_R-AL_seed0.csv");
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
  const std::string first = slurp(dir_ / "out/history_R-AL_seed0.csv");
  cmd_active_learn(config());
  EXPECT_EQ(slurp(dir_ / "out/history_R-AL_seed0.csv"), first);
}

TEST_F(ExperimentTest, BenchmarkReportAndRegeneration) {
  const json report = cmd_benchmark(config());
  const auto& sweep = report.at("eigen_sweep");
  EXPECT_EQ(sweep.at("points").size(), 3u);
  EXPECT_TRUE(sweep.at("shape").contains("monotone_then_plateau"));
  EXPECT_EQ(report.at("grid").at("cells").size(), 2u * 3u * 2u);
  EXPECT_EQ(report.at("grid").at("summary").size(), 12u);
  for (const auto& cell : report.at("grid").at("cells")) {
    EXPECT_GE(cell.at("RE").get<double>(), 0.0);
    EXPECT_TRUE(cell.contains("wall_seconds"));
  }
  EXPECT_EQ(report.at("active_learning").at("median_final_RE").size(), 5u);
  EXPECT_TRUE(report.contains("wall_seconds"));

  const json regenerated = regenerate_report(dir_ / "out");
  EXPECT_EQ(regenerated.size(), 12u);
  for (const auto& [name, v] : regenerated.items()) {
    EXPECT_NEAR(v.at("stored").get<double>(), v.at("recomputed").get<double>(), 1e-12) << name;
  }

  const std::string grid = slurp(dir_ / "out/grid.csv");
  const std::string curves = slurp(dir_ / "out/al_curves.csv");
  cmd_benchmark(config());
  EXPECT_EQ(slurp(dir_ / "out/grid.csv"), grid);
  EXPECT_EQ(slurp(dir_ / "out/al_curves.csv"), curves);
}

}  // namespace
}  // namespace stgp::experiment
