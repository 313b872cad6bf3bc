#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <memory>

#include "stgp/io.hpp"
#include "stgp/laplacian.hpp"
#include "stgp/shapes.hpp"

namespace stgp {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("stgp_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  fs::path dir_;
};

TEST_F(IoTest, SignalsRoundTripExactly) {
  const std::vector<double> times = {0.0, 0.1, 1.0 / 3.0};
  const VertexList ids = {4, 17};
  Eigen::MatrixXd values(3, 2);
  values << 1e-17, -2.5, 0.1, 1.0 / 7.0, 3e5, -0.0;
  io::write_signals(dir_ / "s.csv", times, ids, values);
  const io::Signals s = io::read_signals(dir_ / "s.csv");
  EXPECT_EQ(s.times, times);
  EXPECT_EQ(s.vertices, ids);
  EXPECT_TRUE((s.values.array() == values.array()).all());
}

TEST_F(IoTest, SignalsParseErrors) {
  EXPECT_THROW(io::read_signals(dir_ / "missing.csv"), ParseError);
  EXPECT_THROW(io::read_signals(write("a.csv", "")), ParseError);
  EXPECT_THROW(io::read_signals(write("b.csv", "t,v0\n0,1\n")), ParseError);
  EXPECT_THROW(io::read_signals(write("c.csv", "time,v0\n0,1,2\n")), ParseError);
  EXPECT_THROW(io::read_signals(write("d.csv", "time,v0\n0,abc\n")), ParseError);
  EXPECT_THROW(io::read_signals(write("e.csv", "time,v0\n1,0\n0.5,0\n")), ParseError);
  EXPECT_THROW(io::read_signals(write("f.csv", "time,v0\n")), ParseError);
  EXPECT_NO_THROW(io::read_signals(write("g.csv", "time,v0,v3\r\n0,1,2\r\n1,3,4\r\n")));
}

TEST_F(IoTest, SpectrumFiles) {
  const auto basis = spectral_basis(cotan_laplacian(shapes::icosphere(1)), 6);
  io::write_spectrum(dir_ / "ev.csv", dir_ / "vec.csv", basis);
  const auto values = io::read_eigenvalues(dir_ / "ev.csv");
  ASSERT_EQ(values.size(), 6u);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(values[j], basis.eigenvalues(static_cast<Eigen::Index>(j)));
}

TEST_F(IoTest, ModelJson) {
  auto mesh = std::make_shared<const TriMesh>(shapes::icosphere(1));
  auto basis = std::make_shared<const SpectralBasis>(spectral_basis(cotan_laplacian(*mesh), 10));
  auto data = std::make_shared<const TrainingSet>(
      TrainingSet{{0, 5, 9}, {0.0, 1.0}, Eigen::MatrixXd::Random(2, 3)});
  HyperParams theta;
  theta.spatial_length = 0.3;
  const FittedModel model(data, SpatialCovariance::laplacian(basis), theta);
  const auto j = io::model_to_json(model);
  EXPECT_EQ(io::hyperparams_from_json(j.at("theta")), theta);
  EXPECT_EQ(j.at("kernel"), "laplacian");
  EXPECT_EQ(j.at("eigenpairs"), 10);
  EXPECT_EQ(j.at("theta").at("nu"), 1.5);
  io::write_json(dir_ / "m.json", j);
  EXPECT_EQ(io::read_json(dir_ / "m.json"), j);
  EXPECT_THROW(io::read_json(write("bad.json", "{not json")), ParseError);
  nlohmann::json bad = j.at("theta");
  bad["l_s"] = -1.0;
  EXPECT_THROW(io::hyperparams_from_json(bad), InputError);
}

TEST(Hash, Fnv1aKnownValues) {
  EXPECT_EQ(io::hex(io::fnv1a("", 0)), "cbf29ce484222325");
  EXPECT_EQ(io::hex(io::fnv1a("a", 1)), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace stgp
