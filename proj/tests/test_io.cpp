#include <filesystem>
#include <string>

#include "doctest.h"
#include "helpers.hpp"

#include "filterformer/error.hpp"
#include "filterformer/io.hpp"
#include "filterformer/sde.hpp"

using namespace filterformer;
using filterformer::testing::random_walk;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("filterformer_io_" + tag + "_" + std::to_string(Rng(std::hash<std::string>{}(tag)).next_u64()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_CASE("path CSV round-trips exactly") {
  TempDir dir("csv");
  Rng rng(1);
  for (Index dim : {1, 3}) {
    SampledPath p = random_walk(rng, 0.7, 33, dim);
    Mat v = p.values();
    v(3, 0) = 1.0 / 3.0;
    v(4, 0) = -1e-300;
    p = SampledPath(p.grid(), v);
    const fs::path file = dir.path / ("p" + std::to_string(dim) + ".csv");
    io::write_path_csv(p, file);
    const SampledPath q = io::read_path_csv(file);
    CHECK(q.grid() == p.grid());
    CHECK(q.values() == p.values());
  }
  CHECK(io::path_csv(SampledPath::constant(SampledPath::uniform_grid(1.0, 1), Vec::Constant(1, 0.5))) ==
        "t,y1\n0,0.5\n1,0.5\n");
}

TEST_CASE("malformed CSV is rejected") {
  TempDir dir("bad");
  io::write_file(dir.path / "a.csv", "t,y1\n0,1\n1,abc\n");
  io::write_file(dir.path / "b.csv", "t,y1\n0,1\n1\n");
  CHECK_THROWS_AS(io::read_path_csv(dir.path / "a.csv"), Error);
  CHECK_THROWS_AS(io::read_path_csv(dir.path / "b.csv"), Error);
  CHECK(kind_of([&] { (void)io::read_path_csv(dir.path / "missing.csv"); }) == ErrorKind::kIo);
}

TEST_CASE("trajectory and tensor JSON round-trip") {
  Rng rng(2);
  const CoefficientSet c = scalar_kalman(-1.0, 1.0, 1.0, 1.0).coefficients();
  const SampledPath y = random_walk(rng, 1.0, 20, 1);
  const FilterTrajectory t = run_oracle(c, y, Gaussian(Vec::Zero(1), Mat::Identity(1, 1)));
  const FilterTrajectory back = io::trajectory_from_json(json::parse(io::trajectory_to_json(t).dump()));
  CHECK(back.grid == t.grid);
  for (Index i = 0; i < t.size(); ++i) {
    CHECK(back.at(i).mean() == t.at(i).mean());
    CHECK(back.at(i).cov() == t.at(i).cov());
  }
  const Mat m = rng.normal_matrix(3, 2);
  CHECK(io::matrix_from_json(io::matrix_to_json(m)) == m);
  const Vec v = rng.normal_vector(5);
  CHECK(io::vector_from_json(io::vector_to_json(v)) == v);
  CHECK_THROWS_AS(io::matrix_from_json(json::parse("[[1, 2], [3]]")), Error);
  CHECK(io::trajectory_diagnostics_csv(t).rfind("t,trace,lambda_min\n", 0) == 0);
}

TEST_CASE("MLP and decoder JSON round-trip") {
  Rng rng(3);
  MLPParams p = init_mlp(4, {6, 5}, 3, Activation::kSwish, rng);
  fit_input_normalization(p, rng.normal_matrix(4, 10));
  const MLPParams q = io::mlp_from_json(json::parse(io::mlp_to_json(p).dump()));
  CHECK(q.activation == p.activation);
  CHECK(q.input_shift == p.input_shift);
  CHECK(q.input_scale == p.input_scale);
  for (std::size_t j = 0; j < p.layers.size(); ++j) {
    CHECK(q.layers[j].weight == p.layers[j].weight);
    CHECK(q.layers[j].bias == p.layers[j].bias);
  }
  const GeoAttentionParams d = random_atoms(4, 2, 1.0, 1.0, rng);
  const GeoAttentionParams e = io::decoder_from_json(json::parse(io::decoder_to_json(d).dump()));
  for (Index n = 0; n < 4; ++n) {
    CHECK(e.means[static_cast<std::size_t>(n)] == d.means[static_cast<std::size_t>(n)]);
    CHECK(e.factors[static_cast<std::size_t>(n)] == d.factors[static_cast<std::size_t>(n)]);
  }
}

TEST_CASE("encoder and model documents with hashed references") {
  TempDir dir("model");
  Rng rng(4);
  std::vector<SampledPath> paths;
  for (int i = 0; i < 3; ++i) paths.push_back(random_walk(rng, 1.0, 16, 1));
  const FiniteEncoder enc = build_finite_encoder(paths, rng);
  std::vector<std::string> files;
  for (std::size_t n = 0; n < enc.params.sim.refs.size(); ++n) {
    files.push_back("refs/ref_" + std::to_string(n) + ".csv");
    io::write_path_csv(enc.params.sim.refs[n], dir.path / files.back());
  }
  io::write_json(dir.path / "encoder.json", io::encoder_to_json(enc.params, files, dir.path));

  FilterformerModel m;
  m.encoder = enc.params;
  m.mlp = init_mlp(enc.params.output_dim(), {4}, 2, Activation::kReLU, rng);
  m.decoder = random_atoms(2, 1, 1.0, 1.0, rng);
  io::write_json(dir.path / "model.json", io::model_to_json(m, "encoder.json", dir.path));

  const FilterformerModel back = io::model_from_json(io::read_json(dir.path / "model.json"), dir.path);
  CHECK(back.encoder.C == m.encoder.C);
  CHECK(back.encoder.sim.B == m.encoder.sim.B);
  for (const auto& y : paths)
    for (double t : {0.25, 1.0}) {
      const Gaussian a = predict(m, t, y), b = predict(back, t, y);
      CHECK(a.mean() == b.mean());
      CHECK(a.cov() == b.cov());
    }

  SUBCASE("a modified reference file is detected") {
    io::write_file(dir.path / files[1], io::path_csv(paths[0]));
    CHECK(kind_of([&] { (void)io::model_from_json(io::read_json(dir.path / "model.json"), dir.path); }) ==
          ErrorKind::kIo);
  }
  SUBCASE("a modified encoder document is detected") {
    io::write_file(dir.path / "encoder.json", io::read_file(dir.path / "encoder.json") + " ");
    CHECK(kind_of([&] { (void)io::model_from_json(io::read_json(dir.path / "model.json"), dir.path); }) ==
          ErrorKind::kIo);
  }
  SUBCASE("references must match the files on disk") {
    std::vector<std::string> swapped = {files[1], files[0], files[2]};
    CHECK(kind_of([&] { (void)io::encoder_to_json(enc.params, swapped, dir.path); }) == ErrorKind::kIo);
  }
}

TEST_CASE("hashing and number formatting") {
  CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
  CHECK(io::hex64(io::fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
