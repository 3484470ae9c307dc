#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "filterformer/error.hpp"
#include "filterformer/io.hpp"
#include "filterformer/model.hpp"
#include "filterformer/sde.hpp"

namespace filterformer::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

/// Named coefficient preset plus its numeric parameters.
///   scalar-kalman:          a, b, A, B
///   observation-modulated:  rate, swing, b, A, B
///   linear:                 matrices a0, a1, b1, b2, A0, A1, B1, B2
struct SystemSpec {
  std::string preset = "scalar-kalman";
  std::map<std::string, double> params{{"a", -1.0}, {"b", 1.0}, {"A", 1.0}, {"B", 1.0}};
  std::map<std::string, Mat> matrices;

  CoefficientSet coefficients() const;
  Index signal_dim() const;
  Index observation_dim() const;
};

/// How observation paths are produced: "sde" simulates the coupled system;
/// "pl" draws observation paths from a piecewise-linear domain.
struct SimulationSpec {
  std::string source = "sde";
  double horizon = 1.0;
  Index steps = 256;
  Index num_paths = 32;
  Vec x0_mean = Vec::Zero(1);
  Mat x0_cov = Mat::Identity(1, 1);
  Vec y0 = Vec::Zero(1);
  Index pl_pieces = 4;
  double pl_bound = 1.0;
};

struct EncoderSpec {
  std::string kind = "finite";  ///< finite | pl
  int max_attempts = 64;
};

struct ModelSpec {
  std::vector<Index> hidden{64, 64};
  Index atoms = 32;
  Activation activation = Activation::kReLU;
};

struct ExperimentConfig {
  SystemSpec system;
  SimulationSpec simulation;
  EncoderSpec encoder;
  ModelSpec model;
  TrainConfig train;
  std::uint64_t seed = 0;
  /// Relative to the config file's directory.
  std::string output_dir = "out";

  void validate() const;
};

/// Field-level diagnostics are reported as kConfig errors naming the JSON
/// path of the offending field.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const fs::path& file);

/// Independent seed streams derived from the master seed.
enum class SeedStream : std::uint64_t { kSimulation = 1, kEncoder = 2, kModelInit = 3, kTraining = 4 };
std::uint64_t stream_seed(const ExperimentConfig& c, SeedStream stream);

/// Observation (and, for "sde", signal) paths plus the manifest.
struct Dataset {
  std::vector<SampledPath> observations;
  std::vector<std::string> observation_files;  ///< relative to the dataset directory
};

/// Writes paths/obs_NNN.csv (+ paths/signal_NNN.csv) and manifest.json.
void cmd_simulate(const ExperimentConfig& c, const fs::path& out_dir);
Dataset load_dataset(const fs::path& dataset_dir);

/// Writes oracle/traj_NNN.json and oracle/diag_NNN.csv for every path.
void cmd_oracle(const ExperimentConfig& c, const fs::path& dataset_dir, const fs::path& out_dir);
std::vector<FilterTrajectory> load_trajectories(const fs::path& dir, std::size_t count);

/// Builds the encoder, trains, and writes encoder.json, model.json and
/// train_log.csv. Trajectories are read from `<out_dir>/oracle` when
/// present, otherwise recomputed.
void cmd_train(const ExperimentConfig& c, const fs::path& dataset_dir, const fs::path& out_dir);

struct Summary {
  double sup_w2 = 0.0;
  double mean_w2 = 0.0;
  Index n = 0;
};
json summary_to_json(const Summary& s);

/// Writes eval.csv (sample,path,t,w2) and summary.json.
Summary cmd_eval(const ExperimentConfig& c, const fs::path& model_file, const fs::path& dataset_dir,
                 const fs::path& out_dir);

/// Maps an error kind to the CLI exit code: 2 config, 3 numeric, 4 I/O.
int exit_code_for(ErrorKind kind);

}  // namespace filterformer::experiment
