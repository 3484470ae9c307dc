#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "filterformer/encoder.hpp"
#include "filterformer/model.hpp"
#include "filterformer/oracle.hpp"
#include "filterformer/paths.hpp"

namespace filterformer::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Path CSV: header "t,y1,...,yd", one row per grid point, %.17g fields.
void write_path_csv(const SampledPath& path, const fs::path& file);
SampledPath read_path_csv(const fs::path& file);
std::string path_csv(const SampledPath& path);

/// [{t, mean: [...], cov: [[...]]}, ...]
json trajectory_to_json(const FilterTrajectory& trajectory);
FilterTrajectory trajectory_from_json(const json& j);

/// CSV "t,trace,lambda_min" per grid point.
std::string trajectory_diagnostics_csv(const FilterTrajectory& trajectory);

json matrix_to_json(const Mat& m);
Mat matrix_from_json(const json& j);
json vector_to_json(const Vec& v);
Vec vector_from_json(const json& j);

/// {"activation": ..., "tensors": [{"name", "shape": [rows, cols], "data": row-major}]}
json mlp_to_json(const MLPParams& p);
MLPParams mlp_from_json(const json& j);

/// {"atoms": [{"mean": [...], "factor": [[...]]}]}
json decoder_to_json(const GeoAttentionParams& p);
GeoAttentionParams decoder_from_json(const json& j);

/// Encoder document. Reference path n is stored as {"file", "fnv1a64"}
/// with `ref_files[n]` given relative to the document's directory;
/// loading verifies every hash.
json encoder_to_json(const AttentionParams& p, const std::vector<std::string>& ref_files, const fs::path& base_dir);
AttentionParams encoder_from_json(const json& j, const fs::path& base_dir);

/// Model document: encoder by file reference + hash, MLP tensors, atoms.
json model_to_json(const FilterformerModel& m, const std::string& encoder_file, const fs::path& base_dir);
FilterformerModel model_from_json(const json& j, const fs::path& base_dir);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t value);

std::string read_file(const fs::path& file);
/// Writes atomically enough for our purposes (truncate + write); throws kIo.
void write_file(const fs::path& file, const std::string& contents);
json read_json(const fs::path& file);
void write_json(const fs::path& file, const json& j);

/// Shortest round-trip text of a double ("%.17g").
std::string format_double(double v);

}  // namespace filterformer::io
