#include "filterformer/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "filterformer/error.hpp"

namespace filterformer::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& file, const std::string& contents) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + file.string());
  out << contents;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + file.string());
}

json read_json(const fs::path& file) {
  const std::string text = read_file(file);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, file.string() + ": " + e.what());
  }
}

void write_json(const fs::path& file, const json& j) { write_file(file, j.dump(2) + "\n"); }

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string path_csv(const SampledPath& path) {
  std::string out = "t";
  for (Index c = 0; c < path.dim(); ++c) out += ",y" + std::to_string(c + 1);
  out += "\n";
  for (Index i = 0; i < path.size(); ++i) {
    out += format_double(path.grid()[i]);
    for (Index c = 0; c < path.dim(); ++c) out += "," + format_double(path.values()(i, c));
    out += "\n";
  }
  return out;
}

void write_path_csv(const SampledPath& path, const fs::path& file) { write_file(file, path_csv(path)); }

namespace {

double parse_double(std::string_view field, const fs::path& file, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorKind::kIo, file.string() + ":" + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

SampledPath read_path_csv(const fs::path& file) {
  const std::string text = read_file(file);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kIo, file.string() + ": empty path file");
  const auto header = split(line);
  if (header.size() < 2) throw Error(ErrorKind::kIo, file.string() + ": header needs t and at least one y column");
  const std::size_t dim = header.size() - 1;
  std::vector<double> times;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    if (fields.size() != dim + 1) {
      throw Error(ErrorKind::kIo, file.string() + ":" + std::to_string(line_no) + ": expected " +
                                      std::to_string(dim + 1) + " fields");
    }
    times.push_back(parse_double(fields[0], file, line_no));
    for (std::size_t c = 1; c <= dim; ++c) values.push_back(parse_double(fields[c], file, line_no));
  }
  const auto n = static_cast<Index>(times.size());
  Vec grid = Eigen::Map<const Vec>(times.data(), n);
  Mat vals = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, static_cast<Index>(dim));
  try {
    return SampledPath(std::move(grid), std::move(vals));
  } catch (const Error& e) {
    throw Error(ErrorKind::kIo, file.string() + ": " + e.what());
  }
}

json vector_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::kConfig, "expected a numeric array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = j[i].get<double>();
  return v;
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::kConfig, "expected an array of rows");
  if (j.empty()) return Mat(0, 0);
  const std::size_t cols = j[0].size();
  Mat m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(ErrorKind::kConfig, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

json trajectory_to_json(const FilterTrajectory& trajectory) {
  json out = json::array();
  for (Index i = 0; i < trajectory.size(); ++i) {
    out.push_back({{"t", trajectory.grid[i]},
                   {"mean", vector_to_json(trajectory.at(i).mean())},
                   {"cov", matrix_to_json(trajectory.at(i).cov())}});
  }
  return out;
}

FilterTrajectory trajectory_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::kIo, "trajectory must be a nonempty array");
  FilterTrajectory out;
  out.grid.resize(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.grid[static_cast<Index>(i)] = j[i].at("t").get<double>();
    out.states.emplace_back(vector_from_json(j[i].at("mean")), matrix_from_json(j[i].at("cov")));
  }
  return out;
}

std::string trajectory_diagnostics_csv(const FilterTrajectory& trajectory) {
  std::string out = "t,trace,lambda_min\n";
  for (Index i = 0; i < trajectory.size(); ++i) {
    const Mat& cov = trajectory.at(i).cov();
    out += format_double(trajectory.grid[i]) + "," + format_double(cov.trace()) + "," +
           format_double(min_eigenvalue(cov)) + "\n";
  }
  return out;
}

namespace {

json tensor(const std::string& name, const Mat& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", data}};
}

Mat tensor_data(const json& t) {
  const auto shape = t.at("shape").get<std::vector<Index>>();
  const auto data = t.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<Index>(data.size()) != shape[0] * shape[1]) {
    throw Error(ErrorKind::kConfig, "tensor '" + t.value("name", std::string("?")) + "' has inconsistent shape");
  }
  Mat m(shape[0], shape[1]);
  for (Index r = 0; r < shape[0]; ++r)
    for (Index c = 0; c < shape[1]; ++c) m(r, c) = data[static_cast<std::size_t>(r * shape[1] + c)];
  return m;
}

json file_reference(const std::string& file, const fs::path& base_dir) {
  return {{"file", file}, {"fnv1a64", hex64(fnv1a64(read_file(base_dir / file)))}};
}

std::string checked_contents(const json& ref, const fs::path& base_dir) {
  const auto file = ref.at("file").get<std::string>();
  const std::string contents = read_file(base_dir / file);
  if (hex64(fnv1a64(contents)) != ref.at("fnv1a64").get<std::string>()) {
    throw Error(ErrorKind::kIo, "hash mismatch for referenced file " + file);
  }
  return contents;
}

}  // namespace

json mlp_to_json(const MLPParams& p) {
  json tensors = json::array();
  for (std::size_t j = 0; j < p.layers.size(); ++j) {
    tensors.push_back(tensor("layer" + std::to_string(j) + ".weight", p.layers[j].weight));
    tensors.push_back(tensor("layer" + std::to_string(j) + ".bias", p.layers[j].bias));
  }
  json out = {{"activation", std::string(to_string(p.activation))}, {"tensors", tensors}};
  if (has_input_normalization(p)) {
    out["input_shift"] = vector_to_json(p.input_shift);
    out["input_scale"] = vector_to_json(p.input_scale);
  }
  return out;
}

MLPParams mlp_from_json(const json& j) {
  MLPParams p;
  p.activation = activation_from_string(j.at("activation").get<std::string>());
  const json& tensors = j.at("tensors");
  if (tensors.size() % 2 != 0 || tensors.empty()) throw Error(ErrorKind::kConfig, "MLP needs weight/bias tensor pairs");
  for (std::size_t i = 0; i < tensors.size(); i += 2) {
    const Mat bias = tensor_data(tensors[i + 1]);
    p.layers.push_back({tensor_data(tensors[i]), Eigen::Map<const Vec>(bias.data(), bias.size())});
  }
  if (j.contains("input_shift")) {
    p.input_shift = vector_from_json(j.at("input_shift"));
    p.input_scale = vector_from_json(j.at("input_scale"));
  }
  p.validate();
  return p;
}

json decoder_to_json(const GeoAttentionParams& p) {
  json atoms = json::array();
  for (Index n = 0; n < p.num_atoms(); ++n) {
    const auto k = static_cast<std::size_t>(n);
    atoms.push_back({{"mean", vector_to_json(p.means[k])}, {"factor", matrix_to_json(p.factors[k])}});
  }
  return {{"atoms", atoms}};
}

GeoAttentionParams decoder_from_json(const json& j) {
  GeoAttentionParams p;
  for (const json& atom : j.at("atoms")) {
    p.means.push_back(vector_from_json(atom.at("mean")));
    p.factors.push_back(matrix_from_json(atom.at("factor")));
  }
  p.validate();
  return p;
}

json encoder_to_json(const AttentionParams& p, const std::vector<std::string>& ref_files, const fs::path& base_dir) {
  require(ref_files.size() == p.sim.refs.size(), ErrorKind::kInvalidArgument, "one file per reference path");
  json refs = json::array();
  for (std::size_t n = 0; n < ref_files.size(); ++n) {
    const std::string on_disk = read_file(base_dir / ref_files[n]);
    if (on_disk != path_csv(p.sim.refs[n])) {
      throw Error(ErrorKind::kIo, ref_files[n] + " does not hold reference path " + std::to_string(n));
    }
    refs.push_back(file_reference(ref_files[n], base_dir));
  }
  return {{"schema", 1},
          {"similarity",
           {{"refs", refs},
            {"B", tensor("B", p.sim.B)},
            {"b", vector_to_json(p.sim.b)},
            {"A", tensor("A", p.sim.A)},
            {"a", vector_to_json(p.sim.a)}}},
          {"positional",
           {{"query_times", vector_to_json(p.pos.query_times)},
            {"U", tensor("U", p.pos.U)},
            {"V", tensor("V", p.pos.V)}}},
          {"C", tensor("C", p.C)}};
}

AttentionParams encoder_from_json(const json& j, const fs::path& base_dir) {
  AttentionParams p;
  const json& sim = j.at("similarity");
  for (const json& ref : sim.at("refs")) {
    checked_contents(ref, base_dir);
    p.sim.refs.push_back(read_path_csv(base_dir / ref.at("file").get<std::string>()));
  }
  p.sim.b = vector_from_json(sim.at("b"));
  p.sim.a = vector_from_json(sim.at("a"));
  p.sim.B = tensor_data(sim.at("B"));
  p.sim.A = tensor_data(sim.at("A"));
  p.pos.query_times = vector_from_json(j.at("positional").at("query_times"));
  p.pos.U = tensor_data(j.at("positional").at("U"));
  p.pos.V = tensor_data(j.at("positional").at("V"));
  p.C = tensor_data(j.at("C"));
  p.validate(p.sim.refs.front().dim());
  return p;
}

json model_to_json(const FilterformerModel& m, const std::string& encoder_file, const fs::path& base_dir) {
  return {{"schema", 1},
          {"encoder", file_reference(encoder_file, base_dir)},
          {"mlp", mlp_to_json(m.mlp)},
          {"decoder", decoder_to_json(m.decoder)}};
}

FilterformerModel model_from_json(const json& j, const fs::path& base_dir) {
  FilterformerModel m;
  const json& ref = j.at("encoder");
  const std::string encoder_text = checked_contents(ref, base_dir);
  const fs::path encoder_path = base_dir / ref.at("file").get<std::string>();
  m.encoder = encoder_from_json(json::parse(encoder_text), encoder_path.parent_path());
  m.mlp = mlp_from_json(j.at("mlp"));
  m.decoder = decoder_from_json(j.at("decoder"));
  m.validate(m.encoder.sim.refs.front().dim());
  return m;
}

}  // namespace filterformer::io
