#include "filterformer/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "filterformer/encoder.hpp"
#include "filterformer/error.hpp"
#include "filterformer/oracle.hpp"
#include "filterformer/rng.hpp"

namespace filterformer::experiment {

namespace {

constexpr int kSchema = 1;

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::kConfig, "config field '" + field + "': " + msg);
}

// Reads one JSON object, tracking the dotted field path for diagnostics
// and rejecting keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) field_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) field_error(at(key), "missing");
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) field_error(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) field_error(at(key), "must be finite");
    return d;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) field_error(at(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) field_error(at(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) field_error(at(key), "expected a string");
    return v.get<std::string>();
  }

  Vec vector(const std::string& key, const Vec& fallback) {
    if (!has(key)) return fallback;
    try {
      return io::vector_from_json(raw(key));
    } catch (const std::exception& e) {
      field_error(at(key), e.what());
    }
  }

  Mat matrix(const std::string& key) {
    try {
      return io::matrix_from_json(raw(key));
    } catch (const std::exception& e) {
      field_error(at(key), e.what());
    }
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) field_error(at(item.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Wraps a throwing validation so its message names the section.
template <class F>
void check_section(const std::string& section, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig || e.kind() == ErrorKind::kInvalidArgument ||
        e.kind() == ErrorKind::kDimensionMismatch || e.kind() == ErrorKind::kInvalidCovariance)
      field_error(section, e.what());
    throw;
  }
}

const std::vector<std::string> kLinearRequired{"a1", "b1", "A1", "B2"};
const std::vector<std::string> kLinearOptional{"a0", "b2", "A0", "B1"};

// Drift offsets are written as plain vectors.
bool is_offset(const std::string& key) { return key == "a0" || key == "A0"; }

std::vector<std::string> preset_params(const std::string& preset) {
  if (preset == "scalar-kalman") return {"a", "b", "A", "B"};
  if (preset == "observation-modulated") return {"rate", "swing", "b", "A", "B"};
  if (preset == "linear") return {};
  field_error("system.preset", "unknown preset '" + preset + "'");
}

LinearSystem linear_system(const std::map<std::string, Mat>& m) {
  auto get = [&](const std::string& k) -> const Mat& {
    auto it = m.find(k);
    if (it == m.end()) field_error("system.matrices." + k, "missing");
    return it->second;
  };
  LinearSystem s;
  s.a1 = get("a1");
  s.b1 = get("b1");
  s.big_a1 = get("A1");
  s.big_b2 = get("B2");
  const Index d = s.a1.rows();
  const Index q = s.big_a1.rows();
  s.a0 = m.count("a0") ? Vec(get("a0").reshaped()) : Vec::Zero(d);
  s.big_a0 = m.count("A0") ? Vec(get("A0").reshaped()) : Vec::Zero(q);
  s.b2 = m.count("b2") ? get("b2") : Mat::Zero(d, s.big_b2.cols());
  s.big_b1 = m.count("B1") ? get("B1") : Mat::Zero(q, s.b1.cols());
  return s;
}

Gaussian x0_law(const SimulationSpec& s) { return Gaussian(s.x0_mean, s.x0_cov); }

std::string indexed(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, i);
  return buf;
}

PLDomainSpec pl_domain(const ExperimentConfig& c) {
  return uniform_pl_domain(c.simulation.horizon, c.simulation.pl_pieces, c.simulation.pl_bound,
                           c.system.observation_dim());
}

std::vector<FilterTrajectory> trajectories_for(const ExperimentConfig& c, const Dataset& ds,
                                               const fs::path& dataset_dir) {
  const fs::path dir = dataset_dir / "oracle";
  if (fs::exists(dir / indexed("traj_%03zu.json", 0))) return load_trajectories(dir, ds.observations.size());
  const CoefficientSet coeffs = c.system.coefficients();
  const Gaussian init = x0_law(c.simulation);
  std::vector<FilterTrajectory> out;
  out.reserve(ds.observations.size());
  for (const auto& y : ds.observations) out.push_back(run_oracle(coeffs, y, init));
  return out;
}

}  // namespace

CoefficientSet SystemSpec::coefficients() const {
  auto p = [&](const char* k) { return params.at(k); };
  if (preset == "scalar-kalman") return scalar_kalman(p("a"), p("b"), p("A"), p("B")).coefficients();
  if (preset == "observation-modulated") return observation_modulated(p("rate"), p("swing"), p("b"), p("A"), p("B"));
  if (preset == "linear") return linear_system(matrices).coefficients();
  field_error("system.preset", "unknown preset '" + preset + "'");
}

Index SystemSpec::signal_dim() const { return preset == "linear" ? matrices.at("a1").rows() : 1; }
Index SystemSpec::observation_dim() const { return preset == "linear" ? matrices.at("A1").rows() : 1; }

void ExperimentConfig::validate() const {
  const auto names = preset_params(system.preset);
  for (const auto& n : names)
    if (!system.params.count(n)) field_error("system.params." + n, "missing");
  for (const auto& [k, v] : system.params)
    if (std::find(names.begin(), names.end(), k) == names.end()) field_error("system.params." + k, "unknown field");
  if (system.preset == "linear") {
    for (const auto& k : kLinearRequired)
      if (!system.matrices.count(k)) field_error("system.matrices." + k, "missing");
    for (const auto& [k, v] : system.matrices)
      if (std::find(kLinearRequired.begin(), kLinearRequired.end(), k) == kLinearRequired.end() &&
          std::find(kLinearOptional.begin(), kLinearOptional.end(), k) == kLinearOptional.end())
        field_error("system.matrices." + k, "unknown field");
  } else if (!system.matrices.empty()) {
    field_error("system.matrices", "only the linear preset takes matrices");
  }
  check_section("system", [&] { (void)system.coefficients().evaluate(0.0, Mat::Zero(1, system.observation_dim())); });

  const auto& s = simulation;
  if (s.source != "sde" && s.source != "pl") field_error("simulation.source", "expected \"sde\" or \"pl\"");
  if (!(s.horizon > 0.0)) field_error("simulation.horizon", "must be > 0");
  if (s.steps < 1) field_error("simulation.steps", "must be >= 1");
  if (s.num_paths < 1) field_error("simulation.num_paths", "must be >= 1");
  if (s.x0_mean.size() != system.signal_dim()) field_error("simulation.x0_mean", "length must equal the signal dimension");
  if (s.x0_cov.rows() != system.signal_dim() || s.x0_cov.cols() != system.signal_dim())
    field_error("simulation.x0_cov", "must be square with the signal dimension");
  check_section("simulation.x0_cov", [&] { (void)x0_law(s); });
  if (s.y0.size() != system.observation_dim()) field_error("simulation.y0", "length must equal the observation dimension");
  if (s.source == "pl") check_section("simulation", [&] { pl_domain(*this).validate(); });

  if (encoder.kind != "finite" && encoder.kind != "pl") field_error("encoder.kind", "expected \"finite\" or \"pl\"");
  if (encoder.kind == "pl" && s.source != "pl") field_error("encoder.kind", "the pl encoder needs simulation.source \"pl\"");
  if (encoder.max_attempts < 1) field_error("encoder.max_attempts", "must be >= 1");

  for (std::size_t i = 0; i < model.hidden.size(); ++i)
    if (model.hidden[i] < 1) field_error("model.hidden[" + std::to_string(i) + "]", "must be >= 1");
  if (model.atoms < 1) field_error("model.atoms", "must be >= 1");
  check_section("train", [&] { train.validate(); });
  if (output_dir.empty()) field_error("output_dir", "must not be empty");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Fields root(j, "");
  const auto schema = root.integer("schema", kSchema);
  if (schema != kSchema) field_error("schema", "unsupported schema " + std::to_string(schema));
  c.seed = root.unsigned_integer("seed", c.seed);
  c.output_dir = root.string("output_dir", c.output_dir);

  if (root.has("system")) {
    Fields f(root.raw("system"), "system");
    c.system.preset = f.string("preset", c.system.preset);
    c.system.params.clear();
    if (f.has("params")) {
      const json& p = f.raw("params");
      if (!p.is_object()) field_error("system.params", "expected an object");
      Fields pf(p, "system.params");
      for (const auto& item : p.items()) c.system.params[item.key()] = pf.number(item.key(), 0.0);
      pf.finish();
    }
    if (f.has("matrices")) {
      const json& m = f.raw("matrices");
      Fields mf(m, "system.matrices");
      for (const auto& item : m.items()) {
        const std::string& k = item.key();
        c.system.matrices[k] = is_offset(k) ? Mat(mf.vector(k, Vec())) : mf.matrix(k);
      }
      mf.finish();
    }
    f.finish();
  }

  if (root.has("simulation")) {
    Fields f(root.raw("simulation"), "simulation");
    auto& s = c.simulation;
    s.source = f.string("source", s.source);
    s.horizon = f.number("horizon", s.horizon);
    s.steps = f.integer("steps", s.steps);
    s.num_paths = f.integer("num_paths", s.num_paths);
    s.x0_mean = f.vector("x0_mean", s.x0_mean);
    if (f.has("x0_cov")) s.x0_cov = f.matrix("x0_cov");
    s.y0 = f.vector("y0", s.y0);
    s.pl_pieces = f.integer("pl_pieces", s.pl_pieces);
    s.pl_bound = f.number("pl_bound", s.pl_bound);
    f.finish();
  }

  if (root.has("encoder")) {
    Fields f(root.raw("encoder"), "encoder");
    c.encoder.kind = f.string("kind", c.encoder.kind);
    c.encoder.max_attempts = static_cast<int>(f.integer("max_attempts", c.encoder.max_attempts));
    f.finish();
  }

  if (root.has("model")) {
    Fields f(root.raw("model"), "model");
    if (f.has("hidden")) {
      const json& h = f.raw("hidden");
      if (!h.is_array()) field_error("model.hidden", "expected an array of widths");
      c.model.hidden.clear();
      for (const auto& w : h) {
        if (!w.is_number_integer()) field_error("model.hidden", "widths must be integers");
        c.model.hidden.push_back(w.get<Index>());
      }
    }
    c.model.atoms = f.integer("atoms", c.model.atoms);
    const std::string act = f.string("activation", std::string(to_string(c.model.activation)));
    check_section("model.activation", [&] { c.model.activation = activation_from_string(act); });
    f.finish();
  }

  if (root.has("train")) {
    Fields f(root.raw("train"), "train");
    auto& t = c.train;
    const std::string opt = f.string("optimizer", std::string(to_string(t.optimizer)));
    check_section("train.optimizer", [&] { t.optimizer = optimizer_from_string(opt); });
    t.learning_rate = f.number("learning_rate", t.learning_rate);
    t.final_lr_fraction = f.number("final_lr_fraction", t.final_lr_fraction);
    t.epochs = static_cast<int>(f.integer("epochs", t.epochs));
    t.batch_size = f.integer("batch_size", t.batch_size);
    t.momentum = f.number("momentum", t.momentum);
    t.loss_tolerance = f.number("loss_tolerance", t.loss_tolerance);
    f.finish();
  }
  root.finish();

  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json sys{{"preset", c.system.preset}};
  if (c.system.preset == "linear") {
    json m = json::object();
    for (const auto& [k, v] : c.system.matrices)
      m[k] = is_offset(k) ? io::vector_to_json(v.reshaped()) : io::matrix_to_json(v);
    sys["matrices"] = m;
  } else {
    json p = json::object();
    for (const auto& [k, v] : c.system.params) p[k] = v;
    sys["params"] = p;
  }
  const auto& s = c.simulation;
  json sim{{"source", s.source},
           {"horizon", s.horizon},
           {"steps", s.steps},
           {"num_paths", s.num_paths},
           {"x0_mean", io::vector_to_json(s.x0_mean)},
           {"x0_cov", io::matrix_to_json(s.x0_cov)},
           {"y0", io::vector_to_json(s.y0)},
           {"pl_pieces", s.pl_pieces},
           {"pl_bound", s.pl_bound}};
  const auto& t = c.train;
  json train{{"optimizer", std::string(to_string(t.optimizer))},
             {"learning_rate", t.learning_rate},
             {"final_lr_fraction", t.final_lr_fraction},
             {"epochs", t.epochs},
             {"batch_size", t.batch_size},
             {"momentum", t.momentum},
             {"loss_tolerance", t.loss_tolerance}};
  return json{{"schema", kSchema},
              {"seed", c.seed},
              {"system", sys},
              {"simulation", sim},
              {"encoder", {{"kind", c.encoder.kind}, {"max_attempts", c.encoder.max_attempts}}},
              {"model",
               {{"hidden", c.model.hidden}, {"atoms", c.model.atoms}, {"activation", std::string(to_string(c.model.activation))}}},
              {"train", train},
              {"output_dir", c.output_dir}};
}

ExperimentConfig load_config(const fs::path& file) {
  const json j = io::read_json(file);
  try {
    return config_from_json(j);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw Error(ErrorKind::kConfig, file.string() + ": " + e.what());
    throw;
  }
}

std::uint64_t stream_seed(const ExperimentConfig& c, SeedStream stream) {
  return derive_seed(c.seed, static_cast<std::uint64_t>(stream));
}

void cmd_simulate(const ExperimentConfig& c, const fs::path& out_dir) {
  c.validate();
  const auto& s = c.simulation;
  const std::uint64_t base = stream_seed(c, SeedStream::kSimulation);
  json entries = json::array();
  const CoefficientSet coeffs = c.system.coefficients();
  const Vec grid = SampledPath::uniform_grid(s.horizon, s.steps);
  for (std::size_t i = 0; i < static_cast<std::size_t>(s.num_paths); ++i) {
    const std::uint64_t seed = derive_seed(base, i);
    json entry{{"index", i}, {"seed", seed}};
    const std::string obs = indexed("paths/obs_%03zu.csv", i);
    if (s.source == "sde") {
      SimConfig sc;
      sc.horizon = s.horizon;
      sc.steps = s.steps;
      sc.seed = seed;
      sc.x0_law = x0_law(s);
      sc.y0 = s.y0;
      const SimulatedPair pair = simulate(coeffs, sc);
      const std::string sig = indexed("paths/signal_%03zu.csv", i);
      io::write_path_csv(pair.observation, out_dir / obs);
      io::write_path_csv(pair.signal, out_dir / sig);
      entry["signal"] = sig;
    } else {
      Rng rng(seed);
      io::write_path_csv(sample_pl_path(pl_domain(c), grid, rng), out_dir / obs);
    }
    entry["observation"] = obs;
    entries.push_back(std::move(entry));
  }
  io::write_json(out_dir / "manifest.json",
                 json{{"schema", kSchema}, {"seed", c.seed}, {"config", config_to_json(c)}, {"paths", entries}});
}

Dataset load_dataset(const fs::path& dataset_dir) {
  const json m = io::read_json(dataset_dir / "manifest.json");
  Dataset ds;
  try {
    for (const auto& e : m.at("paths")) {
      ds.observation_files.push_back(e.at("observation").get<std::string>());
      ds.observations.push_back(io::read_path_csv(dataset_dir / ds.observation_files.back()));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, (dataset_dir / "manifest.json").string() + ": " + e.what());
  }
  require(!ds.observations.empty(), ErrorKind::kConfig, "dataset manifest lists no paths");
  return ds;
}

void cmd_oracle(const ExperimentConfig& c, const fs::path& dataset_dir, const fs::path& out_dir) {
  c.validate();
  const Dataset ds = load_dataset(dataset_dir);
  const CoefficientSet coeffs = c.system.coefficients();
  const Gaussian init = x0_law(c.simulation);
  for (std::size_t i = 0; i < ds.observations.size(); ++i) {
    const FilterTrajectory traj = run_oracle(coeffs, ds.observations[i], init);
    io::write_json(out_dir / "oracle" / indexed("traj_%03zu.json", i), io::trajectory_to_json(traj));
    io::write_file(out_dir / "oracle" / indexed("diag_%03zu.csv", i), io::trajectory_diagnostics_csv(traj));
  }
}

std::vector<FilterTrajectory> load_trajectories(const fs::path& dir, std::size_t count) {
  std::vector<FilterTrajectory> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const fs::path file = dir / indexed("traj_%03zu.json", i);
    try {
      out.push_back(io::trajectory_from_json(io::read_json(file)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kConfig, file.string() + ": " + e.what());
    }
  }
  return out;
}

void cmd_train(const ExperimentConfig& c, const fs::path& dataset_dir, const fs::path& out_dir) {
  c.validate();
  const Dataset ds = load_dataset(dataset_dir);
  const FilteringDataset data = make_dataset(ds.observations, trajectories_for(c, ds, dataset_dir));

  AttentionParams encoder;
  if (c.encoder.kind == "pl") {
    encoder = build_pl_encoder(pl_domain(c), ds.observations.front().grid());
  } else {
    Rng rng(stream_seed(c, SeedStream::kEncoder));
    encoder = build_finite_encoder(ds.observations, rng, c.encoder.max_attempts).params;
  }
  std::vector<std::string> ref_files;
  for (std::size_t n = 0; n < encoder.sim.refs.size(); ++n) {
    ref_files.push_back(indexed("refs/ref_%03zu.csv", n));
    io::write_path_csv(encoder.sim.refs[n], out_dir / ref_files.back());
  }
  io::write_json(out_dir / "encoder.json", io::encoder_to_json(encoder, ref_files, out_dir));

  Rng init_rng(stream_seed(c, SeedStream::kModelInit));
  const FilterformerModel init =
      init_model(encoder, data, c.model.hidden, c.model.atoms, c.model.activation, init_rng);
  TrainConfig tc = c.train;
  tc.seed = stream_seed(c, SeedStream::kTraining);
  const TrainResult result = train(init, data, tc);

  std::string log = "epoch,loss\n";
  for (std::size_t e = 0; e < result.history.size(); ++e)
    log += std::to_string(e) + "," + io::format_double(result.history[e]) + "\n";
  io::write_file(out_dir / "train_log.csv", log);
  io::write_json(out_dir / "model.json", io::model_to_json(result.model, "encoder.json", out_dir));
}

json summary_to_json(const Summary& s) {
  return json{{"schema", kSchema}, {"sup_w2", s.sup_w2}, {"mean_w2", s.mean_w2}, {"n", s.n},
              {"note", "W2 bounds W_p for p <= 2, so sup_w2 bounds the uniform W_p error"}};
}

Summary cmd_eval(const ExperimentConfig& c, const fs::path& model_file, const fs::path& dataset_dir,
                 const fs::path& out_dir) {
  c.validate();
  const json mj = io::read_json(model_file);
  FilterformerModel model;
  try {
    model = io::model_from_json(mj, model_file.parent_path());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, model_file.string() + ": " + e.what());
  }
  const Dataset ds = load_dataset(dataset_dir);
  const FilteringDataset data = make_dataset(ds.observations, trajectories_for(c, ds, dataset_dir));
  const Evaluation ev = evaluate(model, data);

  std::string csv = "sample,path,t,w2\n";
  for (const auto& r : ev.rows)
    csv += std::to_string(r.sample) + "," + std::to_string(r.path) + "," + io::format_double(r.t) + "," +
           io::format_double(r.w2) + "\n";
  io::write_file(out_dir / "eval.csv", csv);
  const Summary s{ev.sup_w2, ev.mean_w2, data.size()};
  io::write_json(out_dir / "summary.json", summary_to_json(s));
  return s;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
      return 4;
    case ErrorKind::kDivergence:
    case ErrorKind::kRiccatiBlowup:
    case ErrorKind::kAssumptionViolation:
    case ErrorKind::kInvalidCovariance:
    case ErrorKind::kRetryBudgetExhausted:
      return 3;
    default:
      return 2;
  }
}

}  // namespace filterformer::experiment
