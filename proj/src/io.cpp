#include "tsr/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tsr/errors.hpp"

namespace tsr {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated binary file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

constexpr char kFieldMagic[8] = {'T', 'S', 'R', 'F', 'I', 'E', 'L', 'D'};
constexpr char kCheckpointMagic[8] = {'T', 'S', 'R', 'C', 'K', 'P', 'T', '1'};

const char* block_name(ParamBlock b) {
  switch (b) {
    case ParamBlock::kTheta: return "theta";
    case ParamBlock::kPhi: return "phi";
    case ParamBlock::kGamma: return "gamma";
    case ParamBlock::kBias: return "bias";
    case ParamBlock::kPhiRelu: return "phi_relu";
  }
  return "theta";
}

ParamBlock block_from_name(const std::string& s) {
  if (s == "theta") return ParamBlock::kTheta;
  if (s == "phi") return ParamBlock::kPhi;
  if (s == "gamma") return ParamBlock::kGamma;
  if (s == "bias") return ParamBlock::kBias;
  if (s == "phi_relu") return ParamBlock::kPhiRelu;
  throw ConfigError("unknown parameter block '" + s + "'");
}

}  // namespace

void write_field_csv(const DensityField& field, const fs::path& path) {
  auto out = open_out(path);
  out << "x\\t";
  for (int s = 0; s <= field.n_steps(); ++s) out << ',' << fmt17(field.time(s));
  out << '\n';
  for (int i = 0; i < field.n_cells(); ++i) {
    out << fmt17(field.cell_center(i));
    for (int s = 0; s <= field.n_steps(); ++s) out << ',' << fmt17(field.at(s, i));
    out << '\n';
  }
}

void write_field_binary(const DensityField& field, const fs::path& path) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kFieldMagic, 8);
  put_u32(out, kFieldFormatVersion);
  put_u32(out, 0);
  put_u64(out, static_cast<std::uint64_t>(field.n_steps() + 1));
  put_u64(out, static_cast<std::uint64_t>(field.n_cells()));
  put_f64(out, field.domain().x_min);
  put_f64(out, field.domain().x_max);
  put_f64(out, field.domain().t_max);
  put_f64(out, field.dt());
  put_f64(out, field.v_f());
  for (double v : field.values()) put_f64(out, v);
  for (double v : field.inflow()) put_f64(out, v);
  for (double v : field.outflow()) put_f64(out, v);
}

DensityField read_field_binary(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kFieldMagic, 8) != 0) {
    throw ConfigError(path.string() + " is not a density field file");
  }
  if (get_u32(in) != kFieldFormatVersion) throw ConfigError("unsupported field format version");
  get_u32(in);
  const auto rows = get_u64(in);
  const auto cells = get_u64(in);
  Domain d;
  d.x_min = get_f64(in);
  d.x_max = get_f64(in);
  d.t_max = get_f64(in);
  d.n_cells = static_cast<int>(cells);
  TimeGrid grid{static_cast<int>(rows - 1), get_f64(in)};
  const double v_f = get_f64(in);
  DensityField field(d, grid, v_f);
  for (std::uint64_t s = 0; s < rows; ++s) {
    auto r = field.row(static_cast<int>(s));
    for (auto& v : r) v = get_f64(in);
  }
  for (auto& v : field.inflow()) v = get_f64(in);
  for (auto& v : field.outflow()) v = get_f64(in);
  return field;
}

void write_trajectories_csv(const AgentTrajectories& traj, const fs::path& path) {
  auto out = open_out(path);
  out << 't';
  for (int i = 0; i < traj.n_agents; ++i) out << ",y_" << (i + 1);
  out << '\n';
  for (int s = 0; s < traj.n_times(); ++s) {
    out << fmt17(traj.times[static_cast<std::size_t>(s)]);
    for (int i = 0; i < traj.n_agents; ++i) out << ',' << fmt17(traj.position(s, i));
    out << '\n';
  }
}

AgentTrajectories read_trajectories_csv(const fs::path& path) {
  auto in = open_in(path);
  AgentTrajectories traj;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trajectory file " + path.string());
  traj.n_agents = static_cast<int>(std::count(line.begin(), line.end(), ','));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    traj.times.push_back(std::stod(cell));
    int count = 0;
    while (std::getline(ss, cell, ',')) {
      traj.positions.push_back(std::stod(cell));
      ++count;
    }
    if (count != traj.n_agents) throw ConfigError("ragged trajectory file " + path.string());
  }
  return traj;
}

Json to_json(const Domain& d) {
  return {{"t_max", d.t_max}, {"x_min", d.x_min}, {"x_max", d.x_max}, {"n_cells", d.n_cells}};
}

Domain domain_from_json(const Json& j) {
  Domain d;
  d.t_max = j.value("t_max", d.t_max);
  d.x_min = j.value("x_min", d.x_min);
  d.x_max = j.value("x_max", d.x_max);
  d.n_cells = j.value("n_cells", d.n_cells);
  d.validate();
  return d;
}

Json to_json(const ScenarioSpec& s) {
  return {{"seed", s.seed},
          {"v_f", s.v_f},
          {"ic_segments", s.ic_segments},
          {"boundary_pieces", s.boundary_pieces},
          {"level_min", s.level_min},
          {"level_max", s.level_max},
          {"ic_levels", s.ic_levels},
          {"inflow_levels", s.inflow_levels},
          {"outflow_levels", s.outflow_levels}};
}

ScenarioSpec scenario_from_json(const Json& j) {
  ScenarioSpec s;
  s.seed = j.value("seed", s.seed);
  s.v_f = j.value("v_f", s.v_f);
  s.ic_segments = j.value("ic_segments", s.ic_segments);
  s.boundary_pieces = j.value("boundary_pieces", s.boundary_pieces);
  s.level_min = j.value("level_min", s.level_min);
  s.level_max = j.value("level_max", s.level_max);
  s.ic_levels = j.value("ic_levels", s.ic_levels);
  s.inflow_levels = j.value("inflow_levels", s.inflow_levels);
  s.outflow_levels = j.value("outflow_levels", s.outflow_levels);
  s.validate();
  return s;
}

Json to_json(const NoiseConfig& n) {
  return {{"sigma_rho", n.sigma_rho}, {"mu_rho", n.mu_rho}, {"sigma_y", n.sigma_y},
          {"seed", n.seed}};
}

NoiseConfig noise_from_json(const Json& j) {
  NoiseConfig n;
  n.sigma_rho = j.value("sigma_rho", n.sigma_rho);
  n.mu_rho = j.value("mu_rho", n.mu_rho);
  n.sigma_y = j.value("sigma_y", n.sigma_y);
  n.seed = j.value("seed", n.seed);
  n.validate();
  return n;
}

Json to_json(const LossWeights& w) {
  return {{"data", w.data},         {"physics", w.physics},     {"trajectory", w.trajectory},
          {"dynamics", w.dynamics}, {"viscosity", w.viscosity}, {"bias_penalty", w.bias_penalty}};
}

LossWeights weights_from_json(const Json& j) {
  LossWeights w;
  w.data = j.value("data", w.data);
  w.physics = j.value("physics", w.physics);
  w.trajectory = j.value("trajectory", w.trajectory);
  w.dynamics = j.value("dynamics", w.dynamics);
  w.viscosity = j.value("viscosity", w.viscosity);
  w.bias_penalty = j.value("bias_penalty", w.bias_penalty);
  w.validate();
  return w;
}

Json to_json(const StageSchedule& s) {
  Json stages = Json::array();
  for (const auto& st : s.stages) {
    Json frozen = Json::array();
    for (ParamBlock b : st.frozen) frozen.push_back(block_name(b));
    stages.push_back({{"name", st.name},
                      {"weights", to_json(st.weights)},
                      {"frozen", frozen},
                      {"adam_iters", st.adam_iters},
                      {"adam_lr", st.adam_lr},
                      {"lbfgs_iters", st.lbfgs_iters},
                      {"grad_tol", st.grad_tol},
                      {"rel_tol", st.rel_tol},
                      {"lbfgs_history", st.lbfgs_history}});
  }
  return {{"stages", stages}};
}

StageSchedule schedule_from_json(const Json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "staged") return StageSchedule::staged();
    if (name == "naive") return StageSchedule::naive();
    throw ConfigError("unknown schedule '" + name + "'");
  }
  StageSchedule s;
  for (const auto& js : j.at("stages")) {
    StageConfig st;
    st.name = js.value("name", std::string("stage"));
    st.weights = weights_from_json(js.value("weights", Json::object()));
    for (const auto& b : js.value("frozen", Json::array())) {
      st.frozen.push_back(block_from_name(b.get<std::string>()));
    }
    st.adam_iters = js.value("adam_iters", st.adam_iters);
    st.adam_lr = js.value("adam_lr", st.adam_lr);
    st.lbfgs_iters = js.value("lbfgs_iters", st.lbfgs_iters);
    st.grad_tol = js.value("grad_tol", st.grad_tol);
    st.rel_tol = js.value("rel_tol", st.rel_tol);
    st.lbfgs_history = js.value("lbfgs_history", st.lbfgs_history);
    s.stages.push_back(std::move(st));
  }
  s.validate();
  return s;
}

Json to_json(const TrainConfig& c) {
  Json j = {{"seed", c.seed},
            {"gamma0", c.gamma0},
            {"loss", c.loss == LossKind::kCoupled ? "coupled" : "noiseless"},
            {"schedule", to_json(c.schedule)}};
  if (!c.auto_architecture) {
    j["architecture"] = {{"hidden_layers", c.architecture.hidden_layers},
                         {"width", c.architecture.width}};
  }
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.gamma0 = j.value("gamma0", c.gamma0);
  const auto loss = j.value("loss", std::string("coupled"));
  if (loss == "coupled") {
    c.loss = LossKind::kCoupled;
  } else if (loss == "noiseless") {
    c.loss = LossKind::kNoiseless;
  } else {
    throw ConfigError("loss must be 'coupled' or 'noiseless'");
  }
  if (j.contains("architecture")) {
    c.auto_architecture = false;
    const auto& a = j.at("architecture");
    c.architecture.hidden_layers = a.value("hidden_layers", c.architecture.hidden_layers);
    c.architecture.width = a.value("width", c.architecture.width);
  }
  if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
  c.schedule.validate();
  return c;
}

Json to_json(const MeasurementSet& ms) {
  return {{"schema", "tsr.measurement_set"},
          {"version", kMeasurementSchemaVersion},
          {"domain", to_json(ms.domain)},
          {"v_f", ms.v_f},
          {"n_agents", ms.n_agents},
          {"times", ms.times},
          {"positions", ms.positions},
          {"densities", ms.densities},
          {"collocation", {{"t", ms.colloc_t}, {"x", ms.colloc_x}}},
          {"ode_times", ms.ode_times}};
}

MeasurementSet measurement_set_from_json(const Json& j) {
  if (j.value("schema", std::string()) != "tsr.measurement_set") {
    throw ConfigError("not a measurement set document");
  }
  if (j.value("version", 0) != kMeasurementSchemaVersion) {
    throw ConfigError("unsupported measurement set version");
  }
  MeasurementSet ms;
  ms.domain = domain_from_json(j.at("domain"));
  ms.v_f = j.at("v_f").get<double>();
  ms.n_agents = j.at("n_agents").get<int>();
  ms.times = j.at("times").get<std::vector<double>>();
  ms.positions = j.at("positions").get<std::vector<double>>();
  ms.densities = j.at("densities").get<std::vector<double>>();
  ms.colloc_t = j.at("collocation").at("t").get<std::vector<double>>();
  ms.colloc_x = j.at("collocation").at("x").get<std::vector<double>>();
  ms.ode_times = j.at("ode_times").get<std::vector<double>>();
  const auto expected = ms.times.size() * static_cast<std::size_t>(ms.n_agents);
  if (ms.positions.size() != expected || ms.densities.size() != expected ||
      ms.colloc_t.size() != ms.colloc_x.size()) {
    throw ConfigError("measurement set arrays have inconsistent sizes");
  }
  return ms;
}

Json to_json(const LossBreakdown& b) {
  return {{"data", b.data},           {"physics", b.physics},     {"viscosity", b.viscosity},
          {"trajectory", b.trajectory}, {"dynamics", b.dynamics}, {"bias_penalty", b.bias_penalty},
          {"total", b.total}};
}

Json to_json(const TrainReport& r) {
  Json stages = Json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"name", s.name},
                      {"termination", s.termination},
                      {"subspace_restarts", s.subspace_restarts},
                      {"evaluations", s.evaluations},
                      {"seconds", s.seconds},
                      {"final_terms", to_json(s.final_terms)},
                      {"adam_trace", s.adam_trace},
                      {"lbfgs_trace", s.lbfgs_trace}});
  }
  return {{"seed", r.seed},
          {"seconds", r.seconds},
          {"final_loss", r.final_loss},
          {"gamma_squared", r.gamma_squared},
          {"bias", r.bias},
          {"stages", stages}};
}

Json to_json(const EvaluationReport& r) {
  return {{"normalized_error", r.error},
          {"error_inside", r.error_inside},
          {"error_outside", r.error_outside},
          {"error_early", r.error_early},
          {"error_late", r.error_late},
          {"trajectory_rmse", r.trajectory_rmse},
          {"seconds", r.seconds}};
}

void write_checkpoint(const PinnModel& model, std::uint64_t seed, const fs::path& path) {
  const Standardizer& s = model.standardizer();
  const Json header = {
      {"format", "tsr.checkpoint"},
      {"architecture",
       {{"hidden_layers", model.theta.architecture().hidden_layers},
        {"width", model.theta.architecture().width},
        {"n_agents", model.n_agents()}}},
      {"domain", to_json(model.domain())},
      {"v_f", model.v_f()},
      {"standardizer", {{"t_scale", s.t_scale()}, {"x_scale", s.x_scale()}, {"x_min", s.x_min()}}},
      {"seed", seed},
      {"layout", {"theta", "phi", "gamma", "bias"}}};
  const std::string text = header.dump();
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kCheckpointMagic, 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const Eigen::VectorXd p = model.parameters();
  put_u64(out, static_cast<std::uint64_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) put_f64(out, p(i));
}

PinnModel read_checkpoint(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw ConfigError(path.string() + " is not a checkpoint");
  }
  const auto len = get_u64(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw std::runtime_error("truncated checkpoint header");
  }
  const Json header = Json::parse(text);
  const auto& a = header.at("architecture");
  ThetaArchitecture arch{a.at("hidden_layers").get<int>(), a.at("width").get<int>()};
  PinnModel model(domain_from_json(header.at("domain")), header.at("v_f").get<double>(),
                  a.at("n_agents").get<int>(), arch);
  const auto n = get_u64(in);
  if (n != model.parameter_count()) throw ConfigError("checkpoint parameter count mismatch");
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = get_f64(in);
  model.set_parameters(p);
  return model;
}

void write_loss_traces_csv(const TrainReport& report, const fs::path& path) {
  auto out = open_out(path);
  out << "stage,optimizer,iteration,loss\n";
  for (const auto& s : report.stages) {
    for (std::size_t i = 0; i < s.adam_trace.size(); ++i) {
      out << s.name << ",adam," << i << ',' << fmt17(s.adam_trace[i]) << '\n';
    }
    for (std::size_t i = 0; i < s.lbfgs_trace.size(); ++i) {
      out << s.name << ",lbfgs," << i << ',' << fmt17(s.lbfgs_trace[i]) << '\n';
    }
  }
}

Json read_json_file(const fs::path& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const Json& j, const fs::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace tsr
