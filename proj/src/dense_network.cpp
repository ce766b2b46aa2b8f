#include "tsr/dense_network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsr/errors.hpp"

namespace tsr {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
  }
  return "linear";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

bool has(const Eigen::MatrixXd& m) { return m.size() > 0; }

// Returns `m` or a zero matrix shaped like `like` when m is empty.
Eigen::MatrixXd or_zero(const Eigen::MatrixXd& m, const Eigen::MatrixXd& like) {
  if (has(m)) return m;
  return Eigen::MatrixXd::Zero(like.rows(), like.cols());
}

void accumulate(std::span<double> grad, std::size_t& offset, const Eigen::MatrixXd& gw,
                const Eigen::VectorXd& gb) {
  for (Eigen::Index j = 0; j < gw.cols(); ++j) {
    for (Eigen::Index i = 0; i < gw.rows(); ++i) grad[offset++] += gw(i, j);
  }
  for (Eigen::Index i = 0; i < gb.size(); ++i) grad[offset++] += gb(i);
}

}  // namespace

DenseNetwork::DenseNetwork(const std::vector<int>& sizes,
                           const std::vector<Activation>& activations) {
  if (sizes.size() < 2 || activations.size() != sizes.size() - 1) {
    throw ConfigError("layer sizes and activations are inconsistent");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] < 1 || sizes[l + 1] < 1) throw ConfigError("layer sizes must be positive");
    DenseLayer layer;
    layer.weight = Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]);
    layer.bias = Eigen::VectorXd::Zero(sizes[l + 1]);
    layer.activation = activations[l];
    layers_.push_back(std::move(layer));
  }
}

int DenseNetwork::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int DenseNetwork::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void DenseNetwork::pack(std::span<double> out) const {
  if (out.size() != parameter_count()) throw ConfigError("pack: wrong parameter count");
  std::size_t k = 0;
  for (const auto& l : layers_) {
    std::copy_n(l.weight.data(), l.weight.size(), out.data() + k);
    k += static_cast<std::size_t>(l.weight.size());
    std::copy_n(l.bias.data(), l.bias.size(), out.data() + k);
    k += static_cast<std::size_t>(l.bias.size());
  }
}

void DenseNetwork::unpack(std::span<const double> in) {
  if (in.size() != parameter_count()) throw ConfigError("unpack: wrong parameter count");
  std::size_t k = 0;
  for (auto& l : layers_) {
    std::copy_n(in.data() + k, l.weight.size(), l.weight.data());
    k += static_cast<std::size_t>(l.weight.size());
    std::copy_n(in.data() + k, l.bias.size(), l.bias.data());
    k += static_cast<std::size_t>(l.bias.size());
  }
}

void DenseNetwork::initialize(std::mt19937_64& rng) {
  for (auto& l : layers_) {
    const double fan_in = static_cast<double>(l.weight.cols());
    const double fan_out = static_cast<double>(l.weight.rows());
    const double limit = l.activation == Activation::kRelu ? std::sqrt(6.0 / fan_in)
                                                           : std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = dist(rng);
    }
    l.bias.setZero();
  }
}

Jet DenseNetwork::forward(const Eigen::MatrixXd& input, const JetSpec& spec, Tape* tape) const {
  if (input.rows() != input_dim()) throw ConfigError("network input has the wrong dimension");
  if (spec.curvature && spec.axis_b < 0) throw ConfigError("curvature needs axis_b");
  const Eigen::Index batch = input.cols();

  Jet z;
  z.value = input;
  if (spec.axis_a >= 0) {
    z.da = Eigen::MatrixXd::Zero(input.rows(), batch);
    z.da.row(spec.axis_a).setOnes();
  }
  if (spec.axis_b >= 0) {
    z.db = Eigen::MatrixXd::Zero(input.rows(), batch);
    z.db.row(spec.axis_b).setOnes();
  }
  if (spec.curvature) z.dbb = Eigen::MatrixXd::Zero(input.rows(), batch);

  if (tape) {
    tape->spec = spec;
    tape->inputs.clear();
    tape->pre.clear();
    tape->d1.clear();
    tape->d2.clear();
    tape->d3.clear();
  }

  for (const auto& layer : layers_) {
    Jet a;
    a.value = (layer.weight * z.value).colwise() + layer.bias;
    if (has(z.da)) a.da = layer.weight * z.da;
    if (has(z.db)) a.db = layer.weight * z.db;
    if (has(z.dbb)) a.dbb = layer.weight * z.dbb;

    Jet next;
    Eigen::ArrayXXd d1, d2, d3;
    switch (layer.activation) {
      case Activation::kLinear:
        next = a;
        break;
      case Activation::kTanh: {
        const Eigen::ArrayXXd s = a.value.array().tanh();
        d1 = 1.0 - s.square();
        d2 = -2.0 * s * d1;
        d3 = d1 * (6.0 * s.square() - 2.0);
        next.value = s.matrix();
        break;
      }
      case Activation::kRelu: {
        d1 = (a.value.array() > 0.0).cast<double>();
        d2 = Eigen::ArrayXXd::Zero(a.value.rows(), batch);
        d3 = d2;
        next.value = a.value.array().max(0.0).matrix();
        break;
      }
    }
    if (layer.activation != Activation::kLinear) {
      if (has(a.da)) next.da = (d1 * a.da.array()).matrix();
      if (has(a.db)) next.db = (d1 * a.db.array()).matrix();
      if (has(a.dbb)) {
        next.dbb = (d2 * a.db.array().square() + d1 * a.dbb.array()).matrix();
      }
    }
    if (tape) {
      tape->inputs.push_back(std::move(z));
      tape->pre.push_back(std::move(a));
      tape->d1.push_back(std::move(d1));
      tape->d2.push_back(std::move(d2));
      tape->d3.push_back(std::move(d3));
    }
    z = std::move(next);
  }
  return z;
}

Eigen::MatrixXd DenseNetwork::backward(const Tape& tape, const Jet& output_adjoint,
                                       std::span<double> grad) const {
  if (grad.size() != parameter_count()) throw ConfigError("backward: wrong gradient size");
  if (tape.inputs.size() != layers_.size()) throw ConfigError("backward: tape does not match");

  const Jet& last_pre = tape.pre.back();
  Jet zbar;
  zbar.value = or_zero(output_adjoint.value, last_pre.value);
  if (has(last_pre.da)) zbar.da = or_zero(output_adjoint.da, last_pre.da);
  if (has(last_pre.db)) zbar.db = or_zero(output_adjoint.db, last_pre.db);
  if (has(last_pre.dbb)) zbar.dbb = or_zero(output_adjoint.dbb, last_pre.dbb);

  // Offsets of each layer in the flat vector.
  std::vector<std::size_t> offsets(layers_.size());
  std::size_t k = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offsets[l] = k;
    k += static_cast<std::size_t>(layers_[l].weight.size() + layers_[l].bias.size());
  }

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    const Jet& a = tape.pre[l];
    const Jet& zin = tape.inputs[l];

    Jet abar;
    if (layer.activation == Activation::kLinear) {
      abar = std::move(zbar);
    } else {
      const auto& d1 = tape.d1[l];
      const auto& d2 = tape.d2[l];
      const auto& d3 = tape.d3[l];
      Eigen::ArrayXXd v = zbar.value.array() * d1;
      if (has(zbar.da)) {
        v += zbar.da.array() * d2 * a.da.array();
        abar.da = (zbar.da.array() * d1).matrix();
      }
      if (has(zbar.db)) {
        v += zbar.db.array() * d2 * a.db.array();
        Eigen::ArrayXXd b = zbar.db.array() * d1;
        if (has(zbar.dbb)) b += 2.0 * zbar.dbb.array() * d2 * a.db.array();
        abar.db = b.matrix();
      }
      if (has(zbar.dbb)) {
        v += zbar.dbb.array() * (d3 * a.db.array().square() + d2 * a.dbb.array());
        abar.dbb = (zbar.dbb.array() * d1).matrix();
      }
      abar.value = v.matrix();
    }

    Eigen::MatrixXd gw = abar.value * zin.value.transpose();
    if (has(abar.da)) gw.noalias() += abar.da * zin.da.transpose();
    if (has(abar.db)) gw.noalias() += abar.db * zin.db.transpose();
    if (has(abar.dbb)) gw.noalias() += abar.dbb * zin.dbb.transpose();
    const Eigen::VectorXd gb = abar.value.rowwise().sum();
    std::size_t off = offsets[l];
    accumulate(grad, off, gw, gb);

    Jet prev;
    prev.value = layer.weight.transpose() * abar.value;
    // The seeds at the network input are constants, so only the value stream
    // needs to flow past the first layer.
    if (l > 0) {
      if (has(abar.da)) prev.da = layer.weight.transpose() * abar.da;
      if (has(abar.db)) prev.db = layer.weight.transpose() * abar.db;
      if (has(abar.dbb)) prev.dbb = layer.weight.transpose() * abar.dbb;
    }
    zbar = std::move(prev);
  }
  return zbar.value;
}

ThetaArchitecture ThetaArchitecture::from_domain(double t_max, double length) {
  ThetaArchitecture a;
  a.hidden_layers = std::clamp(static_cast<int>(std::lround(8.0 * t_max / 100.0)), 4, 12);
  a.width = std::clamp(static_cast<int>(std::lround(20.0 * length / 7000.0)), 20, 64);
  return a;
}

ThetaNet::ThetaNet(ThetaArchitecture arch) : arch_(arch) {
  if (arch.hidden_layers < 1 || arch.width < 1) throw ConfigError("invalid density network size");
  std::vector<int> sizes{2};
  std::vector<Activation> acts;
  for (int i = 0; i < arch.hidden_layers; ++i) {
    sizes.push_back(arch.width);
    acts.push_back(Activation::kTanh);
  }
  sizes.push_back(1);
  acts.push_back(Activation::kLinear);
  net_ = DenseNetwork(sizes, acts);
}

ThetaBatch ThetaNet::evaluate(const Standardizer& s, std::span<const double> t,
                              std::span<const double> x, bool derivatives, Tape* tape) const {
  const auto n = static_cast<Eigen::Index>(t.size());
  return evaluate(s, Eigen::Map<const Eigen::ArrayXd>(t.data(), n),
                  Eigen::Map<const Eigen::ArrayXd>(x.data(), n), derivatives, tape);
}

ThetaBatch ThetaNet::evaluate(const Standardizer& s, const Eigen::ArrayXd& t,
                              const Eigen::ArrayXd& x, bool derivatives, Tape* tape) const {
  if (t.size() != x.size()) throw ConfigError("t and x batches differ in size");
  Eigen::MatrixXd input(2, t.size());
  input.row(0) = (t * s.t_scale() - 1.0).matrix().transpose();
  input.row(1) = ((x - s.x_min()) * s.x_scale() - 1.0).matrix().transpose();
  JetSpec spec;
  if (derivatives) spec = JetSpec{0, 1, true};
  const Jet out = net_.forward(input, spec, tape);
  ThetaBatch b;
  b.value = out.value.row(0).transpose().array();
  if (derivatives) {
    b.dt = out.da.row(0).transpose().array() * s.t_scale();
    b.dx = out.db.row(0).transpose().array() * s.x_scale();
    b.dxx = out.dbb.row(0).transpose().array() * (s.x_scale() * s.x_scale());
  }
  return b;
}

Eigen::ArrayXd ThetaNet::backward(const Standardizer& s, const Tape& tape,
                                  const ThetaBatch& adjoint, std::span<double> grad) const {
  Jet adj;
  adj.value = adjoint.value.matrix().transpose();
  if (adjoint.dt.size() > 0) adj.da = (adjoint.dt * s.t_scale()).matrix().transpose();
  if (adjoint.dx.size() > 0) adj.db = (adjoint.dx * s.x_scale()).matrix().transpose();
  if (adjoint.dxx.size() > 0) {
    adj.dbb = (adjoint.dxx * (s.x_scale() * s.x_scale())).matrix().transpose();
  }
  const Eigen::MatrixXd in_adj = net_.backward(tape, adj, grad);
  return in_adj.row(1).transpose().array() * s.x_scale();
}

ThetaDerivs theta_forward_derivs(const ThetaNet& net, const Standardizer& s, double t, double x) {
  const ThetaBatch b = net.evaluate(s, std::span<const double>(&t, 1),
                                    std::span<const double>(&x, 1), true);
  return {b.value(0), b.dt(0), b.dx(0), b.dxx(0)};
}

PhiNet::PhiNet(int n_agents) : n_agents_(n_agents) {
  if (n_agents < 1) throw ConfigError("trajectory network needs at least one agent");
  const int w = 2 * n_agents;
  tanh_ = DenseNetwork({1, w, w, w, n_agents}, {Activation::kTanh, Activation::kTanh,
                                               Activation::kTanh, Activation::kLinear});
  relu_ = DenseNetwork({1, w, w, w, n_agents}, {Activation::kRelu, Activation::kRelu,
                                               Activation::kRelu, Activation::kLinear});
}

std::size_t PhiNet::parameter_count() const {
  return tanh_.parameter_count() + relu_.parameter_count() + 2;
}

void PhiNet::pack(std::span<double> out) const {
  if (out.size() != parameter_count()) throw ConfigError("pack: wrong parameter count");
  const std::size_t nt = tanh_.parameter_count();
  const std::size_t nr = relu_.parameter_count();
  tanh_.pack(out.subspan(0, nt));
  relu_.pack(out.subspan(nt, nr));
  out[nt + nr] = mix_tanh_;
  out[nt + nr + 1] = mix_relu_;
}

void PhiNet::unpack(std::span<const double> in) {
  if (in.size() != parameter_count()) throw ConfigError("unpack: wrong parameter count");
  const std::size_t nt = tanh_.parameter_count();
  const std::size_t nr = relu_.parameter_count();
  tanh_.unpack(in.subspan(0, nt));
  relu_.unpack(in.subspan(nt, nr));
  mix_tanh_ = in[nt + nr];
  mix_relu_ = in[nt + nr + 1];
}

void PhiNet::initialize(std::mt19937_64& rng) {
  tanh_.initialize(rng);
  relu_.initialize(rng);
  mix_tanh_ = 0.5;
  mix_relu_ = 0.5;
}

PhiBatch PhiNet::evaluate(const Standardizer& s, std::span<const double> t, PhiTape* tape) const {
  Eigen::MatrixXd input(1, static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    input(0, static_cast<Eigen::Index>(i)) = s.t_to_std(t[i]);
  }
  const JetSpec spec{0, -1, false};
  Jet a = tanh_.forward(input, spec, tape ? &tape->tanh_tape : nullptr);
  Jet b = relu_.forward(input, spec, tape ? &tape->relu_tape : nullptr);
  PhiBatch out;
  const double to_phys = 1.0 / s.x_scale();
  out.position = ((mix_tanh_ * a.value + mix_relu_ * b.value).array() + 1.0) * to_phys +
                 s.x_min();
  out.velocity = (mix_tanh_ * a.da + mix_relu_ * b.da) * (s.t_scale() * to_phys);
  if (tape) {
    tape->tanh_out = std::move(a);
    tape->relu_out = std::move(b);
  }
  return out;
}

void PhiNet::backward(const Standardizer& s, const PhiTape& tape,
                      const Eigen::MatrixXd& position_adjoint,
                      const Eigen::MatrixXd& velocity_adjoint, std::span<double> grad) const {
  if (grad.size() != parameter_count()) throw ConfigError("backward: wrong gradient size");
  const double to_phys = 1.0 / s.x_scale();
  const Eigen::MatrixXd out_adj = position_adjoint * to_phys;
  const Eigen::MatrixXd out_t_adj = velocity_adjoint * (s.t_scale() * to_phys);

  const std::size_t nt = tanh_.parameter_count();
  const std::size_t nr = relu_.parameter_count();
  grad[nt + nr] += (out_adj.array() * tape.tanh_out.value.array()).sum() +
                   (out_t_adj.array() * tape.tanh_out.da.array()).sum();
  grad[nt + nr + 1] += (out_adj.array() * tape.relu_out.value.array()).sum() +
                       (out_t_adj.array() * tape.relu_out.da.array()).sum();

  Jet adj_t;
  adj_t.value = mix_tanh_ * out_adj;
  adj_t.da = mix_tanh_ * out_t_adj;
  tanh_.backward(tape.tanh_tape, adj_t, grad.subspan(0, nt));
  Jet adj_r;
  adj_r.value = mix_relu_ * out_adj;
  adj_r.da = mix_relu_ * out_t_adj;
  relu_.backward(tape.relu_tape, adj_r, grad.subspan(nt, nr));
}

PhiDerivs phi_forward_derivs(const PhiNet& net, const Standardizer& s, double t) {
  const PhiBatch b = net.evaluate(s, std::span<const double>(&t, 1));
  PhiDerivs d;
  d.positions.assign(b.position.data(), b.position.data() + b.position.size());
  d.velocities.assign(b.velocity.data(), b.velocity.data() + b.velocity.size());
  return d;
}

}  // namespace tsr
