#pragma once

#include <Eigen/Dense>
#include <random>
#include <span>
#include <vector>

#include "tsr/sensing.hpp"

namespace tsr {

enum class Activation { kTanh, kRelu, kLinear };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Derivative streams carried alongside the values through a network.
/// `axis_a` and `axis_b` select input rows; `curvature` adds the second
/// derivative along `axis_b`.
struct JetSpec {
  int axis_a = -1;
  int axis_b = -1;
  bool curvature = false;
};

/// Values and directional derivatives for a batch (one column per point).
/// Streams that are switched off stay empty.
struct Jet {
  Eigen::MatrixXd value;
  Eigen::MatrixXd da;
  Eigen::MatrixXd db;
  Eigen::MatrixXd dbb;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  ///< out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::kTanh;
};

/// Intermediate state kept by forward() for the reverse sweep.
struct Tape {
  JetSpec spec;
  std::vector<Jet> inputs;
  std::vector<Jet> pre;
  std::vector<Eigen::ArrayXXd> d1, d2, d3;
};

/// Fully connected feed-forward network evaluated on column batches, with
/// forward-mode propagation of first and second input derivatives and a
/// reverse sweep that differentiates all carried streams with respect to the
/// parameters.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  /// sizes = {in, h1, ..., out}; one activation per weight layer.
  DenseNetwork(const std::vector<int>& sizes, const std::vector<Activation>& activations);

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Flattening order: per layer, weight (column-major) then bias.
  void pack(std::span<double> out) const;
  void unpack(std::span<const double> in);

  /// Glorot-uniform weights for tanh/linear layers, He-uniform for relu, zero biases.
  void initialize(std::mt19937_64& rng);

  Jet forward(const Eigen::MatrixXd& input, const JetSpec& spec, Tape* tape = nullptr) const;

  /// Adds d(loss)/d(params) into `grad` given the adjoint of every carried
  /// output stream (empty streams count as zero). Returns the adjoint of the
  /// input values.
  Eigen::MatrixXd backward(const Tape& tape, const Jet& output_adjoint,
                           std::span<double> grad) const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Physical-coordinate values and derivatives of the density network.
struct ThetaBatch {
  Eigen::ArrayXd value;
  Eigen::ArrayXd dt;
  Eigen::ArrayXd dx;
  Eigen::ArrayXd dxx;
};

/// Layer count and width of the density network.
struct ThetaArchitecture {
  int hidden_layers = 4;
  int width = 20;

  /// 8T/100 hidden layers of 20L/7000 neurons, clamped to [4,12] x [20,64].
  static ThetaArchitecture from_domain(double t_max, double length);
};

/// Density network: (t, x) standardized -> tanh hidden layers -> linear scalar.
class ThetaNet {
 public:
  ThetaNet() = default;
  explicit ThetaNet(ThetaArchitecture arch);

  const ThetaArchitecture& architecture() const { return arch_; }
  DenseNetwork& network() { return net_; }
  const DenseNetwork& network() const { return net_; }
  std::size_t parameter_count() const { return net_.parameter_count(); }

  /// Evaluates at physical points. With `derivatives`, also returns d/dt,
  /// d/dx and d2/dx2 in physical units.
  ThetaBatch evaluate(const Standardizer& s, std::span<const double> t, std::span<const double> x,
                      bool derivatives, Tape* tape = nullptr) const;
  ThetaBatch evaluate(const Standardizer& s, const Eigen::ArrayXd& t, const Eigen::ArrayXd& x,
                      bool derivatives, Tape* tape = nullptr) const;

  /// Reverse sweep from physical-coordinate adjoints. Returns d(loss)/dx at
  /// every point (physical units).
  Eigen::ArrayXd backward(const Standardizer& s, const Tape& tape, const ThetaBatch& adjoint,
                          std::span<double> grad) const;

 private:
  ThetaArchitecture arch_;
  DenseNetwork net_;
};

struct ThetaDerivs {
  double value = 0.0;
  double dt = 0.0;
  double dx = 0.0;
  double dxx = 0.0;
};

ThetaDerivs theta_forward_derivs(const ThetaNet& net, const Standardizer& s, double t, double x);

/// Agent positions and velocities for a batch of instants (N x batch).
struct PhiBatch {
  Eigen::MatrixXd position;
  Eigen::MatrixXd velocity;
};

struct PhiTape {
  Tape tanh_tape;
  Tape relu_tape;
  Jet tanh_out;
  Jet relu_out;
};

/// Trajectory network: standardized t feeds a tanh branch and a relu branch
/// (3 hidden layers of 2N each, linear output of size N); the output is the
/// weighted sum of both, read as standardized positions.
class PhiNet {
 public:
  PhiNet() = default;
  explicit PhiNet(int n_agents);

  int n_agents() const { return n_agents_; }
  std::size_t parameter_count() const;
  void pack(std::span<double> out) const;
  void unpack(std::span<const double> in);
  void initialize(std::mt19937_64& rng);

  DenseNetwork& tanh_branch() { return tanh_; }
  DenseNetwork& relu_branch() { return relu_; }
  const DenseNetwork& tanh_branch() const { return tanh_; }
  const DenseNetwork& relu_branch() const { return relu_; }
  double& mix_tanh() { return mix_tanh_; }
  double& mix_relu() { return mix_relu_; }

  PhiBatch evaluate(const Standardizer& s, std::span<const double> t,
                    PhiTape* tape = nullptr) const;
  /// Adds parameter gradients given physical adjoints of positions and velocities.
  void backward(const Standardizer& s, const PhiTape& tape, const Eigen::MatrixXd& position_adjoint,
                const Eigen::MatrixXd& velocity_adjoint, std::span<double> grad) const;

 private:
  int n_agents_ = 0;
  DenseNetwork tanh_;
  DenseNetwork relu_;
  double mix_tanh_ = 0.5;
  double mix_relu_ = 0.5;
};

struct PhiDerivs {
  std::vector<double> positions;
  std::vector<double> velocities;
};

PhiDerivs phi_forward_derivs(const PhiNet& net, const Standardizer& s, double t);

}  // namespace tsr
