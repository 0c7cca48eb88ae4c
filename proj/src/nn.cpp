#include "vedge/nn.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace vedge::nn {

namespace {

constexpr double kLogFloor = -27.631021115928547;  // ln(1e-12)

struct Pass {
  std::vector<Eigen::VectorXd> act;  // act[0] = input, act[l+1] = output of layer l
  std::vector<Eigen::VectorXd> pre;  // pre-activation of layer l
};

Eigen::VectorXd to_vector(const NetParams& params, std::span<const double> x) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (x.size() != params.input_size()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " features, network expects " +
                     std::to_string(params.input_size()));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw std::domain_error("non-finite network input");
    v[static_cast<Eigen::Index>(i)] = x[i];
  }
  return v;
}

// Runs the hidden layers and the output layer's affine map; the head is
// applied by the caller.
Pass run(const NetParams& params, std::span<const double> x) {
  Pass p;
  p.act.push_back(to_vector(params, x));
  const std::size_t n = params.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    const auto& layer = params.layers[l];
    Eigen::VectorXd z = layer.weights * p.act.back() + layer.bias;
    p.pre.push_back(z);
    if (l + 1 < n) {
      p.act.push_back(z.cwiseMax(0.0));
    } else {
      p.act.push_back(z);
    }
  }
  return p;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

// Backpropagates d(objective)/d(output pre-activation).
Gradients backprop(const NetParams& params, const Pass& pass, Eigen::VectorXd delta) {
  Gradients g;
  const std::size_t n = params.layers.size();
  g.layers.resize(n);
  for (std::size_t l = n; l-- > 0;) {
    g.layers[l].weights = delta * pass.act[l].transpose();
    g.layers[l].bias = delta;
    if (l > 0) {
      Eigen::VectorXd back = params.layers[l].weights.transpose() * delta;
      const auto& z = pass.pre[l - 1];
      for (Eigen::Index i = 0; i < back.size(); ++i) {
        if (z[i] <= 0.0) back[i] = 0.0;
      }
      delta = std::move(back);
    }
  }
  return g;
}

}  // namespace

std::vector<int> NetParams::sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(static_cast<int>(layers.front().weights.cols()));
  for (const auto& l : layers) s.push_back(static_cast<int>(l.weights.rows()));
  return s;
}

std::size_t NetParams::input_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t NetParams::output_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows());
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool NetParams::operator==(const NetParams& o) const {
  if (head != o.head || layers.size() != o.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = o.layers[i];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.bias.size() != b.bias.size()) {
      return false;
    }
    if (a.weights != b.weights || a.bias != b.bias) return false;
  }
  return true;
}

Gradients Gradients::zeros_like(const NetParams& params) {
  Gradients g;
  for (const auto& l : params.layers) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weights.rows() != other.layers[i].weights.rows() ||
        layers[i].weights.cols() != other.layers[i].weights.cols()) {
      throw ShapeError("gradient shape mismatch");
    }
    layers[i].weights += other.layers[i].weights;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

Gradients& Gradients::operator*=(double factor) {
  for (auto& l : layers) {
    l.weights *= factor;
    l.bias *= factor;
  }
  return *this;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weights.squaredNorm() + l.bias.squaredNorm();
  return s;
}

bool Gradients::congruent(const NetParams& params) const {
  if (layers.size() != params.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = params.layers[i];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.bias.size() != b.bias.size()) {
      return false;
    }
  }
  return true;
}

NetParams init_params(const std::vector<int>& layer_sizes, Head head, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ShapeError("a network needs at least two layer sizes");
  for (int s : layer_sizes) {
    if (s < 1) throw ShapeError("layer sizes must be >= 1");
  }
  std::mt19937_64 rng(seed);
  NetParams p;
  p.head = head;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weights(r, c) = u(rng);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Eigen::VectorXd forward_actor(const NetParams& params, std::span<const double> x) {
  return softmax(run(params, x).act.back());
}

double forward_critic(const NetParams& params, std::span<const double> x) {
  const auto out = run(params, x).act.back();
  if (out.size() != 1) throw ShapeError("critic must have a single output");
  return out[0];
}

double policy_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double policy_entropy(const Eigen::VectorXd& probs) {
  return policy_entropy(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
}

Gradients backward_actor(const NetParams& params, std::span<const double> x, std::size_t action,
                         double advantage, double entropy_coef) {
  const Pass pass = run(params, x);
  const auto& z = pass.act.back();
  if (action >= static_cast<std::size_t>(z.size())) {
    throw std::out_of_range("action " + std::to_string(action) + " outside the policy support");
  }
  const Eigen::VectorXd p = softmax(z);
  const Eigen::VectorXd logp = log_softmax(z).cwiseMax(kLogFloor);
  const double h = -(p.array() * logp.array()).sum();

  // d(log p_a)/dz = e_a - p;  dH/dz_j = -p_j (log p_j + H).
  Eigen::VectorXd delta = -advantage * p;
  delta[static_cast<Eigen::Index>(action)] += advantage;
  if (entropy_coef != 0.0) {
    delta.array() -= entropy_coef * p.array() * (logp.array() + h);
  }
  return backprop(params, pass, std::move(delta));
}

Gradients backward_critic(const NetParams& params, std::span<const double> x, double target) {
  const Pass pass = run(params, x);
  if (pass.act.back().size() != 1) throw ShapeError("critic must have a single output");
  if (!std::isfinite(target)) throw std::domain_error("critic target must be finite");
  Eigen::VectorXd delta(1);
  delta[0] = -2.0 * (target - pass.act.back()[0]);
  return backprop(params, pass, std::move(delta));
}

void apply_sgd_inplace(NetParams& params, const Gradients& grads, double lr) {
  if (!grads.congruent(params)) throw ShapeError("gradient shape does not match the network");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be positive");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    params.layers[i].weights -= lr * grads.layers[i].weights;
    params.layers[i].bias -= lr * grads.layers[i].bias;
  }
}

NetParams apply_sgd(const NetParams& params, const Gradients& grads, double lr) {
  NetParams out = params;
  apply_sgd_inplace(out, grads, lr);
  return out;
}

std::vector<double> flatten(const std::vector<Layer>& layers) {
  std::vector<double> flat;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat.push_back(l.weights(r, c));
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat.push_back(l.bias[i]);
  }
  return flat;
}

void unflatten(std::span<const double> flat, std::vector<Layer>& layers) {
  std::size_t k = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        if (k >= flat.size()) throw ShapeError("flat parameter vector too short");
        l.weights(r, c) = flat[k++];
      }
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
      if (k >= flat.size()) throw ShapeError("flat parameter vector too short");
      l.bias[i] = flat[k++];
    }
  }
  if (k != flat.size()) throw ShapeError("flat parameter vector too long");
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "vedge-checkpoint";
constexpr int kVersion = 1;

void write_net(std::ostream& os, const char* name, const NetParams& net) {
  const auto sizes = net.sizes();
  os << "network " << name << ' ' << (net.head == Head::Softmax ? "softmax" : "identity") << ' '
     << sizes.size() << '\n';
  for (std::size_t i = 0; i < sizes.size(); ++i) os << (i ? " " : "") << sizes[i];
  os << '\n';
  char buf[64];
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%a", l.weights(r, c));
        os << (c ? " " : "") << buf;
      }
      os << '\n';
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", l.bias[i]);
      os << (i ? " " : "") << buf;
    }
    os << '\n';
  }
}

double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("checkpoint truncated");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw std::runtime_error("bad number in checkpoint: " + tok);
  return v;
}

NetParams read_net(std::istream& is, const std::string& expected) {
  std::string word, name, head;
  std::size_t count = 0;
  if (!(is >> word >> name >> head >> count) || word != "network" || name != expected) {
    throw std::runtime_error("checkpoint: expected network '" + expected + "'");
  }
  NetParams net;
  if (head == "softmax") {
    net.head = Head::Softmax;
  } else if (head == "identity") {
    net.head = Head::Identity;
  } else {
    throw std::runtime_error("checkpoint: unknown head '" + head + "'");
  }
  if (count < 2 || count > 64) throw std::runtime_error("checkpoint: bad layer count");
  std::vector<int> sizes(count);
  for (auto& s : sizes) {
    if (!(is >> s) || s < 1) throw std::runtime_error("checkpoint: bad layer size");
  }
  for (std::size_t l = 0; l + 1 < count; ++l) {
    Layer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd(sizes[l + 1])};
    for (int r = 0; r < sizes[l + 1]; ++r) {
      for (int c = 0; c < sizes[l]; ++c) layer.weights(r, c) = read_double(is);
    }
    for (int i = 0; i < sizes[l + 1]; ++i) layer.bias[i] = read_double(is);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace

void save_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << kMagic << ' ' << kVersion << '\n';
  write_net(os, "actor", ckpt.actor);
  write_net(os, "critic", ckpt.critic);
}

Checkpoint load_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic) {
    throw std::runtime_error("not a vedge checkpoint");
  }
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.actor = read_net(is, "actor");
  c.critic = read_net(is, "critic");
  if (c.actor.input_size() != c.critic.input_size()) {
    throw std::runtime_error("checkpoint: actor and critic input sizes differ");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  save_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + path.string() + "'");
  return load_checkpoint(is);
}

}  // namespace vedge::nn
