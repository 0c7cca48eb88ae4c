#ifndef VEDGE_NN_HPP_
#define VEDGE_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace vedge::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Head { Softmax, Identity };

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

// Dense network with rectifier hidden layers and a softmax or identity
// output layer.
struct NetParams {
  std::vector<Layer> layers;
  Head head = Head::Identity;

  std::vector<int> sizes() const;
  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t parameter_count() const;
  bool operator==(const NetParams& o) const;
};

// Same shape as the network it was computed for.
struct Gradients {
  std::vector<Layer> layers;

  static Gradients zeros_like(const NetParams& params);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double factor);
  double squared_norm() const;
  bool congruent(const NetParams& params) const;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
NetParams init_params(const std::vector<int>& layer_sizes, Head head, std::uint64_t seed);

// Policy distribution over actions; sums to one.
Eigen::VectorXd forward_actor(const NetParams& params, std::span<const double> x);
double forward_critic(const NetParams& params, std::span<const double> x);

// -sum p ln p with 0 ln 0 = 0.
double policy_entropy(std::span<const double> probs);
double policy_entropy(const Eigen::VectorXd& probs);

// Gradient of log pi(action|x) * advantage + entropy_coef * H(pi(.|x)).
// The advantage is a constant.
Gradients backward_actor(const NetParams& params, std::span<const double> x, std::size_t action,
                         double advantage, double entropy_coef);

// Gradient of (target - V(x))^2.
Gradients backward_critic(const NetParams& params, std::span<const double> x, double target);

// params - lr * grads.
NetParams apply_sgd(const NetParams& params, const Gradients& grads, double lr);
void apply_sgd_inplace(NetParams& params, const Gradients& grads, double lr);

// Flat views used by tests and optimizers. Order: per layer, weights
// row-major, then bias.
std::vector<double> flatten(const std::vector<Layer>& layers);
void unflatten(std::span<const double> flat, std::vector<Layer>& layers);

// Text checkpoint: a header line, then per network its head, layer sizes
// and row-major weights/biases as hexadecimal floats (exact round trip).
struct Checkpoint {
  NetParams actor;
  NetParams critic;
  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vedge::nn

#endif  // VEDGE_NN_HPP_
