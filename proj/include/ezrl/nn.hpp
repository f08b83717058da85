#ifndef EZRL_NN_HPP
#define EZRL_NN_HPP

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ezrl/types.hpp"

namespace ezrl {

/// Lower bound of the positivity-constrained critic output.
inline constexpr double kEpsV = 1e-6;

/// One trainable tensor and its gradient accumulator, exposed for the
/// optimizer and the gradient clipper. Biases are stored as n x 1 matrices
/// so every block has the same shape.
struct TensorRef {
  MatrixXd* value;
  MatrixXd* grad;
};

/// Feed-forward network with rectifier hidden layers and a linear output.
/// Gradients are exact reverse-mode derivatives of the recorded forward
/// pass; the graph is fixed, so no general tape is needed. Batches are
/// column-major: one sample per column.
class Mlp {
 public:
  struct Layer {
    MatrixXd W, b;    // parameters (b is n x 1)
    MatrixXd dW, db;  // gradient accumulators
  };

  Mlp() = default;
  Mlp(Index in_dim, const std::vector<Index>& hidden, Index out_dim);

  /// Orthogonal(-ish) initialization from a QR factorization of a Gaussian
  /// draw: hidden layers scaled by hidden_gain, the final layer by
  /// final_gain. Biases start at zero.
  void init(std::mt19937& rng, double hidden_gain = std::sqrt(2.0),
            double final_gain = 1.0);

  /// Forward pass, recording activations for backward. Throws on width
  /// mismatch or non-finite outputs.
  MatrixXd forward(const MatrixXd& x);

  /// Forward pass without recording (safe on a const, shared net).
  MatrixXd forward_inference(const MatrixXd& x) const;

  /// Accumulates parameter gradients for the recorded forward pass and
  /// returns the gradient with respect to the input. Throws
  /// std::logic_error if no forward pass is recorded.
  MatrixXd backward(const MatrixXd& grad_out);

  void zero_grad();
  std::vector<TensorRef> params();

  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Name/tensor pairs for checkpointing ("L0.W", "L0.b", ...).
  std::vector<std::pair<std::string, MatrixXd*>> named_tensors();

 private:
  Index in_dim_ = 0, out_dim_ = 0;
  std::vector<Layer> layers_;
  std::vector<MatrixXd> inputs_;  // recorded layer inputs a_0 .. a_{L-1}
  std::vector<MatrixXd> zs_;      // recorded pre-activations
  bool recorded_ = false;
};

/// Adaptive-moment optimizer with bias correction. Moment state is matched
/// to the block list on the first step and must keep its shape thereafter.
class Adam {
 public:
  explicit Adam(double lr = 0.02, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(const std::vector<TensorRef>& blocks);
  long step_count() const { return t_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<MatrixXd> m_, v_;
};

/// Scales gradients so their joint Euclidean norm is at most max_norm.
/// Returns the pre-clip norm.
double clip_global_norm(const std::vector<TensorRef>& blocks, double max_norm);

/// Diagonal Gaussian over action increments. The mean comes from the
/// policy trunk per state; the log standard deviations are state-independent
/// trained parameters, clamped to [lo, hi] on read (gradient is zero where
/// the clamp is active).
class GaussianPolicyHead {
 public:
  GaussianPolicyHead() = default;
  explicit GaussianPolicyHead(Index n, double init_log_std = -1.0,
                              double lo = -5.0, double hi = 2.0);

  struct Sample {
    VectorXd action;
    double log_prob;
  };

  Sample sample(const VectorXd& mean, std::mt19937& rng) const;
  double log_prob(const VectorXd& mean, const VectorXd& action) const;
  VectorXd log_prob_grad_mean(const VectorXd& mean, const VectorXd& action) const;
  /// Gradient with respect to the unclamped log_std parameters.
  VectorXd log_prob_grad_log_std(const VectorXd& mean,
                                 const VectorXd& action) const;
  double entropy() const;
  /// d entropy / d log_std (zero where clamped).
  VectorXd entropy_grad_log_std() const;

  VectorXd stds() const;
  Index dim() const { return log_std.rows(); }

  MatrixXd log_std;    // n x 1 parameter (unclamped)
  MatrixXd d_log_std;  // gradient accumulator

  std::vector<TensorRef> params();
  std::vector<std::pair<std::string, MatrixXd*>> named_tensors();

  double clamp_lo() const { return lo_; }
  double clamp_hi() const { return hi_; }

 private:
  double lo_ = -5.0, hi_ = 2.0;
};

/// Positivity transform for the critic: softplus(raw) + kEpsV, with the
/// asymptotic branches used beyond |raw| > 30 for numeric stability.
double positive_value(double raw);
/// Derivative of positive_value (the logistic sigmoid of raw).
double positive_value_grad(double raw);

/// Writes named tensors as a self-describing text checkpoint. Values are
/// hexfloat, so the round-trip is bit-exact.
void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const MatrixXd*>>& tensors);

std::map<std::string, MatrixXd> load_checkpoint(const std::string& path);

/// Copies checkpoint tensors into the destinations by name; throws if a
/// name is missing or a shape differs.
void restore_tensors(const std::map<std::string, MatrixXd>& ckpt,
                     const std::vector<std::pair<std::string, MatrixXd*>>& dests);

}  // namespace ezrl

#endif  // EZRL_NN_HPP
