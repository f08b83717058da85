#include "ezrl/nn.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ezrl {

namespace {

// Orthonormal rows/columns from the QR factorization of a Gaussian matrix,
// sign-fixed by the R diagonal so the result is a deterministic function of
// the draw.
MatrixXd orthogonal_matrix(Index rows, Index cols, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index big = std::max(rows, cols), small = std::min(rows, cols);
  MatrixXd a(big, small);
  for (Index i = 0; i < big; ++i)
    for (Index j = 0; j < small; ++j) a(i, j) = gauss(rng);
  const Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(big, small);
  const MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (Index j = 0; j < small; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return rows >= cols ? q : MatrixXd(q.transpose());
}

}  // namespace

Mlp::Mlp(Index in_dim, const std::vector<Index>& hidden, Index out_dim)
    : in_dim_(in_dim), out_dim_(out_dim) {
  if (in_dim < 1 || out_dim < 1)
    throw std::invalid_argument("Mlp: dimensions must be positive");
  Index prev = in_dim;
  for (Index h : hidden) {
    if (h < 1) throw std::invalid_argument("Mlp: hidden width must be positive");
    layers_.push_back({MatrixXd::Zero(h, prev), MatrixXd::Zero(h, 1),
                       MatrixXd::Zero(h, prev), MatrixXd::Zero(h, 1)});
    prev = h;
  }
  layers_.push_back({MatrixXd::Zero(out_dim, prev), MatrixXd::Zero(out_dim, 1),
                     MatrixXd::Zero(out_dim, prev), MatrixXd::Zero(out_dim, 1)});
}

void Mlp::init(std::mt19937& rng, double hidden_gain, double final_gain) {
  for (size_t l = 0; l < layers_.size(); ++l) {
    const double gain = l + 1 == layers_.size() ? final_gain : hidden_gain;
    layers_[l].W =
        gain * orthogonal_matrix(layers_[l].W.rows(), layers_[l].W.cols(), rng);
    layers_[l].b.setZero();
  }
}

MatrixXd Mlp::forward(const MatrixXd& x) {
  if (x.rows() != in_dim_)
    throw std::invalid_argument("Mlp::forward: input width mismatch");
  inputs_.clear();
  zs_.clear();
  MatrixXd a = x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    inputs_.push_back(a);
    MatrixXd z = layers_[l].W * a;
    z.colwise() += VectorXd(layers_[l].b.col(0));
    zs_.push_back(z);
    a = l + 1 == layers_.size() ? z : z.cwiseMax(0.0);
  }
  if (!a.allFinite())
    throw std::runtime_error("Mlp::forward: non-finite activations");
  recorded_ = true;
  return a;
}

MatrixXd Mlp::forward_inference(const MatrixXd& x) const {
  if (x.rows() != in_dim_)
    throw std::invalid_argument("Mlp::forward_inference: input width mismatch");
  MatrixXd a = x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    MatrixXd z = layers_[l].W * a;
    z.colwise() += VectorXd(layers_[l].b.col(0));
    a = l + 1 == layers_.size() ? std::move(z) : MatrixXd(z.cwiseMax(0.0));
  }
  if (!a.allFinite())
    throw std::runtime_error("Mlp::forward_inference: non-finite activations");
  return a;
}

MatrixXd Mlp::backward(const MatrixXd& grad_out) {
  if (!recorded_) throw std::logic_error("Mlp::backward: no recorded forward");
  if (grad_out.rows() != out_dim_ || grad_out.cols() != inputs_.front().cols())
    throw std::invalid_argument("Mlp::backward: gradient shape mismatch");
  MatrixXd dz = grad_out;
  for (size_t l = layers_.size(); l-- > 0;) {
    layers_[l].dW += dz * inputs_[l].transpose();
    layers_[l].db.col(0) += dz.rowwise().sum();
    MatrixXd da = layers_[l].W.transpose() * dz;
    if (l > 0) {
      dz = da.cwiseProduct(
          (zs_[l - 1].array() > 0.0).cast<double>().matrix());
    } else {
      return da;
    }
  }
  return dz;  // unreached; keeps the compiler satisfied
}

void Mlp::zero_grad() {
  for (auto& l : layers_) {
    l.dW.setZero();
    l.db.setZero();
  }
}

std::vector<TensorRef> Mlp::params() {
  std::vector<TensorRef> out;
  out.reserve(layers_.size() * 2);
  for (auto& l : layers_) {
    out.push_back({&l.W, &l.dW});
    out.push_back({&l.b, &l.db});
  }
  return out;
}

std::vector<std::pair<std::string, MatrixXd*>> Mlp::named_tensors() {
  std::vector<std::pair<std::string, MatrixXd*>> out;
  for (size_t l = 0; l < layers_.size(); ++l) {
    out.emplace_back("L" + std::to_string(l) + ".W", &layers_[l].W);
    out.emplace_back("L" + std::to_string(l) + ".b", &layers_[l].b);
  }
  return out;
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam: betas must lie in [0,1)");
}

void Adam::step(const std::vector<TensorRef>& blocks) {
  if (m_.empty()) {
    for (const auto& b : blocks) {
      m_.emplace_back(MatrixXd::Zero(b.value->rows(), b.value->cols()));
      v_.emplace_back(MatrixXd::Zero(b.value->rows(), b.value->cols()));
    }
  }
  if (blocks.size() != m_.size())
    throw std::invalid_argument("Adam::step: block count changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (size_t i = 0; i < blocks.size(); ++i) {
    MatrixXd& p = *blocks[i].value;
    const MatrixXd& g = *blocks[i].grad;
    if (p.rows() != m_[i].rows() || p.cols() != m_[i].cols() ||
        g.rows() != p.rows() || g.cols() != p.cols())
      throw std::invalid_argument("Adam::step: shape mismatch");
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const MatrixXd m_hat = m_[i] / bc1;
    const MatrixXd v_hat = v_[i] / bc2;
    p.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

double clip_global_norm(const std::vector<TensorRef>& blocks, double max_norm) {
  if (!(max_norm > 0.0))
    throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& b : blocks) sq += b.grad->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& b : blocks) *b.grad *= scale;
  }
  return norm;
}

GaussianPolicyHead::GaussianPolicyHead(Index n, double init_log_std, double lo,
                                       double hi)
    : lo_(lo), hi_(hi) {
  if (n < 1) throw std::invalid_argument("GaussianPolicyHead: n must be positive");
  if (!(lo < hi))
    throw std::invalid_argument("GaussianPolicyHead: bad clamp range");
  log_std = MatrixXd::Constant(n, 1, init_log_std);
  d_log_std = MatrixXd::Zero(n, 1);
}

VectorXd GaussianPolicyHead::stds() const {
  return log_std.col(0).cwiseMax(lo_).cwiseMin(hi_).array().exp();
}

GaussianPolicyHead::Sample GaussianPolicyHead::sample(const VectorXd& mean,
                                                      std::mt19937& rng) const {
  if (mean.size() != dim())
    throw std::invalid_argument("GaussianPolicyHead::sample: mean size mismatch");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const VectorXd sd = stds();
  Sample s;
  s.action.resize(dim());
  for (Index i = 0; i < dim(); ++i) s.action[i] = mean[i] + sd[i] * gauss(rng);
  s.log_prob = log_prob(mean, s.action);
  return s;
}

double GaussianPolicyHead::log_prob(const VectorXd& mean,
                                    const VectorXd& action) const {
  if (mean.size() != dim() || action.size() != dim())
    throw std::invalid_argument("GaussianPolicyHead::log_prob: size mismatch");
  const VectorXd sd = stds();
  double lp = -0.5 * double(dim()) * std::log(2.0 * M_PI);
  for (Index i = 0; i < dim(); ++i) {
    const double z = (action[i] - mean[i]) / sd[i];
    lp += -0.5 * z * z - std::log(sd[i]);
  }
  return lp;
}

VectorXd GaussianPolicyHead::log_prob_grad_mean(const VectorXd& mean,
                                                const VectorXd& action) const {
  const VectorXd sd = stds();
  return (action - mean).array() / sd.array().square();
}

VectorXd GaussianPolicyHead::log_prob_grad_log_std(const VectorXd& mean,
                                                   const VectorXd& action) const {
  const VectorXd sd = stds();
  VectorXd g(dim());
  for (Index i = 0; i < dim(); ++i) {
    const double z = (action[i] - mean[i]) / sd[i];
    const bool clamped = log_std(i, 0) < lo_ || log_std(i, 0) > hi_;
    g[i] = clamped ? 0.0 : z * z - 1.0;
  }
  return g;
}

double GaussianPolicyHead::entropy() const {
  const VectorXd sd = stds();
  double h = 0.5 * double(dim()) * std::log(2.0 * M_PI * std::exp(1.0));
  for (Index i = 0; i < dim(); ++i) h += std::log(sd[i]);
  return h;
}

VectorXd GaussianPolicyHead::entropy_grad_log_std() const {
  VectorXd g(dim());
  for (Index i = 0; i < dim(); ++i) {
    const bool clamped = log_std(i, 0) < lo_ || log_std(i, 0) > hi_;
    g[i] = clamped ? 0.0 : 1.0;
  }
  return g;
}

std::vector<TensorRef> GaussianPolicyHead::params() {
  return {{&log_std, &d_log_std}};
}

std::vector<std::pair<std::string, MatrixXd*>> GaussianPolicyHead::named_tensors() {
  return {{"log_std", &log_std}};
}

double positive_value(double raw) {
  if (raw > 30.0) return raw + kEpsV;
  if (raw < -30.0) return std::exp(raw) + kEpsV;
  return std::log1p(std::exp(raw)) + kEpsV;
}

double positive_value_grad(double raw) {
  if (raw > 30.0) return 1.0;
  if (raw < -30.0) return std::exp(raw);
  return 1.0 / (1.0 + std::exp(-raw));
}

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const MatrixXd*>>& tensors) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "ezrl-checkpoint 1\n" << tensors.size() << "\n";
  char buf[64];
  for (const auto& [name, mat] : tensors) {
    if (name.empty() || name.find_first_of(" \n\t") != std::string::npos)
      throw std::invalid_argument("save_checkpoint: bad tensor name '" + name + "'");
    out << "tensor " << name << ' ' << mat->rows() << ' ' << mat->cols() << '\n';
    for (Index r = 0; r < mat->rows(); ++r) {
      for (Index c = 0; c < mat->cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", (*mat)(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

std::map<std::string, MatrixXd> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "ezrl-checkpoint" || version != 1)
    throw std::runtime_error("load_checkpoint: not a checkpoint file: " + path);
  size_t count = 0;
  in >> count;
  std::map<std::string, MatrixXd> out;
  for (size_t i = 0; i < count; ++i) {
    std::string kw, name;
    Index rows = 0, cols = 0;
    in >> kw >> name >> rows >> cols;
    if (!in || kw != "tensor" || rows < 0 || cols < 0)
      throw std::runtime_error("load_checkpoint: malformed header in " + path);
    MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        std::string tok;
        in >> tok;
        if (!in) throw std::runtime_error("load_checkpoint: truncated " + path);
        char* end = nullptr;
        m(r, c) = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str())
          throw std::runtime_error("load_checkpoint: bad value '" + tok + "'");
      }
    }
    if (!out.emplace(name, std::move(m)).second)
      throw std::runtime_error("load_checkpoint: duplicate tensor " + name);
  }
  return out;
}

void restore_tensors(const std::map<std::string, MatrixXd>& ckpt,
                     const std::vector<std::pair<std::string, MatrixXd*>>& dests) {
  for (const auto& [name, dest] : dests) {
    const auto it = ckpt.find(name);
    if (it == ckpt.end())
      throw std::runtime_error("restore_tensors: missing tensor " + name);
    if (it->second.rows() != dest->rows() || it->second.cols() != dest->cols())
      throw std::runtime_error("restore_tensors: shape mismatch for " + name);
    *dest = it->second;
  }
}

}  // namespace ezrl
