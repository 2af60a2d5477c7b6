#pragma once

// Deterministic linear algebra, statistics, a counter-based RNG and a small
// tanh perceptron with analytic gradients. Everything else builds on this.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rlvlm {

// Error taxonomy. The CLI maps these onto exit codes 2/3/4.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Vector / Matrix

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}
  explicit Vector(std::span<const double> values)
      : data_(values.begin(), values.end()) {}

  std::size_t dim() const { return data_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool operator==(const Vector&) const = default;

  Vector& operator+=(const Vector& o) {
    require_same_dim(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    require_same_dim(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Vector& operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
  }

 private:
  void require_same_dim(const Vector& o) const {
    if (o.dim() != dim()) throw DomainError("vector dimension mismatch");
  }
  std::vector<double> data_;
};

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator*(Vector a, double s) { return a *= s; }
inline Vector operator*(double s, Vector a) { return a *= s; }

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double dot(const Vector& a, const Vector& b) {
  return dot(a.span(), b.span());
}
inline double squared_norm(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) {
  return std::sqrt(squared_norm(a));
}
inline double norm(const Vector& a) { return norm(a.span()); }

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(),
                     [](double x) { return std::isfinite(x); });
}

inline Vector normalized(const Vector& a) {
  const double n = norm(a);
  if (!(n > 0.0)) throw DomainError("normalized: zero-norm vector");
  return a * (1.0 / n);
}

// Arithmetic mean of equal-dimension vectors.
inline Vector mean_of(std::span<const Vector> xs) {
  if (xs.empty()) throw DomainError("mean_of: empty list");
  Vector m(xs.front().dim());
  for (const Vector& x : xs) m += x;
  return m *= 1.0 / static_cast<double>(xs.size());
}

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw DomainError("Matrix: data length does not match shape");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Similarity and statistics

inline double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim())
    throw DomainError("cosine_similarity: dimension mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0)) throw DomainError("cosine_similarity: argument 'a' has zero norm");
  if (!(nb > 0.0)) throw DomainError("cosine_similarity: argument 'b' has zero norm");
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

// Temperature softmax with max subtraction.
inline Vector softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("softmax: temperature must be > 0");
  if (logits.empty()) throw DomainError("softmax: empty logits");
  if (!all_finite(logits)) throw DomainError("softmax: non-finite logit");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - top) / temperature);
    z += out[i];
  }
  for (double& p : out) p /= z;
  return out;
}
inline Vector softmax(const Vector& logits, double temperature) {
  return softmax(logits.span(), temperature);
}

inline double log_sum_exp(std::span<const double> xs) {
  const double top = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - top);
  return top + std::log(s);
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean: empty sequence");
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1 denominator).
inline double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DomainError("pearson: length mismatch");
  if (xs.size() < 2) throw DomainError("pearson: need at least two samples");
  // exact test first: a constant column can leave rounding residue in sxx
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (constant(xs)) throw DomainError("pearson: xs is constant, correlation undefined");
  if (constant(ys)) throw DomainError("pearson: ys is constant, correlation undefined");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DomainError("pearson: xs is constant, correlation undefined");
  if (syy == 0.0) throw DomainError("pearson: ys is constant, correlation undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Counter-based RNG. The stream is a pure function of (key, counter), so a
// named substream never shares state with its parent.

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

class Rng {
 public:
  struct State {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
    bool operator==(const State&) const = default;
  };

  explicit Rng(std::uint64_t seed = 0) : key_(detail::mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}
  explicit Rng(State s) : key_(s.key), counter_(s.counter) {}

  State state() const { return {key_, counter_}; }

  Rng substream(std::string_view name) const {
    State s;
    s.key = detail::mix64(key_ ^ detail::mix64(detail::fnv1a(name)));
    return Rng(s);
  }
  Rng substream(std::uint64_t index) const {
    State s;
    s.key = detail::mix64(key_ + detail::mix64(index + 0x3c6ef372fe94f82bULL));
    return Rng(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t x = key_ + (counter_++) * 0x9e3779b97f4a7c15ULL;
    return detail::mix64(detail::mix64(x) ^ key_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw DomainError("uniform_index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; both draws come from this stream so the sequence is fixed.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::swap(xs[i - 1], xs[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Mlp: dense layers with tanh between them and an identity output, optionally
// L2-normalized. Weights are stored input-major (weight[i * out + j]) so the
// forward pass is a sequence of axpy updates that skip zero inputs; sparse
// grid observations make this much cheaper than row dot products.

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

class Mlp {
 public:
  // Intermediate values kept for backprop.
  struct Cache {
    std::vector<std::vector<double>> activations;  // input, hidden..., raw output
    double output_norm = 1.0;
  };

  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, bool normalize_output)
      : widths_(std::move(widths)), normalize_output_(normalize_output) {
    if (widths_.size() < 2) throw DomainError("Mlp: need at least input and output widths");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      if (widths_[l] == 0 || widths_[l + 1] == 0)
        throw DomainError("Mlp: layer widths must be positive");
      LayerShape s{widths_[l], widths_[l + 1], offset, 0};
      offset += s.in * s.out;
      s.bias_offset = offset;
      offset += s.out;
      layers_.push_back(s);
    }
    params_.assign(offset, 0.0);
  }

  // Glorot-uniform weights scaled by `gain`, zero biases.
  static Mlp random(std::vector<std::size_t> widths, bool normalize_output, Rng& rng,
                    double gain = 1.0, double output_gain = 1.0) {
    Mlp net(std::move(widths), normalize_output);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      const LayerShape& s = net.layers_[l];
      const double g = (l + 1 == net.layers_.size()) ? gain * output_gain : gain;
      const double a = g * std::sqrt(6.0 / static_cast<double>(s.in + s.out));
      for (std::size_t k = 0; k < s.in * s.out; ++k) {
        net.params_[s.weight_offset + k] = rng.uniform(-a, a);
      }
    }
    return net;
  }

  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  bool normalizes_output() const { return normalize_output_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  double& weight(std::size_t layer, std::size_t i, std::size_t j) {
    const LayerShape& s = layers_.at(layer);
    return params_[s.weight_offset + i * s.out + j];
  }
  double weight(std::size_t layer, std::size_t i, std::size_t j) const {
    const LayerShape& s = layers_.at(layer);
    return params_[s.weight_offset + i * s.out + j];
  }
  double& bias(std::size_t layer, std::size_t j) {
    return params_[layers_.at(layer).bias_offset + j];
  }

  Vector forward(std::span<const double> input) const {
    Cache cache;
    return forward(input, cache);
  }
  Vector forward(const Vector& input) const { return forward(input.span()); }

  Vector forward(std::span<const double> input, Cache& cache) const {
    if (input.size() != input_dim()) throw DomainError("Mlp::forward: input shape mismatch");
    cache.activations.resize(layers_.size() + 1);
    cache.activations[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const LayerShape& s = layers_[l];
      const std::vector<double>& x = cache.activations[l];
      std::vector<double>& y = cache.activations[l + 1];
      y.assign(params_.begin() + static_cast<std::ptrdiff_t>(s.bias_offset),
               params_.begin() + static_cast<std::ptrdiff_t>(s.bias_offset + s.out));
      const double* w = params_.data() + s.weight_offset;
      for (std::size_t i = 0; i < s.in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* wi = w + i * s.out;
        for (std::size_t j = 0; j < s.out; ++j) y[j] += xi * wi[j];
      }
      if (l + 1 < layers_.size()) {
        for (double& v : y) v = std::tanh(v);
      }
    }
    const std::vector<double>& raw = cache.activations.back();
    Vector out(raw);
    if (normalize_output_) {
      const double n = norm(out);
      if (!(n > 0.0)) throw NumericalError("Mlp::forward: zero output cannot be normalized");
      cache.output_norm = n;
      out *= 1.0 / n;
    } else {
      cache.output_norm = 1.0;
    }
    return out;
  }

  // Accumulates d(output . upstream)/d(params) into `param_grad` (same layout
  // as parameters()) and returns d/d(input) when `want_input_grad` is set.
  std::vector<double> backward(const Cache& cache, std::span<const double> upstream,
                               std::span<double> param_grad,
                               bool want_input_grad = false) const {
    if (upstream.size() != output_dim()) throw DomainError("Mlp::backward: upstream shape mismatch");
    if (param_grad.size() != params_.size()) throw DomainError("Mlp::backward: gradient buffer shape mismatch");
    std::vector<double> delta(upstream.begin(), upstream.end());
    if (normalize_output_) {
      // y = o / |o|  =>  dL/do = (u - (u.y) y) / |o|
      const std::vector<double>& raw = cache.activations.back();
      const double n = cache.output_norm;
      double uy = 0.0;
      for (std::size_t j = 0; j < raw.size(); ++j) uy += upstream[j] * raw[j] / n;
      for (std::size_t j = 0; j < raw.size(); ++j) {
        delta[j] = (upstream[j] - uy * raw[j] / n) / n;
      }
    }
    std::vector<double> next;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const LayerShape& s = layers_[l];
      const std::vector<double>& x = cache.activations[l];
      double* gw = param_grad.data() + s.weight_offset;
      double* gb = param_grad.data() + s.bias_offset;
      for (std::size_t j = 0; j < s.out; ++j) gb[j] += delta[j];
      for (std::size_t i = 0; i < s.in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        double* gwi = gw + i * s.out;
        for (std::size_t j = 0; j < s.out; ++j) gwi[j] += xi * delta[j];
      }
      if (l == 0 && !want_input_grad) return {};
      next.assign(s.in, 0.0);
      const double* w = params_.data() + s.weight_offset;
      for (std::size_t i = 0; i < s.in; ++i) {
        const double* wi = w + i * s.out;
        double acc = 0.0;
        for (std::size_t j = 0; j < s.out; ++j) acc += wi[j] * delta[j];
        next[i] = acc;
      }
      if (l > 0) {
        // tanh'(a) = 1 - tanh(a)^2, and x holds tanh(a) for hidden layers.
        for (std::size_t i = 0; i < s.in; ++i) next[i] *= 1.0 - x[i] * x[i];
      }
      delta.swap(next);
    }
    return delta;
  }

 private:
  std::vector<std::size_t> widths_;
  bool normalize_output_ = false;
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
};

struct MlpGrad {
  std::vector<double> params;  // same layout as Mlp::parameters()
  Vector input;
};

inline MlpGrad mlp_grad(const Mlp& net, const Vector& input, const Vector& upstream) {
  if (input.dim() != net.input_dim()) throw DomainError("mlp_grad: input shape mismatch");
  if (upstream.dim() != net.output_dim()) throw DomainError("mlp_grad: upstream shape mismatch");
  Mlp::Cache cache;
  net.forward(input.span(), cache);
  MlpGrad g;
  g.params.assign(net.parameter_count(), 0.0);
  g.input = Vector(net.backward(cache, upstream.span(), g.params, true));
  return g;
}

// ---------------------------------------------------------------------------
// Optimization helpers

class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW style)
  };

  Adam() = default;
  Adam(std::size_t n, Options opts) : opts_(opts), m_(n, 0.0), v_(n, 0.0) {}
  explicit Adam(std::size_t n) : Adam(n, Options{}) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw DomainError("Adam::step: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * grad[i];
      v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * grad[i] * grad[i];
      const double mh = m_[i] / c1;
      const double vh = v_[i] / c2;
      params[i] -= lr * (mh / (std::sqrt(vh) + opts_.eps) + opts_.weight_decay * params[i]);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  Options opts_{};
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// Rescales `grad` in place so its L2 norm is at most max_norm; returns the
// norm before clipping.
inline double clip_grad_norm(std::span<double> grad, double max_norm) {
  const double n = norm(std::span<const double>(grad.data(), grad.size()));
  if (n > max_norm && n > 0.0) {
    const double s = max_norm / n;
    for (double& g : grad) g *= s;
  }
  return n;
}

// Linear warmup then cosine decay to zero.
inline double warmup_cosine_lr(double base_lr, std::size_t step, std::size_t warmup,
                               std::size_t total) {
  if (warmup > 0 && step < warmup) {
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (total <= warmup) return base_lr;
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(total - warmup);
  return 0.5 * base_lr * (1.0 + std::cos(M_PI * std::min(progress, 1.0)));
}

}  // namespace rlvlm
