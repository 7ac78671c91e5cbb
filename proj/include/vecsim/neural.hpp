#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vecsim/rng.hpp"

namespace vecsim {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

struct NeuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// ---- flat parameter vectors --------------------------------------------

inline void vec_fill(std::vector<double>& v, double x) {
  std::fill(v.begin(), v.end(), x);
}

// y += a * x
inline void vec_axpy(std::vector<double>& y, double a,
                     const std::vector<double>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline void vec_scale(std::vector<double>& v, double a) {
  for (double& x : v) x *= a;
}

// ---- fully connected network -------------------------------------------

struct MlpShape {
  int input = 0;
  int hidden = 0;
  int n_hidden = 0;  // number of hidden layers (>= 1)
  int output = 0;

  bool operator==(const MlpShape&) const = default;
};

// Rectifier MLP with identity output, parameters in one flat buffer.
// Linear layer l computes z = x * W_l^T + b_l with W_l stored row-major as
// (out_dim x in_dim).
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(const MlpShape& shape) : shape_(shape) {
    if (shape.input < 1 || shape.hidden < 1 || shape.n_hidden < 1 ||
        shape.output < 1)
      throw NeuralError("all MLP dimensions must be >= 1");
    int in = shape.input;
    for (int l = 0; l < shape.n_hidden + 1; ++l) {
      const int out = (l == shape.n_hidden) ? shape.output : shape.hidden;
      w_offsets_.push_back(static_cast<int>(total_));
      total_ += static_cast<std::size_t>(out) * in;
      b_offsets_.push_back(static_cast<int>(total_));
      total_ += static_cast<std::size_t>(out);
      in = out;
    }
    params_.assign(total_, 0.0);
  }

  const MlpShape& shape() const { return shape_; }
  int n_layers() const { return shape_.n_hidden + 1; }
  int layer_in(int l) const { return l == 0 ? shape_.input : shape_.hidden; }
  int layer_out(int l) const {
    return l == n_layers() - 1 ? shape_.output : shape_.hidden;
  }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t n_params() const { return total_; }

  const double* w(int l) const { return params_.data() + w_offsets_[l]; }
  double* w(int l) { return params_.data() + w_offsets_[l]; }
  const double* b(int l) const { return params_.data() + b_offsets_[l]; }
  double* b(int l) { return params_.data() + b_offsets_[l]; }

  // Kaiming-uniform fan-in init for all layers. When `small_head` is set the
  // final layer instead gets uniform +-3e-3, the usual choice for actor and
  // critic output heads.
  void init(Rng& rng, bool small_head = false) {
    for (int l = 0; l < n_layers(); ++l) {
      const int in = layer_in(l);
      const int out = layer_out(l);
      const bool head = small_head && l == n_layers() - 1;
      const double wb = head ? 3e-3 : std::sqrt(6.0 / in);
      const double bb = head ? 3e-3 : 1.0 / std::sqrt(static_cast<double>(in));
      double* wp = w(l);
      for (int i = 0; i < out * in; ++i) wp[i] = rng.uniform(-wb, wb);
      double* bp = b(l);
      for (int i = 0; i < out; ++i) bp[i] = rng.uniform(-bb, bb);
    }
  }

 private:
  MlpShape shape_;
  std::vector<int> w_offsets_;
  std::vector<int> b_offsets_;
  std::size_t total_ = 0;
  std::vector<double> params_;
};

// Activations saved during a forward pass; acts[0] is the input batch,
// acts[l] for l in [1, n_hidden] are post-rectifier hidden activations, and
// acts.back() is the linear output. All row-major (batch x width).
struct ForwardTrace {
  int batch = 0;
  std::vector<std::vector<double>> acts;

  const std::vector<double>& output() const { return acts.back(); }
};

// out (batch x out_dim) = x (batch x in_dim) * W^T + b, optionally rectified.
namespace detail {
inline void linear_forward(const double* x, int batch, int in_dim,
                           const double* w, const double* b, int out_dim,
                           bool relu, double* out) {
  for (int i = 0; i < batch; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * in_dim;
    double* oi = out + static_cast<std::size_t>(i) * out_dim;
    for (int j = 0; j < out_dim; ++j) {
      const double* wj = w + static_cast<std::size_t>(j) * in_dim;
      double acc = b[j];
      for (int k = 0; k < in_dim; ++k) acc += xi[k] * wj[k];
      oi[j] = relu && acc < 0.0 ? 0.0 : acc;
    }
  }
}
}  // namespace detail

inline ForwardTrace forward_batch(const Mlp& net, const double* x,
                                  int batch) {
  ForwardTrace t;
  t.batch = batch;
  t.acts.resize(net.n_layers() + 1);
  t.acts[0].assign(x, x + static_cast<std::size_t>(batch) * net.shape().input);
  for (int l = 0; l < net.n_layers(); ++l) {
    const bool relu = l < net.n_layers() - 1;
    t.acts[l + 1].resize(static_cast<std::size_t>(batch) * net.layer_out(l));
    detail::linear_forward(t.acts[l].data(), batch, net.layer_in(l), net.w(l),
                           net.b(l), net.layer_out(l), relu,
                           t.acts[l + 1].data());
  }
  return t;
}

inline ForwardTrace forward(const Mlp& net, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != net.shape().input)
    throw NeuralError("forward: input width mismatch");
  return forward_batch(net, x.data(), 1);
}

// Backpropagates d_out (batch x output, summed-over-batch convention) through
// the trace. Parameter gradients are ACCUMULATED into grad (sized like
// params). If d_input is non-null it receives the gradient w.r.t. the input
// batch (overwritten, batch x input).
inline void backward(const Mlp& net, const ForwardTrace& trace,
                     const std::vector<double>& d_out,
                     std::vector<double>& grad,
                     std::vector<double>* d_input = nullptr) {
  if (grad.size() != net.n_params())
    throw NeuralError("backward: grad buffer size mismatch");
  const int batch = trace.batch;
  std::vector<double> delta = d_out;  // gradient w.r.t. layer output
  std::vector<double> delta_prev;
  for (int l = net.n_layers() - 1; l >= 0; --l) {
    const int in_dim = net.layer_in(l);
    const int out_dim = net.layer_out(l);
    const std::vector<double>& x = trace.acts[l];
    // Rectifier mask: hidden activations are zero exactly where the unit was
    // clamped (output layers were already handled by the caller's d_out).
    if (l < net.n_layers() - 1) {
      const std::vector<double>& a = trace.acts[l + 1];
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (a[i] <= 0.0) delta[i] = 0.0;
    }
    // dW[j][k] += sum_i delta[i][j] * x[i][k]; db[j] += sum_i delta[i][j]
    double* gw = grad.data() + (net.w(l) - net.params().data());
    double* gb = grad.data() + (net.b(l) - net.params().data());
    for (int i = 0; i < batch; ++i) {
      const double* di = delta.data() + static_cast<std::size_t>(i) * out_dim;
      const double* xi = x.data() + static_cast<std::size_t>(i) * in_dim;
      for (int j = 0; j < out_dim; ++j) {
        const double dj = di[j];
        if (dj == 0.0) continue;
        double* gwj = gw + static_cast<std::size_t>(j) * in_dim;
        for (int k = 0; k < in_dim; ++k) gwj[k] += dj * xi[k];
        gb[j] += dj;
      }
    }
    const bool need_input_grad = l > 0 || d_input != nullptr;
    if (need_input_grad) {
      // delta_prev[i][k] = sum_j delta[i][j] * W[j][k]
      delta_prev.assign(static_cast<std::size_t>(batch) * in_dim, 0.0);
      const double* w = net.w(l);
      for (int i = 0; i < batch; ++i) {
        const double* di =
            delta.data() + static_cast<std::size_t>(i) * out_dim;
        double* dp = delta_prev.data() + static_cast<std::size_t>(i) * in_dim;
        for (int j = 0; j < out_dim; ++j) {
          const double dj = di[j];
          if (dj == 0.0) continue;
          const double* wj = w + static_cast<std::size_t>(j) * in_dim;
          for (int k = 0; k < in_dim; ++k) dp[k] += dj * wj[k];
        }
      }
      delta.swap(delta_prev);
    }
  }
  if (d_input != nullptr) *d_input = std::move(delta);
}

// ---- optimizers ---------------------------------------------------------

// Momentum SGD: v' = mu * v + g; p' = p - lr * v'.
struct SgdState {
  std::vector<double> velocity;
};

inline void sgd_step(std::vector<double>& params,
                     const std::vector<double>& grads, double lr,
                     double momentum, SgdState& state) {
  if (state.velocity.size() != params.size())
    state.velocity.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = momentum * state.velocity[i] + grads[i];
    params[i] -= lr * state.velocity[i];
  }
}

// Bias-corrected Adam.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

inline void adam_step(std::vector<double>& params,
                      const std::vector<double>& grads, AdamState& state,
                      double lr = 3e-4, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double mh = state.m[i] / c1;
    const double vh = state.v[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

// ---- checkpoints --------------------------------------------------------

// Binary container: magic "VECSIM01", then a section per named parameter
// store. Each section carries its layout descriptors (entry name + shape)
// followed by the raw little-endian 64-bit reals in layout order.

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint64_t> dims;
};

struct CheckpointSection {
  std::string name;
  std::vector<CheckpointEntry> entries;
  std::vector<double> data;
};

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_str(std::ofstream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::uint64_t get_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::string get_str(std::ifstream& in) {
  const std::uint32_t n = get_u32(in);
  if (n > (1u << 20)) throw NeuralError("checkpoint: absurd string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'V', 'E', 'C', 'S',
                                             'I', 'M', '0', '1'};

inline void write_checkpoint(const std::string& path,
                             const std::vector<CheckpointSection>& sections) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NeuralError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& sec : sections) {
    std::uint64_t expect = 0;
    for (const auto& e : sec.entries) {
      std::uint64_t n = 1;
      for (auto d : e.dims) n *= d;
      expect += n;
    }
    if (expect != sec.data.size())
      throw NeuralError("checkpoint section '" + sec.name +
                        "': layout does not match data size");
    detail::put_str(out, sec.name);
    detail::put_u32(out, static_cast<std::uint32_t>(sec.entries.size()));
    for (const auto& e : sec.entries) {
      detail::put_str(out, e.name);
      detail::put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
      for (auto d : e.dims) detail::put_u64(out, d);
    }
    out.write(reinterpret_cast<const char*>(sec.data.data()),
              static_cast<std::streamsize>(sec.data.size() * sizeof(double)));
  }
  if (!out) throw NeuralError("short write on checkpoint: " + path);
}

inline std::vector<CheckpointSection> read_checkpoint(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NeuralError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw NeuralError("bad checkpoint magic in " + path);
  const std::uint32_t n_sections = detail::get_u32(in);
  if (n_sections > 4096) throw NeuralError("checkpoint: absurd section count");
  std::vector<CheckpointSection> sections(n_sections);
  for (auto& sec : sections) {
    sec.name = detail::get_str(in);
    const std::uint32_t n_entries = detail::get_u32(in);
    if (n_entries > 65536) throw NeuralError("checkpoint: absurd entry count");
    sec.entries.resize(n_entries);
    std::uint64_t total = 0;
    for (auto& e : sec.entries) {
      e.name = detail::get_str(in);
      const std::uint32_t nd = detail::get_u32(in);
      if (nd > 8) throw NeuralError("checkpoint: absurd rank");
      e.dims.resize(nd);
      std::uint64_t n = 1;
      for (auto& d : e.dims) {
        d = detail::get_u64(in);
        n *= d;
      }
      total += n;
    }
    if (total > (1ull << 32)) throw NeuralError("checkpoint: absurd size");
    sec.data.resize(total);
    in.read(reinterpret_cast<char*>(sec.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw NeuralError("truncated checkpoint: " + path);
  }
  return sections;
}

// MLP <-> checkpoint section. Entry names are w0/b0, w1/b1, ...
inline CheckpointSection to_section(const Mlp& net, const std::string& name) {
  CheckpointSection sec;
  sec.name = name;
  for (int l = 0; l < net.n_layers(); ++l) {
    sec.entries.push_back(
        {"w" + std::to_string(l),
         {static_cast<std::uint64_t>(net.layer_out(l)),
          static_cast<std::uint64_t>(net.layer_in(l))}});
    sec.entries.push_back(
        {"b" + std::to_string(l),
         {static_cast<std::uint64_t>(net.layer_out(l))}});
  }
  sec.data = net.params();
  return sec;
}

inline void from_section(const CheckpointSection& sec, Mlp& net) {
  if (sec.data.size() != net.n_params())
    throw NeuralError("checkpoint section '" + sec.name +
                      "' does not fit this network");
  net.params() = sec.data;
}

}  // namespace vecsim
