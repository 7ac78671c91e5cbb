#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vecsim/neural.hpp"
#include "vecsim/rng.hpp"

namespace vecsim {

struct FedSslError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- image pools --------------------------------------------------------

// Flat images, plane-major for multi-channel data (all of R, then G, then B).
struct ImagePool {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::vector<double>> images;
  std::vector<int> labels;

  int dim() const { return width * height * channels; }
  std::size_t size() const { return images.size(); }
};

// Procedural stand-in for a labeled image corpus: each class is an oriented
// grating with per-sample amplitude/brightness/phase jitter and pixel noise.
// Orientations stay inside (0, pi/2) so a horizontal flip (orientation
// pi - theta) never lands on another class's orientation; the flip
// augmentation then teaches invariance instead of merging mirror classes.
// Within-class variation is deliberately brightness/contrast-shaped, the
// same family the second augmentation pipeline jitters.
inline ImagePool make_synthetic_dataset(int n_classes, int per_class,
                                        Rng& rng) {
  if (n_classes < 1 || n_classes > 10)
    throw FedSslError("synthetic dataset supports 1..10 classes");
  ImagePool pool;
  pool.width = 16;
  pool.height = 16;
  pool.channels = 1;
  const double cx = (pool.width - 1) / 2.0;
  const double cy = (pool.height - 1) / 2.0;
  for (int k = 0; k < n_classes; ++k) {
    const double base_theta = 0.12 + 0.14 * k;
    for (int s = 0; s < per_class; ++s) {
      const double theta = base_theta + rng.uniform(-0.04, 0.04);
      const double freq = 2.5 + rng.uniform(-0.15, 0.15);
      const double phase = rng.uniform(-0.25, 0.25);
      const double amp = 0.3 * rng.uniform(0.4, 1.6);
      const double bright = rng.uniform(-0.35, 0.35);
      std::vector<double> img(static_cast<std::size_t>(pool.dim()));
      for (int r = 0; r < pool.height; ++r) {
        for (int c = 0; c < pool.width; ++c) {
          const double u =
              (c - cx) * std::cos(theta) + (r - cy) * std::sin(theta);
          double v = 0.5 + bright +
                     amp * std::sin(2.0 * M_PI * freq * u / pool.width +
                                    phase) +
                     rng.normal(0.0, 0.04);
          img[static_cast<std::size_t>(r) * pool.width + c] =
              std::clamp(v, 0.0, 1.0);
        }
      }
      pool.images.push_back(std::move(img));
      pool.labels.push_back(k);
    }
  }
  return pool;
}

// CIFAR-10 binary batches: 3073-byte records, 1 label byte then 32x32 R/G/B
// planes. Bytes scale to [0, 1].
inline ImagePool load_cifar10(const std::vector<std::string>& paths) {
  ImagePool pool;
  pool.width = 32;
  pool.height = 32;
  pool.channels = 3;
  constexpr std::size_t kRecord = 3073;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FedSslError("cannot open cifar batch: " + path);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes == 0 || bytes % kRecord != 0)
      throw FedSslError("cifar batch has a partial record: " + path);
    in.seekg(0);
    std::vector<unsigned char> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(bytes));
    if (!in) throw FedSslError("short read on cifar batch: " + path);
    for (std::size_t off = 0; off < bytes; off += kRecord) {
      const int label = buf[off];
      if (label > 9)
        throw FedSslError("cifar label byte out of range in " + path);
      std::vector<double> img(3072);
      for (int i = 0; i < 3072; ++i) img[i] = buf[off + 1 + i] / 255.0;
      pool.images.push_back(std::move(img));
      pool.labels.push_back(label);
    }
  }
  return pool;
}

// ---- augmentation -------------------------------------------------------

namespace detail {

inline std::vector<double> hflip(const std::vector<double>& img, int w, int h,
                                 int ch) {
  std::vector<double> out(img.size());
  for (int p = 0; p < ch; ++p)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        out[(static_cast<std::size_t>(p) * h + r) * w + c] =
            img[(static_cast<std::size_t>(p) * h + r) * w + (w - 1 - c)];
  return out;
}

inline void grayscale_collapse(std::vector<double>& img, int w, int h,
                               int ch) {
  if (ch < 2) return;  // single-channel input is already gray
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < plane; ++i) {
    double sum = 0.0;
    for (int p = 0; p < ch; ++p) sum += img[p * plane + i];
    const double g = sum / ch;
    for (int p = 0; p < ch; ++p) img[p * plane + i] = g;
  }
}

// Additive brightness shift then contrast scaling about the image mean,
// clipped back to the unit interval.
inline void brightness_contrast(std::vector<double>& img, double bright,
                                double contrast) {
  double mean = 0.0;
  for (double v : img) mean += v;
  mean /= static_cast<double>(img.size());
  for (double& v : img)
    v = std::clamp((v + bright - mean) * contrast + mean, 0.0, 1.0);
}

}  // namespace detail

// Two stochastic views of one image. The first pipeline flips horizontally
// w.p. 0.5 and grayscales w.p. 0.2; the second jitters brightness/contrast
// w.p. 0.8 and grayscales w.p. 0.4. Grayscale is a no-op on single-channel
// input but its branch draw still happens, keeping stream layout fixed.
inline std::pair<std::vector<double>, std::vector<double>> augment_pair(
    const std::vector<double>& img, int w, int h, int ch, Rng& rng) {
  std::vector<double> v1 = img;
  if (rng.bernoulli(0.5)) v1 = detail::hflip(v1, w, h, ch);
  if (rng.bernoulli(0.2)) detail::grayscale_collapse(v1, w, h, ch);

  std::vector<double> v2 = img;
  if (rng.bernoulli(0.8)) {
    const double bright = rng.uniform(-0.2, 0.2);
    const double contrast = rng.uniform(0.8, 1.2);
    detail::brightness_contrast(v2, bright, contrast);
  }
  if (rng.bernoulli(0.4)) detail::grayscale_collapse(v2, w, h, ch);
  return {std::move(v1), std::move(v2)};
}

// ---- encoder ------------------------------------------------------------

inline MlpShape encoder_shape(int input_dim) {
  return MlpShape{input_dim, 128, 1, 64};
}

inline double l2_normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double norm = std::max(std::sqrt(s), 1e-12);
  for (double& x : v) x /= norm;
  return norm;
}

// Gradient of y = z / ||z|| given the normalized output and the norm:
// dz = (dy - y (y . dy)) / ||z||.
inline void l2_normalize_backward(const double* y, double norm,
                                  const double* dy, int n, double* dz) {
  double dot = 0.0;
  for (int i = 0; i < n; ++i) dot += y[i] * dy[i];
  for (int i = 0; i < n; ++i) dz[i] = (dy[i] - y[i] * dot) / norm;
}

inline std::vector<double> encode(const Mlp& net,
                                  const std::vector<double>& image) {
  if (static_cast<int>(image.size()) != net.shape().input)
    throw FedSslError("encode: image does not match encoder input width");
  ForwardTrace t = forward(net, image);
  std::vector<double> z = t.output();
  l2_normalize(z);
  return z;
}

// ---- contrastive losses -------------------------------------------------

// Probability that the positive wins the softmax over {positive} union
// negatives at temperature tau. Unit-norm inputs keep exponents bounded; the
// max shift below makes the evaluation safe for any tau.
inline double info_nce(const std::vector<double>& q,
                       const std::vector<double>& k_pos,
                       const std::vector<std::vector<double>>& negatives,
                       double tau) {
  double sp = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sp += q[i] * k_pos[i];
  double hi = sp / tau;
  std::vector<double> sn(negatives.size());
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * negatives[j][i];
    sn[j] = s / tau;
    hi = std::max(hi, sn[j]);
  }
  const double pos = std::exp(sp / tau - hi);
  double neg = 0.0;
  for (double s : sn) neg += std::exp(s - hi);
  return pos / (pos + neg);
}

struct DualTempValue {
  double loss = 0.0;
  double coef = 1.0;           // stop-gradient weighting term
  double positive_prob = 0.0;  // L at tau1
};

namespace detail {

struct SoftmaxStats {
  double comp = 0.0;   // 1 - L, the negatives' softmax share
  double log_l = 0.0;  // log L
};

// Positive-pair softmax statistics at temperature tau, stable at both ends.
// The complement is formed directly as the negatives' share (subtracting
// from 1 loses everything once L is within ~1e-9 of 1, which trained
// encoders reach routinely); log L switches to the shifted-log form once the
// complement itself saturates toward 1.
inline SoftmaxStats softmax_stats(double sp, const std::vector<double>& sn,
                                  double tau) {
  double hi = sp / tau;
  for (double s : sn) hi = std::max(hi, s / tau);
  const double pos = std::exp(sp / tau - hi);
  double neg = 0.0;
  for (double s : sn) neg += std::exp(s / tau - hi);
  SoftmaxStats out;
  out.comp = neg / (pos + neg);
  out.log_l = out.comp < 0.5 ? std::log1p(-out.comp)
                             : sp / tau - hi - std::log(pos + neg);
  return out;
}

inline double softmax_complement(double sp, const std::vector<double>& sn,
                                 double tau) {
  return softmax_stats(sp, sn, tau).comp;
}

}  // namespace detail

// Dual-temperature contrastive loss: -coef * log L(tau1) with
// coef = (1 - L(tau2)) / (1 - L(tau1)) treated as a constant under
// differentiation. Degenerate anchors (L(tau1) within 1e-12 of 1) fall back
// to coefficient 1.
inline DualTempValue dual_temperature_loss(
    const std::vector<double>& q, const std::vector<double>& k_pos,
    const std::vector<std::vector<double>>& negatives, double tau1,
    double tau2) {
  double sp = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sp += q[i] * k_pos[i];
  std::vector<double> sn(negatives.size());
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * negatives[j][i];
    sn[j] = s;
  }
  const detail::SoftmaxStats s1 = detail::softmax_stats(sp, sn, tau1);
  const double comp2 = detail::softmax_complement(sp, sn, tau2);
  DualTempValue out;
  out.positive_prob = 1.0 - s1.comp;
  out.coef = s1.comp <= 1e-12 ? 1.0 : comp2 / s1.comp;
  out.loss = -out.coef * s1.log_l;
  return out;
}

// ---- SSL objective and training loop ------------------------------------

// Mean dual-temperature loss over the Z anchors of one batch, given the two
// augmented view batches and the raw batch (row-major Z x input). Negatives
// for anchor i are the Z-1 other raw encodings. If grad is non-null the
// stop-gradient-respecting parameter gradient is ACCUMULATED into it. The
// per-anchor coefficients can be exported (coef_out) or pinned (coef_in);
// pinning is what makes the stop-gradient semantics checkable by finite
// differences.
inline double ssl_objective(const Mlp& model, const double* views1,
                            const double* views2, const double* raws, int z,
                            double tau1, double tau2,
                            std::vector<double>* grad = nullptr,
                            std::vector<double>* coef_out = nullptr,
                            const std::vector<double>* coef_in = nullptr) {
  if (z < 2) throw FedSslError("ssl batch needs at least 2 images");
  const int d = model.shape().output;

  ForwardTrace tq = forward_batch(model, views1, z);
  ForwardTrace tk = forward_batch(model, views2, z);
  ForwardTrace tn = forward_batch(model, raws, z);

  // Normalize rows in place, keeping norms for the backward pass.
  auto normalize_rows = [&](std::vector<double>& m, std::vector<double>& ns) {
    ns.resize(z);
    for (int i = 0; i < z; ++i) {
      double s = 0.0;
      double* row = m.data() + static_cast<std::size_t>(i) * d;
      for (int k = 0; k < d; ++k) s += row[k] * row[k];
      ns[i] = std::max(std::sqrt(s), 1e-12);
      for (int k = 0; k < d; ++k) row[k] /= ns[i];
    }
  };
  std::vector<double> a = tq.output();
  std::vector<double> p = tk.output();
  std::vector<double> r = tn.output();
  std::vector<double> norm_a, norm_p, norm_r;
  normalize_rows(a, norm_a);
  normalize_rows(p, norm_p);
  normalize_rows(r, norm_r);

  std::vector<double> da(a.size(), 0.0), dp(p.size(), 0.0), dr(r.size(), 0.0);
  if (coef_out != nullptr) coef_out->assign(z, 1.0);

  double loss_sum = 0.0;
  std::vector<double> sn(z - 1);
  std::vector<double> sigma(z - 1);
  for (int i = 0; i < z; ++i) {
    const double* ai = a.data() + static_cast<std::size_t>(i) * d;
    const double* pi = p.data() + static_cast<std::size_t>(i) * d;
    double sp = 0.0;
    for (int k = 0; k < d; ++k) sp += ai[k] * pi[k];
    int m = 0;
    for (int j = 0; j < z; ++j) {
      if (j == i) continue;
      const double* rj = r.data() + static_cast<std::size_t>(j) * d;
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += ai[k] * rj[k];
      sn[m++] = s;
    }

    // Softmax shares at tau1 with a max shift; sigma[j] is negative j's
    // share, comp1 their total (= 1 - L).
    double hi = sp / tau1;
    for (double s : sn) hi = std::max(hi, s / tau1);
    const double pos = std::exp(sp / tau1 - hi);
    double neg = 0.0;
    for (int j = 0; j < z - 1; ++j) {
      sigma[j] = std::exp(sn[j] / tau1 - hi);
      neg += sigma[j];
    }
    const double total = pos + neg;
    for (int j = 0; j < z - 1; ++j) sigma[j] /= total;
    const double comp1 = neg / total;
    const double comp2 = detail::softmax_complement(sp, sn, tau2);

    double coef = comp1 <= 1e-12 ? 1.0 : comp2 / comp1;
    if (coef_in != nullptr) coef = (*coef_in)[i];
    if (coef_out != nullptr) (*coef_out)[i] = coef;
    const double log_l = comp1 < 0.5 ? std::log1p(-comp1)
                                     : sp / tau1 - hi - std::log(total);
    loss_sum += -coef * log_l;

    if (grad != nullptr) {
      // d loss / d sims, mean over anchors folded in. Note sum_j sigma[j]
      // equals comp1, so the anchor gradient balances exactly.
      const double scale = coef / (tau1 * z);
      double* dai = da.data() + static_cast<std::size_t>(i) * d;
      double* dpi = dp.data() + static_cast<std::size_t>(i) * d;
      for (int k = 0; k < d; ++k) {
        dai[k] -= scale * comp1 * pi[k];
        dpi[k] -= scale * comp1 * ai[k];
      }
      m = 0;
      for (int j = 0; j < z; ++j) {
        if (j == i) continue;
        const double* rj = r.data() + static_cast<std::size_t>(j) * d;
        double* drj = dr.data() + static_cast<std::size_t>(j) * d;
        const double w = scale * sigma[m++];
        for (int k = 0; k < d; ++k) {
          dai[k] += w * rj[k];
          drj[k] += w * ai[k];
        }
      }
    }
  }

  if (grad != nullptr) {
    // Through the normalization, then through the network, for each of the
    // three forward passes.
    auto backprop_views = [&](const std::vector<double>& y,
                              const std::vector<double>& norms,
                              const std::vector<double>& dy,
                              const ForwardTrace& trace) {
      std::vector<double> dz(y.size());
      for (int i = 0; i < z; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * d;
        l2_normalize_backward(y.data() + off, norms[i], dy.data() + off, d,
                              dz.data() + off);
      }
      backward(model, trace, dz, *grad);
    };
    backprop_views(a, norm_a, da, tq);
    backprop_views(p, norm_p, dp, tk);
    backprop_views(r, norm_r, dr, tn);
  }
  return loss_sum / z;
}

struct TrainStats {
  double loss_sum = 0.0;
  std::int64_t iterations = 0;

  double mean_loss() const {
    return iterations > 0 ? loss_sum / iterations : 0.0;
  }
};

// One contrastive SGD run over a fixed batch: each iteration re-augments the
// batch, evaluates the objective, and applies one momentum-SGD step. The
// optimizer state persists through `opt`, so splitting a run across calls
// with a continuous rng stream reproduces the unsplit run exactly.
inline TrainStats ssl_train(Mlp& model, const ImagePool& batch,
                            std::int64_t iterations, double lr,
                            double momentum, double tau1, double tau2,
                            SgdState& opt, Rng& rng) {
  TrainStats stats;
  if (iterations <= 0) return stats;
  const int z = static_cast<int>(batch.size());
  if (z < 2) throw FedSslError("ssl batch needs at least 2 images");
  if (batch.dim() != model.shape().input)
    throw FedSslError("ssl batch does not match encoder input width");

  const std::size_t dim = static_cast<std::size_t>(batch.dim());
  std::vector<double> v1(z * dim), v2(z * dim), raw(z * dim);
  for (int i = 0; i < z; ++i)
    std::copy(batch.images[i].begin(), batch.images[i].end(),
              raw.begin() + i * dim);

  std::vector<double> grad(model.n_params());
  for (std::int64_t it = 0; it < iterations; ++it) {
    for (int i = 0; i < z; ++i) {
      auto views = augment_pair(batch.images[i], batch.width, batch.height,
                                batch.channels, rng);
      std::copy(views.first.begin(), views.first.end(), v1.begin() + i * dim);
      std::copy(views.second.begin(), views.second.end(),
                v2.begin() + i * dim);
    }
    vec_fill(grad, 0.0);
    stats.loss_sum += ssl_objective(model, v1.data(), v2.data(), raw.data(),
                                    z, tau1, tau2, &grad);
    sgd_step(model.params(), grad, lr, momentum, opt);
  }
  stats.iterations = iterations;
  return stats;
}

// The vehicle-side and RSU-side loops share semantics; which one runs is a
// matter of whose rng stream and iteration budget the caller hands over.
inline TrainStats local_train(Mlp& model, const ImagePool& batch,
                              std::int64_t iterations, double lr,
                              double momentum, double tau1, double tau2,
                              SgdState& opt, Rng& rng) {
  return ssl_train(model, batch, iterations, lr, momentum, tau1, tau2, opt,
                   rng);
}

inline TrainStats rsu_train(Mlp& model, const ImagePool& batch,
                            std::int64_t iterations, double lr,
                            double momentum, double tau1, double tau2,
                            SgdState& opt, Rng& rng) {
  return ssl_train(model, batch, iterations, lr, momentum, tau1, tau2, opt,
                   rng);
}

// ---- aggregation --------------------------------------------------------

enum class AggregationMode { kProducedOnly, kPaper2N };

inline AggregationMode parse_aggregation_mode(const std::string& s) {
  if (s == "produced_only") return AggregationMode::kProducedOnly;
  if (s == "paper_2n") return AggregationMode::kPaper2N;
  throw FedSslError("unknown aggregation mode: " + s);
}

// Element-wise mean of the round's models. produced_only averages what was
// actually trained (N locals plus the offloaded RSU models); paper_2n always
// divides by 2N, standing in a vehicle's local model where no RSU model
// exists so every vehicle contributes two summands.
inline std::vector<double> aggregate(
    const std::vector<std::vector<double>>& locals,
    const std::vector<std::vector<double>>& rsu_models,
    const std::vector<int>& g, AggregationMode mode) {
  const std::size_t n = locals.size();
  if (rsu_models.size() != n || g.size() != n)
    throw FedSslError("aggregate: list sizes disagree");
  if (n == 0) throw FedSslError("aggregate: no models");
  const std::size_t dim = locals[0].size();
  for (const auto& m : locals)
    if (m.size() != dim) throw FedSslError("aggregate: layout mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (g[i] && rsu_models[i].size() != dim)
      throw FedSslError("aggregate: layout mismatch");

  std::vector<double> sum(dim, 0.0);
  double count = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) sum[k] += locals[i][k];
    count += 1.0;
    if (mode == AggregationMode::kPaper2N) {
      const std::vector<double>& second = g[i] ? rsu_models[i] : locals[i];
      for (std::size_t k = 0; k < dim; ++k) sum[k] += second[k];
      count += 1.0;
    } else if (g[i]) {
      for (std::size_t k = 0; k < dim; ++k) sum[k] += rsu_models[i][k];
      count += 1.0;
    }
  }
  for (double& v : sum) v /= count;
  return sum;
}

// ---- linear probe -------------------------------------------------------

struct ProbeOptions {
  double train_fraction = 0.8;
  int epochs = 300;
  double lr = 0.5;
};

struct ProbeResult {
  double top1 = 0.0;
  double top5 = 0.0;
};

// Multinomial logistic regression on fixed embeddings, trained by full-batch
// gradient descent from zero weights (the problem is convex; no rng needed).
// The split is stratified and deterministic: the first train_fraction of each
// class's samples, in pool order, train the probe.
inline ProbeResult probe_on_embeddings(
    const std::vector<std::vector<double>>& emb, const std::vector<int>& labels,
    int n_classes, const ProbeOptions& opts = {}) {
  if (emb.size() != labels.size() || emb.empty())
    throw FedSslError("probe: embeddings and labels disagree");
  const int d = static_cast<int>(emb[0].size());

  std::vector<int> per_class_seen(n_classes, 0), per_class_total(n_classes, 0);
  for (int y : labels) {
    if (y < 0 || y >= n_classes) throw FedSslError("probe: label out of range");
    per_class_total[y] += 1;
  }
  std::vector<char> in_train(emb.size());
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const int y = labels[i];
    const int cut = static_cast<int>(per_class_total[y] * opts.train_fraction);
    in_train[i] = per_class_seen[y] < cut;
    per_class_seen[y] += 1;
  }

  // w: n_classes x (d + 1), last column the bias.
  std::vector<double> w(static_cast<std::size_t>(n_classes) * (d + 1), 0.0);
  std::vector<double> gw(w.size());
  std::vector<double> logits(n_classes);
  std::size_t n_train = 0;
  for (char t : in_train) n_train += t != 0;
  if (n_train == 0 || n_train == emb.size())
    throw FedSslError("probe: degenerate split");

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    for (std::size_t i = 0; i < emb.size(); ++i) {
      if (!in_train[i]) continue;
      double hi = -1e300;
      for (int c = 0; c < n_classes; ++c) {
        const double* wc = w.data() + static_cast<std::size_t>(c) * (d + 1);
        double s = wc[d];
        for (int k = 0; k < d; ++k) s += wc[k] * emb[i][k];
        logits[c] = s;
        hi = std::max(hi, s);
      }
      double zsum = 0.0;
      for (int c = 0; c < n_classes; ++c) {
        logits[c] = std::exp(logits[c] - hi);
        zsum += logits[c];
      }
      for (int c = 0; c < n_classes; ++c) {
        const double delta =
            logits[c] / zsum - (c == labels[i] ? 1.0 : 0.0);
        double* gc = gw.data() + static_cast<std::size_t>(c) * (d + 1);
        for (int k = 0; k < d; ++k) gc[k] += delta * emb[i][k];
        gc[d] += delta;
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k)
      w[k] -= opts.lr * gw[k] / static_cast<double>(n_train);
  }

  std::size_t n_test = 0, hit1 = 0, hit5 = 0;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    if (in_train[i]) continue;
    n_test += 1;
    for (int c = 0; c < n_classes; ++c) {
      const double* wc = w.data() + static_cast<std::size_t>(c) * (d + 1);
      double s = wc[d];
      for (int k = 0; k < d; ++k) s += wc[k] * emb[i][k];
      logits[c] = s;
    }
    // Rank with first-index tie-breaking, matching a plain argmax scan.
    const double own = logits[labels[i]];
    int rank = 0;
    for (int c = 0; c < n_classes; ++c) {
      if (logits[c] > own || (logits[c] == own && c < labels[i])) rank += 1;
    }
    if (rank == 0) hit1 += 1;
    if (rank < 5) hit5 += 1;
  }
  ProbeResult res;
  res.top1 = static_cast<double>(hit1) / n_test;
  res.top5 = static_cast<double>(hit5) / n_test;
  return res;
}

inline ProbeResult linear_probe(const Mlp& encoder, const ImagePool& pool,
                                const ProbeOptions& opts = {}) {
  std::vector<std::vector<double>> emb(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    emb[i] = encode(encoder, pool.images[i]);
  const int n_classes =
      pool.labels.empty()
          ? 0
          : *std::max_element(pool.labels.begin(), pool.labels.end()) + 1;
  return probe_on_embeddings(emb, pool.labels, n_classes, opts);
}

}  // namespace vecsim
