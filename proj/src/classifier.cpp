#include "plenograsp/classifier.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "plenograsp/errors.hpp"
#include "plenograsp/rng.hpp"

namespace plenograsp {

using nlohmann::json;

namespace {

uint64_t fnv1a(const void* data, size_t size, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

void softmax2(const double* logits, double* probs) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double s = e0 + e1;
  probs[0] = e0 / s;
  probs[1] = e1 / s;
}

}  // namespace

uint64_t dataset_hash(const std::vector<LabeledExample>& dataset) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& ex : dataset) {
    h = fnv1a(&ex.label, sizeof(ex.label), h);
    const int size = ex.tensor.size;
    h = fnv1a(&size, sizeof(size), h);
    h = fnv1a(ex.tensor.channels.data(), ex.tensor.channels.size() * sizeof(float), h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Reference convolutional network
// ---------------------------------------------------------------------------

struct ConvNetOps {
  using Arch = ConvNetClassifier::Arch;
  Arch a;
  int s1 = 0, p1 = 0, s2 = 0, p2 = 0, nflat = 0;
  int off_w1 = 0, off_b1 = 0, off_w2 = 0, off_b2 = 0;
  int off_wd1 = 0, off_bd1 = 0, off_wd2 = 0, off_bd2 = 0;
  int total = 0;

  explicit ConvNetOps(const Arch& arch) : a(arch) {
    s1 = a.input_size - a.kernel + 1;
    p1 = s1 / a.pool;
    s2 = p1 - a.kernel + 1;
    p2 = s2 / a.pool;
    if (s1 < a.pool || s2 < a.pool || p2 < 1) {
      throw ValidationError("convnet: input size " + std::to_string(a.input_size) +
                            " too small for the architecture");
    }
    nflat = a.conv2_filters * p2 * p2;
    off_w1 = 0;
    off_b1 = off_w1 + a.conv1_filters * 9 * a.kernel * a.kernel;
    off_w2 = off_b1 + a.conv1_filters;
    off_b2 = off_w2 + a.conv2_filters * a.conv1_filters * a.kernel * a.kernel;
    off_wd1 = off_b2 + a.conv2_filters;
    off_bd1 = off_wd1 + a.dense * nflat;
    off_wd2 = off_bd1 + a.dense;
    off_bd2 = off_wd2 + 2 * a.dense;
    total = off_bd2 + 2;
  }

  struct Buffers {
    std::vector<double> x, pre1, act1, pool1, pre2, act2, pool2, hidden_pre, hidden, logits, probs;
    std::vector<double> d_pool2, d_pre2, d_pool1, d_pre1, d_hidden;
  };

  void allocate(Buffers& b) const {
    b.x.assign(size_t(9) * a.input_size * a.input_size, 0.0);
    b.pre1.assign(size_t(a.conv1_filters) * s1 * s1, 0.0);
    b.act1 = b.pre1;
    b.pool1.assign(size_t(a.conv1_filters) * p1 * p1, 0.0);
    b.pre2.assign(size_t(a.conv2_filters) * s2 * s2, 0.0);
    b.act2 = b.pre2;
    b.pool2.assign(size_t(nflat), 0.0);
    b.hidden_pre.assign(size_t(a.dense), 0.0);
    b.hidden = b.hidden_pre;
    b.logits.assign(2, 0.0);
    b.probs.assign(2, 0.0);
    b.d_pool2.assign(size_t(nflat), 0.0);
    b.d_pre2.assign(size_t(a.conv2_filters) * s2 * s2, 0.0);
    b.d_pool1.assign(size_t(a.conv1_filters) * p1 * p1, 0.0);
    b.d_pre1.assign(size_t(a.conv1_filters) * s1 * s1, 0.0);
    b.d_hidden.assign(size_t(a.dense), 0.0);
  }

  void standardize(const FeatureTensor& t, const std::vector<double>& mean,
                   const std::vector<double>& stddev, std::vector<double>& x) const {
    const int n = a.input_size * a.input_size;
    for (int c = 0; c < 9; ++c) {
      const float* src = t.channel(c);
      double* dst = x.data() + size_t(c) * n;
      const double m = mean[size_t(c)];
      const double inv = 1.0 / stddev[size_t(c)];
      for (int i = 0; i < n; ++i) dst[i] = (double(src[i]) - m) * inv;
    }
  }

  void conv_forward(const double* in, int in_ch, int in_size, const double* w, const double* bias,
                    int out_ch, int out_size, double* pre, double* act) const {
    const int k = a.kernel;
    for (int f = 0; f < out_ch; ++f) {
      double* pre_f = pre + size_t(f) * out_size * out_size;
      for (int i = 0; i < out_size * out_size; ++i) pre_f[i] = bias[f];
      for (int c = 0; c < in_ch; ++c) {
        const double* in_c = in + size_t(c) * in_size * in_size;
        const double* w_fc = w + (size_t(f) * in_ch + c) * k * k;
        for (int y = 0; y < out_size; ++y) {
          for (int ky = 0; ky < k; ++ky) {
            const double* row = in_c + size_t(y + ky) * in_size;
            const double* w_row = w_fc + size_t(ky) * k;
            double* out_row = pre_f + size_t(y) * out_size;
            for (int x = 0; x < out_size; ++x) {
              double acc = 0.0;
              for (int kx = 0; kx < k; ++kx) acc += w_row[kx] * row[x + kx];
              out_row[x] += acc;
            }
          }
        }
      }
      double* act_f = act + size_t(f) * out_size * out_size;
      for (int i = 0; i < out_size * out_size; ++i) act_f[i] = std::tanh(pre_f[i]);
    }
  }

  void pool_forward(const double* in, int ch, int in_size, int out_size, double* out) const {
    const int p = a.pool;
    const double inv = 1.0 / (p * p);
    for (int c = 0; c < ch; ++c) {
      const double* in_c = in + size_t(c) * in_size * in_size;
      double* out_c = out + size_t(c) * out_size * out_size;
      for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < p; ++dy) {
            for (int dx = 0; dx < p; ++dx) acc += in_c[size_t(y * p + dy) * in_size + x * p + dx];
          }
          out_c[size_t(y) * out_size + x] = acc * inv;
        }
      }
    }
  }

  void forward(const std::vector<double>& params, Buffers& b) const {
    conv_forward(b.x.data(), 9, a.input_size, params.data() + off_w1, params.data() + off_b1,
                 a.conv1_filters, s1, b.pre1.data(), b.act1.data());
    pool_forward(b.act1.data(), a.conv1_filters, s1, p1, b.pool1.data());
    conv_forward(b.pool1.data(), a.conv1_filters, p1, params.data() + off_w2,
                 params.data() + off_b2, a.conv2_filters, s2, b.pre2.data(), b.act2.data());
    pool_forward(b.act2.data(), a.conv2_filters, s2, p2, b.pool2.data());
    for (int d = 0; d < a.dense; ++d) {
      const double* w = params.data() + off_wd1 + size_t(d) * nflat;
      double acc = params[size_t(off_bd1 + d)];
      for (int i = 0; i < nflat; ++i) acc += w[i] * b.pool2[size_t(i)];
      b.hidden_pre[size_t(d)] = acc;
      b.hidden[size_t(d)] = std::tanh(acc);
    }
    for (int o = 0; o < 2; ++o) {
      const double* w = params.data() + off_wd2 + size_t(o) * a.dense;
      double acc = params[size_t(off_bd2 + o)];
      for (int d = 0; d < a.dense; ++d) acc += w[d] * b.hidden[size_t(d)];
      b.logits[size_t(o)] = acc;
    }
    softmax2(b.logits.data(), b.probs.data());
  }

  // Cross-entropy loss and parameter-gradient accumulation for one example.
  double backward(const std::vector<double>& params, Buffers& b, int label, double weight,
                  std::vector<double>& grad) const {
    const double loss = -std::log(std::max(b.probs[size_t(label)], 1e-300)) * weight;

    double d_logits[2];
    d_logits[0] = (b.probs[0] - (label == 0 ? 1.0 : 0.0)) * weight;
    d_logits[1] = (b.probs[1] - (label == 1 ? 1.0 : 0.0)) * weight;

    std::fill(b.d_hidden.begin(), b.d_hidden.end(), 0.0);
    for (int o = 0; o < 2; ++o) {
      double* gw = grad.data() + off_wd2 + size_t(o) * a.dense;
      const double* w = params.data() + off_wd2 + size_t(o) * a.dense;
      for (int d = 0; d < a.dense; ++d) {
        gw[d] += d_logits[o] * b.hidden[size_t(d)];
        b.d_hidden[size_t(d)] += w[d] * d_logits[o];
      }
      grad[size_t(off_bd2 + o)] += d_logits[o];
    }

    std::fill(b.d_pool2.begin(), b.d_pool2.end(), 0.0);
    for (int d = 0; d < a.dense; ++d) {
      const double t = b.hidden[size_t(d)];
      const double dh = b.d_hidden[size_t(d)] * (1.0 - t * t);
      double* gw = grad.data() + off_wd1 + size_t(d) * nflat;
      const double* w = params.data() + off_wd1 + size_t(d) * nflat;
      for (int i = 0; i < nflat; ++i) {
        gw[i] += dh * b.pool2[size_t(i)];
        b.d_pool2[size_t(i)] += w[i] * dh;
      }
      grad[size_t(off_bd1 + d)] += dh;
    }

    // pool2 backward -> d_pre2 (through tanh of conv2)
    std::fill(b.d_pre2.begin(), b.d_pre2.end(), 0.0);
    const double pinv = 1.0 / (a.pool * a.pool);
    for (int c = 0; c < a.conv2_filters; ++c) {
      for (int y = 0; y < p2; ++y) {
        for (int x = 0; x < p2; ++x) {
          const double g = b.d_pool2[(size_t(c) * p2 + y) * p2 + x] * pinv;
          for (int dy = 0; dy < a.pool; ++dy) {
            for (int dx = 0; dx < a.pool; ++dx) {
              const size_t i =
                  (size_t(c) * s2 + size_t(y * a.pool + dy)) * s2 + size_t(x * a.pool + dx);
              const double t = b.act2[i];
              b.d_pre2[i] += g * (1.0 - t * t);
            }
          }
        }
      }
    }

    // conv2 backward: weight grads and d_pool1
    std::fill(b.d_pool1.begin(), b.d_pool1.end(), 0.0);
    const int k = a.kernel;
    for (int f = 0; f < a.conv2_filters; ++f) {
      const double* dp = b.d_pre2.data() + size_t(f) * s2 * s2;
      double bias_acc = 0.0;
      for (int i = 0; i < s2 * s2; ++i) bias_acc += dp[i];
      grad[size_t(off_b2 + f)] += bias_acc;
      for (int c = 0; c < a.conv1_filters; ++c) {
        const double* in_c = b.pool1.data() + size_t(c) * p1 * p1;
        double* gw = grad.data() + off_w2 + (size_t(f) * a.conv1_filters + c) * k * k;
        const double* w = params.data() + off_w2 + (size_t(f) * a.conv1_filters + c) * k * k;
        double* dip = b.d_pool1.data() + size_t(c) * p1 * p1;
        for (int y = 0; y < s2; ++y) {
          for (int ky = 0; ky < k; ++ky) {
            const double* in_row = in_c + size_t(y + ky) * p1;
            double* dip_row = dip + size_t(y + ky) * p1;
            const double* dp_row = dp + size_t(y) * s2;
            double* gw_row = gw + size_t(ky) * k;
            const double* w_row = w + size_t(ky) * k;
            for (int x = 0; x < s2; ++x) {
              const double g = dp_row[x];
              for (int kx = 0; kx < k; ++kx) {
                gw_row[kx] += g * in_row[x + kx];
                dip_row[x + kx] += g * w_row[kx];
              }
            }
          }
        }
      }
    }

    // pool1 backward -> d_pre1 (through tanh of conv1)
    std::fill(b.d_pre1.begin(), b.d_pre1.end(), 0.0);
    for (int c = 0; c < a.conv1_filters; ++c) {
      for (int y = 0; y < p1; ++y) {
        for (int x = 0; x < p1; ++x) {
          const double g = b.d_pool1[(size_t(c) * p1 + y) * p1 + x] * pinv;
          for (int dy = 0; dy < a.pool; ++dy) {
            for (int dx = 0; dx < a.pool; ++dx) {
              const size_t i =
                  (size_t(c) * s1 + size_t(y * a.pool + dy)) * s1 + size_t(x * a.pool + dx);
              const double t = b.act1[i];
              b.d_pre1[i] += g * (1.0 - t * t);
            }
          }
        }
      }
    }

    // conv1 weight gradients (no input gradient needed)
    for (int f = 0; f < a.conv1_filters; ++f) {
      const double* dp = b.d_pre1.data() + size_t(f) * s1 * s1;
      double bias_acc = 0.0;
      for (int i = 0; i < s1 * s1; ++i) bias_acc += dp[i];
      grad[size_t(off_b1 + f)] += bias_acc;
      for (int c = 0; c < 9; ++c) {
        const double* in_c = b.x.data() + size_t(c) * a.input_size * a.input_size;
        double* gw = grad.data() + off_w1 + (size_t(f) * 9 + c) * k * k;
        for (int y = 0; y < s1; ++y) {
          for (int ky = 0; ky < k; ++ky) {
            const double* in_row = in_c + size_t(y + ky) * a.input_size;
            const double* dp_row = dp + size_t(y) * s1;
            double* gw_row = gw + size_t(ky) * k;
            for (int x = 0; x < s1; ++x) {
              const double g = dp_row[x];
              for (int kx = 0; kx < k; ++kx) gw_row[kx] += g * in_row[x + kx];
            }
          }
        }
      }
    }

    return loss;
  }
};

namespace {

void check_dataset(const std::vector<LabeledExample>& dataset) {
  if (dataset.empty()) throw ValidationError("train: empty dataset");
  const int size = dataset.front().tensor.size;
  bool has_pos = false, has_neg = false;
  for (const auto& ex : dataset) {
    if (ex.label != 0 && ex.label != 1) throw ValidationError("train: labels must be 0 or 1");
    if (ex.tensor.size != size) throw ValidationError("train: tensors must share dimensions");
    (ex.label == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw ValidationError("train: dataset must contain both labels");
  }
}

}  // namespace

ConvNetClassifier ConvNetClassifier::train(const std::vector<LabeledExample>& dataset,
                                           const TrainConfig& config, const Arch& arch,
                                           std::vector<EpochLog>* log) {
  check_dataset(dataset);
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0)) {
    throw ValidationError("train: bad configuration");
  }

  ConvNetClassifier model;
  model.arch_ = arch;
  model.arch_.input_size = dataset.front().tensor.size;
  model.train_seed_ = config.seed;
  model.train_epochs_ = config.epochs;
  model.dataset_hash_ = dataset_hash(dataset);

  const ConvNetOps ops(model.arch_);

  // Per-channel standardization over the training set.
  model.input_mean_.assign(9, 0.0);
  model.input_std_.assign(9, 1.0);
  const size_t per_ch = size_t(model.arch_.input_size) * model.arch_.input_size;
  for (int c = 0; c < 9; ++c) {
    double acc = 0.0;
    for (const auto& ex : dataset) {
      const float* p = ex.tensor.channel(c);
      for (size_t i = 0; i < per_ch; ++i) acc += p[i];
    }
    const double mean = acc / double(per_ch * dataset.size());
    double var = 0.0;
    for (const auto& ex : dataset) {
      const float* p = ex.tensor.channel(c);
      for (size_t i = 0; i < per_ch; ++i) var += (p[i] - mean) * (p[i] - mean);
    }
    var /= double(per_ch * dataset.size());
    model.input_mean_[size_t(c)] = mean;
    model.input_std_[size_t(c)] = std::sqrt(var) > 1e-9 ? std::sqrt(var) : 1.0;
  }

  Rng rng(config.seed);
  model.params_.assign(size_t(ops.total), 0.0);
  const int k = arch.kernel;
  auto init_block = [&](int offset, int count, double fan_in) {
    const double scale = 1.0 / std::sqrt(fan_in);
    for (int i = 0; i < count; ++i) model.params_[size_t(offset + i)] = rng.gaussian() * scale;
  };
  init_block(ops.off_w1, model.arch_.conv1_filters * 9 * k * k, 9.0 * k * k);
  init_block(ops.off_w2, model.arch_.conv2_filters * model.arch_.conv1_filters * k * k,
             double(model.arch_.conv1_filters) * k * k);
  init_block(ops.off_wd1, model.arch_.dense * ops.nflat, double(ops.nflat));
  init_block(ops.off_wd2, 2 * model.arch_.dense, double(model.arch_.dense));

  // Class weights balance the dataset's label ratio.
  double w_pos = 1.0, w_neg = 1.0;
  if (config.class_weighted) {
    double n_pos = 0.0;
    for (const auto& ex : dataset) n_pos += ex.label;
    const double n = double(dataset.size());
    w_pos = n / (2.0 * std::max(1.0, n_pos));
    w_neg = n / (2.0 * std::max(1.0, n - n_pos));
  }

  std::vector<double> grad(size_t(ops.total), 0.0);
  std::vector<double> momentum(size_t(ops.total), 0.0);
  ConvNetOps::Buffers buf;
  ops.allocate(buf);

  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = size_t(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    double epoch_weight = 0.0;
    for (size_t start = 0; start < order.size(); start += size_t(config.batch_size)) {
      const size_t stop = std::min(order.size(), start + size_t(config.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_weight = 0.0;
      for (size_t i = start; i < stop; ++i) {
        const LabeledExample& ex = dataset[order[i]];
        ops.standardize(ex.tensor, model.input_mean_, model.input_std_, buf.x);
        ops.forward(model.params_, buf);
        const double w = ex.label == 1 ? w_pos : w_neg;
        epoch_loss += ops.backward(model.params_, buf, ex.label, w, grad);
        batch_weight += w;
        epoch_weight += w;
      }
      const double inv = 1.0 / batch_weight;
      for (int i = 0; i < ops.total; ++i) {
        momentum[size_t(i)] = 0.9 * momentum[size_t(i)] - config.learning_rate * grad[size_t(i)] * inv;
        model.params_[size_t(i)] += momentum[size_t(i)];
      }
    }
    const double mean_loss = epoch_loss / epoch_weight;
    if (!std::isfinite(mean_loss)) {
      throw ComputeError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    }
    for (const double p : model.params_) {
      if (!std::isfinite(p)) {
        throw ComputeError("training diverged (non-finite parameters) at epoch " +
                           std::to_string(epoch));
      }
    }

    int correct = 0;
    for (const auto& ex : dataset) {
      ops.standardize(ex.tensor, model.input_mean_, model.input_std_, buf.x);
      ops.forward(model.params_, buf);
      const int pred = buf.probs[1] > buf.probs[0] ? 1 : 0;
      correct += pred == ex.label;
    }
    const double acc = double(correct) / double(dataset.size());
    model.final_accuracy_ = acc;
    if (log) log->push_back({epoch, mean_loss, acc});
  }
  return model;
}

ConvNetClassifier ConvNetClassifier::initialized(const Arch& arch, uint64_t seed) {
  ConvNetClassifier model;
  model.arch_ = arch;
  const ConvNetOps ops(arch);
  Rng rng(seed);
  model.params_.assign(size_t(ops.total), 0.0);
  const int k = arch.kernel;
  auto init_block = [&](int offset, int count, double fan_in) {
    const double scale = 1.0 / std::sqrt(fan_in);
    for (int i = 0; i < count; ++i) model.params_[size_t(offset + i)] = rng.gaussian() * scale;
  };
  init_block(ops.off_w1, arch.conv1_filters * 9 * k * k, 9.0 * k * k);
  init_block(ops.off_w2, arch.conv2_filters * arch.conv1_filters * k * k,
             double(arch.conv1_filters) * k * k);
  init_block(ops.off_wd1, arch.dense * ops.nflat, double(ops.nflat));
  init_block(ops.off_wd2, 2 * arch.dense, double(arch.dense));
  return model;
}

std::array<double, 2> ConvNetClassifier::class_probabilities(const FeatureTensor& tensor) const {
  if (tensor.size != arch_.input_size) {
    throw ValidationError("classify: tensor size " + std::to_string(tensor.size) +
                          " does not match model input " + std::to_string(arch_.input_size));
  }
  const ConvNetOps ops(arch_);
  ConvNetOps::Buffers buf;
  ops.allocate(buf);
  ops.standardize(tensor, input_mean_, input_std_, buf.x);
  ops.forward(params_, buf);
  return {buf.probs[0], buf.probs[1]};
}

Classification ConvNetClassifier::classify(const FeatureTensor& tensor) const {
  const auto probs = class_probabilities(tensor);
  Classification out;
  out.confidence = probs[1];
  out.graspable = probs[1] > probs[0];
  return out;
}

double ConvNetClassifier::gradient_check(const FeatureTensor& tensor, int* worst_index,
                                         int n_params, uint64_t seed, double step) const {
  const ConvNetOps ops(arch_);
  ConvNetOps::Buffers buf;
  ops.allocate(buf);
  ops.standardize(tensor, input_mean_, input_std_, buf.x);

  std::vector<double> params = params_;
  std::vector<double> grad(params.size(), 0.0);
  ops.forward(params, buf);
  ops.backward(params, buf, /*label=*/1, /*weight=*/1.0, grad);

  Rng rng(seed);
  double max_rel = 0.0;
  int worst = -1;
  for (int i = 0; i < n_params; ++i) {
    const int idx = int(rng.next_u64() % uint64_t(params.size()));
    const double saved = params[size_t(idx)];
    params[size_t(idx)] = saved + step;
    ops.forward(params, buf);
    const double lp = -std::log(std::max(buf.probs[1], 1e-300));
    params[size_t(idx)] = saved - step;
    ops.forward(params, buf);
    const double lm = -std::log(std::max(buf.probs[1], 1e-300));
    params[size_t(idx)] = saved;
    const double numeric = (lp - lm) / (2.0 * step);
    const double analytic = grad[size_t(idx)];
    const double rel = std::abs(analytic - numeric) /
                       std::max({1e-3, std::abs(analytic), std::abs(numeric)});
    if (rel > max_rel) {
      max_rel = rel;
      worst = idx;
    }
  }
  if (worst_index) *worst_index = worst;
  return max_rel;
}

namespace {

constexpr char kModelMagic[4] = {'G', 'L', 'C', 'M'};

void write_model_file(const std::filesystem::path& path, const json& arch,
                      const std::vector<double>& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write model: " + path.string());
  f.write(kModelMagic, 4);
  const uint32_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const std::string arch_str = arch.dump();
  const uint32_t len = uint32_t(arch_str.size());
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(arch_str.data(), len);
  const uint64_t count = params.size();
  f.write(reinterpret_cast<const char*>(&count), 8);
  f.write(reinterpret_cast<const char*>(params.data()),
          std::streamsize(params.size() * sizeof(double)));
  if (!f) throw ComputeError("short write: " + path.string());
}

void read_model_file(const std::filesystem::path& path, json* arch, std::vector<double>* params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open model: " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw ValidationError("model: magic mismatch in " + path.string());
  }
  uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw ValidationError("model: unsupported version");
  uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 4);
  std::string arch_str(len, '\0');
  f.read(arch_str.data(), len);
  uint64_t count = 0;
  f.read(reinterpret_cast<char*>(&count), 8);
  if (!f) throw ValidationError("model: truncated header");
  params->resize(count);
  f.read(reinterpret_cast<char*>(params->data()), std::streamsize(count * sizeof(double)));
  if (!f) throw ValidationError("model: truncated parameters");
  try {
    *arch = json::parse(arch_str);
  } catch (const json::exception& e) {
    throw ValidationError("model: bad architecture descriptor: " + std::string(e.what()));
  }
}

}  // namespace

void ConvNetClassifier::save(const std::filesystem::path& path, uint64_t config_hash) const {
  json arch{{"type", "convnet"},
            {"config_hash", config_hash},
            {"input_size", arch_.input_size},
            {"conv1_filters", arch_.conv1_filters},
            {"conv2_filters", arch_.conv2_filters},
            {"kernel", arch_.kernel},
            {"pool", arch_.pool},
            {"dense", arch_.dense},
            {"input_mean", input_mean_},
            {"input_std", input_std_},
            {"final_accuracy", final_accuracy_},
            {"train_seed", train_seed_},
            {"train_epochs", train_epochs_},
            {"dataset_hash", dataset_hash_}};
  write_model_file(path, arch, params_);
}

ConvNetClassifier ConvNetClassifier::load(const std::filesystem::path& path) {
  json arch;
  std::vector<double> params;
  read_model_file(path, &arch, &params);
  if (arch.value("type", "") != "convnet") {
    throw ValidationError("model: not a convnet file");
  }
  ConvNetClassifier model;
  model.arch_.input_size = arch.at("input_size").get<int>();
  model.arch_.conv1_filters = arch.at("conv1_filters").get<int>();
  model.arch_.conv2_filters = arch.at("conv2_filters").get<int>();
  model.arch_.kernel = arch.at("kernel").get<int>();
  model.arch_.pool = arch.at("pool").get<int>();
  model.arch_.dense = arch.at("dense").get<int>();
  model.input_mean_ = arch.at("input_mean").get<std::vector<double>>();
  model.input_std_ = arch.at("input_std").get<std::vector<double>>();
  model.final_accuracy_ = arch.value("final_accuracy", 0.0);
  model.train_seed_ = arch.value("train_seed", uint64_t(0));
  model.train_epochs_ = arch.value("train_epochs", 0);
  model.dataset_hash_ = arch.value("dataset_hash", uint64_t(0));
  const ConvNetOps ops(model.arch_);
  if (int64_t(params.size()) != int64_t(ops.total)) {
    throw ValidationError("model: parameter count does not match architecture");
  }
  model.params_ = std::move(params);
  return model;
}

// ---------------------------------------------------------------------------
// Logistic baseline over pooled channel statistics
// ---------------------------------------------------------------------------

namespace {

std::vector<double> pooled_features(const FeatureTensor& t) {
  std::vector<double> out;
  out.reserve(27);
  const size_t n = size_t(t.size) * t.size;
  for (int c = 0; c < 9; ++c) {
    const float* p = t.channel(c);
    double mean = 0.0, mx = 0.0;
    for (size_t i = 0; i < n; ++i) {
      mean += p[i];
      mx = std::max(mx, double(p[i]));
    }
    mean /= double(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
    out.push_back(mean);
    out.push_back(std::sqrt(var / double(n)));
    out.push_back(mx);
  }
  return out;
}

}  // namespace

LogisticClassifier LogisticClassifier::train(const std::vector<LabeledExample>& dataset,
                                             const TrainConfig& config,
                                             std::vector<EpochLog>* log) {
  check_dataset(dataset);
  LogisticClassifier model;
  const size_t dim = 27;

  std::vector<std::vector<double>> feats;
  feats.reserve(dataset.size());
  for (const auto& ex : dataset) feats.push_back(pooled_features(ex.tensor));

  model.feat_mean_.assign(dim, 0.0);
  model.feat_std_.assign(dim, 1.0);
  for (size_t d = 0; d < dim; ++d) {
    double m = 0.0;
    for (const auto& f : feats) m += f[d];
    m /= double(feats.size());
    double v = 0.0;
    for (const auto& f : feats) v += (f[d] - m) * (f[d] - m);
    model.feat_mean_[d] = m;
    model.feat_std_[d] = std::sqrt(v / double(feats.size())) > 1e-9
                             ? std::sqrt(v / double(feats.size()))
                             : 1.0;
  }
  for (auto& f : feats) {
    for (size_t d = 0; d < dim; ++d) f[d] = (f[d] - model.feat_mean_[d]) / model.feat_std_[d];
  }

  double w_pos = 1.0, w_neg = 1.0;
  if (config.class_weighted) {
    double n_pos = 0.0;
    for (const auto& ex : dataset) n_pos += ex.label;
    w_pos = double(dataset.size()) / (2.0 * std::max(1.0, n_pos));
    w_neg = double(dataset.size()) / (2.0 * std::max(1.0, double(dataset.size()) - n_pos));
  }

  model.weights_.assign(dim + 1, 0.0);
  std::vector<double> grad(dim + 1, 0.0);
  for (int epoch = 1; epoch <= std::max(50, config.epochs); ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0, weight_sum = 0.0;
    int correct = 0;
    for (size_t i = 0; i < feats.size(); ++i) {
      double z = model.weights_[dim];
      for (size_t d = 0; d < dim; ++d) z += model.weights_[d] * feats[i][d];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const int y = dataset[i].label;
      const double w = y == 1 ? w_pos : w_neg;
      loss += -w * (y == 1 ? std::log(std::max(p, 1e-300))
                           : std::log(std::max(1.0 - p, 1e-300)));
      const double g = w * (p - double(y));
      for (size_t d = 0; d < dim; ++d) grad[d] += g * feats[i][d];
      grad[dim] += g;
      weight_sum += w;
      correct += (p > 0.5 ? 1 : 0) == y;
    }
    for (size_t d = 0; d <= dim; ++d) {
      model.weights_[d] -= config.learning_rate * grad[d] / weight_sum;
    }
    if (log) log->push_back({epoch, loss / weight_sum, double(correct) / double(feats.size())});
  }
  return model;
}

Classification LogisticClassifier::classify(const FeatureTensor& tensor) const {
  auto f = pooled_features(tensor);
  double z = weights_.back();
  for (size_t d = 0; d + 1 < weights_.size(); ++d) {
    z += weights_[d] * (f[d] - feat_mean_[d]) / feat_std_[d];
  }
  Classification out;
  out.confidence = 1.0 / (1.0 + std::exp(-z));
  out.graspable = out.confidence > 0.5;
  return out;
}

void LogisticClassifier::save(const std::filesystem::path& path, uint64_t config_hash) const {
  json arch{{"type", "logistic"},
            {"config_hash", config_hash},
            {"feat_mean", feat_mean_},
            {"feat_std", feat_std_}};
  write_model_file(path, arch, weights_);
}

LogisticClassifier LogisticClassifier::load(const std::filesystem::path& path) {
  json arch;
  std::vector<double> params;
  read_model_file(path, &arch, &params);
  if (arch.value("type", "") != "logistic") throw ValidationError("model: not a logistic file");
  LogisticClassifier model;
  model.weights_ = std::move(params);
  model.feat_mean_ = arch.at("feat_mean").get<std::vector<double>>();
  model.feat_std_ = arch.at("feat_std").get<std::vector<double>>();
  return model;
}

std::unique_ptr<GraspClassifier> load_classifier(const std::filesystem::path& path) {
  json arch;
  std::vector<double> params;
  read_model_file(path, &arch, &params);
  const std::string type = arch.value("type", "");
  if (type == "convnet") {
    return std::make_unique<ConvNetClassifier>(ConvNetClassifier::load(path));
  }
  if (type == "logistic") {
    return std::make_unique<LogisticClassifier>(LogisticClassifier::load(path));
  }
  throw ValidationError("model: unknown classifier type '" + type + "'");
}

// ---------------------------------------------------------------------------
// Dataset directory I/O
// ---------------------------------------------------------------------------

namespace {

const char* source_name(LabeledExample::Source s) {
  switch (s) {
    case LabeledExample::Source::oracle_force_closure: return "oracle_force_closure";
    case LabeledExample::Source::oracle_collision: return "oracle_collision";
    case LabeledExample::Source::external: return "external";
  }
  return "external";
}

LabeledExample::Source source_from(const std::string& s) {
  if (s == "oracle_force_closure") return LabeledExample::Source::oracle_force_closure;
  if (s == "oracle_collision") return LabeledExample::Source::oracle_collision;
  return LabeledExample::Source::external;
}

}  // namespace

void save_dataset(const std::vector<LabeledExample>& dataset,
                  const std::vector<GraspCandidate>& candidates,
                  const std::filesystem::path& dir, uint64_t config_hash) {
  std::filesystem::create_directories(dir);
  json index;
  index["config_hash"] = config_hash;
  index["examples"] = json::array();
  char name[32];
  for (size_t i = 0; i < dataset.size(); ++i) {
    std::snprintf(name, sizeof(name), "t%05zu.bin", i);
    const GraspCandidate cand = i < candidates.size() ? candidates[i] : GraspCandidate{};
    save_tensor(dataset[i].tensor, cand, dir / name);
    index["examples"].push_back(json{{"tensor", name},
                                     {"label", dataset[i].label},
                                     {"source", source_name(dataset[i].source)}});
  }
  std::ofstream f(dir / "index.json");
  if (!f) throw ValidationError("cannot write dataset index in " + dir.string());
  f << index.dump(2) << "\n";
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream f(dir / "index.json");
  if (!f) throw ValidationError("dataset index not found in " + dir.string());
  json index;
  try {
    f >> index;
  } catch (const json::exception& e) {
    throw ValidationError("dataset index parse error: " + std::string(e.what()));
  }
  std::vector<LabeledExample> out;
  for (const auto& je : index.at("examples")) {
    LabeledExample ex;
    ex.tensor = load_tensor(dir / je.at("tensor").get<std::string>());
    ex.label = je.at("label").get<int>();
    ex.source = source_from(je.value("source", "external"));
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace plenograsp
