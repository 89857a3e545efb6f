#include "longtrack/selfeval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "longtrack/errors.hpp"
#include "longtrack/numerics.hpp"
#include "longtrack/search.hpp"

namespace longtrack {

namespace {

struct Layout {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b;
  std::size_t l1_w, l1_u, l1_b, l2_w, l2_u, l2_b;
  std::size_t m1_w, m1_b, m2_w, m2_b;
  std::size_t total;

  explicit Layout(const SelfEvalDims& d) {
    const std::size_t k2 = d.kernel * d.kernel;
    const std::size_t h = d.hidden;
    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
      const std::size_t at = off;
      off += n;
      return at;
    };
    conv1_w = take(d.conv1_channels * k2);
    conv1_b = take(d.conv1_channels);
    conv2_w = take(d.conv2_channels * d.conv1_channels * k2);
    conv2_b = take(d.conv2_channels);
    l1_w = take(4 * h * d.encoding_size());
    l1_u = take(4 * h * h);
    l1_b = take(4 * h);
    l2_w = take(4 * h * h);
    l2_u = take(4 * h * h);
    l2_b = take(4 * h);
    m1_w = take(d.mlp_hidden * h);
    m1_b = take(d.mlp_hidden);
    m2_w = take(d.mlp_hidden);
    m2_b = take(1);
    total = off;
  }
};

double sigmoid(double x) noexcept { return logistic(x); }

// Activations of one sequence, kept for the backward pass.
struct Trace {
  std::size_t steps = 0;
  std::vector<double> r1;     // steps x c1 x s1 x s1, post-ReLU
  std::vector<double> r2;     // steps x enc, post-ReLU
  std::vector<double> gates1; // steps x 4H, activated i f g o
  std::vector<double> c1, tc1, h1;  // steps x H
  std::vector<double> gates2;
  std::vector<double> c2, tc2, h2;
  std::vector<double> m;      // mlp hidden, post-ReLU
  double logit = 0.0;
};

void conv_valid(const double* in, std::size_t in_ch, std::size_t side,
                const double* w, const double* b, std::size_t out_ch,
                std::size_t k, double* out) {
  const std::size_t os = side - k + 1;
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t r = 0; r < os; ++r) {
      for (std::size_t c = 0; c < os; ++c) {
        double acc = b[o];
        for (std::size_t i = 0; i < in_ch; ++i) {
          const double* wi = w + (o * in_ch + i) * k * k;
          const double* xi = in + i * side * side;
          for (std::size_t kr = 0; kr < k; ++kr) {
            for (std::size_t kc = 0; kc < k; ++kc) {
              acc += wi[kr * k + kc] * xi[(r + kr) * side + c + kc];
            }
          }
        }
        out[(o * os + r) * os + c] = acc > 0.0 ? acc : 0.0;
      }
    }
  }
}

// Gradient of a ReLU-activated valid convolution. `dout` holds dL/d(out)
// and is masked by the activation here; `din` may be null.
void conv_valid_backward(const double* in, std::size_t in_ch, std::size_t side,
                         const double* w, std::size_t out_ch, std::size_t k,
                         const double* out, const double* dout, double* dw,
                         double* db, double* din) {
  const std::size_t os = side - k + 1;
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t r = 0; r < os; ++r) {
      for (std::size_t c = 0; c < os; ++c) {
        const std::size_t idx = (o * os + r) * os + c;
        if (out[idx] <= 0.0) {
          continue;
        }
        const double g = dout[idx];
        if (g == 0.0) {
          continue;
        }
        db[o] += g;
        for (std::size_t i = 0; i < in_ch; ++i) {
          const double* xi = in + i * side * side;
          double* dwi = dw + (o * in_ch + i) * k * k;
          const double* wi = w + (o * in_ch + i) * k * k;
          double* dxi = din != nullptr ? din + i * side * side : nullptr;
          for (std::size_t kr = 0; kr < k; ++kr) {
            for (std::size_t kc = 0; kc < k; ++kc) {
              const std::size_t xidx = (r + kr) * side + c + kc;
              dwi[kr * k + kc] += g * xi[xidx];
              if (dxi != nullptr) {
                dxi[xidx] += g * wi[kr * k + kc];
              }
            }
          }
        }
      }
    }
  }
}

void lstm_forward(const double* w, const double* u, const double* b,
                  std::size_t in, std::size_t h, const double* x,
                  const double* h_prev, const double* c_prev, double* gates,
                  double* c, double* tc, double* hout) {
  for (std::size_t row = 0; row < 4 * h; ++row) {
    double z = b[row];
    const double* wr = w + row * in;
    for (std::size_t k = 0; k < in; ++k) {
      z += wr[k] * x[k];
    }
    const double* ur = u + row * h;
    for (std::size_t k = 0; k < h; ++k) {
      z += ur[k] * h_prev[k];
    }
    gates[row] = z;
  }
  for (std::size_t j = 0; j < h; ++j) {
    const double i = sigmoid(gates[j]);
    const double f = sigmoid(gates[h + j]);
    const double g = std::tanh(gates[2 * h + j]);
    const double o = sigmoid(gates[3 * h + j]);
    gates[j] = i;
    gates[h + j] = f;
    gates[2 * h + j] = g;
    gates[3 * h + j] = o;
    c[j] = f * c_prev[j] + i * g;
    tc[j] = std::tanh(c[j]);
    hout[j] = o * tc[j];
  }
}

// One step of LSTM backprop. dh is the total gradient w.r.t. this step's
// hidden output; dc carries dL/dc from the next step and is updated in place
// to dL/dc_prev. dx and dh_prev receive (not accumulate) input gradients.
void lstm_backward(const double* w, const double* u, std::size_t in,
                   std::size_t h, const double* x, const double* h_prev,
                   const double* c_prev, const double* gates, const double* tc,
                   const double* dh, double* dc, double* dw, double* du,
                   double* db, double* dx, double* dh_prev,
                   std::vector<double>& dz) {
  dz.assign(4 * h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double i = gates[j];
    const double f = gates[h + j];
    const double g = gates[2 * h + j];
    const double o = gates[3 * h + j];
    const double dcj = dc[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
    const double d_o = dh[j] * tc[j];
    dz[j] = dcj * g * i * (1.0 - i);
    dz[h + j] = dcj * c_prev[j] * f * (1.0 - f);
    dz[2 * h + j] = dcj * i * (1.0 - g * g);
    dz[3 * h + j] = d_o * o * (1.0 - o);
    dc[j] = dcj * f;
  }
  std::fill(dx, dx + in, 0.0);
  std::fill(dh_prev, dh_prev + h, 0.0);
  for (std::size_t row = 0; row < 4 * h; ++row) {
    const double d = dz[row];
    db[row] += d;
    if (d == 0.0) {
      continue;
    }
    const double* wr = w + row * in;
    double* dwr = dw + row * in;
    for (std::size_t k = 0; k < in; ++k) {
      dwr[k] += d * x[k];
      dx[k] += d * wr[k];
    }
    const double* ur = u + row * h;
    double* dur = du + row * h;
    for (std::size_t k = 0; k < h; ++k) {
      dur[k] += d * h_prev[k];
      dh_prev[k] += d * ur[k];
    }
  }
}

void check_maps(const SelfEvalDims& d, std::span<const Grid2> maps) {
  if (maps.size() != d.sequence_length) {
    throw ShapeError("selfeval: expected " + std::to_string(d.sequence_length) +
                     " maps, got " + std::to_string(maps.size()));
  }
  for (const Grid2& m : maps) {
    if (m.height() != d.map_side || m.width() != d.map_side) {
      throw ShapeError("selfeval: maps must be " + std::to_string(d.map_side) +
                       "x" + std::to_string(d.map_side));
    }
  }
}

void run_forward(const SelfEvalDims& d, const Layout& L,
                 std::span<const double> p, std::span<const Grid2> maps,
                 Trace& t) {
  check_maps(d, maps);
  const std::size_t K = d.sequence_length;
  const std::size_t H = d.hidden;
  const std::size_t s1 = d.conv1_side();
  const std::size_t n1 = d.conv1_channels * s1 * s1;
  const std::size_t enc = d.encoding_size();
  t.steps = K;
  t.r1.assign(K * n1, 0.0);
  t.r2.assign(K * enc, 0.0);
  t.gates1.assign(K * 4 * H, 0.0);
  t.c1.assign(K * H, 0.0);
  t.tc1.assign(K * H, 0.0);
  t.h1.assign(K * H, 0.0);
  t.gates2.assign(K * 4 * H, 0.0);
  t.c2.assign(K * H, 0.0);
  t.tc2.assign(K * H, 0.0);
  t.h2.assign(K * H, 0.0);
  const std::vector<double> zeros(H, 0.0);

  for (std::size_t s = 0; s < K; ++s) {
    double* r1 = t.r1.data() + s * n1;
    double* r2 = t.r2.data() + s * enc;
    conv_valid(maps[s].data().data(), 1, d.map_side, &p[L.conv1_w],
               &p[L.conv1_b], d.conv1_channels, d.kernel, r1);
    conv_valid(r1, d.conv1_channels, s1, &p[L.conv2_w], &p[L.conv2_b],
               d.conv2_channels, d.kernel, r2);
    const double* h1p = s == 0 ? zeros.data() : t.h1.data() + (s - 1) * H;
    const double* c1p = s == 0 ? zeros.data() : t.c1.data() + (s - 1) * H;
    lstm_forward(&p[L.l1_w], &p[L.l1_u], &p[L.l1_b], enc, H, r2, h1p, c1p,
                 t.gates1.data() + s * 4 * H, t.c1.data() + s * H,
                 t.tc1.data() + s * H, t.h1.data() + s * H);
    const double* h2p = s == 0 ? zeros.data() : t.h2.data() + (s - 1) * H;
    const double* c2p = s == 0 ? zeros.data() : t.c2.data() + (s - 1) * H;
    lstm_forward(&p[L.l2_w], &p[L.l2_u], &p[L.l2_b], H, H,
                 t.h1.data() + s * H, h2p, c2p, t.gates2.data() + s * 4 * H,
                 t.c2.data() + s * H, t.tc2.data() + s * H,
                 t.h2.data() + s * H);
  }
  const double* hk = t.h2.data() + (K - 1) * H;
  t.m.assign(d.mlp_hidden, 0.0);
  double logit = p[L.m2_b];
  for (std::size_t j = 0; j < d.mlp_hidden; ++j) {
    double a = p[L.m1_b + j];
    for (std::size_t k = 0; k < H; ++k) {
      a += p[L.m1_w + j * H + k] * hk[k];
    }
    t.m[j] = a > 0.0 ? a : 0.0;
    logit += p[L.m2_w + j] * t.m[j];
  }
  t.logit = logit;
}

// Accumulates dL/dparams for one sequence given dL/dlogit.
void run_backward(const SelfEvalDims& d, const Layout& L,
                  std::span<const double> p, std::span<const Grid2> maps,
                  const Trace& t, double dlogit, std::span<double> grad) {
  const std::size_t K = d.sequence_length;
  const std::size_t H = d.hidden;
  const std::size_t s1 = d.conv1_side();
  const std::size_t n1 = d.conv1_channels * s1 * s1;
  const std::size_t enc = d.encoding_size();
  const std::vector<double> zeros(H, 0.0);

  std::vector<double> dh2(H, 0.0);
  grad[L.m2_b] += dlogit;
  const double* hk = t.h2.data() + (K - 1) * H;
  for (std::size_t j = 0; j < d.mlp_hidden; ++j) {
    grad[L.m2_w + j] += dlogit * t.m[j];
    if (t.m[j] <= 0.0) {
      continue;
    }
    const double dm = dlogit * p[L.m2_w + j];
    grad[L.m1_b + j] += dm;
    for (std::size_t k = 0; k < H; ++k) {
      grad[L.m1_w + j * H + k] += dm * hk[k];
      dh2[k] += dm * p[L.m1_w + j * H + k];
    }
  }

  std::vector<double> dc2(H, 0.0);
  std::vector<double> dc1(H, 0.0);
  std::vector<double> dh1_next(H, 0.0);
  std::vector<double> dh1(H, 0.0);
  std::vector<double> dh2_prev(H, 0.0);
  std::vector<double> dh1_prev(H, 0.0);
  std::vector<double> de(enc, 0.0);
  std::vector<double> dr1(n1, 0.0);
  std::vector<double> dz;
  for (std::size_t s = K; s-- > 0;) {
    const double* h1s = t.h1.data() + s * H;
    const double* h2p = s == 0 ? zeros.data() : t.h2.data() + (s - 1) * H;
    const double* c2p = s == 0 ? zeros.data() : t.c2.data() + (s - 1) * H;
    lstm_backward(&p[L.l2_w], &p[L.l2_u], H, H, h1s, h2p, c2p,
                  t.gates2.data() + s * 4 * H, t.tc2.data() + s * H,
                  dh2.data(), dc2.data(), &grad[L.l2_w], &grad[L.l2_u],
                  &grad[L.l2_b], dh1.data(), dh2_prev.data(), dz);
    for (std::size_t k = 0; k < H; ++k) {
      dh1[k] += dh1_next[k];
    }
    const double* r2 = t.r2.data() + s * enc;
    const double* h1p = s == 0 ? zeros.data() : t.h1.data() + (s - 1) * H;
    const double* c1p = s == 0 ? zeros.data() : t.c1.data() + (s - 1) * H;
    lstm_backward(&p[L.l1_w], &p[L.l1_u], enc, H, r2, h1p, c1p,
                  t.gates1.data() + s * 4 * H, t.tc1.data() + s * H,
                  dh1.data(), dc1.data(), &grad[L.l1_w], &grad[L.l1_u],
                  &grad[L.l1_b], de.data(), dh1_prev.data(), dz);

    const double* r1 = t.r1.data() + s * n1;
    std::fill(dr1.begin(), dr1.end(), 0.0);
    conv_valid_backward(r1, d.conv1_channels, s1, &p[L.conv2_w],
                        d.conv2_channels, d.kernel, r2, de.data(),
                        &grad[L.conv2_w], &grad[L.conv2_b], dr1.data());
    conv_valid_backward(maps[s].data().data(), 1, d.map_side, &p[L.conv1_w],
                        d.conv1_channels, d.kernel, r1, dr1.data(),
                        &grad[L.conv1_w], &grad[L.conv1_b], nullptr);

    dh2.swap(dh2_prev);
    dh1_next.swap(dh1_prev);
  }
}

double clamp_probability(double g) noexcept {
  return std::clamp(g, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

double sample_loss(double g, int label, double weight) noexcept {
  const double gc = clamp_probability(g);
  return -weight * (label == 1 ? std::log(gc) : std::log(1.0 - gc));
}

void fill_uniform(std::span<double> out, double limit, Rng& rng) {
  for (double& v : out) {
    v = rng.uniform(-limit, limit);
  }
}

}  // namespace

std::size_t SelfEvalDims::parameter_count() const noexcept {
  return Layout(*this).total;
}

void SelfEvalDims::validate() const {
  if (sequence_length == 0 || kernel == 0 || hidden == 0 || mlp_hidden == 0 ||
      conv1_channels == 0 || conv2_channels == 0 ||
      map_side < 2 * kernel - 1) {
    throw ConfigError("selfeval: invalid layer dimensions");
  }
}

SelfEvalNet::SelfEvalNet(SelfEvalDims dims) : dims_(dims) {
  dims_.validate();
  params_.assign(dims_.parameter_count(), 0.0);
}

SelfEvalNet SelfEvalNet::initialized(SelfEvalDims dims, std::uint64_t seed) {
  SelfEvalNet net(dims);
  const Layout L(dims);
  Rng rng(seed);
  auto p = net.params();
  const std::size_t k2 = dims.kernel * dims.kernel;
  const std::size_t H = dims.hidden;
  const std::size_t enc = dims.encoding_size();
  auto he = [](std::size_t fan_in) {
    return std::sqrt(6.0 / static_cast<double>(fan_in));
  };
  auto xavier = [](std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  };
  fill_uniform(p.subspan(L.conv1_w, dims.conv1_channels * k2), he(k2), rng);
  fill_uniform(p.subspan(L.conv2_w, dims.conv2_channels * dims.conv1_channels * k2),
               he(dims.conv1_channels * k2), rng);
  fill_uniform(p.subspan(L.l1_w, 4 * H * enc), xavier(enc, H), rng);
  fill_uniform(p.subspan(L.l1_u, 4 * H * H), xavier(H, H), rng);
  fill_uniform(p.subspan(L.l2_w, 4 * H * H), xavier(H, H), rng);
  fill_uniform(p.subspan(L.l2_u, 4 * H * H), xavier(H, H), rng);
  fill_uniform(p.subspan(L.m1_w, dims.mlp_hidden * H), he(H), rng);
  fill_uniform(p.subspan(L.m2_w, dims.mlp_hidden),
               xavier(dims.mlp_hidden, 1), rng);
  for (std::size_t j = 0; j < H; ++j) {
    p[L.l1_b + H + j] = 1.0;
    p[L.l2_b + H + j] = 1.0;
  }
  return net;
}

double SelfEvalNet::forward(std::span<const Grid2> maps) const {
  Trace t;
  run_forward(dims_, Layout(dims_), params_, maps, t);
  return logistic(t.logit);
}

EvalSample EvalSample::make(std::vector<Grid2> maps, double iou,
                            std::size_t group) {
  EvalSample s;
  s.maps = std::move(maps);
  s.iou = iou;
  s.label = iou > 0.5 ? 1 : 0;
  s.group = group;
  return s;
}

double loss(const SelfEvalNet& net, std::span<const EvalSample> batch,
            const SampleWeights& weights) {
  if (batch.empty()) {
    throw DataError("selfeval loss: empty batch");
  }
  double total = 0.0;
  for (const EvalSample& s : batch) {
    total += sample_loss(net.forward(s.maps), s.label, weights.for_iou(s.iou));
  }
  return total / static_cast<double>(batch.size());
}

LossAndGradient backward(const SelfEvalNet& net,
                         std::span<const EvalSample> batch,
                         const SampleWeights& weights) {
  if (batch.empty()) {
    throw DataError("selfeval backward: empty batch");
  }
  const SelfEvalDims& d = net.dims();
  const Layout L(d);
  LossAndGradient out;
  out.gradient.assign(L.total, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Trace t;
  for (const EvalSample& s : batch) {
    run_forward(d, L, net.params(), s.maps, t);
    const double g = logistic(t.logit);
    const double w = weights.for_iou(s.iou);
    out.loss += sample_loss(g, s.label, w) * inv_n;
    const bool clamped = g <= kProbabilityClamp || g >= 1.0 - kProbabilityClamp;
    const double dlogit =
        clamped ? 0.0 : w * (g - static_cast<double>(s.label)) * inv_n;
    if (dlogit != 0.0) {
      run_backward(d, L, net.params(), s.maps, t, dlogit, out.gradient);
    }
  }
  return out;
}

double accuracy(const SelfEvalNet& net, std::span<const EvalSample> samples) {
  if (samples.empty()) {
    return 0.0;
  }
  std::size_t hits = 0;
  for (const EvalSample& s : samples) {
    const int predicted = net.forward(s.maps) >= 0.5 ? 1 : 0;
    hits += predicted == s.label ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainResult train(std::span<const EvalSample> dataset,
                  const TrainConfig& config) {
  const bool has_pos = std::any_of(dataset.begin(), dataset.end(),
                                   [](const EvalSample& s) { return s.label == 1; });
  const bool has_neg = std::any_of(dataset.begin(), dataset.end(),
                                   [](const EvalSample& s) { return s.label == 0; });
  if (!has_pos || !has_neg) {
    throw DataError("train-selfeval: dataset must contain both classes");
  }
  if (config.batch_size == 0) {
    throw ConfigError("train-selfeval: batch size must be positive");
  }

  // Split by source video so validation sequences are unseen.
  std::set<std::size_t> group_set;
  for (const EvalSample& s : dataset) {
    group_set.insert(s.group);
  }
  std::vector<std::size_t> groups(group_set.begin(), group_set.end());
  Rng split_rng(config.seed ^ 0x5bd1e995ULL);
  for (std::size_t k = groups.size(); k > 1; --k) {
    std::swap(groups[k - 1], groups[split_rng.below(k)]);
  }
  std::size_t val_groups = static_cast<std::size_t>(std::llround(
      config.validation_fraction * static_cast<double>(groups.size())));
  if (groups.size() >= 2) {
    val_groups = std::clamp<std::size_t>(val_groups, 1, groups.size() - 1);
  } else {
    val_groups = 0;
  }
  const std::set<std::size_t> validation_set(groups.begin(),
                                             groups.begin() + val_groups);
  std::vector<EvalSample> train_set;
  std::vector<EvalSample> val_set;
  for (const EvalSample& s : dataset) {
    (validation_set.count(s.group) != 0 ? val_set : train_set).push_back(s);
  }
  if (val_set.empty()) {
    val_set = train_set;
  }

  TrainResult result;
  result.net = SelfEvalNet::initialized(config.dims, config.seed);
  result.train_size = train_set.size();
  result.validation_size = val_set.size();
  SelfEvalNet net = result.net;
  SgdMomentumState opt(net.params().size(), config.learning_rate,
                       config.momentum);
  Rng order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EvalSample> batch;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[order_rng.below(k)]);
    }
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(train_set[order[k]]);
        if (config.augment) {
          const auto sym = static_cast<unsigned>(order_rng.below(8));
          for (Grid2& m : batch.back().maps) {
            m = dihedral(m, sym);
          }
        }
      }
      LossAndGradient lg = backward(net, batch, config.weights);
      if (config.weight_decay > 0.0) {
        const auto p = net.params();
        for (std::size_t k = 0; k < p.size(); ++k) {
          lg.gradient[k] += config.weight_decay * p[k];
        }
      }
      if (!all_finite(lg.gradient)) {
        throw NumericError("train-selfeval: non-finite gradient at epoch " +
                           std::to_string(epoch));
      }
      sgd_momentum_step_inplace(net.params(), lg.gradient, opt);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss(net, train_set, config.weights);
    m.train_accuracy = accuracy(net, train_set);
    m.validation_loss = loss(net, val_set, config.weights);
    m.validation_accuracy = accuracy(net, val_set);
    result.history.push_back(m);
    if (!have_best || m.validation_accuracy > result.best_validation_accuracy) {
      have_best = true;
      result.best_validation_accuracy = m.validation_accuracy;
      result.best_epoch = epoch;
      result.net = net;
    }
  }
  return result;
}

bool approve(const SelfEvalNet& net, const TrackerState& state) {
  const std::size_t k = net.dims().sequence_length;
  if (state.map_history.size() < k) {
    return false;
  }
  std::vector<Grid2> maps;
  maps.reserve(k);
  for (auto it = state.map_history.end() - static_cast<long>(k);
       it != state.map_history.end(); ++it) {
    maps.push_back(canonicalize_map(*it, net.dims().map_side));
  }
  return net.forward(maps) >= 0.5;
}

Grid2 dihedral(const Grid2& map, unsigned k) {
  if (k == 0) {
    return map;
  }
  const bool transpose = (k & 4U) != 0;
  const bool flip_r = (k & 1U) != 0;
  const bool flip_c = (k & 2U) != 0;
  const std::size_t h = map.height();
  const std::size_t w = map.width();
  Grid2 out(transpose ? w : h, transpose ? h : w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t rr = flip_r ? h - 1 - r : r;
      const std::size_t cc = flip_c ? w - 1 - c : c;
      if (transpose) {
        out(cc, rr) = map(r, c);
      } else {
        out(rr, cc) = map(r, c);
      }
    }
  }
  return out;
}

Grid2 canonicalize_map(const Grid2& map, std::size_t side) {
  if (map.height() == side && map.width() == side) {
    return map;
  }
  if (map.empty() || side == 0) {
    throw ShapeError("canonicalize_map: empty map");
  }
  Grid2 out(side, side);
  auto coord = [side](std::size_t i, std::size_t n) {
    return side == 1 ? 0.5 * static_cast<double>(n - 1)
                     : static_cast<double>(i) * static_cast<double>(n - 1) /
                           static_cast<double>(side - 1);
  };
  for (std::size_t r = 0; r < side; ++r) {
    const double y = coord(r, map.height());
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, map.height() - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < side; ++c) {
      const double x = coord(c, map.width());
      const auto x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, map.width() - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = map(y0, x0) + (map(y0, x1) - map(y0, x0)) * fx;
      const double bot = map(y1, x0) + (map(y1, x1) - map(y1, x0)) * fx;
      out(r, c) = top + (bot - top) * fy;
    }
  }
  return out;
}

namespace {

constexpr const char* kModelFormat = "longtrack-selfeval";
constexpr int kModelVersion = 1;

void write_le_double(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int k = 0; k < 8; ++k) {
    bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
  }
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le_double(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) {
    throw DataError("selfeval model: truncated parameter block");
  }
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) {
    bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_model(const SelfEvalNet& net, const std::filesystem::path& path) {
  const SelfEvalDims& d = net.dims();
  nlohmann::json header = {
      {"format", kModelFormat},
      {"version", kModelVersion},
      {"K", d.sequence_length},
      {"map_side", d.map_side},
      {"kernel", d.kernel},
      {"conv1_channels", d.conv1_channels},
      {"conv2_channels", d.conv2_channels},
      {"lstm_layers", 2},
      {"lstm_hidden", d.hidden},
      {"mlp_hidden", d.mlp_hidden},
      {"param_count", net.params().size()},
      {"dtype", "float64-le"},
  };
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw DataError("selfeval model: cannot write " + path.string());
  }
  os << header.dump() << '\n';
  for (const double v : net.params()) {
    write_le_double(os, v);
  }
  if (!os) {
    throw DataError("selfeval model: write failed for " + path.string());
  }
}

SelfEvalNet load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw DataError("selfeval model: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(is, line)) {
    throw DataError("selfeval model: missing header in " + path.string());
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("selfeval model: malformed header in " + path.string() +
                    ": " + e.what());
  }
  try {
    if (header.at("format").get<std::string>() != kModelFormat ||
        header.at("version").get<int>() != kModelVersion) {
      throw DataError("selfeval model: unsupported format/version in " +
                      path.string());
    }
    SelfEvalDims d;
    d.sequence_length = header.at("K").get<std::size_t>();
    d.map_side = header.at("map_side").get<std::size_t>();
    d.kernel = header.at("kernel").get<std::size_t>();
    d.conv1_channels = header.at("conv1_channels").get<std::size_t>();
    d.conv2_channels = header.at("conv2_channels").get<std::size_t>();
    d.hidden = header.at("lstm_hidden").get<std::size_t>();
    d.mlp_hidden = header.at("mlp_hidden").get<std::size_t>();
    SelfEvalNet net(d);
    if (header.at("param_count").get<std::size_t>() != net.params().size()) {
      throw DataError("selfeval model: parameter count mismatch in " +
                      path.string());
    }
    for (double& v : net.params()) {
      v = read_le_double(is);
    }
    if (!all_finite(net.params())) {
      throw DataError("selfeval model: non-finite parameters in " +
                      path.string());
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("selfeval model: bad header field in " + path.string() +
                    ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("selfeval model: ") + e.what());
  }
}

}  // namespace longtrack
