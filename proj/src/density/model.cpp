#include "fastdad/density/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "fastdad/simd/kernels.hpp"

namespace fastdad::density {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitScale = 0.02;
constexpr std::size_t kTensorsPerLayer = 15;
constexpr std::size_t kGlobalHead = 3;  // emb_w, emb_b, mask

enum LayerTensor : std::size_t {
  kLn1G, kLn1B, kWq, kBq, kWk, kWv, kBv, kWo, kBo, kLn2G, kLn2B, kW1, kB1, kW2, kB2
};
enum FinalTensor : std::size_t { kLnfG, kLnfB, kHeadW, kHeadB };

void layer_norm_forward(const double* x, const double* gamma, const double* beta, double* y,
                        double* xhat, double* rstd, std::size_t rows, std::size_t width) {
  const double inv_w = 1.0 / static_cast<double>(width);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * width;
    double mean = 0.0;
    for (std::size_t j = 0; j < width; ++j) mean += xr[j];
    mean *= inv_w;
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var *= inv_w;
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd[r] = rs;
    double* xh = xhat + r * width;
    double* yr = y + r * width;
    for (std::size_t j = 0; j < width; ++j) {
      xh[j] = (xr[j] - mean) * rs;
      yr[j] = xh[j] * gamma[j] + beta[j];
    }
  }
}

// Accumulates dx (+=), dgamma, dbeta.
void layer_norm_backward(const double* dy, const double* xhat, const double* rstd, const double* gamma,
                         double* dx, double* dgamma, double* dbeta, std::size_t rows,
                         std::size_t width, std::vector<double>& scratch) {
  const double inv_w = 1.0 / static_cast<double>(width);
  scratch.resize(width);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * width;
    const double* xh = xhat + r * width;
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double dxh = dyr[j] * gamma[j];
      scratch[j] = dxh;
      mean_d += dxh;
      mean_dx += dxh * xh[j];
      dgamma[j] += dyr[j] * xh[j];
      dbeta[j] += dyr[j];
    }
    mean_d *= inv_w;
    mean_dx *= inv_w;
    double* dxr = dx + r * width;
    for (std::size_t j = 0; j < width; ++j) dxr[j] += rstd[r] * (scratch[j] - mean_d - xh[j] * mean_dx);
  }
}

void add_bias(double* x, const double* bias, std::size_t rows, std::size_t width) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* xr = x + r * width;
    for (std::size_t j = 0; j < width; ++j) xr[j] += bias[j];
  }
}

void sum_rows_into(const double* g, double* out, std::size_t rows, std::size_t width) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g + r * width;
    for (std::size_t j = 0; j < width; ++j) out[j] += gr[j];
  }
}

double log_sum_exp(const double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, v[k]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(v[k] - mx);
  return mx + std::log(s);
}

double truncated_normal(Rng& rng, double scale) {
  std::normal_distribution<double> dist(0.0, 1.0);
  double z;
  do {
    z = dist(rng);
  } while (std::abs(z) > 2.0);
  return z * scale;
}

// Inverse standard normal CDF (Acklam's rational approximation), used to
// spread the initial component means.
double normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) return -normal_quantile(1 - p);
  const double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace

std::vector<double> positional_encoding(std::size_t d_hidden, std::size_t position) {
  if (d_hidden == 0 || d_hidden % 2 != 0) throw std::invalid_argument("positional_encoding: d_hidden must be even");
  std::vector<double> out(d_hidden);
  const double pos = static_cast<double>(position);
  for (std::size_t j = 0; j < d_hidden / 2; ++j) {
    const double angle = pos / std::pow(10000.0, static_cast<double>(2 * j) / static_cast<double>(d_hidden));
    out[2 * j] = std::sin(angle);
    out[2 * j + 1] = std::cos(angle);
  }
  return out;
}

struct DensityModel::Workspace {
  struct LayerCache {
    std::vector<double> xhat1, rstd1, a, q, k, v, probs, ctx, mask1;
    std::vector<double> xhat2, rstd2, c, u, z, mask2;
  };
  std::size_t rows = 0;
  std::vector<LayerCache> layers;
  std::vector<double> h;        // running residual stream (rows*P x H)
  std::vector<double> xhatf, rstdf, y, head;
  // backward scratch
  std::vector<double> dh, dtmp, dffn, dq, dk, dv, dctx, dy, dhead, ln_scratch;
};

DensityModel::DensityModel(ModelConfig config, data::ModelSpace space, std::uint64_t seed)
    : config_(config), space_(std::move(space)) {
  config_.validate();
  if (space_.dim() < 1) throw std::invalid_argument("density model needs at least one feature");
  build_layout();
  initialize(seed);
}

void DensityModel::build_layout() {
  const std::size_t d = dim(), H = config_.d_hidden, F = config_.d_ffn(), K = config_.n_components;
  tensors_.clear();
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    std::size_t size = 1;
    for (auto s : shape) size *= s;
    tensors_.push_back({std::move(name), std::move(shape), offset, size});
    offset += size;
  };
  add("embed.weight", {d, H});
  add("embed.bias", {d, H});
  add("mask_token", {H});
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1.gamma", {H});
    add(p + "ln1.beta", {H});
    add(p + "attn.wq", {H, H});
    add(p + "attn.bq", {H});
    add(p + "attn.wk", {H, H});  // no key bias: softmax cancels it
    add(p + "attn.wv", {H, H});
    add(p + "attn.bv", {H});
    add(p + "attn.wo", {H, H});
    add(p + "attn.bo", {H});
    add(p + "ln2.gamma", {H});
    add(p + "ln2.beta", {H});
    add(p + "ffn.w1", {H, F});
    add(p + "ffn.b1", {F});
    add(p + "ffn.w2", {F, H});
    add(p + "ffn.b2", {H});
  }
  add("final_ln.gamma", {H});
  add("final_ln.beta", {H});
  add("head.weight", {H, 3 * K});
  add("head.bias", {3 * K});
  params_.assign(offset, 0.0);

  pe_.assign(d * H, 0.0);
  for (std::size_t p = 0; p < d; ++p) {
    const auto row = positional_encoding(H, p);
    std::copy(row.begin(), row.end(), pe_.begin() + static_cast<std::ptrdiff_t>(p * H));
  }
}

void DensityModel::initialize(std::uint64_t seed) {
  Rng rng = make_stream(seed, {0xD0E5171ULL});
  auto fill_normal = [&](const std::string& name) {
    for (double& v : mutable_tensor(name)) v = truncated_normal(rng, kInitScale);
  };
  auto fill_const = [&](const std::string& name, double value) {
    auto t = mutable_tensor(name);
    std::fill(t.begin(), t.end(), value);
  };
  fill_normal("embed.weight");
  fill_normal("mask_token");
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    fill_const(p + "ln1.gamma", 1.0);
    fill_const(p + "ln2.gamma", 1.0);
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo", "ffn.w1", "ffn.w2"}) fill_normal(p + w);
  }
  fill_const("final_ln.gamma", 1.0);
  // Zero head: uniform weights and sigma = softplus(0) + floor. Component
  // means start at evenly spaced standard-normal quantiles so that the
  // components are distinguishable from the first step on.
  const std::size_t K = config_.n_components;
  auto bias = mutable_tensor("head.bias");
  for (std::size_t k = 0; k < K; ++k) {
    bias[K + k] = K == 1 ? 0.0 : normal_quantile((static_cast<double>(k) + 0.5) / static_cast<double>(K));
  }
}

const TensorInfo& DensityModel::tensor_info(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("unknown tensor: " + name);
}

std::span<const double> DensityModel::tensor(const std::string& name) const {
  const auto& t = tensor_info(name);
  return {params_.data() + t.offset, t.size};
}

std::span<double> DensityModel::mutable_tensor(const std::string& name) {
  const auto& t = tensor_info(name);
  return {params_.data() + t.offset, t.size};
}

void DensityModel::check_batch(std::span<const double> batch, std::size_t masked) const {
  const std::size_t d = dim();
  if (masked >= d) throw std::out_of_range("masked feature index out of range");
  if (batch.size() % d != 0) throw std::invalid_argument("batch size is not a multiple of the feature count");
  for (std::size_t idx = 0; idx < batch.size(); ++idx) {
    // The masked cell is never read, so it may hold anything.
    if (idx % d != masked && !std::isfinite(batch[idx])) {
      throw std::invalid_argument("non-finite value in density model input");
    }
  }
}

void DensityModel::run_forward(std::span<const double> batch, std::size_t masked, Workspace& ws,
                               Rng* dropout_rng) const {
  const std::size_t P = dim(), H = config_.d_hidden, F = config_.d_ffn(), K3 = 3 * config_.n_components;
  const std::size_t nh = config_.n_heads, hd = config_.head_dim();
  const std::size_t B = batch.size() / P, N = B * P;
  const double* prm = params_.data();
  auto T = [&](std::size_t idx) { return prm + tensors_[idx].offset; };
  const double drop = dropout_rng ? config_.dropout : 0.0;
  const double keep_scale = drop > 0.0 ? 1.0 / (1.0 - drop) : 1.0;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  ws.rows = B;
  ws.layers.resize(config_.n_layers);
  ws.h.assign(N * H, 0.0);

  // Embedding.
  const double* emb_w = T(0);
  const double* emb_b = T(1);
  const double* mask_tok = T(2);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < P; ++p) {
      double* hr = ws.h.data() + (b * P + p) * H;
      const double* pe = pe_.data() + p * H;
      if (p == masked) {
        for (std::size_t j = 0; j < H; ++j) hr[j] = mask_tok[j] + pe[j];
      } else {
        const double x = batch[b * P + p];
        const double* w = emb_w + p * H;
        const double* bb = emb_b + p * H;
        for (std::size_t j = 0; j < H; ++j) hr[j] = x * w[j] + bb[j] + pe[j];
      }
    }
  }

  auto draw_mask = [&](std::vector<double>& mask, std::size_t n) {
    if (drop <= 0.0) {
      mask.clear();
      return;
    }
    mask.resize(n);
    std::bernoulli_distribution keep(1.0 - drop);
    for (double& m : mask) m = keep(*dropout_rng) ? keep_scale : 0.0;
  };

  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    auto& lc = ws.layers[l];
    const std::size_t base = kGlobalHead + kTensorsPerLayer * l;
    auto LT = [&](std::size_t t) { return T(base + t); };

    lc.xhat1.resize(N * H);
    lc.rstd1.resize(N);
    lc.a.resize(N * H);
    layer_norm_forward(ws.h.data(), LT(kLn1G), LT(kLn1B), lc.a.data(), lc.xhat1.data(), lc.rstd1.data(), N, H);

    lc.q.assign(N * H, 0.0);
    lc.k.assign(N * H, 0.0);
    lc.v.assign(N * H, 0.0);
    simd::matmul_acc(lc.a.data(), LT(kWq), lc.q.data(), N, H, H);
    simd::matmul_acc(lc.a.data(), LT(kWk), lc.k.data(), N, H, H);
    simd::matmul_acc(lc.a.data(), LT(kWv), lc.v.data(), N, H, H);
    add_bias(lc.q.data(), LT(kBq), N, H);
    add_bias(lc.v.data(), LT(kBv), N, H);

    // Attention; the masked position is never a key or value.
    lc.probs.assign(B * nh * P * P, 0.0);
    lc.ctx.assign(N * H, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t hh = 0; hh < nh; ++hh) {
        for (std::size_t p = 0; p < P; ++p) {
          double* pr = lc.probs.data() + ((b * nh + hh) * P + p) * P;
          const double* qp = lc.q.data() + (b * P + p) * H + hh * hd;
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t t = 0; t < P; ++t) {
            if (t == masked) continue;
            const double* kt = lc.k.data() + (b * P + t) * H + hh * hd;
            double s = 0.0;
            for (std::size_t e = 0; e < hd; ++e) s += qp[e] * kt[e];
            pr[t] = s * attn_scale;
            mx = std::max(mx, pr[t]);
          }
          if (P == 1) continue;  // no keys: zero context
          double z = 0.0;
          for (std::size_t t = 0; t < P; ++t) {
            if (t == masked) continue;
            pr[t] = std::exp(pr[t] - mx);
            z += pr[t];
          }
          double* cp = lc.ctx.data() + (b * P + p) * H + hh * hd;
          for (std::size_t t = 0; t < P; ++t) {
            if (t == masked) continue;
            pr[t] /= z;
            const double* vt = lc.v.data() + (b * P + t) * H + hh * hd;
            for (std::size_t e = 0; e < hd; ++e) cp[e] += pr[t] * vt[e];
          }
        }
      }
    }

    std::vector<double>& o = ws.dtmp;  // reuse as scratch
    o.assign(N * H, 0.0);
    simd::matmul_acc(lc.ctx.data(), LT(kWo), o.data(), N, H, H);
    add_bias(o.data(), LT(kBo), N, H);
    draw_mask(lc.mask1, N * H);
    if (lc.mask1.empty()) {
      for (std::size_t idx = 0; idx < N * H; ++idx) ws.h[idx] += o[idx];
    } else {
      for (std::size_t idx = 0; idx < N * H; ++idx) ws.h[idx] += o[idx] * lc.mask1[idx];
    }

    lc.xhat2.resize(N * H);
    lc.rstd2.resize(N);
    lc.c.resize(N * H);
    layer_norm_forward(ws.h.data(), LT(kLn2G), LT(kLn2B), lc.c.data(), lc.xhat2.data(), lc.rstd2.data(), N, H);
    lc.u.assign(N * F, 0.0);
    simd::matmul_acc(lc.c.data(), LT(kW1), lc.u.data(), N, H, F);
    add_bias(lc.u.data(), LT(kB1), N, F);
    lc.z.resize(N * F);
    for (std::size_t idx = 0; idx < N * F; ++idx) lc.z[idx] = lc.u[idx] > 0.0 ? lc.u[idx] : 0.0;
    std::vector<double>& f = ws.dtmp;
    f.assign(N * H, 0.0);
    simd::matmul_acc(lc.z.data(), LT(kW2), f.data(), N, F, H);
    add_bias(f.data(), LT(kB2), N, H);
    draw_mask(lc.mask2, N * H);
    if (lc.mask2.empty()) {
      for (std::size_t idx = 0; idx < N * H; ++idx) ws.h[idx] += f[idx];
    } else {
      for (std::size_t idx = 0; idx < N * H; ++idx) ws.h[idx] += f[idx] * lc.mask2[idx];
    }
  }

  // Final norm and head, at the masked position only.
  const std::size_t fbase = kGlobalHead + kTensorsPerLayer * config_.n_layers;
  std::vector<double>& hm = ws.dtmp;
  hm.resize(B * H);
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(ws.h.data() + (b * P + masked) * H, H, hm.data() + b * H);
  }
  ws.xhatf.resize(B * H);
  ws.rstdf.resize(B);
  ws.y.resize(B * H);
  layer_norm_forward(hm.data(), T(fbase + kLnfG), T(fbase + kLnfB), ws.y.data(), ws.xhatf.data(),
                     ws.rstdf.data(), B, H);
  ws.head.assign(B * K3, 0.0);
  simd::matmul_acc(ws.y.data(), T(fbase + kHeadW), ws.head.data(), B, H, K3);
  add_bias(ws.head.data(), T(fbase + kHeadB), B, K3);
}

void DensityModel::run_backward(std::span<const double> batch, std::size_t masked, Workspace& ws,
                                std::span<double> grad) const {
  const std::size_t P = dim(), H = config_.d_hidden, F = config_.d_ffn(), K3 = 3 * config_.n_components;
  const std::size_t nh = config_.n_heads, hd = config_.head_dim();
  const std::size_t B = ws.rows, N = B * P;
  const double* prm = params_.data();
  auto T = [&](std::size_t idx) { return prm + tensors_[idx].offset; };
  auto G = [&](std::size_t idx) { return grad.data() + tensors_[idx].offset; };
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // Head and final norm. ws.dhead holds dL/dhead on entry.
  const std::size_t fbase = kGlobalHead + kTensorsPerLayer * config_.n_layers;
  simd::matmul_at_acc(ws.y.data(), ws.dhead.data(), G(fbase + kHeadW), B, H, K3);
  sum_rows_into(ws.dhead.data(), G(fbase + kHeadB), B, K3);
  ws.dy.assign(B * H, 0.0);
  simd::matmul_bt_acc(ws.dhead.data(), T(fbase + kHeadW), ws.dy.data(), B, H, K3);
  std::vector<double> dhm(B * H, 0.0);
  layer_norm_backward(ws.dy.data(), ws.xhatf.data(), ws.rstdf.data(), T(fbase + kLnfG), dhm.data(),
                      G(fbase + kLnfG), G(fbase + kLnfB), B, H, ws.ln_scratch);
  ws.dh.assign(N * H, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(dhm.data() + b * H, H, ws.dh.data() + (b * P + masked) * H);
  }

  for (std::size_t l = config_.n_layers; l-- > 0;) {
    auto& lc = ws.layers[l];
    const std::size_t base = kGlobalHead + kTensorsPerLayer * l;
    auto LT = [&](std::size_t t) { return T(base + t); };
    auto LG = [&](std::size_t t) { return G(base + t); };

    // Feedforward sub-block: h += drop(W2 relu(W1 LN2(h) + b1) + b2).
    std::vector<double>& df = ws.dtmp;
    df.assign(ws.dh.begin(), ws.dh.end());
    if (!lc.mask2.empty()) {
      for (std::size_t idx = 0; idx < N * H; ++idx) df[idx] *= lc.mask2[idx];
    }
    simd::matmul_at_acc(lc.z.data(), df.data(), LG(kW2), N, F, H);
    sum_rows_into(df.data(), LG(kB2), N, H);
    ws.dffn.assign(N * F, 0.0);
    simd::matmul_bt_acc(df.data(), LT(kW2), ws.dffn.data(), N, F, H);
    for (std::size_t idx = 0; idx < N * F; ++idx) {
      if (lc.u[idx] <= 0.0) ws.dffn[idx] = 0.0;
    }
    simd::matmul_at_acc(lc.c.data(), ws.dffn.data(), LG(kW1), N, H, F);
    sum_rows_into(ws.dffn.data(), LG(kB1), N, F);
    std::vector<double> dc(N * H, 0.0);
    simd::matmul_bt_acc(ws.dffn.data(), LT(kW1), dc.data(), N, H, F);
    layer_norm_backward(dc.data(), lc.xhat2.data(), lc.rstd2.data(), LT(kLn2G), ws.dh.data(), LG(kLn2G),
                        LG(kLn2B), N, H, ws.ln_scratch);

    // Attention sub-block: h += drop(Wo attn(LN1(h)) + bo).
    std::vector<double>& dout = ws.dtmp;
    dout.assign(ws.dh.begin(), ws.dh.end());
    if (!lc.mask1.empty()) {
      for (std::size_t idx = 0; idx < N * H; ++idx) dout[idx] *= lc.mask1[idx];
    }
    simd::matmul_at_acc(lc.ctx.data(), dout.data(), LG(kWo), N, H, H);
    sum_rows_into(dout.data(), LG(kBo), N, H);
    ws.dctx.assign(N * H, 0.0);
    simd::matmul_bt_acc(dout.data(), LT(kWo), ws.dctx.data(), N, H, H);

    ws.dq.assign(N * H, 0.0);
    ws.dk.assign(N * H, 0.0);
    ws.dv.assign(N * H, 0.0);
    if (P > 1) {
      std::vector<double> dp(P);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t hh = 0; hh < nh; ++hh) {
          for (std::size_t p = 0; p < P; ++p) {
            const double* pr = lc.probs.data() + ((b * nh + hh) * P + p) * P;
            const double* dcp = ws.dctx.data() + (b * P + p) * H + hh * hd;
            double weighted = 0.0;
            for (std::size_t t = 0; t < P; ++t) {
              if (t == masked) continue;
              const double* vt = lc.v.data() + (b * P + t) * H + hh * hd;
              double* dvt = ws.dv.data() + (b * P + t) * H + hh * hd;
              double s = 0.0;
              for (std::size_t e = 0; e < hd; ++e) {
                s += dcp[e] * vt[e];
                dvt[e] += pr[t] * dcp[e];
              }
              dp[t] = s;
              weighted += pr[t] * s;
            }
            const double* qp = lc.q.data() + (b * P + p) * H + hh * hd;
            double* dqp = ws.dq.data() + (b * P + p) * H + hh * hd;
            for (std::size_t t = 0; t < P; ++t) {
              if (t == masked) continue;
              const double ds = pr[t] * (dp[t] - weighted) * attn_scale;
              const double* kt = lc.k.data() + (b * P + t) * H + hh * hd;
              double* dkt = ws.dk.data() + (b * P + t) * H + hh * hd;
              for (std::size_t e = 0; e < hd; ++e) {
                dqp[e] += ds * kt[e];
                dkt[e] += ds * qp[e];
              }
            }
          }
        }
      }
    }
    simd::matmul_at_acc(lc.a.data(), ws.dq.data(), LG(kWq), N, H, H);
    simd::matmul_at_acc(lc.a.data(), ws.dk.data(), LG(kWk), N, H, H);
    simd::matmul_at_acc(lc.a.data(), ws.dv.data(), LG(kWv), N, H, H);
    sum_rows_into(ws.dq.data(), LG(kBq), N, H);
    sum_rows_into(ws.dv.data(), LG(kBv), N, H);
    std::vector<double> da(N * H, 0.0);
    simd::matmul_bt_acc(ws.dq.data(), LT(kWq), da.data(), N, H, H);
    simd::matmul_bt_acc(ws.dk.data(), LT(kWk), da.data(), N, H, H);
    simd::matmul_bt_acc(ws.dv.data(), LT(kWv), da.data(), N, H, H);
    layer_norm_backward(da.data(), lc.xhat1.data(), lc.rstd1.data(), LT(kLn1G), ws.dh.data(), LG(kLn1G),
                        LG(kLn1B), N, H, ws.ln_scratch);
  }

  // Embedding.
  double* g_emb_w = G(0);
  double* g_emb_b = G(1);
  double* g_mask = G(2);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < P; ++p) {
      const double* dhr = ws.dh.data() + (b * P + p) * H;
      if (p == masked) {
        for (std::size_t j = 0; j < H; ++j) g_mask[j] += dhr[j];
      } else {
        const double x = batch[b * P + p];
        double* gw = g_emb_w + p * H;
        double* gb = g_emb_b + p * H;
        for (std::size_t j = 0; j < H; ++j) {
          gw[j] += x * dhr[j];
          gb[j] += dhr[j];
        }
      }
    }
  }
}

std::vector<double> DensityModel::forward_head(std::span<const double> batch, std::size_t masked) const {
  check_batch(batch, masked);
  Workspace ws;
  run_forward(batch, masked, ws, nullptr);
  return std::move(ws.head);
}

std::vector<MixtureParams> DensityModel::forward_conditionals(std::span<const double> batch,
                                                              std::size_t masked) const {
  const std::size_t K3 = 3 * config_.n_components;
  const auto head = forward_head(batch, masked);
  std::vector<MixtureParams> out;
  out.reserve(head.size() / K3);
  for (std::size_t r = 0; r < head.size() / K3; ++r) {
    out.push_back(mixture_from_head({head.data() + r * K3, K3}));
  }
  return out;
}

namespace {

// Negative log mixture density of `x` under a raw head row; optionally
// writes d(-log p)/d(head) scaled by `scale` into `dhead`.
double head_nll(const double* head, std::size_t K, double x, double* dhead, double scale,
                std::vector<double>& terms) {
  const double* logits = head;
  const double* mu = head + K;
  const double* raw = head + 2 * K;
  const double lse_logits = log_sum_exp(logits, K);
  constexpr double half_log_2pi = 0.91893853320467274178;
  terms.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double sigma = softplus(raw[k]) + kSigmaFloor;
    const double z = (x - mu[k]) / sigma;
    terms[k] = logits[k] - lse_logits - half_log_2pi - std::log(sigma) - 0.5 * z * z;
  }
  const double log_p = log_sum_exp(terms.data(), K);
  if (dhead) {
    for (std::size_t k = 0; k < K; ++k) {
      const double sigma = softplus(raw[k]) + kSigmaFloor;
      const double z = (x - mu[k]) / sigma;
      const double resp = std::exp(terms[k] - log_p);
      const double weight = std::exp(logits[k] - lse_logits);
      dhead[k] = scale * (weight - resp);
      dhead[K + k] = -scale * resp * z / sigma;
      dhead[2 * K + k] = -scale * resp * (z * z - 1.0) / sigma * sigmoid(raw[k]);
    }
  }
  return -log_p;
}

}  // namespace

double DensityModel::pl_loss(std::span<const double> batch, std::size_t masked) const {
  check_batch(batch, masked);
  Workspace ws;
  run_forward(batch, masked, ws, nullptr);
  const std::size_t K = config_.n_components, P = dim(), B = ws.rows;
  if (B == 0) throw std::invalid_argument("pl_loss: empty batch");
  std::vector<double> terms;
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) total += head_nll(ws.head.data() + b * 3 * K, K, batch[b * P + masked], nullptr, 0.0, terms);
  return total / static_cast<double>(B);
}

double DensityModel::loss_and_gradient(std::span<const double> batch, std::size_t masked,
                                       std::span<double> grad, Rng* dropout_rng) const {
  check_batch(batch, masked);
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer has wrong size");
  Workspace ws;
  run_forward(batch, masked, ws, dropout_rng);
  const std::size_t K = config_.n_components, P = dim(), B = ws.rows;
  if (B == 0) throw std::invalid_argument("loss_and_gradient: empty batch");
  const double scale = 1.0 / static_cast<double>(B);
  ws.dhead.assign(B * 3 * K, 0.0);
  std::vector<double> terms;
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    total += head_nll(ws.head.data() + b * 3 * K, K, batch[b * P + masked], ws.dhead.data() + b * 3 * K,
                      scale, terms);
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  run_backward(batch, masked, ws, grad);
  return total * scale;
}

double DensityModel::mean_pseudolikelihood(std::span<const double> rows) const {
  const std::size_t P = dim();
  const std::size_t n = rows.size() / P;
  if (n == 0) throw std::invalid_argument("mean_pseudolikelihood: no rows");
  constexpr std::size_t kChunk = 64;
  double total = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t start = 0; start < n; start += kChunk) {
      const std::size_t m = std::min(kChunk, n - start);
      const auto chunk = rows.subspan(start * P, m * P);
      total -= pl_loss(chunk, i) * static_cast<double>(m);
    }
  }
  return total / static_cast<double>(n * P);
}

nlohmann::json DensityModel::to_json() const {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : tensors_) {
    tensors.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"values", std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(t.offset),
                                                      params_.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size))}});
  }
  char fp[17];
  std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(space_.schema().fingerprint()));
  return {{"format", "fastdad.density"},
          {"version", 1},
          {"config", density::to_json(config_)},
          {"schema_fingerprint", fp},
          {"model_space", space_.to_json()},
          {"tensors", std::move(tensors)}};
}

DensityModel DensityModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fastdad.density") throw std::invalid_argument("not a density model checkpoint");
  if (j.value("version", 0) != 1) throw std::invalid_argument("unsupported density checkpoint version");
  DensityModel m;
  m.config_ = model_config_from_json(j.at("config"));
  m.config_.validate();
  m.space_ = data::ModelSpace::from_json(j.at("model_space"));
  char fp[17];
  std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(m.space_.schema().fingerprint()));
  if (j.at("schema_fingerprint").get<std::string>() != fp) {
    throw std::invalid_argument("density checkpoint schema fingerprint mismatch");
  }
  m.build_layout();
  const auto& jt = j.at("tensors");
  if (jt.size() != m.tensors_.size()) throw std::invalid_argument("density checkpoint tensor count mismatch");
  for (std::size_t t = 0; t < jt.size(); ++t) {
    const auto& info = m.tensors_[t];
    if (jt[t].at("name").get<std::string>() != info.name ||
        jt[t].at("shape").get<std::vector<std::size_t>>() != info.shape) {
      throw std::invalid_argument("density checkpoint tensor mismatch at " + info.name);
    }
    const auto values = jt[t].at("values").get<std::vector<double>>();
    if (values.size() != info.size) throw std::invalid_argument("tensor size mismatch: " + info.name);
    std::copy(values.begin(), values.end(), m.params_.begin() + static_cast<std::ptrdiff_t>(info.offset));
  }
  return m;
}

void DensityModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model checkpoint: " + path.string());
  out << to_json().dump();
}

DensityModel DensityModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model checkpoint: " + path.string());
  return from_json(nlohmann::json::parse(in));
}

}  // namespace fastdad::density
