#pragma once

// Straight-line, row-at-a-time forward pass of the density model written
// directly from the architecture description. It shares no code with the
// batched implementation and serves as its oracle in tests.

#include <cmath>
#include <string>
#include <vector>

#include "fastdad/density/mixture.hpp"
#include "fastdad/density/model.hpp"

namespace fastdad::testing {

using Vec = std::vector<double>;

inline Vec ref_layer_norm(const Vec& x, std::span<const double> g, std::span<const double> b) {
  double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  Vec y(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) y[j] = (x[j] - mean) / std::sqrt(var + 1e-5) * g[j] + b[j];
  return y;
}

// y = x W + b with W stored row-major (in x out).
inline Vec ref_affine(const Vec& x, std::span<const double> w, std::span<const double> b) {
  const std::size_t out = b.size();
  Vec y(b.begin(), b.end());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < out; ++o) y[o] += x[i] * w[i * out + o];
  return y;
}

inline Vec reference_head(const density::DensityModel& m, std::span<const double> row, std::size_t masked) {
  const auto& cfg = m.config();
  const std::size_t P = m.dim(), H = cfg.d_hidden, nh = cfg.n_heads, hd = H / nh;
  auto T = [&](const std::string& name) { return m.tensor(name); };
  std::vector<Vec> h(P, Vec(H));
  for (std::size_t p = 0; p < P; ++p) {
    const Vec pe = density::positional_encoding(H, p);
    for (std::size_t j = 0; j < H; ++j) {
      h[p][j] = (p == masked ? T("mask_token")[j]
                             : row[p] * T("embed.weight")[p * H + j] + T("embed.bias")[p * H + j]) +
                pe[j];
    }
  }
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    std::vector<Vec> q(P), k(P), v(P);
    for (std::size_t p = 0; p < P; ++p) {
      const Vec a = ref_layer_norm(h[p], T(pre + "ln1.gamma"), T(pre + "ln1.beta"));
      q[p] = ref_affine(a, T(pre + "attn.wq"), T(pre + "attn.bq"));
      k[p] = ref_affine(a, T(pre + "attn.wk"), std::vector<double>(a.size(), 0.0));
      v[p] = ref_affine(a, T(pre + "attn.wv"), T(pre + "attn.bv"));
    }
    std::vector<Vec> next = h;
    for (std::size_t p = 0; p < P; ++p) {
      Vec ctx(H, 0.0);
      for (std::size_t head = 0; head < nh; ++head) {
        std::vector<double> w;
        std::vector<std::size_t> keys;
        for (std::size_t t = 0; t < P; ++t) {
          if (t == masked) continue;
          double s = 0;
          for (std::size_t e = 0; e < hd; ++e) s += q[p][head * hd + e] * k[t][head * hd + e];
          w.push_back(s / std::sqrt(double(hd)));
          keys.push_back(t);
        }
        if (keys.empty()) continue;
        double mx = w[0];
        for (double s : w) mx = std::max(mx, s);
        double z = 0;
        for (double& s : w) z += (s = std::exp(s - mx));
        for (std::size_t a = 0; a < keys.size(); ++a)
          for (std::size_t e = 0; e < hd; ++e) ctx[head * hd + e] += w[a] / z * v[keys[a]][head * hd + e];
      }
      const Vec o = ref_affine(ctx, T(pre + "attn.wo"), T(pre + "attn.bo"));
      for (std::size_t j = 0; j < H; ++j) next[p][j] += o[j];
    }
    for (std::size_t p = 0; p < P; ++p) {
      const Vec c = ref_layer_norm(next[p], T(pre + "ln2.gamma"), T(pre + "ln2.beta"));
      Vec u = ref_affine(c, T(pre + "ffn.w1"), T(pre + "ffn.b1"));
      for (double& x : u) x = std::max(0.0, x);
      const Vec f = ref_affine(u, T(pre + "ffn.w2"), T(pre + "ffn.b2"));
      for (std::size_t j = 0; j < H; ++j) next[p][j] += f[j];
    }
    h = std::move(next);
  }
  const Vec y = ref_layer_norm(h[masked], T("final_ln.gamma"), T("final_ln.beta"));
  return ref_affine(y, T("head.weight"), T("head.bias"));
}

inline double reference_nll(const density::DensityModel& m, std::span<const double> row, std::size_t masked) {
  const Vec head = reference_head(m, row, masked);
  return -density::mixture_logpdf(row[masked], density::mixture_from_head(head));
}

}  // namespace fastdad::testing
