// Conv-recurrent feasibility predictor, written against plain arrays.
//
// One shared image encoder (three valid-padding conv layers + one FC, ReLU
// throughout) embeds the action image and the goal image; a one-hot symbol
// passes through its own FC; the concatenation drives a single GRU layer
// whose hidden state feeds a sigmoid head. The recurrent-classifier variant
// is the same network with the goal-image input removed.
//
// The whole module is templated on the scalar so the gradient tests can run
// the identical code in double precision. Backpropagation is hand-rolled for
// this fixed architecture; the only cleverness is that image encodings are
// computed once per distinct image in a batch and their gradient
// contributions summed before a single backward pass per image, which is
// what makes single-core training tolerable.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvt/rng.hpp"
#include "dvt/scene.hpp"

namespace dvt {

// ---------------------------------------------------------------------------
// hyperparameters

struct NetHP {
  int img = 64;            // square input side
  int in_ch = 3;           // image channels
  int channels[3] = {5, 10, 10};
  int kernel[3] = {5, 5, 5};
  int stride[3] = {1, 2, 2};
  int enc = 100;           // image embedding width
  int sym_enc = 100;       // symbol embedding width
  int hidden = 300;        // GRU cells
  int alphabet = 10;       // one-hot symbol size
  bool rc = false;         // recurrent classifier: no goal-image input

  int conv_out(int i) const {
    int s = img;
    for (int l = 0; l <= i; ++l) {
      if (s < kernel[l]) throw std::invalid_argument("conv kernel larger than its input");
      s = (s - kernel[l]) / stride[l] + 1;
    }
    return s;
  }
  int flatten() const { return channels[2] * conv_out(2) * conv_out(2); }
  int gru_in() const { return (rc ? 1 : 2) * enc + sym_enc; }

  bool operator==(const NetHP&) const = default;
};

/// Full-scale presets. 64x64 is the published geometry (60/28/12 spatial,
/// flatten 1440); 32x32 keeps the same kernels (28/12/4, flatten 160).
inline NetHP make_hp(int img_size, bool rc = false) {
  NetHP hp;
  hp.img = img_size;
  hp.rc = rc;
  if (img_size == 8) {
    // Gradient-check scale: 5x5 kernels cannot consume an 8x8 input, so the
    // kernels shrink to (3,3,2)/strides (1,2,1) -> 6,2,1 spatial, and the
    // dense widths come down so exhaustive per-entry finite differencing
    // stays fast. Same layer graph, smaller everything.
    hp.kernel[0] = 3;
    hp.kernel[1] = 3;
    hp.kernel[2] = 2;
    hp.stride[0] = 1;
    hp.stride[1] = 2;
    hp.stride[2] = 1;
    hp.enc = 12;
    hp.sym_enc = 12;
    hp.hidden = 24;
  }
  (void)hp.flatten();  // validate the spatial chain
  return hp;
}

// ---------------------------------------------------------------------------
// tensors and parameters

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    v.assign(n, T(0));
  }
  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

/// Fixed tensor order; everything that walks parameters (init, Adam, save,
/// gradient checks) iterates in this order, which pins determinism.
enum ParamIdx {
  kC1W, kC1B, kC2W, kC2B, kC3W, kC3B,
  kFiW, kFiB, kFsW, kFsB,
  kWz, kUz, kBz, kWr, kUr, kBr, kWn, kBnX, kUn, kBnH,
  kHeadW, kHeadB,
  kNumParams
};

inline const char* param_name(int i) {
  static const char* names[kNumParams] = {
      "conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b",
      "fc_img.w", "fc_img.b", "fc_sym.w", "fc_sym.b",
      "gru.wz", "gru.uz", "gru.bz", "gru.wr", "gru.ur", "gru.br",
      "gru.wn", "gru.bn_x", "gru.un", "gru.bn_h",
      "head.w", "head.b"};
  return names[i];
}

template <typename T>
struct NetParams {
  NetHP hp;
  std::vector<Tensor<T>> t;

  NetParams() = default;
  explicit NetParams(const NetHP& h) : hp(h) {
    t.resize(kNumParams);
    const int F = hp.flatten(), E = hp.enc, S = hp.sym_enc, H = hp.hidden, I = hp.gru_in();
    t[kC1W] = Tensor<T>({hp.channels[0], hp.in_ch, hp.kernel[0], hp.kernel[0]});
    t[kC1B] = Tensor<T>({hp.channels[0]});
    t[kC2W] = Tensor<T>({hp.channels[1], hp.channels[0], hp.kernel[1], hp.kernel[1]});
    t[kC2B] = Tensor<T>({hp.channels[1]});
    t[kC3W] = Tensor<T>({hp.channels[2], hp.channels[1], hp.kernel[2], hp.kernel[2]});
    t[kC3B] = Tensor<T>({hp.channels[2]});
    t[kFiW] = Tensor<T>({E, F});
    t[kFiB] = Tensor<T>({E});
    t[kFsW] = Tensor<T>({S, hp.alphabet});
    t[kFsB] = Tensor<T>({S});
    t[kWz] = Tensor<T>({H, I});
    t[kUz] = Tensor<T>({H, H});
    t[kBz] = Tensor<T>({H});
    t[kWr] = Tensor<T>({H, I});
    t[kUr] = Tensor<T>({H, H});
    t[kBr] = Tensor<T>({H});
    t[kWn] = Tensor<T>({H, I});
    t[kBnX] = Tensor<T>({H});
    t[kUn] = Tensor<T>({H, H});
    t[kBnH] = Tensor<T>({H});
    t[kHeadW] = Tensor<T>({1, H});
    t[kHeadB] = Tensor<T>({1});
  }

  std::size_t n_params() const {
    std::size_t n = 0;
    for (const auto& x : t) n += x.size();
    return n;
  }
};

/// He-style uniform init: weights ~ U(+-sqrt(6/fan_in)), biases zero. The
/// fan-in of a conv filter is in_ch*k*k; of a matrix row, its column count.
template <typename T>
NetParams<T> init_params(const NetHP& hp, std::uint64_t seed) {
  NetParams<T> p(hp);
  for (int i = 0; i < kNumParams; ++i) {
    Tensor<T>& x = p.t[static_cast<std::size_t>(i)];
    if (x.shape.size() < 2) continue;  // biases stay zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < x.shape.size(); ++d)
      fan_in *= static_cast<std::size_t>(x.shape[d]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (T& w : x.v) w = static_cast<T>(rng.uniform(-limit, limit));
  }
  return p;
}

// ---------------------------------------------------------------------------
// layer primitives

namespace net_detail {

template <typename T>
T relu(T x) {
  return x > T(0) ? x : T(0);
}

/// Valid-padding conv, input/output planar [C][H][W], post-ReLU output.
template <typename T>
void conv_forward(const Tensor<T>& W, const Tensor<T>& b, const T* in, int in_c, int in_s,
                  int k, int stride, T* out, int out_c, int out_s) {
  for (int f = 0; f < out_c; ++f)
    for (int oy = 0; oy < out_s; ++oy)
      for (int ox = 0; ox < out_s; ++ox) {
        T acc = b.v[static_cast<std::size_t>(f)];
        const int iy0 = oy * stride, ix0 = ox * stride;
        for (int c = 0; c < in_c; ++c) {
          const T* ip = in + (static_cast<std::size_t>(c) * in_s + iy0) * in_s + ix0;
          const T* wp = W.data() + (static_cast<std::size_t>(f) * in_c + c) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const T* row = ip + static_cast<std::size_t>(ky) * in_s;
            for (int kx = 0; kx < k; ++kx) acc += wp[ky * k + kx] * row[kx];
          }
        }
        out[(static_cast<std::size_t>(f) * out_s + oy) * out_s + ox] = relu(acc);
      }
}

/// Backward through conv+ReLU. d_out is modified in place by the ReLU mask;
/// d_in (optional) accumulates the input gradient.
template <typename T>
void conv_backward(const Tensor<T>& W, const T* in, int in_c, int in_s, int k, int stride,
                   const T* out, T* d_out, int out_c, int out_s, Tensor<T>& dW, Tensor<T>& db,
                   T* d_in) {
  const std::size_t on = static_cast<std::size_t>(out_c) * out_s * out_s;
  for (std::size_t i = 0; i < on; ++i)
    if (out[i] <= T(0)) d_out[i] = T(0);
  for (int f = 0; f < out_c; ++f)
    for (int oy = 0; oy < out_s; ++oy)
      for (int ox = 0; ox < out_s; ++ox) {
        const T g = d_out[(static_cast<std::size_t>(f) * out_s + oy) * out_s + ox];
        if (g == T(0)) continue;
        db.v[static_cast<std::size_t>(f)] += g;
        const int iy0 = oy * stride, ix0 = ox * stride;
        for (int c = 0; c < in_c; ++c) {
          const T* ip = in + (static_cast<std::size_t>(c) * in_s + iy0) * in_s + ix0;
          T* wgp = dW.data() + (static_cast<std::size_t>(f) * in_c + c) * k * k;
          const T* wp = W.data() + (static_cast<std::size_t>(f) * in_c + c) * k * k;
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              wgp[ky * k + kx] += g * ip[static_cast<std::size_t>(ky) * in_s + kx];
              if (d_in)
                d_in[(static_cast<std::size_t>(c) * in_s + iy0 + ky) * in_s + ix0 + kx] +=
                    g * wp[ky * k + kx];
            }
        }
      }
}

template <typename T>
void matvec(const Tensor<T>& W, const T* x, T* out, bool accumulate) {
  const int rows = W.shape[0], cols = W.shape[1];
  for (int r = 0; r < rows; ++r) {
    const T* wp = W.data() + static_cast<std::size_t>(r) * cols;
    T acc = accumulate ? out[r] : T(0);
    for (int c = 0; c < cols; ++c) acc += wp[c] * x[c];
    out[r] = acc;
  }
}

/// out += W^T g; dW += g x^T.
template <typename T>
void matvec_backward(const Tensor<T>& W, const T* x, const T* g, Tensor<T>& dW, T* dx) {
  const int rows = W.shape[0], cols = W.shape[1];
  for (int r = 0; r < rows; ++r) {
    const T gr = g[r];
    if (gr == T(0)) continue;
    const T* wp = W.data() + static_cast<std::size_t>(r) * cols;
    T* wg = dW.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      wg[c] += gr * x[c];
      if (dx) dx[c] += gr * wp[c];
    }
  }
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace net_detail

// ---------------------------------------------------------------------------
// image encoder

/// Saved activations of one image's pass through the encoder; also the
/// accumulator for upstream gradients before the (single) backward pass.
template <typename T>
struct EncCache {
  std::vector<T> in;          // image converted to T, [C][H][W]
  std::vector<T> a1, a2, a3;  // post-ReLU conv outputs (a3 doubles as the flatten)
  std::vector<T> enc;         // post-ReLU embedding
  std::vector<T> d_enc;       // accumulated upstream gradient
};

template <typename T>
void encode_image(const NetParams<T>& p, const Image& img, EncCache<T>& c) {
  const NetHP& hp = p.hp;
  if (img.channels != hp.in_ch || img.w != hp.img || img.h != hp.img)
    throw std::invalid_argument("encode_image: image does not match network input shape");
  const int s0 = hp.img, s1 = hp.conv_out(0), s2 = hp.conv_out(1), s3 = hp.conv_out(2);
  c.in.resize(static_cast<std::size_t>(hp.in_ch) * s0 * s0);
  for (std::size_t i = 0; i < c.in.size(); ++i) c.in[i] = static_cast<T>(img.data[i]);
  c.a1.assign(static_cast<std::size_t>(hp.channels[0]) * s1 * s1, T(0));
  c.a2.assign(static_cast<std::size_t>(hp.channels[1]) * s2 * s2, T(0));
  c.a3.assign(static_cast<std::size_t>(hp.channels[2]) * s3 * s3, T(0));
  net_detail::conv_forward(p.t[kC1W], p.t[kC1B], c.in.data(), hp.in_ch, s0, hp.kernel[0],
                           hp.stride[0], c.a1.data(), hp.channels[0], s1);
  net_detail::conv_forward(p.t[kC2W], p.t[kC2B], c.a1.data(), hp.channels[0], s1, hp.kernel[1],
                           hp.stride[1], c.a2.data(), hp.channels[1], s2);
  net_detail::conv_forward(p.t[kC3W], p.t[kC3B], c.a2.data(), hp.channels[1], s2, hp.kernel[2],
                           hp.stride[2], c.a3.data(), hp.channels[2], s3);
  c.enc.resize(static_cast<std::size_t>(hp.enc));
  for (int r = 0; r < hp.enc; ++r) c.enc[static_cast<std::size_t>(r)] = p.t[kFiB].v[static_cast<std::size_t>(r)];
  net_detail::matvec(p.t[kFiW], c.a3.data(), c.enc.data(), true);
  for (T& x : c.enc) x = net_detail::relu(x);
  c.d_enc.assign(static_cast<std::size_t>(hp.enc), T(0));
}

/// One backward pass through the encoder using the accumulated d_enc.
template <typename T>
void encode_image_backward(const NetParams<T>& p, EncCache<T>& c, std::vector<Tensor<T>>& g) {
  const NetHP& hp = p.hp;
  const int s0 = hp.img, s1 = hp.conv_out(0), s2 = hp.conv_out(1), s3 = hp.conv_out(2);
  std::vector<T> d = c.d_enc;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (c.enc[i] <= T(0)) d[i] = T(0);
  for (int r = 0; r < hp.enc; ++r) g[kFiB].v[static_cast<std::size_t>(r)] += d[static_cast<std::size_t>(r)];
  std::vector<T> d3(c.a3.size(), T(0));
  net_detail::matvec_backward(p.t[kFiW], c.a3.data(), d.data(), g[kFiW], d3.data());
  std::vector<T> d2(c.a2.size(), T(0)), d1(c.a1.size(), T(0));
  net_detail::conv_backward(p.t[kC3W], c.a2.data(), hp.channels[1], s2, hp.kernel[2],
                            hp.stride[2], c.a3.data(), d3.data(), hp.channels[2], s3, g[kC3W],
                            g[kC3B], d2.data());
  net_detail::conv_backward(p.t[kC2W], c.a1.data(), hp.channels[0], s1, hp.kernel[1],
                            hp.stride[1], c.a2.data(), d2.data(), hp.channels[1], s2, g[kC2W],
                            g[kC2B], d1.data());
  net_detail::conv_backward(p.t[kC1W], c.in.data(), hp.in_ch, s0, hp.kernel[0], hp.stride[0],
                            c.a1.data(), d1.data(), hp.channels[0], s1, g[kC1W], g[kC1B],
                            static_cast<T*>(nullptr));
}

// ---------------------------------------------------------------------------
// recurrent core

template <typename T>
struct StepCache {
  int sym = 0;
  std::vector<T> sym_enc;             // post-ReLU symbol embedding
  std::vector<T> x;                   // GRU input (concatenated embeddings)
  std::vector<T> h_prev, z, r, n, un_h, h;
  T logit = T(0), prob = T(0.5);
};

/// GRU cell + head. x and h_prev must be filled in the cache already.
template <typename T>
void gru_head_forward(const NetParams<T>& p, StepCache<T>& c) {
  const int H = p.hp.hidden;
  auto gate = [&](int Widx, int Uidx, int bidx, std::vector<T>& out) {
    out.assign(static_cast<std::size_t>(H), T(0));
    for (int i = 0; i < H; ++i) out[static_cast<std::size_t>(i)] = p.t[static_cast<std::size_t>(bidx)].v[static_cast<std::size_t>(i)];
    net_detail::matvec(p.t[static_cast<std::size_t>(Widx)], c.x.data(), out.data(), true);
    net_detail::matvec(p.t[static_cast<std::size_t>(Uidx)], c.h_prev.data(), out.data(), true);
  };
  gate(kWz, kUz, kBz, c.z);
  gate(kWr, kUr, kBr, c.r);
  for (int i = 0; i < H; ++i) {
    c.z[static_cast<std::size_t>(i)] = net_detail::sigmoid(c.z[static_cast<std::size_t>(i)]);
    c.r[static_cast<std::size_t>(i)] = net_detail::sigmoid(c.r[static_cast<std::size_t>(i)]);
  }
  // Candidate: n = tanh(Wn x + bn_x + r .* (Un h + bn_h)).
  c.un_h.assign(static_cast<std::size_t>(H), T(0));
  for (int i = 0; i < H; ++i) c.un_h[static_cast<std::size_t>(i)] = p.t[kBnH].v[static_cast<std::size_t>(i)];
  net_detail::matvec(p.t[kUn], c.h_prev.data(), c.un_h.data(), true);
  c.n.assign(static_cast<std::size_t>(H), T(0));
  for (int i = 0; i < H; ++i) c.n[static_cast<std::size_t>(i)] = p.t[kBnX].v[static_cast<std::size_t>(i)];
  net_detail::matvec(p.t[kWn], c.x.data(), c.n.data(), true);
  for (int i = 0; i < H; ++i)
    c.n[static_cast<std::size_t>(i)] =
        std::tanh(c.n[static_cast<std::size_t>(i)] +
                  c.r[static_cast<std::size_t>(i)] * c.un_h[static_cast<std::size_t>(i)]);
  // h = (1-z).*n + z.*h_prev
  c.h.assign(static_cast<std::size_t>(H), T(0));
  for (int i = 0; i < H; ++i)
    c.h[static_cast<std::size_t>(i)] =
        (T(1) - c.z[static_cast<std::size_t>(i)]) * c.n[static_cast<std::size_t>(i)] +
        c.z[static_cast<std::size_t>(i)] * c.h_prev[static_cast<std::size_t>(i)];
  c.logit = p.t[kHeadB].v[0];
  for (int i = 0; i < H; ++i)
    c.logit += p.t[kHeadW].v[static_cast<std::size_t>(i)] * c.h[static_cast<std::size_t>(i)];
  c.prob = net_detail::sigmoid(c.logit);
}

/// Backward: d_logit plus dh (gradient on this step's output hidden state)
/// in, gradients for the GRU/head tensors plus dx and dh_prev out.
template <typename T>
void gru_head_backward(const NetParams<T>& p, const StepCache<T>& c, T d_logit,
                       std::vector<T>& dh, std::vector<Tensor<T>>& g, std::vector<T>& dx,
                       std::vector<T>& dh_prev) {
  const int H = p.hp.hidden;
  g[kHeadB].v[0] += d_logit;
  for (int i = 0; i < H; ++i) {
    g[kHeadW].v[static_cast<std::size_t>(i)] += d_logit * c.h[static_cast<std::size_t>(i)];
    dh[static_cast<std::size_t>(i)] += d_logit * p.t[kHeadW].v[static_cast<std::size_t>(i)];
  }
  std::vector<T> dz(static_cast<std::size_t>(H)), dn(static_cast<std::size_t>(H)),
      dr(static_cast<std::size_t>(H));
  dh_prev.assign(static_cast<std::size_t>(H), T(0));
  for (int i = 0; i < H; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    dz[s] = dh[s] * (c.h_prev[s] - c.n[s]);
    dn[s] = dh[s] * (T(1) - c.z[s]);
    dh_prev[s] = dh[s] * c.z[s];
  }
  // Through the activations.
  std::vector<T> dz_pre(static_cast<std::size_t>(H)), dn_pre(static_cast<std::size_t>(H)),
      dr_pre(static_cast<std::size_t>(H)), dun(static_cast<std::size_t>(H));
  for (int i = 0; i < H; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    dn_pre[s] = dn[s] * (T(1) - c.n[s] * c.n[s]);
    dr[s] = dn_pre[s] * c.un_h[s];
    dun[s] = dn_pre[s] * c.r[s];
    dz_pre[s] = dz[s] * c.z[s] * (T(1) - c.z[s]);
    dr_pre[s] = dr[s] * c.r[s] * (T(1) - c.r[s]);
  }
  dx.assign(c.x.size(), T(0));
  for (int i = 0; i < H; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    g[kBz].v[s] += dz_pre[s];
    g[kBr].v[s] += dr_pre[s];
    g[kBnX].v[s] += dn_pre[s];
    g[kBnH].v[s] += dun[s];
  }
  net_detail::matvec_backward(p.t[kWz], c.x.data(), dz_pre.data(), g[kWz], dx.data());
  net_detail::matvec_backward(p.t[kWr], c.x.data(), dr_pre.data(), g[kWr], dx.data());
  net_detail::matvec_backward(p.t[kWn], c.x.data(), dn_pre.data(), g[kWn], dx.data());
  net_detail::matvec_backward(p.t[kUz], c.h_prev.data(), dz_pre.data(), g[kUz], dh_prev.data());
  net_detail::matvec_backward(p.t[kUr], c.h_prev.data(), dr_pre.data(), g[kUr], dh_prev.data());
  net_detail::matvec_backward(p.t[kUn], c.h_prev.data(), dun.data(), g[kUn], dh_prev.data());
}

// ---------------------------------------------------------------------------
// inference API

template <typename T>
struct HiddenState {
  std::vector<T> h;
  explicit HiddenState(int hidden = 0) : h(static_cast<std::size_t>(hidden), T(0)) {}
};

template <typename T>
void encode_symbol(const NetParams<T>& p, int sym, std::vector<T>& out) {
  if (sym < 0 || sym >= p.hp.alphabet) throw std::invalid_argument("symbol out of range");
  const int S = p.hp.sym_enc;
  out.resize(static_cast<std::size_t>(S));
  const Tensor<T>& W = p.t[kFsW];
  for (int r = 0; r < S; ++r)
    out[static_cast<std::size_t>(r)] = net_detail::relu(
        W.v[static_cast<std::size_t>(r) * p.hp.alphabet + sym] + p.t[kFsB].v[static_cast<std::size_t>(r)]);
}

/// One recurrence step from precomputed image embeddings (the search keeps a
/// per-scene embedding cache, so this is the hot inference path). goal_enc
/// must be null exactly when hp.rc.
template <typename T>
T step_encoded(const NetParams<T>& p, int sym, const std::vector<T>& act_enc,
               const std::vector<T>* goal_enc, const HiddenState<T>& h_prev,
               HiddenState<T>& h_out) {
  const NetHP& hp = p.hp;
  if ((goal_enc == nullptr) != hp.rc)
    throw std::invalid_argument("goal embedding presence does not match the variant");
  if (static_cast<int>(act_enc.size()) != hp.enc ||
      (goal_enc && static_cast<int>(goal_enc->size()) != hp.enc))
    throw std::invalid_argument("bad embedding width");
  StepCache<T> c;
  c.h_prev = h_prev.h.empty() ? std::vector<T>(static_cast<std::size_t>(hp.hidden), T(0))
                              : h_prev.h;
  if (static_cast<int>(c.h_prev.size()) != hp.hidden)
    throw std::invalid_argument("bad hidden width");
  encode_symbol(p, sym, c.sym_enc);
  c.x.reserve(static_cast<std::size_t>(hp.gru_in()));
  c.x.assign(act_enc.begin(), act_enc.end());
  c.x.insert(c.x.end(), c.sym_enc.begin(), c.sym_enc.end());
  if (goal_enc) c.x.insert(c.x.end(), goal_enc->begin(), goal_enc->end());
  gru_head_forward(p, c);
  h_out.h = std::move(c.h);
  return c.prob;
}

/// Full step from raw images.
template <typename T>
T step(const NetParams<T>& p, int sym, const Image& action_img, const Image* goal_img,
       const HiddenState<T>& h_prev, HiddenState<T>& h_out) {
  EncCache<T> ea;
  encode_image(p, action_img, ea);
  if (p.hp.rc)
    return step_encoded(p, sym, ea.enc, static_cast<const std::vector<T>*>(nullptr), h_prev,
                        h_out);
  if (!goal_img) throw std::invalid_argument("goal image required");
  EncCache<T> eg;
  encode_image(p, *goal_img, eg);
  return step_encoded(p, sym, ea.enc, &eg.enc, h_prev, h_out);
}

struct StepInput {
  int sym = 0;
  const Image* action_img = nullptr;
  const Image* goal_img = nullptr;  // ignored by the rc variant
};

template <typename T>
std::vector<T> forward_sequence(const NetParams<T>& p, const std::vector<StepInput>& steps) {
  if (steps.empty()) throw std::invalid_argument("empty sequence");
  std::vector<T> out;
  HiddenState<T> h(p.hp.hidden), h2;
  for (const StepInput& s : steps) {
    out.push_back(step(p, s.sym, *s.action_img, p.hp.rc ? nullptr : s.goal_img, h, h2));
    h.h = h2.h;
  }
  return out;
}

// ---------------------------------------------------------------------------
// training batch + loss

/// A batch references images through a bank so each distinct image is
/// encoded (and back-propagated) exactly once however many steps use it.
template <typename T>
struct NetBatch {
  std::vector<const Image*> bank;
  struct Seq {
    std::vector<int> act_img;  // bank index per step
    std::vector<int> sym;      // symbol index per step
    int goal_img = -1;         // bank index; unused by rc
    std::vector<int> labels;   // 0/1 per step
  };
  std::vector<Seq> seqs;
};

template <typename T>
std::vector<Tensor<T>> make_grads(const NetParams<T>& p) {
  std::vector<Tensor<T>> g;
  g.reserve(kNumParams);
  for (const auto& x : p.t) g.push_back(Tensor<T>(x.shape));
  return g;
}

/// Mean binary cross-entropy over every step of every sequence, with full
/// reverse-mode gradients. Returns the loss.
template <typename T>
T loss_and_grad(const NetParams<T>& p, const NetBatch<T>& batch, std::vector<Tensor<T>>& g) {
  const NetHP& hp = p.hp;
  std::size_t total_steps = 0;
  for (const auto& s : batch.seqs) {
    if (s.act_img.size() != s.sym.size() || s.sym.size() != s.labels.size() || s.sym.empty())
      throw std::invalid_argument("malformed batch sequence");
    if (!hp.rc && (s.goal_img < 0 || s.goal_img >= static_cast<int>(batch.bank.size())))
      throw std::invalid_argument("missing goal image");
    total_steps += s.sym.size();
  }
  if (total_steps == 0) throw std::invalid_argument("empty batch");

  // Encode each distinct image once.
  std::vector<EncCache<T>> enc(batch.bank.size());
  for (std::size_t i = 0; i < batch.bank.size(); ++i) encode_image(p, *batch.bank[i], enc[i]);

  // Forward all sequences, keeping per-step caches.
  std::vector<std::vector<StepCache<T>>> caches(batch.seqs.size());
  T loss = T(0);
  for (std::size_t si = 0; si < batch.seqs.size(); ++si) {
    const auto& s = batch.seqs[si];
    auto& cs = caches[si];
    cs.resize(s.sym.size());
    std::vector<T> h(static_cast<std::size_t>(hp.hidden), T(0));
    for (std::size_t j = 0; j < s.sym.size(); ++j) {
      StepCache<T>& c = cs[j];
      c.sym = s.sym[j];
      c.h_prev = h;
      encode_symbol(p, c.sym, c.sym_enc);
      const auto& ea = enc[static_cast<std::size_t>(s.act_img[j])].enc;
      c.x.assign(ea.begin(), ea.end());
      c.x.insert(c.x.end(), c.sym_enc.begin(), c.sym_enc.end());
      if (!hp.rc) {
        const auto& eg = enc[static_cast<std::size_t>(s.goal_img)].enc;
        c.x.insert(c.x.end(), eg.begin(), eg.end());
      }
      gru_head_forward(p, c);
      h = c.h;
      // Numerically stable BCE from the logit: softplus(l) - y*l.
      const T l = c.logit;
      const T y = static_cast<T>(s.labels[j]);
      const T sp = l > T(0) ? l + std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
      loss += sp - y * l;
    }
  }
  loss /= static_cast<T>(total_steps);

  // Backward, newest step first so dh threads backwards through each
  // sequence; image-encoder gradients accumulate in the bank.
  for (std::size_t si = 0; si < batch.seqs.size(); ++si) {
    const auto& s = batch.seqs[si];
    auto& cs = caches[si];
    std::vector<T> dh(static_cast<std::size_t>(hp.hidden), T(0)), dh_prev, dx;
    for (std::size_t jj = s.sym.size(); jj-- > 0;) {
      StepCache<T>& c = cs[jj];
      const T d_logit = (c.prob - static_cast<T>(s.labels[jj])) / static_cast<T>(total_steps);
      gru_head_backward(p, c, d_logit, dh, g, dx, dh_prev);
      // Split dx into the concatenated segments.
      const T* dxa = dx.data();
      auto& da = enc[static_cast<std::size_t>(s.act_img[jj])].d_enc;
      for (int i = 0; i < hp.enc; ++i) da[static_cast<std::size_t>(i)] += dxa[i];
      // Symbol FC backward (one-hot input selects a single column).
      const T* dsym = dx.data() + hp.enc;
      for (int r = 0; r < hp.sym_enc; ++r) {
        if (c.sym_enc[static_cast<std::size_t>(r)] <= T(0)) continue;
        const T gr = dsym[r];
        g[kFsB].v[static_cast<std::size_t>(r)] += gr;
        g[kFsW].v[static_cast<std::size_t>(r) * hp.alphabet + c.sym] += gr;
      }
      if (!hp.rc) {
        const T* dxg = dx.data() + hp.enc + hp.sym_enc;
        auto& dg = enc[static_cast<std::size_t>(s.goal_img)].d_enc;
        for (int i = 0; i < hp.enc; ++i) dg[static_cast<std::size_t>(i)] += dxg[i];
      }
      dh = dh_prev;
    }
  }
  for (std::size_t i = 0; i < enc.size(); ++i) encode_image_backward(p, enc[i], g);
  return loss;
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
struct AdamState {
  long t = 0;
  std::vector<Tensor<T>> m, v;

  AdamState() = default;
  explicit AdamState(const NetParams<T>& p) {
    for (const auto& x : p.t) {
      m.push_back(Tensor<T>(x.shape));
      v.push_back(Tensor<T>(x.shape));
    }
  }
};

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
void adam_update(NetParams<T>& p, const std::vector<Tensor<T>>& g, AdamState<T>& st,
                 const AdamConfig& cfg = {}) {
  if (st.m.empty()) st = AdamState<T>(p);
  ++st.t;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T corr1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(st.t)));
  const T corr2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(st.t)));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (int i = 0; i < kNumParams; ++i) {
    auto& w = p.t[static_cast<std::size_t>(i)].v;
    const auto& gr = g[static_cast<std::size_t>(i)].v;
    auto& m = st.m[static_cast<std::size_t>(i)].v;
    auto& v = st.v[static_cast<std::size_t>(i)].v;
    if (gr.size() != w.size()) throw std::invalid_argument("gradient shape mismatch");
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * gr[k];
      v[k] = b2 * v[k] + (T(1) - b2) * gr[k] * gr[k];
      const T mhat = m[k] / corr1;
      const T vhat = v[k] / corr2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// persistence: "DVRN" + version + manifest JSON + little-endian f32 payload

namespace net_detail {
inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
}  // namespace net_detail

template <typename T>
void save_net(const NetParams<T>& p, const std::string& path,
              const AdamState<T>* adam = nullptr, const nlohmann::json& meta = {}) {
  nlohmann::json man;
  man["version"] = 1;
  man["hp"] = {{"img", p.hp.img},
               {"in_ch", p.hp.in_ch},
               {"channels", nlohmann::json::array({p.hp.channels[0], p.hp.channels[1], p.hp.channels[2]})},
               {"kernel", nlohmann::json::array({p.hp.kernel[0], p.hp.kernel[1], p.hp.kernel[2]})},
               {"stride", nlohmann::json::array({p.hp.stride[0], p.hp.stride[1], p.hp.stride[2]})},
               {"enc", p.hp.enc},
               {"sym_enc", p.hp.sym_enc},
               {"hidden", p.hp.hidden},
               {"alphabet", p.hp.alphabet},
               {"rc", p.hp.rc}};
  if (!meta.is_null() && !meta.empty()) man["meta"] = meta;
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto add = [&](const std::string& name, const Tensor<T>& x) {
    tensors.push_back({{"name", name}, {"shape", x.shape}, {"offset", offset},
                       {"count", x.size()}});
    offset += x.size() * 4;
  };
  for (int i = 0; i < kNumParams; ++i) add(param_name(i), p.t[static_cast<std::size_t>(i)]);
  if (adam && !adam->m.empty()) {
    man["adam_t"] = adam->t;
    for (int i = 0; i < kNumParams; ++i)
      add(std::string("adam.m.") + param_name(i), adam->m[static_cast<std::size_t>(i)]);
    for (int i = 0; i < kNumParams; ++i)
      add(std::string("adam.v.") + param_name(i), adam->v[static_cast<std::size_t>(i)]);
  }
  man["tensors"] = tensors;
  const std::string ms = man.dump();

  std::string out;
  out += "DVRN";
  out.push_back(static_cast<char>(1));
  net_detail::put_u32(out, static_cast<std::uint32_t>(ms.size()));
  out += ms;
  auto put_tensor = [&out](const Tensor<T>& x) {
    for (T w : x.v) {
      const float f = static_cast<float>(w);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      net_detail::put_u32(out, bits);
    }
  };
  for (int i = 0; i < kNumParams; ++i) put_tensor(p.t[static_cast<std::size_t>(i)]);
  if (adam && !adam->m.empty()) {
    for (int i = 0; i < kNumParams; ++i) put_tensor(adam->m[static_cast<std::size_t>(i)]);
    for (int i = 0; i < kNumParams; ++i) put_tensor(adam->v[static_cast<std::size_t>(i)]);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

template <typename T>
NetParams<T> load_net(const std::string& path, AdamState<T>* adam = nullptr,
                      nlohmann::json* meta = nullptr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 9 || bytes.compare(0, 4, "DVRN") != 0)
    throw std::runtime_error("not a DVRN weight file: " + path);
  if (bytes[4] != 1) throw std::runtime_error("unsupported DVRN version");
  std::uint32_t mlen = 0;
  for (int i = 0; i < 4; ++i)
    mlen |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[5 + static_cast<std::size_t>(i)])) << (8 * i);
  if (bytes.size() < 9 + static_cast<std::size_t>(mlen))
    throw std::runtime_error("truncated DVRN manifest");
  const nlohmann::json man = nlohmann::json::parse(bytes.substr(9, mlen));
  NetHP hp;
  const nlohmann::json& jh = man.at("hp");
  hp.img = jh.at("img").get<int>();
  hp.in_ch = jh.at("in_ch").get<int>();
  for (int i = 0; i < 3; ++i) {
    hp.channels[i] = jh.at("channels").at(static_cast<std::size_t>(i)).get<int>();
    hp.kernel[i] = jh.at("kernel").at(static_cast<std::size_t>(i)).get<int>();
    hp.stride[i] = jh.at("stride").at(static_cast<std::size_t>(i)).get<int>();
  }
  hp.enc = jh.at("enc").get<int>();
  hp.sym_enc = jh.at("sym_enc").get<int>();
  hp.hidden = jh.at("hidden").get<int>();
  hp.alphabet = jh.at("alphabet").get<int>();
  hp.rc = jh.at("rc").get<bool>();

  NetParams<T> p(hp);
  const std::size_t payload = 9 + static_cast<std::size_t>(mlen);
  auto read_tensor = [&](const nlohmann::json& jt, Tensor<T>& x) {
    const auto shape = jt.at("shape").get<std::vector<int>>();
    if (shape != x.shape) throw std::runtime_error("tensor shape mismatch for " +
                                                   jt.at("name").get<std::string>());
    const std::uint64_t off = jt.at("offset").get<std::uint64_t>();
    const std::uint64_t cnt = jt.at("count").get<std::uint64_t>();
    if (cnt != x.size()) throw std::runtime_error("tensor count mismatch");
    if (payload + off + cnt * 4 > bytes.size()) throw std::runtime_error("truncated DVRN payload");
    for (std::uint64_t k = 0; k < cnt; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(
                    bytes[payload + off + k * 4 + static_cast<std::uint64_t>(b)]))
                << (8 * b);
      float fv;
      std::memcpy(&fv, &bits, 4);
      x.v[k] = static_cast<T>(fv);
    }
  };
  if (adam) {
    *adam = AdamState<T>(p);
    adam->t = man.contains("adam_t") ? man.at("adam_t").get<long>() : 0;
  }
  bool have_adam = false;
  for (const auto& jt : man.at("tensors")) {
    const std::string name = jt.at("name").get<std::string>();
    bool matched = false;
    for (int i = 0; i < kNumParams; ++i) {
      if (name == param_name(i)) {
        read_tensor(jt, p.t[static_cast<std::size_t>(i)]);
        matched = true;
        break;
      }
      if (adam && name == std::string("adam.m.") + param_name(i)) {
        read_tensor(jt, adam->m[static_cast<std::size_t>(i)]);
        matched = have_adam = true;
        break;
      }
      if (adam && name == std::string("adam.v.") + param_name(i)) {
        read_tensor(jt, adam->v[static_cast<std::size_t>(i)]);
        matched = have_adam = true;
        break;
      }
    }
    if (!matched && name.rfind("adam.", 0) == 0) continue;  // ignore if caller skips state
    if (!matched) throw std::runtime_error("unknown tensor in DVRN file: " + name);
  }
  if (adam && !have_adam) *adam = AdamState<T>();  // file carried no optimizer state
  if (meta) *meta = man.contains("meta") ? man.at("meta") : nlohmann::json();
  return p;
}

}  // namespace dvt
