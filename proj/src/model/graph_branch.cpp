#include "shotfuse/graph_branch.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "../core/op_support.hpp"

namespace shotfuse {

using detail::make_result;
using detail::NodePtr;

FacialGraph FacialGraph::from_edges(std::size_t node_count,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  FacialGraph g;
  g.node_count = node_count;
  g.neighbors.assign(node_count, {});
  for (std::size_t v = 0; v < node_count; ++v) g.edges.emplace_back(v, v);
  for (auto [u, v] : edges) {
    if (u >= node_count || v >= node_count)
      throw ContractError("graph edge (" + std::to_string(u) + "," + std::to_string(v) +
                          ") out of range for " + std::to_string(node_count) + " nodes");
    g.edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  for (auto [u, v] : g.edges) {
    g.neighbors[u].push_back(v);
    if (u != v) g.neighbors[v].push_back(u);
  }
  for (auto& n : g.neighbors) std::sort(n.begin(), n.end());
  return g;
}

bool FacialGraph::has_edge(std::size_t u, std::size_t v) const {
  if (u >= node_count || v >= node_count) return false;
  return std::binary_search(neighbors[u].begin(), neighbors[u].end(), v);
}

bool FacialGraph::connected() const {
  if (node_count == 0) return true;
  std::vector<bool> seen(node_count, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : neighbors[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        frontier.push(v);
      }
  }
  return count == node_count;
}

FacialGraph build_facial_graph() {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  auto chain = [&edges](std::size_t first, std::size_t last) {
    for (std::size_t v = first; v < last; ++v) edges.emplace_back(v, v + 1);
  };
  auto cycle = [&edges, &chain](std::size_t first, std::size_t last) {
    chain(first, last);
    edges.emplace_back(last, first);
  };
  chain(0, 16);   // jaw
  chain(17, 21);  // right brow
  chain(22, 26);  // left brow
  chain(27, 30);  // nose bridge
  chain(31, 35);  // nose base
  cycle(36, 41);  // right eye
  cycle(42, 47);  // left eye
  cycle(48, 59);  // outer lip
  cycle(60, 67);  // inner lip
  const std::pair<std::size_t, std::size_t> bridges[] = {
      {21, 27}, {22, 27}, {30, 33}, {36, 17}, {45, 26}, {48, 3}, {54, 13}, {62, 66},
      // join the inner lip and the mouth to the upper face
      {48, 60}, {54, 64}, {33, 51}};
  edges.insert(edges.end(), std::begin(bridges), std::end(bridges));
  return FacialGraph::from_edges(kLandmarkCount, edges);
}

namespace {

constexpr std::size_t kRightEyeBegin = 36;
constexpr std::size_t kLeftEyeBegin = 42;
constexpr std::size_t kEyePoints = 6;

struct FrameScale {
  double cx, cy;
  double scale;
  bool fallback;
  double ux, uy;  // unit vector right-eye center minus left-eye center
};

template <class T>
FrameScale frame_scale(const T* pts) {
  FrameScale fs{};
  double sx = 0, sy = 0;
  double minx = pts[0], maxx = pts[0], miny = pts[1], maxy = pts[1];
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    const double x = pts[2 * k], y = pts[2 * k + 1];
    sx += x;
    sy += y;
    minx = std::min(minx, x);
    maxx = std::max(maxx, x);
    miny = std::min(miny, y);
    maxy = std::max(maxy, y);
  }
  fs.cx = sx / kLandmarkCount;
  fs.cy = sy / kLandmarkCount;
  double rx = 0, ry = 0, lx = 0, ly = 0;
  for (std::size_t k = 0; k < kEyePoints; ++k) {
    rx += pts[2 * (kRightEyeBegin + k)];
    ry += pts[2 * (kRightEyeBegin + k) + 1];
    lx += pts[2 * (kLeftEyeBegin + k)];
    ly += pts[2 * (kLeftEyeBegin + k) + 1];
  }
  const double dx = (rx - lx) / kEyePoints;
  const double dy = (ry - ly) / kEyePoints;
  const double iod = std::hypot(dx, dy);
  const double diag = std::hypot(maxx - minx, maxy - miny);
  if (diag <= 1e-12) throw GeometryError("normalize_landmarks: all landmark coordinates coincide");
  if (iod > 1e-9 * diag) {
    fs.scale = iod;
    fs.fallback = false;
    fs.ux = dx / iod;
    fs.uy = dy / iod;
  } else {
    fs.scale = diag;
    fs.fallback = true;
  }
  return fs;
}

double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

LandmarkFrame normalize_landmarks(const LandmarkFrame& frame) {
  if (!frame.valid) throw ContractError("normalize_landmarks: invalid frame");
  std::array<double, 2 * kLandmarkCount> flat{};
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    if (!std::isfinite(frame.coords[k].x) || !std::isfinite(frame.coords[k].y))
      throw GeometryError("normalize_landmarks: non-finite coordinate at node " + std::to_string(k));
    flat[2 * k] = frame.coords[k].x;
    flat[2 * k + 1] = frame.coords[k].y;
  }
  const FrameScale fs = frame_scale(flat.data());
  LandmarkFrame out;
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    out.coords[k].x = (frame.coords[k].x - fs.cx) / fs.scale;
    out.coords[k].y = (frame.coords[k].y - fs.cy) / fs.scale;
  }
  return out;
}

double compute_ear(const LandmarkFrame& frame, Eye eye) {
  const std::size_t b = eye == Eye::Right ? kRightEyeBegin : kLeftEyeBegin;
  const auto& c = frame.coords;
  const double horizontal = dist(c[b], c[b + 3]);
  if (horizontal <= 1e-12) throw GeometryError("compute_ear: zero horizontal eye span");
  return (dist(c[b + 1], c[b + 5]) + dist(c[b + 2], c[b + 4])) / (2.0 * horizontal);
}

double compute_mar(const LandmarkFrame& frame) {
  const auto& c = frame.coords;
  const double horizontal = dist(c[48], c[54]);
  if (horizontal <= 1e-12) throw GeometryError("compute_mar: zero horizontal mouth span");
  return (dist(c[50], c[58]) + dist(c[52], c[56])) / (2.0 * horizontal);
}

template <class T>
Tensor<T> shot_coordinates(const LandmarkShot& shot, bool requires_grad) {
  if (shot.frames.empty()) throw ContractError("shot '" + shot.shot_id + "' has no frames");
  std::vector<T> values;
  values.reserve(shot.frames.size() * kLandmarkCount * 2);
  for (const auto& f : shot.frames) {
    if (!f.valid) throw ContractError("shot '" + shot.shot_id + "' contains an invalid frame");
    for (const auto& p : f.coords) {
      values.push_back(static_cast<T>(p.x));
      values.push_back(static_cast<T>(p.y));
    }
  }
  return Tensor<T>::from({shot.frames.size(), kLandmarkCount, 2}, std::move(values), requires_grad);
}

template <class T>
Tensor<T> normalize_frames(const Tensor<T>& coords) {
  if (coords.ndim() != 3 || coords.shape()[1] != kLandmarkCount || coords.shape()[2] != 2)
    throw DimensionError("normalize_frames: expected [F,68,2], got " + shape_str(coords.shape()));
  const std::size_t frames = coords.shape()[0];
  const std::size_t stride = 2 * kLandmarkCount;
  std::vector<FrameScale> scales(frames);
  std::vector<T> out(coords.numel());
  const T* src = coords.data().data();
  for (std::size_t f = 0; f < frames; ++f) {
    scales[f] = frame_scale(src + f * stride);
    const FrameScale& fs = scales[f];
    for (std::size_t k = 0; k < kLandmarkCount; ++k) {
      out[f * stride + 2 * k] = static_cast<T>((src[f * stride + 2 * k] - fs.cx) / fs.scale);
      out[f * stride + 2 * k + 1] = static_cast<T>((src[f * stride + 2 * k + 1] - fs.cy) / fs.scale);
    }
  }
  NodePtr<T> xn = coords.node();
  return make_result<T>(
      "normalize_frames", coords.shape(), std::move(out), {xn},
      [xn, scales = std::move(scales), frames, stride](const TensorNode<T>& o) {
        for (std::size_t f = 0; f < frames; ++f) {
          const FrameScale& fs = scales[f];
          const T* gy = o.grad.data() + f * stride;
          const T* y = o.data.data() + f * stride;
          T* gx = xn->grad.data() + f * stride;
          double gsx = 0, gsy = 0, gy_dot_y = 0;
          for (std::size_t k = 0; k < kLandmarkCount; ++k) {
            gsx += gy[2 * k];
            gsy += gy[2 * k + 1];
            gy_dot_y += gy[2 * k] * y[2 * k] + gy[2 * k + 1] * y[2 * k + 1];
          }
          const double inv = 1.0 / fs.scale;
          const double mx = gsx / kLandmarkCount, my = gsy / kLandmarkCount;
          for (std::size_t k = 0; k < kLandmarkCount; ++k) {
            gx[2 * k] += static_cast<T>((gy[2 * k] - mx) * inv);
            gx[2 * k + 1] += static_cast<T>((gy[2 * k + 1] - my) * inv);
          }
          if (fs.fallback) continue;
          // d(scale) contributions through the eye centers.
          const double dscale = -gy_dot_y * inv;
          const double ex = dscale * fs.ux / kEyePoints, ey = dscale * fs.uy / kEyePoints;
          for (std::size_t k = 0; k < kEyePoints; ++k) {
            gx[2 * (kRightEyeBegin + k)] += static_cast<T>(ex);
            gx[2 * (kRightEyeBegin + k) + 1] += static_cast<T>(ey);
            gx[2 * (kLeftEyeBegin + k)] -= static_cast<T>(ex);
            gx[2 * (kLeftEyeBegin + k) + 1] -= static_cast<T>(ey);
          }
        }
      });
}

template <class T>
Tensor<T> node_features(const Tensor<T>& normalized, bool with_velocity, T velocity_scale) {
  if (!with_velocity) return normalized;
  const std::size_t frames = normalized.shape()[0];
  Tensor<T> first = Tensor<T>::zeros({1, kLandmarkCount, 2});
  Tensor<T> velocity = first;
  if (frames > 1) {
    Tensor<T> diff = sub(slice(normalized, 0, 1, frames), slice(normalized, 0, 0, frames - 1));
    velocity = concat<T>({first, diff}, 0);
  }
  return concat<T>({normalized, mul_scalar(velocity, velocity_scale)}, 2);
}

template <class T>
GatParams<T> GatParams<T>::init(std::size_t in, std::size_t out, std::size_t heads, Rng& rng) {
  if (heads == 0 || out % heads != 0)
    throw ConfigError("GAT output width " + std::to_string(out) + " not divisible by " +
                      std::to_string(heads) + " heads");
  const std::size_t dh = out / heads;
  GatParams p;
  p.weight = glorot_uniform<T>({out, in}, in, dh, rng);
  p.attention = glorot_uniform<T>({heads, 2 * dh}, 2 * dh, 1, rng);
  p.heads = heads;
  return p;
}

namespace {

/// Attention aggregation over projected features wh [R = F*N, H*dh].
template <class T>
Tensor<T> gat_aggregate(const Tensor<T>& wh, const Tensor<T>& attention, const FacialGraph& graph,
                        std::size_t heads, double slope, std::vector<T>* attention_out) {
  const std::size_t n = graph.node_count;
  const std::size_t rows = wh.shape()[0];
  const std::size_t width = wh.shape()[1];
  const std::size_t dh = width / heads;
  const std::size_t frames = rows / n;
  std::vector<std::size_t> offsets(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + graph.neighbors[i].size();
  const std::size_t per_head = offsets[n];

  const T* w = wh.data().data();
  const T* a = attention.data().data();
  std::vector<T> alpha(frames * heads * per_head);
  std::vector<T> pre(alpha.size());
  std::vector<T> out(rows * width, T(0));
  std::vector<T> s(n), t(n);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t h = 0; h < heads; ++h) {
      const T* al = a + h * 2 * dh;
      const T* ar = al + dh;
      for (std::size_t i = 0; i < n; ++i) {
        const T* row = w + (f * n + i) * width + h * dh;
        T si = 0, ti = 0;
        for (std::size_t d = 0; d < dh; ++d) {
          si += al[d] * row[d];
          ti += ar[d] * row[d];
        }
        s[i] = si;
        t[i] = ti;
      }
      T* alpha_fh = alpha.data() + (f * heads + h) * per_head;
      T* pre_fh = pre.data() + (f * heads + h) * per_head;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& nb = graph.neighbors[i];
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t q = 0; q < nb.size(); ++q) {
          const T p = s[i] + t[nb[q]];
          pre_fh[offsets[i] + q] = p;
          const T e = p > T(0) ? p : static_cast<T>(slope) * p;
          alpha_fh[offsets[i] + q] = e;
          mx = std::max(mx, e);
        }
        T total = 0;
        for (std::size_t q = 0; q < nb.size(); ++q) {
          T& v = alpha_fh[offsets[i] + q];
          v = std::exp(v - mx);
          total += v;
        }
        T* dst = out.data() + (f * n + i) * width + h * dh;
        for (std::size_t q = 0; q < nb.size(); ++q) {
          T& v = alpha_fh[offsets[i] + q];
          v /= total;
          const T* src = w + (f * n + nb[q]) * width + h * dh;
          for (std::size_t d = 0; d < dh; ++d) dst[d] += v * src[d];
        }
      }
    }
  }
  if (attention_out) *attention_out = alpha;

  NodePtr<T> wn = wh.node();
  NodePtr<T> an = attention.node();
  const FacialGraph* g = &graph;
  return make_result<T>(
      "gat_attention", wh.shape(), std::move(out), {wn, an},
      [wn, an, g, offsets, per_head, frames, heads, dh, width, n, slope, alpha = std::move(alpha),
       pre = std::move(pre)](const TensorNode<T>& o) {
        const T* w = wn->data.data();
        const T* a = an->data.data();
        std::vector<T> ds(n), dt(n), dalpha;
        for (std::size_t f = 0; f < frames; ++f) {
          for (std::size_t h = 0; h < heads; ++h) {
            std::fill(ds.begin(), ds.end(), T(0));
            std::fill(dt.begin(), dt.end(), T(0));
            const T* alpha_fh = alpha.data() + (f * heads + h) * per_head;
            const T* pre_fh = pre.data() + (f * heads + h) * per_head;
            for (std::size_t i = 0; i < n; ++i) {
              const auto& nb = g->neighbors[i];
              const T* gout = o.grad.data() + (f * n + i) * width + h * dh;
              dalpha.assign(nb.size(), T(0));
              T weighted = 0;
              for (std::size_t q = 0; q < nb.size(); ++q) {
                const T* src = w + (f * n + nb[q]) * width + h * dh;
                T acc = 0;
                for (std::size_t d = 0; d < dh; ++d) acc += gout[d] * src[d];
                dalpha[q] = acc;
                weighted += alpha_fh[offsets[i] + q] * acc;
                if (wn->requires_grad) {
                  T* gsrc = wn->grad.data() + (f * n + nb[q]) * width + h * dh;
                  const T al = alpha_fh[offsets[i] + q];
                  for (std::size_t d = 0; d < dh; ++d) gsrc[d] += al * gout[d];
                }
              }
              for (std::size_t q = 0; q < nb.size(); ++q) {
                const T de = alpha_fh[offsets[i] + q] * (dalpha[q] - weighted);
                const T dp = de * (pre_fh[offsets[i] + q] > T(0) ? T(1) : static_cast<T>(slope));
                ds[i] += dp;
                dt[nb[q]] += dp;
              }
            }
            const T* al = a + h * 2 * dh;
            const T* ar = al + dh;
            for (std::size_t i = 0; i < n; ++i) {
              const T* row = w + (f * n + i) * width + h * dh;
              if (wn->requires_grad) {
                T* grow = wn->grad.data() + (f * n + i) * width + h * dh;
                for (std::size_t d = 0; d < dh; ++d) grow[d] += ds[i] * al[d] + dt[i] * ar[d];
              }
              if (an->requires_grad) {
                T* gal = an->grad.data() + h * 2 * dh;
                T* gar = gal + dh;
                for (std::size_t d = 0; d < dh; ++d) {
                  gal[d] += ds[i] * row[d];
                  gar[d] += dt[i] * row[d];
                }
              }
            }
          }
        }
      });
}

}  // namespace

template <class T>
Tensor<T> gat_layer(const Tensor<T>& x, const FacialGraph& graph, const GatParams<T>& params,
                    const GatOptions& opts, std::vector<T>* attention_out) {
  const bool framed = x.ndim() == 3;
  if (!(framed || x.ndim() == 2) || x.shape()[framed ? 1 : 0] != graph.node_count)
    throw DimensionError("gat_layer: features " + shape_str(x.shape()) + " do not match a " +
                         std::to_string(graph.node_count) + "-node graph");
  const std::size_t in = x.shape().back();
  if (in != params.weight.shape()[1])
    throw DimensionError("gat_layer: features " + shape_str(x.shape()) + " do not match weight " +
                         shape_str(params.weight.shape()));
  const std::size_t frames = framed ? x.shape()[0] : 1;
  const std::size_t rows = frames * graph.node_count;
  const std::size_t width = params.out_features();
  Tensor<T> wh = matmul_nt(reshape(x, {rows, in}), params.weight);
  Tensor<T> agg = gat_aggregate(wh, params.attention, graph, params.heads, opts.attention_slope, attention_out);
  Tensor<T> shaped = framed ? reshape(agg, {frames, graph.node_count, width}) : agg;
  return activate(shaped, opts.activation, static_cast<T>(opts.leaky_slope));
}

template <class T>
Tensor<T> frame_embed(const Tensor<T>& features, const FacialGraph& graph,
                      const std::vector<GatParams<T>>& layers, const GatOptions& opts) {
  if (layers.empty()) throw ConfigError("frame_embed: no GAT layers configured");
  Tensor<T> h = features;
  for (const auto& layer : layers) h = gat_layer(h, graph, layer, opts);
  return mean(h, -2);
}

template <class T>
Tensor<T> shot_pool(const std::vector<Tensor<T>>& frame_embeddings) {
  return mean_pool(frame_embeddings);
}

template <class T>
LstmParams<T> LstmParams<T>::init(std::size_t in, std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.w_input = glorot_uniform<T>({4 * hidden, in}, in, 4 * hidden, rng);
  p.w_hidden = glorot_uniform<T>({4 * hidden, hidden}, hidden, 4 * hidden, rng);
  p.bias = Tensor<T>::zeros({4 * hidden}, true);
  return p;
}

template <class T>
GruParams<T> GruParams<T>::init(std::size_t in, std::size_t hidden, Rng& rng) {
  GruParams p;
  p.w_input = glorot_uniform<T>({3 * hidden, in}, in, 3 * hidden, rng);
  p.w_hidden = glorot_uniform<T>({3 * hidden, hidden}, hidden, 3 * hidden, rng);
  p.bias_input = Tensor<T>::zeros({3 * hidden}, true);
  p.bias_hidden = Tensor<T>::zeros({3 * hidden}, true);
  return p;
}

template <class T>
std::vector<Tensor<T>> lstm_forward(const std::vector<Tensor<T>>& sequence, const LstmParams<T>& p) {
  if (sequence.empty()) throw ContractError("lstm_forward: empty sequence");
  const std::size_t hsz = p.hidden();
  Tensor<T> h = Tensor<T>::zeros({hsz});
  Tensor<T> c = Tensor<T>::zeros({hsz});
  std::vector<Tensor<T>> states;
  for (const auto& x : sequence) {
    Tensor<T> gates = add(add(matmul(p.w_input, x), matmul(p.w_hidden, h)), p.bias);
    Tensor<T> i = sigmoid(slice(gates, 0, 0, hsz));
    Tensor<T> f = sigmoid(slice(gates, 0, hsz, 2 * hsz));
    Tensor<T> g = tanh(slice(gates, 0, 2 * hsz, 3 * hsz));
    Tensor<T> o = sigmoid(slice(gates, 0, 3 * hsz, 4 * hsz));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    states.push_back(h);
  }
  return states;
}

template <class T>
std::vector<Tensor<T>> gru_states(const std::vector<Tensor<T>>& sequence, const GruParams<T>& p) {
  if (sequence.empty()) throw ContractError("gru_forward: empty sequence");
  const std::size_t hsz = p.hidden();
  Tensor<T> h = Tensor<T>::zeros({hsz});
  std::vector<Tensor<T>> states;
  for (const auto& x : sequence) {
    Tensor<T> gx = add(matmul(p.w_input, x), p.bias_input);
    Tensor<T> gh = add(matmul(p.w_hidden, h), p.bias_hidden);
    Tensor<T> r = sigmoid(add(slice(gx, 0, 0, hsz), slice(gh, 0, 0, hsz)));
    Tensor<T> z = sigmoid(add(slice(gx, 0, hsz, 2 * hsz), slice(gh, 0, hsz, 2 * hsz)));
    Tensor<T> cand = tanh(add(slice(gx, 0, 2 * hsz, 3 * hsz), mul(r, slice(gh, 0, 2 * hsz, 3 * hsz))));
    h = add(cand, mul(z, sub(h, cand)));
    states.push_back(h);
  }
  return states;
}

template <class T>
Tensor<T> gru_forward(const std::vector<Tensor<T>>& sequence, const GruParams<T>& p) {
  return gru_states(sequence, p).back();
}

#define SHOTFUSE_INSTANTIATE(T)                                                                   \
  template Tensor<T> shot_coordinates<T>(const LandmarkShot&, bool);                              \
  template Tensor<T> normalize_frames(const Tensor<T>&);                                          \
  template Tensor<T> node_features(const Tensor<T>&, bool, T);                                    \
  template struct GatParams<T>;                                                                   \
  template Tensor<T> gat_layer(const Tensor<T>&, const FacialGraph&, const GatParams<T>&,         \
                               const GatOptions&, std::vector<T>*);                               \
  template Tensor<T> frame_embed(const Tensor<T>&, const FacialGraph&,                            \
                                 const std::vector<GatParams<T>>&, const GatOptions&);            \
  template Tensor<T> shot_pool(const std::vector<Tensor<T>>&);                                    \
  template struct LstmParams<T>;                                                                  \
  template struct GruParams<T>;                                                                   \
  template std::vector<Tensor<T>> lstm_forward(const std::vector<Tensor<T>>&, const LstmParams<T>&); \
  template std::vector<Tensor<T>> gru_states(const std::vector<Tensor<T>>&, const GruParams<T>&); \
  template Tensor<T> gru_forward(const std::vector<Tensor<T>>&, const GruParams<T>&);
SHOTFUSE_INSTANTIATE(float)
SHOTFUSE_INSTANTIATE(double)
#undef SHOTFUSE_INSTANTIATE

}  // namespace shotfuse
