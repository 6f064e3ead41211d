// src/nnet.cpp
//
// Copyright 2026 The Echolab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "echolab/nnet.hpp"

#include <cmath>

#include "json.hpp"

namespace echolab {
namespace nnet {

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["d_rate"] = d_rate;
  j["in_dim"] = in_dim;
  j["d_model"] = d_model;
  j["n_layers"] = n_layers;
  j["n_heads"] = n_heads;
  j["ffn_dim"] = ffn_dim;
  j["head_hidden"] = head_hidden;
  j["out_mag_dim"] = out_mag_dim;
  j["n_doa_classes"] = n_doa_classes;
  j["sigma_init"] = sigma_init;
  j["dense_variant"] = dense_variant;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  c.d_rate = j.value("d_rate", c.d_rate);
  c.in_dim = j.value("in_dim", c.in_dim);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.out_mag_dim = j.value("out_mag_dim", c.out_mag_dim);
  c.n_doa_classes = j.value("n_doa_classes", c.n_doa_classes);
  c.sigma_init = j.value("sigma_init", c.sigma_init);
  c.dense_variant = j.value("dense_variant", c.dense_variant);
  c.validate();
  return c;
}

namespace {

template <class S>
void fill_normal(Rng& rng, S scale, EMat<S>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = S(rng.normal()) * scale;
}

template <class S>
S gelu_one(S x) {
  return S(0.5) * x * (S(1) + S(std::erf(double(x) * 0.7071067811865475)));
}

template <class S>
S dgelu_one(S x) {
  const double xd = double(x);
  const double phi = 0.5 * (1.0 + std::erf(xd * 0.7071067811865475));
  const double pdf = std::exp(-0.5 * xd * xd) * 0.3989422804014327;
  return S(phi + xd * pdf);
}

template <class S>
EMat<S> gelu(const EMat<S>& x) {
  return x.unaryExpr([](S v) { return gelu_one(v); });
}

template <class S>
EMat<S> dgelu(const EMat<S>& x) {
  return x.unaryExpr([](S v) { return dgelu_one(v); });
}

template <class S>
EMat<S> affine(const EMat<S>& x, const EMat<S>& w, const EVec<S>& b) {
  EMat<S> y = x * w;
  y.rowwise() += b.transpose();
  return y;
}

template <class S>
EVec<S> colsum(const EMat<S>& m) {
  return m.colwise().sum().transpose();
}

// y = (x - mu) / sqrt(var + eps) * g + b, per row
template <class S>
void layernorm_fwd(const EMat<S>& x, const EVec<S>& g, const EVec<S>& b,
                   EMat<S>* xhat, EVec<S>* inv, EMat<S>* y) {
  const Eigen::Index t = x.rows(), d = x.cols();
  xhat->resize(t, d);
  inv->resize(t);
  y->resize(t, d);
  for (Eigen::Index i = 0; i < t; ++i) {
    const S mu = x.row(i).mean();
    const S var = (x.row(i).array() - mu).square().mean();
    const S is = S(1) / std::sqrt(var + S(kLayerNormEps));
    (*inv)(i) = is;
    xhat->row(i) = ((x.row(i).array() - mu) * is).matrix();
    y->row(i) = ((xhat->row(i).array() * g.transpose().array()) +
                 b.transpose().array())
                    .matrix();
  }
}

template <class S>
void layernorm_bwd(const EMat<S>& dy, const EMat<S>& xhat, const EVec<S>& inv,
                   const EVec<S>& g, EMat<S>* dx, EVec<S>* dg, EVec<S>* db) {
  const Eigen::Index t = dy.rows(), d = dy.cols();
  dx->resize(t, d);
  *dg += (dy.array() * xhat.array()).colwise().sum().transpose().matrix();
  *db += colsum(dy);
  for (Eigen::Index i = 0; i < t; ++i) {
    Eigen::Array<S, 1, Eigen::Dynamic> dxh =
        dy.row(i).array() * g.transpose().array();
    const S m1 = dxh.mean();
    const S m2 = (dxh * xhat.row(i).array()).mean();
    dx->row(i) = ((dxh - m1 - xhat.row(i).array() * m2) * inv(i)).matrix();
  }
}

// G_ij = exp(-(i-j)^2 / (2 sigma^2))
template <class S>
EMat<S> gaussian_mask(Eigen::Index t, S sigma) {
  EMat<S> g(t, t);
  const S denom = S(1) / (S(2) * sigma * sigma);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j) {
      const S d = S(i - j);
      g(i, j) = std::exp(-d * d * denom);
    }
  return g;
}

template <class S>
void softmax_rows(EMat<S>* m) {
  for (Eigen::Index i = 0; i < m->rows(); ++i) {
    const S mx = m->row(i).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (m->row(i).array() - mx).exp();
    m->row(i) = (e / e.sum()).matrix();
  }
}

template <class S>
void head_fwd(const HeadParams<S>& hp, const EMat<S>& x, EMat<S>* pre,
              EMat<S>* act, EMat<S>* out) {
  *pre = affine(x, hp.w1, hp.b1);
  *act = gelu(*pre);
  *out = affine(*act, hp.w2, hp.b2);
}

// returns d(x); accumulates parameter grads
template <class S>
EMat<S> head_bwd(const HeadParams<S>& hp, const EMat<S>& x, const EMat<S>& pre,
                 const EMat<S>& act, const EMat<S>& dout, HeadParams<S>* g) {
  g->w2 += act.transpose() * dout;
  g->b2 += colsum(dout);
  EMat<S> dact = dout * hp.w2.transpose();
  EMat<S> dpre = dact.cwiseProduct(dgelu(pre));
  g->w1 += x.transpose() * dpre;
  g->b1 += colsum(dpre);
  return dpre * hp.w1.transpose();
}

}  // namespace

template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const S w0 = S(0.02);
  const int d = cfg.d_model;

  ModelParams<S> p;
  p.config = cfg;
  p.preseq_w.resize(cfg.in_dim, d);
  fill_normal(rng, w0, p.preseq_w);
  p.preseq_b = EVec<S>::Zero(d);

  p.layers.resize(size_t(cfg.n_layers));
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerParams<S>& lp = p.layers[size_t(l)];
    lp.ln1_g = EVec<S>::Ones(d);
    lp.ln1_b = EVec<S>::Zero(d);
    lp.ln2_g = EVec<S>::Ones(d);
    lp.ln2_b = EVec<S>::Zero(d);
    for (EMat<S>* w : {&lp.attn.wq, &lp.attn.wk, &lp.attn.wv, &lp.attn.wo}) {
      w->resize(d, d);
      fill_normal(rng, w0, *w);
    }
    lp.attn.bq = EVec<S>::Zero(d);
    lp.attn.bk = EVec<S>::Zero(d);
    lp.attn.bv = EVec<S>::Zero(d);
    lp.attn.bo = EVec<S>::Zero(d);
    lp.attn.sigma = EVec<S>::Constant(cfg.n_heads, S(cfg.sigma_init));
    lp.ffn_w1.resize(d, cfg.ffn_dim);
    fill_normal(rng, w0, lp.ffn_w1);
    lp.ffn_b1 = EVec<S>::Zero(cfg.ffn_dim);
    lp.ffn_w2.resize(cfg.ffn_dim, d);
    fill_normal(rng, w0, lp.ffn_w2);
    lp.ffn_b2 = EVec<S>::Zero(d);
    if (cfg.dense_variant) {
      lp.in_w.resize((l + 1) * d, d);
      fill_normal(rng, w0, lp.in_w);
      lp.in_b = EVec<S>::Zero(d);
    }
  }

  auto head = [&](int out_dim) {
    HeadParams<S> h;
    h.w1.resize(d, cfg.head_hidden);
    fill_normal(rng, w0, h.w1);
    h.b1 = EVec<S>::Zero(cfg.head_hidden);
    h.w2.resize(cfg.head_hidden, out_dim);
    fill_normal(rng, w0, h.w2);
    h.b2 = EVec<S>::Zero(out_dim);
    return h;
  };
  p.head_mag0 = head(cfg.out_mag_dim);
  p.head_doa = head(cfg.n_doa_classes);
  p.head_mag1 = head(cfg.out_mag_dim);
  return p;
}

template <class S>
ModelParams<S> zeros_like(const ModelParams<S>& p) {
  ModelParams<S> z;
  z.config = p.config;
  z.preseq_w = EMat<S>::Zero(p.preseq_w.rows(), p.preseq_w.cols());
  z.preseq_b = EVec<S>::Zero(p.preseq_b.size());
  z.layers.resize(p.layers.size());
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const LayerParams<S>& a = p.layers[l];
    LayerParams<S>& b = z.layers[l];
    b.ln1_g = EVec<S>::Zero(a.ln1_g.size());
    b.ln1_b = EVec<S>::Zero(a.ln1_b.size());
    b.ln2_g = EVec<S>::Zero(a.ln2_g.size());
    b.ln2_b = EVec<S>::Zero(a.ln2_b.size());
    b.attn.wq = EMat<S>::Zero(a.attn.wq.rows(), a.attn.wq.cols());
    b.attn.wk = EMat<S>::Zero(a.attn.wk.rows(), a.attn.wk.cols());
    b.attn.wv = EMat<S>::Zero(a.attn.wv.rows(), a.attn.wv.cols());
    b.attn.wo = EMat<S>::Zero(a.attn.wo.rows(), a.attn.wo.cols());
    b.attn.bq = EVec<S>::Zero(a.attn.bq.size());
    b.attn.bk = EVec<S>::Zero(a.attn.bk.size());
    b.attn.bv = EVec<S>::Zero(a.attn.bv.size());
    b.attn.bo = EVec<S>::Zero(a.attn.bo.size());
    b.attn.sigma = EVec<S>::Zero(a.attn.sigma.size());
    b.ffn_w1 = EMat<S>::Zero(a.ffn_w1.rows(), a.ffn_w1.cols());
    b.ffn_b1 = EVec<S>::Zero(a.ffn_b1.size());
    b.ffn_w2 = EMat<S>::Zero(a.ffn_w2.rows(), a.ffn_w2.cols());
    b.ffn_b2 = EVec<S>::Zero(a.ffn_b2.size());
    if (a.in_w.size() > 0) {
      b.in_w = EMat<S>::Zero(a.in_w.rows(), a.in_w.cols());
      b.in_b = EVec<S>::Zero(a.in_b.size());
    }
  }
  auto zh = [](const HeadParams<S>& a) {
    HeadParams<S> h;
    h.w1 = EMat<S>::Zero(a.w1.rows(), a.w1.cols());
    h.b1 = EVec<S>::Zero(a.b1.size());
    h.w2 = EMat<S>::Zero(a.w2.rows(), a.w2.cols());
    h.b2 = EVec<S>::Zero(a.b2.size());
    return h;
  };
  z.head_mag0 = zh(p.head_mag0);
  z.head_doa = zh(p.head_doa);
  z.head_mag1 = zh(p.head_mag1);
  return z;
}

template <class S>
std::vector<ParamRef<S>> param_refs(ModelParams<S>& p) {
  std::vector<ParamRef<S>> refs;
  auto add_m = [&](const std::string& name, EMat<S>& m, bool sig = false) {
    refs.push_back({name, m.data(), size_t(m.size()),
                    {size_t(m.rows()), size_t(m.cols())}, sig});
  };
  auto add_v = [&](const std::string& name, EVec<S>& v, bool sig = false) {
    refs.push_back({name, v.data(), size_t(v.size()),
                    {size_t(v.size()), 1}, sig});
  };
  add_m("preseq.w", p.preseq_w);
  add_v("preseq.b", p.preseq_b);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    LayerParams<S>& lp = p.layers[l];
    const std::string base = "layer" + std::to_string(l) + ".";
    if (lp.in_w.size() > 0) {
      add_m(base + "in_proj.w", lp.in_w);
      add_v(base + "in_proj.b", lp.in_b);
    }
    add_v(base + "ln1.g", lp.ln1_g);
    add_v(base + "ln1.b", lp.ln1_b);
    add_m(base + "attn.wq", lp.attn.wq);
    add_v(base + "attn.bq", lp.attn.bq);
    add_m(base + "attn.wk", lp.attn.wk);
    add_v(base + "attn.bk", lp.attn.bk);
    add_m(base + "attn.wv", lp.attn.wv);
    add_v(base + "attn.bv", lp.attn.bv);
    add_m(base + "attn.wo", lp.attn.wo);
    add_v(base + "attn.bo", lp.attn.bo);
    add_v(base + "attn.sigma", lp.attn.sigma, true);
    add_v(base + "ln2.g", lp.ln2_g);
    add_v(base + "ln2.b", lp.ln2_b);
    add_m(base + "ffn.w1", lp.ffn_w1);
    add_v(base + "ffn.b1", lp.ffn_b1);
    add_m(base + "ffn.w2", lp.ffn_w2);
    add_v(base + "ffn.b2", lp.ffn_b2);
  }
  auto add_head = [&](const std::string& base, HeadParams<S>& h) {
    add_m(base + ".w1", h.w1);
    add_v(base + ".b1", h.b1);
    add_m(base + ".w2", h.w2);
    add_v(base + ".b2", h.b2);
  };
  add_head("head_mag0", p.head_mag0);
  add_head("head_doa", p.head_doa);
  add_head("head_mag1", p.head_mag1);
  return refs;
}

template <class S>
size_t param_count(const ModelParams<S>& p) {
  size_t n = 0;
  auto refs = param_refs(const_cast<ModelParams<S>&>(p));
  for (const auto& r : refs) n += r.size;
  return n;
}

template <class S>
EMat<S> sinusoidal_pe(int t_frames, int d_model) {
  EMat<S> pe(t_frames, d_model);
  for (int t = 0; t < t_frames; ++t)
    for (int i = 0; i < d_model; i += 2) {
      const double angle =
          double(t) / std::pow(10000.0, double(i) / double(d_model));
      pe(t, i) = S(std::sin(angle));
      if (i + 1 < d_model) pe(t, i + 1) = S(std::cos(angle));
    }
  return pe;
}

namespace {

// attention with gaussian-weighted absolute scores; fills the trace slices
template <class S>
void attention_fwd(const AttnParams<S>& ap, int n_heads, const EMat<S>& x,
                   int valid_len, LayerTrace<S>* tr, EMat<S>* out) {
  const Eigen::Index t = x.rows(), d = x.cols();
  const Eigen::Index dh = d / n_heads;
  const S scale = S(1) / std::sqrt(S(dh));

  tr->q = affine(x, ap.wq, ap.bq);
  tr->k = affine(x, ap.wk, ap.bk);
  tr->v = affine(x, ap.wv, ap.bv);
  tr->scores.assign(size_t(n_heads), EMat<S>());
  tr->attnw.assign(size_t(n_heads), EMat<S>());
  tr->attn_concat.resize(t, d);

  for (int h = 0; h < n_heads; ++h) {
    auto qh = tr->q.middleCols(h * dh, dh);
    auto kh = tr->k.middleCols(h * dh, dh);
    auto vh = tr->v.middleCols(h * dh, dh);
    EMat<S>& sc = tr->scores[size_t(h)];
    sc = (qh * kh.transpose()) * scale;

    const S sigma = std::max(ap.sigma(h), S(kSigmaMin));
    EMat<S> w = gaussian_mask<S>(t, sigma).cwiseProduct(sc.cwiseAbs());
    if (valid_len >= 0 && valid_len < int(t))
      w.rightCols(t - valid_len).setConstant(S(-1e30));
    softmax_rows(&w);
    tr->attnw[size_t(h)] = w;
    tr->attn_concat.middleCols(h * dh, dh) = w * vh;
  }
  *out = affine(tr->attn_concat, ap.wo, ap.bo);
}

// upstream dout -> dx; accumulates attention parameter grads
template <class S>
EMat<S> attention_bwd(const AttnParams<S>& ap, int n_heads, const EMat<S>& x,
                      const LayerTrace<S>& tr, const EMat<S>& dout,
                      AttnParams<S>* g) {
  const Eigen::Index t = x.rows(), d = x.cols();
  const Eigen::Index dh = d / n_heads;
  const S scale = S(1) / std::sqrt(S(dh));

  g->wo += tr.attn_concat.transpose() * dout;
  g->bo += colsum(dout);
  EMat<S> dconcat = dout * ap.wo.transpose();

  EMat<S> dq = EMat<S>::Zero(t, d), dk = EMat<S>::Zero(t, d),
          dv = EMat<S>::Zero(t, d);
  for (int h = 0; h < n_heads; ++h) {
    auto qh = tr.q.middleCols(h * dh, dh);
    auto kh = tr.k.middleCols(h * dh, dh);
    auto vh = tr.v.middleCols(h * dh, dh);
    const EMat<S>& a = tr.attnw[size_t(h)];
    const EMat<S>& sc = tr.scores[size_t(h)];
    auto dch = dconcat.middleCols(h * dh, dh);

    EMat<S> da = dch * vh.transpose();
    dv.middleCols(h * dh, dh) = a.transpose() * dch;

    // softmax jacobian
    EVec<S> rsum = (da.cwiseProduct(a)).rowwise().sum();
    EMat<S> dw = a.cwiseProduct(da - rsum * Eigen::Matrix<S, 1, Eigen::Dynamic>::Ones(t));

    const S sigma = std::max(ap.sigma(h), S(kSigmaMin));
    EMat<S> gm = gaussian_mask<S>(t, sigma);
    // d sigma through G = exp(-(i-j)^2 / (2 sigma^2))
    S dsig = 0;
    const S inv3 = S(1) / (sigma * sigma * sigma);
    for (Eigen::Index i = 0; i < t; ++i)
      for (Eigen::Index j = 0; j < t; ++j) {
        const S dist = S(i - j);
        dsig += dw(i, j) * std::abs(sc(i, j)) * gm(i, j) * dist * dist * inv3;
      }
    if (ap.sigma(h) >= S(kSigmaMin)) g->sigma(h) += dsig;

    EMat<S> ds = dw.cwiseProduct(gm)
                     .cwiseProduct(sc.unaryExpr([](S v) {
                       return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0));
                     }));
    dq.middleCols(h * dh, dh) = (ds * kh) * scale;
    dk.middleCols(h * dh, dh) = (ds.transpose() * qh) * scale;
  }

  g->wq += x.transpose() * dq;
  g->bq += colsum(dq);
  g->wk += x.transpose() * dk;
  g->bk += colsum(dk);
  g->wv += x.transpose() * dv;
  g->bv += colsum(dv);
  return dq * ap.wq.transpose() + dk * ap.wk.transpose() +
         dv * ap.wv.transpose();
}

}  // namespace

template <class S>
ModelOutput<S> forward(const ModelParams<S>& params, const EMat<S>& input,
                       Task task, ForwardTrace<S>* trace, int valid_len) {
  const ModelConfig& cfg = params.config;
  ECHOLAB_REQUIRE(input.cols() == cfg.in_dim, "input feature dim ",
                  input.cols(), " does not match model in_dim ", cfg.in_dim);
  ECHOLAB_REQUIRE(input.rows() >= 1, "empty input sequence");
  const Eigen::Index t = input.rows();

  ForwardTrace<S> local;
  ForwardTrace<S>& tr = trace ? *trace : local;
  tr = ForwardTrace<S>();
  tr.task = task;
  tr.input = input;

  tr.preseq_pre = affine(input, params.preseq_w, params.preseq_b);
  EMat<S> h0 = gelu(tr.preseq_pre) + sinusoidal_pe<S>(int(t), cfg.d_model);
  tr.h.push_back(std::move(h0));
  tr.layers.resize(size_t(cfg.n_layers));

  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerParams<S>& lp = params.layers[size_t(l)];
    LayerTrace<S>& lt = tr.layers[size_t(l)];

    if (cfg.dense_variant) {
      EMat<S> concat(t, Eigen::Index(l + 1) * cfg.d_model);
      for (int j = 0; j <= l; ++j)
        concat.middleCols(Eigen::Index(j) * cfg.d_model, cfg.d_model) =
            tr.h[size_t(j)];
      lt.x_in = affine(concat, lp.in_w, lp.in_b);
    } else {
      lt.x_in = tr.h.back();
    }

    layernorm_fwd(lt.x_in, lp.ln1_g, lp.ln1_b, &lt.ln1_xhat, &lt.ln1_inv,
                  &lt.ln1_y);
    EMat<S> attn_out;
    attention_fwd(lp.attn, cfg.n_heads, lt.ln1_y, valid_len, &lt, &attn_out);
    lt.x1 = lt.x_in + attn_out;

    layernorm_fwd(lt.x1, lp.ln2_g, lp.ln2_b, &lt.ln2_xhat, &lt.ln2_inv,
                  &lt.ln2_y);
    lt.ffn_pre = affine(lt.ln2_y, lp.ffn_w1, lp.ffn_b1);
    lt.ffn_act = gelu(lt.ffn_pre);
    EMat<S> ffn_out = affine(lt.ffn_act, lp.ffn_w2, lp.ffn_b2);
    tr.h.push_back(lt.x1 + ffn_out);
  }

  const EMat<S>& last = tr.h.back();
  ModelOutput<S> out;
  if (task == Task::kDereverbDoa) {
    head_fwd(params.head_mag0, last, &tr.head_pre[0], &tr.head_act[0],
             &out.mag0);
    head_fwd(params.head_doa, last, &tr.head_pre[1], &tr.head_act[1],
             &out.doa);
  } else {
    head_fwd(params.head_mag0, last, &tr.head_pre[0], &tr.head_act[0],
             &out.mag0);
    head_fwd(params.head_mag1, last, &tr.head_pre[2], &tr.head_act[2],
             &out.mag1);
  }
  return out;
}

template <class S>
void backward(const ModelParams<S>& params, const ForwardTrace<S>& trace,
              const EMat<S>& d_mag0, const EMat<S>& d_doa,
              const EMat<S>& d_mag1, ModelParams<S>* grad) {
  const ModelConfig& cfg = params.config;
  ECHOLAB_REQUIRE(!trace.h.empty(), "backward called without a forward tape");
  const EMat<S>& last = trace.h.back();
  const Eigen::Index t = last.rows();

  EMat<S> dlast = EMat<S>::Zero(t, cfg.d_model);
  if (d_mag0.size() > 0)
    dlast += head_bwd(params.head_mag0, last, trace.head_pre[0],
                      trace.head_act[0], d_mag0, &grad->head_mag0);
  if (d_doa.size() > 0) {
    ECHOLAB_REQUIRE(trace.task == Task::kDereverbDoa,
                    "doa gradient for a task-2 trace");
    dlast += head_bwd(params.head_doa, last, trace.head_pre[1],
                      trace.head_act[1], d_doa, &grad->head_doa);
  }
  if (d_mag1.size() > 0) {
    ECHOLAB_REQUIRE(trace.task == Task::kSeparate,
                    "mag1 gradient for a task-1 trace");
    dlast += head_bwd(params.head_mag1, last, trace.head_pre[2],
                      trace.head_act[2], d_mag1, &grad->head_mag1);
  }

  // dh[j] holds the gradient w.r.t. trace.h[j]
  std::vector<EMat<S>> dh(trace.h.size());
  for (auto& m : dh) m = EMat<S>::Zero(t, cfg.d_model);
  dh.back() = dlast;

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerParams<S>& lp = params.layers[size_t(l)];
    LayerParams<S>& lg = grad->layers[size_t(l)];
    const LayerTrace<S>& lt = trace.layers[size_t(l)];
    const EMat<S>& dout = dh[size_t(l) + 1];

    // ffn branch
    lg.ffn_w2 += lt.ffn_act.transpose() * dout;
    lg.ffn_b2 += colsum(dout);
    EMat<S> dact = dout * lp.ffn_w2.transpose();
    EMat<S> dpre = dact.cwiseProduct(dgelu(lt.ffn_pre));
    lg.ffn_w1 += lt.ln2_y.transpose() * dpre;
    lg.ffn_b1 += colsum(dpre);
    EMat<S> dln2y = dpre * lp.ffn_w1.transpose();

    EMat<S> dx1;
    layernorm_bwd(dln2y, lt.ln2_xhat, lt.ln2_inv, lp.ln2_g, &dx1, &lg.ln2_g,
                  &lg.ln2_b);
    dx1 += dout;  // residual

    // attention branch
    EMat<S> dln1y =
        attention_bwd(lp.attn, cfg.n_heads, lt.ln1_y, lt, dx1, &lg.attn);
    EMat<S> dxin;
    layernorm_bwd(dln1y, lt.ln1_xhat, lt.ln1_inv, lp.ln1_g, &dxin, &lg.ln1_g,
                  &lg.ln1_b);
    dxin += dx1;  // residual

    if (cfg.dense_variant) {
      lg.in_b += colsum(dxin);
      for (int j = 0; j <= l; ++j) {
        lg.in_w.middleRows(Eigen::Index(j) * cfg.d_model, cfg.d_model) +=
            trace.h[size_t(j)].transpose() * dxin;
        dh[size_t(j)] +=
            dxin *
            lp.in_w.middleRows(Eigen::Index(j) * cfg.d_model, cfg.d_model)
                .transpose();
      }
    } else {
      dh[size_t(l)] += dxin;
    }
  }

  // preseq: h0 = gelu(pre) + positional encoding
  EMat<S> dpre = dh[0].cwiseProduct(dgelu(trace.preseq_pre));
  grad->preseq_w += trace.input.transpose() * dpre;
  grad->preseq_b += colsum(dpre);
}

GradCheckReport grad_check(
    const ModelConfig& cfg, Task task, uint64_t seed,
    const std::function<void(ModelParams<double>*)>& mutate_grads) {
  cfg.validate();
  const int t = 8;
  ModelParams<double> params = init_params<double>(cfg, seed);
  Rng rng(seed ^ 0x5eedf00dULL);

  EMat<double> input(t, cfg.in_dim);
  fill_normal(rng, 1.0, input);
  EMat<double> u0(t, cfg.out_mag_dim);
  fill_normal(rng, 1.0, u0);
  EMat<double> u1(t, cfg.n_doa_classes);
  fill_normal(rng, 1.0, u1);
  EMat<double> u2(t, cfg.out_mag_dim);
  fill_normal(rng, 1.0, u2);

  const bool task1 = task == Task::kDereverbDoa;
  auto loss = [&](const ModelParams<double>& p) {
    ModelOutput<double> out = forward(p, input, task);
    double l = out.mag0.cwiseProduct(u0).sum();
    if (task1)
      l += out.doa.cwiseProduct(u1).sum();
    else
      l += out.mag1.cwiseProduct(u2).sum();
    return l;
  };

  ForwardTrace<double> trace;
  forward(params, input, task, &trace);
  ModelParams<double> grads = zeros_like(params);
  backward(params, trace, u0, task1 ? u1 : EMat<double>(),
           task1 ? EMat<double>() : u2, &grads);
  if (mutate_grads) mutate_grads(&grads);

  GradCheckReport rep;
  auto refs = param_refs(params);
  auto grefs = param_refs(grads);
  const double h = 1e-5;
  for (size_t r = 0; r < refs.size(); ++r) {
    for (size_t i = 0; i < refs[r].size; ++i) {
      const double orig = refs[r].data[i];
      refs[r].data[i] = orig + h;
      const double lp = loss(params);
      refs[r].data[i] = orig - h;
      const double lm = loss(params);
      refs[r].data[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = grefs[r].data[i];
      const double rel = std::abs(analytic - numeric) /
                         (std::abs(analytic) + std::abs(numeric) + 1e-4);
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = refs[r].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

// explicit instantiations
template struct ModelParams<float>;
template struct ModelParams<double>;

#define ECHOLAB_INSTANTIATE(S)                                               \
  template ModelParams<S> init_params<S>(const ModelConfig&, uint64_t);      \
  template ModelParams<S> zeros_like<S>(const ModelParams<S>&);              \
  template std::vector<ParamRef<S>> param_refs<S>(ModelParams<S>&);          \
  template size_t param_count<S>(const ModelParams<S>&);                     \
  template EMat<S> sinusoidal_pe<S>(int, int);                               \
  template ModelOutput<S> forward<S>(const ModelParams<S>&, const EMat<S>&,  \
                                     Task, ForwardTrace<S>*, int);           \
  template void backward<S>(const ModelParams<S>&, const ForwardTrace<S>&,   \
                            const EMat<S>&, const EMat<S>&, const EMat<S>&,  \
                            ModelParams<S>*);

ECHOLAB_INSTANTIATE(float)
ECHOLAB_INSTANTIATE(double)
#undef ECHOLAB_INSTANTIATE

}  // namespace nnet
}  // namespace echolab
