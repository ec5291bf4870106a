#include "kft/lm/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"

namespace kft::lm {

namespace {

constexpr double kLnEps = 1e-5;
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_deriv(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

// y[t][j] = sum_i x[t][i] * w[i][j]
void matmul(const std::vector<double>& x, const std::vector<double>& w, int T,
            int d_in, int d_out, std::vector<double>& y) {
  y.assign(static_cast<size_t>(T) * d_out, 0.0);
  for (int t = 0; t < T; ++t) {
    const double* xr = &x[static_cast<size_t>(t) * d_in];
    double* yr = &y[static_cast<size_t>(t) * d_out];
    for (int i = 0; i < d_in; ++i) {
      double xi = xr[i];
      if (xi == 0.0) continue;
      const double* wr = &w[static_cast<size_t>(i) * d_out];
      for (int j = 0; j < d_out; ++j) yr[j] += xi * wr[j];
    }
  }
}

// layer norm over the last axis, keeping x-hat and 1/std for backward
void layer_norm(const std::vector<double>& x, const std::vector<double>& g,
                const std::vector<double>& b, int T, int d,
                std::vector<double>& y, std::vector<double>& xhat,
                std::vector<double>& rstd) {
  y.assign(static_cast<size_t>(T) * d, 0.0);
  xhat.assign(static_cast<size_t>(T) * d, 0.0);
  rstd.assign(static_cast<size_t>(T), 0.0);
  for (int t = 0; t < T; ++t) {
    const double* xr = &x[static_cast<size_t>(t) * d];
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += xr[i];
    mean /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      double c = xr[i] - mean;
      var += c * c;
    }
    var /= d;
    double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd[static_cast<size_t>(t)] = rs;
    for (int i = 0; i < d; ++i) {
      double xh = (xr[i] - mean) * rs;
      xhat[static_cast<size_t>(t) * d + i] = xh;
      y[static_cast<size_t>(t) * d + i] = g[static_cast<size_t>(i)] * xh + b[static_cast<size_t>(i)];
    }
  }
}

void layer_norm_backward(const std::vector<double>& dy,
                         const std::vector<double>& xhat,
                         const std::vector<double>& rstd,
                         const std::vector<double>& g, int T, int d,
                         std::vector<double>& dx, std::vector<double>* dg,
                         std::vector<double>* db) {
  for (int t = 0; t < T; ++t) {
    const double* dyr = &dy[static_cast<size_t>(t) * d];
    const double* xhr = &xhat[static_cast<size_t>(t) * d];
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < d; ++i) {
      double dxh = dyr[i] * g[static_cast<size_t>(i)];
      m1 += dxh;
      m2 += dxh * xhr[i];
    }
    m1 /= d;
    m2 /= d;
    double rs = rstd[static_cast<size_t>(t)];
    for (int i = 0; i < d; ++i) {
      double dxh = dyr[i] * g[static_cast<size_t>(i)];
      dx[static_cast<size_t>(t) * d + i] += rs * (dxh - m1 - xhr[i] * m2);
      if (dg) (*dg)[static_cast<size_t>(i)] += dyr[i] * xhr[i];
      if (db) (*db)[static_cast<size_t>(i)] += dyr[i];
    }
  }
}

}  // namespace

void softmax_row(const double* logits, int n, double* probs_out,
                 double temperature) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double e = std::exp((logits[i] - mx) / temperature);
    probs_out[i] = e;
    sum += e;
  }
  for (int i = 0; i < n; ++i) probs_out[i] /= sum;
}

ForwardCache forward_cached(const ModelState& model, const std::vector<int>& tokens) {
  const auto& c = model.config;
  const int T = static_cast<int>(tokens.size());
  const int d = c.d_model;
  const int H = c.n_heads;
  const int hd = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  if (T == 0) fail(Errc::EmptyInput, "cannot run the model on an empty sequence");
  if (T > c.max_seq) {
    fail(Errc::SequenceTooLong, "sequence length " + std::to_string(T) +
                                    " exceeds max_seq " + std::to_string(c.max_seq));
  }
  for (int tok : tokens) {
    if (tok < 0 || tok >= c.vocab_size) {
      fail(Errc::ConfigInvalid, "token id out of vocab range: " + std::to_string(tok));
    }
  }

  ForwardCache cache;
  cache.T = T;
  cache.tokens = tokens;
  cache.layers.resize(static_cast<size_t>(c.n_layers));

  std::vector<double> x(static_cast<size_t>(T) * d);
  for (int t = 0; t < T; ++t) {
    const double* te = &model.tok_emb[static_cast<size_t>(tokens[static_cast<size_t>(t)]) * d];
    const double* pe = &model.pos_emb[static_cast<size_t>(t) * d];
    for (int i = 0; i < d; ++i) x[static_cast<size_t>(t) * d + i] = te[i] + pe[i];
  }

  const bool has_lora = model.lora.has_value();
  const int r = has_lora ? model.lora->rank : 0;
  const double ls = has_lora ? model.lora->scaling : 0.0;

  for (int l = 0; l < c.n_layers; ++l) {
    auto& L = model.layers[static_cast<size_t>(l)];
    auto& cl = cache.layers[static_cast<size_t>(l)];
    cl.x_in = x;

    layer_norm(cl.x_in, L.ln1_g, L.ln1_b, T, d, cl.h1, cl.ln1_xhat, cl.ln1_rstd);

    matmul(cl.h1, L.attn_q, T, d, d, cl.q);
    matmul(cl.h1, L.attn_k, T, d, d, cl.k);
    matmul(cl.h1, L.attn_v, T, d, d, cl.v);
    if (has_lora) {
      const auto& A = model.lora->layers[static_cast<size_t>(l)];
      matmul(cl.h1, A.q_down, T, d, r, cl.hq);
      matmul(cl.h1, A.v_down, T, d, r, cl.hv);
      std::vector<double> dq, dv;
      matmul(cl.hq, A.q_up, T, r, d, dq);
      matmul(cl.hv, A.v_up, T, r, d, dv);
      for (size_t i = 0; i < cl.q.size(); ++i) cl.q[i] += ls * dq[i];
      for (size_t i = 0; i < cl.v.size(); ++i) cl.v[i] += ls * dv[i];
    }

    cl.probs.assign(static_cast<size_t>(H) * T * T, 0.0);
    cl.ctx.assign(static_cast<size_t>(T) * d, 0.0);
    std::vector<double> srow(static_cast<size_t>(T));
    for (int h = 0; h < H; ++h) {
      const int o = h * hd;
      for (int i = 0; i < T; ++i) {
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          const double* qi = &cl.q[static_cast<size_t>(i) * d + o];
          const double* kj = &cl.k[static_cast<size_t>(j) * d + o];
          for (int cc = 0; cc < hd; ++cc) s += qi[cc] * kj[cc];
          srow[static_cast<size_t>(j)] = s * scale;
        }
        double* prow = &cl.probs[(static_cast<size_t>(h) * T + i) * T];
        softmax_row(srow.data(), i + 1, prow);
        for (int j = 0; j <= i; ++j) {
          double p = prow[j];
          const double* vj = &cl.v[static_cast<size_t>(j) * d + o];
          double* ci = &cl.ctx[static_cast<size_t>(i) * d + o];
          for (int cc = 0; cc < hd; ++cc) ci[cc] += p * vj[cc];
        }
      }
    }

    std::vector<double> attn_out;
    matmul(cl.ctx, L.attn_o, T, d, d, attn_out);
    cl.x_mid.resize(static_cast<size_t>(T) * d);
    for (size_t i = 0; i < cl.x_mid.size(); ++i) cl.x_mid[i] = cl.x_in[i] + attn_out[i];

    layer_norm(cl.x_mid, L.ln2_g, L.ln2_b, T, d, cl.h2, cl.ln2_xhat, cl.ln2_rstd);
    matmul(cl.h2, L.ff_w1, T, d, c.d_ff, cl.ff_pre);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < c.d_ff; ++k) {
        cl.ff_pre[static_cast<size_t>(t) * c.d_ff + k] += L.ff_b1[static_cast<size_t>(k)];
      }
    }
    cl.ff_act.resize(cl.ff_pre.size());
    for (size_t i = 0; i < cl.ff_pre.size(); ++i) cl.ff_act[i] = gelu(cl.ff_pre[i]);
    std::vector<double> ff_out;
    matmul(cl.ff_act, L.ff_w2, T, c.d_ff, d, ff_out);
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < d; ++i) {
        ff_out[static_cast<size_t>(t) * d + i] += L.ff_b2[static_cast<size_t>(i)];
      }
    }
    x.resize(static_cast<size_t>(T) * d);
    for (size_t i = 0; i < x.size(); ++i) x[i] = cl.x_mid[i] + ff_out[i];
  }

  cache.x_final = x;
  layer_norm(cache.x_final, model.final_ln_g, model.final_ln_b, T, d,
             cache.hidden, cache.fin_xhat, cache.fin_rstd);
  matmul(cache.hidden, model.out_proj, T, d, c.vocab_size, cache.logits);
  return cache;
}

ForwardResult forward(const ModelState& model, const std::vector<int>& tokens) {
  ForwardCache cache = forward_cached(model, tokens);
  ForwardResult res;
  res.logits = std::move(cache.logits);
  res.hidden = std::move(cache.hidden);
  res.seq_len = cache.T;
  return res;
}

double nll_from_logits(const std::vector<double>& logits, int vocab_size,
                       const std::vector<int>& tokens,
                       const std::vector<bool>& mask,
                       std::vector<double>* dlogits) {
  const int T = static_cast<int>(tokens.size());
  if (static_cast<int>(mask.size()) != T) {
    fail(Errc::ConfigInvalid, "loss mask length must equal sequence length");
  }
  int n_active = 0;
  for (int i = 0; i + 1 < T; ++i) {
    if (mask[static_cast<size_t>(i)]) ++n_active;
  }
  if (n_active == 0) fail(Errc::EmptyMask, "no masked-in position has a successor token");
  if (dlogits) dlogits->assign(logits.size(), 0.0);

  double total = 0.0;
  std::vector<double> probs(static_cast<size_t>(vocab_size));
  for (int i = 0; i + 1 < T; ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    const double* row = &logits[static_cast<size_t>(i) * vocab_size];
    double mx = row[0];
    for (int j = 1; j < vocab_size; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < vocab_size; ++j) {
      probs[static_cast<size_t>(j)] = std::exp(row[j] - mx);
      sum += probs[static_cast<size_t>(j)];
    }
    int target = tokens[static_cast<size_t>(i) + 1];
    total += -(row[target] - mx - std::log(sum));
    if (dlogits) {
      double* drow = &(*dlogits)[static_cast<size_t>(i) * vocab_size];
      for (int j = 0; j < vocab_size; ++j) {
        drow[j] = probs[static_cast<size_t>(j)] / sum / n_active;
      }
      drow[target] -= 1.0 / n_active;
    }
  }
  return total / n_active;
}

double nll_loss(const ModelState& model, const std::vector<int>& tokens,
                const std::vector<bool>& mask) {
  ForwardResult res = forward(model, tokens);
  return nll_from_logits(res.logits, model.config.vocab_size, tokens, mask, nullptr);
}

ParamMap zero_grads(ModelState& model) {
  ParamMap g;
  for (const auto& ref : named_params(model, true)) {
    g[ref.name].assign(ref.data->size(), 0.0);
  }
  return g;
}

void backward(const ModelState& model, const ForwardCache& cache,
              const std::vector<double>& dlogits,
              const std::vector<double>* dhidden_extra, ParamMap& grads) {
  const auto& c = model.config;
  const int T = cache.T;
  const int d = c.d_model;
  const int H = c.n_heads;
  const int hd = d / H;
  const int V = c.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const bool has_lora = model.lora.has_value();
  const int r = has_lora ? model.lora->rank : 0;
  const double ls = has_lora ? model.lora->scaling : 0.0;

  auto& mut = const_cast<ModelState&>(model);
  ParamMap local = zero_grads(mut);
  auto g = [&](const std::string& name) -> std::vector<double>& { return local.at(name); };

  // output head
  std::vector<double> dhidden(static_cast<size_t>(T) * d, 0.0);
  {
    auto& dW = g("out_proj");
    for (int t = 0; t < T; ++t) {
      const double* hr = &cache.hidden[static_cast<size_t>(t) * d];
      const double* dr = &dlogits[static_cast<size_t>(t) * V];
      for (int i = 0; i < d; ++i) {
        double hi = hr[i];
        const double* wr = &model.out_proj[static_cast<size_t>(i) * V];
        double acc = 0.0;
        for (int j = 0; j < V; ++j) {
          dW[static_cast<size_t>(i) * V + j] += hi * dr[j];
          acc += dr[j] * wr[j];
        }
        dhidden[static_cast<size_t>(t) * d + i] += acc;
      }
    }
  }
  if (dhidden_extra) {
    for (size_t i = 0; i < dhidden.size(); ++i) dhidden[i] += (*dhidden_extra)[i];
  }

  std::vector<double> dx(static_cast<size_t>(T) * d, 0.0);
  layer_norm_backward(dhidden, cache.fin_xhat, cache.fin_rstd, model.final_ln_g,
                      T, d, dx, &g("final_ln_g"), &g("final_ln_b"));

  for (int l = c.n_layers - 1; l >= 0; --l) {
    auto& L = model.layers[static_cast<size_t>(l)];
    const auto& cl = cache.layers[static_cast<size_t>(l)];
    std::string p = "layers." + std::to_string(l) + ".";

    // feed-forward block: x_out = x_mid + gelu(h2 w1 + b1) w2 + b2
    std::vector<double> dx_mid = dx;  // residual path
    {
      std::vector<double> dact(static_cast<size_t>(T) * c.d_ff, 0.0);
      auto& dW2 = g(p + "ff_w2");
      auto& db2 = g(p + "ff_b2");
      for (int t = 0; t < T; ++t) {
        const double* dr = &dx[static_cast<size_t>(t) * d];
        const double* ar = &cl.ff_act[static_cast<size_t>(t) * c.d_ff];
        for (int k = 0; k < c.d_ff; ++k) {
          double ak = ar[k];
          const double* wr = &L.ff_w2[static_cast<size_t>(k) * d];
          double acc = 0.0;
          for (int j = 0; j < d; ++j) {
            dW2[static_cast<size_t>(k) * d + j] += ak * dr[j];
            acc += dr[j] * wr[j];
          }
          dact[static_cast<size_t>(t) * c.d_ff + k] = acc;
        }
        for (int j = 0; j < d; ++j) db2[static_cast<size_t>(j)] += dr[j];
      }
      std::vector<double> dpre(dact.size());
      for (size_t i = 0; i < dact.size(); ++i) {
        dpre[i] = dact[i] * gelu_deriv(cl.ff_pre[i]);
      }
      auto& dW1 = g(p + "ff_w1");
      auto& db1 = g(p + "ff_b1");
      std::vector<double> dh2(static_cast<size_t>(T) * d, 0.0);
      for (int t = 0; t < T; ++t) {
        const double* dpr = &dpre[static_cast<size_t>(t) * c.d_ff];
        const double* h2r = &cl.h2[static_cast<size_t>(t) * d];
        for (int i = 0; i < d; ++i) {
          double hi = h2r[i];
          const double* wr = &L.ff_w1[static_cast<size_t>(i) * c.d_ff];
          double acc = 0.0;
          for (int k = 0; k < c.d_ff; ++k) {
            dW1[static_cast<size_t>(i) * c.d_ff + k] += hi * dpr[k];
            acc += dpr[k] * wr[k];
          }
          dh2[static_cast<size_t>(t) * d + i] = acc;
        }
        for (int k = 0; k < c.d_ff; ++k) db1[static_cast<size_t>(k)] += dpr[k];
      }
      layer_norm_backward(dh2, cl.ln2_xhat, cl.ln2_rstd, L.ln2_g, T, d, dx_mid,
                          &g(p + "ln2_g"), &g(p + "ln2_b"));
    }

    // attention block: x_mid = x_in + ctx @ wo
    std::vector<double> dx_in = dx_mid;  // residual path
    {
      std::vector<double> dctx(static_cast<size_t>(T) * d, 0.0);
      auto& dWo = g(p + "attn_o");
      for (int t = 0; t < T; ++t) {
        const double* dr = &dx_mid[static_cast<size_t>(t) * d];
        const double* cr = &cl.ctx[static_cast<size_t>(t) * d];
        for (int i = 0; i < d; ++i) {
          double ci = cr[i];
          const double* wr = &L.attn_o[static_cast<size_t>(i) * d];
          double acc = 0.0;
          for (int j = 0; j < d; ++j) {
            dWo[static_cast<size_t>(i) * d + j] += ci * dr[j];
            acc += dr[j] * wr[j];
          }
          dctx[static_cast<size_t>(t) * d + i] = acc;
        }
      }

      std::vector<double> dq(static_cast<size_t>(T) * d, 0.0);
      std::vector<double> dk(static_cast<size_t>(T) * d, 0.0);
      std::vector<double> dv(static_cast<size_t>(T) * d, 0.0);
      std::vector<double> dp(static_cast<size_t>(T));
      std::vector<double> dsrow(static_cast<size_t>(T));
      for (int h = 0; h < H; ++h) {
        const int o = h * hd;
        for (int i = 0; i < T; ++i) {
          const double* prow = &cl.probs[(static_cast<size_t>(h) * T + i) * T];
          const double* dci = &dctx[static_cast<size_t>(i) * d + o];
          double dot = 0.0;
          for (int j = 0; j <= i; ++j) {
            const double* vj = &cl.v[static_cast<size_t>(j) * d + o];
            double acc = 0.0;
            for (int cc = 0; cc < hd; ++cc) acc += dci[cc] * vj[cc];
            dp[static_cast<size_t>(j)] = acc;
            dot += prow[j] * acc;
            double* dvj = &dv[static_cast<size_t>(j) * d + o];
            for (int cc = 0; cc < hd; ++cc) dvj[cc] += prow[j] * dci[cc];
          }
          for (int j = 0; j <= i; ++j) {
            dsrow[static_cast<size_t>(j)] = prow[j] * (dp[static_cast<size_t>(j)] - dot);
          }
          double* dqi = &dq[static_cast<size_t>(i) * d + o];
          for (int j = 0; j <= i; ++j) {
            double dsj = dsrow[static_cast<size_t>(j)] * scale;
            const double* kj = &cl.k[static_cast<size_t>(j) * d + o];
            const double* qi = &cl.q[static_cast<size_t>(i) * d + o];
            double* dkj = &dk[static_cast<size_t>(j) * d + o];
            for (int cc = 0; cc < hd; ++cc) {
              dqi[cc] += dsj * kj[cc];
              dkj[cc] += dsj * qi[cc];
            }
          }
        }
      }

      // project gradients back through the q/k/v linear maps
      std::vector<double> dh1(static_cast<size_t>(T) * d, 0.0);
      auto linear_back = [&](const std::vector<double>& dy,
                             const std::vector<double>& W,
                             std::vector<double>& dW) {
        for (int t = 0; t < T; ++t) {
          const double* dyr = &dy[static_cast<size_t>(t) * d];
          const double* hr = &cl.h1[static_cast<size_t>(t) * d];
          for (int i = 0; i < d; ++i) {
            double hi = hr[i];
            const double* wr = &W[static_cast<size_t>(i) * d];
            double acc = 0.0;
            for (int j = 0; j < d; ++j) {
              dW[static_cast<size_t>(i) * d + j] += hi * dyr[j];
              acc += dyr[j] * wr[j];
            }
            dh1[static_cast<size_t>(t) * d + i] += acc;
          }
        }
      };
      linear_back(dq, L.attn_q, g(p + "attn_q"));
      linear_back(dk, L.attn_k, g(p + "attn_k"));
      linear_back(dv, L.attn_v, g(p + "attn_v"));

      if (has_lora) {
        const auto& A = model.lora->layers[static_cast<size_t>(l)];
        auto lora_back = [&](const std::vector<double>& dy,
                             const std::vector<double>& bottleneck,
                             const std::vector<double>& down,
                             const std::vector<double>& up,
                             std::vector<double>& d_down,
                             std::vector<double>& d_up) {
          std::vector<double> dbot(static_cast<size_t>(T) * r, 0.0);
          for (int t = 0; t < T; ++t) {
            const double* dyr = &dy[static_cast<size_t>(t) * d];
            const double* br = &bottleneck[static_cast<size_t>(t) * r];
            for (int k = 0; k < r; ++k) {
              double bk = br[k];
              const double* ur = &up[static_cast<size_t>(k) * d];
              double acc = 0.0;
              for (int j = 0; j < d; ++j) {
                d_up[static_cast<size_t>(k) * d + j] += ls * bk * dyr[j];
                acc += dyr[j] * ur[j];
              }
              dbot[static_cast<size_t>(t) * r + k] = ls * acc;
            }
          }
          for (int t = 0; t < T; ++t) {
            const double* dbr = &dbot[static_cast<size_t>(t) * r];
            const double* hr = &cl.h1[static_cast<size_t>(t) * d];
            for (int i = 0; i < d; ++i) {
              double hi = hr[i];
              const double* dnr = &down[static_cast<size_t>(i) * r];
              double acc = 0.0;
              for (int k = 0; k < r; ++k) {
                d_down[static_cast<size_t>(i) * r + k] += hi * dbr[k];
                acc += dbr[k] * dnr[k];
              }
              dh1[static_cast<size_t>(t) * d + i] += acc;
            }
          }
        };
        lora_back(dq, cl.hq, A.q_down, A.q_up, g(p + "lora_q_down"), g(p + "lora_q_up"));
        lora_back(dv, cl.hv, A.v_down, A.v_up, g(p + "lora_v_down"), g(p + "lora_v_up"));
      }

      layer_norm_backward(dh1, cl.ln1_xhat, cl.ln1_rstd, L.ln1_g, T, d, dx_in,
                          &g(p + "ln1_g"), &g(p + "ln1_b"));
    }
    dx = std::move(dx_in);
  }

  // embeddings
  {
    auto& dte = g("tok_emb");
    auto& dpe = g("pos_emb");
    for (int t = 0; t < T; ++t) {
      int tok = cache.tokens[static_cast<size_t>(t)];
      for (int i = 0; i < d; ++i) {
        dte[static_cast<size_t>(tok) * d + i] += dx[static_cast<size_t>(t) * d + i];
        dpe[static_cast<size_t>(t) * d + i] += dx[static_cast<size_t>(t) * d + i];
      }
    }
  }

  // with an adapter attached the base stays frozen
  for (auto& [name, arr] : local) {
    if (has_lora && name.find("lora_") == std::string::npos) continue;
    auto it = grads.find(name);
    if (it == grads.end()) {
      grads[name] = arr;
    } else {
      for (size_t i = 0; i < arr.size(); ++i) it->second[i] += arr[i];
    }
  }
  if (has_lora) {
    for (const auto& ref : named_params(mut, true)) {
      if (!ref.is_lora && grads.find(ref.name) == grads.end()) {
        grads[ref.name].assign(ref.data->size(), 0.0);
      }
    }
  }
}

ParamMap grad(const ModelState& model, const std::vector<MaskedSeq>& batch,
              double* mean_loss) {
  if (batch.empty()) fail(Errc::EmptyDataset, "gradient batch must be non-empty");
  auto& mut = const_cast<ModelState&>(model);
  ParamMap grads = zero_grads(mut);
  double total_loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    ForwardCache cache = forward_cached(model, item.tokens);
    std::vector<double> dlogits;
    total_loss += nll_from_logits(cache.logits, model.config.vocab_size,
                                  item.tokens, item.mask, &dlogits);
    for (double& v : dlogits) v *= inv_b;
    backward(model, cache, dlogits, nullptr, grads);
  }
  if (mean_loss) *mean_loss = total_loss * inv_b;
  return grads;
}

std::vector<int> generate(const ModelState& model, const std::vector<int>& prompt,
                          const GenerationConfig& gen) {
  if (prompt.empty()) fail(Errc::EmptyInput, "generation prompt must be non-empty");
  if (static_cast<int>(prompt.size()) + 1 > model.config.max_seq) {
    fail(Errc::SequenceTooLong, "prompt leaves no room for new tokens");
  }
  if (!gen.greedy && gen.temperature <= 0.0) {
    fail(Errc::ConfigInvalid, "temperature must be positive");
  }
  const int V = model.config.vocab_size;
  Rng rng(gen.seed);
  std::vector<int> seq = prompt;
  std::vector<double> probs(static_cast<size_t>(V));
  for (int step = 0; step < gen.max_new_tokens; ++step) {
    if (static_cast<int>(seq.size()) >= model.config.max_seq) break;
    ForwardResult res = forward(model, seq);
    const double* row = &res.logits[static_cast<size_t>(res.seq_len - 1) * V];
    int next = 0;
    if (gen.greedy) {
      for (int j = 1; j < V; ++j) {
        if (row[j] > row[next]) next = j;
      }
    } else {
      softmax_row(row, V, probs.data(), gen.temperature);
      if (gen.top_k.has_value()) {
        int k = std::min(*gen.top_k, V);
        std::vector<int> order(static_cast<size_t>(V));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
        });
        std::vector<char> keep(static_cast<size_t>(V), 0);
        for (int i = 0; i < k; ++i) keep[static_cast<size_t>(order[static_cast<size_t>(i)])] = 1;
        double mass = 0.0;
        for (int j = 0; j < V; ++j) {
          if (!keep[static_cast<size_t>(j)]) probs[static_cast<size_t>(j)] = 0.0;
          mass += probs[static_cast<size_t>(j)];
        }
        for (int j = 0; j < V; ++j) probs[static_cast<size_t>(j)] /= mass;
      }
      double u = rng.next_double();
      double cum = 0.0;
      next = V - 1;
      for (int j = 0; j < V; ++j) {
        cum += probs[static_cast<size_t>(j)];
        if (u < cum) {
          next = j;
          break;
        }
      }
    }
    seq.push_back(next);
    if (std::find(gen.stop_tokens.begin(), gen.stop_tokens.end(), next) !=
        gen.stop_tokens.end()) {
      break;
    }
  }
  return seq;
}

}  // namespace kft::lm
