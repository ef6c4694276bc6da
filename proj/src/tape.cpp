#include "advae/tape.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "advae/kernels.hpp"

namespace advae::nn {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
inline double gelu_bwd(double x) {
  const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return phi + x * pdf;
}

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

VarId Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, VarId)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = grads_enabled_ && needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::param(const Matrix* value, Matrix* grad_sink) {
  Node n;
  n.ext = value;
  n.sink = grad_sink;
  n.needs_grad = grads_enabled_ && grad_sink != nullptr;
  if (n.needs_grad) {
    n.back = [](Tape& t, VarId id) {
      Node& self = t.nodes_[static_cast<size_t>(id)];
      self.sink->add_inplace(self.grad);
    };
  }
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

VarId Tape::add(VarId a, VarId b) {
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  assert(va.same_shape(vb));
  Matrix out = va;
  out.add_inplace(vb);
  return push(std::move(out), wants(a) || wants(b), [a, b](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) t.g(a).add_inplace(go);
    if (t.wants(b)) t.g(b).add_inplace(go);
  });
}

VarId Tape::sub(VarId a, VarId b) {
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  assert(va.same_shape(vb));
  Matrix out = va;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= vb.data[i];
  return push(std::move(out), wants(a) || wants(b), [a, b](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) t.g(a).add_inplace(go);
    if (t.wants(b)) {
      Matrix& gb = t.g(b);
      for (size_t i = 0; i < gb.size(); ++i) gb.data[i] -= go.data[i];
    }
  });
}

VarId Tape::mul(VarId a, VarId b) {
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  assert(va.same_shape(vb));
  Matrix out = va;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
  return push(std::move(out), wants(a) || wants(b), [a, b](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) {
      Matrix& ga = t.g(a);
      const Matrix& vb2 = t.val(b);
      for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += go.data[i] * vb2.data[i];
    }
    if (t.wants(b)) {
      Matrix& gb = t.g(b);
      const Matrix& va2 = t.val(a);
      for (size_t i = 0; i < gb.size(); ++i) gb.data[i] += go.data[i] * va2.data[i];
    }
  });
}

VarId Tape::scale(VarId a, double s) {
  Matrix out = val(a);
  for (auto& v : out.data) v *= s;
  return push(std::move(out), wants(a), [a, s](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    Matrix& ga = t.g(a);
    for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += s * go.data[i];
  });
}

VarId Tape::add_row_broadcast(VarId a, VarId bias) {
  const Matrix& va = val(a);
  const Matrix& vb = val(bias);
  assert(vb.rows == 1 && vb.cols == va.cols);
  Matrix out = va;
  for (int i = 0; i < out.rows; ++i) {
    double* r = out.row(i);
    for (int j = 0; j < out.cols; ++j) r[j] += vb.data[static_cast<size_t>(j)];
  }
  return push(std::move(out), wants(a) || wants(bias), [a, bias](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) t.g(a).add_inplace(go);
    if (t.wants(bias)) {
      Matrix& gb = t.g(bias);
      for (int i = 0; i < go.rows; ++i) {
        const double* r = go.row(i);
        for (int j = 0; j < go.cols; ++j) gb.data[static_cast<size_t>(j)] += r[j];
      }
    }
  });
}

VarId Tape::concat_cols(VarId a, VarId b) {
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  assert(va.rows == vb.rows);
  Matrix out(va.rows, va.cols + vb.cols);
  for (int i = 0; i < out.rows; ++i) {
    double* r = out.row(i);
    const double* ra = va.row(i);
    const double* rb = vb.row(i);
    for (int j = 0; j < va.cols; ++j) r[j] = ra[j];
    for (int j = 0; j < vb.cols; ++j) r[va.cols + j] = rb[j];
  }
  const int ca = va.cols;
  return push(std::move(out), wants(a) || wants(b), [a, b, ca](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) {
      Matrix& ga = t.g(a);
      for (int i = 0; i < ga.rows; ++i)
        for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += go.at(i, j);
    }
    if (t.wants(b)) {
      Matrix& gb = t.g(b);
      for (int i = 0; i < gb.rows; ++i)
        for (int j = 0; j < gb.cols; ++j) gb.at(i, j) += go.at(i, ca + j);
    }
  });
}

VarId Tape::concat_rows(VarId a, VarId b) {
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  assert(va.cols == vb.cols);
  Matrix out(va.rows + vb.rows, va.cols);
  for (int i = 0; i < va.rows; ++i)
    for (int j = 0; j < va.cols; ++j) out.at(i, j) = va.at(i, j);
  for (int i = 0; i < vb.rows; ++i)
    for (int j = 0; j < vb.cols; ++j) out.at(va.rows + i, j) = vb.at(i, j);
  const int ra = va.rows;
  return push(std::move(out), wants(a) || wants(b), [a, b, ra](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) {
      Matrix& ga = t.g(a);
      for (int i = 0; i < ga.rows; ++i)
        for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += go.at(i, j);
    }
    if (t.wants(b)) {
      Matrix& gb = t.g(b);
      for (int i = 0; i < gb.rows; ++i)
        for (int j = 0; j < gb.cols; ++j) gb.at(i, j) += go.at(ra + i, j);
    }
  });
}

VarId Tape::slice_rows(VarId a, int r0, int r1) {
  const Matrix& va = val(a);
  assert(0 <= r0 && r0 < r1 && r1 <= va.rows);
  Matrix out(r1 - r0, va.cols);
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < va.cols; ++j) out.at(i - r0, j) = va.at(i, j);
  return push(std::move(out), wants(a), [a, r0](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    Matrix& ga = t.g(a);
    for (int i = 0; i < go.rows; ++i)
      for (int j = 0; j < go.cols; ++j) ga.at(r0 + i, j) += go.at(i, j);
  });
}

VarId Tape::slice_cols(VarId a, int c0, int c1) {
  const Matrix& va = val(a);
  assert(0 <= c0 && c0 < c1 && c1 <= va.cols);
  Matrix out(va.rows, c1 - c0);
  for (int i = 0; i < va.rows; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = va.at(i, j);
  return push(std::move(out), wants(a), [a, c0](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    Matrix& ga = t.g(a);
    for (int i = 0; i < go.rows; ++i)
      for (int j = 0; j < go.cols; ++j) ga.at(i, c0 + j) += go.at(i, j);
  });
}

VarId Tape::mean_rows(VarId a, const std::vector<uint8_t>& valid) {
  const Matrix& va = val(a);
  assert(valid.empty() || static_cast<int>(valid.size()) == va.rows);
  int n = 0;
  Matrix out(1, va.cols);
  for (int i = 0; i < va.rows; ++i) {
    if (!valid.empty() && !valid[static_cast<size_t>(i)]) continue;
    ++n;
    const double* r = va.row(i);
    for (int j = 0; j < va.cols; ++j) out.data[static_cast<size_t>(j)] += r[j];
  }
  assert(n > 0);
  const double inv = 1.0 / n;
  for (auto& v : out.data) v *= inv;
  return push(std::move(out), wants(a), [a, valid, inv](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    Matrix& ga = t.g(a);
    for (int i = 0; i < ga.rows; ++i) {
      if (!valid.empty() && !valid[static_cast<size_t>(i)]) continue;
      double* r = ga.row(i);
      for (int j = 0; j < ga.cols; ++j) r[j] += go.data[static_cast<size_t>(j)] * inv;
    }
  });
}

VarId Tape::matmul(VarId a, VarId b) {
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  Matrix out(va.rows, vb.cols);
  kernels::matmul(va, vb, out);
  return push(std::move(out), wants(a) || wants(b), [a, b](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) kernels::matmul_nt(go, t.val(b), t.g(a), /*accumulate=*/true);
    if (t.wants(b)) kernels::matmul_tn(t.val(a), go, t.g(b), /*accumulate=*/true);
  });
}

VarId Tape::matmul_nt(VarId a, VarId b) {
  const Matrix& va = val(a);
  const Matrix& vb = val(b);
  Matrix out(va.rows, vb.rows);
  kernels::matmul_nt(va, vb, out);
  return push(std::move(out), wants(a) || wants(b), [a, b](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    if (t.wants(a)) kernels::matmul(go, t.val(b), t.g(a), /*accumulate=*/true);
    if (t.wants(b)) kernels::matmul_tn(go, t.val(a), t.g(b), /*accumulate=*/true);
  });
}

VarId Tape::affine(VarId x, VarId w, VarId bias) {
  const Matrix& vx = val(x);
  const Matrix& vw = val(w);
  const Matrix& vb = val(bias);
  assert(vx.cols == vw.rows && vb.rows == 1 && vb.cols == vw.cols);
  Matrix out(vx.rows, vw.cols);
  kernels::matmul(vx, vw, out);
  for (int i = 0; i < out.rows; ++i) {
    double* r = out.row(i);
    for (int j = 0; j < out.cols; ++j) r[j] += vb.data[static_cast<size_t>(j)];
  }
  return push(std::move(out), wants(x) || wants(w) || wants(bias),
              [x, w, bias](Tape& t, VarId id) {
                const Matrix& go = t.g(id);
                if (t.wants(x)) kernels::matmul_nt(go, t.val(w), t.g(x), /*accumulate=*/true);
                if (t.wants(w)) kernels::matmul_tn(t.val(x), go, t.g(w), /*accumulate=*/true);
                if (t.wants(bias)) {
                  Matrix& gb = t.g(bias);
                  for (int i = 0; i < go.rows; ++i) {
                    const double* r = go.row(i);
                    for (int j = 0; j < go.cols; ++j) gb.data[static_cast<size_t>(j)] += r[j];
                  }
                }
              });
}

VarId Tape::multihead_attention(VarId q, VarId k, VarId v, int n_heads, double scale,
                                const std::vector<uint8_t>& key_valid, MaskKind mask,
                                std::vector<Matrix>* capture) {
  const Matrix& vq = val(q);
  const Matrix& vk = val(k);
  const Matrix& vv = val(v);
  assert(vq.cols == vk.cols && vk.cols == vv.cols && vk.rows == vv.rows);
  assert(vq.cols % n_heads == 0);
  assert(key_valid.empty() || static_cast<int>(key_valid.size()) == vk.rows);
  const int dh = vq.cols / n_heads;
  const int n_q = vq.rows;
  const int n_k = vk.rows;

  auto weights = std::make_shared<std::vector<Matrix>>();
  weights->reserve(static_cast<size_t>(n_heads));
  Matrix out(n_q, vq.cols);
  for (int h = 0; h < n_heads; ++h) {
    const int off = h * dh;
    Matrix w(n_q, n_k);
    for (int i = 0; i < n_q; ++i) {
      const double* qr = vq.row(i) + off;
      double mx = -HUGE_VAL;
      for (int j = 0; j < n_k; ++j) {
        const bool ok = (key_valid.empty() || key_valid[static_cast<size_t>(j)]) &&
                        (mask != MaskKind::causal || j <= i);
        if (!ok) {
          w.at(i, j) = -HUGE_VAL;
          continue;
        }
        const double* kr = vk.row(j) + off;
        double acc = 0.0;
        for (int c = 0; c < dh; ++c) acc += qr[c] * kr[c];
        w.at(i, j) = acc * scale;
        mx = std::max(mx, w.at(i, j));
      }
      assert(std::isfinite(mx) && "attention row fully masked");
      double sum = 0.0;
      for (int j = 0; j < n_k; ++j) {
        const double s = w.at(i, j);
        const double e = s == -HUGE_VAL ? 0.0 : std::exp(s - mx);
        w.at(i, j) = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      double* orow = out.row(i) + off;
      for (int j = 0; j < n_k; ++j) {
        w.at(i, j) *= inv;
        const double wij = w.at(i, j);
        if (wij == 0.0) continue;
        const double* vr = vv.row(j) + off;
        for (int c = 0; c < dh; ++c) orow[c] += wij * vr[c];
      }
    }
    if (capture) capture->push_back(w);
    weights->push_back(std::move(w));
  }

  return push(std::move(out), wants(q) || wants(k) || wants(v),
              [q, k, v, n_heads, scale, dh, weights](Tape& t, VarId id) {
                const Matrix& go = t.g(id);
                const Matrix& vq2 = t.val(q);
                const Matrix& vk2 = t.val(k);
                const Matrix& vv2 = t.val(v);
                const int n_q = vq2.rows;
                const int n_k = vk2.rows;
                Matrix gw(n_q, n_k);
                Matrix gs(n_q, n_k);
                for (int h = 0; h < n_heads; ++h) {
                  const int off = h * dh;
                  const Matrix& w = (*weights)[static_cast<size_t>(h)];
                  // gW = go_block * v_block^T ; gV += w^T * go_block
                  for (int i = 0; i < n_q; ++i) {
                    const double* gr = go.row(i) + off;
                    for (int j = 0; j < n_k; ++j) {
                      const double* vr = vv2.row(j) + off;
                      double acc = 0.0;
                      for (int c = 0; c < dh; ++c) acc += gr[c] * vr[c];
                      gw.at(i, j) = acc;
                    }
                  }
                  if (t.wants(v)) {
                    Matrix& gv = t.g(v);
                    for (int j = 0; j < n_k; ++j) {
                      double* gvr = gv.row(j) + off;
                      for (int i = 0; i < n_q; ++i) {
                        const double wij = w.at(i, j);
                        if (wij == 0.0) continue;
                        const double* gr = go.row(i) + off;
                        for (int c = 0; c < dh; ++c) gvr[c] += wij * gr[c];
                      }
                    }
                  }
                  // softmax backward into scores
                  for (int i = 0; i < n_q; ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < n_k; ++j) dot += gw.at(i, j) * w.at(i, j);
                    for (int j = 0; j < n_k; ++j)
                      gs.at(i, j) = w.at(i, j) * (gw.at(i, j) - dot);
                  }
                  if (t.wants(q)) {
                    Matrix& gq = t.g(q);
                    for (int i = 0; i < n_q; ++i) {
                      double* gqr = gq.row(i) + off;
                      for (int j = 0; j < n_k; ++j) {
                        const double s = gs.at(i, j) * scale;
                        if (s == 0.0) continue;
                        const double* kr = vk2.row(j) + off;
                        for (int c = 0; c < dh; ++c) gqr[c] += s * kr[c];
                      }
                    }
                  }
                  if (t.wants(k)) {
                    Matrix& gk = t.g(k);
                    for (int j = 0; j < n_k; ++j) {
                      double* gkr = gk.row(j) + off;
                      for (int i = 0; i < n_q; ++i) {
                        const double s = gs.at(i, j) * scale;
                        if (s == 0.0) continue;
                        const double* qr = vq2.row(i) + off;
                        for (int c = 0; c < dh; ++c) gkr[c] += s * qr[c];
                      }
                    }
                  }
                }
              });
}

VarId Tape::gelu(VarId a) {
  Matrix out = val(a);
  for (auto& v : out.data) v = gelu_fwd(v);
  return push(std::move(out), wants(a), [a](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    const Matrix& x = t.val(a);
    Matrix& ga = t.g(a);
    for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += go.data[i] * gelu_bwd(x.data[i]);
  });
}

VarId Tape::softplus_floor(VarId a, double floor) {
  Matrix out = val(a);
  for (auto& v : out.data) v = std::max(softplus(v), floor);
  return push(std::move(out), wants(a), [a, floor](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    const Matrix& x = t.val(a);
    Matrix& ga = t.g(a);
    for (size_t i = 0; i < ga.size(); ++i) {
      if (softplus(x.data[i]) <= floor) continue;  // clipped: no gradient
      ga.data[i] += go.data[i] * sigmoid(x.data[i]);
    }
  });
}

VarId Tape::layer_norm(VarId a, VarId gain, VarId bias, double eps) {
  const Matrix& va = val(a);
  const Matrix& vg = val(gain);
  const Matrix& vb = val(bias);
  assert(vg.rows == 1 && vg.cols == va.cols && vb.rows == 1 && vb.cols == va.cols);
  Matrix xhat(va.rows, va.cols);
  Matrix inv_std(va.rows, 1);
  Matrix out(va.rows, va.cols);
  for (int i = 0; i < va.rows; ++i) {
    const double* r = va.row(i);
    double mean = 0.0;
    for (int j = 0; j < va.cols; ++j) mean += r[j];
    mean /= va.cols;
    double var = 0.0;
    for (int j = 0; j < va.cols; ++j) {
      const double d = r[j] - mean;
      var += d * d;
    }
    var /= va.cols;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std.at(i, 0) = is;
    for (int j = 0; j < va.cols; ++j) {
      const double xh = (r[j] - mean) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * vg.data[static_cast<size_t>(j)] + vb.data[static_cast<size_t>(j)];
    }
  }
  auto xhat_p = std::make_shared<Matrix>(std::move(xhat));
  auto inv_p = std::make_shared<Matrix>(std::move(inv_std));
  return push(std::move(out), wants(a) || wants(gain) || wants(bias),
              [a, gain, bias, xhat_p, inv_p](Tape& t, VarId id) {
                const Matrix& go = t.g(id);
                const Matrix& vg2 = t.val(gain);
                const int cols = go.cols;
                if (t.wants(gain) || t.wants(bias)) {
                  for (int i = 0; i < go.rows; ++i) {
                    const double* r = go.row(i);
                    for (int j = 0; j < cols; ++j) {
                      if (t.wants(gain)) t.g(gain).data[static_cast<size_t>(j)] += r[j] * xhat_p->at(i, j);
                      if (t.wants(bias)) t.g(bias).data[static_cast<size_t>(j)] += r[j];
                    }
                  }
                }
                if (t.wants(a)) {
                  Matrix& ga = t.g(a);
                  for (int i = 0; i < go.rows; ++i) {
                    // dxhat = go * gain; dx = inv_std * (dxhat - mean(dxhat)
                    //        - xhat * mean(dxhat * xhat))
                    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                    for (int j = 0; j < cols; ++j) {
                      const double dxh = go.at(i, j) * vg2.data[static_cast<size_t>(j)];
                      mean_dxh += dxh;
                      mean_dxh_xh += dxh * xhat_p->at(i, j);
                    }
                    mean_dxh /= cols;
                    mean_dxh_xh /= cols;
                    const double is = inv_p->at(i, 0);
                    for (int j = 0; j < cols; ++j) {
                      const double dxh = go.at(i, j) * vg2.data[static_cast<size_t>(j)];
                      ga.at(i, j) += is * (dxh - mean_dxh - xhat_p->at(i, j) * mean_dxh_xh);
                    }
                  }
                }
              });
}

VarId Tape::softmax_rows(VarId scores, const std::vector<uint8_t>& key_valid, MaskKind mask) {
  const Matrix& vs = val(scores);
  assert(key_valid.empty() || static_cast<int>(key_valid.size()) == vs.cols);
  Matrix out(vs.rows, vs.cols);
  for (int i = 0; i < vs.rows; ++i) {
    const double* r = vs.row(i);
    double mx = -HUGE_VAL;
    for (int j = 0; j < vs.cols; ++j) {
      if (!key_valid.empty() && !key_valid[static_cast<size_t>(j)]) continue;
      if (mask == MaskKind::causal && j > i) continue;
      mx = std::max(mx, r[j]);
    }
    assert(std::isfinite(mx) && "softmax row fully masked");
    double sum = 0.0;
    for (int j = 0; j < vs.cols; ++j) {
      const bool ok = (key_valid.empty() || key_valid[static_cast<size_t>(j)]) &&
                      (mask != MaskKind::causal || j <= i);
      const double w = ok ? std::exp(r[j] - mx) : 0.0;
      out.at(i, j) = w;
      sum += w;
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < vs.cols; ++j) out.at(i, j) *= inv;
  }
  return push(std::move(out), wants(scores), [scores](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    const Matrix& w = t.val(id);
    Matrix& gs = t.g(scores);
    for (int i = 0; i < w.rows; ++i) {
      double dot = 0.0;
      const double* wr = w.row(i);
      const double* gr = go.row(i);
      for (int j = 0; j < w.cols; ++j) dot += wr[j] * gr[j];
      double* out_r = gs.row(i);
      for (int j = 0; j < w.cols; ++j) out_r[j] += wr[j] * (gr[j] - dot);
    }
  });
}

VarId Tape::embedding(VarId table, std::span<const int> ids) {
  const Matrix& vt = val(table);
  Matrix out(static_cast<int>(ids.size()), vt.cols);
  for (size_t k = 0; k < ids.size(); ++k) {
    assert(ids[k] >= 0 && ids[k] < vt.rows);
    const double* src = vt.row(ids[k]);
    double* dst = out.row(static_cast<int>(k));
    for (int j = 0; j < vt.cols; ++j) dst[j] = src[j];
  }
  std::vector<int> ids_copy(ids.begin(), ids.end());
  return push(std::move(out), wants(table), [table, ids_copy](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    Matrix& gt = t.g(table);
    for (size_t k = 0; k < ids_copy.size(); ++k) {
      double* dst = gt.row(ids_copy[k]);
      const double* src = go.row(static_cast<int>(k));
      for (int j = 0; j < go.cols; ++j) dst[j] += src[j];
    }
  });
}

VarId Tape::dropout(VarId a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  const Matrix& va = val(a);
  auto mask = std::make_shared<Matrix>(va.rows, va.cols);
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix out = va;
  for (size_t i = 0; i < out.size(); ++i) {
    const double m = rng.uniform() < p ? 0.0 : keep_scale;
    mask->data[i] = m;
    out.data[i] *= m;
  }
  return push(std::move(out), wants(a), [a, mask](Tape& t, VarId id) {
    const Matrix& go = t.g(id);
    Matrix& ga = t.g(a);
    for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += go.data[i] * mask->data[i];
  });
}

VarId Tape::cross_entropy_sum(VarId logits, std::span<const int> targets) {
  const Matrix& vl = val(logits);
  assert(static_cast<int>(targets.size()) == vl.rows);
  auto probs = std::make_shared<Matrix>(vl);
  kernels::softmax_rows(*probs);
  double loss = 0.0;
  for (int i = 0; i < vl.rows; ++i) {
    // log softmax evaluated directly for numerical accuracy
    const double* r = vl.row(i);
    double mx = r[0];
    for (int j = 1; j < vl.cols; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (int j = 0; j < vl.cols; ++j) sum += std::exp(r[j] - mx);
    loss -= r[targets[static_cast<size_t>(i)]] - mx - std::log(sum);
  }
  Matrix out(1, 1);
  out.at(0, 0) = loss;
  std::vector<int> tgt(targets.begin(), targets.end());
  return push(std::move(out), wants(logits), [logits, probs, tgt](Tape& t, VarId id) {
    const double go = t.g(id).at(0, 0);
    Matrix& gl = t.g(logits);
    for (int i = 0; i < gl.rows; ++i) {
      const double* pr = probs->row(i);
      double* gr = gl.row(i);
      for (int j = 0; j < gl.cols; ++j) gr[j] += go * pr[j];
      gr[tgt[static_cast<size_t>(i)]] -= go;
    }
  });
}

VarId Tape::kl_std_normal(VarId mu, VarId sigma) {
  const Matrix& vm = val(mu);
  const Matrix& vs = val(sigma);
  assert(vm.same_shape(vs));
  double kl = 0.0;
  for (size_t i = 0; i < vm.size(); ++i) {
    const double m = vm.data[i];
    const double s = vs.data[i];
    kl += 0.5 * (m * m + s * s - 1.0) - std::log(s);
  }
  Matrix out(1, 1);
  out.at(0, 0) = kl;
  return push(std::move(out), wants(mu) || wants(sigma), [mu, sigma](Tape& t, VarId id) {
    const double go = t.g(id).at(0, 0);
    const Matrix& vm2 = t.val(mu);
    const Matrix& vs2 = t.val(sigma);
    if (t.wants(mu)) {
      Matrix& gm = t.g(mu);
      for (size_t i = 0; i < gm.size(); ++i) gm.data[i] += go * vm2.data[i];
    }
    if (t.wants(sigma)) {
      Matrix& gs = t.g(sigma);
      for (size_t i = 0; i < gs.size(); ++i) gs.data[i] += go * (vs2.data[i] - 1.0 / vs2.data[i]);
    }
  });
}

VarId Tape::kl_gaussians(VarId mu_q, VarId sigma_q, VarId mu_p, VarId sigma_p) {
  const Matrix& mq = val(mu_q);
  const Matrix& sq = val(sigma_q);
  const Matrix& mp = val(mu_p);
  const Matrix& sp = val(sigma_p);
  assert(mq.same_shape(sq) && mq.same_shape(mp) && mq.same_shape(sp));
  double kl = 0.0;
  for (size_t i = 0; i < mq.size(); ++i) {
    const double dm = mq.data[i] - mp.data[i];
    const double s2q = sq.data[i] * sq.data[i];
    const double s2p = sp.data[i] * sp.data[i];
    kl += std::log(sp.data[i]) - std::log(sq.data[i]) + (s2q + dm * dm) / (2.0 * s2p) - 0.5;
  }
  Matrix out(1, 1);
  out.at(0, 0) = kl;
  return push(std::move(out), wants(mu_q) || wants(sigma_q) || wants(mu_p) || wants(sigma_p),
              [mu_q, sigma_q, mu_p, sigma_p](Tape& t, VarId id) {
                const double go = t.g(id).at(0, 0);
                const Matrix& mq2 = t.val(mu_q);
                const Matrix& sq2 = t.val(sigma_q);
                const Matrix& mp2 = t.val(mu_p);
                const Matrix& sp2 = t.val(sigma_p);
                for (size_t i = 0; i < mq2.size(); ++i) {
                  const double dm = mq2.data[i] - mp2.data[i];
                  const double s2p = sp2.data[i] * sp2.data[i];
                  if (t.wants(mu_q)) t.g(mu_q).data[i] += go * dm / s2p;
                  if (t.wants(mu_p)) t.g(mu_p).data[i] -= go * dm / s2p;
                  if (t.wants(sigma_q))
                    t.g(sigma_q).data[i] += go * (sq2.data[i] / s2p - 1.0 / sq2.data[i]);
                  if (t.wants(sigma_p))
                    t.g(sigma_p).data[i] +=
                        go * (1.0 / sp2.data[i] -
                              (sq2.data[i] * sq2.data[i] + dm * dm) / (s2p * sp2.data[i]));
                }
              });
}

void Tape::backward(VarId root) {
  if (!grads_enabled_) throw std::logic_error("backward on a grads-disabled tape");
  const Matrix& rv = val(root);
  if (rv.rows != 1 || rv.cols != 1) throw std::logic_error("backward root must be scalar");
  for (auto& n : nodes_) {
    if (!n.needs_grad) continue;
    const Matrix& v = n.ext ? *n.ext : n.value;
    n.grad = Matrix(v.rows, v.cols);
  }
  if (!nodes_[static_cast<size_t>(root)].needs_grad) return;
  g(root).at(0, 0) = 1.0;
  for (VarId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.needs_grad && n.back) n.back(*this, id);
  }
}

}  // namespace advae::nn
