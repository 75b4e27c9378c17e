#include "condgen/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "condgen/nn/kernels.hpp"

namespace condgen::nn {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

Matrix scalar(double v) { return Matrix(1, 1, v); }

}  // namespace

double logsumexp_row(const double* z, std::size_t n) {
  double mx = z[0];
  for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, z[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(z[k] - mx);
  return mx + std::log(s);
}

void softmax_row(const double* z, std::size_t n, double* p) {
  double mx = z[0];
  for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, z[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    p[k] = std::exp(z[k] - mx);
    s += p[k];
  }
  for (std::size_t k = 0; k < n; ++k) p[k] /= s;
}

void softmax_rows(const Matrix& logits, Matrix& probs) {
  probs.resize(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) softmax_row(logits.row(r), logits.cols(), probs.row(r));
}

double entropy_row(const double* z, std::size_t n) {
  const double lse = logsumexp_row(z, n);
  double h = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double lp = z[k] - lse;
    const double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return std::max(h, 0.0);
}

void linear_forward(const Matrix& w, const Matrix& b, const Matrix& x, Matrix& out) {
  require(x.cols() == w.rows() && b.cols() == w.cols(), "linear: shape mismatch");
  const std::size_t n = x.rows(), m = w.cols();
  out.resize(n, m);
  for (std::size_t r = 0; r < n; ++r) std::copy(b.data(), b.data() + m, out.row(r));
  gemm_nn(n, m, w.rows(), x.data(), x.cols(), w.data(), m, 1.0, out.data(), m);
}

void lstm_cell_forward(const Matrix& w, const Matrix& b, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                       Matrix& gates, Matrix& h, Matrix& c, Matrix& tanh_c) {
  const std::size_t n = x.rows(), in = x.cols(), hd = h_prev.cols(), g4 = 4 * hd;
  require(w.rows() == in + hd && w.cols() == g4 && b.cols() == g4, "lstm_cell: weight shape mismatch");
  require(h_prev.rows() == n && (c_prev.empty() || (c_prev.rows() == n && c_prev.cols() == hd)),
          "lstm_cell: state shape mismatch");
  gates.resize(n, g4);
  for (std::size_t r = 0; r < n; ++r) std::copy(b.data(), b.data() + g4, gates.row(r));
  gemm_nn(n, g4, in, x.data(), in, w.data(), g4, 1.0, gates.data(), g4);
  gemm_nn(n, g4, hd, h_prev.data(), hd, w.row(in), g4, 1.0, gates.data(), g4);
  h.resize(n, hd);
  c.resize(n, hd);
  tanh_c.resize(n, hd);
  lstm_pointwise_forward(n, hd, gates.data(), c_prev.empty() ? nullptr : c_prev.data(), c.data(), h.data(),
                         tanh_c.data());
}

Var embedding(Tape& tape, Parameter& table, const std::vector<int>& tokens) {
  const std::size_t e = table.value.cols();
  Matrix out(tokens.size(), e);
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    const int t = tokens[r];
    require(t >= 0 && static_cast<std::size_t>(t) < table.value.rows(), "embedding: token out of range");
    std::copy(table.value.row(static_cast<std::size_t>(t)), table.value.row(static_cast<std::size_t>(t)) + e,
              out.row(r));
  }
  const Var y = tape.make(std::move(out));
  tape.on_backward([y, &table, tokens](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const Matrix& g = tp.grad(y);
    const std::size_t e = g.cols();
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      double* dst = table.grad.row(static_cast<std::size_t>(tokens[r]));
      const double* src = g.row(r);
      for (std::size_t k = 0; k < e; ++k) dst[k] += src[k];
    }
  });
  return y;
}

Var concat_cols(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  require(av.rows() == bv.rows(), "concat_cols: row mismatch");
  const std::size_t ca = av.cols(), cb = bv.cols();
  Matrix out(av.rows(), ca + cb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy(av.row(r), av.row(r) + ca, out.row(r));
    std::copy(bv.row(r), bv.row(r) + cb, out.row(r) + ca);
  }
  const bool ng = tape.needs_grad(a) || tape.needs_grad(b);
  const Var y = tape.make(std::move(out), ng);
  if (!ng) return y;
  tape.on_backward([y, a, b, ca, cb](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const Matrix g = tp.grad(y);
    if (tp.needs_grad(a)) {
      Matrix& ga = tp.grad(a);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t k = 0; k < ca; ++k) ga(r, k) += g(r, k);
    }
    if (tp.needs_grad(b)) {
      Matrix& gb = tp.grad(b);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t k = 0; k < cb; ++k) gb(r, k) += g(r, ca + k);
    }
  });
  return y;
}

Var top_rows(Tape& tape, Var a, std::size_t n) {
  const Matrix& av = tape.value(a);
  if (n == av.rows()) return a;
  Matrix out = av.top_rows(n);
  const bool ng = tape.needs_grad(a);
  const Var y = tape.make(std::move(out), ng);
  if (!ng) return y;
  tape.on_backward([y, a](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const Matrix& g = tp.grad(y);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return y;
}

Var stack_rows(Tape& tape, const std::vector<Var>& parts) {
  require(!parts.empty(), "stack_rows: no parts");
  const std::size_t cols = tape.value(parts[0]).cols();
  std::size_t rows = 0;
  bool ng = false;
  for (Var p : parts) {
    require(tape.value(p).cols() == cols, "stack_rows: column mismatch");
    rows += tape.value(p).rows();
    ng = ng || tape.needs_grad(p);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& v = tape.value(p);
    std::copy(v.data(), v.data() + v.size(), out.data() + off);
    off += v.size();
  }
  const Var y = tape.make(std::move(out), ng);
  if (!ng) return y;
  tape.on_backward([y, parts](Tape& tp) {
    if (!tp.has_grad(y)) return;
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t sz = tp.value(p).size();
      if (tp.needs_grad(p)) {
        Matrix& gp = tp.grad(p);
        const double* src = tp.grad(y).data() + off;
        for (std::size_t i = 0; i < sz; ++i) gp[i] += src[i];
      }
      off += sz;
    }
  });
  return y;
}

Var linear(Tape& tape, Parameter& w, Parameter& b, Var x) {
  Matrix out;
  linear_forward(w.value, b.value, tape.value(x), out);
  const Var y = tape.make(std::move(out));
  tape.on_backward([y, x, &w, &b](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const Matrix& g = tp.grad(y);
    const Matrix& xv = tp.value(x);
    const std::size_t n = g.rows(), m = g.cols(), in = xv.cols();
    gemm_tn(in, m, n, xv.data(), in, g.data(), m, 1.0, w.grad.data(), m);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < m; ++k) b.grad[k] += g(r, k);
    if (tp.needs_grad(x)) gemm_nt(n, in, m, g.data(), m, w.value.data(), m, 1.0, tp.grad(x).data(), in);
  });
  return y;
}

LstmState lstm_cell(Tape& tape, Parameter& w, Parameter& b, Var x, LstmState prev) {
  Matrix gates, h, c, tanh_c;
  lstm_cell_forward(w.value, b.value, tape.value(x), tape.value(prev.h), tape.value(prev.c), gates, h, c, tanh_c);
  const Var aux_gates = tape.constant(std::move(gates));
  const Var aux_tanh = tape.constant(std::move(tanh_c));
  const Var hv = tape.make(std::move(h));
  const Var cv = tape.make(std::move(c));
  tape.on_backward([=, &w, &b](Tape& tp) {
    if (!tp.has_grad(hv) && !tp.has_grad(cv)) return;
    const Matrix& gates = tp.value(aux_gates);
    const std::size_t n = gates.rows(), g4 = gates.cols(), hd = g4 / 4;
    const Matrix& xv = tp.value(x);
    const Matrix& hp = tp.value(prev.h);
    const Matrix& cp = tp.value(prev.c);
    const std::size_t in = xv.cols();
    Matrix zero_dh;
    const Matrix* dh = nullptr;
    if (tp.has_grad(hv)) {
      dh = &tp.grad(hv);
    } else {
      zero_dh.resize(n, hd);
      dh = &zero_dh;
    }
    const double* dc = tp.has_grad(cv) ? tp.grad(cv).data() : nullptr;
    double* dc_prev = tp.needs_grad(prev.c) ? tp.grad(prev.c).data() : nullptr;
    Matrix dgates(n, g4);
    lstm_pointwise_backward(n, hd, gates.data(), cp.empty() ? nullptr : cp.data(), tp.value(aux_tanh).data(),
                            dh->data(), dc, dgates.data(), dc_prev);
    gemm_tn(in, g4, n, xv.data(), in, dgates.data(), g4, 1.0, w.grad.data(), g4);
    gemm_tn(hd, g4, n, hp.data(), hd, dgates.data(), g4, 1.0, w.grad.row(in), g4);
    for (std::size_t r = 0; r < n; ++r) {
      const double* d = dgates.row(r);
      for (std::size_t k = 0; k < g4; ++k) b.grad[k] += d[k];
    }
    if (tp.needs_grad(x)) gemm_nt(n, in, g4, dgates.data(), g4, w.value.data(), g4, 1.0, tp.grad(x).data(), in);
    if (tp.needs_grad(prev.h))
      gemm_nt(n, hd, g4, dgates.data(), g4, w.value.row(in), g4, 1.0, tp.grad(prev.h).data(), hd);
  });
  return {hv, cv};
}

Var weighted_nll(Tape& tape, Var logits, const std::vector<int>& targets, const std::vector<double>& weights) {
  const Matrix& z = tape.value(logits);
  require(targets.size() == z.rows() && weights.size() == z.rows(), "weighted_nll: row count mismatch");
  const std::size_t d = z.cols();
  Matrix probs(z.rows(), d);
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const int t = targets[r];
    require(t >= 0 && static_cast<std::size_t>(t) < d, "weighted_nll: target out of range");
    softmax_row(z.row(r), d, probs.row(r));
    loss += weights[r] * (logsumexp_row(z.row(r), d) - z(r, static_cast<std::size_t>(t)));
  }
  const Var aux = tape.constant(std::move(probs));
  const Var y = tape.make(scalar(loss), tape.needs_grad(logits));
  if (!tape.needs_grad(logits)) return y;
  tape.on_backward([y, logits, aux, targets, weights](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const double g = tp.grad(y)(0, 0);
    const Matrix& p = tp.value(aux);
    Matrix& dz = tp.grad(logits);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const double s = g * weights[r];
      for (std::size_t k = 0; k < p.cols(); ++k) dz(r, k) += s * p(r, k);
      dz(r, static_cast<std::size_t>(targets[r])) -= s;
    }
  });
  return y;
}

Var weighted_entropy(Tape& tape, Var logits, const std::vector<double>& weights) {
  const Matrix& z = tape.value(logits);
  require(weights.size() == z.rows(), "weighted_entropy: row count mismatch");
  const std::size_t d = z.cols();
  Matrix probs(z.rows(), d);
  std::vector<double> ent(z.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    softmax_row(z.row(r), d, probs.row(r));
    ent[r] = entropy_row(z.row(r), d);
    total += weights[r] * ent[r];
  }
  const Var aux = tape.constant(std::move(probs));
  const Var y = tape.make(scalar(total), tape.needs_grad(logits));
  if (!tape.needs_grad(logits)) return y;
  tape.on_backward([y, logits, aux, ent, weights](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const double g = tp.grad(y)(0, 0);
    const Matrix& p = tp.value(aux);
    const Matrix& z = tp.value(logits);
    Matrix& dz = tp.grad(logits);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const double s = g * weights[r];
      const double lse = logsumexp_row(z.row(r), z.cols());
      for (std::size_t k = 0; k < p.cols(); ++k) {
        const double lp = z(r, k) - lse;
        dz(r, k) -= s * p(r, k) * (lp + ent[r]);
      }
    }
  });
  return y;
}

Var softmax_mean_embedding(Tape& tape, Var logits, Parameter& table) {
  const Matrix& z = tape.value(logits);
  require(z.cols() == table.value.rows(), "softmax_mean_embedding: vocabulary mismatch");
  Matrix probs;
  softmax_rows(z, probs);
  const std::size_t n = z.rows(), d = z.cols(), e = table.value.cols();
  Matrix out(n, e);
  gemm_nn(n, e, d, probs.data(), d, table.value.data(), e, 0.0, out.data(), e);
  const Var aux = tape.constant(std::move(probs));
  const Var y = tape.make(std::move(out));
  tape.on_backward([y, logits, aux, &table](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const Matrix& g = tp.grad(y);
    const Matrix& p = tp.value(aux);
    const std::size_t n = p.rows(), d = p.cols(), e = g.cols();
    gemm_tn(d, e, n, p.data(), d, g.data(), e, 1.0, table.grad.data(), e);
    if (!tp.needs_grad(logits)) return;
    Matrix dp(n, d);
    gemm_nt(n, d, e, g.data(), e, table.value.data(), e, 0.0, dp.data(), d);
    Matrix& dz = tp.grad(logits);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += dp(r, k) * p(r, k);
      for (std::size_t k = 0; k < d; ++k) dz(r, k) += p(r, k) * (dp(r, k) - dot);
    }
  });
  return y;
}

Var add(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "add: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const bool ng = tape.needs_grad(a) || tape.needs_grad(b);
  const Var y = tape.make(std::move(out), ng);
  if (!ng) return y;
  tape.on_backward([y, a, b](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const Matrix g = tp.grad(y);
    for (Var v : {a, b}) {
      if (!tp.needs_grad(v)) continue;
      Matrix& gv = tp.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
  return y;
}

Var scale(Tape& tape, Var a, double s) {
  Matrix out = tape.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  const bool ng = tape.needs_grad(a);
  const Var y = tape.make(std::move(out), ng);
  if (!ng) return y;
  tape.on_backward([y, a, s](Tape& tp) {
    if (!tp.has_grad(y)) return;
    const Matrix& g = tp.grad(y);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
  return y;
}

}  // namespace condgen::nn
