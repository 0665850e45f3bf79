#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "bigcf/errors.hpp"
#include "bigcf/mat.hpp"

namespace bigcf {

// Handle into a tape. Invalid ids mark optional terms that are switched off.
struct VarId {
  std::int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

inline constexpr double kLogFloor = 1e-10;   // floor inside logarithms
inline constexpr double kNormFloor = 1e-12;  // floor inside row norms

// Reverse-mode tape over dense matrices plus one sparse-dense product.
// Nodes are recorded in construction order; backward() replays them in
// reverse, visiting each node exactly once, which makes repeated backward
// passes over the same tape bit-identical.
template <class Scalar>
class TapeT {
 public:
  using Mat = DenseMatT<Scalar>;

  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }
  void clear() { nodes_.clear(); }

  const Mat& value(VarId id) const { return at(id).val; }
  const Mat& grad(VarId id) const {
    const Node& n = at(id);
    if (!n.needs_grad) throw ConfigError("tape: node records no gradient");
    return n.grad;
  }
  double scalar(VarId id) const {
    const Mat& m = at(id).val;
    if (m.rows != 1 || m.cols != 1) throw ConfigError("tape: node is not scalar");
    return static_cast<double>(m.v[0]);
  }

  // ---- leaves ----

  VarId constant(Mat v) { return push(std::move(v), false, nullptr); }
  VarId param(Mat v) { return push(std::move(v), true, nullptr); }

  // ---- elementwise ----

  VarId add(VarId a, VarId b) {
    check_same_shape(a, b, "add");
    Mat y = value(a);
    const Mat& vb = value(b);
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += vb.v[i];
    return push(std::move(y), needs(a) || needs(b), [a, b](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i];
      });
      t.accumulate(b, [&](Mat& db) {
        for (std::size_t i = 0; i < g.v.size(); ++i) db.v[i] += g.v[i];
      });
    });
  }

  VarId sub(VarId a, VarId b) {
    check_same_shape(a, b, "sub");
    Mat y = value(a);
    const Mat& vb = value(b);
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] -= vb.v[i];
    return push(std::move(y), needs(a) || needs(b), [a, b](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i];
      });
      t.accumulate(b, [&](Mat& db) {
        for (std::size_t i = 0; i < g.v.size(); ++i) db.v[i] -= g.v[i];
      });
    });
  }

  VarId mul(VarId a, VarId b) {
    check_same_shape(a, b, "mul");
    Mat y = value(a);
    const Mat& vb = value(b);
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= vb.v[i];
    return push(std::move(y), needs(a) || needs(b), [a, b](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& va = t.value(a);
      const Mat& vb2 = t.value(b);
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i] * vb2.v[i];
      });
      t.accumulate(b, [&](Mat& db) {
        for (std::size_t i = 0; i < g.v.size(); ++i) db.v[i] += g.v[i] * va.v[i];
      });
    });
  }

  VarId scale(VarId a, Scalar c) {
    Mat y = value(a);
    for (Scalar& x : y.v) x *= c;
    return push(std::move(y), needs(a), [a, c](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += c * g.v[i];
      });
    });
  }

  VarId add_const(VarId a, Scalar c) {
    Mat y = value(a);
    for (Scalar& x : y.v) x += c;
    return push(std::move(y), needs(a), [a](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i];
      });
    });
  }

  VarId exp(VarId a) {
    Mat y = value(a);
    for (Scalar& x : y.v) x = std::exp(x);
    const VarId out = push(std::move(y), needs(a), nullptr);
    set_backward(out, [a, out](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& vy = t.value(out);
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] += g.v[i] * vy.v[i];
      });
    });
    return out;
  }

  // log(max(x, floor)); the floored region has zero derivative.
  VarId log_eps(VarId a, Scalar floor = Scalar(kLogFloor)) {
    Mat y = value(a);
    for (Scalar& x : y.v) x = std::log(std::max(x, floor));
    return push(std::move(y), needs(a), [a, floor](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& va = t.value(a);
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i)
          if (va.v[i] > floor) da.v[i] += g.v[i] / va.v[i];
      });
    });
  }

  VarId sigmoid(VarId a) {
    Mat y = value(a);
    for (Scalar& x : y.v) x = stable_sigmoid(x);
    const VarId out = push(std::move(y), needs(a), nullptr);
    set_backward(out, [a, out](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& vy = t.value(out);
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i)
          da.v[i] += g.v[i] * vy.v[i] * (Scalar(1) - vy.v[i]);
      });
    });
    return out;
  }

  // log(1 + e^x), so that -log(sigmoid(x)) == softplus(-x) exactly.
  VarId softplus(VarId a) {
    Mat y = value(a);
    for (Scalar& x : y.v)
      x = std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
    return push(std::move(y), needs(a), [a](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& va = t.value(a);
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t i = 0; i < g.v.size(); ++i)
          da.v[i] += g.v[i] * stable_sigmoid(va.v[i]);
      });
    });
  }

  // ---- matrix products ----

  VarId matmul_nn(VarId a, VarId b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols != vb.rows) throw ConfigError("matmul_nn: inner dimension mismatch");
    Mat y(va.rows, vb.cols);
    detail::matmul_nn(va, vb, y, false);
    return push(std::move(y), needs(a) || needs(b), [a, b](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& va2 = t.value(a);
      const Mat& vb2 = t.value(b);
      t.accumulate(a, [&](Mat& da) { detail::matmul_nt(g, vb2, da, true); });
      t.accumulate(b, [&](Mat& db) { detail::matmul_tn(va2, g, db, true); });
    });
  }

  VarId matmul_nt(VarId a, VarId b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols != vb.cols) throw ConfigError("matmul_nt: inner dimension mismatch");
    Mat y(va.rows, vb.rows);
    detail::matmul_nt(va, vb, y, false);
    return push(std::move(y), needs(a) || needs(b), [a, b](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& va2 = t.value(a);
      const Mat& vb2 = t.value(b);
      t.accumulate(a, [&](Mat& da) { detail::matmul_nn(g, vb2, da, true); });
      t.accumulate(b, [&](Mat& db) { detail::matmul_tn(g, va2, db, true); });
    });
  }

  // Sparse-dense product. The sparse operand is a constant (graph structure);
  // only the dense side receives gradient. Caller keeps `a` alive until
  // backward has run.
  VarId sp_dense_matmul(const SparseMatT<Scalar>* a, VarId b) {
    const Mat& vb = value(b);
    if (a->cols != vb.rows) throw ConfigError("sp_dense_matmul: dimension mismatch");
    Mat y(a->rows, vb.cols);
    detail::sp_dense_multiply(*a, vb, y);
    return push(std::move(y), needs(b), [a, b](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(b, [&](Mat& db) {
        detail::sp_dense_multiply_transpose_add(*a, g, db);
      });
    });
  }

  // ---- structured ops ----

  // Row-wise softmax of x / temperature with row-max subtraction.
  VarId row_softmax(VarId x, Scalar temperature) {
    if (!(temperature > Scalar(0)))
      throw ConfigError("row_softmax: temperature must be positive");
    const Mat& vx = value(x);
    Mat y(vx.rows, vx.cols);
    for (std::int64_t r = 0; r < vx.rows; ++r) {
      const Scalar* in = vx.row(r);
      Scalar* out = y.row(r);
      Scalar mx = in[0];
      for (std::int64_t c = 1; c < vx.cols; ++c) mx = std::max(mx, in[c]);
      Scalar sum = Scalar(0);
      for (std::int64_t c = 0; c < vx.cols; ++c) {
        out[c] = std::exp((in[c] - mx) / temperature);
        sum += out[c];
      }
      for (std::int64_t c = 0; c < vx.cols; ++c) out[c] /= sum;
    }
    const VarId out = push(std::move(y), needs(x), nullptr);
    set_backward(out, [x, out, temperature](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& vy = t.value(out);
      t.accumulate(x, [&](Mat& dx) {
        for (std::int64_t r = 0; r < vy.rows; ++r) {
          const Scalar* yr = vy.row(r);
          const Scalar* gr = g.row(r);
          Scalar dot = Scalar(0);
          for (std::int64_t c = 0; c < vy.cols; ++c) dot += gr[c] * yr[c];
          Scalar* dr = dx.row(r);
          for (std::int64_t c = 0; c < vy.cols; ++c)
            dr[c] += yr[c] * (gr[c] - dot) / temperature;
        }
      });
    });
    return out;
  }

  // All-pairs cosine matrix (a.rows x b.rows); row norms are floored.
  VarId row_cosine(VarId a, VarId b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols != vb.cols) throw ConfigError("row_cosine: dimension mismatch");
    auto [ahat, aflags] = normalize_rows(va);
    auto [bhat, bflags] = normalize_rows(vb);
    Mat y(va.rows, vb.rows);
    detail::matmul_nt(ahat, bhat, y, false);
    struct Ctx {
      Mat ahat, bhat;
      std::vector<Scalar> ainv, binv;
      std::vector<char> aproj, bproj;
    };
    auto ctx = std::make_shared<Ctx>();
    ctx->ahat = std::move(ahat);
    ctx->bhat = std::move(bhat);
    ctx->ainv = std::move(aflags.first);
    ctx->binv = std::move(bflags.first);
    ctx->aproj = std::move(aflags.second);
    ctx->bproj = std::move(bflags.second);
    const VarId out = push(std::move(y), needs(a) || needs(b), nullptr);
    set_backward(out, [a, b, out, ctx](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& vy = t.value(out);
      t.accumulate(a, [&](Mat& da) {
        // da_r = (sum_s g_rs bhat_s - proj * (sum_s g_rs y_rs) ahat_r) / n_r
        for (std::int64_t r = 0; r < da.rows; ++r) {
          const Scalar* gr = g.row(r);
          const Scalar* yr = vy.row(r);
          Scalar* dr = da.row(r);
          const Scalar inv = ctx->ainv[r];
          Scalar gy = Scalar(0);
          if (ctx->aproj[r]) {
            for (std::int64_t s = 0; s < vy.cols; ++s) gy += gr[s] * yr[s];
          }
          const Scalar* ar = ctx->ahat.row(r);
          for (std::int64_t s = 0; s < vy.cols; ++s) {
            const Scalar gs = gr[s];
            if (gs == Scalar(0)) continue;
            const Scalar* bs = ctx->bhat.row(s);
            for (std::int64_t c = 0; c < da.cols; ++c) dr[c] += gs * inv * bs[c];
          }
          if (ctx->aproj[r]) {
            for (std::int64_t c = 0; c < da.cols; ++c) dr[c] -= gy * inv * ar[c];
          }
        }
      });
      t.accumulate(b, [&](Mat& db) {
        for (std::int64_t s = 0; s < db.rows; ++s) {
          Scalar* ds = db.row(s);
          const Scalar inv = ctx->binv[s];
          Scalar gy = Scalar(0);
          if (ctx->bproj[s]) {
            for (std::int64_t r = 0; r < vy.rows; ++r) gy += g(r, s) * vy(r, s);
          }
          for (std::int64_t r = 0; r < vy.rows; ++r) {
            const Scalar gs = g(r, s);
            if (gs == Scalar(0)) continue;
            const Scalar* ar = ctx->ahat.row(r);
            for (std::int64_t c = 0; c < db.cols; ++c) ds[c] += gs * inv * ar[c];
          }
          if (ctx->bproj[s]) {
            const Scalar* bs = ctx->bhat.row(s);
            for (std::int64_t c = 0; c < db.cols; ++c) ds[c] -= gy * inv * bs[c];
          }
        }
      });
    });
    return out;
  }

  // Per-row cosine of paired rows; returns n x 1.
  VarId paired_cosine(VarId a, VarId b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (!va.same_shape(vb)) throw ConfigError("paired_cosine: shape mismatch");
    auto [ahat, aflags] = normalize_rows(va);
    auto [bhat, bflags] = normalize_rows(vb);
    Mat y(va.rows, 1);
    for (std::int64_t r = 0; r < va.rows; ++r) {
      Scalar acc = Scalar(0);
      const Scalar* ar = ahat.row(r);
      const Scalar* br = bhat.row(r);
      for (std::int64_t c = 0; c < va.cols; ++c) acc += ar[c] * br[c];
      y(r, 0) = acc;
    }
    struct Ctx {
      Mat ahat, bhat;
      std::vector<Scalar> ainv, binv;
      std::vector<char> aproj, bproj;
    };
    auto ctx = std::make_shared<Ctx>();
    ctx->ahat = std::move(ahat);
    ctx->bhat = std::move(bhat);
    ctx->ainv = std::move(aflags.first);
    ctx->binv = std::move(bflags.first);
    ctx->aproj = std::move(aflags.second);
    ctx->bproj = std::move(bflags.second);
    const VarId out = push(std::move(y), needs(a) || needs(b), nullptr);
    set_backward(out, [a, b, out, ctx](TapeT& t) {
      const Mat& g = t.out_grad();
      const Mat& vy = t.value(out);
      t.accumulate(a, [&](Mat& da) {
        for (std::int64_t r = 0; r < da.rows; ++r) {
          const Scalar gr = g(r, 0);
          if (gr == Scalar(0)) continue;
          const Scalar inv = ctx->ainv[r];
          Scalar* dr = da.row(r);
          const Scalar* ar = ctx->ahat.row(r);
          const Scalar* br = ctx->bhat.row(r);
          for (std::int64_t c = 0; c < da.cols; ++c) {
            Scalar term = br[c];
            if (ctx->aproj[r]) term -= vy(r, 0) * ar[c];
            dr[c] += gr * inv * term;
          }
        }
      });
      t.accumulate(b, [&](Mat& db) {
        for (std::int64_t r = 0; r < db.rows; ++r) {
          const Scalar gr = g(r, 0);
          if (gr == Scalar(0)) continue;
          const Scalar inv = ctx->binv[r];
          Scalar* dr = db.row(r);
          const Scalar* ar = ctx->ahat.row(r);
          const Scalar* br = ctx->bhat.row(r);
          for (std::int64_t c = 0; c < db.cols; ++c) {
            Scalar term = ar[c];
            if (ctx->bproj[r]) term -= vy(r, 0) * br[c];
            dr[c] += gr * inv * term;
          }
        }
      });
    });
    return out;
  }

  // ---- reductions and indexing ----

  VarId row_sum(VarId a) {
    const Mat& va = value(a);
    Mat y(va.rows, 1);
    for (std::int64_t r = 0; r < va.rows; ++r) {
      Scalar acc = Scalar(0);
      const Scalar* ar = va.row(r);
      for (std::int64_t c = 0; c < va.cols; ++c) acc += ar[c];
      y(r, 0) = acc;
    }
    return push(std::move(y), needs(a), [a](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        for (std::int64_t r = 0; r < da.rows; ++r) {
          const Scalar gr = g(r, 0);
          Scalar* dr = da.row(r);
          for (std::int64_t c = 0; c < da.cols; ++c) dr[c] += gr;
        }
      });
    });
  }

  VarId sum_all(VarId a) {
    const Mat& va = value(a);
    Mat y(1, 1);
    Scalar acc = Scalar(0);
    for (Scalar x : va.v) acc += x;
    y.v[0] = acc;
    return push(std::move(y), needs(a), [a](TapeT& t) {
      const Scalar g = t.out_grad().v[0];
      t.accumulate(a, [&](Mat& da) {
        for (Scalar& x : da.v) x += g;
      });
    });
  }

  VarId mean_all(VarId a) {
    const Mat& va = value(a);
    const Scalar inv = Scalar(1) / static_cast<Scalar>(va.size());
    Mat y(1, 1);
    Scalar acc = Scalar(0);
    for (Scalar x : va.v) acc += x;
    y.v[0] = acc * inv;
    return push(std::move(y), needs(a), [a, inv](TapeT& t) {
      const Scalar g = t.out_grad().v[0] * inv;
      t.accumulate(a, [&](Mat& da) {
        for (Scalar& x : da.v) x += g;
      });
    });
  }

  VarId gather_rows(VarId a, std::vector<std::int64_t> rows) {
    const Mat& va = value(a);
    Mat y(static_cast<std::int64_t>(rows.size()), va.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= va.rows)
        throw ConfigError("gather_rows: row index out of range");
      std::copy_n(va.row(rows[r]), va.cols, y.row(static_cast<std::int64_t>(r)));
    }
    auto idx = std::make_shared<std::vector<std::int64_t>>(std::move(rows));
    return push(std::move(y), needs(a), [a, idx](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        for (std::size_t r = 0; r < idx->size(); ++r) {
          const Scalar* gr = g.row(static_cast<std::int64_t>(r));
          Scalar* dr = da.row((*idx)[r]);
          for (std::int64_t c = 0; c < da.cols; ++c) dr[c] += gr[c];
        }
      });
    });
  }

  VarId slice_rows(VarId a, std::int64_t start, std::int64_t count) {
    const Mat& va = value(a);
    if (start < 0 || count < 0 || start + count > va.rows)
      throw ConfigError("slice_rows: range out of bounds");
    Mat y(count, va.cols);
    std::copy_n(va.row(start), count * va.cols, y.v.data());
    return push(std::move(y), needs(a), [a, start, count](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        Scalar* dst = da.row(start);
        for (std::int64_t i = 0; i < count * da.cols; ++i) dst[i] += g.v[i];
      });
    });
  }

  VarId diag(VarId a) {
    const Mat& va = value(a);
    if (va.rows != va.cols) throw ConfigError("diag: matrix must be square");
    Mat y(va.rows, 1);
    for (std::int64_t r = 0; r < va.rows; ++r) y(r, 0) = va(r, r);
    return push(std::move(y), needs(a), [a](TapeT& t) {
      const Mat& g = t.out_grad();
      t.accumulate(a, [&](Mat& da) {
        for (std::int64_t r = 0; r < da.rows; ++r) da(r, r) += g(r, 0);
      });
    });
  }

  // ---- backward ----

  void backward(VarId loss) {
    const Node& ln = at(loss);
    if (ln.val.rows != 1 || ln.val.cols != 1)
      throw ConfigError("backward: loss must be a scalar node");
    if (!ln.needs_grad)
      throw ConfigError("backward: loss does not depend on any parameter");
    for (std::int32_t i = 0; i <= loss.idx; ++i) {
      if (nodes_[i].needs_grad) nodes_[i].grad.fill(Scalar(0));
    }
    nodes_[loss.idx].grad.v[0] = Scalar(1);
    last_backward_visits_ = 0;
    for (std::int32_t i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.needs_grad && n.back) {
        current_ = i;
        ++last_backward_visits_;
        n.back(*this);
      }
    }
    current_ = -1;
  }

  std::int64_t last_backward_visits() const { return last_backward_visits_; }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool needs_grad = false;
    std::function<void(TapeT&)> back;
  };

  static Scalar stable_sigmoid(Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  }

  // Returns (normalized rows, ({1/max(norm,floor)}, {norm > floor})).
  static std::pair<Mat, std::pair<std::vector<Scalar>, std::vector<char>>>
  normalize_rows(const Mat& m) {
    Mat out(m.rows, m.cols);
    std::vector<Scalar> inv(static_cast<std::size_t>(m.rows));
    std::vector<char> proj(static_cast<std::size_t>(m.rows));
    for (std::int64_t r = 0; r < m.rows; ++r) {
      const Scalar* src = m.row(r);
      Scalar ss = Scalar(0);
      for (std::int64_t c = 0; c < m.cols; ++c) ss += src[c] * src[c];
      const Scalar norm = std::sqrt(ss);
      const Scalar floored = std::max(norm, Scalar(kNormFloor));
      inv[r] = Scalar(1) / floored;
      proj[r] = norm > Scalar(kNormFloor) ? 1 : 0;
      Scalar* dst = out.row(r);
      for (std::int64_t c = 0; c < m.cols; ++c) dst[c] = src[c] * inv[r];
    }
    return {std::move(out), {std::move(inv), std::move(proj)}};
  }

  Node& at(VarId id) {
    if (!id.valid() || id.idx >= static_cast<std::int32_t>(nodes_.size()))
      throw ConfigError("tape: invalid node handle");
    return nodes_[id.idx];
  }
  const Node& at(VarId id) const {
    if (!id.valid() || id.idx >= static_cast<std::int32_t>(nodes_.size()))
      throw ConfigError("tape: invalid node handle");
    return nodes_[id.idx];
  }

  bool needs(VarId id) const { return at(id).needs_grad; }

  void check_same_shape(VarId a, VarId b, const char* op) const {
    if (!at(a).val.same_shape(at(b).val))
      throw ConfigError(std::string(op) + ": shape mismatch");
  }

  VarId push(Mat val, bool needs_grad, std::function<void(TapeT&)> back) {
    Node n;
    if (needs_grad) n.grad = Mat(val.rows, val.cols);
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    n.back = needs_grad ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return VarId{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  void set_backward(VarId id, std::function<void(TapeT&)> back) {
    Node& n = at(id);
    if (n.needs_grad) n.back = std::move(back);
  }

  // Gradient of the node whose backward closure is currently running.
  const Mat& out_grad() const { return nodes_[current_].grad; }

  // Run f on the gradient buffer of `id` iff that node records gradients.
  template <class F>
  void accumulate(VarId id, F&& f) {
    Node& n = at(id);
    if (n.needs_grad) f(n.grad);
  }

  std::vector<Node> nodes_;
  std::int32_t current_ = -1;
  std::int64_t last_backward_visits_ = 0;
};

using Tape = TapeT<double>;

}  // namespace bigcf
