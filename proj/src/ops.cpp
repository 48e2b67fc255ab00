#include "masn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "masn/errors.hpp"
#include "masn/kernels.hpp"

namespace masn::ops {

namespace {

Tape& tape_of(Var a) {
    if (!a.tape) throw Error("operation on an unbound variable");
    return *a.tape;
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
    require_same_shape(a, b, what);
    require_rank2(a, what);
}

void require_row(const Tensor& a, const Tensor& row, const char* what) {
    require_rank2(a, what);
    require_rank2(row, what);
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError(std::string(what) + ": row operand " + shape_str(row.shape()) +
                         " does not broadcast over " + shape_str(a.shape()));
    }
}

template <typename F>
Tensor map(const Tensor& x, F f) {
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return y;
}

Tensor transpose_values(const Tensor& a) {
    Tensor t({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a);
    Tensor out = kernels::matmul(a.value(), b.value());
    const Var in[] = {a, b};
    return t.push(std::move(out), in, [a = a.id, b = b.id](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a)) tp.accumulate(a, kernels::matmul_nt(g, tp.value(b)));
        if (tp.requires_grad(b)) tp.accumulate(b, kernels::matmul_tn(tp.value(a), g));
    });
}

Var matmul_nt(Var a, Var b) {
    Tape& t = tape_of(a);
    Tensor out = kernels::matmul_nt(a.value(), b.value());
    const Var in[] = {a, b};
    return t.push(std::move(out), in, [a = a.id, b = b.id](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        // out = A B^T: dA = G B, dB = G^T A
        if (tp.requires_grad(a)) tp.accumulate(a, kernels::matmul(g, tp.value(b)));
        if (tp.requires_grad(b)) tp.accumulate(b, kernels::matmul_tn(g, tp.value(a)));
    });
}

Var transpose(Var a) {
    Tape& t = tape_of(a);
    require_rank2(a.value(), "transpose");
    const Var in[] = {a};
    return t.push(transpose_values(a.value()), in, [a = a.id](Tape& tp, std::size_t self) {
        tp.accumulate(a, transpose_values(tp.grad(self)));
    });
}

Var add(Var a, Var b) {
    Tape& t = tape_of(a);
    require_same(a.value(), b.value(), "add");
    Tensor out = a.value();
    out.add_(b.value());
    const Var in[] = {a, b};
    return t.push(std::move(out), in, [a = a.id, b = b.id](Tape& tp, std::size_t self) {
        tp.accumulate(a, tp.grad(self));
        tp.accumulate(b, tp.grad(self));
    });
}

Var sub(Var a, Var b) {
    Tape& t = tape_of(a);
    require_same(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    const Var in[] = {a, b};
    return t.push(std::move(out), in, [a = a.id, b = b.id](Tape& tp, std::size_t self) {
        tp.accumulate(a, tp.grad(self));
        if (tp.requires_grad(b)) tp.accumulate(b, map(tp.grad(self), [](Real v) { return -v; }));
    });
}

Var mul(Var a, Var b) {
    Tape& t = tape_of(a);
    require_same(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    const Var in[] = {a, b};
    return t.push(std::move(out), in, [a = a.id, b = b.id](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_slot(a);
            const Tensor& vb = tp.value(b);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_slot(b);
            const Tensor& va = tp.value(a);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
        }
    });
}

Var scale(Var a, Real c) {
    Tape& t = tape_of(a);
    const Var in[] = {a};
    return t.push(map(a.value(), [c](Real v) { return v * c; }), in,
                  [a = a.id, c](Tape& tp, std::size_t self) {
                      Tensor& ga = tp.grad_slot(a);
                      const Tensor& g = tp.grad(self);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
                  });
}

Var add_row(Var a, Var row) {
    Tape& t = tape_of(a);
    require_row(a.value(), row.value(), "add_row");
    Tensor out = a.value();
    const std::size_t r = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) += row.value()[j];
    const Var in[] = {a, row};
    return t.push(std::move(out), in, [a = a.id, row = row.id](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        tp.accumulate(a, g);
        if (tp.requires_grad(row)) {
            Tensor& gr = tp.grad_slot(row);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
        }
    });
}

Var mul_row(Var a, Var row) {
    Tape& t = tape_of(a);
    require_row(a.value(), row.value(), "mul_row");
    Tensor out = a.value();
    const std::size_t r = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(i, j) *= row.value()[j];
    const Var in[] = {a, row};
    return t.push(std::move(out), in, [a = a.id, row = row.id](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& va = tp.value(a);
        const Tensor& vr = tp.value(row);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_slot(a);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * vr[j];
        }
        if (tp.requires_grad(row)) {
            Tensor& gr = tp.grad_slot(row);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j) * va(i, j);
        }
    });
}

Var scale_by(Var a, Var s) {
    Tape& t = tape_of(a);
    if (s.value().size() != 1) throw ShapeError("scale_by: scale must be 1x1");
    const Real sv = s.value()[0];
    const Var in[] = {a, s};
    return t.push(map(a.value(), [sv](Real v) { return v * sv; }), in,
                  [a = a.id, s = s.id](Tape& tp, std::size_t self) {
                      const Tensor& g = tp.grad(self);
                      const Tensor& va = tp.value(a);
                      const Real sv = tp.value(s)[0];
                      if (tp.requires_grad(a)) {
                          Tensor& ga = tp.grad_slot(a);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
                      }
                      if (tp.requires_grad(s)) {
                          Real acc = 0.0;
                          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * va[i];
                          tp.grad_slot(s)[0] += acc;
                      }
                  });
}

Var relu(Var a) {
    Tape& t = tape_of(a);
    const Var in[] = {a};
    return t.push(map(a.value(), [](Real v) { return v > 0.0 ? v : 0.0; }), in,
                  [a = a.id](Tape& tp, std::size_t self) {
                      const Tensor& g = tp.grad(self);
                      const Tensor& x = tp.value(a);
                      Tensor& ga = tp.grad_slot(a);
                      for (std::size_t i = 0; i < g.size(); ++i)
                          if (x[i] > 0.0) ga[i] += g[i];
                  });
}

Var sigmoid(Var a) {
    Tape& t = tape_of(a);
    const Var in[] = {a};
    return t.push(map(a.value(), [](Real v) { return 1.0 / (1.0 + std::exp(-v)); }), in,
                  [a = a.id](Tape& tp, std::size_t self) {
                      const Tensor& g = tp.grad(self);
                      const Tensor& y = tp.value(self);
                      Tensor& ga = tp.grad_slot(a);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
                  });
}

Var tanh(Var a) {
    Tape& t = tape_of(a);
    const Var in[] = {a};
    return t.push(map(a.value(), [](Real v) { return std::tanh(v); }), in,
                  [a = a.id](Tape& tp, std::size_t self) {
                      const Tensor& g = tp.grad(self);
                      const Tensor& y = tp.value(self);
                      Tensor& ga = tp.grad_slot(a);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
                  });
}

Var square(Var a) {
    Tape& t = tape_of(a);
    const Var in[] = {a};
    return t.push(map(a.value(), [](Real v) { return v * v; }), in,
                  [a = a.id](Tape& tp, std::size_t self) {
                      const Tensor& g = tp.grad(self);
                      const Tensor& x = tp.value(a);
                      Tensor& ga = tp.grad_slot(a);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * g[i] * x[i];
                  });
}

Tensor softmax_values(const Tensor& x, int axis) {
    require_rank2(x, "softmax");
    if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
    if (!x.all_finite()) throw NumericError("softmax: non-finite input");
    Tensor y = Tensor::zeros_like(x);
    const std::size_t outer = axis == 1 ? x.rows() : x.cols();
    const std::size_t inner = axis == 1 ? x.cols() : x.rows();
    auto at = [&](std::size_t o, std::size_t i) -> std::size_t {
        return axis == 1 ? o * x.cols() + i : i * x.cols() + o;
    };
    for (std::size_t o = 0; o < outer; ++o) {
        Real mx = x[at(o, 0)];
        for (std::size_t i = 1; i < inner; ++i) mx = std::max(mx, x[at(o, i)]);
        Real sum = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
            const Real e = std::exp(x[at(o, i)] - mx);
            y[at(o, i)] = e;
            sum += e;
        }
        for (std::size_t i = 0; i < inner; ++i) y[at(o, i)] /= sum;
    }
    return y;
}

Var softmax(Var a, int axis) {
    Tape& t = tape_of(a);
    Tensor y = softmax_values(a.value(), axis);
    const Var in[] = {a};
    return t.push(std::move(y), in, [a = a.id, axis](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        Tensor& ga = tp.grad_slot(a);
        const std::size_t cols = y.cols();
        const std::size_t outer = axis == 1 ? y.rows() : y.cols();
        const std::size_t inner = axis == 1 ? y.cols() : y.rows();
        auto at = [&](std::size_t o, std::size_t i) -> std::size_t {
            return axis == 1 ? o * cols + i : i * cols + o;
        };
        for (std::size_t o = 0; o < outer; ++o) {
            Real dot = 0.0;
            for (std::size_t i = 0; i < inner; ++i) dot += g[at(o, i)] * y[at(o, i)];
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = at(o, i);
                ga[k] += y[k] * (g[k] - dot);
            }
        }
    });
}

Var softmax_all(Var a) {
    Tape& t = tape_of(a);
    const Tensor& x = a.value();
    require_rank2(x, "softmax_all");
    // Flatten to a single row, normalize, restore the shape.
    Tensor flat = softmax_values(Tensor({1, x.size()}, std::vector<Real>(x.data().begin(), x.data().end())), 1);
    Tensor y(x.shape(), std::vector<Real>(flat.data().begin(), flat.data().end()));
    const Var in[] = {a};
    return t.push(std::move(y), in, [a = a.id](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        Tensor& ga = tp.grad_slot(a);
        Real dot = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (g[i] - dot);
    });
}

Tensor layer_norm_values(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    require_row(x, gain, "layer_norm");
    require_row(x, bias, "layer_norm");
    const std::size_t n = x.cols();
    if (n < 2) throw ShapeError("layer_norm: last dimension must be at least 2");
    Tensor y = Tensor::zeros_like(x);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        Real mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += x(r, j);
        mean /= static_cast<Real>(n);
        Real var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (x(r, j) - mean) * (x(r, j) - mean);
        var /= static_cast<Real>(n);
        const Real inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < n; ++j) y(r, j) = (x(r, j) - mean) * inv * gain[j] + bias[j];
    }
    return y;
}

Var layer_norm(Var x, Var gain, Var bias) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_row(xv, gain.value(), "layer_norm");
    require_row(xv, bias.value(), "layer_norm");
    const std::size_t rows = xv.rows(), n = xv.cols();
    if (n < 2) throw ShapeError("layer_norm: last dimension must be at least 2");

    Tensor xhat = Tensor::zeros_like(xv);
    Tensor inv_std({rows, 1});
    Tensor y = Tensor::zeros_like(xv);
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();
    for (std::size_t r = 0; r < rows; ++r) {
        Real mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += xv(r, j);
        mean /= static_cast<Real>(n);
        Real var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xv(r, j) - mean) * (xv(r, j) - mean);
        var /= static_cast<Real>(n);
        const Real inv = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[r] = inv;
        for (std::size_t j = 0; j < n; ++j) {
            xhat(r, j) = (xv(r, j) - mean) * inv;
            y(r, j) = xhat(r, j) * gv[j] + bv[j];
        }
    }
    const Var in[] = {x, gain, bias};
    return t.push(std::move(y), in,
                  [x = x.id, gain = gain.id, bias = bias.id, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
                      const Tensor& g = tp.grad(self);
                      const Tensor& gv = tp.value(gain);
                      const std::size_t rows = g.rows(), n = g.cols();
                      if (tp.requires_grad(gain)) {
                          Tensor& gg = tp.grad_slot(gain);
                          for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t j = 0; j < n; ++j) gg[j] += g(r, j) * xhat(r, j);
                      }
                      if (tp.requires_grad(bias)) {
                          Tensor& gb = tp.grad_slot(bias);
                          for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t j = 0; j < n; ++j) gb[j] += g(r, j);
                      }
                      if (tp.requires_grad(x)) {
                          Tensor& gx = tp.grad_slot(x);
                          const Real inv_n = 1.0 / static_cast<Real>(n);
                          for (std::size_t r = 0; r < rows; ++r) {
                              Real mean_d = 0.0, mean_dx = 0.0;
                              for (std::size_t j = 0; j < n; ++j) {
                                  const Real d = g(r, j) * gv[j];
                                  mean_d += d;
                                  mean_dx += d * xhat(r, j);
                              }
                              mean_d *= inv_n;
                              mean_dx *= inv_n;
                              for (std::size_t j = 0; j < n; ++j) {
                                  const Real d = g(r, j) * gv[j];
                                  gx(r, j) += inv_std[r] * (d - mean_d - xhat(r, j) * mean_dx);
                              }
                          }
                      }
                  });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    Tape& t = tape_of(parts[0]);
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    std::vector<std::size_t> ids, offsets;
    for (const Var& p : parts) {
        require_rank2(p.value(), "concat_cols");
        if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
        ids.push_back(p.id);
        offsets.push_back(cols);
        cols += p.cols();
    }
    Tensor out({rows, cols});
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) out(r, offsets[k] + c) = v(r, c);
    }
    return t.push(std::move(out), parts, [ids, offsets](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!tp.requires_grad(ids[k])) continue;
            Tensor& gk = tp.grad_slot(ids[k]);
            for (std::size_t r = 0; r < gk.rows(); ++r)
                for (std::size_t c = 0; c < gk.cols(); ++c) gk(r, c) += g(r, offsets[k] + c);
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    Tape& t = tape_of(parts[0]);
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    std::vector<std::size_t> ids, offsets;
    for (const Var& p : parts) {
        require_rank2(p.value(), "concat_rows");
        if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
        ids.push_back(p.id);
        offsets.push_back(rows);
        rows += p.rows();
    }
    Tensor out({rows, cols});
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        std::copy(v.data().begin(), v.data().end(), out.data().begin() + offsets[k] * cols);
    }
    return t.push(std::move(out), parts, [ids, offsets](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!tp.requires_grad(ids[k])) continue;
            Tensor& gk = tp.grad_slot(ids[k]);
            const std::size_t base = offsets[k] * g.cols();
            for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[base + i];
        }
    });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
    Tape& t = tape_of(a);
    const Tensor& v = a.value();
    require_rank2(v, "slice_rows");
    if (begin + count > v.rows()) throw ShapeError("slice_rows: range out of bounds");
    const std::size_t cols = v.cols();
    Tensor out({count, cols},
               std::vector<Real>(v.data().begin() + begin * cols,
                                   v.data().begin() + (begin + count) * cols));
    const Var in[] = {a};
    return t.push(std::move(out), in, [a = a.id, begin](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad_slot(a);
        const std::size_t base = begin * g.cols();
        for (std::size_t i = 0; i < g.size(); ++i) ga[base + i] += g[i];
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    Tape& t = tape_of(a);
    const Tensor& v = a.value();
    require_rank2(v, "slice_cols");
    if (begin + count > v.cols()) throw ShapeError("slice_cols: range out of bounds");
    Tensor out({v.rows(), count});
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
    const Var in[] = {a};
    return t.push(std::move(out), in, [a = a.id, begin](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad_slot(a);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
    });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
    Tape& t = tape_of(a);
    const Tensor& v = a.value();
    require_rank2(v, "gather_rows");
    const std::size_t cols = v.cols();
    Tensor out({indices.size(), cols});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= v.rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(indices[k]) +
                             " out of range for " + std::to_string(v.rows()) + " rows");
        }
        std::copy_n(v.data().begin() + indices[k] * cols, cols, out.data().begin() + k * cols);
    }
    const Var in[] = {a};
    return t.push(std::move(out), in,
                  [a = a.id, idx = std::vector<std::size_t>(indices.begin(), indices.end())](
                      Tape& tp, std::size_t self) {
                      const Tensor& g = tp.grad(self);
                      Tensor& ga = tp.grad_slot(a);
                      const std::size_t cols = g.cols();
                      for (std::size_t k = 0; k < idx.size(); ++k)
                          for (std::size_t c = 0; c < cols; ++c) ga(idx[k], c) += g(k, c);
                  });
}

Var element(Var a, std::size_t r, std::size_t c) {
    Tape& t = tape_of(a);
    const Tensor& v = a.value();
    require_rank2(v, "element");
    if (r >= v.rows() || c >= v.cols()) throw ShapeError("element: index out of range");
    const Var in[] = {a};
    return t.push(Tensor({1, 1}, {v(r, c)}), in, [a = a.id, r, c](Tape& tp, std::size_t self) {
        tp.grad_slot(a)(r, c) += tp.grad(self)[0];
    });
}

Var sum_rows(Var a) {
    Tape& t = tape_of(a);
    const Tensor& v = a.value();
    require_rank2(v, "sum_rows");
    Tensor out({1, v.cols()});
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t c = 0; c < v.cols(); ++c) out[c] += v(r, c);
    const Var in[] = {a};
    return t.push(std::move(out), in, [a = a.id](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad_slot(a);
        for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c];
    });
}

Var sum_all(Var a) {
    Tape& t = tape_of(a);
    Real s = 0.0;
    for (Real v : a.value().data()) s += v;
    const Var in[] = {a};
    return t.push(Tensor({1, 1}, {s}), in, [a = a.id](Tape& tp, std::size_t self) {
        const Real g = tp.grad(self)[0];
        Tensor& ga = tp.grad_slot(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var cross_entropy(Var logits, std::size_t target) {
    Tape& t = tape_of(logits);
    const Tensor& z = logits.value();
    require_rank2(z, "cross_entropy");
    if (z.rows() != 1) throw ShapeError("cross_entropy: logits must be a single row");
    if (target >= z.cols()) throw ShapeError("cross_entropy: target class out of range");
    Tensor p = softmax_values(z, 1);
    Real mx = z[0];
    for (std::size_t i = 1; i < z.size(); ++i) mx = std::max(mx, z[i]);
    Real sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += std::exp(z[i] - mx);
    const Real loss = mx + std::log(sum) - z[target];
    const Var in[] = {logits};
    return t.push(Tensor({1, 1}, {loss}), in,
                  [id = logits.id, target, p = std::move(p)](Tape& tp, std::size_t self) {
                      const Real g = tp.grad(self)[0];
                      Tensor& gz = tp.grad_slot(id);
                      for (std::size_t i = 0; i < p.size(); ++i)
                          gz[i] += g * (p[i] - (i == target ? 1.0 : 0.0));
                  });
}

}  // namespace masn::ops
