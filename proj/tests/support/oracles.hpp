#pragma once

// Brute-force reference computations used only by tests. Everything is
// written as explicit loops in long double over plain nested vectors, with
// no use of the library's kernels or ops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "masn/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<long double>>;
using Vec = std::vector<long double>;

inline Mat from(const masn::Tensor& t) {
    Mat m(t.rows(), Vec(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
    return m;
}

inline Vec row_of(const masn::Tensor& t) {
    Vec v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[i] = t[i];
    return v;
}

inline long double max_abs_diff(const masn::Tensor& t, const Mat& m) {
    long double worst = 0.0L;
    if (t.rows() != m.size()) return INFINITY;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (t.cols() != m[i].size()) return INFINITY;
        for (std::size_t j = 0; j < m[i].size(); ++j) worst = std::max(worst, std::fabs(t(i, j) - m[i][j]));
    }
    return worst;
}

inline long double max_abs_diff(const masn::Tensor& t, const Vec& v) {
    if (t.size() != v.size()) return INFINITY;
    long double worst = 0.0L;
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::fabs(t[i] - v[i]));
    return worst;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    const std::size_t m = a.size(), k = b.size(), n = b.empty() ? 0 : b[0].size();
    Mat c(m, Vec(n, 0.0L));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            long double s = 0.0L;
            for (std::size_t p = 0; p < k; ++p) s += a[i][p] * b[p][j];
            c[i][j] = s;
        }
    return c;
}

inline Mat transpose(const Mat& a) {
    Mat t(a.empty() ? 0 : a[0].size(), Vec(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
    return t;
}

inline Vec vec_matmul(const Vec& x, const Mat& w) {
    Vec y(w.empty() ? 0 : w[0].size(), 0.0L);
    for (std::size_t j = 0; j < y.size(); ++j)
        for (std::size_t p = 0; p < x.size(); ++p) y[j] += x[p] * w[p][j];
    return y;
}

inline Vec softmax(const Vec& x) {
    long double mx = x[0];
    for (long double v : x) mx = std::max(mx, v);
    Vec e(x.size());
    long double s = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) s += (e[i] = std::exp(x[i] - mx));
    for (long double& v : e) v /= s;
    return e;
}

inline Mat softmax_rows(const Mat& x) {
    Mat y;
    for (const Vec& r : x) y.push_back(softmax(r));
    return y;
}

inline Mat relu(Mat x) {
    for (Vec& r : x)
        for (long double& v : r) v = std::max(0.0L, v);
    return x;
}

inline Mat add(Mat a, const Mat& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    return a;
}

inline Mat layer_norm(const Mat& x, const Vec& gain, const Vec& bias, long double eps = 1e-5L) {
    Mat y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const long double n = static_cast<long double>(x[i].size());
        long double mean = 0.0L;
        for (long double v : x[i]) mean += v;
        mean /= n;
        long double var = 0.0L;
        for (long double v : x[i]) var += (v - mean) * (v - mean);
        var /= n;
        for (std::size_t j = 0; j < x[i].size(); ++j)
            y[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * gain[j] + bias[j];
    }
    return y;
}

// A_ij = softmax_j( <X_i W1, X_j W2> ), every score formed pair by pair.
inline Mat adjacency(const Mat& x, const Mat& w1, const Mat& w2) {
    const std::size_t k = x.size();
    Mat scores(k, Vec(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const Vec a = vec_matmul(x[i], w1);
            const Vec b = vec_matmul(x[j], w2);
            long double s = 0.0L;
            for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
            scores[i][j] = s;
        }
    return softmax_rows(scores);
}

inline Mat gcn(const Mat& x, const Mat& a, const Mat& w3, const Mat& w4, const Vec& gain, const Vec& bias) {
    const Mat first = relu(matmul(matmul(a, x), w3));
    const Mat second = relu(matmul(matmul(a, first), w4));
    return layer_norm(add(x, second), gain, bias);
}

// score(i, j) = sum_c w_c (H_i Uh)_c (V_j Uv)_c, softmax over all L*K pairs.
inline Mat bilinear_map(const Mat& h, const Mat& v, const Mat& uh, const Mat& uv, const Vec& w) {
    const std::size_t l = h.size(), k = v.size();
    Vec flat;
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const Vec a = vec_matmul(h[i], uh);
            const Vec b = vec_matmul(v[j], uv);
            long double s = 0.0L;
            for (std::size_t c = 0; c < w.size(); ++c) s += w[c] * a[c] * b[c];
            flat.push_back(s);
        }
    const Vec p = softmax(flat);
    Mat out(l, Vec(k));
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < k; ++j) out[i][j] = p[i * k + j];
    return out;
}

// W_o applied to sum_ij A_ij (H_i Ph) * (V_j Pv), as a literal double sum.
inline Vec ban_glimpse(const Mat& h, const Mat& v, const Mat& a, const Mat& ph, const Mat& pv, const Mat& wo) {
    Vec joint(ph[0].size(), 0.0L);
    for (std::size_t i = 0; i < h.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) {
            const Vec x = vec_matmul(h[i], ph);
            const Vec y = vec_matmul(v[j], pv);
            for (std::size_t c = 0; c < joint.size(); ++c) joint[c] += a[i][j] * x[c] * y[c];
        }
    return vec_matmul(joint, wo);
}

struct Glimpse {
    Mat uh, uv;
    Vec w;
    Mat ph, pv, wo;
};

struct VqReplay {
    Mat h;
    std::vector<Mat> maps;
    std::vector<Vec> joints;
};

inline VqReplay vq_replay(const Mat& fq, const Mat& v, const std::vector<Glimpse>& glimpses) {
    VqReplay r{fq, {}, {}};
    for (const Glimpse& g : glimpses) {
        const Mat map = bilinear_map(r.h, v, g.uh, g.uv, g.w);
        const Vec j = ban_glimpse(r.h, v, map, g.ph, g.pv, g.wo);
        for (Vec& row : r.h)
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += j[c];
        r.maps.push_back(map);
        r.joints.push_back(j);
    }
    return r;
}

struct AttentionOut {
    Mat scores;
    Mat output;
};

// softmax over keys of (Q Wq)(K Wk)^T / sqrt(dk), applied to K Wv; loops only.
inline AttentionOut attention(const Mat& queries, const Mat& kv, const Mat& wq, const Mat& wk, const Mat& wv,
                              long double dk) {
    AttentionOut out;
    for (const Vec& qi : queries) {
        const Vec q = vec_matmul(qi, wq);
        Vec s;
        for (const Vec& kj : kv) {
            const Vec k = vec_matmul(kj, wk);
            long double dot = 0.0L;
            for (std::size_t c = 0; c < q.size(); ++c) dot += q[c] * k[c];
            s.push_back(dot / std::sqrt(dk));
        }
        const Vec p = softmax(s);
        Vec o(wv[0].size(), 0.0L);
        for (std::size_t j = 0; j < kv.size(); ++j) {
            const Vec v = vec_matmul(kv[j], wv);
            for (std::size_t c = 0; c < o.size(); ++c) o[c] += p[j] * v[c];
        }
        out.scores.push_back(p);
        out.output.push_back(o);
    }
    return out;
}

struct Ffn {
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;
};

inline Mat ffn(const Mat& x, const Ffn& f) {
    Mat y;
    for (const Vec& r : x) {
        Vec h = vec_matmul(r, f.w1);
        for (std::size_t c = 0; c < h.size(); ++c) h[c] = std::max(0.0L, h[c] + f.b1[c]);
        Vec o = vec_matmul(h, f.w2);
        for (std::size_t c = 0; c < o.size(); ++c) o[c] += f.b2[c];
        y.push_back(o);
    }
    return y;
}

struct FusionOut {
    Vec alpha;
    Mat s;
    Mat o;
};

// alpha_k = softmax_k(q . sum_rows(Z_k) / sqrt(dz)); S = sum_k alpha_k Z_k;
// O = LayerNorm(S + FFN(S)).
inline FusionOut fusion(const std::vector<Mat>& z, const Vec& q, long double dz, const Ffn& f, const Vec& gain,
                        const Vec& bias) {
    Vec scores;
    for (const Mat& zk : z) {
        long double dot = 0.0L;
        for (const Vec& row : zk)
            for (std::size_t c = 0; c < q.size(); ++c) dot += q[c] * row[c];
        scores.push_back(dot / std::sqrt(dz));
    }
    FusionOut out;
    out.alpha = softmax(scores);
    out.s = Mat(z[0].size(), Vec(z[0][0].size(), 0.0L));
    for (std::size_t k = 0; k < z.size(); ++k)
        for (std::size_t i = 0; i < out.s.size(); ++i)
            for (std::size_t c = 0; c < out.s[i].size(); ++c) out.s[i][c] += out.alpha[k] * z[k][i][c];
    out.o = layer_norm(add(out.s, ffn(out.s, f)), gain, bias);
    return out;
}

struct AggregateOut {
    Vec beta;
    Vec f;
};

inline AggregateOut aggregate(const Mat& o, const Vec& score) {
    Vec s;
    for (const Vec& row : o) {
        long double dot = 0.0L;
        for (std::size_t c = 0; c < row.size(); ++c) dot += row[c] * score[c];
        s.push_back(dot);
    }
    AggregateOut out{softmax(s), Vec(o[0].size(), 0.0L)};
    for (std::size_t i = 0; i < o.size(); ++i)
        for (std::size_t c = 0; c < out.f.size(); ++c) out.f[c] += out.beta[i] * o[i][c];
    return out;
}

// -log softmax(logits)[target] via an explicit log-sum-exp.
inline long double cross_entropy(const Vec& logits, std::size_t target) {
    long double mx = logits[0];
    for (long double v : logits) mx = std::max(mx, v);
    long double s = 0.0L;
    for (long double v : logits) s += std::exp(v - mx);
    return mx + std::log(s) - logits[target];
}

inline long double hinge(const Vec& scores, std::size_t correct) {
    long double total = 0.0L;
    for (std::size_t n = 0; n < scores.size(); ++n)
        if (n != correct) total += std::max(0.0L, 1.0L + scores[n] - scores[correct]);
    return total;
}

inline long double sigmoid(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

struct LstmStep {
    Vec h, c;
};

// Gate blocks of width n ordered input, forget, candidate, output.
inline LstmStep lstm_cell(const Vec& x, const LstmStep& prev, const Mat& wx, const Mat& wh, const Vec& b) {
    const std::size_t n = prev.h.size();
    Vec z = vec_matmul(x, wx);
    const Vec zh = vec_matmul(prev.h, wh);
    for (std::size_t c = 0; c < z.size(); ++c) z[c] += zh[c] + b[c];
    LstmStep next{Vec(n), Vec(n)};
    for (std::size_t c = 0; c < n; ++c) {
        const long double i = sigmoid(z[c]);
        const long double f = sigmoid(z[n + c]);
        const long double g = std::tanh(z[2 * n + c]);
        const long double o = sigmoid(z[3 * n + c]);
        next.c[c] = f * prev.c[c] + i * g;
        next.h[c] = o * std::tanh(next.c[c]);
    }
    return next;
}

// Hand-iterated bias-corrected Adam on a flat parameter vector.
struct AdamHand {
    long double lr, b1 = 0.9L, b2 = 0.999L, eps = 1e-8L;
    Vec m, v;
    long double t = 0.0L;

    void step(Vec& params, const Vec& g) {
        if (m.empty()) m = v = Vec(params.size(), 0.0L);
        t += 1.0L;
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0L - b1) * g[i];
            v[i] = b2 * v[i] + (1.0L - b2) * g[i] * g[i];
            const long double mh = m[i] / (1.0L - std::pow(b1, t));
            const long double vh = v[i] / (1.0L - std::pow(b2, t));
            params[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

}  // namespace oracle
