#include "tape.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "common.hpp"

namespace mtlb {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<EMat>;
using ConstMatMap = Eigen::Map<const EMat>;

ConstMatMap as_mat(const Tensor& t) { return ConstMatMap(t.data.data(), t.rows(), t.cols()); }
MatMap as_mat(Tensor& t) { return MatMap(t.data.data(), t.rows(), t.cols()); }

void check_same_tape(const Var& a, const Var& b, const char* op) {
    if (a.tape != b.tape) throw UsageError(std::string(op) + ": operands on different tapes");
}

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
    throw UsageError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                     b.shape_str());
}

void check_no_nan(const Tensor& t, const char* what) {
    for (double v : t.data)
        if (std::isnan(v)) throw NumericError(std::string("NaN in ") + what);
}

}  // namespace

Var Tape::leaf(Tensor value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make(Tensor value, bool needs_grad, Backprop backprop) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buf(int idx) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

Tensor Tape::grad_of(const Var& v) const {
    const Node& n = nodes_[static_cast<size_t>(v.idx)];
    if (n.grad.data.empty()) return Tensor::zeros(n.value.shape);
    return n.grad;
}

void Tape::backward(const Var& root) {
    if (root.tape != this) throw UsageError("backward: root from another tape");
    const Node& r = nodes_[static_cast<size_t>(root.idx)];
    if (!r.value.is_scalar())
        throw UsageError("backward: root must be scalar, got " + r.value.shape_str());
    grad_buf(root.idx).data[0] = 1.0;
    for (int i = root.idx; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.grad.data.empty() && n.backprop) n.backprop(*this, i);
    }
}

void Tape::zero_grad() {
    for (Node& n : nodes_) n.grad = Tensor();
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) dim_error("matmul", A, B);
    Tensor C = Tensor::zeros({A.rows(), B.cols()});
    as_mat(C).noalias() = as_mat(A) * as_mat(B);
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    int ai = a.idx, bi = b.idx;
    return t.make(std::move(C), ng, [ai, bi](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& A2 = tp.val(ai);
        const Tensor& B2 = tp.val(bi);
        if (tp.needs_grad(Var{&tp, ai}))
            as_mat(tp.grad_buf(ai)).noalias() += as_mat(g) * as_mat(B2).transpose();
        if (tp.needs_grad(Var{&tp, bi}))
            as_mat(tp.grad_buf(bi)).noalias() += as_mat(A2).transpose() * as_mat(g);
    });
}

Var add(Var a, Var b) {
    check_same_tape(a, b, "add");
    Tape& t = *a.tape;
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (!A.same_shape(B)) dim_error("add", A, B);
    Tensor C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] += B.data[i];
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    int ai = a.idx, bi = b.idx;
    return t.make(std::move(C), ng, [ai, bi](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        for (int p : {ai, bi}) {
            if (!tp.needs_grad(Var{&tp, p})) continue;
            Tensor& pg = tp.grad_buf(p);
            for (size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i];
        }
    });
}

Var add_rowvec(Var m, Var rowvec) {
    check_same_tape(m, rowvec, "add_rowvec");
    Tape& t = *m.tape;
    const Tensor& M = t.val(m);
    const Tensor& V = t.val(rowvec);
    if (M.cols() != V.cols() || V.rows() != 1) dim_error("add_rowvec", M, V);
    Tensor C = M;
    int rows = M.rows(), cols = M.cols();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) C.data[static_cast<size_t>(r) * cols + c] += V.data[c];
    bool ng = t.needs_grad(m) || t.needs_grad(rowvec);
    int mi = m.idx, vi = rowvec.idx;
    return t.make(std::move(C), ng, [mi, vi, rows, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        if (tp.needs_grad(Var{&tp, mi})) {
            Tensor& mg = tp.grad_buf(mi);
            for (size_t i = 0; i < g.data.size(); ++i) mg.data[i] += g.data[i];
        }
        if (tp.needs_grad(Var{&tp, vi})) {
            Tensor& vg = tp.grad_buf(vi);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) vg.data[c] += g.data[static_cast<size_t>(r) * cols + c];
        }
    });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    Tape& t = *a.tape;
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (!A.same_shape(B)) dim_error("mul", A, B);
    Tensor C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] *= B.data[i];
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    int ai = a.idx, bi = b.idx;
    return t.make(std::move(C), ng, [ai, bi](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& A2 = tp.val(ai);
        const Tensor& B2 = tp.val(bi);
        if (tp.needs_grad(Var{&tp, ai})) {
            Tensor& ag = tp.grad_buf(ai);
            for (size_t i = 0; i < g.data.size(); ++i) ag.data[i] += g.data[i] * B2.data[i];
        }
        if (tp.needs_grad(Var{&tp, bi})) {
            Tensor& bg = tp.grad_buf(bi);
            for (size_t i = 0; i < g.data.size(); ++i) bg.data[i] += g.data[i] * A2.data[i];
        }
    });
}

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Tensor C = t.val(a);
    for (double& v : C.data) v *= c;
    int ai = a.idx;
    return t.make(std::move(C), t.needs_grad(a), [ai, c](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        Tensor& ag = tp.grad_buf(ai);
        for (size_t i = 0; i < g.data.size(); ++i) ag.data[i] += c * g.data[i];
    });
}

Var add_const(Var a, double c) {
    Tape& t = *a.tape;
    Tensor C = t.val(a);
    for (double& v : C.data) v += c;
    int ai = a.idx;
    return t.make(std::move(C), t.needs_grad(a), [ai](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        Tensor& ag = tp.grad_buf(ai);
        for (size_t i = 0; i < g.data.size(); ++i) ag.data[i] += g.data[i];
    });
}

namespace {
// Shared scaffold for unary elementwise ops with dy/dx expressible from y.
Var unary_from_output(Var x, double (*fwd)(double), double (*dydx_from_y)(double)) {
    Tape& t = *x.tape;
    Tensor Y = t.val(x);
    for (double& v : Y.data) v = fwd(v);
    int xi = x.idx;
    return t.make(std::move(Y), t.needs_grad(x), [xi, dydx_from_y](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        Tensor& xg = tp.grad_buf(xi);
        for (size_t i = 0; i < g.data.size(); ++i) xg.data[i] += g.data[i] * dydx_from_y(y.data[i]);
    });
}
}  // namespace

Var sigmoid(Var x) {
    return unary_from_output(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double y) { return y * (1.0 - y); });
}

Var tanh_op(Var x) {
    return unary_from_output(
        x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
    return unary_from_output(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var emax(Var a, Var b) {
    check_same_tape(a, b, "emax");
    Tape& t = *a.tape;
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (!A.same_shape(B)) dim_error("emax", A, B);
    Tensor C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] = std::max(A.data[i], B.data[i]);
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    int ai = a.idx, bi = b.idx;
    return t.make(std::move(C), ng, [ai, bi](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& A2 = tp.val(ai);
        const Tensor& B2 = tp.val(bi);
        // ties route to the first operand
        if (tp.needs_grad(Var{&tp, ai})) {
            Tensor& ag = tp.grad_buf(ai);
            for (size_t i = 0; i < g.data.size(); ++i)
                if (A2.data[i] >= B2.data[i]) ag.data[i] += g.data[i];
        }
        if (tp.needs_grad(Var{&tp, bi})) {
            Tensor& bg = tp.grad_buf(bi);
            for (size_t i = 0; i < g.data.size(); ++i)
                if (A2.data[i] < B2.data[i]) bg.data[i] += g.data[i];
        }
    });
}

Var dropout(Var x, double p, bool train, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw UsageError("dropout: p must be in [0,1), got " + std::to_string(p));
    if (!train || p == 0.0) return x;  // eval mode is the exact identity
    Tape& t = *x.tape;
    const Tensor& X = t.val(x);
    std::vector<double> mask(X.data.size());
    double keep = 1.0 - p;
    for (double& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    Tensor Y = X;
    for (size_t i = 0; i < Y.data.size(); ++i) Y.data[i] *= mask[i];
    int xi = x.idx;
    return t.make(std::move(Y), t.needs_grad(x), [xi, mask = std::move(mask)](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        Tensor& xg = tp.grad_buf(xi);
        for (size_t i = 0; i < g.data.size(); ++i) xg.data[i] += g.data[i] * mask[i];
    });
}

Var softmax_rows(Var x) {
    Tape& t = *x.tape;
    const Tensor& X = t.val(x);
    int rows = X.rows(), cols = X.cols();
    if (cols < 1) throw UsageError("softmax_rows: needs at least one column");
    Tensor Y = X;
    for (int r = 0; r < rows; ++r) {
        double* row = &Y.data[static_cast<size_t>(r) * cols];
        double mx = row[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (int c = 0; c < cols; ++c) row[c] /= sum;
    }
    int xi = x.idx;
    return t.make(std::move(Y), t.needs_grad(x), [xi, rows, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        Tensor& xg = tp.grad_buf(xi);
        for (int r = 0; r < rows; ++r) {
            const double* gr = &g.data[static_cast<size_t>(r) * cols];
            const double* yr = &y.data[static_cast<size_t>(r) * cols];
            double dot = 0.0;
            for (int c = 0; c < cols; ++c) dot += gr[c] * yr[c];
            double* xr = &xg.data[static_cast<size_t>(r) * cols];
            for (int c = 0; c < cols; ++c) xr[c] += yr[c] * (gr[c] - dot);
        }
    });
}

Var transpose(Var x) {
    Tape& t = *x.tape;
    const Tensor& X = t.val(x);
    int rows = X.rows(), cols = X.cols();
    Tensor Y = Tensor::zeros({cols, rows});
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) Y.data[static_cast<size_t>(c) * rows + r] = X.at(r, c);
    int xi = x.idx;
    return t.make(std::move(Y), t.needs_grad(x), [xi, rows, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        Tensor& xg = tp.grad_buf(xi);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                xg.data[static_cast<size_t>(r) * cols + c] += g.data[static_cast<size_t>(c) * rows + r];
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw UsageError("concat_cols: empty input");
    Tape& t = *parts[0].tape;
    int rows = t.val(parts[0]).rows();
    int total = 0;
    bool ng = false;
    for (const Var& p : parts) {
        check_same_tape(parts[0], p, "concat_cols");
        if (t.val(p).rows() != rows) dim_error("concat_cols", t.val(parts[0]), t.val(p));
        total += t.val(p).cols();
        ng = ng || t.needs_grad(p);
    }
    Tensor Y = Tensor::zeros({rows, total});
    int off = 0;
    std::vector<std::pair<int, int>> spans;  // (idx, col offset)
    for (const Var& p : parts) {
        const Tensor& P = t.val(p);
        int pc = P.cols();
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < pc; ++c) Y.data[static_cast<size_t>(r) * total + off + c] = P.at(r, c);
        spans.emplace_back(p.idx, off);
        off += pc;
    }
    return t.make(std::move(Y), ng, [spans, rows, total](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        for (auto [pi, poff] : spans) {
            if (!tp.needs_grad(Var{&tp, pi})) continue;
            Tensor& pg = tp.grad_buf(pi);
            int pc = pg.cols();
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < pc; ++c)
                    pg.data[static_cast<size_t>(r) * pc + c] +=
                        g.data[static_cast<size_t>(r) * total + poff + c];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw UsageError("concat_rows: empty input");
    Tape& t = *parts[0].tape;
    int cols = t.val(parts[0]).cols();
    int total = 0;
    bool ng = false;
    for (const Var& p : parts) {
        check_same_tape(parts[0], p, "concat_rows");
        if (t.val(p).cols() != cols) dim_error("concat_rows", t.val(parts[0]), t.val(p));
        total += t.val(p).rows();
        ng = ng || t.needs_grad(p);
    }
    Tensor Y = Tensor::zeros({total, cols});
    int off = 0;
    std::vector<std::pair<int, int>> spans;  // (idx, row offset)
    for (const Var& p : parts) {
        const Tensor& P = t.val(p);
        std::copy(P.data.begin(), P.data.end(), Y.data.begin() + static_cast<int64_t>(off) * cols);
        spans.emplace_back(p.idx, off);
        off += P.rows();
    }
    return t.make(std::move(Y), ng, [spans, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        for (auto [pi, poff] : spans) {
            if (!tp.needs_grad(Var{&tp, pi})) continue;
            Tensor& pg = tp.grad_buf(pi);
            size_t n = pg.data.size();
            const double* src = g.data.data() + static_cast<size_t>(poff) * static_cast<size_t>(cols);
            for (size_t i = 0; i < n; ++i) pg.data[i] += src[i];
        }
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw UsageError("stack_rows: empty input");
    Tape& t = *rows[0].tape;
    int cols = t.val(rows[0]).cols();
    bool ng = false;
    for (const Var& r : rows) {
        check_same_tape(rows[0], r, "stack_rows");
        const Tensor& R = t.val(r);
        if (R.rows() != 1 || R.cols() != cols) dim_error("stack_rows", t.val(rows[0]), R);
        ng = ng || t.needs_grad(r);
    }
    int n = static_cast<int>(rows.size());
    Tensor Y = Tensor::zeros({n, cols});
    std::vector<int> idxs(rows.size());
    for (int i = 0; i < n; ++i) {
        idxs[static_cast<size_t>(i)] = rows[static_cast<size_t>(i)].idx;
        const Tensor& R = t.val(rows[static_cast<size_t>(i)]);
        for (int c = 0; c < cols; ++c) Y.data[static_cast<size_t>(i) * cols + c] = R.data[static_cast<size_t>(c)];
    }
    return t.make(std::move(Y), ng, [idxs, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        for (size_t i = 0; i < idxs.size(); ++i) {
            if (!tp.needs_grad(Var{&tp, idxs[i]})) continue;
            Tensor& rg = tp.grad_buf(idxs[i]);
            for (int c = 0; c < cols; ++c) rg.data[static_cast<size_t>(c)] += g.data[i * static_cast<size_t>(cols) + static_cast<size_t>(c)];
        }
    });
}

Var slice_rows(Var x, int row0, int nrows) {
    Tape& t = *x.tape;
    const Tensor& X = t.val(x);
    int rows = X.rows(), cols = X.cols();
    if (row0 < 0 || nrows < 1 || row0 + nrows > rows)
        throw UsageError("slice_rows: range [" + std::to_string(row0) + "," +
                         std::to_string(row0 + nrows) + ") out of " + std::to_string(rows));
    Tensor Y = Tensor::zeros({nrows, cols});
    for (int r = 0; r < nrows; ++r)
        for (int c = 0; c < cols; ++c) Y.at(r, c) = X.at(row0 + r, c);
    int xi = x.idx;
    return t.make(std::move(Y), t.needs_grad(x), [xi, row0, nrows, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        Tensor& xg = tp.grad_buf(xi);
        for (int r = 0; r < nrows; ++r)
            for (int c = 0; c < cols; ++c) xg.at(row0 + r, c) += g.at(r, c);
    });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    check_same_tape(x, gamma, "layer_norm_rows");
    check_same_tape(x, beta, "layer_norm_rows");
    Tape& t = *x.tape;
    const Tensor& X = t.val(x);
    const Tensor& G = t.val(gamma);
    const Tensor& B = t.val(beta);
    int rows = X.rows(), cols = X.cols();
    if (G.rows() != 1 || G.cols() != cols) dim_error("layer_norm_rows(gamma)", X, G);
    if (B.rows() != 1 || B.cols() != cols) dim_error("layer_norm_rows(beta)", X, B);
    Tensor Y = Tensor::zeros({rows, cols});
    // normalized activations and inverse stddevs are reused in the backward pass
    std::vector<double> xhat(static_cast<size_t>(rows) * static_cast<size_t>(cols));
    std::vector<double> inv_std(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const double* xr = &X.data[static_cast<size_t>(r) * cols];
        double mu = 0.0;
        for (int c = 0; c < cols; ++c) mu += xr[c];
        mu /= cols;
        double var = 0.0;
        for (int c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
        var /= cols;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = is;
        for (int c = 0; c < cols; ++c) {
            double xh = (xr[c] - mu) * is;
            xhat[static_cast<size_t>(r) * cols + c] = xh;
            Y.at(r, c) = G.data[static_cast<size_t>(c)] * xh + B.data[static_cast<size_t>(c)];
        }
    }
    bool ng = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
    int xi = x.idx, gi = gamma.idx, bi = beta.idx;
    return t.make(std::move(Y), ng,
                  [xi, gi, bi, rows, cols, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      const Tensor& G2 = tp.val(gi);
                      for (int r = 0; r < rows; ++r) {
                          const double* gr = &g.data[static_cast<size_t>(r) * cols];
                          const double* xh = &xhat[static_cast<size_t>(r) * cols];
                          if (tp.needs_grad(Var{&tp, gi})) {
                              Tensor& gg = tp.grad_buf(gi);
                              for (int c = 0; c < cols; ++c) gg.data[static_cast<size_t>(c)] += gr[c] * xh[c];
                          }
                          if (tp.needs_grad(Var{&tp, bi})) {
                              Tensor& bg = tp.grad_buf(bi);
                              for (int c = 0; c < cols; ++c) bg.data[static_cast<size_t>(c)] += gr[c];
                          }
                          if (tp.needs_grad(Var{&tp, xi})) {
                              Tensor& xg = tp.grad_buf(xi);
                              double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat * xhat)
                              for (int c = 0; c < cols; ++c) {
                                  double dxh = gr[c] * G2.data[static_cast<size_t>(c)];
                                  m1 += dxh;
                                  m2 += dxh * xh[c];
                              }
                              m1 /= cols;
                              m2 /= cols;
                              double is = inv_std[static_cast<size_t>(r)];
                              double* xr = &xg.data[static_cast<size_t>(r) * cols];
                              for (int c = 0; c < cols; ++c) {
                                  double dxh = gr[c] * G2.data[static_cast<size_t>(c)];
                                  xr[c] += is * (dxh - m1 - xh[c] * m2);
                              }
                          }
                      }
                  });
}

Var sum_all(Var x) {
    Tape& t = *x.tape;
    const Tensor& X = t.val(x);
    double s = 0.0;
    for (double v : X.data) s += v;
    int xi = x.idx;
    return t.make(Tensor::scalar(s), t.needs_grad(x), [xi](Tape& tp, int self) {
        double g = tp.grad_buf(self).data[0];
        Tensor& xg = tp.grad_buf(xi);
        for (double& v : xg.data) v += g;
    });
}

Var add_scalars(const std::vector<Var>& terms) {
    if (terms.empty()) throw UsageError("add_scalars: empty input");
    Tape& t = *terms[0].tape;
    double s = 0.0;
    bool ng = false;
    std::vector<int> idxs;
    for (const Var& v : terms) {
        check_same_tape(terms[0], v, "add_scalars");
        if (!t.val(v).is_scalar()) throw UsageError("add_scalars: non-scalar term " + t.val(v).shape_str());
        s += t.val(v).data[0];
        ng = ng || t.needs_grad(v);
        idxs.push_back(v.idx);
    }
    return t.make(Tensor::scalar(s), ng, [idxs](Tape& tp, int self) {
        double g = tp.grad_buf(self).data[0];
        for (int i : idxs)
            if (tp.needs_grad(Var{&tp, i})) tp.grad_buf(i).data[0] += g;
    });
}

// ---- losses ----------------------------------------------------------------

Var bce_with_logits_loss(Var logits, const Tensor& target, const Tensor& mask) {
    Tape& t = *logits.tape;
    const Tensor& X = t.val(logits);
    if (!X.same_shape(target)) dim_error("bce_with_logits_loss(target)", X, target);
    if (!X.same_shape(mask)) dim_error("bce_with_logits_loss(mask)", X, mask);
    check_no_nan(X, "bce logits");
    check_no_nan(target, "bce target");
    double valid = 0.0;
    for (double m : mask.data) valid += m;
    if (valid == 0.0) return t.leaf(Tensor::scalar(0.0), false);
    double sum = 0.0;
    for (size_t i = 0; i < X.data.size(); ++i) {
        if (mask.data[i] == 0.0) continue;
        double x = X.data[i], z = target.data[i];
        sum += std::max(x, 0.0) - x * z + std::log1p(std::exp(-std::abs(x)));
    }
    int xi = logits.idx;
    return t.make(Tensor::scalar(sum / valid), t.needs_grad(logits),
                  [xi, target, mask, valid](Tape& tp, int self) {
                      double g = tp.grad_buf(self).data[0];
                      const Tensor& x = tp.val(xi);
                      Tensor& xg = tp.grad_buf(xi);
                      for (size_t i = 0; i < x.data.size(); ++i) {
                          if (mask.data[i] == 0.0) continue;
                          double s = 1.0 / (1.0 + std::exp(-x.data[i]));
                          xg.data[i] += g * (s - target.data[i]) / valid;
                      }
                  });
}

Var ce_with_logits_loss(Var logits, const std::vector<int>& target_class, const Tensor& row_mask) {
    Tape& t = *logits.tape;
    const Tensor& X = t.val(logits);
    int rows = X.rows(), cols = X.cols();
    if (static_cast<int>(target_class.size()) != rows || static_cast<int>(row_mask.data.size()) != rows)
        throw UsageError("ce_with_logits_loss: rows " + std::to_string(rows) + " vs targets " +
                         std::to_string(target_class.size()));
    check_no_nan(X, "ce logits");
    double valid = 0.0;
    for (double m : row_mask.data) valid += m;
    if (valid == 0.0) return t.leaf(Tensor::scalar(0.0), false);
    double sum = 0.0;
    for (int r = 0; r < rows; ++r) {
        if (row_mask.data[static_cast<size_t>(r)] == 0.0) continue;
        int cls = target_class[static_cast<size_t>(r)];
        if (cls < 0 || cls >= cols)
            throw UsageError("ce_with_logits_loss: class " + std::to_string(cls) + " out of " +
                             std::to_string(cols));
        const double* row = &X.data[static_cast<size_t>(r) * cols];
        double mx = row[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double lse = 0.0;
        for (int c = 0; c < cols; ++c) lse += std::exp(row[c] - mx);
        sum += mx + std::log(lse) - row[cls];
    }
    int xi = logits.idx;
    return t.make(Tensor::scalar(sum / valid), t.needs_grad(logits),
                  [xi, target_class, row_mask, valid, rows, cols](Tape& tp, int self) {
                      double g = tp.grad_buf(self).data[0];
                      const Tensor& x = tp.val(xi);
                      Tensor& xg = tp.grad_buf(xi);
                      for (int r = 0; r < rows; ++r) {
                          if (row_mask.data[static_cast<size_t>(r)] == 0.0) continue;
                          const double* row = &x.data[static_cast<size_t>(r) * cols];
                          double* grow = &xg.data[static_cast<size_t>(r) * cols];
                          double mx = row[0];
                          for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
                          double lse = 0.0;
                          for (int c = 0; c < cols; ++c) lse += std::exp(row[c] - mx);
                          for (int c = 0; c < cols; ++c) {
                              double p = std::exp(row[c] - mx) / lse;
                              double onehot = (c == target_class[static_cast<size_t>(r)]) ? 1.0 : 0.0;
                              grow[c] += g * (p - onehot) / valid;
                          }
                      }
                  });
}

Var mse_loss(Var pred, const Tensor& target, const Tensor& mask) {
    Tape& t = *pred.tape;
    const Tensor& P = t.val(pred);
    if (!P.same_shape(target)) dim_error("mse_loss(target)", P, target);
    if (!P.same_shape(mask)) dim_error("mse_loss(mask)", P, mask);
    check_no_nan(P, "mse pred");
    check_no_nan(target, "mse target");
    double valid = 0.0;
    for (double m : mask.data) valid += m;
    if (valid == 0.0) return t.leaf(Tensor::scalar(0.0), false);
    double sum = 0.0;
    for (size_t i = 0; i < P.data.size(); ++i) {
        if (mask.data[i] == 0.0) continue;
        double d = P.data[i] - target.data[i];
        sum += d * d;
    }
    int pi = pred.idx;
    return t.make(Tensor::scalar(sum / valid), t.needs_grad(pred),
                  [pi, target, mask, valid](Tape& tp, int self) {
                      double g = tp.grad_buf(self).data[0];
                      const Tensor& p = tp.val(pi);
                      Tensor& pg = tp.grad_buf(pi);
                      for (size_t i = 0; i < p.data.size(); ++i) {
                          if (mask.data[i] == 0.0) continue;
                          pg.data[i] += g * 2.0 * (p.data[i] - target.data[i]) / valid;
                      }
                  });
}

Var loss(LossKind kind, Var pred, const Tensor& target, const Tensor& mask) {
    switch (kind) {
        case LossKind::BinaryCrossEntropyWithLogits:
            return bce_with_logits_loss(pred, target, mask);
        case LossKind::CategoricalCrossEntropy: {
            const Tensor& P = pred.tape->val(pred);
            int rows = P.rows(), cols = P.cols();
            if (!P.same_shape(target)) dim_error("loss(categorical target)", P, target);
            std::vector<int> classes(static_cast<size_t>(rows), 0);
            for (int r = 0; r < rows; ++r) {
                double best = target.at(r, 0);
                for (int c = 1; c < cols; ++c)
                    if (target.at(r, c) > best) {
                        best = target.at(r, c);
                        classes[static_cast<size_t>(r)] = c;
                    }
            }
            Tensor row_mask = Tensor::zeros({rows});
            for (int r = 0; r < rows; ++r) row_mask.data[static_cast<size_t>(r)] = mask.at(r, 0);
            return ce_with_logits_loss(pred, classes, row_mask);
        }
        case LossKind::MeanSquaredError:
            return mse_loss(pred, target, mask);
    }
    throw UsageError("loss: unknown kind");
}

}  // namespace mtlb
