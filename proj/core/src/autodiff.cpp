// SPDX-License-Identifier: Apache-2.0
#include "tdx/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace tdx {

namespace {

constexpr double kGeluC0 = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;

double gelu_scalar(double x) {
    const double inner = kGeluC0 * (x + kGeluC1 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(inner));
}

double gelu_grad_scalar(double x) {
    const double inner = kGeluC0 * (x + kGeluC1 * x * x * x);
    const double t = std::tanh(inner);
    const double dinner = kGeluC0 * (1.0 + 3.0 * kGeluC1 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

// C[m x n] += A[m x k] B[k x n]
void matmul_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A[m x k] B^T where B is [n x k]
void matmul_bt_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            const double* arow = a + i * k;
            const double* brow = b + j * k;
            for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            c[i * n + j] += s;
        }
    }
}

// C[k x n] += A^T B where A is [m x k], B is [m x n]
void matmul_at_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void ensure_adjoint(Tensor& adj, const std::vector<int64_t>& shape) {
    if (adj.numel() == 0) adj = Tensor::zeros(shape);
}

} // namespace

const Tensor& Gradients::at(Value v) const {
    if (v.tape != tape_ || v.node < 0 || v.node >= static_cast<int>(adjoints_.size())) {
        throw TdxError("Gradients::at: value does not belong to this tape");
    }
    const Tensor& t = adjoints_[static_cast<size_t>(v.node)];
    if (t.numel() == 0) {
        throw TdxError("Gradients::at: node was not reached by backward (no adjoint)");
    }
    return t;
}

const char* Tape::op_name(Op op) {
    switch (op) {
        case Op::kConstant: return "constant";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kScale: return "scale";
        case Op::kExp: return "exp";
        case Op::kNegate: return "negate";
        case Op::kGelu: return "gelu";
        case Op::kMatmul: return "matmul";
        case Op::kTranspose: return "transpose";
        case Op::kAddRowvec: return "add_rowvec";
        case Op::kSubColvec: return "sub_colvec";
        case Op::kPairwiseSqdist: return "pairwise_sqdist";
        case Op::kSliceRows: return "slice_rows";
        case Op::kSum: return "sum";
        case Op::kMean: return "mean";
        case Op::kSumAxis: return "sum_axis";
        case Op::kLayerNorm: return "layer_norm";
        case Op::kMaskedNormalize: return "masked_normalize";
    }
    return "?";
}

Value Tape::emit(Node node, const char* name) {
    if (!node.value.all_finite()) {
        throw NumericError(std::string(name) + ": non-finite value produced (output shape " +
                           node.value.shape_str() + ")");
    }
    nodes_.push_back(std::move(node));
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Value v) const {
    if (v.tape != this || v.node < 0 || v.node >= static_cast<int>(nodes_.size())) {
        throw TdxError("value does not belong to this tape");
    }
    return nodes_[static_cast<size_t>(v.node)];
}

const Tensor& Tape::value(Value v) const { return node(v).value; }
const std::vector<int64_t>& Tape::shape(Value v) const { return node(v).value.shape(); }

Value Tape::constant(Tensor t) {
    Node n;
    n.op = Op::kConstant;
    n.value = std::move(t);
    return emit(std::move(n), "constant");
}

Value Tape::param(Tensor t) {
    Value v = constant(std::move(t));
    params_.push_back(v);
    return v;
}

Value Tape::add(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "add");
    Node n;
    n.op = Op::kAdd;
    n.a = a.node;
    n.b = b.node;
    n.value = ta;
    for (int64_t i = 0; i < ta.numel(); ++i) n.value[i] += tb[i];
    return emit(std::move(n), "add");
}

Value Tape::sub(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "sub");
    Node n;
    n.op = Op::kSub;
    n.a = a.node;
    n.b = b.node;
    n.value = ta;
    for (int64_t i = 0; i < ta.numel(); ++i) n.value[i] -= tb[i];
    return emit(std::move(n), "sub");
}

Value Tape::mul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "mul");
    Node n;
    n.op = Op::kMul;
    n.a = a.node;
    n.b = b.node;
    n.value = ta;
    for (int64_t i = 0; i < ta.numel(); ++i) n.value[i] *= tb[i];
    return emit(std::move(n), "mul");
}

Value Tape::scale(Value a, double s) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::kScale;
    n.a = a.node;
    n.scalar = s;
    n.value = ta;
    for (int64_t i = 0; i < ta.numel(); ++i) n.value[i] *= s;
    return emit(std::move(n), "scale");
}

Value Tape::exp(Value a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::kExp;
    n.a = a.node;
    n.value = ta;
    for (int64_t i = 0; i < ta.numel(); ++i) n.value[i] = std::exp(ta[i]);
    return emit(std::move(n), "exp");
}

Value Tape::negate(Value a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::kNegate;
    n.a = a.node;
    n.value = ta;
    for (int64_t i = 0; i < ta.numel(); ++i) n.value[i] = -ta[i];
    return emit(std::move(n), "negate");
}

Value Tape::gelu(Value a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::kGelu;
    n.a = a.node;
    n.value = ta;
    for (int64_t i = 0; i < ta.numel(); ++i) n.value[i] = gelu_scalar(ta[i]);
    return emit(std::move(n), "gelu");
}

Value Tape::matmul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
        throw ShapeError("matmul: incompatible shapes " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::kMatmul;
    n.a = a.node;
    n.b = b.node;
    n.value = Tensor::zeros({ta.rows(), tb.cols()});
    matmul_acc(ta.data(), tb.data(), n.value.data(), ta.rows(), ta.cols(), tb.cols());
    return emit(std::move(n), "matmul");
}

Value Tape::transpose(Value a) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + ta.shape_str());
    Node n;
    n.op = Op::kTranspose;
    n.a = a.node;
    n.value = Tensor::zeros({ta.cols(), ta.rows()});
    for (int64_t i = 0; i < ta.rows(); ++i)
        for (int64_t j = 0; j < ta.cols(); ++j) n.value.at(j, i) = ta.at(i, j);
    return emit(std::move(n), "transpose");
}

Value Tape::add_rowvec(Value x, Value b) {
    const Tensor& tx = value(x);
    const Tensor& tb = value(b);
    if (tx.rank() != 2 || tb.rank() != 1 || tb.dim(0) != tx.cols()) {
        throw ShapeError("add_rowvec: shapes " + tx.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::kAddRowvec;
    n.a = x.node;
    n.b = b.node;
    n.value = tx;
    for (int64_t i = 0; i < tx.rows(); ++i)
        for (int64_t j = 0; j < tx.cols(); ++j) n.value.at(i, j) += tb[j];
    return emit(std::move(n), "add_rowvec");
}

Value Tape::sub_colvec(Value x, Value c) {
    const Tensor& tx = value(x);
    const Tensor& tc = value(c);
    if (tx.rank() != 2 || tc.rank() != 1 || tc.dim(0) != tx.rows()) {
        throw ShapeError("sub_colvec: shapes " + tx.shape_str() + " vs " + tc.shape_str());
    }
    Node n;
    n.op = Op::kSubColvec;
    n.a = x.node;
    n.b = c.node;
    n.value = tx;
    for (int64_t i = 0; i < tx.rows(); ++i)
        for (int64_t j = 0; j < tx.cols(); ++j) n.value.at(i, j) -= tc[i];
    return emit(std::move(n), "sub_colvec");
}

Value Tape::pairwise_sqdist(Value q, Value k) {
    const Tensor& tq = value(q);
    const Tensor& tk = value(k);
    if (tq.rank() != 2 || tk.rank() != 2 || tq.cols() != tk.cols()) {
        throw ShapeError("pairwise_sqdist: shapes " + tq.shape_str() + " vs " + tk.shape_str());
    }
    Node n;
    n.op = Op::kPairwiseSqdist;
    n.a = q.node;
    n.b = k.node;
    n.value = Tensor::zeros({tq.rows(), tk.rows()});
    const int64_t d = tq.cols();
    for (int64_t i = 0; i < tq.rows(); ++i) {
        for (int64_t j = 0; j < tk.rows(); ++j) {
            double s = 0.0;
            for (int64_t p = 0; p < d; ++p) {
                const double diff = tq.at(i, p) - tk.at(j, p);
                s += diff * diff;
            }
            n.value.at(i, j) = s;
        }
    }
    return emit(std::move(n), "pairwise_sqdist");
}

Value Tape::slice_rows(Value x, int64_t r0, int64_t r1) {
    const Tensor& tx = value(x);
    if (tx.rank() != 2) throw ShapeError("slice_rows: expected rank 2, got " + tx.shape_str());
    if (r0 < 0 || r1 <= r0 || r1 > tx.rows()) {
        throw ShapeError("slice_rows: rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") out of range for " + tx.shape_str());
    }
    Node n;
    n.op = Op::kSliceRows;
    n.a = x.node;
    n.i0 = r0;
    n.i1 = r1;
    n.value = Tensor::zeros({r1 - r0, tx.cols()});
    for (int64_t i = r0; i < r1; ++i)
        for (int64_t j = 0; j < tx.cols(); ++j) n.value.at(i - r0, j) = tx.at(i, j);
    return emit(std::move(n), "slice_rows");
}

Value Tape::sum(Value a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (int64_t i = 0; i < ta.numel(); ++i) s += ta[i];
    Node n;
    n.op = Op::kSum;
    n.a = a.node;
    n.value = Tensor::scalar(s);
    return emit(std::move(n), "sum");
}

Value Tape::mean(Value a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (int64_t i = 0; i < ta.numel(); ++i) s += ta[i];
    Node n;
    n.op = Op::kMean;
    n.a = a.node;
    n.value = Tensor::scalar(s / static_cast<double>(ta.numel()));
    return emit(std::move(n), "mean");
}

Value Tape::sum_axis(Value a, int axis) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2) throw ShapeError("sum_axis: expected rank 2, got " + ta.shape_str());
    if (axis < 0 || axis >= 2) throw ShapeError("sum_axis: axis " + std::to_string(axis) + " out of range");
    Node n;
    n.op = Op::kSumAxis;
    n.a = a.node;
    n.i0 = axis;
    if (axis == 0) {
        n.value = Tensor::zeros({ta.cols()});
        for (int64_t i = 0; i < ta.rows(); ++i)
            for (int64_t j = 0; j < ta.cols(); ++j) n.value[j] += ta.at(i, j);
    } else {
        n.value = Tensor::zeros({ta.rows()});
        for (int64_t i = 0; i < ta.rows(); ++i)
            for (int64_t j = 0; j < ta.cols(); ++j) n.value[i] += ta.at(i, j);
    }
    return emit(std::move(n), "sum_axis");
}

Value Tape::mean_axis(Value a, int axis) {
    const Tensor& ta = value(a);
    Value s = sum_axis(a, axis);
    const double len = static_cast<double>(axis == 0 ? ta.rows() : ta.cols());
    return scale(s, 1.0 / len);
}

Value Tape::layer_norm(Value x, Value gain, Value bias) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    if (tx.rank() != 2 || tg.rank() != 1 || tb.rank() != 1 || tg.dim(0) != tx.cols() ||
        tb.dim(0) != tx.cols()) {
        throw ShapeError("layer_norm: shapes " + tx.shape_str() + ", " + tg.shape_str() + ", " +
                         tb.shape_str());
    }
    const int64_t rows = tx.rows(), d = tx.cols();
    Node n;
    n.op = Op::kLayerNorm;
    n.a = x.node;
    n.b = gain.node;
    n.c = bias.node;
    n.value = Tensor::zeros({rows, d});
    Tensor xhat = Tensor::zeros({rows, d});
    Tensor inv_std = Tensor::zeros({rows});
    for (int64_t i = 0; i < rows; ++i) {
        double mu = 0.0;
        for (int64_t j = 0; j < d; ++j) mu += tx.at(i, j);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double c = tx.at(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[i] = inv;
        for (int64_t j = 0; j < d; ++j) {
            const double xh = (tx.at(i, j) - mu) * inv;
            xhat.at(i, j) = xh;
            n.value.at(i, j) = xh * tg[j] + tb[j];
        }
    }
    n.cache.push_back(std::move(xhat));
    n.cache.push_back(std::move(inv_std));
    return emit(std::move(n), "layer_norm");
}

Value Tape::masked_normalize(Value scores, const Tensor& mask) {
    const Tensor& ts = value(scores);
    if (ts.rank() != 2) throw ShapeError("masked_normalize: expected rank 2, got " + ts.shape_str());
    require_same_shape(ts, mask, "masked_normalize");
    const int64_t rows = ts.rows(), cols = ts.cols();
    Node n;
    n.op = Op::kMaskedNormalize;
    n.a = scores.node;
    n.value = Tensor::zeros({rows, cols});
    Tensor row_sum = Tensor::zeros({rows});
    for (int64_t i = 0; i < rows; ++i) {
        double s = 0.0;
        int64_t unmasked = 0;
        for (int64_t j = 0; j < cols; ++j) {
            if (mask.at(i, j) != 0.0) {
                s += ts.at(i, j);
                ++unmasked;
            }
        }
        if (unmasked == 0) {
            throw TdxError("masked_normalize: row " + std::to_string(i) + " has no unmasked entries");
        }
        row_sum[i] = s;
        if (s == 0.0) {
            // all unmasked scores exactly zero: uniform weights, zero adjoint
            const double w = 1.0 / static_cast<double>(unmasked);
            for (int64_t j = 0; j < cols; ++j)
                if (mask.at(i, j) != 0.0) n.value.at(i, j) = w;
        } else {
            for (int64_t j = 0; j < cols; ++j)
                if (mask.at(i, j) != 0.0) n.value.at(i, j) = ts.at(i, j) / s;
        }
    }
    n.cache.push_back(mask);
    n.cache.push_back(std::move(row_sum));
    return emit(std::move(n), "masked_normalize");
}

Gradients Tape::backward(Value root) const {
    const Tensor& rt = value(root);
    if (!rt.is_scalar()) {
        throw ShapeError("backward: root must be scalar, got shape " + rt.shape_str());
    }
    std::vector<Tensor> adj(nodes_.size());
    adj[static_cast<size_t>(root.node)] = Tensor::ones(rt.shape());
    // registered parameters always come back with an adjoint, zero if unreached
    for (const Value& p : params_) {
        ensure_adjoint(adj[static_cast<size_t>(p.node)], nodes_[static_cast<size_t>(p.node)].value.shape());
    }

    for (int idx = root.node; idx >= 0; --idx) {
        const Node& nd = nodes_[static_cast<size_t>(idx)];
        Tensor& g = adj[static_cast<size_t>(idx)];
        if (g.numel() == 0) continue; // not on any path to the root

        auto parent_val = [&](int p) -> const Tensor& { return nodes_[static_cast<size_t>(p)].value; };
        auto parent_adj = [&](int p) -> Tensor& {
            ensure_adjoint(adj[static_cast<size_t>(p)], parent_val(p).shape());
            return adj[static_cast<size_t>(p)];
        };

        switch (nd.op) {
            case Op::kConstant:
                break;
            case Op::kAdd: {
                Tensor& da = parent_adj(nd.a);
                Tensor& db = parent_adj(nd.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da[i] += g[i];
                    db[i] += g[i];
                }
                break;
            }
            case Op::kSub: {
                Tensor& da = parent_adj(nd.a);
                Tensor& db = parent_adj(nd.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da[i] += g[i];
                    db[i] -= g[i];
                }
                break;
            }
            case Op::kMul: {
                const Tensor& va = parent_val(nd.a);
                const Tensor& vb = parent_val(nd.b);
                Tensor& da = parent_adj(nd.a);
                Tensor& db = parent_adj(nd.b);
                for (int64_t i = 0; i < g.numel(); ++i) {
                    da[i] += g[i] * vb[i];
                    db[i] += g[i] * va[i];
                }
                break;
            }
            case Op::kScale: {
                Tensor& da = parent_adj(nd.a);
                for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * nd.scalar;
                break;
            }
            case Op::kExp: {
                Tensor& da = parent_adj(nd.a);
                for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * nd.value[i];
                break;
            }
            case Op::kNegate: {
                Tensor& da = parent_adj(nd.a);
                for (int64_t i = 0; i < g.numel(); ++i) da[i] -= g[i];
                break;
            }
            case Op::kGelu: {
                const Tensor& va = parent_val(nd.a);
                Tensor& da = parent_adj(nd.a);
                for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * gelu_grad_scalar(va[i]);
                break;
            }
            case Op::kMatmul: {
                const Tensor& va = parent_val(nd.a);
                const Tensor& vb = parent_val(nd.b);
                Tensor& da = parent_adj(nd.a);
                Tensor& db = parent_adj(nd.b);
                // dA += G B^T ; dB += A^T G
                matmul_bt_acc(g.data(), vb.data(), da.data(), va.rows(), vb.cols(), va.cols());
                matmul_at_acc(va.data(), g.data(), db.data(), va.rows(), va.cols(), vb.cols());
                break;
            }
            case Op::kTranspose: {
                const Tensor& va = parent_val(nd.a);
                Tensor& da = parent_adj(nd.a);
                for (int64_t i = 0; i < va.rows(); ++i)
                    for (int64_t j = 0; j < va.cols(); ++j) da.at(i, j) += g.at(j, i);
                break;
            }
            case Op::kAddRowvec: {
                Tensor& dx = parent_adj(nd.a);
                Tensor& db = parent_adj(nd.b);
                for (int64_t i = 0; i < g.rows(); ++i)
                    for (int64_t j = 0; j < g.cols(); ++j) {
                        dx.at(i, j) += g.at(i, j);
                        db[j] += g.at(i, j);
                    }
                break;
            }
            case Op::kSubColvec: {
                Tensor& dx = parent_adj(nd.a);
                Tensor& dc = parent_adj(nd.b);
                for (int64_t i = 0; i < g.rows(); ++i)
                    for (int64_t j = 0; j < g.cols(); ++j) {
                        dx.at(i, j) += g.at(i, j);
                        dc[i] -= g.at(i, j);
                    }
                break;
            }
            case Op::kPairwiseSqdist: {
                const Tensor& vq = parent_val(nd.a);
                const Tensor& vk = parent_val(nd.b);
                Tensor& dq = parent_adj(nd.a);
                Tensor& dk = parent_adj(nd.b);
                const int64_t d = vq.cols();
                for (int64_t i = 0; i < vq.rows(); ++i) {
                    for (int64_t j = 0; j < vk.rows(); ++j) {
                        const double gij = g.at(i, j);
                        if (gij == 0.0) continue;
                        for (int64_t p = 0; p < d; ++p) {
                            const double diff = vq.at(i, p) - vk.at(j, p);
                            dq.at(i, p) += 2.0 * gij * diff;
                            dk.at(j, p) -= 2.0 * gij * diff;
                        }
                    }
                }
                break;
            }
            case Op::kSliceRows: {
                Tensor& dx = parent_adj(nd.a);
                for (int64_t i = 0; i < g.rows(); ++i)
                    for (int64_t j = 0; j < g.cols(); ++j) dx.at(nd.i0 + i, j) += g.at(i, j);
                break;
            }
            case Op::kSum: {
                Tensor& da = parent_adj(nd.a);
                for (int64_t i = 0; i < da.numel(); ++i) da[i] += g[0];
                break;
            }
            case Op::kMean: {
                Tensor& da = parent_adj(nd.a);
                const double inv = 1.0 / static_cast<double>(da.numel());
                for (int64_t i = 0; i < da.numel(); ++i) da[i] += g[0] * inv;
                break;
            }
            case Op::kSumAxis: {
                const Tensor& va = parent_val(nd.a);
                Tensor& da = parent_adj(nd.a);
                if (nd.i0 == 0) {
                    for (int64_t i = 0; i < va.rows(); ++i)
                        for (int64_t j = 0; j < va.cols(); ++j) da.at(i, j) += g[j];
                } else {
                    for (int64_t i = 0; i < va.rows(); ++i)
                        for (int64_t j = 0; j < va.cols(); ++j) da.at(i, j) += g[i];
                }
                break;
            }
            case Op::kLayerNorm: {
                const Tensor& xhat = nd.cache[0];
                const Tensor& inv_std = nd.cache[1];
                const Tensor& vg = parent_val(nd.b);
                Tensor& dx = parent_adj(nd.a);
                Tensor& dgain = parent_adj(nd.b);
                Tensor& dbias = parent_adj(nd.c);
                const int64_t rows = g.rows(), d = g.cols();
                for (int64_t i = 0; i < rows; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (int64_t j = 0; j < d; ++j) {
                        const double dxh = g.at(i, j) * vg[j];
                        m1 += dxh;
                        m2 += dxh * xhat.at(i, j);
                        dgain[j] += g.at(i, j) * xhat.at(i, j);
                        dbias[j] += g.at(i, j);
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    for (int64_t j = 0; j < d; ++j) {
                        const double dxh = g.at(i, j) * vg[j];
                        dx.at(i, j) += inv_std[i] * (dxh - m1 - xhat.at(i, j) * m2);
                    }
                }
                break;
            }
            case Op::kMaskedNormalize: {
                const Tensor& mask = nd.cache[0];
                const Tensor& row_sum = nd.cache[1];
                Tensor& ds = parent_adj(nd.a);
                for (int64_t i = 0; i < g.rows(); ++i) {
                    const double s = row_sum[i];
                    if (s == 0.0) continue; // uniform fallback rows carry no adjoint
                    double dot = 0.0;
                    for (int64_t j = 0; j < g.cols(); ++j)
                        if (mask.at(i, j) != 0.0) dot += g.at(i, j) * nd.value.at(i, j);
                    for (int64_t j = 0; j < g.cols(); ++j)
                        if (mask.at(i, j) != 0.0) ds.at(i, j) += (g.at(i, j) - dot) / s;
                }
                break;
            }
        }
    }
    return Gradients(this, std::move(adj));
}

} // namespace tdx
