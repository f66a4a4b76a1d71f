#include "molang/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace molang {

namespace {

void check_2d(const Tensor& t, const char* who) {
    if (t.rank() != 2) throw ShapeError(std::string(who) + " expects a 2-D tensor, got " + shape_str(t.shape()));
}

}  // namespace

Var Graph::input(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::emit(Tensor value, bool requires_grad, std::function<void()> back, const char* op_name) {
    if (checked_ && !value.all_finite())
        throw NumericError(std::string("non-finite value produced by op '") + op_name + "'");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Graph::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_alloc) {
        n.grad = Tensor::zeros(n.value.shape());
        n.grad_alloc = true;
    }
    return n.grad;
}

void Graph::backward(Var loss) {
    if (!loss.valid() || static_cast<std::size_t>(loss.id) >= nodes_.size())
        throw ContractError("backward: invalid loss var");
    if (node(loss).value.size() != 1) throw ContractError("backward: loss must be a scalar");
    grad_buf(loss.id)[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.requires_grad && n.grad_alloc && n.back) n.back();
    }
}

// ---------------------------------------------------------------------------
// binary / unary elementwise

Var Graph::add(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    Tensor out = av;
    if (av.same_shape(bv)) {
        for (long i = 0; i < out.size(); ++i) out[i] += bv[i];
    } else if (bv.size() == 1) {
        const double s = bv[0];
        for (long i = 0; i < out.size(); ++i) out[i] += s;
    } else if (av.rank() == 2 && bv.rank() == 1 && bv.dim(0) == av.dim(1)) {
        for (long i = 0; i < av.dim(0); ++i)
            for (long j = 0; j < av.dim(1); ++j) out.at(i, j) += bv[j];
    } else {
        throw ShapeError("add: incompatible shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
    }
    bool rg = requires_grad(a) || requires_grad(b);
    int aid = a.id, bid = b.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "add");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, bid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& av2 = g->nodes_[static_cast<std::size_t>(aid)].value;
            const Tensor& bv2 = g->nodes_[static_cast<std::size_t>(bid)].value;
            if (g->nodes_[static_cast<std::size_t>(aid)].requires_grad) {
                Tensor& ga = g->grad_buf(aid);
                for (long i = 0; i < ga.size(); ++i) ga[i] += go[i];
            }
            if (g->nodes_[static_cast<std::size_t>(bid)].requires_grad) {
                Tensor& gb = g->grad_buf(bid);
                if (bv2.same_shape(av2)) {
                    for (long i = 0; i < gb.size(); ++i) gb[i] += go[i];
                } else if (bv2.size() == 1) {
                    double s = 0.0;
                    for (long i = 0; i < go.size(); ++i) s += go[i];
                    gb[0] += s;
                } else {
                    for (long i = 0; i < av2.dim(0); ++i)
                        for (long j = 0; j < av2.dim(1); ++j) gb[j] += go.at(i, j);
                }
            }
        };
    }
    return res;
}

Var Graph::sub(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    Tensor out = av;
    if (av.same_shape(bv)) {
        for (long i = 0; i < out.size(); ++i) out[i] -= bv[i];
    } else if (bv.size() == 1) {
        const double s = bv[0];
        for (long i = 0; i < out.size(); ++i) out[i] -= s;
    } else {
        throw ShapeError("sub: incompatible shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
    }
    bool rg = requires_grad(a) || requires_grad(b);
    int aid = a.id, bid = b.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "sub");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, bid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            if (g->nodes_[static_cast<std::size_t>(aid)].requires_grad) {
                Tensor& ga = g->grad_buf(aid);
                for (long i = 0; i < ga.size(); ++i) ga[i] += go[i];
            }
            if (g->nodes_[static_cast<std::size_t>(bid)].requires_grad) {
                Tensor& gb = g->grad_buf(bid);
                if (gb.size() == go.size()) {
                    for (long i = 0; i < gb.size(); ++i) gb[i] -= go[i];
                } else {
                    double s = 0.0;
                    for (long i = 0; i < go.size(); ++i) s += go[i];
                    gb[0] -= s;
                }
            }
        };
    }
    return res;
}

Var Graph::mul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    Tensor out = av;
    if (av.same_shape(bv)) {
        for (long i = 0; i < out.size(); ++i) out[i] *= bv[i];
    } else if (bv.size() == 1) {
        const double s = bv[0];
        for (long i = 0; i < out.size(); ++i) out[i] *= s;
    } else if (av.rank() == 2 && bv.rank() == 1 && bv.dim(0) == av.dim(1)) {
        for (long i = 0; i < av.dim(0); ++i)
            for (long j = 0; j < av.dim(1); ++j) out.at(i, j) *= bv[j];
    } else {
        throw ShapeError("mul: incompatible shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
    }
    bool rg = requires_grad(a) || requires_grad(b);
    int aid = a.id, bid = b.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "mul");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, bid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& av2 = g->nodes_[static_cast<std::size_t>(aid)].value;
            const Tensor& bv2 = g->nodes_[static_cast<std::size_t>(bid)].value;
            if (g->nodes_[static_cast<std::size_t>(aid)].requires_grad) {
                Tensor& ga = g->grad_buf(aid);
                if (bv2.same_shape(av2)) {
                    for (long i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv2[i];
                } else if (bv2.size() == 1) {
                    for (long i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv2[0];
                } else {
                    for (long i = 0; i < av2.dim(0); ++i)
                        for (long j = 0; j < av2.dim(1); ++j) ga.at(i, j) += go.at(i, j) * bv2[j];
                }
            }
            if (g->nodes_[static_cast<std::size_t>(bid)].requires_grad) {
                Tensor& gb = g->grad_buf(bid);
                if (bv2.same_shape(av2)) {
                    for (long i = 0; i < gb.size(); ++i) gb[i] += go[i] * av2[i];
                } else if (bv2.size() == 1) {
                    double s = 0.0;
                    for (long i = 0; i < go.size(); ++i) s += go[i] * av2[i];
                    gb[0] += s;
                } else {
                    for (long i = 0; i < av2.dim(0); ++i)
                        for (long j = 0; j < av2.dim(1); ++j) gb[j] += go.at(i, j) * av2.at(i, j);
                }
            }
        };
    }
    return res;
}

Var Graph::scale(Var a, double s) {
    Tensor out = value(a);
    for (long i = 0; i < out.size(); ++i) out[i] *= s;
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "scale");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid, s]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) ga[i] += s * go[i];
        };
    }
    return res;
}

Var Graph::relu(Var a) {
    Tensor out = value(a);
    for (long i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "relu");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& av = g->nodes_[static_cast<std::size_t>(aid)].value;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) ga[i] += av[i] > 0.0 ? go[i] : 0.0;
        };
    }
    return res;
}

Var Graph::gelu(Var a) {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    Tensor out = value(a);
    for (long i = 0; i < out.size(); ++i) {
        const double x = out[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "gelu");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& av = g->nodes_[static_cast<std::size_t>(aid)].value;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) {
                const double x = av[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                ga[i] += go[i] * (cdf + x * pdf);
            }
        };
    }
    return res;
}

Var Graph::square(Var a) {
    Tensor out = value(a);
    for (long i = 0; i < out.size(); ++i) out[i] *= out[i];
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "square");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& av = g->nodes_[static_cast<std::size_t>(aid)].value;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) ga[i] += 2.0 * av[i] * go[i];
        };
    }
    return res;
}

Var Graph::smooth_l1(Var diff) {
    const Tensor& dv = value(diff);
    Tensor out = dv;
    for (long i = 0; i < out.size(); ++i) {
        const double d = dv[i];
        const double ad = std::fabs(d);
        out[i] = ad < 1.0 ? 0.5 * d * d : ad - 0.5;
    }
    bool rg = requires_grad(diff);
    int aid = diff.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "smooth_l1");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& av = g->nodes_[static_cast<std::size_t>(aid)].value;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) {
                const double d = av[i];
                const double slope = std::fabs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
                ga[i] += go[i] * slope;
            }
        };
    }
    return res;
}

Var Graph::sum(Var a) {
    const Tensor& av = value(a);
    double s = 0.0;
    for (long i = 0; i < av.size(); ++i) s += av[i];
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(Tensor::scalar(s), rg, nullptr, "sum");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid]() {
            const double go = g->nodes_[static_cast<std::size_t>(rid)].grad[0];
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) ga[i] += go;
        };
    }
    return res;
}

Var Graph::mean(Var a) {
    const long n = value(a).size();
    if (n == 0) throw ContractError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// structure ops

Var Graph::reshape(Var a, std::vector<long> shape) {
    Tensor out = value(a).reshaped(shape);
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "reshape");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) ga[i] += go[i];
        };
    }
    return res;
}

Var Graph::transpose(Var a) {
    const Tensor& av = value(a);
    check_2d(av, "transpose");
    const long m = av.dim(0), n = av.dim(1);
    Tensor out({n, m});
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "transpose");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid, m, n]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < m; ++i)
                for (long j = 0; j < n; ++j) ga.at(i, j) += go.at(j, i);
        };
    }
    return res;
}

Var Graph::slice_rows(Var a, long start, long len) {
    const Tensor& av = value(a);
    check_2d(av, "slice_rows");
    if (start < 0 || len < 0 || start + len > av.dim(0)) throw ShapeError("slice_rows out of range");
    const long n = av.dim(1);
    Tensor out({len, n});
    for (long i = 0; i < len; ++i)
        for (long j = 0; j < n; ++j) out.at(i, j) = av.at(start + i, j);
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "slice_rows");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid, start, len, n]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < len; ++i)
                for (long j = 0; j < n; ++j) ga.at(start + i, j) += go.at(i, j);
        };
    }
    return res;
}

Var Graph::slice_cols(Var a, long start, long len) {
    const Tensor& av = value(a);
    check_2d(av, "slice_cols");
    if (start < 0 || len < 0 || start + len > av.dim(1)) throw ShapeError("slice_cols out of range");
    const long m = av.dim(0);
    Tensor out({m, len});
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < len; ++j) out.at(i, j) = av.at(i, start + j);
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "slice_cols");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid, start, len, m]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < m; ++i)
                for (long j = 0; j < len; ++j) ga.at(i, start + j) += go.at(i, j);
        };
    }
    return res;
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const long m = value(parts[0]).dim(0);
    long total = 0;
    bool rg = false;
    for (Var p : parts) {
        const Tensor& pv = value(p);
        check_2d(pv, "concat_cols");
        if (pv.dim(0) != m) throw ShapeError("concat_cols: row count mismatch");
        total += pv.dim(1);
        rg = rg || requires_grad(p);
    }
    Tensor out({m, total});
    long col = 0;
    for (Var p : parts) {
        const Tensor& pv = value(p);
        for (long i = 0; i < m; ++i)
            for (long j = 0; j < pv.dim(1); ++j) out.at(i, col + j) = pv.at(i, j);
        col += pv.dim(1);
    }
    Graph* g = this;
    std::vector<int> ids;
    ids.reserve(parts.size());
    for (Var p : parts) ids.push_back(p.id);
    Var res = emit(std::move(out), rg, nullptr, "concat_cols");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, ids, rid, m]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            long col2 = 0;
            for (int pid : ids) {
                const long w = g->nodes_[static_cast<std::size_t>(pid)].value.dim(1);
                if (g->nodes_[static_cast<std::size_t>(pid)].requires_grad) {
                    Tensor& gp = g->grad_buf(pid);
                    for (long i = 0; i < m; ++i)
                        for (long j = 0; j < w; ++j) gp.at(i, j) += go.at(i, col2 + j);
                }
                col2 += w;
            }
        };
    }
    return res;
}

// ---------------------------------------------------------------------------
// linear algebra

Var Graph::matmul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    check_2d(av, "matmul");
    check_2d(bv, "matmul");
    if (av.dim(1) != bv.dim(0))
        throw ShapeError("matmul: inner dims differ, " + shape_str(av.shape()) + " @ " + shape_str(bv.shape()));
    const long m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    kernels::matmul(av.data(), bv.data(), out.data(), m, k, n);
    bool rg = requires_grad(a) || requires_grad(b);
    int aid = a.id, bid = b.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "matmul");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, bid, rid, m, k, n]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& av2 = g->nodes_[static_cast<std::size_t>(aid)].value;
            const Tensor& bv2 = g->nodes_[static_cast<std::size_t>(bid)].value;
            if (g->nodes_[static_cast<std::size_t>(aid)].requires_grad) {
                // dA += dC @ B^T
                kernels::matmul_a_bt_acc(go.data(), bv2.data(), g->grad_buf(aid).data(), m, n, k);
            }
            if (g->nodes_[static_cast<std::size_t>(bid)].requires_grad) {
                // dB += A^T @ dC
                kernels::matmul_at_b_acc(av2.data(), go.data(), g->grad_buf(bid).data(), m, k, n);
            }
        };
    }
    return res;
}

Var Graph::conv1d(Var x, Var w, Var bias, int stride, int pad) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(bias);
    check_2d(xv, "conv1d input");
    if (wv.rank() != 3) throw ShapeError("conv1d weight must be [Cout,Cin,k]");
    if (stride < 1) throw ContractError("conv1d: stride must be >= 1");
    const long cin = xv.dim(0), t = xv.dim(1);
    const long cout = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != cin) throw ShapeError("conv1d: channel mismatch");
    if (bv.size() != cout) throw ShapeError("conv1d: bias size mismatch");
    const long tp = t + 2 * pad;
    if (tp < k) throw ShapeError("conv1d: input shorter than kernel");
    const long tout = (tp - k) / stride + 1;

    // im2col: col[(c*k + kk), j] = xpad[c, j*stride + kk]
    Tensor col({cin * k, tout});
    for (long c = 0; c < cin; ++c) {
        for (long kk = 0; kk < k; ++kk) {
            double* row = col.data() + (c * k + kk) * tout;
            for (long j = 0; j < tout; ++j) {
                const long src = j * stride + kk - pad;
                row[j] = (src >= 0 && src < t) ? xv.at(c, src) : 0.0;
            }
        }
    }
    Tensor out({cout, tout});
    kernels::matmul(wv.data(), col.data(), out.data(), cout, cin * k, tout);
    for (long co = 0; co < cout; ++co) {
        double* row = out.data() + co * tout;
        const double bvv = bv[co];
        for (long j = 0; j < tout; ++j) row[j] += bvv;
    }
    bool rg = requires_grad(x) || requires_grad(w) || requires_grad(bias);
    int xid = x.id, wid = w.id, bid = bias.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "conv1d");
    if (rg) {
        int rid = res.id;
        auto col_keep = std::make_shared<Tensor>(std::move(col));
        nodes_.back().back = [g, xid, wid, bid, rid, stride, pad, cin, cout, t, k, tout, col_keep]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& wv2 = g->nodes_[static_cast<std::size_t>(wid)].value;
            if (g->nodes_[static_cast<std::size_t>(bid)].requires_grad) {
                Tensor& gb = g->grad_buf(bid);
                for (long co = 0; co < cout; ++co) {
                    double s = 0.0;
                    for (long j = 0; j < tout; ++j) s += go.at(co, j);
                    gb[co] += s;
                }
            }
            if (g->nodes_[static_cast<std::size_t>(wid)].requires_grad) {
                // dW += dY @ col^T, viewed as [cout, cin*k]
                kernels::matmul_a_bt_acc(go.data(), col_keep->data(), g->grad_buf(wid).data(), cout, tout, cin * k);
            }
            if (g->nodes_[static_cast<std::size_t>(xid)].requires_grad) {
                // dcol = W^T @ dY, then col2im scatter
                Tensor dcol({cin * k, tout});
                kernels::matmul_at_b_acc(wv2.data(), go.data(), dcol.data(), cout, cin * k, tout);
                Tensor& gx = g->grad_buf(xid);
                for (long c = 0; c < cin; ++c) {
                    for (long kk = 0; kk < k; ++kk) {
                        const double* row = dcol.data() + (c * k + kk) * tout;
                        for (long j = 0; j < tout; ++j) {
                            const long src = j * stride + kk - pad;
                            if (src >= 0 && src < t) gx.at(c, src) += row[j];
                        }
                    }
                }
            }
        };
    }
    return res;
}

Var Graph::upsample_nn(Var x, int factor) {
    const Tensor& xv = value(x);
    check_2d(xv, "upsample_nn");
    if (factor < 1) throw ContractError("upsample_nn: factor must be >= 1");
    const long c = xv.dim(0), t = xv.dim(1);
    Tensor out({c, t * factor});
    for (long i = 0; i < c; ++i)
        for (long j = 0; j < t * factor; ++j) out.at(i, j) = xv.at(i, j / factor);
    bool rg = requires_grad(x);
    int xid = x.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "upsample_nn");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, xid, rid, c, t, factor]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& gx = g->grad_buf(xid);
            for (long i = 0; i < c; ++i)
                for (long j = 0; j < t * factor; ++j) gx.at(i, j / factor) += go.at(i, j);
        };
    }
    return res;
}

Var Graph::embedding(Var table, std::vector<long> ids) {
    const Tensor& tv = value(table);
    check_2d(tv, "embedding table");
    const long v = tv.dim(0), d = tv.dim(1);
    for (long id : ids)
        if (id < 0 || id >= v) throw RangeError("embedding: id " + std::to_string(id) + " out of range [0, " + std::to_string(v) + ")");
    const long l = static_cast<long>(ids.size());
    Tensor out({l, d});
    for (long i = 0; i < l; ++i)
        for (long j = 0; j < d; ++j) out.at(i, j) = tv.at(ids[static_cast<std::size_t>(i)], j);
    bool rg = requires_grad(table);
    int tid = table.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "embedding");
    if (rg) {
        int rid = res.id;
        auto ids_keep = std::make_shared<std::vector<long>>(std::move(ids));
        nodes_.back().back = [g, tid, rid, d, ids_keep]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& gt = g->grad_buf(tid);
            const long l2 = static_cast<long>(ids_keep->size());
            for (long i = 0; i < l2; ++i) {
                const long row = (*ids_keep)[static_cast<std::size_t>(i)];
                for (long j = 0; j < d; ++j) gt.at(row, j) += go.at(i, j);
            }
        };
    }
    return res;
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Tensor& xv = value(x);
    const Tensor& gv = value(gamma);
    const Tensor& bv = value(beta);
    if (xv.rank() < 1) throw ShapeError("layer_norm: rank >= 1 required");
    const long n = xv.dim(xv.rank() - 1);
    if (gv.size() != n || bv.size() != n) throw ShapeError("layer_norm: scale/bias size mismatch");
    const long rows = xv.size() / n;
    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    Tensor inv_std({rows});
    for (long r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * n;
        double mu = 0.0;
        for (long j = 0; j < n; ++j) mu += xr[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (long j = 0; j < n; ++j) {
            const double d = xr[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        double* hr = xhat.data() + r * n;
        double* orow = out.data() + r * n;
        for (long j = 0; j < n; ++j) {
            hr[j] = (xr[j] - mu) * is;
            orow[j] = gv[j] * hr[j] + bv[j];
        }
    }
    bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
    int xid = x.id, gid = gamma.id, bid = beta.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "layer_norm");
    if (rg) {
        int rid = res.id;
        auto xhat_keep = std::make_shared<Tensor>(std::move(xhat));
        auto istd_keep = std::make_shared<Tensor>(std::move(inv_std));
        nodes_.back().back = [g, xid, gid, bid, rid, n, rows, xhat_keep, istd_keep]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& gv2 = g->nodes_[static_cast<std::size_t>(gid)].value;
            const bool need_x = g->nodes_[static_cast<std::size_t>(xid)].requires_grad;
            const bool need_g = g->nodes_[static_cast<std::size_t>(gid)].requires_grad;
            const bool need_b = g->nodes_[static_cast<std::size_t>(bid)].requires_grad;
            for (long r = 0; r < rows; ++r) {
                const double* dyr = go.data() + r * n;
                const double* hr = xhat_keep->data() + r * n;
                const double is = (*istd_keep)[r];
                if (need_g) {
                    Tensor& gg = g->grad_buf(gid);
                    for (long j = 0; j < n; ++j) gg[j] += dyr[j] * hr[j];
                }
                if (need_b) {
                    Tensor& gb = g->grad_buf(bid);
                    for (long j = 0; j < n; ++j) gb[j] += dyr[j];
                }
                if (need_x) {
                    Tensor& gx = g->grad_buf(xid);
                    double* gxr = gx.data() + r * n;
                    // dxhat = dy * gamma; dx = is/n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
                    double s1 = 0.0, s2 = 0.0;
                    for (long j = 0; j < n; ++j) {
                        const double dh = dyr[j] * gv2[j];
                        s1 += dh;
                        s2 += dh * hr[j];
                    }
                    const double invn = 1.0 / static_cast<double>(n);
                    for (long j = 0; j < n; ++j) {
                        const double dh = dyr[j] * gv2[j];
                        gxr[j] += is * (dh - invn * s1 - hr[j] * invn * s2);
                    }
                }
            }
        };
    }
    return res;
}

Var Graph::softmax(Var x) {
    const Tensor& xv = value(x);
    if (xv.rank() < 1) throw ShapeError("softmax: rank >= 1 required");
    const long n = xv.dim(xv.rank() - 1);
    const long rows = xv.size() / n;
    Tensor out(xv.shape());
    for (long r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * n;
        double* orow = out.data() + r * n;
        double mx = xr[0];
        for (long j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
        double denom = 0.0;
        for (long j = 0; j < n; ++j) {
            orow[j] = std::exp(xr[j] - mx);
            denom += orow[j];
        }
        const double inv = 1.0 / denom;
        for (long j = 0; j < n; ++j) orow[j] *= inv;
    }
    bool rg = requires_grad(x);
    int xid = x.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "softmax");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, xid, rid, n, rows]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            const Tensor& yv = g->nodes_[static_cast<std::size_t>(rid)].value;
            Tensor& gx = g->grad_buf(xid);
            for (long r = 0; r < rows; ++r) {
                const double* yr = yv.data() + r * n;
                const double* dyr = go.data() + r * n;
                double dot = 0.0;
                for (long j = 0; j < n; ++j) dot += yr[j] * dyr[j];
                double* gxr = gx.data() + r * n;
                for (long j = 0; j < n; ++j) gxr[j] += yr[j] * (dyr[j] - dot);
            }
        };
    }
    return res;
}

Var Graph::cross_entropy_sum(Var logits, std::vector<long> targets, long ignore_id) {
    const Tensor& lv = value(logits);
    check_2d(lv, "cross_entropy_sum");
    const long rows = lv.dim(0), v = lv.dim(1);
    if (static_cast<long>(targets.size()) != rows) throw ShapeError("cross_entropy_sum: target count mismatch");
    for (long t : targets)
        if (t != ignore_id && (t < 0 || t >= v))
            throw RangeError("cross_entropy_sum: target id " + std::to_string(t) + " out of range");
    auto probs = std::make_shared<Tensor>(lv.shape());
    double total = 0.0;
    for (long r = 0; r < rows; ++r) {
        const double* xr = lv.data() + r * v;
        double* pr = probs->data() + r * v;
        double mx = xr[0];
        for (long j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
        double denom = 0.0;
        for (long j = 0; j < v; ++j) {
            pr[j] = std::exp(xr[j] - mx);
            denom += pr[j];
        }
        const double inv = 1.0 / denom;
        for (long j = 0; j < v; ++j) pr[j] *= inv;
        const long t = targets[static_cast<std::size_t>(r)];
        if (t != ignore_id) total += -(xr[t] - mx - std::log(denom));
    }
    bool rg = requires_grad(logits);
    int lid = logits.id;
    Graph* g = this;
    Var res = emit(Tensor::scalar(total), rg, nullptr, "cross_entropy_sum");
    if (rg) {
        int rid = res.id;
        auto tgt_keep = std::make_shared<std::vector<long>>(std::move(targets));
        nodes_.back().back = [g, lid, rid, rows, v, ignore_id, probs, tgt_keep]() {
            const double go = g->nodes_[static_cast<std::size_t>(rid)].grad[0];
            Tensor& gl = g->grad_buf(lid);
            for (long r = 0; r < rows; ++r) {
                const long t = (*tgt_keep)[static_cast<std::size_t>(r)];
                if (t == ignore_id) continue;
                const double* pr = probs->data() + r * v;
                double* gr = gl.data() + r * v;
                for (long j = 0; j < v; ++j) gr[j] += go * pr[j];
                gr[t] -= go;
            }
        };
    }
    return res;
}

Var Graph::ste(Var latents, const Tensor& quantized) {
    const Tensor& lv = value(latents);
    if (!lv.same_shape(quantized)) throw ShapeError("ste: quantized shape mismatch");
    bool rg = requires_grad(latents);
    int lid = latents.id;
    Graph* g = this;
    Var res = emit(quantized, rg, nullptr, "ste");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, lid, rid]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& gl = g->grad_buf(lid);
            for (long i = 0; i < gl.size(); ++i) gl[i] += go[i];
        };
    }
    return res;
}

Var Graph::dropout(Var a, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must be in [0,1)");
    if (p == 0.0) return a;
    const Tensor& av = value(a);
    auto mask = std::make_shared<std::vector<double>>(static_cast<std::size_t>(av.size()));
    const double keep_scale = 1.0 / (1.0 - p);
    Tensor out = av;
    for (long i = 0; i < av.size(); ++i) {
        const double m = rng.next_double() < p ? 0.0 : keep_scale;
        (*mask)[static_cast<std::size_t>(i)] = m;
        out[i] *= m;
    }
    bool rg = requires_grad(a);
    int aid = a.id;
    Graph* g = this;
    Var res = emit(std::move(out), rg, nullptr, "dropout");
    if (rg) {
        int rid = res.id;
        nodes_.back().back = [g, aid, rid, mask]() {
            const Tensor& go = g->nodes_[static_cast<std::size_t>(rid)].grad;
            Tensor& ga = g->grad_buf(aid);
            for (long i = 0; i < ga.size(); ++i) ga[i] += go[i] * (*mask)[static_cast<std::size_t>(i)];
        };
    }
    return res;
}

Var sdpa(Graph& g, Var q, Var k, Var v, Var bias) {
    const long dk = g.value(q).dim(1);
    Var scores = g.scale(g.matmul(q, g.transpose(k)), 1.0 / std::sqrt(static_cast<double>(dk)));
    if (bias.valid()) scores = g.add(scores, bias);
    return g.matmul(g.softmax(scores), v);
}

double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& build, const std::vector<Tensor>& params,
                  double eps, long max_coords, std::uint64_t seed) {
    // analytic gradients
    std::vector<Tensor> analytic;
    {
        Graph g;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (const Tensor& p : params) vars.push_back(g.param(p));
        Var loss = build(g, vars);
        if (g.value(loss).size() != 1) throw ContractError("grad_check: loss must be scalar");
        g.backward(loss);
        for (Var v : vars) analytic.push_back(g.grad(v));
    }

    auto eval = [&](const std::vector<Tensor>& pts) {
        Graph g;
        std::vector<Var> vars;
        vars.reserve(pts.size());
        for (const Tensor& p : pts) vars.push_back(g.constant(p));
        return g.value(build(g, vars)).item();
    };

    double max_rel = 0.0;
    std::vector<Tensor> work = params;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const long n = params[pi].size();
        std::vector<long> coords;
        if (n <= max_coords) {
            for (long i = 0; i < n; ++i) coords.push_back(i);
        } else {
            Rng rng(hash_combine(seed, pi));
            for (long i = 0; i < max_coords; ++i) coords.push_back(static_cast<long>(rng.next_below(static_cast<std::uint64_t>(n))));
        }
        for (long c : coords) {
            const double orig = work[pi][c];
            work[pi][c] = orig + eps;
            const double fp = eval(work);
            work[pi][c] = orig - eps;
            const double fm = eval(work);
            work[pi][c] = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double an = analytic[pi][c];
            const double rel = std::fabs(an - fd) / std::max({1e-6, std::fabs(an), std::fabs(fd)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace molang
