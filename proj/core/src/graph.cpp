#include "beliefbench/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace beliefbench::num {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
}

void softmax_row(const double* in, double* out, int n) {
    double mx = in[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
}

}  // namespace

Graph::Id Graph::emit(Mat val, bool needs_grad, std::function<void(Graph&)> back) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    n.back = needs_grad ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Mat& Graph::grad_buf(Id id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Mat::zeros(n.val.rows(), n.val.cols());
    return n.grad;
}

Graph::Id Graph::leaf(const Mat& value) { return emit(value, true, nullptr); }

Graph::Id Graph::constant(Mat value) { return emit(std::move(value), false, nullptr); }

Graph::Id Graph::add(Id a, Id b) {
    check_same_shape(value(a), value(b), "add");
    Mat out = value(a);
    out.add_inplace(value(b));
    Id id = emit(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        if (g.needs_grad(a)) g.grad_buf(a).add_inplace(go);
        if (g.needs_grad(b)) g.grad_buf(b).add_inplace(go);
    };
    return id;
}

Graph::Id Graph::sub(Id a, Id b) {
    check_same_shape(value(a), value(b), "sub");
    Mat out = value(a);
    out.add_scaled_inplace(value(b), -1.0);
    Id id = emit(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        if (g.needs_grad(a)) g.grad_buf(a).add_inplace(go);
        if (g.needs_grad(b)) g.grad_buf(b).add_scaled_inplace(go, -1.0);
    };
    return id;
}

Graph::Id Graph::mul(Id a, Id b) {
    check_same_shape(value(a), value(b), "mul");
    Mat out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= value(b)[i];
    Id id = emit(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        if (g.needs_grad(a)) {
            Mat& ga = g.grad_buf(a);
            const Mat& vb = g.value(b);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * vb[i];
        }
        if (g.needs_grad(b)) {
            Mat& gb = g.grad_buf(b);
            const Mat& va = g.value(a);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * va[i];
        }
    };
    return id;
}

Graph::Id Graph::scale(Id a, double c) {
    Mat out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    Id id = emit(std::move(out), needs_grad(a), nullptr);
    nodes_[id].back = [a, c, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        if (g.needs_grad(a)) g.grad_buf(a).add_scaled_inplace(go, c);
    };
    return id;
}

Graph::Id Graph::scalar_mul(Id s, Id a) {
    if (value(s).size() != 1) throw std::invalid_argument("scalar_mul: s must be 1x1");
    double sv = value(s).item();
    Mat out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= sv;
    Id id = emit(std::move(out), needs_grad(a) || needs_grad(s), nullptr);
    nodes_[id].back = [s, a, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        double sv2 = g.value(s).item();
        if (g.needs_grad(a)) g.grad_buf(a).add_scaled_inplace(go, sv2);
        if (g.needs_grad(s)) {
            double dot = 0.0;
            const Mat& va = g.value(a);
            for (std::size_t i = 0; i < va.size(); ++i) dot += go[i] * va[i];
            g.grad_buf(s)[0] += dot;
        }
    };
    return id;
}

Graph::Id Graph::add_rowvec(Id a, Id bias) {
    const Mat& va = value(a);
    const Mat& vb = value(bias);
    if (vb.rows() != 1 || vb.cols() != va.cols()) throw std::invalid_argument("add_rowvec: bias must be 1xC");
    Mat out = va;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out.at(r, c) += vb.at(0, c);
    Id id = emit(std::move(out), needs_grad(a) || needs_grad(bias), nullptr);
    nodes_[id].back = [a, bias, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        if (g.needs_grad(a)) g.grad_buf(a).add_inplace(go);
        if (g.needs_grad(bias)) {
            Mat& gb = g.grad_buf(bias);
            for (int r = 0; r < go.rows(); ++r)
                for (int c = 0; c < go.cols(); ++c) gb.at(0, c) += go.at(r, c);
        }
    };
    return id;
}

Graph::Id Graph::matmul(Id a, Id b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols() != vb.rows())
        throw std::invalid_argument("matmul: inner dims differ (" + std::to_string(va.cols()) + " vs " +
                                    std::to_string(vb.rows()) + ")");
    Mat out(va.rows(), vb.cols());
    for (int i = 0; i < va.rows(); ++i)
        for (int k = 0; k < va.cols(); ++k) {
            double aik = va.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < vb.cols(); ++j) out.at(i, j) += aik * vb.at(k, j);
        }
    Id id = emit(std::move(out), needs_grad(a) || needs_grad(b), nullptr);
    nodes_[id].back = [a, b, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        const Mat& va2 = g.value(a);
        const Mat& vb2 = g.value(b);
        if (g.needs_grad(a)) {
            Mat& ga = g.grad_buf(a);  // go * b^T
            for (int i = 0; i < ga.rows(); ++i)
                for (int j = 0; j < go.cols(); ++j) {
                    double gij = go.at(i, j);
                    if (gij == 0.0) continue;
                    for (int k = 0; k < ga.cols(); ++k) ga.at(i, k) += gij * vb2.at(k, j);
                }
        }
        if (g.needs_grad(b)) {
            Mat& gb = g.grad_buf(b);  // a^T * go
            for (int i = 0; i < va2.rows(); ++i)
                for (int k = 0; k < va2.cols(); ++k) {
                    double aik = va2.at(i, k);
                    if (aik == 0.0) continue;
                    for (int j = 0; j < go.cols(); ++j) gb.at(k, j) += aik * go.at(i, j);
                }
        }
    };
    return id;
}

Graph::Id Graph::transpose(Id a) {
    const Mat& va = value(a);
    Mat out(va.cols(), va.rows());
    for (int i = 0; i < va.rows(); ++i)
        for (int j = 0; j < va.cols(); ++j) out.at(j, i) = va.at(i, j);
    Id id = emit(std::move(out), needs_grad(a), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(a)) return;
        Mat& ga = g.grad_buf(a);
        for (int i = 0; i < go.rows(); ++i)
            for (int j = 0; j < go.cols(); ++j) ga.at(j, i) += go.at(i, j);
    };
    return id;
}

Graph::Id Graph::relu(Id a) {
    Mat out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    Id id = emit(std::move(out), needs_grad(a), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(a)) return;
        Mat& ga = g.grad_buf(a);
        const Mat& va = g.value(a);
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (va[i] > 0.0) ga[i] += go[i];
    };
    return id;
}

Graph::Id Graph::sigmoid(Id a) {
    Mat out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    Id id = emit(std::move(out), needs_grad(a), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(a)) return;
        Mat& ga = g.grad_buf(a);
        const Mat& y = g.value(id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
    };
    return id;
}

Graph::Id Graph::tanh_(Id a) {
    Mat out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    Id id = emit(std::move(out), needs_grad(a), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(a)) return;
        Mat& ga = g.grad_buf(a);
        const Mat& y = g.value(id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
    };
    return id;
}

Graph::Id Graph::softmax_rows(Id a) {
    const Mat& va = value(a);
    Mat out(va.rows(), va.cols());
    for (int r = 0; r < va.rows(); ++r) softmax_row(va.data() + static_cast<std::size_t>(r) * va.cols(),
                                                   out.data() + static_cast<std::size_t>(r) * out.cols(), va.cols());
    Id id = emit(std::move(out), needs_grad(a), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(a)) return;
        Mat& ga = g.grad_buf(a);
        const Mat& y = g.value(id);
        for (int r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (int c = 0; c < y.cols(); ++c) dot += go.at(r, c) * y.at(r, c);
            for (int c = 0; c < y.cols(); ++c) ga.at(r, c) += y.at(r, c) * (go.at(r, c) - dot);
        }
    };
    return id;
}

Graph::Id Graph::layer_norm(Id a, Id gain, Id bias, double eps) {
    const Mat& va = value(a);
    const Mat& vg = value(gain);
    const Mat& vb = value(bias);
    if (vg.rows() != 1 || vg.cols() != va.cols() || vb.rows() != 1 || vb.cols() != va.cols())
        throw std::invalid_argument("layer_norm: gain/bias must be 1xC");
    const int C = va.cols();
    Mat out(va.rows(), C);
    for (int r = 0; r < va.rows(); ++r) {
        double mu = 0.0;
        for (int c = 0; c < C; ++c) mu += va.at(r, c);
        mu /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            double d = va.at(r, c) - mu;
            var += d * d;
        }
        var /= C;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < C; ++c) out.at(r, c) = (va.at(r, c) - mu) * inv * vg.at(0, c) + vb.at(0, c);
    }
    Id id = emit(std::move(out), needs_grad(a) || needs_grad(gain) || needs_grad(bias), nullptr);
    nodes_[id].back = [a, gain, bias, eps, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        const Mat& va2 = g.value(a);
        const Mat& vg2 = g.value(gain);
        const int C = va2.cols();
        for (int r = 0; r < va2.rows(); ++r) {
            double mu = 0.0;
            for (int c = 0; c < C; ++c) mu += va2.at(r, c);
            mu /= C;
            double var = 0.0;
            for (int c = 0; c < C; ++c) {
                double d = va2.at(r, c) - mu;
                var += d * d;
            }
            var /= C;
            double inv = 1.0 / std::sqrt(var + eps);
            if (g.needs_grad(gain) || g.needs_grad(bias)) {
                for (int c = 0; c < C; ++c) {
                    double xhat = (va2.at(r, c) - mu) * inv;
                    if (g.needs_grad(gain)) g.grad_buf(gain).at(0, c) += go.at(r, c) * xhat;
                    if (g.needs_grad(bias)) g.grad_buf(bias).at(0, c) += go.at(r, c);
                }
            }
            if (g.needs_grad(a)) {
                // dL/dxhat_c = go_c * gain_c; standard layernorm backward
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int c = 0; c < C; ++c) {
                    double xhat = (va2.at(r, c) - mu) * inv;
                    double dxhat = go.at(r, c) * vg2.at(0, c);
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                Mat& ga = g.grad_buf(a);
                for (int c = 0; c < C; ++c) {
                    double xhat = (va2.at(r, c) - mu) * inv;
                    double dxhat = go.at(r, c) * vg2.at(0, c);
                    ga.at(r, c) += inv * (dxhat - sum_dxhat / C - xhat * sum_dxhat_xhat / C);
                }
            }
        }
    };
    return id;
}

Graph::Id Graph::concat_rows(const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    int cols = value(parts[0]).cols();
    int rows = 0;
    bool ng = false;
    for (Id p : parts) {
        if (value(p).cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        rows += value(p).rows();
        ng = ng || needs_grad(p);
    }
    Mat out(rows, cols);
    int r0 = 0;
    for (Id p : parts) {
        const Mat& vp = value(p);
        for (int r = 0; r < vp.rows(); ++r)
            for (int c = 0; c < cols; ++c) out.at(r0 + r, c) = vp.at(r, c);
        r0 += vp.rows();
    }
    Id id = emit(std::move(out), ng, nullptr);
    std::vector<Id> ps = parts;
    nodes_[id].back = [ps, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty()) return;
        int r0 = 0;
        for (Id p : ps) {
            int pr = g.value(p).rows();
            if (g.needs_grad(p)) {
                Mat& gp = g.grad_buf(p);
                for (int r = 0; r < pr; ++r)
                    for (int c = 0; c < go.cols(); ++c) gp.at(r, c) += go.at(r0 + r, c);
            }
            r0 += pr;
        }
    };
    return id;
}

Graph::Id Graph::slice_rows(Id a, int begin, int count) {
    const Mat& va = value(a);
    if (begin < 0 || count < 0 || begin + count > va.rows()) throw std::out_of_range("slice_rows: bad range");
    Mat out(count, va.cols());
    for (int r = 0; r < count; ++r)
        for (int c = 0; c < va.cols(); ++c) out.at(r, c) = va.at(begin + r, c);
    Id id = emit(std::move(out), needs_grad(a), nullptr);
    nodes_[id].back = [a, begin, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(a)) return;
        Mat& ga = g.grad_buf(a);
        for (int r = 0; r < go.rows(); ++r)
            for (int c = 0; c < go.cols(); ++c) ga.at(begin + r, c) += go.at(r, c);
    };
    return id;
}

Graph::Id Graph::gather_rows(Id table, std::vector<int> idx) {
    const Mat& vt = value(table);
    Mat out(static_cast<int>(idx.size()), vt.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= vt.rows()) throw std::out_of_range("gather_rows: index out of range");
        for (int c = 0; c < vt.cols(); ++c) out.at(static_cast<int>(r), c) = vt.at(idx[r], c);
    }
    Id id = emit(std::move(out), needs_grad(table), nullptr);
    nodes_[id].back = [table, idx = std::move(idx), id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(table)) return;
        Mat& gt = g.grad_buf(table);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (int c = 0; c < go.cols(); ++c) gt.at(idx[r], c) += go.at(static_cast<int>(r), c);
    };
    return id;
}

Graph::Id Graph::sum_all(Id a) {
    double s = 0.0;
    const Mat& va = value(a);
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i];
    Id id = emit(Mat::scalar(s), needs_grad(a), nullptr);
    nodes_[id].back = [a, id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(a)) return;
        Mat& ga = g.grad_buf(a);
        double gv = go[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
    };
    return id;
}

Graph::Id Graph::mean_all(Id a) {
    const Mat& va = value(a);
    if (va.size() == 0) throw std::invalid_argument("mean_all: empty");
    return scale(sum_all(a), 1.0 / static_cast<double>(va.size()));
}

Graph::Id Graph::cross_entropy_logits(Id logits, std::vector<int> targets) {
    const Mat& vl = value(logits);
    if (static_cast<int>(targets.size()) != vl.rows())
        throw std::invalid_argument("cross_entropy_logits: one target per row required");
    const int V = vl.cols();
    Mat probs(vl.rows(), V);
    double loss = 0.0;
    for (int r = 0; r < vl.rows(); ++r) {
        softmax_row(vl.data() + static_cast<std::size_t>(r) * V, probs.data() + static_cast<std::size_t>(r) * V, V);
        if (targets[r] < 0 || targets[r] >= V) throw std::out_of_range("cross_entropy_logits: target out of range");
        loss += -std::log(std::max(probs.at(r, targets[r]), 1e-300));
    }
    loss /= vl.rows();
    Id id = emit(Mat::scalar(loss), needs_grad(logits), nullptr);
    nodes_[id].back = [logits, targets = std::move(targets), probs = std::move(probs), id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(logits)) return;
        Mat& gl = g.grad_buf(logits);
        double gv = go[0] / probs.rows();
        for (int r = 0; r < probs.rows(); ++r)
            for (int c = 0; c < probs.cols(); ++c)
                gl.at(r, c) += gv * (probs.at(r, c) - (c == targets[static_cast<std::size_t>(r)] ? 1.0 : 0.0));
    };
    return id;
}

Graph::Id Graph::kl_vs_const_rows(Id post_logits, Mat pre_probs) {
    const Mat& vl = value(post_logits);
    check_same_shape(vl, pre_probs, "kl_vs_const_rows");
    const int V = vl.cols();
    Mat post(vl.rows(), V);
    double loss = 0.0;
    std::vector<double> row_kl(vl.rows(), 0.0);
    for (int r = 0; r < vl.rows(); ++r) {
        softmax_row(vl.data() + static_cast<std::size_t>(r) * V, post.data() + static_cast<std::size_t>(r) * V, V);
        double kl = 0.0;
        for (int c = 0; c < V; ++c) {
            double p = post.at(r, c);
            double q = std::max(pre_probs.at(r, c), 1e-300);
            if (p > 0.0) kl += p * (std::log(p) - std::log(q));
        }
        row_kl[r] = kl;
        loss += kl;
    }
    loss /= vl.rows();
    Id id = emit(Mat::scalar(loss), needs_grad(post_logits), nullptr);
    nodes_[id].back = [post_logits, post = std::move(post), pre = std::move(pre_probs), row_kl = std::move(row_kl),
                       id](Graph& g) {
        const Mat& go = g.nodes_[id].grad;
        if (go.empty() || !g.needs_grad(post_logits)) return;
        Mat& gl = g.grad_buf(post_logits);
        double gv = go[0] / post.rows();
        // d/dz_j of sum_v p_v (ln p_v - ln q_v) = p_j (s_j - KL_row), s_j = ln(p_j/q_j)
        for (int r = 0; r < post.rows(); ++r)
            for (int c = 0; c < post.cols(); ++c) {
                double p = post.at(r, c);
                if (p <= 0.0) continue;
                double s = std::log(p) - std::log(std::max(pre.at(r, c), 1e-300));
                gl.at(r, c) += gv * p * (s - row_kl[static_cast<std::size_t>(r)]);
            }
    };
    return id;
}

void Graph::backward(Id loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be 1x1");
    if (!needs_grad(loss)) return;  // loss is constant w.r.t. every leaf
    grad_buf(loss)[0] = 1.0;
    for (Id id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.back && !n.grad.empty()) n.back(*this);
    }
}

}  // namespace beliefbench::num
