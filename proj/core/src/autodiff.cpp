#include "emev/autodiff.hpp"

#include <cmath>
#include <cstring>

#include "emev/errors.hpp"

namespace emev {

namespace {

void check_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(who) + " expects a rank-2 tensor, got " + t.shape_str());
    }
}

}  // namespace

int Tape::push(Tensor value, std::vector<int> parents,
               std::function<void(Tape&, Node&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::node(Var v) {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw UsageError("variable is not attached to this tape");
    }
    return nodes_[static_cast<size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw UsageError("variable is not attached to this tape");
    }
    return nodes_[static_cast<size_t>(v.id)];
}

Tensor& Tape::grad_buf(int id) { return nodes_[static_cast<size_t>(id)].grad; }

Var Tape::input(Tensor value) {
    return Var{push(std::move(value), {}, nullptr)};
}

Var Tape::param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{it->second};
    int id = push(p.value, {}, nullptr);
    nodes_[static_cast<size_t>(id)].bound = &p;
    param_nodes_[&p] = id;
    return Var{id};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
const Tensor& Tape::grad(Var v) const { return node(v).grad; }

void Tape::backward(Var loss) {
    Node& l = node(loss);
    if (l.value.size() != 1) {
        throw UsageError("backward expects a scalar loss, got shape " + l.value.shape_str());
    }
    // Mark nodes reachable from the loss.
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<int> stack{loss.id};
    reach[static_cast<size_t>(loss.id)] = 1;
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        for (int p : nodes_[static_cast<size_t>(id)].parents) {
            if (!reach[static_cast<size_t>(p)]) {
                reach[static_cast<size_t>(p)] = 1;
                stack.push_back(p);
            }
        }
    }
    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (reach[i]) nodes_[i].grad = Tensor::zeros(nodes_[i].value.shape);
    }
    l.grad.data[0] = 1.0f;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!reach[static_cast<size_t>(id)]) continue;
        if (n.backprop) n.backprop(*this, n);
    }
    for (auto& [p, id] : param_nodes_) {
        if (!reach[static_cast<size_t>(id)]) continue;
        const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
        for (int64_t i = 0; i < g.size(); ++i) {
            p->grad.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
        }
    }
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
        throw DimensionError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    for (int64_t i = 0; i < out.size(); ++i) out.data[static_cast<size_t>(i)] += tb.data[static_cast<size_t>(i)];
    int ia = a.id, ib = b.id;
    return Var{push(std::move(out), {ia, ib}, [ia, ib](Tape& t, Node& self) {
        Tensor& ga = t.grad_buf(ia);
        Tensor& gb = t.grad_buf(ib);
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            ga.data[static_cast<size_t>(i)] += self.grad.data[static_cast<size_t>(i)];
            gb.data[static_cast<size_t>(i)] += self.grad.data[static_cast<size_t>(i)];
        }
    })};
}

Var Tape::scale(Var a, double c) {
    Tensor out = value(a);
    for (float& v : out.data) v = static_cast<float>(v * c);
    int ia = a.id;
    return Var{push(std::move(out), {ia}, [ia, c](Tape& t, Node& self) {
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            ga.data[static_cast<size_t>(i)] += static_cast<float>(self.grad.data[static_cast<size_t>(i)] * c);
        }
    })};
}

Var Tape::add_const(Var a, const Tensor& c) {
    const Tensor& ta = value(a);
    if (!ta.same_shape(c)) {
        throw DimensionError("add_const: shape mismatch " + ta.shape_str() + " vs " + c.shape_str());
    }
    Tensor out = ta;
    for (int64_t i = 0; i < out.size(); ++i) out.data[static_cast<size_t>(i)] += c.data[static_cast<size_t>(i)];
    int ia = a.id;
    return Var{push(std::move(out), {ia}, [ia](Tape& t, Node& self) {
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            ga.data[static_cast<size_t>(i)] += self.grad.data[static_cast<size_t>(i)];
        }
    })};
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_rank2(ta, "matmul lhs");
    check_rank2(tb, "matmul rhs");
    int64_t m = ta.shape[0], k = ta.shape[1], k2 = tb.shape[0], n = tb.shape[1];
    if (k != k2) {
        throw DimensionError("matmul: inner dims differ, " + ta.shape_str() + " x " + tb.shape_str());
    }
    Tensor out = Tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t q = 0; q < k; ++q) {
                acc += static_cast<double>(ta.data[static_cast<size_t>(i * k + q)]) *
                       static_cast<double>(tb.data[static_cast<size_t>(q * n + j)]);
            }
            out.data[static_cast<size_t>(i * n + j)] = static_cast<float>(acc);
        }
    }
    int ia = a.id, ib = b.id;
    return Var{push(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, Node& self) {
        const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
        const Tensor& vb = t.nodes_[static_cast<size_t>(ib)].value;
        Tensor& ga = t.grad_buf(ia);
        Tensor& gb = t.grad_buf(ib);
        // dA = dC * B^T
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t q = 0; q < k; ++q) {
                double acc = 0.0;
                for (int64_t j = 0; j < n; ++j) {
                    acc += static_cast<double>(self.grad.data[static_cast<size_t>(i * n + j)]) *
                           static_cast<double>(vb.data[static_cast<size_t>(q * n + j)]);
                }
                ga.data[static_cast<size_t>(i * k + q)] += static_cast<float>(acc);
            }
        }
        // dB = A^T * dC
        for (int64_t q = 0; q < k; ++q) {
            for (int64_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int64_t i = 0; i < m; ++i) {
                    acc += static_cast<double>(va.data[static_cast<size_t>(i * k + q)]) *
                           static_cast<double>(self.grad.data[static_cast<size_t>(i * n + j)]);
                }
                gb.data[static_cast<size_t>(q * n + j)] += static_cast<float>(acc);
            }
        }
    })};
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_rank2(ta, "matmul_nt lhs");
    check_rank2(tb, "matmul_nt rhs");
    int64_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[0];
    if (tb.shape[1] != k) {
        throw DimensionError("matmul_nt: inner dims differ, " + ta.shape_str() + " x " + tb.shape_str() + "^T");
    }
    Tensor out = Tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t q = 0; q < k; ++q) {
                acc += static_cast<double>(ta.data[static_cast<size_t>(i * k + q)]) *
                       static_cast<double>(tb.data[static_cast<size_t>(j * k + q)]);
            }
            out.data[static_cast<size_t>(i * n + j)] = static_cast<float>(acc);
        }
    }
    int ia = a.id, ib = b.id;
    return Var{push(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, Node& self) {
        const Tensor& va = t.nodes_[static_cast<size_t>(ia)].value;
        const Tensor& vb = t.nodes_[static_cast<size_t>(ib)].value;
        Tensor& ga = t.grad_buf(ia);
        Tensor& gb = t.grad_buf(ib);
        // C = A B^T  =>  dA = dC * B ; dB = dC^T * A
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t q = 0; q < k; ++q) {
                double acc = 0.0;
                for (int64_t j = 0; j < n; ++j) {
                    acc += static_cast<double>(self.grad.data[static_cast<size_t>(i * n + j)]) *
                           static_cast<double>(vb.data[static_cast<size_t>(j * k + q)]);
                }
                ga.data[static_cast<size_t>(i * k + q)] += static_cast<float>(acc);
            }
        }
        for (int64_t j = 0; j < n; ++j) {
            for (int64_t q = 0; q < k; ++q) {
                double acc = 0.0;
                for (int64_t i = 0; i < m; ++i) {
                    acc += static_cast<double>(self.grad.data[static_cast<size_t>(i * n + j)]) *
                           static_cast<double>(va.data[static_cast<size_t>(i * k + q)]);
                }
                gb.data[static_cast<size_t>(j * k + q)] += static_cast<float>(acc);
            }
        }
    })};
}

Var Tape::add_rowvec(Var m, Var row) {
    const Tensor& tm = value(m);
    const Tensor& tr = value(row);
    check_rank2(tm, "add_rowvec lhs");
    if (tr.rank() != 1 || tr.shape[0] != tm.shape[1]) {
        throw DimensionError("add_rowvec: row " + tr.shape_str() + " incompatible with " + tm.shape_str());
    }
    int64_t rows = tm.shape[0], cols = tm.shape[1];
    Tensor out = tm;
    for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) {
            out.data[static_cast<size_t>(i * cols + j)] += tr.data[static_cast<size_t>(j)];
        }
    }
    int im = m.id, ir = row.id;
    return Var{push(std::move(out), {im, ir}, [im, ir, rows, cols](Tape& t, Node& self) {
        Tensor& gm = t.grad_buf(im);
        Tensor& gr = t.grad_buf(ir);
        for (int64_t i = 0; i < rows; ++i) {
            for (int64_t j = 0; j < cols; ++j) {
                float g = self.grad.data[static_cast<size_t>(i * cols + j)];
                gm.data[static_cast<size_t>(i * cols + j)] += g;
                gr.data[static_cast<size_t>(j)] += g;
            }
        }
    })};
}

Var Tape::activation(Var a, Activation act, float leaky_slope) {
    const Tensor& ta = value(a);
    if (act == Activation::kLinear) return a;
    Tensor out = ta;
    switch (act) {
        case Activation::kRelu:
            for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
            break;
        case Activation::kLeakyRelu:
            for (float& v : out.data) v = v > 0.0f ? v : leaky_slope * v;
            break;
        case Activation::kTanh:
            for (float& v : out.data) v = std::tanh(v);
            break;
        case Activation::kLinear:
            break;
    }
    int ia = a.id;
    return Var{push(std::move(out), {ia}, [ia, act, leaky_slope](Tape& t, Node& self) {
        const Tensor& x = t.nodes_[static_cast<size_t>(ia)].value;
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            float g = self.grad.data[static_cast<size_t>(i)];
            float xi = x.data[static_cast<size_t>(i)];
            switch (act) {
                case Activation::kRelu:
                    ga.data[static_cast<size_t>(i)] += xi > 0.0f ? g : 0.0f;
                    break;
                case Activation::kLeakyRelu:
                    ga.data[static_cast<size_t>(i)] += xi > 0.0f ? g : leaky_slope * g;
                    break;
                case Activation::kTanh: {
                    float y = self.value.data[static_cast<size_t>(i)];
                    ga.data[static_cast<size_t>(i)] += g * (1.0f - y * y);
                    break;
                }
                case Activation::kLinear:
                    break;
            }
        }
    })};
}

Var Tape::softmax_rows(Var a) {
    const Tensor& ta = value(a);
    check_rank2(ta, "softmax_rows");
    int64_t rows = ta.shape[0], cols = ta.shape[1];
    Tensor out = Tensor::zeros(ta.shape);
    for (int64_t i = 0; i < rows; ++i) {
        float mx = ta.data[static_cast<size_t>(i * cols)];
        for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, ta.data[static_cast<size_t>(i * cols + j)]);
        double sum = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
            double e = std::exp(static_cast<double>(ta.data[static_cast<size_t>(i * cols + j)] - mx));
            out.data[static_cast<size_t>(i * cols + j)] = static_cast<float>(e);
            sum += e;
        }
        for (int64_t j = 0; j < cols; ++j) {
            out.data[static_cast<size_t>(i * cols + j)] = static_cast<float>(out.data[static_cast<size_t>(i * cols + j)] / sum);
        }
    }
    int ia = a.id;
    return Var{push(std::move(out), {ia}, [ia, rows, cols](Tape& t, Node& self) {
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < rows; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < cols; ++j) {
                dot += static_cast<double>(self.grad.data[static_cast<size_t>(i * cols + j)]) *
                       static_cast<double>(self.value.data[static_cast<size_t>(i * cols + j)]);
            }
            for (int64_t j = 0; j < cols; ++j) {
                float y = self.value.data[static_cast<size_t>(i * cols + j)];
                float g = self.grad.data[static_cast<size_t>(i * cols + j)];
                ga.data[static_cast<size_t>(i * cols + j)] += y * (g - static_cast<float>(dot));
            }
        }
    })};
}

Var Tape::reshape(Var a, std::vector<int64_t> shape) {
    const Tensor& ta = value(a);
    if (shape_product(shape) != ta.size()) {
        throw DimensionError("reshape: cannot view " + ta.shape_str() + " as " + shape_to_string(shape));
    }
    Tensor out(std::move(shape), ta.data);
    int ia = a.id;
    return Var{push(std::move(out), {ia}, [ia](Tape& t, Node& self) {
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            ga.data[static_cast<size_t>(i)] += self.grad.data[static_cast<size_t>(i)];
        }
    })};
}

Var Tape::slice_cols(Var a, int64_t c0, int64_t c1) {
    const Tensor& ta = value(a);
    check_rank2(ta, "slice_cols");
    int64_t rows = ta.shape[0], cols = ta.shape[1];
    if (c0 < 0 || c1 > cols || c0 >= c1) {
        throw DimensionError("slice_cols: bad range [" + std::to_string(c0) + "," + std::to_string(c1) +
                             ") for " + ta.shape_str());
    }
    int64_t w = c1 - c0;
    Tensor out = Tensor::zeros({rows, w});
    for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < w; ++j) {
            out.data[static_cast<size_t>(i * w + j)] = ta.data[static_cast<size_t>(i * cols + c0 + j)];
        }
    }
    int ia = a.id;
    return Var{push(std::move(out), {ia}, [ia, rows, cols, c0, w](Tape& t, Node& self) {
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < rows; ++i) {
            for (int64_t j = 0; j < w; ++j) {
                ga.data[static_cast<size_t>(i * cols + c0 + j)] += self.grad.data[static_cast<size_t>(i * w + j)];
            }
        }
    })};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    int64_t rows = value(parts[0]).shape[0];
    int64_t total = 0;
    for (Var p : parts) {
        const Tensor& tp = value(p);
        check_rank2(tp, "concat_cols");
        if (tp.shape[0] != rows) {
            throw DimensionError("concat_cols: row mismatch " + tp.shape_str());
        }
        total += tp.shape[1];
    }
    Tensor out = Tensor::zeros({rows, total});
    std::vector<int> ids;
    std::vector<int64_t> widths;
    int64_t off = 0;
    for (Var p : parts) {
        const Tensor& tp = value(p);
        int64_t w = tp.shape[1];
        for (int64_t i = 0; i < rows; ++i) {
            for (int64_t j = 0; j < w; ++j) {
                out.data[static_cast<size_t>(i * total + off + j)] = tp.data[static_cast<size_t>(i * w + j)];
            }
        }
        ids.push_back(p.id);
        widths.push_back(w);
        off += w;
    }
    std::vector<int> parents = ids;
    return Var{push(std::move(out), parents, [ids, widths, rows, total](Tape& t, Node& self) {
        int64_t off = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
            Tensor& g = t.grad_buf(ids[k]);
            int64_t w = widths[k];
            for (int64_t i = 0; i < rows; ++i) {
                for (int64_t j = 0; j < w; ++j) {
                    g.data[static_cast<size_t>(i * w + j)] += self.grad.data[static_cast<size_t>(i * total + off + j)];
                }
            }
            off += w;
        }
    })};
}

Var Tape::conv2d(Var in, Var w, Var b) {
    const Tensor& ti = value(in);
    const Tensor& tw = value(w);
    const Tensor& tb = value(b);
    if (ti.rank() != 3) throw DimensionError("conv2d: input must be rank-3 HxWxC, got " + ti.shape_str());
    if (tw.rank() != 4) throw DimensionError("conv2d: filters must be rank-4 KxKxCinxCout, got " + tw.shape_str());
    int64_t H = ti.shape[0], W = ti.shape[1], Cin = ti.shape[2];
    int64_t K = tw.shape[0], Cout = tw.shape[3];
    if (tw.shape[1] != K) throw DimensionError("conv2d: kernel must be square, got " + tw.shape_str());
    if (K % 2 == 0) throw ConfigError("conv2d: kernel size must be odd, got " + std::to_string(K));
    if (tw.shape[2] != Cin) {
        throw DimensionError("conv2d: filter input channels " + std::to_string(tw.shape[2]) +
                             " != input channels " + std::to_string(Cin));
    }
    if (tb.rank() != 1 || tb.shape[0] != Cout) {
        throw DimensionError("conv2d: bias " + tb.shape_str() + " incompatible with Cout " + std::to_string(Cout));
    }
    int64_t pad = K / 2;
    Tensor out = Tensor::zeros({H, W, Cout});
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            for (int64_t co = 0; co < Cout; ++co) {
                double acc = static_cast<double>(tb.data[static_cast<size_t>(co)]);
                for (int64_t ky = 0; ky < K; ++ky) {
                    int64_t sy = y + ky - pad;
                    if (sy < 0 || sy >= H) continue;
                    for (int64_t kx = 0; kx < K; ++kx) {
                        int64_t sx = x + kx - pad;
                        if (sx < 0 || sx >= W) continue;
                        for (int64_t ci = 0; ci < Cin; ++ci) {
                            acc += static_cast<double>(ti.data[static_cast<size_t>((sy * W + sx) * Cin + ci)]) *
                                   static_cast<double>(tw.data[static_cast<size_t>(((ky * K + kx) * Cin + ci) * Cout + co)]);
                        }
                    }
                }
                out.data[static_cast<size_t>((y * W + x) * Cout + co)] = static_cast<float>(acc);
            }
        }
    }
    int ii = in.id, iw = w.id, ib = b.id;
    return Var{push(std::move(out), {ii, iw, ib}, [ii, iw, ib, H, W, Cin, K, Cout, pad](Tape& t, Node& self) {
        const Tensor& x = t.nodes_[static_cast<size_t>(ii)].value;
        const Tensor& f = t.nodes_[static_cast<size_t>(iw)].value;
        Tensor& gx = t.grad_buf(ii);
        Tensor& gf = t.grad_buf(iw);
        Tensor& gb = t.grad_buf(ib);
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t xx = 0; xx < W; ++xx) {
                for (int64_t co = 0; co < Cout; ++co) {
                    float g = self.grad.data[static_cast<size_t>((y * W + xx) * Cout + co)];
                    if (g == 0.0f) continue;
                    gb.data[static_cast<size_t>(co)] += g;
                    for (int64_t ky = 0; ky < K; ++ky) {
                        int64_t sy = y + ky - pad;
                        if (sy < 0 || sy >= H) continue;
                        for (int64_t kx = 0; kx < K; ++kx) {
                            int64_t sx = xx + kx - pad;
                            if (sx < 0 || sx >= W) continue;
                            for (int64_t ci = 0; ci < Cin; ++ci) {
                                size_t xi = static_cast<size_t>((sy * W + sx) * Cin + ci);
                                size_t fi = static_cast<size_t>(((ky * K + kx) * Cin + ci) * Cout + co);
                                gx.data[xi] += g * f.data[fi];
                                gf.data[fi] += g * x.data[xi];
                            }
                        }
                    }
                }
            }
        }
    })};
}

Var Tape::conv3d(Var in, Var w, Var b) {
    const Tensor& ti = value(in);
    const Tensor& tw = value(w);
    const Tensor& tb = value(b);
    if (ti.rank() != 4) throw DimensionError("conv3d: input must be rank-4 DxHxWxC, got " + ti.shape_str());
    if (tw.rank() != 5) throw DimensionError("conv3d: filters must be rank-5 KxKxKxCinxCout, got " + tw.shape_str());
    int64_t D = ti.shape[0], H = ti.shape[1], W = ti.shape[2], Cin = ti.shape[3];
    int64_t K = tw.shape[0], Cout = tw.shape[4];
    if (tw.shape[1] != K || tw.shape[2] != K) throw DimensionError("conv3d: kernel must be cubic, got " + tw.shape_str());
    if (K % 2 == 0) throw ConfigError("conv3d: kernel size must be odd, got " + std::to_string(K));
    if (tw.shape[3] != Cin) {
        throw DimensionError("conv3d: filter input channels " + std::to_string(tw.shape[3]) +
                             " != input channels " + std::to_string(Cin));
    }
    if (tb.rank() != 1 || tb.shape[0] != Cout) {
        throw DimensionError("conv3d: bias " + tb.shape_str() + " incompatible with Cout " + std::to_string(Cout));
    }
    int64_t pad = K / 2;
    Tensor out = Tensor::zeros({D, H, W, Cout});
    for (int64_t z = 0; z < D; ++z) {
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t x = 0; x < W; ++x) {
                for (int64_t co = 0; co < Cout; ++co) {
                    double acc = static_cast<double>(tb.data[static_cast<size_t>(co)]);
                    for (int64_t kz = 0; kz < K; ++kz) {
                        int64_t sz = z + kz - pad;
                        if (sz < 0 || sz >= D) continue;
                        for (int64_t ky = 0; ky < K; ++ky) {
                            int64_t sy = y + ky - pad;
                            if (sy < 0 || sy >= H) continue;
                            for (int64_t kx = 0; kx < K; ++kx) {
                                int64_t sx = x + kx - pad;
                                if (sx < 0 || sx >= W) continue;
                                for (int64_t ci = 0; ci < Cin; ++ci) {
                                    acc += static_cast<double>(
                                               ti.data[static_cast<size_t>(((sz * H + sy) * W + sx) * Cin + ci)]) *
                                           static_cast<double>(
                                               tw.data[static_cast<size_t>((((kz * K + ky) * K + kx) * Cin + ci) * Cout + co)]);
                                }
                            }
                        }
                    }
                    out.data[static_cast<size_t>(((z * H + y) * W + x) * Cout + co)] = static_cast<float>(acc);
                }
            }
        }
    }
    int ii = in.id, iw = w.id, ib = b.id;
    return Var{push(std::move(out), {ii, iw, ib}, [ii, iw, ib, D, H, W, Cin, K, Cout, pad](Tape& t, Node& self) {
        const Tensor& x = t.nodes_[static_cast<size_t>(ii)].value;
        const Tensor& f = t.nodes_[static_cast<size_t>(iw)].value;
        Tensor& gx = t.grad_buf(ii);
        Tensor& gf = t.grad_buf(iw);
        Tensor& gb = t.grad_buf(ib);
        for (int64_t z = 0; z < D; ++z) {
            for (int64_t y = 0; y < H; ++y) {
                for (int64_t xx = 0; xx < W; ++xx) {
                    for (int64_t co = 0; co < Cout; ++co) {
                        float g = self.grad.data[static_cast<size_t>(((z * H + y) * W + xx) * Cout + co)];
                        if (g == 0.0f) continue;
                        gb.data[static_cast<size_t>(co)] += g;
                        for (int64_t kz = 0; kz < K; ++kz) {
                            int64_t sz = z + kz - pad;
                            if (sz < 0 || sz >= D) continue;
                            for (int64_t ky = 0; ky < K; ++ky) {
                                int64_t sy = y + ky - pad;
                                if (sy < 0 || sy >= H) continue;
                                for (int64_t kx = 0; kx < K; ++kx) {
                                    int64_t sx = xx + kx - pad;
                                    if (sx < 0 || sx >= W) continue;
                                    for (int64_t ci = 0; ci < Cin; ++ci) {
                                        size_t xi = static_cast<size_t>(((sz * H + sy) * W + sx) * Cin + ci);
                                        size_t fi = static_cast<size_t>((((kz * K + ky) * K + kx) * Cin + ci) * Cout + co);
                                        gx.data[xi] += g * f.data[fi];
                                        gf.data[fi] += g * x.data[xi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    })};
}

Var Tape::global_avg_pool2d(Var in) {
    const Tensor& ti = value(in);
    if (ti.rank() != 3) throw DimensionError("global_avg_pool2d: input must be rank-3 HxWxC, got " + ti.shape_str());
    int64_t H = ti.shape[0], W = ti.shape[1], C = ti.shape[2];
    Tensor out = Tensor::zeros({C});
    for (int64_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t x = 0; x < W; ++x) {
                acc += static_cast<double>(ti.data[static_cast<size_t>((y * W + x) * C + c)]);
            }
        }
        out.data[static_cast<size_t>(c)] = static_cast<float>(acc / static_cast<double>(H * W));
    }
    int ii = in.id;
    return Var{push(std::move(out), {ii}, [ii, H, W, C](Tape& t, Node& self) {
        Tensor& g = t.grad_buf(ii);
        float inv = 1.0f / static_cast<float>(H * W);
        for (int64_t c = 0; c < C; ++c) {
            float gc = self.grad.data[static_cast<size_t>(c)] * inv;
            for (int64_t y = 0; y < H; ++y) {
                for (int64_t x = 0; x < W; ++x) {
                    g.data[static_cast<size_t>((y * W + x) * C + c)] += gc;
                }
            }
        }
    })};
}

Var Tape::mse_to_target(Var a, const Tensor& target) {
    const Tensor& ta = value(a);
    if (!ta.same_shape(target)) {
        throw DimensionError("mse_to_target: shape mismatch " + ta.shape_str() + " vs " + target.shape_str());
    }
    double acc = 0.0;
    for (int64_t i = 0; i < ta.size(); ++i) {
        double d = static_cast<double>(ta.data[static_cast<size_t>(i)]) -
                   static_cast<double>(target.data[static_cast<size_t>(i)]);
        acc += d * d;
    }
    Tensor out({1}, {static_cast<float>(acc / static_cast<double>(ta.size()))});
    int ia = a.id;
    Tensor tgt = target;
    return Var{push(std::move(out), {ia}, [ia, tgt = std::move(tgt)](Tape& t, Node& self) {
        const Tensor& x = t.nodes_[static_cast<size_t>(ia)].value;
        Tensor& g = t.grad_buf(ia);
        float gl = self.grad.data[0];
        float inv = 2.0f / static_cast<float>(x.size());
        for (int64_t i = 0; i < x.size(); ++i) {
            g.data[static_cast<size_t>(i)] +=
                gl * inv * (x.data[static_cast<size_t>(i)] - tgt.data[static_cast<size_t>(i)]);
        }
    })};
}

Var Tape::cross_entropy_logits(Var logits, int label) {
    const Tensor& tl = value(logits);
    if (tl.rank() != 1) throw DimensionError("cross_entropy_logits: expects rank-1 logits, got " + tl.shape_str());
    int64_t n = tl.shape[0];
    if (label < 0 || label >= n) throw DimensionError("cross_entropy_logits: label out of range");
    float mx = tl.data[0];
    for (int64_t i = 1; i < n; ++i) mx = std::max(mx, tl.data[static_cast<size_t>(i)]);
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) sum += std::exp(static_cast<double>(tl.data[static_cast<size_t>(i)] - mx));
    double lse = std::log(sum) + static_cast<double>(mx);
    Tensor out({1}, {static_cast<float>(lse - static_cast<double>(tl.data[static_cast<size_t>(label)]))});
    int il = logits.id;
    return Var{push(std::move(out), {il}, [il, label, n](Tape& t, Node& self) {
        const Tensor& x = t.nodes_[static_cast<size_t>(il)].value;
        Tensor& g = t.grad_buf(il);
        float gl = self.grad.data[0];
        float mx = x.data[0];
        for (int64_t i = 1; i < n; ++i) mx = std::max(mx, x.data[static_cast<size_t>(i)]);
        double sum = 0.0;
        for (int64_t i = 0; i < n; ++i) sum += std::exp(static_cast<double>(x.data[static_cast<size_t>(i)] - mx));
        for (int64_t i = 0; i < n; ++i) {
            double p = std::exp(static_cast<double>(x.data[static_cast<size_t>(i)] - mx)) / sum;
            double onehot = (i == label) ? 1.0 : 0.0;
            g.data[static_cast<size_t>(i)] += static_cast<float>(gl * (p - onehot));
        }
    })};
}

Var Tape::add_scaled(Var a, double wa, Var b, double wb) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.size() != 1 || tb.size() != 1) {
        throw DimensionError("add_scaled expects scalar operands");
    }
    Tensor out({1}, {static_cast<float>(wa * static_cast<double>(ta.data[0]) +
                                        wb * static_cast<double>(tb.data[0]))});
    int ia = a.id, ib = b.id;
    return Var{push(std::move(out), {ia, ib}, [ia, ib, wa, wb](Tape& t, Node& self) {
        t.grad_buf(ia).data[0] += static_cast<float>(self.grad.data[0] * wa);
        t.grad_buf(ib).data[0] += static_cast<float>(self.grad.data[0] * wb);
    })};
}

Var Tape::mean_of(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw DimensionError("mean_of: no inputs");
    double acc = 0.0;
    std::vector<int> ids;
    for (Var v : scalars) {
        const Tensor& t = value(v);
        if (t.size() != 1) throw DimensionError("mean_of expects scalars");
        acc += static_cast<double>(t.data[0]);
        ids.push_back(v.id);
    }
    double n = static_cast<double>(scalars.size());
    Tensor out({1}, {static_cast<float>(acc / n)});
    std::vector<int> parents = ids;
    return Var{push(std::move(out), parents, [ids, n](Tape& t, Node& self) {
        float g = static_cast<float>(self.grad.data[0] / n);
        for (int id : ids) t.grad_buf(id).data[0] += g;
    })};
}

}  // namespace emev
