#include "gdr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "gdr/kernels.hpp"

namespace gdr::tape {

using kernels::active;

void Node::accumulate(const Tensor& g) {
    check_same_shape(value, g, "accumulate_grad");
    if (!has_grad_) {
        grad_ = g;
        has_grad_ = true;
    } else {
        active().add(grad_.ptr(), g.ptr(), grad_.ptr(), grad_.numel());
    }
}

Var leaf(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return n;
}

Var constant(Tensor v) { return leaf(std::move(v), false); }

namespace {

Var make_node(Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

Tensor scaled(const Tensor& x, float a) {
    Tensor out(x.shape);
    active().scale(x.ptr(), a, out.ptr(), x.numel());
    return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "add");
    Tensor out(a->value.shape);
    active().add(a->value.ptr(), b->value.ptr(), out.ptr(), out.numel());
    Var n = make_node(std::move(out), {a, b}, [](Node& self) {
        if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad());
        if (self.inputs[1]->requires_grad) self.inputs[1]->accumulate(self.grad());
    });
    if (n->value.numel() == 1) {
        n->scalar_double = a->scalar() + b->scalar();
        n->has_scalar_double = true;
    }
    return n;
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "sub");
    Tensor out(a->value.shape);
    active().sub(a->value.ptr(), b->value.ptr(), out.ptr(), out.numel());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad());
        if (self.inputs[1]->requires_grad)
            self.inputs[1]->accumulate(scaled(self.grad(), -1.0f));
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "mul");
    Tensor out(a->value.shape);
    active().mul(a->value.ptr(), b->value.ptr(), out.ptr(), out.numel());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const Tensor& g = self.grad();
        if (self.inputs[0]->requires_grad) {
            Tensor ga(g.shape);
            active().mul(g.ptr(), self.inputs[1]->value.ptr(), ga.ptr(), g.numel());
            self.inputs[0]->accumulate(ga);
        }
        if (self.inputs[1]->requires_grad) {
            Tensor gb(g.shape);
            active().mul(g.ptr(), self.inputs[0]->value.ptr(), gb.ptr(), g.numel());
            self.inputs[1]->accumulate(gb);
        }
    });
}

Var add_scalar(const Var& a, float s) {
    Tensor out = a->value;
    for (auto& v : out.data) v += s;
    Var n = make_node(std::move(out), {a}, [](Node& self) {
        if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad());
    });
    if (n->value.numel() == 1) {
        n->scalar_double = a->scalar() + s;
        n->has_scalar_double = true;
    }
    return n;
}

Var mul_scalar(const Var& a, float s) {
    Var n = make_node(scaled(a->value, s), {a}, [s](Node& self) {
        if (self.inputs[0]->requires_grad)
            self.inputs[0]->accumulate(scaled(self.grad(), s));
    });
    if (n->value.numel() == 1) {
        n->scalar_double = a->scalar() * s;
        n->has_scalar_double = true;
    }
    return n;
}

Var leaky_relu(const Var& x, float slope) {
    Tensor out(x->value.shape);
    active().lrelu_fwd(x->value.ptr(), slope, out.ptr(), out.numel());
    return make_node(std::move(out), {x}, [slope](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const Tensor& g = self.grad();
        Tensor gx(g.shape);
        active().lrelu_bwd(self.inputs[0]->value.ptr(), g.ptr(), slope, gx.ptr(),
                           g.numel());
        self.inputs[0]->accumulate(gx);
    });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0f); }

Var sigmoid(const Var& x) {
    Tensor out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = 1.0f / (1.0f + std::exp(-x->value.data[i]));
    return make_node(std::move(out), {x}, [](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const Tensor& g = self.grad();
        Tensor gx(g.shape);
        for (int64_t i = 0; i < g.numel(); ++i) {
            const float s = self.value.data[i];
            gx.data[i] = g.data[i] * s * (1.0f - s);
        }
        self.inputs[0]->accumulate(gx);
    });
}

Var tanh(const Var& x) {
    Tensor out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = std::tanh(x->value.data[i]);
    return make_node(std::move(out), {x}, [](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const Tensor& g = self.grad();
        Tensor gx(g.shape);
        for (int64_t i = 0; i < g.numel(); ++i) {
            const float t = self.value.data[i];
            gx.data[i] = g.data[i] * (1.0f - t * t);
        }
        self.inputs[0]->accumulate(gx);
    });
}

Var clamp(const Var& x, float lo, float hi) {
    Tensor out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = std::min(std::max(x->value.data[i], lo), hi);
    return make_node(std::move(out), {x}, [lo, hi](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const Tensor& g = self.grad();
        const Tensor& xin = self.inputs[0]->value;
        Tensor gx(g.shape);
        for (int64_t i = 0; i < g.numel(); ++i)
            gx.data[i] = (xin.data[i] >= lo && xin.data[i] <= hi) ? g.data[i] : 0.0f;
        self.inputs[0]->accumulate(gx);
    });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int64_t stride, int64_t pad) {
    const Shape4& xs = x->value.shape;
    const Shape4& ws = w->value.shape;
    if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
    if (pad < 0) throw ValueError("conv2d: padding must be >= 0");
    if (ws.c != xs.c)
        throw ShapeError("conv2d: kernel input channels " + std::to_string(ws.c) +
                         " != input channels " + std::to_string(xs.c) + " (input " +
                         xs.str() + ", kernel " + ws.str() + ")");
    const int64_t oh = kernels::conv_out_dim(xs.h, ws.h, stride, pad);
    const int64_t ow = kernels::conv_out_dim(xs.w, ws.w, stride, pad);
    if (oh < 1 || ow < 1)
        throw ShapeError("conv2d: non-positive output dims for input " + xs.str() +
                         ", kernel " + ws.str() + ", stride " + std::to_string(stride) +
                         ", pad " + std::to_string(pad));
    if (b) {
        const Shape4 want{1, ws.n, 1, 1};
        if (!(b->value.shape == want))
            throw ShapeError("conv2d: bias shape " + b->value.shape.str() +
                             " != " + want.str());
    }

    const kernels::ConvDims d{xs.n, xs.c, xs.h, xs.w, ws.n, oh,
                              ow,   ws.h, ws.w, stride, pad};
    Tensor out({xs.n, ws.n, oh, ow});
    active().conv2d_fwd(x->value.ptr(), w->value.ptr(), b ? b->value.ptr() : nullptr,
                        out.ptr(), d);

    std::vector<Var> inputs = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_node(std::move(out), std::move(inputs), [d](Node& self) {
        const Tensor& g = self.grad();
        const Var& x = self.inputs[0];
        const Var& w = self.inputs[1];
        if (x->requires_grad) {
            Tensor gx(x->value.shape);
            active().conv2d_bwd_input(g.ptr(), w->value.ptr(), gx.ptr(), d);
            x->accumulate(gx);
        }
        const bool need_w = w->requires_grad;
        const bool need_b = self.inputs.size() > 2 && self.inputs[2]->requires_grad;
        if (need_w || need_b) {
            Tensor gw(w->value.shape);
            Tensor gb({1, w->value.shape.n, 1, 1});
            active().conv2d_bwd_weight(g.ptr(), x->value.ptr(), gw.ptr(),
                                       need_b ? gb.ptr() : nullptr, d);
            if (need_w) w->accumulate(gw);
            if (need_b) self.inputs[2]->accumulate(gb);
        }
    });
}

Var concat_batch(const Var& a, const Var& b) {
    const Var parts[] = {a, b};
    return concat_batch(parts);
}

Var concat_batch(std::span<const Var> parts) {
    if (parts.empty()) throw ValueError("concat_batch: no inputs");
    if (parts.size() == 1) {
        // Single input passes through (k_referred = 0 case).
        const Var& p = parts[0];
        return make_node(p->value, {p}, [](Node& self) {
            if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad());
        });
    }
    const Shape4 s0 = parts[0]->value.shape;
    int64_t total_n = 0;
    for (const auto& p : parts) {
        const Shape4& s = p->value.shape;
        if (s.c != s0.c || s.h != s0.h || s.w != s0.w)
            throw ShapeError("concat_batch: non-batch dims differ, " + s0.str() +
                             " vs " + s.str());
        total_n += s.n;
    }
    Tensor out({total_n, s0.c, s0.h, s0.w});
    int64_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p->value.data.begin(), p->value.data.end(),
                  out.data.begin() + offset);
        offset += p->value.numel();
    }
    return make_node(std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
        const Tensor& g = self.grad();
        int64_t offset = 0;
        for (auto& in : self.inputs) {
            const int64_t len = in->value.numel();
            if (in->requires_grad) {
                Tensor slice(in->value.shape);
                std::copy(g.data.begin() + offset, g.data.begin() + offset + len,
                          slice.data.begin());
                in->accumulate(slice);
            }
            offset += len;
        }
    });
}

Var add_channel_bias(const Var& x, const Var& b) {
    const Shape4& xs = x->value.shape;
    const Shape4 want{xs.n, xs.c, 1, 1};
    if (!(b->value.shape == want))
        throw ShapeError("add_channel_bias: bias shape " + b->value.shape.str() +
                         " != " + want.str() + " for input " + xs.str());
    Tensor out(xs);
    const int64_t plane = xs.h * xs.w;
    for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
        const float bv = b->value.data[nc];
        const float* src = x->value.ptr() + nc * plane;
        float* dst = out.ptr() + nc * plane;
        for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] + bv;
    }
    return make_node(std::move(out), {x, b}, [](Node& self) {
        const Tensor& g = self.grad();
        const Shape4& xs = self.value.shape;
        const int64_t plane = xs.h * xs.w;
        if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(g);
        if (self.inputs[1]->requires_grad) {
            Tensor gb({xs.n, xs.c, 1, 1});
            for (int64_t nc = 0; nc < xs.n * xs.c; ++nc)
                gb.data[nc] =
                    static_cast<float>(active().sum(g.ptr() + nc * plane, plane));
            self.inputs[1]->accumulate(gb);
        }
    });
}

Var upsample2x(const Var& x) {
    const Shape4& xs = x->value.shape;
    Tensor out({xs.n, xs.c, xs.h * 2, xs.w * 2});
    for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
        const float* src = x->value.ptr() + nc * xs.h * xs.w;
        float* dst = out.ptr() + nc * xs.h * xs.w * 4;
        for (int64_t y = 0; y < xs.h; ++y) {
            for (int64_t xcol = 0; xcol < xs.w; ++xcol) {
                const float v = src[y * xs.w + xcol];
                float* d = dst + (2 * y) * (2 * xs.w) + 2 * xcol;
                d[0] = v;
                d[1] = v;
                d[2 * xs.w] = v;
                d[2 * xs.w + 1] = v;
            }
        }
    }
    return make_node(std::move(out), {x}, [](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const Tensor& g = self.grad();
        const Shape4& xs = self.inputs[0]->value.shape;
        Tensor gx(xs);
        for (int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
            const float* gsrc = g.ptr() + nc * xs.h * xs.w * 4;
            float* gdst = gx.ptr() + nc * xs.h * xs.w;
            for (int64_t y = 0; y < xs.h; ++y) {
                for (int64_t xcol = 0; xcol < xs.w; ++xcol) {
                    const float* s = gsrc + (2 * y) * (2 * xs.w) + 2 * xcol;
                    gdst[y * xs.w + xcol] =
                        s[0] + s[1] + s[2 * xs.w] + s[2 * xs.w + 1];
                }
            }
        }
        self.inputs[0]->accumulate(gx);
    });
}

Var sum_all(const Var& x) {
    const double acc = active().sum(x->value.ptr(), x->value.numel());
    Var n = make_node(Tensor::scalar(static_cast<float>(acc)), {x}, [](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        self.inputs[0]->accumulate(Tensor(self.inputs[0]->value.shape, self.grad().item()));
    });
    n->scalar_double = acc;
    n->has_scalar_double = true;
    return n;
}

Var mean_all(const Var& x) {
    const int64_t n = x->value.numel();
    const double acc = active().sum(x->value.ptr(), n) / static_cast<double>(n);
    Var node = make_node(Tensor::scalar(static_cast<float>(acc)), {x}, [n](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        self.inputs[0]->accumulate(
            Tensor(self.inputs[0]->value.shape, self.grad().item() / static_cast<float>(n)));
    });
    node->scalar_double = acc;
    node->has_scalar_double = true;
    return node;
}

Var mean_per_item(const Var& x) {
    const Shape4& xs = x->value.shape;
    const int64_t per = xs.c * xs.h * xs.w;
    Tensor out({xs.n, 1, 1, 1});
    for (int64_t n = 0; n < xs.n; ++n)
        out.data[n] = static_cast<float>(
            active().sum(x->value.ptr() + n * per, per) / static_cast<double>(per));
    return make_node(std::move(out), {x}, [per](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const Tensor& g = self.grad();
        Tensor gx(self.inputs[0]->value.shape);
        for (int64_t n = 0; n < gx.shape.n; ++n) {
            const float v = g.data[n] / static_cast<float>(per);
            float* dst = gx.ptr() + n * per;
            for (int64_t i = 0; i < per; ++i) dst[i] = v;
        }
        self.inputs[0]->accumulate(gx);
    });
}

Var mse(const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "mse");
    const int64_t n = a->value.numel();
    const double acc =
        active().sumsq_diff(a->value.ptr(), b->value.ptr(), n) / static_cast<double>(n);
    Var node = make_node(Tensor::scalar(static_cast<float>(acc)), {a, b}, [n](Node& self) {
        const float coef = 2.0f * self.grad().item() / static_cast<float>(n);
        const Tensor& av = self.inputs[0]->value;
        const Tensor& bv = self.inputs[1]->value;
        Tensor diff(av.shape);
        active().sub(av.ptr(), bv.ptr(), diff.ptr(), n);
        if (self.inputs[0]->requires_grad)
            self.inputs[0]->accumulate(scaled(diff, coef));
        if (self.inputs[1]->requires_grad)
            self.inputs[1]->accumulate(scaled(diff, -coef));
    });
    node->scalar_double = acc;
    node->has_scalar_double = true;
    return node;
}

namespace {

void check_finite_probs(const Tensor& d, const char* op) {
    if (!d.all_finite())
        throw ValueError(std::string(op) + ": non-finite value in input");
}

}  // namespace

Var log_mean(const Var& d) {
    check_finite_probs(d->value, "log_mean");
    const int64_t n = d->value.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const float c =
            std::min(std::max(d->value.data[i], kProbClamp), 1.0f - kProbClamp);
        acc += std::log(static_cast<double>(c));
    }
    Var node = make_node(Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))),
                         {d}, [n](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const float g = self.grad().item() / static_cast<float>(n);
        const Tensor& dv = self.inputs[0]->value;
        Tensor gd(dv.shape);
        for (int64_t i = 0; i < n; ++i) {
            const float v = dv.data[i];
            gd.data[i] =
                (v >= kProbClamp && v <= 1.0f - kProbClamp) ? g / v : 0.0f;
        }
        self.inputs[0]->accumulate(gd);
    });
    node->scalar_double = acc / static_cast<double>(n);
    node->has_scalar_double = true;
    return node;
}

Var log_one_minus_mean(const Var& d) {
    check_finite_probs(d->value, "log_one_minus_mean");
    const int64_t n = d->value.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const float c =
            std::min(std::max(d->value.data[i], kProbClamp), 1.0f - kProbClamp);
        acc += std::log(1.0 - static_cast<double>(c));
    }
    Var node = make_node(Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))),
                         {d}, [n](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const float g = self.grad().item() / static_cast<float>(n);
        const Tensor& dv = self.inputs[0]->value;
        Tensor gd(dv.shape);
        for (int64_t i = 0; i < n; ++i) {
            const float v = dv.data[i];
            gd.data[i] =
                (v >= kProbClamp && v <= 1.0f - kProbClamp) ? -g / (1.0f - v) : 0.0f;
        }
        self.inputs[0]->accumulate(gd);
    });
    node->scalar_double = acc / static_cast<double>(n);
    node->has_scalar_double = true;
    return node;
}

Var tv(const Var& x) {
    const Shape4& xs = x->value.shape;
    if (xs.h < 1 || xs.w < 1) throw ShapeError("tv: empty spatial dims " + xs.str());
    const int64_t planes = xs.n * xs.c;
    double acc = 0.0;
    for (int64_t nc = 0; nc < planes; ++nc) {
        const float* p = x->value.ptr() + nc * xs.h * xs.w;
        for (int64_t y = 0; y < xs.h; ++y)
            for (int64_t xc = 0; xc + 1 < xs.w; ++xc)
                acc += std::abs(p[y * xs.w + xc + 1] - p[y * xs.w + xc]);
        for (int64_t y = 0; y + 1 < xs.h; ++y)
            for (int64_t xc = 0; xc < xs.w; ++xc)
                acc += std::abs(p[(y + 1) * xs.w + xc] - p[y * xs.w + xc]);
    }
    Var node = make_node(Tensor::scalar(static_cast<float>(acc / static_cast<double>(planes))),
                         {x}, [](Node& self) {
        if (!self.inputs[0]->requires_grad) return;
        const Shape4& xs = self.inputs[0]->value.shape;
        const int64_t planes = xs.n * xs.c;
        const float g = self.grad().item() / static_cast<float>(planes);
        const Tensor& xv = self.inputs[0]->value;
        Tensor gx(xs);
        for (int64_t nc = 0; nc < planes; ++nc) {
            const float* p = xv.ptr() + nc * xs.h * xs.w;
            float* gp = gx.ptr() + nc * xs.h * xs.w;
            for (int64_t y = 0; y < xs.h; ++y) {
                for (int64_t xc = 0; xc + 1 < xs.w; ++xc) {
                    const float d = p[y * xs.w + xc + 1] - p[y * xs.w + xc];
                    const float s = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
                    gp[y * xs.w + xc + 1] += s;
                    gp[y * xs.w + xc] -= s;
                }
            }
            for (int64_t y = 0; y + 1 < xs.h; ++y) {
                for (int64_t xc = 0; xc < xs.w; ++xc) {
                    const float d = p[(y + 1) * xs.w + xc] - p[y * xs.w + xc];
                    const float s = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
                    gp[(y + 1) * xs.w + xc] += s;
                    gp[y * xs.w + xc] -= s;
                }
            }
        }
        self.inputs[0]->accumulate(gx);
    });
    node->scalar_double = acc / static_cast<double>(planes);
    node->has_scalar_double = true;
    return node;
}

void backward(const Var& root) {
    if (root->value.numel() != 1)
        throw ShapeError("backward: root must be scalar, got " +
                         root->value.shape.str());
    if (!root->requires_grad) return;

    // Iterative post-order DFS; visits each node once even when shared.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) {
                stack.emplace_back(child, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->inputs.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }

    root->accumulate(Tensor::scalar(1.0f));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
    }
}

void adam_step(AdamState& st, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads) {
    if (params.size() != grads.size())
        throw ValueError("adam_step: params/grads count mismatch");
    if (st.m.empty()) {
        for (const Tensor* p : params) {
            st.m.emplace_back(p->shape);
            st.v.emplace_back(p->shape);
        }
    }
    if (st.m.size() != params.size())
        throw ValueError("adam_step: state sized for " + std::to_string(st.m.size()) +
                         " params, got " + std::to_string(params.size()));
    st.step_count += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(st.beta1), st.step_count);
    const double bc2 = 1.0 - std::pow(static_cast<double>(st.beta2), st.step_count);
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        check_same_shape(p, g, "adam_step");
        check_same_shape(p, st.m[i], "adam_step(state)");
        Tensor& m = st.m[i];
        Tensor& v = st.v[i];
        for (int64_t j = 0; j < p.numel(); ++j) {
            const float gj = g.data[j];
            m.data[j] = st.beta1 * m.data[j] + (1.0f - st.beta1) * gj;
            v.data[j] = st.beta2 * v.data[j] + (1.0f - st.beta2) * gj * gj;
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.data[j] -= static_cast<float>(st.lr * mhat /
                                            (std::sqrt(vhat) + st.eps));
        }
    }
}

void adam_step(AdamState& st, std::span<const Var> params) {
    std::vector<Tensor*> ps;
    std::vector<const Tensor*> gs;
    ps.reserve(params.size());
    gs.reserve(params.size());
    for (const auto& p : params) {
        ps.push_back(&p->value);
        gs.push_back(&p->grad());
    }
    adam_step(st, ps, gs);
}

void zero_grads(std::span<const Var> params) {
    for (const auto& p : params) p->zero_grad();
}

}  // namespace gdr::tape
