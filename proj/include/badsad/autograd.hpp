#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "badsad/errors.hpp"
#include "badsad/tensor.hpp"

namespace badsad {

template <typename T>
class Tape;

// A value in the computation graph. Parameters are named nodes with
// requires_grad set; everything else is produced by operators. grad always
// mirrors value's shape and is zero until backward reaches the node.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::string name;
    Tape<T>* tape = nullptr;

    explicit Node(Tensor<T> v) : value(std::move(v)), grad(value.shape) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_constant(Tensor<T> v) {
    return std::make_shared<Node<T>>(std::move(v));
}

template <typename T>
NodePtr<T> make_param(std::string name, Tensor<T> v) {
    auto n = std::make_shared<Node<T>>(std::move(v));
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

// Ordered record of executed operations. backward() replays the records in
// strict reverse execution order exactly once; a second call is rejected.
template <typename T>
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape() { release_nodes(); }

    NodePtr<T> leaf(Tensor<T> v, bool requires_grad = false) {
        auto n = std::make_shared<Node<T>>(std::move(v));
        n->requires_grad = requires_grad;
        n->tape = this;
        nodes_.push_back(n);
        return n;
    }

    // Joins an existing (parameter) node to this tape for one forward/backward
    // cycle and zeroes its gradient.
    void attach(const NodePtr<T>& param) {
        if (param->tape != nullptr && param->tape != this) {
            throw UsageError("parameter '" + param->name + "' is attached to another live tape");
        }
        param->tape = this;
        param->zero_grad();
        nodes_.push_back(param);
    }

    void adopt(const NodePtr<T>& n) { nodes_.push_back(n); }

    void record(std::function<void()> fn) { records_.push_back(std::move(fn)); }

    void backward(const NodePtr<T>& root) {
        if (consumed_) {
            throw UsageError("tape already consumed by backward; re-execute forward first");
        }
        if (root->tape != this) {
            throw UsageError("backward root does not belong to this tape (stale tape?)");
        }
        if (root->value.numel() != 1) {
            throw UsageError("backward root must be scalar, got shape " +
                             shape_str(root->value.shape));
        }
        root->grad[0] = T(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
        consumed_ = true;
    }

    bool consumed() const { return consumed_; }
    std::size_t size() const { return records_.size(); }

  private:
    void release_nodes() {
        for (auto& n : nodes_) {
            if (n) n->tape = nullptr;
        }
        nodes_.clear();
        records_.clear();
    }

    std::vector<std::function<void()>> records_;
    std::vector<NodePtr<T>> nodes_;
    bool consumed_ = false;
};

namespace detail {

template <typename T>
Tape<T>* common_tape(std::initializer_list<NodePtr<T>> ins) {
    Tape<T>* tape = nullptr;
    for (const auto& n : ins) {
        if (!n || n->tape == nullptr) continue;
        if (tape == nullptr) {
            tape = n->tape;
        } else if (tape != n->tape) {
            throw UsageError("operands belong to different tapes");
        }
    }
    return tape;
}

template <typename T>
bool any_requires_grad(std::initializer_list<NodePtr<T>> ins) {
    for (const auto& n : ins) {
        if (n && n->requires_grad) return true;
    }
    return false;
}

// Creates the output node and, when a live tape is present and some input
// wants gradients, registers the backward closure.
template <typename T>
NodePtr<T> op_node(Tensor<T> value, std::initializer_list<NodePtr<T>> ins,
                   std::function<void(const NodePtr<T>&)> make_backward) {
    auto out = std::make_shared<Node<T>>(std::move(value));
    out->requires_grad = any_requires_grad<T>(ins);
    Tape<T>* tape = common_tape<T>(ins);
    out->tape = tape;
    if (tape != nullptr && out->requires_grad) {
        tape->adopt(out);
        make_backward(out);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise / structural operators
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    return detail::op_node<T>(std::move(out), {a, b}, [&](const NodePtr<T>& o) {
        o->tape->record([a, b, o]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i) a->grad[i] += o->grad[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i) b->grad[i] += o->grad[i];
        });
    });
}

template <typename T>
NodePtr<T> sub(const NodePtr<T>& a, const NodePtr<T>& b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    return detail::op_node<T>(std::move(out), {a, b}, [&](const NodePtr<T>& o) {
        o->tape->record([a, b, o]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i) a->grad[i] += o->grad[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i) b->grad[i] -= o->grad[i];
        });
    });
}

template <typename T>
NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
    require_same_shape(a->value, b->value, "mul");
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    return detail::op_node<T>(std::move(out), {a, b}, [&](const NodePtr<T>& o) {
        o->tape->record([a, b, o]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i)
                    a->grad[i] += o->grad[i] * b->value[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i)
                    b->grad[i] += o->grad[i] * a->value[i];
        });
    });
}

template <typename T>
NodePtr<T> scale(const NodePtr<T>& a, T k) {
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * k;
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o, k]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i) a->grad[i] += o->grad[i] * k;
        });
    });
}

template <typename T>
NodePtr<T> add_scalar(const NodePtr<T>& a, T k) {
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + k;
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o]() {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.numel(); ++i) a->grad[i] += o->grad[i];
        });
    });
}

// max(x, slope*x); the derivative at exactly 0 is slope so tests are
// deterministic.
template <typename T>
NodePtr<T> leaky_relu(const NodePtr<T>& a, T slope) {
    if (!(slope >= T(0) && slope < T(1))) {
        throw ConfigError("leaky_relu slope must satisfy 0 <= slope < 1");
    }
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const T x = a->value[i];
        out[i] = x > T(0) ? x : slope * x;
    }
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o, slope]() {
            if (!a->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.numel(); ++i) {
                a->grad[i] += o->grad[i] * (a->value[i] > T(0) ? T(1) : slope);
            }
        });
    });
}

// Hard clamp to [0,1]; gradient passes through inside the closed interval.
template <typename T>
NodePtr<T> clamp01(const NodePtr<T>& a) {
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = std::min(T(1), std::max(T(0), a->value[i]));
    }
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o]() {
            if (!a->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.numel(); ++i) {
                const T x = a->value[i];
                if (x >= T(0) && x <= T(1)) a->grad[i] += o->grad[i];
            }
        });
    });
}

template <typename T>
NodePtr<T> reshape(const NodePtr<T>& a, Shape s) {
    if (shape_numel(s) != a->value.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(a->value.shape) + " as " +
                             shape_str(s));
    }
    Tensor<T> out(std::move(s), a->value.data);
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o]() {
            if (!a->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.numel(); ++i) a->grad[i] += o->grad[i];
        });
    });
}

template <typename T>
NodePtr<T> sum(const NodePtr<T>& a) {
    T acc = T(0);
    for (std::size_t i = 0; i < a->value.numel(); ++i) acc += a->value[i];
    return detail::op_node<T>(Tensor<T>::scalar(acc), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o]() {
            if (!a->requires_grad) return;
            const T g = o->grad[0];
            for (std::size_t i = 0; i < a->grad.numel(); ++i) a->grad[i] += g;
        });
    });
}

// column means of an [N,d] matrix -> [d]
template <typename T>
NodePtr<T> mean_rows(const NodePtr<T>& a) {
    if (a->value.rank() != 2) {
        throw DimensionError("mean_rows expects a rank-2 input, got " + shape_str(a->value.shape));
    }
    const std::size_t n = a->value.shape[0];
    const std::size_t d = a->value.shape[1];
    if (n == 0) throw UsageError("mean_rows over an empty group");
    Tensor<T> out({d});
    for (std::size_t j = 0; j < d; ++j) {
        T acc = T(0);
        for (std::size_t i = 0; i < n; ++i) acc += a->value.at2(i, j);
        out[j] = acc / static_cast<T>(n);
    }
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o, n, d]() {
            if (!a->requires_grad) return;
            const T inv = T(1) / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) a->grad.at2(i, j) += o->grad[j] * inv;
        });
    });
}

// one row of an [N,d] matrix -> [d]
template <typename T>
NodePtr<T> row(const NodePtr<T>& a, std::size_t i) {
    if (a->value.rank() != 2) {
        throw DimensionError("row expects a rank-2 input, got " + shape_str(a->value.shape));
    }
    const std::size_t n = a->value.shape[0];
    const std::size_t d = a->value.shape[1];
    if (i >= n) throw UsageError("row index out of range");
    Tensor<T> out({d});
    for (std::size_t j = 0; j < d; ++j) out[j] = a->value.at2(i, j);
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o, i, d]() {
            if (!a->requires_grad) return;
            for (std::size_t j = 0; j < d; ++j) a->grad.at2(i, j) += o->grad[j];
        });
    });
}

// per-row squared distance to a fixed-length vector: [N,d] x [d] -> [N]
template <typename T>
NodePtr<T> rows_sqdist(const NodePtr<T>& x, const NodePtr<T>& c) {
    if (x->value.rank() != 2 || c->value.rank() != 1) {
        throw DimensionError("rows_sqdist expects [N,d] and [d], got " +
                             shape_str(x->value.shape) + " and " + shape_str(c->value.shape));
    }
    const std::size_t n = x->value.shape[0];
    const std::size_t d = x->value.shape[1];
    if (c->value.shape[0] != d) {
        throw DimensionError("rows_sqdist: feature axis mismatch, " + shape_str(x->value.shape) +
                             " vs " + shape_str(c->value.shape));
    }
    Tensor<T> out({n});
    for (std::size_t i = 0; i < n; ++i) {
        T acc = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            const T diff = x->value.at2(i, j) - c->value[j];
            acc += diff * diff;
        }
        out[i] = acc;
    }
    return detail::op_node<T>(std::move(out), {x, c}, [&](const NodePtr<T>& o) {
        o->tape->record([x, c, o, n, d]() {
            for (std::size_t i = 0; i < n; ++i) {
                const T g2 = T(2) * o->grad[i];
                for (std::size_t j = 0; j < d; ++j) {
                    const T diff = x->value.at2(i, j) - c->value[j];
                    if (x->requires_grad) x->grad.at2(i, j) += g2 * diff;
                    if (c->requires_grad) c->grad[j] -= g2 * diff;
                }
            }
        });
    });
}

// elementwise 1/(x + eps)
template <typename T>
NodePtr<T> inv_guarded(const NodePtr<T>& a, T eps) {
    Tensor<T> out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (a->value[i] + eps);
    return detail::op_node<T>(std::move(out), {a}, [&](const NodePtr<T>& o) {
        o->tape->record([a, o, eps]() {
            if (!a->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.numel(); ++i) {
                const T denom = a->value[i] + eps;
                a->grad[i] -= o->grad[i] / (denom * denom);
            }
        });
    });
}

// ---------------------------------------------------------------------------
// linear algebra operators
// ---------------------------------------------------------------------------

// [N,F] x [F,D] -> [N,D], no bias
template <typename T>
NodePtr<T> dense(const NodePtr<T>& x, const NodePtr<T>& w) {
    if (x->value.rank() != 2 || w->value.rank() != 2) {
        throw DimensionError("dense expects rank-2 operands, got " + shape_str(x->value.shape) +
                             " and " + shape_str(w->value.shape));
    }
    const std::size_t n = x->value.shape[0];
    const std::size_t f = x->value.shape[1];
    const std::size_t d = w->value.shape[1];
    if (w->value.shape[0] != f) {
        throw DimensionError("dense: inner axis mismatch, input " + shape_str(x->value.shape) +
                             " vs weight " + shape_str(w->value.shape));
    }
    Tensor<T> out({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < f; ++k) {
            const T xv = x->value.at2(i, k);
            if (xv == T(0)) continue;
            for (std::size_t j = 0; j < d; ++j) out.at2(i, j) += xv * w->value.at2(k, j);
        }
    }
    return detail::op_node<T>(std::move(out), {x, w}, [&](const NodePtr<T>& o) {
        o->tape->record([x, w, o, n, f, d]() {
            if (x->requires_grad) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                        const T g = o->grad.at2(i, j);
                        if (g == T(0)) continue;
                        for (std::size_t k = 0; k < f; ++k)
                            x->grad.at2(i, k) += g * w->value.at2(k, j);
                    }
            }
            if (w->requires_grad) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = 0; k < f; ++k) {
                        const T xv = x->value.at2(i, k);
                        if (xv == T(0)) continue;
                        for (std::size_t j = 0; j < d; ++j)
                            w->grad.at2(k, j) += xv * o->grad.at2(i, j);
                    }
            }
        });
    });
}

// [N,Cin,H,W] * [Cout,Cin,kH,kW] -> [N,Cout,H',W'], zero padding, no bias
template <typename T>
NodePtr<T> conv2d(const NodePtr<T>& x, const NodePtr<T>& w, int stride, int padding) {
    if (x->value.rank() != 4 || w->value.rank() != 4) {
        throw DimensionError("conv2d expects rank-4 operands, got " + shape_str(x->value.shape) +
                             " and " + shape_str(w->value.shape));
    }
    if (stride < 1) throw ConfigError("conv2d stride must be >= 1");
    if (padding < 0) throw ConfigError("conv2d padding must be >= 0");
    const std::size_t n = x->value.shape[0], cin = x->value.shape[1];
    const std::size_t h = x->value.shape[2], wd = x->value.shape[3];
    const std::size_t cout = w->value.shape[0], kh = w->value.shape[2], kw = w->value.shape[3];
    if (w->value.shape[1] != cin) {
        throw DimensionError("conv2d: channel axis mismatch, input has " + std::to_string(cin) +
                             " channels, kernel expects " + std::to_string(w->value.shape[1]));
    }
    const std::size_t ph = h + 2 * static_cast<std::size_t>(padding);
    const std::size_t pw = wd + 2 * static_cast<std::size_t>(padding);
    if (kh > ph) {
        throw DimensionError("conv2d: kernel height " + std::to_string(kh) +
                             " exceeds padded input height " + std::to_string(ph));
    }
    if (kw > pw) {
        throw DimensionError("conv2d: kernel width " + std::to_string(kw) +
                             " exceeds padded input width " + std::to_string(pw));
    }
    if ((ph - kh) % static_cast<std::size_t>(stride) != 0) {
        throw ConfigError("conv2d: non-integer output height for stride " +
                          std::to_string(stride));
    }
    if ((pw - kw) % static_cast<std::size_t>(stride) != 0) {
        throw ConfigError("conv2d: non-integer output width for stride " + std::to_string(stride));
    }
    const std::size_t ho = (ph - kh) / static_cast<std::size_t>(stride) + 1;
    const std::size_t wo = (pw - kw) / static_cast<std::size_t>(stride) + 1;

    Tensor<T> out({n, cout, ho, wo});
    const std::ptrdiff_t pad = padding;
    const std::ptrdiff_t st = stride;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t co = 0; co < cout; ++co) {
            for (std::size_t ci = 0; ci < cin; ++ci) {
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        T acc = T(0);
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy) * st + static_cast<std::ptrdiff_t>(ky) - pad;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox) * st + static_cast<std::ptrdiff_t>(kx) - pad;
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                                acc += x->value.at4(b, ci, static_cast<std::size_t>(iy),
                                                    static_cast<std::size_t>(ix)) *
                                       w->value.at4(co, ci, ky, kx);
                            }
                        }
                        out.at4(b, co, oy, ox) += acc;
                    }
                }
            }
        }
    }
    return detail::op_node<T>(std::move(out), {x, w}, [&](const NodePtr<T>& o) {
        o->tape->record([x, w, o, n, cin, cout, h, wd, kh, kw, pad, st]() {
            const std::size_t ho = o->grad.shape[2], wo = o->grad.shape[3];
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t co = 0; co < cout; ++co) {
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        for (std::size_t oy = 0; oy < ho; ++oy) {
                            for (std::size_t ox = 0; ox < wo; ++ox) {
                                const T g = o->grad.at4(b, co, oy, ox);
                                if (g == T(0)) continue;
                                for (std::size_t ky = 0; ky < kh; ++ky) {
                                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * st +
                                                              static_cast<std::ptrdiff_t>(ky) - pad;
                                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                    for (std::size_t kx = 0; kx < kw; ++kx) {
                                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * st +
                                                                  static_cast<std::ptrdiff_t>(kx) - pad;
                                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                                        const auto uy = static_cast<std::size_t>(iy);
                                        const auto ux = static_cast<std::size_t>(ix);
                                        if (x->requires_grad)
                                            x->grad.at4(b, ci, uy, ux) += g * w->value.at4(co, ci, ky, kx);
                                        if (w->requires_grad)
                                            w->grad.at4(co, ci, ky, kx) += g * x->value.at4(b, ci, uy, ux);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    });
}

// window max pooling with exact division; gradient goes to the lowest flat
// index among tied maxima
template <typename T>
NodePtr<T> maxpool2d(const NodePtr<T>& x, int window, int stride) {
    if (x->value.rank() != 4) {
        throw DimensionError("maxpool2d expects a rank-4 input, got " + shape_str(x->value.shape));
    }
    if (window < 1 || stride < 1) throw ConfigError("maxpool2d window and stride must be >= 1");
    const std::size_t n = x->value.shape[0], c = x->value.shape[1];
    const std::size_t h = x->value.shape[2], wd = x->value.shape[3];
    const auto wnd = static_cast<std::size_t>(window);
    const auto st = static_cast<std::size_t>(stride);
    if (h < wnd || wd < wnd || (h - wnd) % st != 0 || (wd - wnd) % st != 0) {
        throw ConfigError("maxpool2d: input " + shape_str(x->value.shape) +
                          " does not divide exactly for window " + std::to_string(window) +
                          " stride " + std::to_string(stride));
    }
    const std::size_t ho = (h - wnd) / st + 1;
    const std::size_t wo = (wd - wnd) / st + 1;

    Tensor<T> out({n, c, ho, wo});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
    std::size_t oi = 0;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t oy = 0; oy < ho; ++oy) {
                for (std::size_t ox = 0; ox < wo; ++ox, ++oi) {
                    T best = x->value.at4(b, ch, oy * st, ox * st);
                    std::size_t best_flat =
                        ((b * c + ch) * h + oy * st) * wd + ox * st;
                    for (std::size_t ky = 0; ky < wnd; ++ky) {
                        for (std::size_t kx = 0; kx < wnd; ++kx) {
                            const std::size_t iy = oy * st + ky;
                            const std::size_t ix = ox * st + kx;
                            const T v = x->value.at4(b, ch, iy, ix);
                            if (v > best) {
                                best = v;
                                best_flat = ((b * c + ch) * h + iy) * wd + ix;
                            }
                        }
                    }
                    out[oi] = best;
                    (*argmax)[oi] = best_flat;
                }
            }
        }
    }
    return detail::op_node<T>(std::move(out), {x}, [&](const NodePtr<T>& o) {
        o->tape->record([x, o, argmax]() {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.numel(); ++i) {
                x->grad[(*argmax)[i]] += o->grad[i];
            }
        });
    });
}

// nearest-neighbor 2x upsampling
template <typename T>
NodePtr<T> upsample2x(const NodePtr<T>& x) {
    if (x->value.rank() != 4) {
        throw DimensionError("upsample2x expects a rank-4 input, got " + shape_str(x->value.shape));
    }
    const std::size_t n = x->value.shape[0], c = x->value.shape[1];
    const std::size_t h = x->value.shape[2], wd = x->value.shape[3];
    Tensor<T> out({n, c, 2 * h, 2 * wd});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < 2 * h; ++y)
                for (std::size_t xx = 0; xx < 2 * wd; ++xx)
                    out.at4(b, ch, y, xx) = x->value.at4(b, ch, y / 2, xx / 2);
    return detail::op_node<T>(std::move(out), {x}, [&](const NodePtr<T>& o) {
        o->tape->record([x, o, n, c, h, wd]() {
            if (!x->requires_grad) return;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t y = 0; y < 2 * h; ++y)
                        for (std::size_t xx = 0; xx < 2 * wd; ++xx)
                            x->grad.at4(b, ch, y / 2, xx / 2) += o->grad.at4(b, ch, y, xx);
        });
    });
}

// ---------------------------------------------------------------------------
// reductions used by the objectives
// ---------------------------------------------------------------------------

// a.b / (max(|a|,eps) * max(|b|,eps)), clamped to [-1,1]
template <typename T>
NodePtr<T> cosine_similarity(const NodePtr<T>& a, const NodePtr<T>& b, T eps) {
    if (a->value.rank() != 1 || b->value.rank() != 1 ||
        a->value.shape[0] != b->value.shape[0]) {
        throw DimensionError("cosine_similarity expects equal-length vectors, got " +
                             shape_str(a->value.shape) + " and " + shape_str(b->value.shape));
    }
    if (!(eps > T(0))) throw ConfigError("cosine_similarity eps must be > 0");
    const std::size_t d = a->value.shape[0];
    T dot = T(0), na2 = T(0), nb2 = T(0);
    for (std::size_t i = 0; i < d; ++i) {
        dot += a->value[i] * b->value[i];
        na2 += a->value[i] * a->value[i];
        nb2 += b->value[i] * b->value[i];
    }
    const T na = std::sqrt(na2), nb = std::sqrt(nb2);
    const T ga = std::max(na, eps), gb = std::max(nb, eps);
    const T raw = dot / (ga * gb);
    const T clamped = std::min(T(1), std::max(T(-1), raw));
    return detail::op_node<T>(Tensor<T>::scalar(clamped), {a, b}, [&](const NodePtr<T>& o) {
        o->tape->record([a, b, o, d, na, nb, ga, gb, raw, eps]() {
            const T g = o->grad[0];
            const T inv = T(1) / (ga * gb);
            for (std::size_t i = 0; i < d; ++i) {
                if (a->requires_grad) {
                    T da = b->value[i] * inv;
                    if (na > eps) da -= raw * a->value[i] / (na * na);
                    a->grad[i] += g * da;
                }
                if (b->requires_grad) {
                    T db = a->value[i] * inv;
                    if (nb > eps) db -= raw * b->value[i] / (nb * nb);
                    b->grad[i] += g * db;
                }
            }
        });
    });
}

// sum_i (a_i - b_i)^2 as a scalar node
template <typename T>
NodePtr<T> squared_l2_distance(const NodePtr<T>& a, const NodePtr<T>& b) {
    if (a->value.rank() != 1 || b->value.rank() != 1 ||
        a->value.shape[0] != b->value.shape[0]) {
        throw DimensionError("squared_l2_distance expects equal-length vectors, got " +
                             shape_str(a->value.shape) + " and " + shape_str(b->value.shape));
    }
    const std::size_t d = a->value.shape[0];
    T acc = T(0);
    for (std::size_t i = 0; i < d; ++i) {
        const T diff = a->value[i] - b->value[i];
        acc += diff * diff;
    }
    return detail::op_node<T>(Tensor<T>::scalar(acc), {a, b}, [&](const NodePtr<T>& o) {
        o->tape->record([a, b, o, d]() {
            const T g2 = T(2) * o->grad[0];
            for (std::size_t i = 0; i < d; ++i) {
                const T diff = a->value[i] - b->value[i];
                if (a->requires_grad) a->grad[i] += g2 * diff;
                if (b->requires_grad) b->grad[i] -= g2 * diff;
            }
        });
    });
}

template <typename T>
T scalar_value(const NodePtr<T>& n) {
    if (n->value.numel() != 1) {
        throw UsageError("expected a scalar node, got shape " + shape_str(n->value.shape));
    }
    return n->value[0];
}

}  // namespace badsad
