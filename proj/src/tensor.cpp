#include "epivox/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace epivox::ad {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (const auto d : shape) {
        if (d <= 0) throw ShapeMismatch("non-positive dimension in " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeMismatch("data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::zeros(const Shape& s) {
    return Tensor(s, std::vector<double>(shape_numel(s), 0.0));
}

Tensor Tensor::full(const Shape& s, double v) {
    return Tensor(s, std::vector<double>(shape_numel(s), v));
}

double Tensor::scalar() const {
    if (numel() != 1) throw ShapeMismatch("scalar() on tensor " + shape_str(shape));
    return data[0];
}

void check_finite(const Tensor& t, const char* op) {
    for (const double v : t.data) {
        if (!std::isfinite(v)) {
            throw NonFiniteValue(std::string(op) + " produced a non-finite value");
        }
    }
}

namespace {

void add_inplace(Tensor& dst, const Tensor& src) {
    if (!dst.same_shape(src)) {
        throw ShapeMismatch("gradient accumulation shape mismatch");
    }
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

bool any_tracked(std::initializer_list<int> nodes) {
    for (const int n : nodes) {
        if (n >= 0) return true;
    }
    return false;
}

}  // namespace

// ---- Tape ------------------------------------------------------------------

Tensor Tape::leaf(const Tensor& t) {
    Tensor out = t;
    nodes_.push_back({{}, t.shape, nullptr});
    out.node = static_cast<int>(nodes_.size()) - 1;
    return out;
}

int Tape::record(std::vector<int> inputs, Shape out_shape, VjpFn vjp) {
    nodes_.push_back({std::move(inputs), std::move(out_shape), std::move(vjp)});
    return static_cast<int>(nodes_.size()) - 1;
}

std::unordered_map<int, Tensor> Tape::backward(int loss_node) const {
    if (loss_node < 0 || loss_node >= static_cast<int>(nodes_.size())) {
        throw NotScalarLoss("loss node is not on this tape");
    }
    if (shape_numel(nodes_[loss_node].shape) != 1) {
        throw NotScalarLoss("loss must be scalar, got " +
                            shape_str(nodes_[loss_node].shape));
    }
    std::unordered_map<int, Tensor> grads;
    grads.emplace(loss_node, Tensor::full(nodes_[loss_node].shape, 1.0));

    for (int id = loss_node; id >= 0; --id) {
        const auto it = grads.find(id);
        if (it == grads.end()) continue;
        const Node& node = nodes_[id];
        if (!node.vjp) continue;  // leaf: keep the gradient in the result
        const std::vector<Tensor> gin = node.vjp(it->second);
        if (gin.size() != node.inputs.size()) {
            throw Error("Internal", "vjp arity mismatch");
        }
        for (std::size_t i = 0; i < gin.size(); ++i) {
            const int in = node.inputs[i];
            if (in < 0) continue;
            const auto git = grads.find(in);
            if (git == grads.end()) {
                grads.emplace(in, gin[i]);
            } else {
                add_inplace(git->second, gin[i]);
            }
        }
        grads.erase(id);
    }
    return grads;
}

// ---- conv2d ------------------------------------------------------------

namespace {

std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, std::int64_t s,
                          std::int64_t p, const char* op) {
    const std::int64_t span = in + 2 * p - k;
    if (span < 0 || span % s != 0) {
        throw ShapeMismatch(std::string(op) + ": output dim not integral (in=" +
                            std::to_string(in) + " k=" + std::to_string(k) + " s=" +
                            std::to_string(s) + " p=" + std::to_string(p) + ")");
    }
    return span / s + 1;
}

struct Conv2dDims {
    std::int64_t ci, h, w, co, kh, kw, oh, ow;
    std::int64_t s, p;
};

Conv2dDims conv2d_dims(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                       int pad) {
    if (x.shape.size() != 3) throw ShapeMismatch("conv2d input must be [C,H,W]");
    if (w.shape.size() != 4) throw ShapeMismatch("conv2d weights must be [Co,Ci,kh,kw]");
    if (stride < 1 || pad < 0) throw ShapeMismatch("conv2d bad stride/pad");
    Conv2dDims d;
    d.ci = x.shape[0]; d.h = x.shape[1]; d.w = x.shape[2];
    d.co = w.shape[0]; d.kh = w.shape[2]; d.kw = w.shape[3];
    d.s = stride; d.p = pad;
    if (w.shape[1] != d.ci) {
        throw ShapeMismatch("conv2d channel mismatch: input " + shape_str(x.shape) +
                            " vs weights " + shape_str(w.shape));
    }
    if (b.numel() != 0 && (b.shape.size() != 1 || b.shape[0] != d.co)) {
        throw ShapeMismatch("conv2d bias must be [Co]");
    }
    d.oh = conv_out_dim(d.h, d.kh, d.s, d.p, "conv2d");
    d.ow = conv_out_dim(d.w, d.kw, d.s, d.p, "conv2d");
    return d;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      const Conv2dDims& d) {
    Tensor out = Tensor::zeros({d.co, d.oh, d.ow});
    const double* px = x.data.data();
    const double* pw = w.data.data();
    double* po = out.data.data();
    for (std::int64_t co = 0; co < d.co; ++co) {
        const double bias = b.numel() ? b.data[co] : 0.0;
        for (std::int64_t oh = 0; oh < d.oh; ++oh) {
            for (std::int64_t ow = 0; ow < d.ow; ++ow) {
                double acc = bias;
                for (std::int64_t ci = 0; ci < d.ci; ++ci) {
                    const double* wrow = pw + ((co * d.ci + ci) * d.kh) * d.kw;
                    for (std::int64_t kh = 0; kh < d.kh; ++kh) {
                        const std::int64_t ih = oh * d.s - d.p + kh;
                        if (ih < 0 || ih >= d.h) continue;
                        const double* xrow = px + (ci * d.h + ih) * d.w;
                        const double* wk = wrow + kh * d.kw;
                        for (std::int64_t kw = 0; kw < d.kw; ++kw) {
                            const std::int64_t iw = ow * d.s - d.p + kw;
                            if (iw < 0 || iw >= d.w) continue;
                            acc += xrow[iw] * wk[kw];
                        }
                    }
                }
                po[(co * d.oh + oh) * d.ow + ow] = acc;
            }
        }
    }
    return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
              Tape* tape) {
    const Conv2dDims d = conv2d_dims(x, w, b, stride, pad);
    Tensor out = conv2d_forward(x, w, b, d);
    check_finite(out, "conv2d");
    if (tape && any_tracked({x.node, w.node, b.node})) {
        const bool need_x = x.node >= 0, need_w = w.node >= 0, need_b = b.node >= 0;
        const Tensor xs = x, ws = w;
        auto vjp = [xs, ws, d, need_x, need_w, need_b](const Tensor& g) {
            Tensor gx = need_x ? Tensor::zeros(xs.shape) : Tensor{};
            Tensor gw = need_w ? Tensor::zeros(ws.shape) : Tensor{};
            Tensor gb = need_b ? Tensor::zeros({d.co}) : Tensor{};
            for (std::int64_t co = 0; co < d.co; ++co) {
                for (std::int64_t oh = 0; oh < d.oh; ++oh) {
                    for (std::int64_t ow = 0; ow < d.ow; ++ow) {
                        const double go = g.data[(co * d.oh + oh) * d.ow + ow];
                        if (need_b) gb.data[co] += go;
                        for (std::int64_t ci = 0; ci < d.ci; ++ci) {
                            for (std::int64_t kh = 0; kh < d.kh; ++kh) {
                                const std::int64_t ih = oh * d.s - d.p + kh;
                                if (ih < 0 || ih >= d.h) continue;
                                for (std::int64_t kw = 0; kw < d.kw; ++kw) {
                                    const std::int64_t iw = ow * d.s - d.p + kw;
                                    if (iw < 0 || iw >= d.w) continue;
                                    const std::size_t xi = (ci * d.h + ih) * d.w + iw;
                                    const std::size_t wi =
                                        ((co * d.ci + ci) * d.kh + kh) * d.kw + kw;
                                    if (need_x) gx.data[xi] += go * ws.data[wi];
                                    if (need_w) gw.data[wi] += go * xs.data[xi];
                                }
                            }
                        }
                    }
                }
            }
            return std::vector<Tensor>{std::move(gx), std::move(gw), std::move(gb)};
        };
        out.node = tape->record({x.node, w.node, b.node}, out.shape, std::move(vjp));
    }
    return out;
}

// ---- conv3d ------------------------------------------------------------

namespace {

struct Conv3dDims {
    std::int64_t ci, id, ih, iw, co, kd, kh, kw, od, oh, ow;
    std::array<int, 3> s, p;
};

Conv3dDims conv3d_dims(const Tensor& x, const Tensor& w, const Tensor& b,
                       std::array<int, 3> stride, std::array<int, 3> pad) {
    if (x.shape.size() != 4) throw ShapeMismatch("conv3d input must be [C,D,H,W]");
    if (w.shape.size() != 5) {
        throw ShapeMismatch("conv3d weights must be [Co,Ci,kd,kh,kw]");
    }
    Conv3dDims d;
    d.ci = x.shape[0]; d.id = x.shape[1]; d.ih = x.shape[2]; d.iw = x.shape[3];
    d.co = w.shape[0]; d.kd = w.shape[2]; d.kh = w.shape[3]; d.kw = w.shape[4];
    d.s = stride; d.p = pad;
    if (w.shape[1] != d.ci) {
        throw ShapeMismatch("conv3d channel mismatch: input " + shape_str(x.shape) +
                            " vs weights " + shape_str(w.shape));
    }
    if (b.numel() != 0 && (b.shape.size() != 1 || b.shape[0] != d.co)) {
        throw ShapeMismatch("conv3d bias must be [Co]");
    }
    d.od = conv_out_dim(d.id, d.kd, stride[0], pad[0], "conv3d");
    d.oh = conv_out_dim(d.ih, d.kh, stride[1], pad[1], "conv3d");
    d.ow = conv_out_dim(d.iw, d.kw, stride[2], pad[2], "conv3d");
    return d;
}

Tensor conv3d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      const Conv3dDims& d) {
    Tensor out = Tensor::zeros({d.co, d.od, d.oh, d.ow});
    for (std::int64_t co = 0; co < d.co; ++co) {
        const double bias = b.numel() ? b.data[co] : 0.0;
        for (std::int64_t od = 0; od < d.od; ++od) {
            for (std::int64_t oh = 0; oh < d.oh; ++oh) {
                for (std::int64_t ow = 0; ow < d.ow; ++ow) {
                    double acc = bias;
                    for (std::int64_t ci = 0; ci < d.ci; ++ci) {
                        for (std::int64_t kd = 0; kd < d.kd; ++kd) {
                            const std::int64_t zd = od * d.s[0] - d.p[0] + kd;
                            if (zd < 0 || zd >= d.id) continue;
                            for (std::int64_t kh = 0; kh < d.kh; ++kh) {
                                const std::int64_t zh = oh * d.s[1] - d.p[1] + kh;
                                if (zh < 0 || zh >= d.ih) continue;
                                const double* xrow =
                                    x.data.data() + ((ci * d.id + zd) * d.ih + zh) * d.iw;
                                const double* wrow =
                                    w.data.data() +
                                    (((co * d.ci + ci) * d.kd + kd) * d.kh + kh) * d.kw;
                                for (std::int64_t kw = 0; kw < d.kw; ++kw) {
                                    const std::int64_t zw = ow * d.s[2] - d.p[2] + kw;
                                    if (zw < 0 || zw >= d.iw) continue;
                                    acc += xrow[zw] * wrow[kw];
                                }
                            }
                        }
                    }
                    out.data[((co * d.od + od) * d.oh + oh) * d.ow + ow] = acc;
                }
            }
        }
    }
    return out;
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::array<int, 3> stride, std::array<int, 3> pad, Tape* tape) {
    const Conv3dDims d = conv3d_dims(x, w, b, stride, pad);
    Tensor out = conv3d_forward(x, w, b, d);
    check_finite(out, "conv3d");
    if (tape && any_tracked({x.node, w.node, b.node})) {
        const bool need_x = x.node >= 0, need_w = w.node >= 0, need_b = b.node >= 0;
        const Tensor xs = x, ws = w;
        auto vjp = [xs, ws, d, need_x, need_w, need_b](const Tensor& g) {
            Tensor gx = need_x ? Tensor::zeros(xs.shape) : Tensor{};
            Tensor gw = need_w ? Tensor::zeros(ws.shape) : Tensor{};
            Tensor gb = need_b ? Tensor::zeros({d.co}) : Tensor{};
            for (std::int64_t co = 0; co < d.co; ++co) {
                for (std::int64_t od = 0; od < d.od; ++od) {
                    for (std::int64_t oh = 0; oh < d.oh; ++oh) {
                        for (std::int64_t ow = 0; ow < d.ow; ++ow) {
                            const double go =
                                g.data[((co * d.od + od) * d.oh + oh) * d.ow + ow];
                            if (need_b) gb.data[co] += go;
                            for (std::int64_t ci = 0; ci < d.ci; ++ci) {
                                for (std::int64_t kd = 0; kd < d.kd; ++kd) {
                                    const std::int64_t zd = od * d.s[0] - d.p[0] + kd;
                                    if (zd < 0 || zd >= d.id) continue;
                                    for (std::int64_t kh = 0; kh < d.kh; ++kh) {
                                        const std::int64_t zh = oh * d.s[1] - d.p[1] + kh;
                                        if (zh < 0 || zh >= d.ih) continue;
                                        for (std::int64_t kw = 0; kw < d.kw; ++kw) {
                                            const std::int64_t zw =
                                                ow * d.s[2] - d.p[2] + kw;
                                            if (zw < 0 || zw >= d.iw) continue;
                                            const std::size_t xi =
                                                ((ci * d.id + zd) * d.ih + zh) * d.iw + zw;
                                            const std::size_t wi =
                                                (((co * d.ci + ci) * d.kd + kd) * d.kh +
                                                 kh) * d.kw + kw;
                                            if (need_x) gx.data[xi] += go * ws.data[wi];
                                            if (need_w) gw.data[wi] += go * xs.data[xi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            return std::vector<Tensor>{std::move(gx), std::move(gw), std::move(gb)};
        };
        out.node = tape->record({x.node, w.node, b.node}, out.shape, std::move(vjp));
    }
    return out;
}

// ---- conv_transpose3d ----------------------------------------------------

namespace {

struct ConvT3dDims {
    std::int64_t ci, id, ih, iw, co, kd, kh, kw, od, oh, ow;
    std::array<int, 3> s, p;
};

std::int64_t convt_out_dim(std::int64_t in, std::int64_t k, std::int64_t s,
                           std::int64_t p) {
    const std::int64_t out = (in - 1) * s - 2 * p + k;
    if (out < 1) {
        throw ShapeMismatch("conv_transpose3d: non-positive output dim");
    }
    return out;
}

ConvT3dDims convt3d_dims(const Tensor& x, const Tensor& w, const Tensor& b,
                         std::array<int, 3> stride, std::array<int, 3> pad) {
    if (x.shape.size() != 4) {
        throw ShapeMismatch("conv_transpose3d input must be [C,D,H,W]");
    }
    if (w.shape.size() != 5) {
        throw ShapeMismatch("conv_transpose3d weights must be [Ci,Co,kd,kh,kw]");
    }
    ConvT3dDims d;
    d.ci = x.shape[0]; d.id = x.shape[1]; d.ih = x.shape[2]; d.iw = x.shape[3];
    d.co = w.shape[1]; d.kd = w.shape[2]; d.kh = w.shape[3]; d.kw = w.shape[4];
    d.s = stride; d.p = pad;
    if (w.shape[0] != d.ci) {
        throw ShapeMismatch("conv_transpose3d channel mismatch: input " +
                            shape_str(x.shape) + " vs weights " + shape_str(w.shape));
    }
    if (b.numel() != 0 && (b.shape.size() != 1 || b.shape[0] != d.co)) {
        throw ShapeMismatch("conv_transpose3d bias must be [Co]");
    }
    d.od = convt_out_dim(d.id, d.kd, stride[0], pad[0]);
    d.oh = convt_out_dim(d.ih, d.kh, stride[1], pad[1]);
    d.ow = convt_out_dim(d.iw, d.kw, stride[2], pad[2]);
    return d;
}

Tensor convt3d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                       const ConvT3dDims& d) {
    Tensor out = Tensor::zeros({d.co, d.od, d.oh, d.ow});
    if (b.numel()) {
        for (std::int64_t co = 0; co < d.co; ++co) {
            const double bias = b.data[co];
            double* po = out.data.data() + co * d.od * d.oh * d.ow;
            for (std::int64_t i = 0; i < d.od * d.oh * d.ow; ++i) po[i] = bias;
        }
    }
    // scatter with a fixed loop nest, so accumulation order is deterministic
    for (std::int64_t ci = 0; ci < d.ci; ++ci) {
        for (std::int64_t id = 0; id < d.id; ++id) {
            for (std::int64_t ih = 0; ih < d.ih; ++ih) {
                for (std::int64_t iw = 0; iw < d.iw; ++iw) {
                    const double v =
                        x.data[((ci * d.id + id) * d.ih + ih) * d.iw + iw];
                    for (std::int64_t co = 0; co < d.co; ++co) {
                        for (std::int64_t kd = 0; kd < d.kd; ++kd) {
                            const std::int64_t od = id * d.s[0] - d.p[0] + kd;
                            if (od < 0 || od >= d.od) continue;
                            for (std::int64_t kh = 0; kh < d.kh; ++kh) {
                                const std::int64_t oh = ih * d.s[1] - d.p[1] + kh;
                                if (oh < 0 || oh >= d.oh) continue;
                                for (std::int64_t kw = 0; kw < d.kw; ++kw) {
                                    const std::int64_t ow = iw * d.s[2] - d.p[2] + kw;
                                    if (ow < 0 || ow >= d.ow) continue;
                                    out.data[((co * d.od + od) * d.oh + oh) * d.ow + ow] +=
                                        v * w.data[(((ci * d.co + co) * d.kd + kd) * d.kh +
                                                    kh) * d.kw + kw];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor& b,
                        std::array<int, 3> stride, std::array<int, 3> pad, Tape* tape) {
    const ConvT3dDims d = convt3d_dims(x, w, b, stride, pad);
    Tensor out = convt3d_forward(x, w, b, d);
    check_finite(out, "conv_transpose3d");
    if (tape && any_tracked({x.node, w.node, b.node})) {
        const bool need_x = x.node >= 0, need_w = w.node >= 0, need_b = b.node >= 0;
        const Tensor xs = x, ws = w;
        auto vjp = [xs, ws, d, need_x, need_w, need_b](const Tensor& g) {
            Tensor gx = need_x ? Tensor::zeros(xs.shape) : Tensor{};
            Tensor gw = need_w ? Tensor::zeros(ws.shape) : Tensor{};
            Tensor gb = need_b ? Tensor::zeros({d.co}) : Tensor{};
            if (need_b) {
                for (std::int64_t co = 0; co < d.co; ++co) {
                    const double* pg = g.data.data() + co * d.od * d.oh * d.ow;
                    for (std::int64_t i = 0; i < d.od * d.oh * d.ow; ++i) {
                        gb.data[co] += pg[i];
                    }
                }
            }
            for (std::int64_t ci = 0; ci < d.ci; ++ci) {
                for (std::int64_t id = 0; id < d.id; ++id) {
                    for (std::int64_t ih = 0; ih < d.ih; ++ih) {
                        for (std::int64_t iw = 0; iw < d.iw; ++iw) {
                            const std::size_t xi =
                                ((ci * d.id + id) * d.ih + ih) * d.iw + iw;
                            double acc = 0.0;
                            for (std::int64_t co = 0; co < d.co; ++co) {
                                for (std::int64_t kd = 0; kd < d.kd; ++kd) {
                                    const std::int64_t od = id * d.s[0] - d.p[0] + kd;
                                    if (od < 0 || od >= d.od) continue;
                                    for (std::int64_t kh = 0; kh < d.kh; ++kh) {
                                        const std::int64_t oh = ih * d.s[1] - d.p[1] + kh;
                                        if (oh < 0 || oh >= d.oh) continue;
                                        for (std::int64_t kw = 0; kw < d.kw; ++kw) {
                                            const std::int64_t ow =
                                                iw * d.s[2] - d.p[2] + kw;
                                            if (ow < 0 || ow >= d.ow) continue;
                                            const double go =
                                                g.data[((co * d.od + od) * d.oh + oh) *
                                                           d.ow + ow];
                                            const std::size_t wi =
                                                (((ci * d.co + co) * d.kd + kd) * d.kh +
                                                 kh) * d.kw + kw;
                                            if (need_x) acc += go * ws.data[wi];
                                            if (need_w) gw.data[wi] += go * xs.data[xi];
                                        }
                                    }
                                }
                            }
                            if (need_x) gx.data[xi] = acc;
                        }
                    }
                }
            }
            return std::vector<Tensor>{std::move(gx), std::move(gw), std::move(gb)};
        };
        out.node = tape->record({x.node, w.node, b.node}, out.shape, std::move(vjp));
    }
    return out;
}

// ---- maxpool -------------------------------------------------------------

Tensor maxpool2d(const Tensor& x, int window, int stride, Tape* tape) {
    if (x.shape.size() != 3) throw ShapeMismatch("maxpool2d input must be [C,H,W]");
    if (window < 1 || stride < 1) throw ShapeMismatch("maxpool2d bad window/stride");
    const std::int64_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    const std::int64_t oh = conv_out_dim(h, window, stride, 0, "maxpool2d");
    const std::int64_t ow = conv_out_dim(w, window, stride, 0, "maxpool2d");

    Tensor out = Tensor::zeros({c, oh, ow});
    std::vector<std::size_t> argmax(out.data.size());
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t i = 0; i < oh; ++i) {
            for (std::int64_t j = 0; j < ow; ++j) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (int kh = 0; kh < window; ++kh) {
                    for (int kw = 0; kw < window; ++kw) {
                        const std::size_t xi =
                            (ci * h + i * stride + kh) * w + j * stride + kw;
                        if (x.data[xi] > best) {  // ties keep the lowest index
                            best = x.data[xi];
                            best_idx = xi;
                        }
                    }
                }
                const std::size_t oi = (ci * oh + i) * ow + j;
                out.data[oi] = best;
                argmax[oi] = best_idx;
            }
        }
    }
    check_finite(out, "maxpool2d");
    if (tape && x.node >= 0) {
        const Shape xshape = x.shape;
        auto vjp = [xshape, argmax](const Tensor& g) {
            Tensor gx = Tensor::zeros(xshape);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                gx.data[argmax[i]] += g.data[i];
            }
            return std::vector<Tensor>{std::move(gx)};
        };
        out.node = tape->record({x.node}, out.shape, std::move(vjp));
    }
    return out;
}

// ---- elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename Dfn>
Tensor unary_op(const Tensor& x, Tape* tape, const char* name, Fwd fwd, Dfn dfn) {
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = fwd(x.data[i]);
    check_finite(out, name);
    if (tape && x.node >= 0) {
        const Tensor xs = x;
        auto vjp = [xs, dfn](const Tensor& g) {
            Tensor gx = Tensor::zeros(xs.shape);
            for (std::size_t i = 0; i < gx.data.size(); ++i) {
                gx.data[i] = g.data[i] * dfn(xs.data[i]);
            }
            return std::vector<Tensor>{std::move(gx)};
        };
        out.node = tape->record({x.node}, out.shape, std::move(vjp));
    }
    return out;
}

double stable_sigmoid(double v) {
    if (v >= 0) {
        const double t = std::exp(-v);
        return 1.0 / (1.0 + t);
    }
    const double t = std::exp(v);
    return t / (1.0 + t);
}

}  // namespace

Tensor relu(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, "relu", [](double v) { return v > 0 ? v : 0.0; },
        [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& x, double alpha, Tape* tape) {
    return unary_op(
        x, tape, "elu",
        [alpha](double v) { return v > 0 ? v : alpha * (std::exp(v) - 1.0); },
        [alpha](double v) { return v > 0 ? 1.0 : alpha * std::exp(v); });
}

Tensor sigmoid(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, "sigmoid", [](double v) { return stable_sigmoid(v); },
        [](double v) {
            const double y = stable_sigmoid(v);
            return y * (1.0 - y);
        });
}

Tensor logit(const Tensor& x, Tape* tape) {
    static constexpr double lo = 1e-6, hi = 1.0 - 1e-6;
    return unary_op(
        x, tape, "logit",
        [](double v) {
            const double c = std::clamp(v, lo, hi);
            return std::log(c / (1.0 - c));
        },
        [](double v) { return (v < lo || v > hi) ? 0.0 : 1.0 / (v * (1.0 - v)); });
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch("add: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    Tensor out = Tensor::zeros(a.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    check_finite(out, "add");
    if (tape && any_tracked({a.node, b.node})) {
        auto vjp = [](const Tensor& g) { return std::vector<Tensor>{g, g}; };
        out.node = tape->record({a.node, b.node}, out.shape, std::move(vjp));
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch("mul: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    Tensor out = Tensor::zeros(a.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    check_finite(out, "mul");
    if (tape && any_tracked({a.node, b.node})) {
        const Tensor as = a, bs = b;
        auto vjp = [as, bs](const Tensor& g) {
            Tensor ga = Tensor::zeros(as.shape), gb = Tensor::zeros(bs.shape);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] = g.data[i] * bs.data[i];
                gb.data[i] = g.data[i] * as.data[i];
            }
            return std::vector<Tensor>{std::move(ga), std::move(gb)};
        };
        out.node = tape->record({a.node, b.node}, out.shape, std::move(vjp));
    }
    return out;
}

Tensor scale(const Tensor& a, double s, Tape* tape) {
    Tensor out = Tensor::zeros(a.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] * s;
    check_finite(out, "scale");
    if (tape && a.node >= 0) {
        auto vjp = [s](const Tensor& g) {
            Tensor ga = Tensor::zeros(g.shape);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] = g.data[i] * s;
            return std::vector<Tensor>{std::move(ga)};
        };
        out.node = tape->record({a.node}, out.shape, std::move(vjp));
    }
    return out;
}

Tensor sum(const Tensor& x, Tape* tape) {
    double acc = 0.0;
    for (const double v : x.data) acc += v;
    Tensor out({1}, {acc});
    check_finite(out, "sum");
    if (tape && x.node >= 0) {
        const Shape xshape = x.shape;
        auto vjp = [xshape](const Tensor& g) {
            return std::vector<Tensor>{Tensor::full(xshape, g.data[0])};
        };
        out.node = tape->record({x.node}, out.shape, std::move(vjp));
    }
    return out;
}

Tensor mean(const Tensor& x, Tape* tape) {
    const double n = static_cast<double>(x.numel());
    Tensor s = sum(x, tape);
    return scale(s, 1.0 / n, tape);
}

Tensor reshape(const Tensor& x, const Shape& shape, Tape* tape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeMismatch("reshape " + shape_str(x.shape) + " -> " + shape_str(shape));
    }
    Tensor out(shape, x.data);
    if (tape && x.node >= 0) {
        const Shape xshape = x.shape;
        auto vjp = [xshape](const Tensor& g) {
            return std::vector<Tensor>{Tensor(xshape, g.data)};
        };
        out.node = tape->record({x.node}, out.shape, std::move(vjp));
    }
    return out;
}

// ---- view stacking ---------------------------------------------------------

Tensor stack_views(const std::vector<Tensor>& latents, Tape* tape) {
    if (latents.empty()) throw ShapeMismatch("stack_views: no latents");
    const Shape& s = latents[0].shape;
    if (s.size() != 4) throw ShapeMismatch("stack_views expects [C,D,H,W] latents");
    for (const auto& t : latents) {
        if (t.shape != s) throw ShapeMismatch("stack_views: inconsistent latent shapes");
    }
    const std::int64_t v_count = static_cast<std::int64_t>(latents.size());
    const std::int64_t c = s[0], dd = s[1], hh = s[2], ww = s[3];
    Tensor out = Tensor::zeros({c, v_count, dd * hh, ww});
    const std::int64_t plane = dd * hh * ww;
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t v = 0; v < v_count; ++v) {
            const double* src = latents[v].data.data() + ci * plane;
            double* dst = out.data.data() + (ci * v_count + v) * plane;
            std::memcpy(dst, src, sizeof(double) * plane);
        }
    }
    bool tracked = false;
    std::vector<int> inputs;
    for (const auto& t : latents) {
        inputs.push_back(t.node);
        tracked = tracked || t.node >= 0;
    }
    if (tape && tracked) {
        auto vjp = [s, v_count, c, plane](const Tensor& g) {
            std::vector<Tensor> grads;
            for (std::int64_t v = 0; v < v_count; ++v) {
                Tensor gi = Tensor::zeros(s);
                for (std::int64_t ci = 0; ci < c; ++ci) {
                    const double* src = g.data.data() + (ci * v_count + v) * plane;
                    std::memcpy(gi.data.data() + ci * plane, src,
                                sizeof(double) * plane);
                }
                grads.push_back(std::move(gi));
            }
            return grads;
        };
        out.node = tape->record(std::move(inputs), out.shape, std::move(vjp));
    }
    return out;
}

// ---- context fusion ----------------------------------------------------

Tensor context_fuse(const std::vector<Tensor>& volumes,
                    const std::vector<Tensor>& scores, Tape* tape) {
    if (volumes.empty() || volumes.size() != scores.size()) {
        throw ShapeMismatch("context_fuse needs matching volume/score counts");
    }
    const Shape& s = volumes[0].shape;
    for (std::size_t v = 0; v < volumes.size(); ++v) {
        if (volumes[v].shape != s || scores[v].shape != s) {
            throw ShapeMismatch("context_fuse: inconsistent shapes");
        }
    }
    const std::size_t n = volumes[0].data.size();
    const std::size_t v_count = volumes.size();

    std::vector<Tensor> weights(v_count, Tensor::zeros(s));
    Tensor out = Tensor::zeros(s);
    std::vector<double> e(v_count);
    for (std::size_t i = 0; i < n; ++i) {
        double m = scores[0].data[i];
        for (std::size_t v = 1; v < v_count; ++v) m = std::max(m, scores[v].data[i]);
        double z = 0.0;
        for (std::size_t v = 0; v < v_count; ++v) {
            e[v] = std::exp(scores[v].data[i] - m);
            z += e[v];
        }
        double acc = 0.0;
        for (std::size_t v = 0; v < v_count; ++v) {
            const double wt = e[v] / z;
            weights[v].data[i] = wt;
            acc += wt * volumes[v].data[i];
        }
        out.data[i] = acc;
    }
    check_finite(out, "context_fuse");

    std::vector<int> inputs;
    bool tracked = false;
    for (const auto& t : volumes) { inputs.push_back(t.node); tracked |= t.node >= 0; }
    for (const auto& t : scores) { inputs.push_back(t.node); tracked |= t.node >= 0; }
    if (tape && tracked) {
        const std::vector<Tensor> vols = volumes;
        const Tensor fused = out;
        auto vjp = [vols, weights, fused, v_count, s](const Tensor& g) {
            std::vector<Tensor> grads;
            grads.reserve(2 * v_count);
            for (std::size_t v = 0; v < v_count; ++v) {
                Tensor gv = Tensor::zeros(s);
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    gv.data[i] = g.data[i] * weights[v].data[i];
                }
                grads.push_back(std::move(gv));
            }
            for (std::size_t v = 0; v < v_count; ++v) {
                Tensor gs = Tensor::zeros(s);
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    gs.data[i] = g.data[i] * weights[v].data[i] *
                                 (vols[v].data[i] - fused.data[i]);
                }
                grads.push_back(std::move(gs));
            }
            return grads;
        };
        out.node = tape->record(std::move(inputs), out.shape, std::move(vjp));
    }
    return out;
}

// ---- BCE loss -------------------------------------------------------------

Tensor bce_mean(const Tensor& pred, const Tensor& target, Tape* tape) {
    if (!pred.same_shape(target)) {
        throw ShapeMismatch("bce_mean: " + shape_str(pred.shape) + " vs " +
                            shape_str(target.shape));
    }
    static constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    const double n = static_cast<double>(pred.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double p = std::clamp(pred.data[i], lo, hi);
        const double g = target.data[i];
        acc -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    }
    Tensor out({1}, {acc / n});
    check_finite(out, "bce_mean");
    if (tape && pred.node >= 0) {
        const Tensor ps = pred, ts = target;
        auto vjp = [ps, ts, n](const Tensor& g) {
            Tensor gp = Tensor::zeros(ps.shape);
            const double go = g.data[0] / n;
            for (std::size_t i = 0; i < gp.data.size(); ++i) {
                const double p = ps.data[i];
                if (p < lo || p > hi) continue;  // clamped: zero gradient
                gp.data[i] = go * (p - ts.data[i]) / (p * (1.0 - p));
            }
            return std::vector<Tensor>{std::move(gp)};
        };
        out.node = tape->record({pred.node}, out.shape, std::move(vjp));
    }
    return out;
}

// ---- finite differences ----------------------------------------------------

double finite_diff_check(const std::function<Tensor(Tape*, const Tensor&)>& f,
                         const Tensor& x, double eps) {
    if (!(eps > 0)) throw InvalidParams("finite_diff_check needs eps > 0");
    Tape tape;
    const Tensor xv = tape.leaf(x);
    const Tensor loss = f(&tape, xv);
    if (loss.numel() != 1) throw NotScalarLoss("finite_diff_check: f must be scalar");
    auto grads = tape.backward(loss.node);
    const auto it = grads.find(xv.node);
    const Tensor analytic = it != grads.end() ? it->second : Tensor::zeros(x.shape);

    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        probe.data[i] = x.data[i] + eps;
        const double fp = f(nullptr, probe).scalar();
        probe.data[i] = x.data[i] - eps;
        const double fm = f(nullptr, probe).scalar();
        probe.data[i] = x.data[i];
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic.data[i];
        const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
        worst = std::max(worst, err);
    }
    return worst;
}

// ---- complexity accounting ----------------------------------------------

void LayerSpec::validate() const {
    const auto bad = [&](const std::string& why) {
        throw InvalidSpec("layer spec invalid: " + why);
    };
    if (in_channels < 1 || out_channels < 1) bad("channel counts must be positive");
    for (int i = 0; i < 3; ++i) {
        if (kernel[i] < 1 || stride[i] < 1 || padding[i] < 0 || in_spatial[i] < 1 ||
            out_spatial[i] < 1) {
            bad("non-positive kernel/stride/spatial entry");
        }
    }
    switch (kind) {
        case Kind::conv2d:
            if (kernel[0] != 1 || in_spatial[0] != 1 || out_spatial[0] != 1) {
                bad("conv2d uses depth 1");
            }
            [[fallthrough]];
        case Kind::conv3d:
            for (int i = 0; i < 3; ++i) {
                const std::int64_t span = in_spatial[i] + 2 * padding[i] - kernel[i];
                if (span < 0 || span % stride[i] != 0 ||
                    span / stride[i] + 1 != out_spatial[i]) {
                    bad("conv output spatial dims inconsistent");
                }
            }
            break;
        case Kind::conv_transpose3d:
            for (int i = 0; i < 3; ++i) {
                if ((in_spatial[i] - 1) * stride[i] - 2 * padding[i] + kernel[i] !=
                    out_spatial[i]) {
                    bad("transposed conv output spatial dims inconsistent");
                }
            }
            break;
        case Kind::maxpool:
            if (in_channels != out_channels) bad("maxpool preserves channels");
            for (int i = 0; i < 3; ++i) {
                const std::int64_t span = in_spatial[i] - kernel[i];
                if (span < 0 || span % stride[i] != 0 ||
                    span / stride[i] + 1 != out_spatial[i]) {
                    bad("maxpool output spatial dims inconsistent");
                }
            }
            break;
        case Kind::fully_connected:
            break;
        case Kind::elementwise:
            if (in_channels != out_channels || in_spatial != out_spatial) {
                bad("elementwise preserves shape");
            }
            break;
    }
}

namespace {

std::uint64_t prod3(const std::array<std::int64_t, 3>& a) {
    return static_cast<std::uint64_t>(a[0]) * a[1] * a[2];
}

}  // namespace

std::uint64_t mac_count(const LayerSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case LayerSpec::Kind::conv2d:
        case LayerSpec::Kind::conv3d:
            return static_cast<std::uint64_t>(spec.out_channels) *
                   prod3(spec.out_spatial) * spec.in_channels * prod3(spec.kernel);
        case LayerSpec::Kind::conv_transpose3d:
            // scatter form: every input element touches Cout * kernel taps
            return static_cast<std::uint64_t>(spec.in_channels) *
                   prod3(spec.in_spatial) * spec.out_channels * prod3(spec.kernel);
        case LayerSpec::Kind::fully_connected:
            return static_cast<std::uint64_t>(spec.in_channels) * spec.out_channels;
        case LayerSpec::Kind::maxpool:
        case LayerSpec::Kind::elementwise:
            return 0;
    }
    return 0;
}

std::uint64_t op_count(const LayerSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case LayerSpec::Kind::maxpool:
            return static_cast<std::uint64_t>(spec.out_channels) *
                   prod3(spec.out_spatial) * prod3(spec.kernel);
        case LayerSpec::Kind::elementwise:
            return static_cast<std::uint64_t>(spec.out_channels) *
                   prod3(spec.out_spatial);
        default:
            return 0;
    }
}

std::uint64_t param_count(const LayerSpec& spec) {
    spec.validate();
    const std::uint64_t bias =
        spec.has_bias ? static_cast<std::uint64_t>(spec.out_channels) : 0;
    switch (spec.kind) {
        case LayerSpec::Kind::conv2d:
        case LayerSpec::Kind::conv3d:
        case LayerSpec::Kind::conv_transpose3d:
            return static_cast<std::uint64_t>(spec.in_channels) * spec.out_channels *
                       prod3(spec.kernel) + bias;
        case LayerSpec::Kind::fully_connected:
            return static_cast<std::uint64_t>(spec.in_channels) * spec.out_channels +
                   bias;
        case LayerSpec::Kind::maxpool:
        case LayerSpec::Kind::elementwise:
            return 0;
    }
    return 0;
}

// ---- checkpoints ---------------------------------------------------------

namespace {

void write_doubles_le(std::ostream& os, const std::vector<double>& v) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double)));
    } else {
        for (double d : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            char buf[8];
            for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>(bits >> (8 * i));
            os.write(buf, 8);
        }
    }
}

void read_doubles_le(std::istream& is, std::vector<double>& v) {
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    } else {
        for (double& d : v) {
            char buf[8];
            is.read(buf, 8);
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) {
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i]))
                        << (8 * i);
            }
            std::memcpy(&d, &bits, 8);
        }
    }
}

}  // namespace

void save_checkpoint(const std::map<std::string, Tensor>& params,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "EPVX1\n";
    for (const auto& [name, t] : params) {
        os << name;
        for (const auto d : t.shape) os << ' ' << d;
        os << " ;\n";
        write_doubles_le(os, t.data);
        os << '\n';
    }
    if (!os.good()) throw IoError("checkpoint write failed: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::string magic;
    std::getline(is, magic);
    if (magic != "EPVX1") throw IoError("bad checkpoint magic in " + path);
    std::map<std::string, Tensor> params;
    std::string header;
    while (std::getline(is, header)) {
        if (header.empty()) continue;
        std::istringstream hs(header);
        std::string name, tok;
        hs >> name;
        Shape shape;
        while (hs >> tok && tok != ";") shape.push_back(std::stoll(tok));
        if (tok != ";") throw IoError("unterminated checkpoint record in " + path);
        Tensor t = Tensor::zeros(shape);
        read_doubles_le(is, t.data);
        if (!is) throw IoError("truncated checkpoint payload in " + path);
        is.get();  // trailing newline after the binary block
        params.emplace(std::move(name), std::move(t));
    }
    return params;
}

}  // namespace epivox::ad
