#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "epivox/errors.hpp"

namespace epivox::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense double-precision tensor. Values are immutable once an op has consumed
// them; `node` links the tensor into a Tape when it participates in autodiff.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    int node = -1;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d);

    static Tensor zeros(const Shape& s);
    static Tensor full(const Shape& s, double v);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    double scalar() const;

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// throws NonFiniteValue naming the op when any element is NaN/Inf
void check_finite(const Tensor& t, const char* op);

// Reverse-mode tape. Nodes are recorded in topological order; backward walks
// ids in reverse and visits each node exactly once.
class Tape {
public:
    using VjpFn = std::function<std::vector<Tensor>(const Tensor& gout)>;

    // registers `t` as a differentiable leaf; returns a copy carrying the node id
    Tensor leaf(const Tensor& t);

    int record(std::vector<int> inputs, Shape out_shape, VjpFn vjp);

    // gradient of the scalar node `loss_node` w.r.t. every leaf that influences
    // it; intermediate gradients are freed as the sweep passes them
    std::unordered_map<int, Tensor> backward(int loss_node) const;

    std::size_t size() const { return nodes_.size(); }
    const Shape& node_shape(int id) const { return nodes_.at(id).shape; }

private:
    struct Node {
        std::vector<int> inputs;  // node ids; -1 marks non-differentiable inputs
        Shape shape;
        VjpFn vjp;  // null for leaves
    };
    std::vector<Node> nodes_;
};

// ---- differentiable ops ------------------------------------------------
// Every op validates shapes (ShapeMismatch), checks output finiteness and
// records itself on `tape` when given one. Summation order per output element
// is fixed, so results are bitwise deterministic.

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
              Tape* tape = nullptr);

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::array<int, 3> stride, std::array<int, 3> pad, Tape* tape = nullptr);

Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor& b,
                        std::array<int, 3> stride, std::array<int, 3> pad,
                        Tape* tape = nullptr);

Tensor maxpool2d(const Tensor& x, int window, int stride, Tape* tape = nullptr);

Tensor relu(const Tensor& x, Tape* tape = nullptr);
Tensor elu(const Tensor& x, double alpha = 1.0, Tape* tape = nullptr);
Tensor sigmoid(const Tensor& x, Tape* tape = nullptr);
// log(p / (1-p)) with inputs clamped to [1e-6, 1-1e-6]
Tensor logit(const Tensor& x, Tape* tape = nullptr);

Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor scale(const Tensor& a, double s, Tape* tape = nullptr);
Tensor sum(const Tensor& x, Tape* tape = nullptr);
Tensor mean(const Tensor& x, Tape* tape = nullptr);
Tensor reshape(const Tensor& x, const Shape& shape, Tape* tape = nullptr);

// V latents [C,D,H,W] stacked along a new view axis and folded for conv3d:
// output [C, V, D*H, W]
Tensor stack_views(const std::vector<Tensor>& latents, Tape* tape = nullptr);

// per-voxel softmax over views of `scores` weighting `volumes`
Tensor context_fuse(const std::vector<Tensor>& volumes,
                    const std::vector<Tensor>& scores, Tape* tape = nullptr);

// mean over elements of -[g ln p + (1-g) ln(1-p)] with p clamped to
// [1e-7, 1-1e-7]; `target` is a constant
Tensor bce_mean(const Tensor& pred, const Tensor& target, Tape* tape = nullptr);

// ---- gradient checking -------------------------------------------------

// Central finite differences against the tape gradient. `f` must return a
// scalar tensor; it receives a null tape for the numeric evaluations.
// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|).
double finite_diff_check(const std::function<Tensor(Tape*, const Tensor&)>& f,
                         const Tensor& x, double eps = 1e-5);

// ---- layer complexity accounting ----------------------------------------

struct LayerSpec {
    enum class Kind { conv2d, conv3d, conv_transpose3d, maxpool, fully_connected,
                      elementwise };
    Kind kind = Kind::elementwise;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;
    std::array<std::int64_t, 3> kernel{1, 1, 1};   // (kd, kh, kw); 2d uses kh, kw
    std::array<std::int64_t, 3> stride{1, 1, 1};
    std::array<std::int64_t, 3> padding{0, 0, 0};
    std::array<std::int64_t, 3> in_spatial{1, 1, 1};
    std::array<std::int64_t, 3> out_spatial{1, 1, 1};
    bool has_bias = true;

    void validate() const;  // InvalidSpec on inconsistent shape arithmetic
};

// multiplies only; bias adds and comparisons are not MACs
std::uint64_t mac_count(const LayerSpec& spec);
// non-multiply work (elementwise ops, pool window visits), reported separately
std::uint64_t op_count(const LayerSpec& spec);
std::uint64_t param_count(const LayerSpec& spec);

// ---- checkpoints ---------------------------------------------------------
// `EPVX1` magic, then per tensor an ASCII record `name d0 d1 ... ;` followed
// by the little-endian 64-bit float payload. Map order (lexicographic) makes
// files byte-identical for identical parameters.

void save_checkpoint(const std::map<std::string, Tensor>& params,
                     const std::string& path);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

}  // namespace epivox::ad
