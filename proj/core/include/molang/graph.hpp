#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "molang/rng.hpp"
#include "molang/tensor.hpp"

namespace molang {

// Handle into a Graph's node table.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Named parameter tensors bound into a graph for one forward/backward pass.
using BoundParams = std::map<std::string, Var>;

// Reverse-mode tape. Ops append nodes in execution order; backward walks the
// tape once in reverse, so every node is visited exactly once and gradients
// are bit-identical across runs. A Graph is confined to a single training
// step on a single thread.
class Graph {
public:
    explicit Graph(bool checked = false) : checked_(checked) {}

    bool checked() const { return checked_; }
    void set_checked(bool on) { checked_ = on; }

    // leaves
    Var input(Tensor value, bool requires_grad);
    Var param(const Tensor& value) { return input(value, true); }
    Var constant(Tensor value) { return input(std::move(value), false); }

    // ----- op set -----
    Var matmul(Var a, Var b);                 // [m,k] @ [k,n]
    Var transpose(Var a);                     // 2-D
    Var add(Var a, Var b);                    // same shape, [m,n]+[n], or + scalar
    Var sub(Var a, Var b);                    // same shape or - scalar
    Var mul(Var a, Var b);                    // same shape, [m,n]*[n], or * scalar
    Var scale(Var a, double s);
    Var conv1d(Var x, Var w, Var bias, int stride, int pad);  // x [Cin,T], w [Cout,Cin,k], bias [Cout]
    Var upsample_nn(Var x, int factor);       // [C,T] -> [C, T*factor]
    Var embedding(Var table, std::vector<long> ids);          // rows of table [V,d] -> [L,d]
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);  // last dim
    Var softmax(Var x);                       // last dim
    // fused log-softmax + NLL; returns the scalar sum of per-row losses over
    // rows whose target != ignore_id (use scale() for the mean)
    Var cross_entropy_sum(Var logits, std::vector<long> targets, long ignore_id = -1);
    Var smooth_l1(Var diff);                  // elementwise, threshold 1.0
    Var square(Var a);
    Var sum(Var a);                           // full reduction -> scalar
    Var mean(Var a);
    Var relu(Var a);
    Var gelu(Var a);
    Var slice_rows(Var a, long start, long len);   // 2-D
    Var slice_cols(Var a, long start, long len);   // 2-D
    Var concat_cols(const std::vector<Var>& parts);  // 2-D, equal row counts
    Var reshape(Var a, std::vector<long> shape);
    // straight-through: forward value = quantized, gradient copied to latents
    Var ste(Var latents, const Tensor& quantized);
    Var dropout(Var a, double p, Rng& rng);   // inverted dropout; p in [0,1)

    // ----- execution -----
    const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    // Allocates (zeros) the node's grad buffer on first access, so the
    // reference stays valid for the graph's lifetime even for leaves the
    // loss never touched.
    const Tensor& grad(Var v) { return grad_buf(v.id); }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
    std::size_t node_count() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss)=1 and propagates through the tape in reverse
    // order. Throws ContractError unless loss is a scalar.
    void backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;               // allocated lazily during backward
        bool requires_grad = false;
        bool grad_alloc = false;
        std::function<void()> back;  // accumulates into input grads
    };

    Var emit(Tensor value, bool requires_grad, std::function<void()> back, const char* op_name);
    Tensor& grad_buf(int id);
    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

    std::vector<Node> nodes_;
    bool checked_ = false;

    friend struct GraphAccess;
};

// Scaled-dot-product attention composed from the primitive ops:
// softmax(q k^T / sqrt(d_k) + bias) v. bias may be invalid (no bias).
Var sdpa(Graph& g, Var q, Var k, Var v, Var bias);

// Central-difference gradient checker. `build` must construct the scalar
// loss from freshly created parameter Vars (one per entry of `params`),
// deterministically. Checks up to `max_coords` coordinates per tensor
// (deterministically chosen) and returns the max relative error.
double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& build, const std::vector<Tensor>& params,
                  double eps = 1e-4, long max_coords = 24, std::uint64_t seed = 0x9a3c);

}  // namespace molang
