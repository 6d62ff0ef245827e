#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "beliefbench/mat.hpp"

namespace beliefbench::num {

// Reverse-mode autodiff over Mat values, eager forward. A Graph is a tape:
// build nodes for one loss, call backward() once, read grads, drop the graph.
// Values of leaves/constants are copied in, so a destroyed graph releases all
// of its tensor state; sequential-update training relies on that to keep
// memory flat across steps.
class Graph {
public:
    using Id = std::int32_t;

    // Parameter input: participates in backward().
    Id leaf(const Mat& value);
    // Data input: no gradient is ever propagated into it.
    Id constant(Mat value);

    const Mat& value(Id id) const { return nodes_[id].val; }
    // Valid after backward(); zero-shaped matrix when nothing flowed here.
    const Mat& grad(Id id) const { return nodes_[id].grad; }
    bool needs_grad(Id id) const { return nodes_[id].needs_grad; }

    // elementwise, shapes must match
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id scale(Id a, double c);
    Id scalar_mul(Id s, Id a);        // s is 1x1, broadcast over a
    Id add_rowvec(Id a, Id bias);     // bias is 1xC, broadcast over rows of a

    Id matmul(Id a, Id b);
    Id transpose(Id a);

    Id relu(Id a);
    Id sigmoid(Id a);
    Id tanh_(Id a);

    Id softmax_rows(Id a);
    Id layer_norm(Id a, Id gain, Id bias, double eps = 1e-5);

    Id concat_rows(const std::vector<Id>& parts);
    Id slice_rows(Id a, int begin, int count);
    Id gather_rows(Id table, std::vector<int> idx);  // embedding lookup

    Id sum_all(Id a);   // 1x1
    Id mean_all(Id a);  // 1x1

    // mean over rows of -log softmax(logits)[target]
    Id cross_entropy_logits(Id logits, std::vector<int> targets);
    // mean over rows of KL(softmax(logits) || pre_probs), pre_probs constant
    Id kl_vs_const_rows(Id post_logits, Mat pre_probs);

    void backward(Id loss);

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        Mat grad;
        bool needs_grad = false;
        std::function<void(Graph&)> back;  // empty for inputs
    };

    Id emit(Mat val, bool needs_grad, std::function<void(Graph&)> back);
    Mat& grad_buf(Id id);  // allocate-on-first-touch accumulator

    std::vector<Node> nodes_;
};

}  // namespace beliefbench::num
