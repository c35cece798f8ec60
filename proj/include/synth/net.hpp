#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "synth/rng.hpp"

namespace synth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Activation applied after a layer's affine transform.
// SoftmaxSegments: softmax over each declared contiguous segment, tanh on
// positions outside all segments (continuous heads of the generator).
enum class Act { Identity, LeakyRelu, Tanh, Sigmoid, SoftmaxSegments };

std::string act_name(Act a);
Act act_from_name(const std::string& name);

struct Segment {
    int offset = 0;
    int width = 0;
};

struct Layer {
    Matrix weights;  // out x in
    Vector bias;     // out
    Act act = Act::Identity;
    double slope = 0.2;  // leaky-relu only
    std::vector<Segment> segments;  // softmax-segment only

    int in_dim() const { return static_cast<int>(weights.cols()); }
    int out_dim() const { return static_cast<int>(weights.rows()); }
};

struct DenseNet {
    std::vector<Layer> layers;

    int input_dim() const;
    int output_dim() const;
    size_t param_count() const;
    void validate() const;  // dimension chaining, segment bounds
};

// Activations cached during forward, needed by the backward pass.
// post[0] is the input batch; post[k+1] / pre[k] belong to layer k.
struct ForwardCache {
    std::vector<Matrix> pre;
    std::vector<Matrix> post;
    bool valid = false;
};

struct GradientSet {
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_bias;

    static GradientSet zeros_like(const DenseNet& net);
    void add(const GradientSet& other);
    void scale(double factor);
    double global_l2_norm() const;
    bool all_finite() const;
    size_t size() const;  // total scalar count
};

// He-style initialization scaled for leaky-relu hidden layers.
DenseNet make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  Act head, const std::vector<Segment>& head_segments, RngStream& rng,
                  double leak_slope = 0.2);

// Rows of `batch` are examples. Throws ShapeError on dimension mismatch and
// ValidationError on non-finite input.
Matrix forward(const DenseNet& net, const Matrix& batch, ForwardCache* cache = nullptr);

struct BackwardResult {
    std::vector<GradientSet> per_example;
    Matrix input_grads;  // B x input_dim
};

// Per-example gradients: each row of upstream is dL_i/d(output_i); gradient i
// depends only on example i. Requires the cache produced by forward().
BackwardResult backward_per_example(const DenseNet& net, const ForwardCache& cache,
                                    const Matrix& upstream);

// Whole-batch gradient (sum over examples) plus input gradients; cheaper than
// summing backward_per_example when per-example access is not needed.
struct BatchBackwardResult {
    GradientSet grads;
    Matrix input_grads;
};
BatchBackwardResult backward_batch(const DenseNet& net, const ForwardCache& cache,
                                   const Matrix& upstream);

// p <- p - eta * g, elementwise.
void sgd_step(DenseNet& net, const GradientSet& grad, double eta);

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    GradientSet m;
    GradientSet v;
    long step = 0;

    static AdamState zeros_like(const DenseNet& net);
};

void adam_step(DenseNet& net, const GradientSet& grad, AdamState& state,
               const AdamParams& params);

}  // namespace synth
