#include "synth/net.hpp"

#include <cmath>

#include "synth/error.hpp"

namespace synth {

std::string act_name(Act a) {
    switch (a) {
        case Act::Identity: return "identity";
        case Act::LeakyRelu: return "leaky-relu";
        case Act::Tanh: return "tanh";
        case Act::Sigmoid: return "sigmoid";
        case Act::SoftmaxSegments: return "softmax-segment";
    }
    throw Error("unknown activation");
}

Act act_from_name(const std::string& name) {
    if (name == "identity") return Act::Identity;
    if (name == "leaky-relu") return Act::LeakyRelu;
    if (name == "tanh") return Act::Tanh;
    if (name == "sigmoid") return Act::Sigmoid;
    if (name == "softmax-segment") return Act::SoftmaxSegments;
    throw ParseError("unknown activation name: " + name);
}

int DenseNet::input_dim() const {
    if (layers.empty()) throw StateError("empty network");
    return layers.front().in_dim();
}

int DenseNet::output_dim() const {
    if (layers.empty()) throw StateError("empty network");
    return layers.back().out_dim();
}

size_t DenseNet::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

void DenseNet::validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (size_t k = 0; k < layers.size(); ++k) {
        const Layer& l = layers[k];
        if (l.bias.size() != l.out_dim())
            throw ShapeError("layer bias size does not match weight rows");
        if (k + 1 < layers.size() && l.out_dim() != layers[k + 1].in_dim())
            throw ShapeError("layer output dim does not chain into next layer input dim");
        for (const auto& s : l.segments) {
            if (s.offset < 0 || s.width < 1 || s.offset + s.width > l.out_dim())
                throw ShapeError("softmax segment out of range");
        }
    }
}

GradientSet GradientSet::zeros_like(const DenseNet& net) {
    GradientSet g;
    g.d_weights.reserve(net.layers.size());
    g.d_bias.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        g.d_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        g.d_bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
}

void GradientSet::add(const GradientSet& other) {
    if (other.d_weights.size() != d_weights.size())
        throw ShapeError("gradient layer counts differ");
    for (size_t k = 0; k < d_weights.size(); ++k) {
        if (d_weights[k].rows() != other.d_weights[k].rows() ||
            d_weights[k].cols() != other.d_weights[k].cols())
            throw ShapeError("gradient shapes differ");
        d_weights[k] += other.d_weights[k];
        d_bias[k] += other.d_bias[k];
    }
}

void GradientSet::scale(double factor) {
    for (size_t k = 0; k < d_weights.size(); ++k) {
        d_weights[k] *= factor;
        d_bias[k] *= factor;
    }
}

double GradientSet::global_l2_norm() const {
    double sq = 0.0;
    for (size_t k = 0; k < d_weights.size(); ++k) {
        sq += d_weights[k].squaredNorm();
        sq += d_bias[k].squaredNorm();
    }
    return std::sqrt(sq);
}

bool GradientSet::all_finite() const {
    for (size_t k = 0; k < d_weights.size(); ++k) {
        if (!d_weights[k].allFinite() || !d_bias[k].allFinite()) return false;
    }
    return true;
}

size_t GradientSet::size() const {
    size_t n = 0;
    for (size_t k = 0; k < d_weights.size(); ++k)
        n += d_weights[k].size() + d_bias[k].size();
    return n;
}

DenseNet make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  Act head, const std::vector<Segment>& head_segments, RngStream& rng,
                  double leak_slope) {
    if (input_dim < 1 || output_dim < 1) throw ValidationError("make_mlp: dims must be positive");
    DenseNet net;
    int prev = input_dim;
    auto init_layer = [&](int out, int in, Act act) {
        Layer l;
        l.weights = Matrix(out, in);
        double scale = std::sqrt(2.0 / static_cast<double>(in));
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) l.weights(i, j) = scale * rng.next_gaussian();
        l.bias = Vector::Zero(out);
        l.act = act;
        l.slope = leak_slope;
        return l;
    };
    for (int h : hidden) {
        net.layers.push_back(init_layer(h, prev, Act::LeakyRelu));
        prev = h;
    }
    Layer out = init_layer(output_dim, prev, head);
    out.segments = head_segments;
    net.layers.push_back(std::move(out));
    net.validate();
    return net;
}

namespace {

void apply_activation(const Layer& l, const Matrix& pre, Matrix& post) {
    switch (l.act) {
        case Act::Identity:
            post = pre;
            return;
        case Act::LeakyRelu:
            post = pre.unaryExpr([s = l.slope](double v) { return v > 0.0 ? v : s * v; });
            return;
        case Act::Tanh:
            post = pre.array().tanh();
            return;
        case Act::Sigmoid:
            post = pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
            return;
        case Act::SoftmaxSegments: {
            post = pre.array().tanh();  // positions outside segments
            for (const auto& seg : l.segments) {
                for (Eigen::Index r = 0; r < pre.rows(); ++r) {
                    double mx = pre.row(r).segment(seg.offset, seg.width).maxCoeff();
                    double sum = 0.0;
                    for (int j = 0; j < seg.width; ++j) {
                        double e = std::exp(pre(r, seg.offset + j) - mx);
                        post(r, seg.offset + j) = e;
                        sum += e;
                    }
                    for (int j = 0; j < seg.width; ++j) post(r, seg.offset + j) /= sum;
                }
            }
            return;
        }
    }
    throw Error("unknown activation");
}

// delta rows: dL/d(post); returns dL/d(pre) into delta in place.
void activation_backward(const Layer& l, const Matrix& pre, const Matrix& post, Matrix& delta) {
    switch (l.act) {
        case Act::Identity:
            return;
        case Act::LeakyRelu:
            delta.array() *= pre.unaryExpr([s = l.slope](double v) {
                                  return v > 0.0 ? 1.0 : s;
                              }).array();
            return;
        case Act::Tanh:
            delta.array() *= (1.0 - post.array().square());
            return;
        case Act::Sigmoid:
            delta.array() *= post.array() * (1.0 - post.array());
            return;
        case Act::SoftmaxSegments: {
            Matrix out = delta;
            out.array() *= (1.0 - post.array().square());  // tanh default
            for (const auto& seg : l.segments) {
                for (Eigen::Index r = 0; r < delta.rows(); ++r) {
                    double dot = 0.0;
                    for (int j = 0; j < seg.width; ++j)
                        dot += delta(r, seg.offset + j) * post(r, seg.offset + j);
                    for (int j = 0; j < seg.width; ++j)
                        out(r, seg.offset + j) =
                            post(r, seg.offset + j) * (delta(r, seg.offset + j) - dot);
                }
            }
            delta = std::move(out);
            return;
        }
    }
    throw Error("unknown activation");
}

}  // namespace

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardCache* cache) {
    net.validate();
    if (batch.cols() != net.input_dim())
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                         " columns, network expects " + std::to_string(net.input_dim()));
    if (!batch.allFinite()) throw ValidationError("forward: non-finite input");
    if (cache) {
        cache->pre.assign(net.layers.size(), Matrix());
        cache->post.assign(net.layers.size() + 1, Matrix());
        cache->post[0] = batch;
        cache->valid = true;
    }
    Matrix cur = batch;
    for (size_t k = 0; k < net.layers.size(); ++k) {
        const Layer& l = net.layers[k];
        Matrix pre = (cur * l.weights.transpose()).rowwise() + l.bias.transpose();
        Matrix post;
        apply_activation(l, pre, post);
        if (cache) {
            cache->pre[k] = pre;
            cache->post[k + 1] = post;
        }
        cur = std::move(post);
    }
    return cur;
}

BackwardResult backward_per_example(const DenseNet& net, const ForwardCache& cache,
                                    const Matrix& upstream) {
    if (!cache.valid) throw StateError("backward: no cached activations; run forward first");
    const Eigen::Index B = cache.post[0].rows();
    if (upstream.rows() != B || upstream.cols() != net.output_dim())
        throw ShapeError("backward: upstream gradient shape mismatch");

    BackwardResult result;
    result.per_example.reserve(B);
    result.input_grads = Matrix::Zero(B, net.input_dim());

    const size_t L = net.layers.size();
    for (Eigen::Index i = 0; i < B; ++i) {
        GradientSet g = GradientSet::zeros_like(net);
        Matrix delta = upstream.row(i);
        for (size_t kk = L; kk-- > 0;) {
            const Layer& l = net.layers[kk];
            Matrix pre_row = cache.pre[kk].row(i);
            Matrix post_row = cache.post[kk + 1].row(i);
            activation_backward(l, pre_row, post_row, delta);
            g.d_weights[kk].noalias() = delta.transpose() * cache.post[kk].row(i);
            g.d_bias[kk] = delta.transpose();
            delta = delta * l.weights;
        }
        result.input_grads.row(i) = delta;
        result.per_example.push_back(std::move(g));
    }
    return result;
}

BatchBackwardResult backward_batch(const DenseNet& net, const ForwardCache& cache,
                                   const Matrix& upstream) {
    if (!cache.valid) throw StateError("backward: no cached activations; run forward first");
    const Eigen::Index B = cache.post[0].rows();
    if (upstream.rows() != B || upstream.cols() != net.output_dim())
        throw ShapeError("backward: upstream gradient shape mismatch");

    BatchBackwardResult result;
    result.grads = GradientSet::zeros_like(net);
    Matrix delta = upstream;
    for (size_t kk = net.layers.size(); kk-- > 0;) {
        const Layer& l = net.layers[kk];
        activation_backward(l, cache.pre[kk], cache.post[kk + 1], delta);
        result.grads.d_weights[kk].noalias() = delta.transpose() * cache.post[kk];
        result.grads.d_bias[kk] = delta.colwise().sum().transpose();
        delta = delta * l.weights;
    }
    result.input_grads = std::move(delta);
    return result;
}

void sgd_step(DenseNet& net, const GradientSet& grad, double eta) {
    if (eta <= 0.0) throw ValidationError("sgd_step: eta must be positive");
    if (grad.d_weights.size() != net.layers.size())
        throw ShapeError("sgd_step: gradient layer count mismatch");
    for (size_t k = 0; k < net.layers.size(); ++k) {
        Layer& l = net.layers[k];
        if (grad.d_weights[k].rows() != l.weights.rows() ||
            grad.d_weights[k].cols() != l.weights.cols())
            throw ShapeError("sgd_step: gradient shape mismatch");
        l.weights -= eta * grad.d_weights[k];
        l.bias -= eta * grad.d_bias[k];
    }
}

AdamState AdamState::zeros_like(const DenseNet& net) {
    AdamState s;
    s.m = GradientSet::zeros_like(net);
    s.v = GradientSet::zeros_like(net);
    return s;
}

void adam_step(DenseNet& net, const GradientSet& grad, AdamState& state,
               const AdamParams& params) {
    if (grad.d_weights.size() != net.layers.size())
        throw ShapeError("adam_step: gradient layer count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < net.layers.size(); ++k) {
        Layer& l = net.layers[k];
        if (grad.d_weights[k].rows() != l.weights.rows() ||
            grad.d_weights[k].cols() != l.weights.cols())
            throw ShapeError("adam_step: gradient shape mismatch");
        auto update = [&](auto& m, auto& v, const auto& g, auto& p) {
            m = params.beta1 * m + (1.0 - params.beta1) * g;
            v.array() = params.beta2 * v.array() + (1.0 - params.beta2) * g.array().square();
            p.array() -= params.lr * (m.array() / bc1) /
                         ((v.array() / bc2).sqrt() + params.eps);
        };
        update(state.m.d_weights[k], state.v.d_weights[k], grad.d_weights[k], l.weights);
        update(state.m.d_bias[k], state.v.d_bias[k], grad.d_bias[k], l.bias);
    }
}

}  // namespace synth
