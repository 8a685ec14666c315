#pragma once

// Small reverse-mode automatic differentiation engine over dense row-major
// matrices. Every op records a closure that pushes the output gradient back to
// its inputs; Tensor::backward() replays them in reverse topological order.

#include "amlbench/graph.hpp"
#include "amlbench/random.hpp"

#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace amlbench::nn {

using Matrix = RowMatrix;
using Index = Eigen::Index;

struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Matrix& grad_buffer() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols())
            grad = Matrix::Zero(value.rows(), value.cols());
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Matrix value);
    static Tensor parameter(Matrix value);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Matrix& value() const { return node_->value; }
    /// For optimisers and checkpoint loading; never mutate a value that an
    /// un-run backward pass still depends on.
    Matrix& mutable_value() { return node_->value; }
    const Matrix& grad() const { return node_->grad_buffer(); }
    bool requires_grad() const { return node_->requires_grad; }
    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    double item() const;

    void zero_grad() const;
    /// Seeds d(this)/d(this) = 1 and accumulates into every reachable tensor
    /// that requires a gradient. Throws std::invalid_argument on a non-scalar.
    void backward() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    friend Tensor make_result(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward);

    std::shared_ptr<Node> node_;
};

/// Builds an op output; `backward` runs only when the output requires a gradient.
Tensor make_result(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// a (n x c) + bias (1 x c) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// factor (1 x 1 tensor) * a.
Tensor scale_by(const Tensor& a, const Tensor& factor);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor concat_cols(std::span<const Tensor> parts);
/// Elementwise mean of equally shaped tensors.
Tensor average(std::span<const Tensor> parts);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Row-wise softmax.
Tensor softmax_rows(const Tensor& a);

/// Inverted dropout: zeroes entries with probability `rate` and rescales the
/// rest by 1/(1-rate). Identity when `training` is false or rate is 0.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training);

Tensor gather_rows(const Tensor& a, std::span<const NodeId> rows);
/// out[index[k]] += a[k]; output has `out_rows` rows.
Tensor scatter_add_rows(const Tensor& a, std::span<const NodeId> index, Index out_rows);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Fixed (non-learnable) sparse operator with its transpose cached for the
/// backward pass.
struct SparseOperator {
    SparseMatrix forward;
    SparseMatrix transpose;

    static std::shared_ptr<const SparseOperator> from_triplets(Index rows, Index cols,
                                                               const std::vector<Eigen::Triplet<double>>& entries);
};

/// op * a.
Tensor spmm(const std::shared_ptr<const SparseOperator>& op, const Tensor& a);

/// Grouping of rows into segments (CSR layout): segment s owns
/// members[offsets[s] .. offsets[s+1]).
struct Segments {
    std::vector<std::size_t> offsets{0};
    std::vector<NodeId> members;

    std::size_t count() const { return offsets.size() - 1; }
};

enum class Reduce { Sum, Mean, Max, Min };

/// out[s] = reduce over a[members of s]; empty segments give zeros.
Tensor segment_reduce(const Tensor& a, const Segments& segments, Reduce op);

/// GATv2 attention for one head. For every target i with candidate sources
/// j in segments[i]: e_ij = attn . LeakyReLU(source[j] + target[i]),
/// alpha = softmax over j, out[i] = sum_j alpha_ij source[j].
/// `attn` is 1 x F. When `alpha_out` is non-null it receives the attention
/// weights in segment member order.
Tensor gatv2_attention(const Tensor& source, const Tensor& target, const Tensor& attn, const Segments& segments,
                       double slope, std::vector<double>* alpha_out = nullptr);

/// Mean (optionally class-weighted) negative log-likelihood of `labels` under
/// row-wise softmax of `logits`, restricted to `rows`. Throws on empty rows.
Tensor masked_cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const NodeId> rows,
                            std::span<const double> class_weights = {});

}  // namespace amlbench::nn
