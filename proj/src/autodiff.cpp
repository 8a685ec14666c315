#include "amlbench/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace amlbench::nn {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Tensor Tensor::constant(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    Matrix m(1, 1);
    m(0, 0) = value;
    return requires_grad ? parameter(std::move(m)) : constant(std::move(m));
}

double Tensor::item() const {
    if (rows() != 1 || cols() != 1) throw std::invalid_argument("item() on non-scalar tensor");
    return value()(0, 0);
}

void Tensor::zero_grad() const {
    if (node_->grad.size()) node_->grad.setZero();
}

void Tensor::backward() const {
    if (rows() != 1 || cols() != 1) throw std::invalid_argument("backward() requires a scalar tensor");
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order without recursion
    // depth limits on long op chains.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->grad_buffer()(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

Tensor make_result(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
    if (n->requires_grad) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    Matrix out = a.value() * b.value();
    return make_result(std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) pa.grad_buffer().noalias() += self.grad * pb.value.transpose();
        if (pb.requires_grad) pb.grad_buffer().noalias() += pa.value.transpose() * self.grad;
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
        for (auto& p : self.parents)
            if (p->requires_grad) p->grad_buffer() += self.grad;
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
        if (parent(self, 0).requires_grad) parent(self, 0).grad_buffer() += self.grad;
        if (parent(self, 1).requires_grad) parent(self, 1).grad_buffer() -= self.grad;
    });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) throw std::invalid_argument("add_row: bias shape mismatch");
    Matrix out = a.value().rowwise() + bias.value().row(0);
    return make_result(std::move(out), {a, bias}, [](Node& self) {
        if (parent(self, 0).requires_grad) parent(self, 0).grad_buffer() += self.grad;
        if (parent(self, 1).requires_grad) parent(self, 1).grad_buffer() += self.grad.colwise().sum();
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Matrix out = a.value().cwiseProduct(b.value());
    return make_result(std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) pa.grad_buffer() += self.grad.cwiseProduct(pb.value);
        if (pb.requires_grad) pb.grad_buffer() += self.grad.cwiseProduct(pa.value);
    });
}

Tensor scale(const Tensor& a, double factor) {
    return make_result(a.value() * factor, {a}, [factor](Node& self) {
        parent(self, 0).grad_buffer() += factor * self.grad;
    });
}

Tensor scale_by(const Tensor& a, const Tensor& factor) {
    if (factor.rows() != 1 || factor.cols() != 1) throw std::invalid_argument("scale_by: factor must be 1x1");
    return make_result(a.value() * factor.item(), {a, factor}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pf = parent(self, 1);
        if (pa.requires_grad) pa.grad_buffer() += pf.value(0, 0) * self.grad;
        if (pf.requires_grad) pf.grad_buffer()(0, 0) += self.grad.cwiseProduct(pa.value).sum();
    });
}

Tensor relu(const Tensor& a) {
    return make_result(a.value().cwiseMax(0.0), {a}, [](Node& self) {
        Node& pa = parent(self, 0);
        pa.grad_buffer() += (pa.value.array() > 0.0).select(self.grad, 0.0);
    });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    Matrix out = (a.value().array() > 0.0).select(a.value(), slope * a.value());
    return make_result(std::move(out), {a}, [slope](Node& self) {
        Node& pa = parent(self, 0);
        pa.grad_buffer() += (pa.value.array() > 0.0).select(self.grad, slope * self.grad);
    });
}

Tensor sigmoid(const Tensor& a) {
    Matrix out = a.value().unaryExpr([](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    return make_result(std::move(out), {a}, [](Node& self) {
        parent(self, 0).grad_buffer().array() +=
            self.grad.array() * self.value.array() * (1.0 - self.value.array());
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const Index rows = parts[0].rows();
    Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return make_result(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [](Node& self) {
        Index at = 0;
        for (auto& p : self.parents) {
            const Index c = p->value.cols();
            if (p->requires_grad) p->grad_buffer() += self.grad.middleCols(at, c);
            at += c;
        }
    });
}

Tensor average(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("average: no inputs");
    Matrix out = parts[0].value();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        require_same_shape(parts[0], parts[i], "average");
        out += parts[i].value();
    }
    const double w = 1.0 / static_cast<double>(parts.size());
    out *= w;
    return make_result(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [w](Node& self) {
        for (auto& p : self.parents)
            if (p->requires_grad) p->grad_buffer() += w * self.grad;
    });
}

Tensor sum(const Tensor& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make_result(std::move(out), {a}, [](Node& self) {
        parent(self, 0).grad_buffer().array() += self.grad(0, 0);
    });
}

Tensor mean(const Tensor& a) {
    const double count = static_cast<double>(a.value().size());
    if (count == 0) throw std::invalid_argument("mean of empty tensor");
    return scale(sum(a), 1.0 / count);
}

Tensor softmax_rows(const Tensor& a) {
    Matrix out = a.value();
    for (Index r = 0; r < out.rows(); ++r) {
        const double m = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    return make_result(std::move(out), {a}, [](Node& self) {
        Matrix& g = parent(self, 0).grad_buffer();
        for (Index r = 0; r < self.value.rows(); ++r) {
            const double dot = self.grad.row(r).dot(self.value.row(r));
            g.row(r).array() += self.value.row(r).array() * (self.grad.row(r).array() - dot);
        }
    });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
    if (!training || rate == 0.0) return a;
    const double keep = 1.0 / (1.0 - rate);
    Matrix mask(a.rows(), a.cols());
    for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? 0.0 : keep;
    Matrix out = a.value().cwiseProduct(mask);
    return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
        parent(self, 0).grad_buffer() += self.grad.cwiseProduct(mask);
    });
}

Tensor gather_rows(const Tensor& a, std::span<const NodeId> rows) {
    Matrix out(static_cast<Index>(rows.size()), a.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= a.rows()) throw std::out_of_range("gather_rows: index out of range");
        out.row(static_cast<Index>(k)) = a.value().row(rows[k]);
    }
    std::vector<NodeId> idx(rows.begin(), rows.end());
    return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
        Matrix& g = parent(self, 0).grad_buffer();
        for (std::size_t k = 0; k < idx.size(); ++k) g.row(idx[k]) += self.grad.row(static_cast<Index>(k));
    });
}

Tensor scatter_add_rows(const Tensor& a, std::span<const NodeId> index, Index out_rows) {
    if (static_cast<Index>(index.size()) != a.rows()) throw std::invalid_argument("scatter_add_rows: index size");
    Matrix out = Matrix::Zero(out_rows, a.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= out_rows) throw std::out_of_range("scatter_add_rows: index out of range");
        out.row(index[k]) += a.value().row(static_cast<Index>(k));
    }
    std::vector<NodeId> idx(index.begin(), index.end());
    return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
        Matrix& g = parent(self, 0).grad_buffer();
        for (std::size_t k = 0; k < idx.size(); ++k) g.row(static_cast<Index>(k)) += self.grad.row(idx[k]);
    });
}

std::shared_ptr<const SparseOperator> SparseOperator::from_triplets(
    Index rows, Index cols, const std::vector<Eigen::Triplet<double>>& entries) {
    auto op = std::make_shared<SparseOperator>();
    op->forward.resize(rows, cols);
    op->forward.setFromTriplets(entries.begin(), entries.end());
    op->transpose = op->forward.transpose();
    return op;
}

Tensor spmm(const std::shared_ptr<const SparseOperator>& op, const Tensor& a) {
    if (op->forward.cols() != a.rows()) throw std::invalid_argument("spmm: dimension mismatch");
    Matrix out = op->forward * a.value();
    return make_result(std::move(out), {a}, [op](Node& self) {
        parent(self, 0).grad_buffer().noalias() += op->transpose * self.grad;
    });
}

Tensor segment_reduce(const Tensor& a, const Segments& seg, Reduce op) {
    const Index cols = a.cols();
    const auto count = static_cast<Index>(seg.count());
    Matrix out = Matrix::Zero(count, cols);
    for (NodeId m : seg.members)
        if (m >= a.rows()) throw std::out_of_range("segment_reduce: member out of range");

    if (op == Reduce::Sum || op == Reduce::Mean) {
        for (Index s = 0; s < count; ++s) {
            const std::size_t b = seg.offsets[s], e = seg.offsets[s + 1];
            for (std::size_t k = b; k < e; ++k) out.row(s) += a.value().row(seg.members[k]);
            if (op == Reduce::Mean && e > b) out.row(s) /= static_cast<double>(e - b);
        }
        return make_result(std::move(out), {a}, [seg, op](Node& self) {
            Matrix& g = parent(self, 0).grad_buffer();
            for (std::size_t s = 0; s < seg.count(); ++s) {
                const std::size_t b = seg.offsets[s], e = seg.offsets[s + 1];
                if (e == b) continue;
                const double w = op == Reduce::Mean ? 1.0 / static_cast<double>(e - b) : 1.0;
                for (std::size_t k = b; k < e; ++k)
                    g.row(seg.members[k]) += w * self.grad.row(static_cast<Index>(s));
            }
        });
    }

    // Max/Min: remember which member won each (segment, column) entry.
    std::vector<NodeId> winner(static_cast<std::size_t>(count * cols), 0);
    std::vector<std::uint8_t> filled(static_cast<std::size_t>(count), 0);
    const bool is_max = op == Reduce::Max;
    for (Index s = 0; s < count; ++s) {
        const std::size_t b = seg.offsets[s], e = seg.offsets[s + 1];
        if (e == b) continue;
        filled[s] = 1;
        for (Index c = 0; c < cols; ++c) {
            NodeId best = seg.members[b];
            double best_v = a.value()(best, c);
            for (std::size_t k = b + 1; k < e; ++k) {
                const double v = a.value()(seg.members[k], c);
                if (is_max ? v > best_v : v < best_v) {
                    best_v = v;
                    best = seg.members[k];
                }
            }
            out(s, c) = best_v;
            winner[static_cast<std::size_t>(s * cols + c)] = best;
        }
    }
    return make_result(std::move(out), {a}, [winner = std::move(winner), filled = std::move(filled)](Node& self) {
        Matrix& g = parent(self, 0).grad_buffer();
        const Index cols = self.value.cols();
        for (Index s = 0; s < self.value.rows(); ++s) {
            if (!filled[static_cast<std::size_t>(s)]) continue;
            for (Index c = 0; c < cols; ++c) g(winner[static_cast<std::size_t>(s * cols + c)], c) += self.grad(s, c);
        }
    });
}

Tensor gatv2_attention(const Tensor& source, const Tensor& target, const Tensor& attn, const Segments& seg,
                       double slope, std::vector<double>* alpha_out) {
    require_same_shape(source, target, "gatv2_attention");
    if (attn.rows() != 1 || attn.cols() != source.cols())
        throw std::invalid_argument("gatv2_attention: attention vector must be 1 x F");
    if (static_cast<Index>(seg.count()) != target.rows())
        throw std::invalid_argument("gatv2_attention: one segment per target row required");
    const Index f = source.cols();
    const auto& xs = source.value();
    const auto& xt = target.value();
    const auto a = attn.value().row(0);

    std::vector<double> alpha(seg.members.size());
    Matrix out = Matrix::Zero(target.rows(), f);
    Eigen::RowVectorXd z(f);
    for (std::size_t i = 0; i < seg.count(); ++i) {
        const std::size_t b = seg.offsets[i], e = seg.offsets[i + 1];
        if (e == b) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = b; k < e; ++k) {
            z = xs.row(seg.members[k]) + xt.row(static_cast<Index>(i));
            const double score = (z.array() > 0.0).select(z, slope * z).dot(a);
            alpha[k] = score;
            m = std::max(m, score);
        }
        double total = 0.0;
        for (std::size_t k = b; k < e; ++k) {
            alpha[k] = std::exp(alpha[k] - m);
            total += alpha[k];
        }
        for (std::size_t k = b; k < e; ++k) {
            alpha[k] /= total;
            out.row(static_cast<Index>(i)) += alpha[k] * xs.row(seg.members[k]);
        }
    }
    if (alpha_out) *alpha_out = alpha;

    return make_result(std::move(out), {source, target, attn}, [seg, alpha = std::move(alpha), slope](Node& self) {
        Node& ps = parent(self, 0);
        Node& pt = parent(self, 1);
        Node& pa = parent(self, 2);
        const auto& xs = ps.value;
        const auto& xt = pt.value;
        const auto a = pa.value.row(0);
        const Index f = xs.cols();
        Matrix* gs = ps.requires_grad ? &ps.grad_buffer() : nullptr;
        Matrix* gt = pt.requires_grad ? &pt.grad_buffer() : nullptr;
        Matrix* ga = pa.requires_grad ? &pa.grad_buffer() : nullptr;
        Eigen::RowVectorXd z(f), dz(f);
        std::vector<double> dalpha;
        for (std::size_t i = 0; i < seg.count(); ++i) {
            const std::size_t b = seg.offsets[i], e = seg.offsets[i + 1];
            if (e == b) continue;
            const auto g = self.grad.row(static_cast<Index>(i));
            dalpha.resize(e - b);
            double weighted = 0.0;
            for (std::size_t k = b; k < e; ++k) {
                dalpha[k - b] = g.dot(xs.row(seg.members[k]));
                weighted += alpha[k] * dalpha[k - b];
            }
            for (std::size_t k = b; k < e; ++k) {
                const NodeId j = seg.members[k];
                if (gs) gs->row(j) += alpha[k] * g;
                const double de = alpha[k] * (dalpha[k - b] - weighted);
                z = xs.row(j) + xt.row(static_cast<Index>(i));
                if (ga) ga->row(0) += de * (z.array() > 0.0).select(z, slope * z);
                dz = de * (z.array() > 0.0).select(a, slope * a);
                if (gs) gs->row(j) += dz;
                if (gt) gt->row(static_cast<Index>(i)) += dz;
            }
        }
    });
}

Tensor masked_cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const NodeId> rows,
                            std::span<const double> class_weights) {
    if (rows.empty()) throw std::invalid_argument("masked_cross_entropy: empty mask");
    if (static_cast<Index>(labels.size()) != logits.rows())
        throw std::invalid_argument("masked_cross_entropy: label count != logit rows");
    const Index classes = logits.cols();
    if (!class_weights.empty() && static_cast<Index>(class_weights.size()) != classes)
        throw std::invalid_argument("masked_cross_entropy: class weight count mismatch");
    const auto& x = logits.value();

    Matrix probs(static_cast<Index>(rows.size()), classes);
    double loss = 0.0, total_weight = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const NodeId r = rows[k];
        const int y = labels[r];
        if (y < 0 || y >= classes) throw std::invalid_argument("masked_cross_entropy: label out of range");
        const double m = x.row(r).maxCoeff();
        const double lse = m + std::log((x.row(r).array() - m).exp().sum());
        probs.row(static_cast<Index>(k)) = (x.row(r).array() - lse).exp();
        const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(y)];
        loss += w * (lse - x(r, y));
        total_weight += w;
    }
    Matrix out(1, 1);
    out(0, 0) = loss / total_weight;
    std::vector<NodeId> idx(rows.begin(), rows.end());
    std::vector<double> weights(class_weights.begin(), class_weights.end());
    std::vector<int> ys;
    ys.reserve(idx.size());
    for (NodeId r : idx) ys.push_back(labels[r]);
    return make_result(std::move(out), {logits},
                       [idx = std::move(idx), ys = std::move(ys), weights = std::move(weights),
                        probs = std::move(probs), total_weight](Node& self) {
                           Matrix& g = parent(self, 0).grad_buffer();
                           const double scale = self.grad(0, 0) / total_weight;
                           for (std::size_t k = 0; k < idx.size(); ++k) {
                               const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(ys[k])];
                               auto row = g.row(idx[k]);
                               row += (w * scale) * probs.row(static_cast<Index>(k));
                               row(ys[k]) -= w * scale;
                           }
                       });
}

}  // namespace amlbench::nn
