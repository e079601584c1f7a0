#pragma once

// Reverse-mode autodiff over dense row-major matrices. One tape records a
// single forward pass; parameters are read from a const ParameterTree and
// their gradients are accumulated into a caller-owned Gradients object, so a
// tree can be shared across threads during evaluation.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcx/nn/parameters.hpp"

namespace bcx::nn {

template <class T>
using SparseMap = Eigen::SparseMatrix<T, Eigen::RowMajor>;

struct Var {
    int id = -1;
};

template <class T>
class Tape {
public:
    using Mat = Matrix<T>;

    explicit Tape(const ParameterTree<T>& tree, bool record = true)
        : tree_(&tree), record_(record), bound_(tree.size(), -1) {}

    bool recording() const { return record_; }
    const Mat& value(Var v) const { return nodes_[v.id].value; }
    const Mat& grad(Var v) const { return nodes_[v.id].grad; }
    std::size_t size() const { return nodes_.size(); }

    Var constant(Mat m) { return push(std::move(m), false); }

    Var param(int index) {
        auto& slot = bound_.at(static_cast<std::size_t>(index));
        if (slot < 0) {
            slot = push(tree_->value(index), record_).id;
            nodes_[slot].param = index;
        }
        return {slot};
    }

    // Seeds d(out)/d(out) with `seed` (out must be 1x1) and accumulates
    // parameter gradients into `grads`.
    void backward(Var out, Gradients<T>& grads, T seed = T(1)) {
        if (!record_) throw std::logic_error("Tape::backward on a non-recording tape");
        auto& root = nodes_[out.id];
        if (root.value.size() != 1) throw std::invalid_argument("Tape::backward: output must be 1x1");
        for (auto& n : nodes_) n.grad.resize(0, 0);
        root.grad = Mat::Constant(1, 1, seed);
        for (int i = out.id; i >= 0; --i) {
            auto& n = nodes_[i];
            if (n.grad.size() == 0) continue;
            if (n.backward) n.backward(*this, i);
            if (n.param >= 0) grads.accumulate(n.param, n.grad);
        }
    }

    // --- ops ---------------------------------------------------------------

    Var matmul(Var a, Var b) {
        check(cols(a) == rows(b), "matmul", a, b);
        Var out = push(value(a) * value(b), needs(a, b));
        on_backward(out, [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.needs(a)) t.acc(a).noalias() += g * t.value(b).transpose();
            if (t.needs(b)) t.acc(b).noalias() += t.value(a).transpose() * g;
        });
        return out;
    }

    // a * b^T
    Var matmul_nt(Var a, Var b) {
        check(cols(a) == cols(b), "matmul_nt", a, b);
        Var out = push(value(a) * value(b).transpose(), needs(a, b));
        on_backward(out, [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.needs(a)) t.acc(a).noalias() += g * t.value(b);
            if (t.needs(b)) t.acc(b).noalias() += g.transpose() * t.value(a);
        });
        return out;
    }

    // x [n x c] + row [1 x c] broadcast over rows.
    Var add_row(Var x, Var row) {
        if (rows(row) != 1 || cols(row) != cols(x)) shape_error("add_row", x, row);
        Mat y = value(x);
        y.rowwise() += value(row).row(0);
        Var out = push(std::move(y), needs(x, row));
        on_backward(out, [x, row](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.needs(x)) t.acc(x) += g;
            if (t.needs(row)) t.acc(row) += g.colwise().sum();
        });
        return out;
    }

    Var add(Var a, Var b) {
        if (rows(a) != rows(b) || cols(a) != cols(b)) shape_error("add", a, b);
        Var out = push(value(a) + value(b), needs(a, b));
        on_backward(out, [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.needs(a)) t.acc(a) += g;
            if (t.needs(b)) t.acc(b) += g;
        });
        return out;
    }

    // scale * x + shift, both constants.
    Var affine(Var x, T scale, T shift = T(0)) {
        Mat y = (value(x).array() * scale + shift).matrix();
        Var out = push(std::move(y), needs(x));
        on_backward(out, [x, scale](Tape& t, int self) { t.acc(x) += t.nodes_[self].grad * scale; });
        return out;
    }

    Var swish(Var x) {
        const Mat& v = value(x);
        Mat y(v.rows(), v.cols());
        for (Eigen::Index i = 0; i < v.size(); ++i) y.data()[i] = v.data()[i] * sigmoid(v.data()[i]);
        Var out = push(std::move(y), needs(x));
        on_backward(out, [x](Tape& t, int self) {
            const Mat& v = t.value(x);
            const Mat& g = t.nodes_[self].grad;
            Mat& dx = t.acc(x);
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                const T s = sigmoid(v.data()[i]);
                dx.data()[i] += g.data()[i] * (s + v.data()[i] * s * (T(1) - s));
            }
        });
        return out;
    }

    // Row-wise standardization, then per-column scale and shift ([1 x c] each).
    Var layer_norm(Var x, Var scale, Var shift, T eps = T(1e-5)) {
        const Mat& v = value(x);
        const auto n = v.rows(), c = v.cols();
        if (rows(scale) != 1 || cols(scale) != c || rows(shift) != 1 || cols(shift) != c) {
            shape_error("layer_norm", x, scale);
        }
        auto xhat = std::make_shared<Mat>(n, c);
        auto inv = std::make_shared<std::vector<T>>(n);
        Mat y(n, c);
        for (Eigen::Index r = 0; r < n; ++r) {
            const T mean = v.row(r).mean();
            const T var = (v.row(r).array() - mean).square().mean();
            const T is = T(1) / std::sqrt(var + eps);
            (*inv)[r] = is;
            xhat->row(r) = (v.row(r).array() - mean) * is;
            y.row(r) = xhat->row(r).cwiseProduct(value(scale).row(0)) + value(shift).row(0);
        }
        Var out = push(std::move(y), needs(x, scale) || needs(shift));
        on_backward(out, [x, scale, shift, xhat, inv](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.needs(shift)) t.acc(shift) += g.colwise().sum();
            if (t.needs(scale)) t.acc(scale) += g.cwiseProduct(*xhat).colwise().sum();
            if (!t.needs(x)) return;
            Mat& dx = t.acc(x);
            const auto c = static_cast<T>(g.cols());
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                const auto dxh = (g.row(r).cwiseProduct(t.value(scale).row(0))).eval();
                const T m1 = dxh.sum() / c;
                const T m2 = dxh.cwiseProduct(xhat->row(r)).sum() / c;
                dx.row(r).array() += (*inv)[r] * (dxh.array() - m1 - xhat->row(r).array() * m2);
            }
        });
        return out;
    }

    Var concat_cols(std::span<const Var> parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
        const auto n = rows(parts[0]);
        Eigen::Index total = 0;
        bool req = false;
        for (Var p : parts) {
            if (rows(p) != n) shape_error("concat_cols", parts[0], p);
            total += cols(p);
            req = req || needs(p);
        }
        Mat y(n, total);
        Eigen::Index at = 0;
        for (Var p : parts) {
            y.middleCols(at, cols(p)) = value(p);
            at += cols(p);
        }
        Var out = push(std::move(y), req);
        std::vector<Var> ps(parts.begin(), parts.end());
        on_backward(out, [ps](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            Eigen::Index at = 0;
            for (Var p : ps) {
                if (t.needs(p)) t.acc(p) += g.middleCols(at, t.cols(p));
                at += t.cols(p);
            }
        });
        return out;
    }

    Var concat_cols(std::initializer_list<Var> parts) {
        return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
    }

    Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
        if (start < 0 || count < 0 || start + count > cols(x)) {
            throw std::invalid_argument("slice_cols: range out of bounds");
        }
        Var out = push(value(x).middleCols(start, count), needs(x));
        on_backward(out, [x, start, count](Tape& t, int self) {
            t.acc(x).middleCols(start, count) += t.nodes_[self].grad;
        });
        return out;
    }

    // Softmax along each row restricted to columns with mask[j] != 0; masked
    // columns get weight exactly 0 and receive exactly zero gradient. An empty
    // mask means every column is active.
    Var masked_softmax_rows(Var s, std::span<const std::uint8_t> mask) {
        const Mat& v = value(s);
        const auto n = v.rows(), c = v.cols();
        if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != c) {
            throw std::invalid_argument("masked_softmax_rows: mask length " + std::to_string(mask.size()) +
                                        " != " + std::to_string(c));
        }
        auto active = [&mask](Eigen::Index j) { return mask.empty() || mask[j] != 0; };
        bool any = false;
        for (Eigen::Index j = 0; j < c && !any; ++j) any = active(j);
        if (!any) throw std::invalid_argument("masked_softmax_rows: every source is masked");
        Mat w = Mat::Zero(n, c);
        for (Eigen::Index r = 0; r < n; ++r) {
            T mx = -std::numeric_limits<T>::infinity();
            for (Eigen::Index j = 0; j < c; ++j) {
                if (active(j)) mx = std::max(mx, v(r, j));
            }
            T sum = 0;
            for (Eigen::Index j = 0; j < c; ++j) {
                if (active(j)) sum += (w(r, j) = std::exp(v(r, j) - mx));
            }
            w.row(r) /= sum;
        }
        Var out = push(std::move(w), needs(s));
        on_backward(out, [s](Tape& t, int self) {
            const Mat& w = t.nodes_[self].value;
            const Mat& g = t.nodes_[self].grad;
            Mat& ds = t.acc(s);
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                const T dot = w.row(r).dot(g.row(r));
                ds.row(r).array() += w.row(r).array() * (g.row(r).array() - dot);
            }
        });
        return out;
    }

    // Constant sparse linear map applied on the left: map * x.
    Var sparse_left(std::shared_ptr<const SparseMap<T>> map, Var x) {
        if (map->cols() != rows(x)) {
            throw std::invalid_argument("sparse_left: map has " + std::to_string(map->cols()) + " columns, input has " +
                                        std::to_string(rows(x)) + " rows");
        }
        Var out = push(Mat(*map * value(x)), needs(x));
        on_backward(out, [map, x](Tape& t, int self) {
            t.acc(x).noalias() += map->transpose() * t.nodes_[self].grad;
        });
        return out;
    }

    // sqrt(sum_keep (p - t)^2) / sqrt(sum_keep t^2) for a single-column p.
    Var relative_l2(Var pred, std::span<const T> truth, std::span<const std::uint8_t> keep) {
        const Mat& p = value(pred);
        if (p.cols() != 1 || static_cast<std::size_t>(p.rows()) != truth.size() || keep.size() != truth.size()) {
            throw std::invalid_argument("relative_l2: shape mismatch");
        }
        T num = 0, den = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (!keep[i]) continue;
            const T d = p(i, 0) - truth[i];
            num += d * d;
            den += truth[i] * truth[i];
        }
        if (!(den > 0)) throw std::invalid_argument("relative_l2: zero norm on retained entries");
        num = std::sqrt(num);
        den = std::sqrt(den);
        Var out = push(Mat::Constant(1, 1, num / den), needs(pred));
        auto tr = std::make_shared<std::vector<T>>(truth.begin(), truth.end());
        auto kp = std::make_shared<std::vector<std::uint8_t>>(keep.begin(), keep.end());
        on_backward(out, [pred, tr, kp, num, den](Tape& t, int self) {
            if (num == 0) return;
            const T g = t.nodes_[self].grad(0, 0) / (num * den);
            const Mat& p = t.value(pred);
            Mat& dp = t.acc(pred);
            for (std::size_t i = 0; i < tr->size(); ++i) {
                if ((*kp)[i]) dp(i, 0) += g * (p(i, 0) - (*tr)[i]);
            }
        });
        return out;
    }

    // Sum of all entries, as a 1x1 value.
    Var sum(Var x) {
        Var out = push(Mat::Constant(1, 1, value(x).sum()), needs(x));
        on_backward(out, [x](Tape& t, int self) { t.acc(x).array() += t.nodes_[self].grad(0, 0); });
        return out;
    }

    Eigen::Index rows(Var v) const { return nodes_[v.id].value.rows(); }
    Eigen::Index cols(Var v) const { return nodes_[v.id].value.cols(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Tape&, int)> backward;
        bool requires_grad = false;
        int param = -1;
    };

    static T sigmoid(T x) { return T(1) / (T(1) + std::exp(-x)); }

    Var push(Mat value, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), Mat(), nullptr, requires_grad && record_, -1});
        return {static_cast<int>(nodes_.size()) - 1};
    }

    template <class F>
    void on_backward(Var out, F&& f) {
        if (nodes_[out.id].requires_grad) nodes_[out.id].backward = std::forward<F>(f);
    }

    bool needs(Var v) const { return nodes_[v.id].requires_grad; }
    bool needs(Var a, Var b) const { return needs(a) || needs(b); }

    Mat& acc(Var v) {
        auto& n = nodes_[v.id];
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    void check(bool ok, const char* op, Var a, Var b) const {
        if (!ok) shape_error(op, a, b);
    }

    [[noreturn]] void shape_error(const char* op, Var a, Var b) const {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(rows(a)) + "x" +
                                    std::to_string(cols(a)) + " vs " + std::to_string(rows(b)) + "x" +
                                    std::to_string(cols(b)));
    }

    const ParameterTree<T>* tree_;
    bool record_;
    std::vector<int> bound_;
    std::vector<Node> nodes_;
};

}  // namespace bcx::nn
