#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bcx/rng.hpp"

namespace bcx::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Named tensors plus Adam moments and the step counter. Indices are stable
// once created; layers hold indices, not pointers.
template <class T>
class ParameterTree {
public:
    using Mat = Matrix<T>;

    int add(const std::string& name, Mat init) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        index_[name] = static_cast<int>(names_.size());
        names_.push_back(name);
        m_.push_back(Mat::Zero(init.rows(), init.cols()));
        v_.push_back(Mat::Zero(init.rows(), init.cols()));
        values_.push_back(std::move(init));
        return static_cast<int>(names_.size()) - 1;
    }

    // Glorot-uniform weights.
    int add_glorot(const std::string& name, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Mat w(fan_in, fan_out);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
        return add(name, std::move(w));
    }

    int add_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, T value) {
        return add(name, Mat::Constant(rows, cols, value));
    }

    std::size_t size() const { return names_.size(); }
    const std::string& name(int i) const { return names_.at(i); }
    const Mat& value(int i) const { return values_.at(i); }
    Mat& value(int i) { return values_.at(i); }
    Mat& first_moment(int i) { return m_.at(i); }
    Mat& second_moment(int i) { return v_.at(i); }
    const Mat& first_moment(int i) const { return m_.at(i); }
    const Mat& second_moment(int i) const { return v_.at(i); }
    std::int64_t step() const { return step_; }
    void set_step(std::int64_t s) { step_ = s; }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
        return n;
    }

    bool all_finite() const {
        for (const auto& v : values_) {
            if (!v.allFinite()) return false;
        }
        return true;
    }

    void set_zero() {
        for (auto& v : values_) v.setZero();
    }

    template <class U>
    ParameterTree<U> cast() const {
        ParameterTree<U> out;
        for (std::size_t i = 0; i < size(); ++i) {
            const int k = out.add(names_[i], values_[i].template cast<U>());
            out.first_moment(k) = m_[i].template cast<U>();
            out.second_moment(k) = v_[i].template cast<U>();
        }
        out.set_step(step_);
        return out;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<Mat> values_, m_, v_;
    std::int64_t step_ = 0;
};

template <class T>
class Gradients {
public:
    using Mat = Matrix<T>;

    explicit Gradients(const ParameterTree<T>& tree) {
        for (std::size_t i = 0; i < tree.size(); ++i) {
            g_.push_back(Mat::Zero(tree.value(i).rows(), tree.value(i).cols()));
        }
    }

    void accumulate(int i, const Mat& g) { g_.at(i) += g; }
    void set_zero() {
        for (auto& g : g_) g.setZero();
    }
    void scale(T s) {
        for (auto& g : g_) g *= s;
    }
    std::size_t size() const { return g_.size(); }
    const Mat& operator[](int i) const { return g_.at(i); }
    Mat& operator[](int i) { return g_.at(i); }

    bool all_finite() const {
        for (const auto& g : g_) {
            if (!g.allFinite()) return false;
        }
        return true;
    }

private:
    std::vector<Mat> g_;
};

}  // namespace bcx::nn
