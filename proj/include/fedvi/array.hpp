#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace fedvi {

// Dense row-major tables for counters, kernels, and value functions.
// The last dimension of each table is contiguous and exposed as a span.

template <typename T>
class Array2 {
public:
    Array2() = default;
    Array2(int n0, int n1, T init = T())
        : n0_(n0), n1_(n1), v_(static_cast<std::size_t>(n0) * n1, init) {}

    T& operator()(int i, int j) {
        assert(i >= 0 && i < n0_ && j >= 0 && j < n1_);
        return v_[static_cast<std::size_t>(i) * n1_ + j];
    }
    const T& operator()(int i, int j) const {
        assert(i >= 0 && i < n0_ && j >= 0 && j < n1_);
        return v_[static_cast<std::size_t>(i) * n1_ + j];
    }

    std::span<T> row(int i) {
        return {v_.data() + static_cast<std::size_t>(i) * n1_, static_cast<std::size_t>(n1_)};
    }
    std::span<const T> row(int i) const {
        return {v_.data() + static_cast<std::size_t>(i) * n1_, static_cast<std::size_t>(n1_)};
    }

    int dim0() const { return n0_; }
    int dim1() const { return n1_; }
    void fill(T value) { v_.assign(v_.size(), value); }
    const std::vector<T>& raw() const { return v_; }
    std::vector<T>& raw() { return v_; }

    bool operator==(const Array2&) const = default;

private:
    int n0_ = 0, n1_ = 0;
    std::vector<T> v_;
};

template <typename T>
class Array3 {
public:
    Array3() = default;
    Array3(int n0, int n1, int n2, T init = T())
        : n0_(n0), n1_(n1), n2_(n2),
          v_(static_cast<std::size_t>(n0) * n1 * n2, init) {}

    T& operator()(int i, int j, int k) {
        assert(i >= 0 && i < n0_ && j >= 0 && j < n1_ && k >= 0 && k < n2_);
        return v_[(static_cast<std::size_t>(i) * n1_ + j) * n2_ + k];
    }
    const T& operator()(int i, int j, int k) const {
        assert(i >= 0 && i < n0_ && j >= 0 && j < n1_ && k >= 0 && k < n2_);
        return v_[(static_cast<std::size_t>(i) * n1_ + j) * n2_ + k];
    }

    std::span<T> row(int i, int j) {
        return {v_.data() + (static_cast<std::size_t>(i) * n1_ + j) * n2_,
                static_cast<std::size_t>(n2_)};
    }
    std::span<const T> row(int i, int j) const {
        return {v_.data() + (static_cast<std::size_t>(i) * n1_ + j) * n2_,
                static_cast<std::size_t>(n2_)};
    }

    int dim0() const { return n0_; }
    int dim1() const { return n1_; }
    int dim2() const { return n2_; }
    void fill(T value) { v_.assign(v_.size(), value); }
    const std::vector<T>& raw() const { return v_; }
    std::vector<T>& raw() { return v_; }

    bool operator==(const Array3&) const = default;

private:
    int n0_ = 0, n1_ = 0, n2_ = 0;
    std::vector<T> v_;
};

template <typename T>
class Array4 {
public:
    Array4() = default;
    Array4(int n0, int n1, int n2, int n3, T init = T())
        : n0_(n0), n1_(n1), n2_(n2), n3_(n3),
          v_(static_cast<std::size_t>(n0) * n1 * n2 * n3, init) {}

    T& operator()(int i, int j, int k, int l) {
        assert(i >= 0 && i < n0_ && j >= 0 && j < n1_ && k >= 0 && k < n2_ && l >= 0 && l < n3_);
        return v_[((static_cast<std::size_t>(i) * n1_ + j) * n2_ + k) * n3_ + l];
    }
    const T& operator()(int i, int j, int k, int l) const {
        assert(i >= 0 && i < n0_ && j >= 0 && j < n1_ && k >= 0 && k < n2_ && l >= 0 && l < n3_);
        return v_[((static_cast<std::size_t>(i) * n1_ + j) * n2_ + k) * n3_ + l];
    }

    std::span<T> row(int i, int j, int k) {
        return {v_.data() + ((static_cast<std::size_t>(i) * n1_ + j) * n2_ + k) * n3_,
                static_cast<std::size_t>(n3_)};
    }
    std::span<const T> row(int i, int j, int k) const {
        return {v_.data() + ((static_cast<std::size_t>(i) * n1_ + j) * n2_ + k) * n3_,
                static_cast<std::size_t>(n3_)};
    }

    int dim0() const { return n0_; }
    int dim1() const { return n1_; }
    int dim2() const { return n2_; }
    int dim3() const { return n3_; }
    void fill(T value) { v_.assign(v_.size(), value); }
    const std::vector<T>& raw() const { return v_; }
    std::vector<T>& raw() { return v_; }

    bool operator==(const Array4&) const = default;

private:
    int n0_ = 0, n1_ = 0, n2_ = 0, n3_ = 0;
    std::vector<T> v_;
};

}  // namespace fedvi
