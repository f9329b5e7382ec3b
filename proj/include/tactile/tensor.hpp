#pragma once

#include "tactile/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace tactile {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s);

/// Cache-line aligned storage. Eigen picks its vectorised peeling from the
/// buffer address, so a fixed alignment keeps reductions bit-reproducible.
template <typename T, size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align})); }
    void deallocate(T* p, size_t) { ::operator delete(p, std::align_val_t{Align}); }
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor. float for training, double for gradient checks.
template <typename T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape dims, T fill = T{}) : dims_(std::move(dims)), data_(shape_numel(dims_), fill) { check_dims(); }
    Tensor(Shape dims, std::initializer_list<T> data) : Tensor(std::move(dims), AlignedVector<T>(data)) {}
    Tensor(Shape dims, const std::vector<T>& data) : Tensor(std::move(dims), AlignedVector<T>(data.begin(), data.end())) {}
    Tensor(Shape dims, AlignedVector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
        check_dims();
        if (data_.size() != shape_numel(dims_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                             shape_str(dims_));
        }
    }

    [[nodiscard]] const Shape& dims() const { return dims_; }
    [[nodiscard]] size_t dim(size_t i) const { return dims_.at(i); }
    [[nodiscard]] size_t rank() const { return dims_.size(); }
    [[nodiscard]] size_t numel() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    [[nodiscard]] const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    [[nodiscard]] std::span<const T> values() const { return data_; }
    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    [[nodiscard]] Tensor reshaped(Shape dims) const {
        if (shape_numel(dims) != numel()) {
            throw ShapeError("cannot reshape " + shape_str(dims_) + " to " + shape_str(dims));
        }
        return Tensor(std::move(dims), data_);
    }

    template <typename U>
    [[nodiscard]] Tensor<U> cast() const {
        return Tensor<U>(dims_, AlignedVector<U>(data_.begin(), data_.end()));
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    void check_dims() const {
        for (size_t d : dims_)
            if (d == 0) throw ShapeError("tensor extents must be positive: " + shape_str(dims_));
    }

    Shape dims_;
    AlignedVector<T> data_;
};

/// Named tensors (encoder, latent heads, decoder, regressor), ordered by name.
/// The version counter changes whenever values are modified through this
/// interface so forward caches can detect that they went stale.
template <typename T>
class Parameters {
  public:
    using Map = std::map<std::string, Tensor<T>>;

    void add(const std::string& name, Tensor<T> t) {
        if (!entries_.emplace(name, std::move(t)).second) {
            throw ConfigError("duplicate parameter name '" + name + "'");
        }
        ++version_;
    }
    [[nodiscard]] bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    [[nodiscard]] const Tensor<T>& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ShapeError("missing parameter '" + name + "'");
        return it->second;
    }
    Tensor<T>& mutable_at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ShapeError("missing parameter '" + name + "'");
        ++version_;
        return it->second;
    }
    [[nodiscard]] const Map& entries() const { return entries_; }
    [[nodiscard]] size_t size() const { return entries_.size(); }
    [[nodiscard]] size_t scalar_count() const {
        size_t n = 0;
        for (const auto& [_, t] : entries_) n += t.numel();
        return n;
    }
    [[nodiscard]] uint64_t version() const { return version_; }
    void touch() { ++version_; }

    [[nodiscard]] Parameters zeros_like() const {
        Parameters out;
        for (const auto& [k, t] : entries_) out.add(k, Tensor<T>(t.dims()));
        return out;
    }
    void set_zero() {
        for (auto& [_, t] : entries_) t.fill(T{});
        ++version_;
    }
    template <typename U>
    [[nodiscard]] Parameters<U> cast() const {
        Parameters<U> out;
        for (const auto& [k, t] : entries_) out.add(k, t.template cast<U>());
        return out;
    }
    /// Throws ShapeError unless both maps have identical names and dims.
    template <typename U>
    void require_same_layout(const Parameters<U>& other, const std::string& what) const {
        if (other.size() != size()) throw ShapeError(what + ": parameter count differs");
        auto it = other.entries().begin();
        for (const auto& [k, t] : entries_) {
            if (it->first != k || it->second.dims() != t.dims()) {
                throw ShapeError(what + ": layout differs at '" + k + "'");
            }
            ++it;
        }
    }

    bool operator==(const Parameters& o) const { return entries_ == o.entries_; }

  private:
    Map entries_;
    uint64_t version_ = 0;
};

using ModelParameters = Parameters<float>;

} // namespace tactile
