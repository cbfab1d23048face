#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lasp/error.hpp"
#include "lasp/rng.hpp"

namespace lasp {

// Row-major dense matrix.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        require_dim("matrix data length", rows * cols, data_.size());
    }

    static Matrix from_rows(const std::vector<std::vector<T>>& rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.front().size();
        Matrix m(r, c);
        for (std::size_t i = 0; i < r; ++i) {
            require_dim("row length", c, rows[i].size());
            std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
        }
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = T{1};
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Dense2D = Matrix<double>;

template <typename T>
bool all_finite(std::span<const T> values) {
    return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void ensure_finite(const Matrix<T>& m, const char* what) {
    if (!all_finite<T>(m.data())) {
        throw NumericError(std::string("non-finite value in ") + what);
    }
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    T acc{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

template <typename T>
T norm(std::span<const T> a) {
    return std::sqrt(dot(a, a));
}

// out = a * b
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    require_dim("matmul inner dimension", a.cols(), b.rows());
    Matrix<T> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T* out_row = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            if (aik == T{}) {
                continue;
            }
            const T* b_row = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

// out = a^T * b
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
    require_dim("matmul_tn shared rows", a.rows(), b.rows());
    Matrix<T> out(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const T* b_row = b.row(r).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const T ari = a(r, i);
            if (ari == T{}) {
                continue;
            }
            T* out_row = out.row(i).data();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out_row[j] += ari * b_row[j];
            }
        }
    }
    return out;
}

// out = a * b^T
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
    require_dim("matmul_nt shared cols", a.cols(), b.cols());
    Matrix<T> out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            out(i, j) = dot<T>(a.row(i), b.row(j));
        }
    }
    return out;
}

enum class Activation { relu, identity };

template <typename T>
struct LinearLayer {
    Matrix<T> weights;  // in_dim x out_dim
    std::vector<T> bias;
    Activation activation = Activation::relu;

    [[nodiscard]] std::size_t in_dim() const { return weights.rows(); }
    [[nodiscard]] std::size_t out_dim() const { return weights.cols(); }

    bool operator==(const LinearLayer&) const = default;
};

// He (fan-in) initialization: weights ~ N(0, 2 / in_dim), zero bias.
template <typename T>
LinearLayer<T> make_linear(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng) {
    require(in_dim >= 1 && out_dim >= 1, "linear layer dimensions must be >= 1");
    LinearLayer<T> layer{Matrix<T>(in_dim, out_dim), std::vector<T>(out_dim, T{}), act};
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim));
    for (auto& w : layer.weights.data()) {
        w = static_cast<T>(rng.normal(0.0, stddev));
    }
    return layer;
}

template <typename T>
struct LinearCache {
    Matrix<T> input;
    Matrix<T> pre_activation;
};

template <typename T>
struct LinearForward {
    Matrix<T> pre_activation;
    Matrix<T> output;
};

template <typename T>
struct LinearGrad {
    Matrix<T> weights;
    std::vector<T> bias;
};

template <typename T>
LinearForward<T> forward_linear(const LinearLayer<T>& layer, const Matrix<T>& input) {
    require_dim("linear input columns", layer.in_dim(), input.cols());
    Matrix<T> pre = matmul(input, layer.weights);
    for (std::size_t i = 0; i < pre.rows(); ++i) {
        auto r = pre.row(i);
        for (std::size_t k = 0; k < r.size(); ++k) {
            r[k] += layer.bias[k];
        }
    }
    Matrix<T> out = pre;
    if (layer.activation == Activation::relu) {
        for (auto& v : out.data()) {
            v = v > T{} ? v : T{};
        }
    }
    return {std::move(pre), std::move(out)};
}

template <typename T>
struct LinearBackwardResult {
    LinearGrad<T> grad;
    Matrix<T> grad_input;
};

template <typename T>
LinearBackwardResult<T> backward_linear(const LinearLayer<T>& layer, const LinearCache<T>& cache,
                                        const Matrix<T>& upstream) {
    if (cache.input.empty() || cache.pre_activation.empty()) {
        throw Error("backward_linear: missing forward cache");
    }
    require_dim("backward cached input columns", layer.in_dim(), cache.input.cols());
    require_dim("backward upstream rows", cache.pre_activation.rows(), upstream.rows());
    require_dim("backward upstream columns", layer.out_dim(), upstream.cols());

    Matrix<T> local = upstream;
    if (layer.activation == Activation::relu) {
        auto& g = local.data();
        const auto& pre = cache.pre_activation.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(pre[i] > T{})) {
                g[i] = T{};
            }
        }
    }
    LinearBackwardResult<T> result;
    result.grad.weights = matmul_tn(cache.input, local);
    result.grad.bias.assign(layer.out_dim(), T{});
    for (std::size_t i = 0; i < local.rows(); ++i) {
        auto r = local.row(i);
        for (std::size_t k = 0; k < r.size(); ++k) {
            result.grad.bias[k] += r[k];
        }
    }
    result.grad_input = matmul_nt(local, layer.weights);
    return result;
}

template <typename T>
struct Normalized {
    std::vector<T> values;
    bool degenerate = false;
};

// v / max(|v|, eps). A zero-norm input comes back as zeros with the flag set.
template <typename T>
Normalized<T> l2_normalize(std::span<const T> v, T eps = T(1e-12)) {
    const T n = norm(v);
    Normalized<T> out{std::vector<T>(v.begin(), v.end()), n <= eps};
    const T denom = std::max(n, eps);
    for (auto& x : out.values) {
        x /= denom;
    }
    return out;
}

// In-place row normalization; returns the pre-normalization norms.
template <typename T>
std::vector<T> normalize_rows(Matrix<T>& m, T eps = T(1e-12)) {
    std::vector<T> norms(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        norms[i] = norm<T>(r);
        const T denom = std::max(norms[i], eps);
        for (auto& x : r) {
            x /= denom;
        }
    }
    return norms;
}

// Gradient through y = x / max(|x|, eps), given y, |x| and dL/dy.
template <typename T>
Matrix<T> normalize_rows_backward(const Matrix<T>& normalized, std::span<const T> norms, const Matrix<T>& upstream,
                                  T eps = T(1e-12)) {
    Matrix<T> out(upstream.rows(), upstream.cols());
    for (std::size_t i = 0; i < upstream.rows(); ++i) {
        auto y = normalized.row(i);
        auto g = upstream.row(i);
        auto o = out.row(i);
        if (norms[i] <= eps) {
            for (std::size_t k = 0; k < g.size(); ++k) {
                o[k] = g[k] / eps;
            }
            continue;
        }
        const T yg = dot<T>(y, g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            o[k] = (g[k] - y[k] * yg) / norms[i];
        }
    }
    return out;
}

// Central finite differences of a scalar function.
inline std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& fn,
                                            std::span<const double> point, double step = 1e-6) {
    require(step > 0.0, "finite_diff_grad: step must be positive");
    std::vector<double> x(point.begin(), point.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = x[i];
        x[i] = original + step;
        const double plus = fn(x);
        x[i] = original - step;
        const double minus = fn(x);
        x[i] = original;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw NumericError("finite_diff_grad: non-finite function value at coordinate " + std::to_string(i));
        }
        grad[i] = (plus - minus) / (2.0 * step);
    }
    return grad;
}

// max_i |a_i - b_i| / max(1e-8, max_i max(|a_i|, |b_i|)): the worst coordinate
// error relative to the gradient's overall scale.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    require_dim("relative_error length", a.size(), b.size());
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    }
    return diff / std::max(1e-8, scale);
}

}  // namespace lasp
