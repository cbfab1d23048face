#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "lasp/error.hpp"
#include "lasp/numerics.hpp"

namespace lasp {

// Two views per sample. current[i] marks views of the current task (the
// anchor set S of Async SupCon).
struct LabeledEmbeddingBatch {
    Dense2D embeddings;
    std::vector<int> labels;
    std::vector<std::size_t> view_origin;
    std::vector<bool> current;

    void validate() const {
        const std::size_t n = embeddings.rows();
        require_dim("batch labels", n, labels.size());
        require_dim("batch view_origin", n, view_origin.size());
        require_dim("batch current flags", n, current.size());
        if (n % 2 != 0) {
            throw Error("batch must hold an even number of views (two per sample)");
        }
        std::map<std::size_t, int> per_origin;
        for (auto o : view_origin) {
            ++per_origin[o];
        }
        for (auto [origin, count] : per_origin) {
            if (count != 2) {
                throw Error("sample " + std::to_string(origin) + " contributes " + std::to_string(count) +
                            " views; expected exactly 2");
            }
        }
    }
};

struct LossResult {
    double loss = 0.0;
    Dense2D grad;  // same shape as the embeddings the loss was taken on
};

struct SupConConfig {
    double tau = 0.5;
};

struct IRDConfig {
    double eta1 = 0.2;   // current model
    double eta2 = 0.01;  // past model
};

namespace detail {

// log sum_{k != i} exp(logits[k]) over one row of scaled dot products.
inline double logsumexp_excluding(std::span<const double> logits, std::size_t skip) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (k != skip) {
            mx = std::max(mx, logits[k]);
        }
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (k != skip) {
            acc += std::exp(logits[k] - mx);
        }
    }
    return mx + std::log(acc);
}

// Adds the effect of dL/d(e_i . e_k) = coeff[i][k] on the embeddings.
inline void scatter_dot_grad(const Dense2D& e, const Dense2D& coeff, Dense2D& grad) {
    const std::size_t n = e.rows();
    const std::size_t d = e.cols();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double c = coeff(i, k);
            if (c == 0.0) {
                continue;
            }
            double* gi = grad.row(i).data();
            double* gk = grad.row(k).data();
            const double* ei = e.row(i).data();
            const double* ek = e.row(k).data();
            for (std::size_t t = 0; t < d; ++t) {
                gi[t] += c * ek[t];
                gk[t] += c * ei[t];
            }
        }
    }
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

}  // namespace detail

inline LossResult async_supcon(const LabeledEmbeddingBatch& batch, const SupConConfig& cfg) {
    batch.validate();
    require(cfg.tau > 0.0, "supcon temperature must be positive");
    const auto& e = batch.embeddings;
    const std::size_t n = e.rows();
    LossResult out{0.0, Dense2D(n, e.cols())};
    if (n == 0) {
        return out;
    }
    const Dense2D gram = matmul_nt(e, e);
    Dense2D coeff(n, n);
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!batch.current[i]) {
            continue;
        }
        std::size_t positives = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && batch.labels[j] == batch.labels[i]) {
                ++positives;
            }
        }
        if (positives == 0) {
            throw Error("anchor view " + std::to_string(i) + " (label " + std::to_string(batch.labels[i]) +
                        ") has no positive in the batch");
        }
        for (std::size_t k = 0; k < n; ++k) {
            logits[k] = gram(i, k) / cfg.tau;
        }
        const double lse = detail::logsumexp_excluding(logits, i);
        const double inv_p = 1.0 / static_cast<double>(positives);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) {
                continue;
            }
            const bool positive = batch.labels[k] == batch.labels[i];
            if (positive) {
                out.loss -= inv_p * (logits[k] - lse);
            }
            const double softmax = std::exp(logits[k] - lse);
            coeff(i, k) = (softmax - (positive ? inv_p : 0.0)) / cfg.tau;
        }
    }
    detail::scatter_dot_grad(e, coeff, out.grad);
    return out;
}

// Row-stochastic similarity over j != i; the diagonal is stored as 0.
struct SimilarityMatrix {
    Dense2D values;

    [[nodiscard]] std::size_t size() const { return values.rows(); }
};

inline SimilarityMatrix similarity_matrix(const Dense2D& e, double eta) {
    require(e.rows() >= 2, "similarity_matrix needs at least 2 rows");
    require(eta > 0.0, "similarity temperature must be positive");
    const std::size_t n = e.rows();
    const Dense2D gram = matmul_nt(e, e);
    SimilarityMatrix r{Dense2D(n, n)};
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            logits[k] = gram(i, k) / eta;
        }
        const double lse = detail::logsumexp_excluding(logits, i);
        for (std::size_t j = 0; j < n; ++j) {
            r.values(i, j) = j == i ? 0.0 : std::exp(logits[j] - lse);
        }
    }
    return r;
}

// Cross-entropy between the (constant) past relation matrix and the current
// model's relation matrix at temperature eta1.
inline LossResult ird_loss(const SimilarityMatrix& past, const Dense2D& e_new, double eta1) {
    require_dim("ird rows", past.size(), e_new.rows());
    require(eta1 > 0.0, "ird temperature must be positive");
    const std::size_t n = e_new.rows();
    require(n >= 2, "ird_loss needs at least 2 rows");
    const Dense2D gram = matmul_nt(e_new, e_new);
    LossResult out{0.0, Dense2D(n, e_new.cols())};
    Dense2D coeff(n, n);
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            logits[k] = gram(i, k) / eta1;
        }
        const double lse = detail::logsumexp_excluding(logits, i);
        double row_mass = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                row_mass += past.values(i, j);
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double log_r = logits[j] - lse;
            out.loss -= past.values(i, j) * log_r;
            coeff(i, j) = (std::exp(log_r) * row_mass - past.values(i, j)) / eta1;
        }
    }
    detail::scatter_dot_grad(e_new, coeff, out.grad);
    return out;
}

// Learnable mask over embedding dimensions; the mask value is sigmoid(raw).
struct MaskVector {
    std::vector<double> raw;

    [[nodiscard]] std::size_t size() const { return raw.size(); }

    [[nodiscard]] std::vector<double> sigmoid() const {
        std::vector<double> out(raw.size());
        std::transform(raw.begin(), raw.end(), out.begin(), detail::sigmoid);
        return out;
    }

    [[nodiscard]] double l1() const {
        double acc = 0.0;
        for (double v : raw) {
            acc += std::abs(v);
        }
        return acc;
    }

    static MaskVector uniform(std::size_t dim, double raw_value = 0.0) { return {std::vector<double>(dim, raw_value)}; }

    bool operator==(const MaskVector&) const = default;
};

// keep_above keeps dims with sigmoid(s) > threshold; keep_below keeps
// sigmoid(s) <= threshold.
enum class SelectionRule { keep_above, keep_below };

struct SelectionConfig {
    double threshold = 0.5;
    SelectionRule rule = SelectionRule::keep_above;
};

inline std::vector<std::size_t> selected_dims(const MaskVector& mask, const SelectionConfig& sel = {}) {
    require(sel.threshold > 0.0 && sel.threshold < 1.0, "selection threshold must lie in (0, 1)");
    std::vector<std::size_t> dims;
    const auto s_hat = mask.sigmoid();
    for (std::size_t k = 0; k < s_hat.size(); ++k) {
        const bool above = s_hat[k] > sel.threshold;
        if (above == (sel.rule == SelectionRule::keep_above)) {
            dims.push_back(k);
        }
    }
    return dims;
}

struct EmptySelectionError : Error {
    EmptySelectionError()
        : Error("mask selects no embedding dimensions; fall back to full IRD instead of selective distillation") {}
};

struct SelectedEmbeddings {
    Dense2D values;  // unit rows over the selected dims
    std::vector<double> norms;
    std::vector<std::size_t> dims;
};

inline SelectedEmbeddings select_embeddings(const Dense2D& e, const std::vector<std::size_t>& dims) {
    if (dims.empty()) {
        throw EmptySelectionError();
    }
    SelectedEmbeddings out{Dense2D(e.rows(), dims.size()), {}, dims};
    for (std::size_t i = 0; i < e.rows(); ++i) {
        for (std::size_t k = 0; k < dims.size(); ++k) {
            require(dims[k] < e.cols(), "selected dimension out of range");
            out.values(i, k) = e(i, dims[k]);
        }
    }
    out.norms = normalize_rows(out.values);
    return out;
}

inline Dense2D selective_embeddings(const Dense2D& e, const MaskVector& mask, const SelectionConfig& sel = {}) {
    require_dim("mask length", e.cols(), mask.size());
    return select_embeddings(e, selected_dims(mask, sel)).values;
}

// IRD on the selected, renormalized slice of old and new embeddings.
inline LossResult selective_ird(const Dense2D& e_old, const Dense2D& e_new, const std::vector<std::size_t>& dims,
                                const IRDConfig& cfg) {
    require_dim("selective_ird rows", e_old.rows(), e_new.rows());
    require_dim("selective_ird cols", e_old.cols(), e_new.cols());
    const auto old_sel = select_embeddings(e_old, dims);
    const auto new_sel = select_embeddings(e_new, dims);
    const auto past = similarity_matrix(old_sel.values, cfg.eta2);
    auto inner = ird_loss(past, new_sel.values, cfg.eta1);
    const Dense2D through_norm = normalize_rows_backward<double>(new_sel.values, new_sel.norms, inner.grad);
    LossResult out{inner.loss, Dense2D(e_new.rows(), e_new.cols())};
    for (std::size_t i = 0; i < e_new.rows(); ++i) {
        for (std::size_t k = 0; k < dims.size(); ++k) {
            out.grad(i, dims[k]) = through_norm(i, k);
        }
    }
    return out;
}

inline LossResult selective_ird(const Dense2D& e_old, const Dense2D& e_new, const MaskVector& mask,
                                const IRDConfig& cfg, const SelectionConfig& sel = {}) {
    require_dim("mask length", e_new.cols(), mask.size());
    return selective_ird(e_old, e_new, selected_dims(mask, sel), cfg);
}

// Plain IRD with the past matrix computed from e_old at eta2.
inline LossResult full_ird(const Dense2D& e_old, const Dense2D& e_new, const IRDConfig& cfg) {
    require_dim("ird rows", e_old.rows(), e_new.rows());
    return ird_loss(similarity_matrix(e_old, cfg.eta2), e_new, cfg.eta1);
}

// Per-class mean embedding; means are not renormalized.
struct ClassMeans {
    std::map<int, std::vector<double>> means;
    std::map<int, std::size_t> counts;

    [[nodiscard]] bool empty() const { return means.empty(); }
    [[nodiscard]] bool contains(int c) const { return means.count(c) != 0; }
};

inline ClassMeans class_means(const Dense2D& e, const std::vector<int>& labels) {
    require_dim("class_means labels", e.rows(), labels.size());
    if (e.rows() == 0) {
        throw Error("class_means: empty dataset");
    }
    ClassMeans out;
    for (std::size_t i = 0; i < e.rows(); ++i) {
        auto& m = out.means[labels[i]];
        if (m.empty()) {
            m.assign(e.cols(), 0.0);
        }
        for (std::size_t k = 0; k < e.cols(); ++k) {
            m[k] += e(i, k);
        }
        ++out.counts[labels[i]];
    }
    for (auto& [c, m] : out.means) {
        const double inv = 1.0 / static_cast<double>(out.counts[c]);
        for (auto& v : m) {
            v *= inv;
        }
    }
    return out;
}

namespace detail {

inline std::vector<double> masked_unit(std::span<const double> v, std::span<const double> weights, bool& degenerate) {
    std::vector<double> u(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        u[k] = v[k] * weights[k];
    }
    auto n = l2_normalize<double>(u);
    degenerate = n.degenerate;
    return n.values;
}

}  // namespace detail

// Nearest class mean by cosine after reweighting both sides by sigmoid(s).
// Ties go to the smallest class id.
class MaskedNcmc {
public:
    MaskedNcmc(const ClassMeans& means, const MaskVector& mask) : weights_(mask.sigmoid()) {
        require(!means.empty(), "masked NCMC needs at least one class");
        for (const auto& [c, m] : means.means) {
            require_dim("class mean length", mask.size(), m.size());
            bool degenerate = false;
            auto unit = detail::masked_unit(m, weights_, degenerate);
            if (!degenerate) {
                classes_.push_back(c);
                units_.push_back(std::move(unit));
            }
        }
        if (classes_.empty()) {
            throw Error("masked NCMC: every masked class mean is degenerate (zero norm)");
        }
    }

    [[nodiscard]] int predict(std::span<const double> e) const {
        require_dim("embedding length", weights_.size(), e.size());
        bool degenerate = false;
        const auto u = detail::masked_unit(e, weights_, degenerate);
        int best = classes_.front();
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes_.size(); ++c) {
            const double score = dot<double>(u, units_[c]);
            if (score > best_score) {
                best_score = score;
                best = classes_[c];
            }
        }
        return best;
    }

    [[nodiscard]] double accuracy(const Dense2D& e, const std::vector<int>& labels) const {
        require_dim("accuracy labels", e.rows(), labels.size());
        if (e.rows() == 0) {
            return 0.0;
        }
        std::size_t hits = 0;
        for (std::size_t i = 0; i < e.rows(); ++i) {
            hits += predict(e.row(i)) == labels[i] ? 1 : 0;
        }
        return static_cast<double>(hits) / static_cast<double>(e.rows());
    }

private:
    std::vector<double> weights_;
    std::vector<int> classes_;
    std::vector<std::vector<double>> units_;
};

inline int ncmc_masked_predict(std::span<const double> e, const ClassMeans& means, const MaskVector& mask) {
    return MaskedNcmc(means, mask).predict(e);
}

// maximize: loss = -mean cos + lambda |s|_1 (trains the NCMC as a classifier).
// as_displayed: loss = +mean cos + lambda |s|_1.
enum class AlignmentSign { maximize, as_displayed };

struct MaskLossResult {
    double loss = 0.0;
    double alignment = 0.0;  // mean cosine over the used samples, divided by |D|
    std::vector<double> grad;
    std::size_t skipped = 0;
};

inline MaskLossResult mask_training_loss(const Dense2D& e, const std::vector<int>& labels, const ClassMeans& means,
                                         const MaskVector& mask, double lambda,
                                         AlignmentSign sign = AlignmentSign::maximize, double eps = 1e-12) {
    require(lambda >= 0.0, "mask lambda must be >= 0");
    require_dim("mask loss labels", e.rows(), labels.size());
    require_dim("mask length", e.cols(), mask.size());
    const std::size_t d = e.cols();
    const auto w = mask.sigmoid();
    MaskLossResult out;
    out.grad.assign(d, 0.0);
    if (e.rows() == 0) {
        throw Error("mask_training_loss: empty dataset");
    }
    const double direction = sign == AlignmentSign::maximize ? -1.0 : 1.0;
    const double inv_n = 1.0 / static_cast<double>(e.rows());

    std::vector<double> grad_w(d, 0.0);
    std::vector<double> u(d);
    std::vector<double> v(d);
    for (std::size_t i = 0; i < e.rows(); ++i) {
        const auto it = means.means.find(labels[i]);
        require(it != means.means.end(), "mask_training_loss: no class mean for label " + std::to_string(labels[i]));
        const auto& m = it->second;
        const auto row = e.row(i);
        for (std::size_t k = 0; k < d; ++k) {
            u[k] = row[k] * w[k];
            v[k] = m[k] * w[k];
        }
        const double nu = norm<double>(u);
        const double nv = norm<double>(v);
        if (nu < eps || nv < eps) {
            ++out.skipped;
            continue;
        }
        const double c = dot<double>(u, v) / (nu * nv);
        out.alignment += c * inv_n;
        const double scale = direction * inv_n;
        for (std::size_t k = 0; k < d; ++k) {
            const double dc_du = v[k] / (nu * nv) - c * u[k] / (nu * nu);
            const double dc_dv = u[k] / (nu * nv) - c * v[k] / (nv * nv);
            grad_w[k] += scale * (dc_du * row[k] + dc_dv * m[k]);
        }
    }
    if (out.skipped == e.rows()) {
        throw NumericError("mask_training_loss: every sample has a degenerate masked norm");
    }
    out.loss = direction * out.alignment + lambda * mask.l1();
    for (std::size_t k = 0; k < d; ++k) {
        const double s = mask.raw[k];
        const double l1_grad = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
        out.grad[k] = grad_w[k] * w[k] * (1.0 - w[k]) + lambda * l1_grad;
    }
    return out;
}

}  // namespace lasp
