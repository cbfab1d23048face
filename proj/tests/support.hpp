#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "lasp/lasp.hpp"

namespace lasp::testing {

inline Dense2D random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0) {
    Dense2D m(rows, cols);
    for (auto& v : m.data()) {
        v = rng.normal(0.0, sd);
    }
    return m;
}

inline Dense2D unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
    Dense2D m = random_matrix(rows, cols, rng);
    normalize_rows(m);
    return m;
}

inline std::vector<double> flat(const Dense2D& m) { return m.data(); }

inline Dense2D reshape(std::span<const double> x, std::size_t rows, std::size_t cols) {
    return Dense2D(rows, cols, std::vector<double>(x.begin(), x.end()));
}

// Raw (unnormalized) points -> unit rows; used so finite differences stay on
// the loss's natural domain.
inline Dense2D normalized_copy(std::span<const double> x, std::size_t rows, std::size_t cols) {
    Dense2D m = reshape(x, rows, cols);
    normalize_rows(m);
    return m;
}

// Chain dL/de through row normalization to get dL/dx for x -> e = x / |x|.
inline std::vector<double> grad_through_normalize(std::span<const double> x, std::size_t rows, std::size_t cols,
                                                  const Dense2D& grad_e) {
    Dense2D m = reshape(x, rows, cols);
    const auto norms = normalize_rows(m);
    return normalize_rows_backward<double>(m, norms, grad_e).data();
}

// Batch of `origins` samples with two views each; view pairs share a label.
inline LabeledEmbeddingBatch random_batch(std::size_t origins, std::size_t dim, std::size_t classes,
                                          std::size_t current_origins, Rng& rng) {
    LabeledEmbeddingBatch b;
    b.embeddings = unit_rows(2 * origins, dim, rng);
    for (std::size_t o = 0; o < origins; ++o) {
        // First two origins share a class so every anchor has a positive.
        const int label = static_cast<int>(rng.below(classes));
        for (int v = 0; v < 2; ++v) {
            b.labels.push_back(label);
            b.view_origin.push_back(o);
            b.current.push_back(o < current_origins);
        }
    }
    return b;
}

// Unit embeddings where only the first `informative` dims carry class
// signal (per-class ±1 means); every dim gets N(0, sigma) noise.
struct PlantedSet {
    Dense2D embeddings;
    std::vector<int> labels;
};

inline PlantedSet planted_embeddings(Rng& rng, std::size_t classes = 4, std::size_t dim = 64,
                                     std::size_t informative = 10, std::size_t n = 256, double sigma = 1.0) {
    Dense2D means(classes, dim);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t k = 0; k < informative; ++k) {
            means(c, k) = rng.bernoulli(0.5) ? 1.0 : -1.0;
        }
    }
    PlantedSet p{Dense2D(n, dim), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = i % classes;
        p.labels[i] = static_cast<int>(c);
        for (std::size_t k = 0; k < dim; ++k) {
            p.embeddings(i, k) = means(c, k) + rng.normal(0.0, sigma);
        }
    }
    normalize_rows(p.embeddings);
    return p;
}

// Number of the `top` largest mask entries that fall in [0, informative).
inline std::size_t top_hits(const MaskVector& mask, std::size_t top, std::size_t informative) {
    const auto s = mask.sigmoid();
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    std::size_t hits = 0;
    for (std::size_t t = 0; t < top && t < idx.size(); ++t) {
        hits += idx[t] < informative ? 1 : 0;
    }
    return hits;
}

inline ModelConfig small_model_config(std::size_t input = 6, std::size_t emb = 4) {
    ModelConfig c;
    c.input_dim = input;
    c.encoder_widths = {8};
    c.representation_dim = 6;
    c.projection_hidden = 6;
    c.embedding_dim = emb;
    return c;
}

// Synthetic, fast run config for integration tests.
inline RunConfig tiny_run_config(Method method, std::uint64_t seed = 0) {
    RunConfig c;
    c.dataset.classes = 4;
    c.dataset.dim = 8;
    c.dataset.separation = 4.0;
    c.dataset.train_per_class = 24;
    c.dataset.test_per_class = 12;
    c.n_tasks = 2;
    c.model.encoder_widths = {16};
    c.model.representation_dim = 12;
    c.model.projection_hidden = 12;
    c.model.embedding_dim = 8;
    c.memory_capacity = 16;
    c.epochs_per_task = 2;
    c.batch_size = 16;
    c.method = method;
    c.seed = seed;
    c.mask.restarts = 2;
    c.mask.epochs = 10;
    c.probe.epochs = 50;
    return c;
}

}  // namespace lasp::testing
