#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace lasp;
using namespace lasp::testing;

namespace {

// Independent direct evaluations; no log-sum-exp tricks, no shared helpers.
double brute_supcon(const LabeledEmbeddingBatch& b, double tau) {
    const auto& e = b.embeddings;
    const std::size_t n = e.rows();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!b.current[i]) {
            continue;
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i) {
                denom += std::exp(dot<double>(e.row(i), e.row(k)) / tau);
            }
        }
        double acc = 0.0;
        int pos = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && b.labels[j] == b.labels[i]) {
                acc += std::log(std::exp(dot<double>(e.row(i), e.row(j)) / tau) / denom);
                ++pos;
            }
        }
        loss += -acc / pos;
    }
    return loss;
}

double brute_r(const Dense2D& e, double eta, std::size_t i, std::size_t j) {
    double denom = 0.0;
    for (std::size_t k = 0; k < e.rows(); ++k) {
        if (k != i) {
            denom += std::exp(dot<double>(e.row(i), e.row(k)) / eta);
        }
    }
    return std::exp(dot<double>(e.row(i), e.row(j)) / eta) / denom;
}

double brute_ird(const Dense2D& e_old, const Dense2D& e_new, double eta1, double eta2) {
    double loss = 0.0;
    for (std::size_t i = 0; i < e_new.rows(); ++i) {
        for (std::size_t j = 0; j < e_new.rows(); ++j) {
            if (j != i) {
                loss -= brute_r(e_old, eta2, i, j) * std::log(brute_r(e_new, eta1, i, j));
            }
        }
    }
    return loss;
}

Dense2D brute_slice(const Dense2D& e, const std::vector<std::size_t>& dims) {
    Dense2D out(e.rows(), dims.size());
    for (std::size_t i = 0; i < e.rows(); ++i) {
        double n = 0.0;
        for (auto d : dims) {
            n += e(i, d) * e(i, d);
        }
        n = std::sqrt(n);
        for (std::size_t k = 0; k < dims.size(); ++k) {
            out(i, k) = e(i, dims[k]) / n;
        }
    }
    return out;
}

double brute_cos(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    return ab / std::sqrt(aa * bb);
}

double brute_mask_loss(const Dense2D& e, const std::vector<int>& labels, const ClassMeans& means,
                       const std::vector<double>& s, double lambda) {
    double align = 0.0;
    for (std::size_t i = 0; i < e.rows(); ++i) {
        std::vector<double> u(s.size());
        std::vector<double> v(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double w = 1.0 / (1.0 + std::exp(-s[k]));
            u[k] = e(i, k) * w;
            v[k] = means.means.at(labels[i])[k] * w;
        }
        align += brute_cos(u, v);
    }
    double l1 = 0.0;
    for (double x : s) {
        l1 += std::abs(x);
    }
    return -align / static_cast<double>(e.rows()) + lambda * l1;
}

LabeledEmbeddingBatch batch_with_positives(std::size_t origins, std::size_t dim, std::size_t current, Rng& rng) {
    // Two classes; view pairs guarantee a positive for every anchor.
    auto b = random_batch(origins, dim, 2, current, rng);
    return b;
}

}  // namespace

TEST(AsyncSupCon, IdenticalEmbeddingsOneClass) {
    LabeledEmbeddingBatch b;
    b.embeddings = Dense2D::from_rows({{1, 0}, {1, 0}, {1, 0}, {1, 0}});
    b.labels = {0, 0, 0, 0};
    b.view_origin = {0, 0, 1, 1};
    b.current = {true, true, true, true};
    const auto r = async_supcon(b, {1.0});
    EXPECT_NEAR(r.loss, 4.0 * std::log(3.0), 1e-12);
}

TEST(AsyncSupCon, EmptyAnchorSetGivesZero) {
    Rng rng(1);
    auto b = batch_with_positives(4, 5, 0, rng);
    const auto r = async_supcon(b, {0.5});
    EXPECT_EQ(r.loss, 0.0);
    for (double g : r.grad.data()) {
        EXPECT_EQ(g, 0.0);
    }
}

TEST(AsyncSupCon, MatchesBruteForceAndFiniteDifferences) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto b = batch_with_positives(4, 1 + rng.below(16), 1 + rng.below(4), rng);
        const std::size_t rows = b.embeddings.rows();
        const std::size_t cols = b.embeddings.cols();
        const auto r = async_supcon(b, {0.5});
        EXPECT_NEAR(r.loss, brute_supcon(b, 0.5), 1e-10 * std::max(1.0, std::abs(r.loss)));
        auto fn = [&](std::span<const double> x) {
            auto c = b;
            c.embeddings = reshape(x, rows, cols);
            return brute_supcon(c, 0.5);
        };
        EXPECT_LE(relative_error(r.grad.data(), finite_diff_grad(fn, b.embeddings.data())), 1e-5);
    }
}

TEST(AsyncSupCon, MemoryViewsOnlyInDenominator) {
    Rng rng(3);
    auto b = batch_with_positives(4, 6, 2, rng);
    // Moving a memory view changes the loss (it is a negative/positive term)
    // but a memory-only batch has no anchors.
    auto c = b;
    for (auto&& f : c.current) {
        f = false;
    }
    EXPECT_EQ(async_supcon(c, {0.5}).loss, 0.0);
    EXPECT_GT(async_supcon(b, {0.5}).loss, 0.0);
}

TEST(AsyncSupCon, AnchorWithoutPositiveThrows) {
    LabeledEmbeddingBatch b;
    b.embeddings = Dense2D::from_rows({{1, 0}, {0, 1}, {1, 0}, {0, 1}});
    b.labels = {0, 1, 2, 2};  // views 0 and 1 come from one origin but disagree on label
    b.view_origin = {0, 0, 1, 1};
    b.current = {true, true, false, false};
    EXPECT_THROW((void)async_supcon(b, {0.5}), Error);
}

TEST(AsyncSupCon, RejectsOddOrUnpairedViews) {
    LabeledEmbeddingBatch b;
    b.embeddings = Dense2D::from_rows({{1, 0}, {0, 1}, {1, 0}});
    b.labels = {0, 0, 0};
    b.view_origin = {0, 0, 1};
    b.current = {true, true, true};
    EXPECT_THROW((void)async_supcon(b, {0.5}), Error);
}

TEST(SimilarityMatrix, OrthonormalRowsAreUniform) {
    const auto r = similarity_matrix(Dense2D::identity(4), 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_NEAR(r.values(i, j), i == j ? 0.0 : 1.0 / 3.0, 1e-15);
        }
    }
}

TEST(SimilarityMatrix, RowsSumToOne) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto e = unit_rows(2 + 2 * rng.below(8), 1 + rng.below(16), rng);
        const auto r = similarity_matrix(e, rng.uniform(0.05, 2.0));
        for (std::size_t i = 0; i < r.size(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (j != i) {
                    EXPECT_GT(r.values(i, j), 0.0);
                }
                s += r.values(i, j);
            }
            EXPECT_EQ(r.values(i, i), 0.0);
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
    }
}

TEST(SimilarityMatrix, MatchesDirectComputation) {
    Rng rng(5);
    const auto e = unit_rows(3, 4, rng);
    const auto r = similarity_matrix(e, 0.7);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i != j) {
                EXPECT_NEAR(r.values(i, j), brute_r(e, 0.7, i, j), 1e-14);
            }
        }
    }
}

TEST(SimilarityMatrix, HighTemperatureIsUniform) {
    Rng rng(6);
    const auto e = unit_rows(6, 5, rng);
    const auto r = similarity_matrix(e, 1e6);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            if (i != j) {
                EXPECT_NEAR(r.values(i, j), 1.0 / 5.0, 1e-4);
            }
        }
    }
}

TEST(SimilarityMatrix, NeedsTwoRows) {
    EXPECT_THROW((void)similarity_matrix(Dense2D::from_rows({{1.0, 0.0}}), 1.0), Error);
}

TEST(IrdLoss, UniformRowsGiveEntropySum) {
    const auto e = Dense2D::identity(4);
    const auto r = similarity_matrix(e, 1.0);
    EXPECT_NEAR(ird_loss(r, e, 1.0).loss, 4.0 * std::log(3.0), 1e-12);
}

TEST(IrdLoss, GibbsMinimumAtGeneratingEmbeddings) {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto e = unit_rows(6, 5, rng);
        const double eta = rng.uniform(0.1, 1.0);
        const auto r = similarity_matrix(e, eta);
        const double at_min = ird_loss(r, e, eta).loss;
        Dense2D p = e;
        const double sd = rng.uniform(0.01, 1.0);
        for (auto& v : p.data()) {
            v += rng.normal(0.0, sd);
        }
        normalize_rows(p);
        EXPECT_LE(at_min, ird_loss(r, p, eta).loss + 1e-12);
    }
}

TEST(IrdLoss, MatchesBruteForceAndFiniteDifferences) {
    Rng rng(8);
    const IRDConfig cfg{0.2, 0.1};
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t rows = 2 + 2 * rng.below(4);
        const std::size_t cols = 1 + rng.below(16);
        const auto e_old = unit_rows(rows, cols, rng);
        const auto e_new = unit_rows(rows, cols, rng);
        const auto r = full_ird(e_old, e_new, cfg);
        EXPECT_NEAR(r.loss, brute_ird(e_old, e_new, cfg.eta1, cfg.eta2), 1e-10 * std::max(1.0, r.loss));
        auto fn = [&](std::span<const double> x) { return brute_ird(e_old, reshape(x, rows, cols), cfg.eta1, cfg.eta2); };
        EXPECT_LE(relative_error(r.grad.data(), finite_diff_grad(fn, e_new.data())), 1e-5);
    }
}

TEST(IrdLoss, DimensionMismatchThrows) {
    Rng rng(9);
    const auto r = similarity_matrix(unit_rows(4, 3, rng), 1.0);
    EXPECT_THROW((void)ird_loss(r, unit_rows(6, 3, rng), 1.0), DimensionError);
}

TEST(SelectiveEmbeddings, FullSelectionKeepsUnitVector) {
    const auto e = Dense2D::from_rows({{0.6, 0.8, 0.0}});
    const auto out = selective_embeddings(e, MaskVector::uniform(3, 3.0));
    EXPECT_EQ(out, e);
}

TEST(SelectiveEmbeddings, AlreadyUnitAfterRestriction) {
    const auto e = Dense2D::from_rows({{0.6, 0.8, 0.0, 0.0}});
    const auto out = selective_embeddings(e, MaskVector{{2.0, 2.0, -2.0, -2.0}});
    EXPECT_NEAR(out(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(out(0, 1), 0.8, 1e-15);
    EXPECT_EQ(out.cols(), 2u);
}

TEST(SelectiveEmbeddings, Renormalizes) {
    const auto e = Dense2D::from_rows({{0.5, 0.5, 0.5, 0.5}});
    const auto out = selective_embeddings(e, MaskVector{{2.0, 2.0, -2.0, -2.0}});
    EXPECT_NEAR(out(0, 0), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(out(0, 1), std::sqrt(0.5), 1e-15);
}

TEST(SelectiveEmbeddings, KeepBelowSelectsTheComplement) {
    const MaskVector m{{2.0, 2.0, -2.0, -2.0}};
    EXPECT_EQ(selected_dims(m, {0.5, SelectionRule::keep_below}), (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(selected_dims(m, {0.5, SelectionRule::keep_above}), (std::vector<std::size_t>{0, 1}));
    // sigmoid(0) = 0.5 exactly is not "above".
    EXPECT_TRUE(selected_dims(MaskVector::uniform(3), {}).empty());
}

TEST(SelectiveEmbeddings, EmptySelectionSaysFallBack) {
    const auto e = Dense2D::from_rows({{0.6, 0.8}});
    try {
        (void)selective_embeddings(e, MaskVector::uniform(2, -1.0));
        FAIL() << "expected EmptySelectionError";
    } catch (const EmptySelectionError& err) {
        EXPECT_NE(std::string(err.what()).find("full IRD"), std::string::npos);
    }
}

TEST(SelectiveIrd, FullMaskEqualsPlainIrd) {
    Rng rng(10);
    const IRDConfig cfg{0.2, 0.01};
    for (int trial = 0; trial < 20; ++trial) {
        const auto e_old = unit_rows(8, 6, rng);
        const auto e_new = unit_rows(8, 6, rng);
        const auto plain = full_ird(e_old, e_new, cfg);
        const auto sel = selective_ird(e_old, e_new, MaskVector::uniform(6, 1.0), cfg);
        EXPECT_NEAR(sel.loss, plain.loss, 1e-12 * std::max(1.0, plain.loss));
        // The slice normalization projects out the radial direction only.
        Dense2D proj = plain.grad;
        for (std::size_t i = 0; i < proj.rows(); ++i) {
            const double r = dot<double>(proj.row(i), e_new.row(i));
            for (std::size_t k = 0; k < proj.cols(); ++k) {
                proj(i, k) -= r * e_new(i, k);
            }
        }
        EXPECT_LE(relative_error(sel.grad.data(), proj.data()), 1e-10);
    }
}

TEST(SelectiveIrd, SelfDistillationIsGibbsMinimum) {
    Rng rng(11);
    const IRDConfig cfg{0.3, 0.3};
    const auto e = unit_rows(6, 8, rng);
    const std::vector<std::size_t> dims{0, 2, 5};
    const auto sel = selective_ird(e, e, dims, cfg);
    const auto r = similarity_matrix(brute_slice(e, dims), 0.3);
    double entropy = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (i != j) {
                entropy -= r.values(i, j) * std::log(r.values(i, j));
            }
        }
    }
    EXPECT_NEAR(sel.loss, entropy, 1e-12);
}

TEST(SelectiveIrd, MatchesBruteForceAndFiniteDifferences) {
    Rng rng(12);
    const IRDConfig cfg{0.2, 0.1};
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t rows = 2 + 2 * rng.below(4);
        const auto e_old = unit_rows(rows, 8, rng);
        const auto e_new = unit_rows(rows, 8, rng);
        auto dims = rng.choose(8, 4);
        std::sort(dims.begin(), dims.end());
        const auto r = selective_ird(e_old, e_new, dims, cfg);
        auto fn = [&](std::span<const double> x) {
            return brute_ird(brute_slice(e_old, dims), brute_slice(reshape(x, rows, 8), dims), cfg.eta1, cfg.eta2);
        };
        EXPECT_NEAR(r.loss, fn(e_new.data()), 1e-10 * std::max(1.0, r.loss));
        EXPECT_LE(relative_error(r.grad.data(), finite_diff_grad(fn, e_new.data())), 1e-5);
        // Unselected coordinates get no gradient.
        for (std::size_t k = 0; k < 8; ++k) {
            if (std::find(dims.begin(), dims.end(), k) == dims.end()) {
                for (std::size_t i = 0; i < rows; ++i) {
                    EXPECT_EQ(r.grad(i, k), 0.0);
                }
            }
        }
    }
}

TEST(ClassMeans, SingleSampleIsItsOwnMean) {
    const auto e = Dense2D::from_rows({{0.6, 0.8}, {1.0, 0.0}});
    const auto m = class_means(e, {3, 7});
    EXPECT_EQ(m.means.at(3), (std::vector<double>{0.6, 0.8}));
    EXPECT_EQ(m.means.at(7), (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(m.counts.at(3), 1u);
}

TEST(ClassMeans, AntipodalPairCancels) {
    const auto e = Dense2D::from_rows({{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}});
    const auto m = class_means(e, {0, 0, 1});
    EXPECT_EQ(m.means.at(0), (std::vector<double>{0.0, 0.0}));
    // The degenerate class is skipped by the classifier; class 1 remains.
    EXPECT_EQ(ncmc_masked_predict(std::vector<double>{0.0, 1.0}, m, MaskVector::uniform(2)), 1);
    const auto only_degenerate = class_means(Dense2D::from_rows({{1.0, 0.0}, {-1.0, 0.0}}), {0, 0});
    EXPECT_THROW(MaskedNcmc(only_degenerate, MaskVector::uniform(2)), Error);
}

TEST(ClassMeans, ArithmeticMean) {
    Rng rng(13);
    const auto e = unit_rows(3, 4, rng);
    const auto m = class_means(e, {1, 1, 1});
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(m.means.at(1)[k], (e(0, k) + e(1, k) + e(2, k)) / 3.0, 1e-15);
    }
}

TEST(ClassMeans, EmptyDatasetThrows) { EXPECT_THROW((void)class_means(Dense2D(0, 3), {}), Error); }

TEST(MaskedNcmc, ExactMeanIsPredicted) {
    const auto e = Dense2D::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
    const auto m = class_means(e, {4, 5, 6});
    const MaskVector mask{{0.3, -0.2, 1.0}};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(ncmc_masked_predict(e.row(i), m, mask), 4 + static_cast<int>(i));
    }
}

TEST(MaskedNcmc, UniformMaskIsPlainCosineNcm) {
    Rng rng(14);
    const auto e = unit_rows(30, 5, rng);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 30; ++i) {
        labels.push_back(static_cast<int>(i % 3));
    }
    const auto m = class_means(e, labels);
    const auto q = unit_rows(50, 5, rng);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        int best = -1;
        double best_cos = -2.0;
        for (const auto& [c, mean] : m.means) {
            const double cs = brute_cos(std::vector<double>(q.row(i).begin(), q.row(i).end()), mean);
            if (cs > best_cos) {
                best_cos = cs;
                best = c;
            }
        }
        for (double shift : {0.0, -3.0, 2.5}) {
            EXPECT_EQ(ncmc_masked_predict(q.row(i), m, MaskVector::uniform(5, shift)), best);
        }
    }
}

TEST(MaskedNcmc, TiesGoToLowestClassId) {
    ClassMeans m;
    m.means[9] = {1.0, 0.0};
    m.means[2] = {0.0, 1.0};
    m.counts[9] = 1;
    m.counts[2] = 1;
    const std::vector<double> e{1.0, 1.0};
    EXPECT_EQ(ncmc_masked_predict(e, m, MaskVector::uniform(2)), 2);
}

// Dims 0-1 carry the class; dims 2-7 are shared noise with large variance.
TEST(MaskedNcmc, InformativeMaskBeatsUniform) {
    Rng rng(15);
    const std::size_t n = 200;
    Dense2D e(n, 8);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 2);
        const double sign = labels[i] == 0 ? 1.0 : -1.0;
        e(i, 0) = sign * 1.0 + rng.normal(0.0, 0.5);
        e(i, 1) = sign * 1.0 + rng.normal(0.0, 0.5);
        for (std::size_t k = 2; k < 8; ++k) {
            e(i, k) = 1.0 + rng.normal(0.0, 2.0);
        }
    }
    normalize_rows(e);
    const auto m = class_means(e, labels);
    const double uniform = MaskedNcmc(m, MaskVector::uniform(8)).accuracy(e, labels);
    const double focused =
        MaskedNcmc(m, MaskVector{{6.0, 6.0, -6.0, -6.0, -6.0, -6.0, -6.0, -6.0}}).accuracy(e, labels);
    EXPECT_GT(focused, uniform);
    EXPECT_GT(focused, 0.9);
}

TEST(MaskLoss, PerfectAlignmentGivesMinusOne) {
    const auto e = Dense2D::from_rows({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    const std::vector<int> labels{0, 0, 1};
    const auto m = class_means(e, labels);
    const auto r = mask_training_loss(e, labels, m, MaskVector{{0.4, -1.3}}, 0.0);
    EXPECT_NEAR(r.loss, -1.0, 1e-15);
}

TEST(MaskLoss, PenaltyIsAdditive) {
    Rng rng(16);
    const auto e = unit_rows(10, 4, rng);
    std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto m = class_means(e, labels);
    const MaskVector s{{0.5, -0.25, 1.5, -2.0}};
    const double base = mask_training_loss(e, labels, m, s, 0.0).loss;
    const double pen = mask_training_loss(e, labels, m, s, 0.3).loss;
    EXPECT_NEAR(pen - base, 0.3 * 4.25, 1e-14);
}

TEST(MaskLoss, SignSwitchFlipsAlignment) {
    Rng rng(17);
    const auto e = unit_rows(10, 4, rng);
    std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto m = class_means(e, labels);
    const MaskVector s{{0.5, -0.25, 1.5, -2.0}};
    const auto a = mask_training_loss(e, labels, m, s, 0.0, AlignmentSign::maximize);
    const auto b = mask_training_loss(e, labels, m, s, 0.0, AlignmentSign::as_displayed);
    EXPECT_NEAR(a.loss, -b.loss, 1e-15);
}

TEST(MaskLoss, MatchesBruteForceAndFiniteDifferences) {
    Rng rng(18);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + rng.below(15);
        const std::size_t n = 4 + rng.below(8);
        const auto e = unit_rows(n, d, rng);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(i % 3);
        }
        const auto m = class_means(e, labels);
        MaskVector s{std::vector<double>(d)};
        for (auto& v : s.raw) {
            v = rng.uniform(-2.0, 2.0);
        }
        const double lambda = rng.uniform(0.0, 0.1);
        const auto r = mask_training_loss(e, labels, m, s, lambda);
        auto fn = [&](std::span<const double> x) {
            return brute_mask_loss(e, labels, m, std::vector<double>(x.begin(), x.end()), lambda);
        };
        EXPECT_NEAR(r.loss, fn(s.raw), 1e-12);
        EXPECT_LE(relative_error(r.grad, finite_diff_grad(fn, s.raw)), 1e-5);
    }
}

TEST(MaskLoss, DegenerateSamplesAreSkippedAndCounted) {
    const auto e = Dense2D::from_rows({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    ClassMeans m;
    m.means[0] = {1.0, 0.0};
    m.means[1] = {0.0, 1.0};
    const auto r = mask_training_loss(e, {0, 0, 1}, m, MaskVector::uniform(2), 0.0);
    EXPECT_EQ(r.skipped, 1u);
    EXPECT_NEAR(r.loss, -2.0 / 3.0, 1e-15);
    EXPECT_THROW((void)mask_training_loss(Dense2D::from_rows({{0.0, 0.0}}), {0}, m, MaskVector::uniform(2), 0.0),
                 NumericError);
}
