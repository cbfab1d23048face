#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"

using namespace lasp;
using namespace lasp::testing;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("lasp_test_" + name)).string();
}

// Scalar loss of e with a fixed random weighting, backpropagated by the model
// and by finite differences on every parameter.
double weighted_sum(const Dense2D& e, const Dense2D& u) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        s += u.data()[i] * e.data()[i];
    }
    return s;
}

}  // namespace

TEST(Model, DefaultLayout) {
    ModelConfig c;
    c.input_dim = 32;
    Rng rng(0);
    const auto m = Model::init(c, rng);
    ASSERT_EQ(m.layers().size(), 5u);
    EXPECT_EQ(m.layers()[0].out_dim(), 256u);
    EXPECT_EQ(m.layers()[1].out_dim(), 128u);
    EXPECT_EQ(m.layers()[2].out_dim(), 128u);
    EXPECT_EQ(m.layers()[3].out_dim(), 128u);
    EXPECT_EQ(m.layers()[4].out_dim(), 64u);
    EXPECT_EQ(m.layers()[3].activation, Activation::relu);
    EXPECT_EQ(m.layers()[4].activation, Activation::identity);
    EXPECT_EQ(m.encoder_depth(), 3u);
}

TEST(Model, OutputsHaveUnitNorm) {
    Rng rng(1);
    const auto m = Model::init(small_model_config(), rng);
    const auto out = m.embed(random_matrix(20, 6, rng));
    for (std::size_t i = 0; i < 20; ++i) {
        if (!out.degenerate[i]) {
            EXPECT_NEAR(norm<double>(out.embeddings.row(i)), 1.0, 1e-9);
            EXPECT_NEAR(norm<double>(out.representations.row(i)), 1.0, 1e-9);
        }
    }
}

TEST(Model, IdenticalRowsIdenticalEmbeddings) {
    Rng rng(2);
    const auto m = Model::init(small_model_config(), rng);
    Dense2D x(3, 6);
    const auto row = random_matrix(1, 6, rng);
    for (std::size_t i = 0; i < 3; ++i) {
        std::copy(row.data().begin(), row.data().end(), x.row(i).begin());
    }
    const auto out = m.embed(x);
    EXPECT_TRUE(std::equal(out.embeddings.row(0).begin(), out.embeddings.row(0).end(), out.embeddings.row(2).begin()));
}

TEST(Model, InputDimensionMismatch) {
    Rng rng(3);
    const auto m = Model::init(small_model_config(), rng);
    EXPECT_THROW((void)m.embed(random_matrix(2, 5, rng)), DimensionError);
}

TEST(Model, EmbeddingLargerThanHiddenIsRejected) {
    auto c = small_model_config();
    c.embedding_dim = c.projection_hidden + 1;
    Rng rng(4);
    EXPECT_THROW((void)Model::init(c, rng), ConfigError);
}

TEST(Model, BackwardMatchesFiniteDifferences) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cfg = small_model_config(5, 4);
        auto m = Model::init(cfg, rng);
        for (auto& l : m.layers()) {
            for (auto& b : l.bias) {
                b = rng.normal(0.0, 0.3);
            }
        }
        const Dense2D x = random_matrix(4, 5, rng);
        const Dense2D u = random_matrix(4, 4, rng);
        const Dense2D ur = random_matrix(4, cfg.representation_dim, rng);
        const auto fwd = m.embed(x);
        const auto grads = m.backward(fwd, u, &ur);
        for (std::size_t l = 0; l < m.layers().size(); ++l) {
            auto fn = [&](std::span<const double> w) {
                Model copy = m;
                copy.layers()[l].weights.data().assign(w.begin(), w.end());
                const auto out = copy.embed(x);
                return weighted_sum(out.embeddings, u) + weighted_sum(out.representations, ur);
            };
            EXPECT_LE(relative_error(grads[l].weights.data(), finite_diff_grad(fn, m.layers()[l].weights.data())),
                      1e-5)
                << "layer " << l;
            auto fb = [&](std::span<const double> b) {
                Model copy = m;
                copy.layers()[l].bias.assign(b.begin(), b.end());
                const auto out = copy.embed(x);
                return weighted_sum(out.embeddings, u) + weighted_sum(out.representations, ur);
            };
            EXPECT_LE(relative_error(grads[l].bias, finite_diff_grad(fb, m.layers()[l].bias)), 1e-5) << "layer " << l;
        }
    }
}

TEST(Model, BackwardWithoutCacheThrows) {
    Rng rng(6);
    const auto m = Model::init(small_model_config(), rng);
    EXPECT_THROW((void)m.backward(EmbedResult{}, Dense2D(1, 4)), Error);
}

TEST(Snapshot, UnchangedByTraining) {
    Rng rng(7);
    auto m = Model::init(small_model_config(), rng);
    const Dense2D x = random_matrix(8, 6, rng);
    const auto snap = snapshot(m);
    const auto hash = snap.parameter_hash();
    EXPECT_EQ(snap.embed(x).embeddings, m.embed(x).embeddings);
    for (int step = 0; step < 100; ++step) {
        const auto fwd = m.embed(x);
        const auto g = m.backward(fwd, random_matrix(8, 4, rng));
        for (std::size_t l = 0; l < g.size(); ++l) {
            for (std::size_t k = 0; k < g[l].weights.size(); ++k) {
                m.layers()[l].weights.data()[k] -= 0.1 * g[l].weights.data()[k];
            }
        }
    }
    EXPECT_EQ(snap.parameter_hash(), hash);
    EXPECT_NE(m.parameter_hash(), hash);
    const auto later = snapshot(m);
    EXPECT_NE(later.parameter_hash(), snap.parameter_hash());
    EXPECT_NE(snap.embed(x).embeddings, m.embed(x).embeddings);
}

TEST(ParamFile, RoundTripIsBitExact) {
    Rng rng(8);
    const auto m = Model::init(small_model_config(), rng);
    const auto path = temp_path("roundtrip.bin");
    save_params(m, path, {{"META", {1, 2, 3}}});
    const auto loaded = load_params_with_sections(path);
    EXPECT_EQ(loaded.model, m);
    const Dense2D x = random_matrix(5, 6, rng);
    EXPECT_EQ(loaded.model.embed(x).embeddings, m.embed(x).embeddings);
    ASSERT_NE(loaded.find("META"), nullptr);
    EXPECT_EQ(loaded.find("META")->payload, (std::vector<std::uint8_t>{1, 2, 3}));
    std::filesystem::remove(path);
}

TEST(ParamFile, WrongInputDimIsConfigMismatch) {
    Rng rng(9);
    const auto m = Model::init(small_model_config(), rng);
    const auto path = temp_path("dims.bin");
    save_params(m, path);
    auto expected = small_model_config();
    expected.input_dim = 7;
    EXPECT_THROW((void)load_params(path, expected), DimensionError);
    EXPECT_NO_THROW((void)load_params(path, small_model_config()));
    std::filesystem::remove(path);
}

TEST(ParamFile, TruncatedFileIsCorrupt) {
    Rng rng(10);
    const auto m = Model::init(small_model_config(), rng);
    const auto path = temp_path("trunc.bin");
    save_params(m, path);
    auto bytes = io::read_file(path);
    for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{6}}) {
        io::write_file(path, std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + static_cast<long>(cut)));
        EXPECT_THROW((void)load_params(path), FormatError) << "cut at " << cut;
    }
    std::filesystem::remove(path);
}

TEST(ParamFile, BadMagicAndVersion) {
    Rng rng(11);
    const auto m = Model::init(small_model_config(), rng);
    const auto path = temp_path("magic.bin");
    save_params(m, path);
    auto bytes = io::read_file(path);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    io::write_file(path, bad_magic);
    EXPECT_THROW((void)load_params(path), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 99;
    io::write_file(path, bad_version);
    EXPECT_THROW((void)load_params(path), FormatError);
    std::filesystem::remove(path);
}

TEST(ParamFile, LittleEndianHeaderLayout) {
    Rng rng(12);
    const auto m = Model::init(small_model_config(), rng);
    const auto path = temp_path("layout.bin");
    save_params(m, path);
    const auto b = io::read_file(path);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "LASP");
    EXPECT_EQ(b[4], 1);  // version, little-endian u32
    EXPECT_EQ(b[5] | b[6] | b[7], 0);
    EXPECT_EQ(b[8], 6);  // input_dim
    std::filesystem::remove(path);
}
