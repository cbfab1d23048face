#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace lasp;
using namespace lasp::testing;

namespace {

std::vector<Layer> positive_net(const std::vector<std::size_t>& widths, Rng& rng) {
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer{Dense2D(widths[l], widths[l + 1]), std::vector<double>(widths[l + 1], 0.0), Activation::relu};
        for (auto& w : layer.weights.data()) {
            w = rng.uniform(0.01, 1.0);
        }
        layers.push_back(std::move(layer));
    }
    return layers;
}

std::vector<Dense2D> layer_inputs(const std::vector<Layer>& layers, const Dense2D& x) {
    std::vector<Dense2D> out;
    Dense2D cur = x;
    for (const auto& l : layers) {
        out.push_back(cur);
        cur = forward_linear(l, cur).output;
    }
    return out;
}

double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s;
}

}  // namespace

TEST(OutputSalience, UniformOverSelection) {
    const MaskVector m{{-3.0, 2.0, -1.0, 4.0}};
    EXPECT_EQ(init_output_salience(m), (std::vector<double>{0.0, 0.5, 0.0, 0.5}));
}

TEST(OutputSalience, SingleSelectedDim) {
    const MaskVector m{{-3.0, -2.0, 1.0}};
    EXPECT_EQ(init_output_salience(m), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(OutputSalience, MaskWeighted) {
    const MaskVector m{{std::log(0.9 / 0.1), std::log(0.6 / 0.4)}};
    const auto p = init_output_salience(m, {}, SalienceSource::mask_weighted);
    EXPECT_NEAR(p[0], 0.6, 1e-12);
    EXPECT_NEAR(p[1], 0.4, 1e-12);
}

TEST(OutputSalience, EmptySelectionThrows) {
    EXPECT_THROW((void)init_output_salience(MaskVector::uniform(3, -1.0)), EmptySelectionError);
}

TEST(Mwp, ChainConservesProbability) {
    std::vector<Layer> layers;
    for (int l = 0; l < 3; ++l) {
        layers.push_back(Layer{Dense2D::from_rows({{0.7}}), {0.0}, Activation::relu});
    }
    const auto act = propagate_mwp(layers, layer_inputs(layers, Dense2D::from_rows({{2.0}})), {1.0});
    for (const auto& level : act.levels) {
        EXPECT_NEAR(level[0], 1.0, 1e-15);
    }
}

TEST(Mwp, DirectArithmetic) {
    const Layer layer{Dense2D::from_rows({{0.5}, {0.5}}), {0.0}, Activation::relu};
    const std::vector<double> a{1.0, 3.0};
    const std::vector<double> up{1.0};
    const auto p = mwp_step(layer, a, up);
    EXPECT_NEAR(p[0], 0.25, 1e-15);
    EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Mwp, ConservationOnPositiveNets) {
    Rng rng(1);
    for (int net = 0; net < 20; ++net) {
        std::vector<std::size_t> widths{1 + rng.below(32), 1 + rng.below(32), 1 + rng.below(32), 1 + rng.below(32)};
        const auto layers = positive_net(widths, rng);
        Dense2D x(5, widths[0]);
        for (auto& v : x.data()) {
            v = rng.uniform(0.1, 1.0);
        }
        std::vector<double> p(widths.back());
        for (auto& v : p) {
            v = rng.uniform();
        }
        const double total = sum(p);
        for (auto& v : p) {
            v /= total;
        }
        const auto act = propagate_mwp(layers, layer_inputs(layers, x), p);
        for (const auto& level : act.levels) {
            EXPECT_NEAR(sum(level), 1.0, 1e-9);
            for (double v : level) {
                EXPECT_GE(v, 0.0);
            }
        }
    }
}

TEST(Mwp, LocalNormalization) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        Layer layer{random_matrix(6, 4, rng), std::vector<double>(4, 0.0), Activation::relu};
        std::vector<double> a(6);
        for (auto& v : a) {
            v = rng.uniform(0.0, 1.0);
        }
        for (std::size_t i = 0; i < 4; ++i) {
            std::vector<double> up(4, 0.0);
            up[i] = 1.0;
            const auto p = mwp_step(layer, a, up);
            bool live = false;
            for (std::size_t j = 0; j < 6; ++j) {
                live = live || (a[j] > 0.0 && layer.weights(j, i) >= 0.0 && a[j] * layer.weights(j, i) > 0.0);
            }
            EXPECT_NEAR(sum(p), live ? 1.0 : 0.0, 1e-9);
        }
    }
}

TEST(Mwp, NegativeWeightsReceiveNothing) {
    const Layer layer{Dense2D::from_rows({{0.5}, {-0.5}, {0.25}}), {0.0}, Activation::relu};
    const auto p = mwp_step(layer, std::vector<double>{1.0, 1.0, 2.0}, std::vector<double>{1.0});
    EXPECT_EQ(p[1], 0.0);
    EXPECT_NEAR(p[0] + p[2], 1.0, 1e-15);
}

TEST(Mwp, DegenerateNormalizerDissipates) {
    const Layer layer{Dense2D::from_rows({{-0.5}, {-0.5}}), {0.0}, Activation::relu};
    const auto p = mwp_step(layer, std::vector<double>{1.0, 2.0}, std::vector<double>{1.0});
    EXPECT_EQ(p[0], 0.0);
    EXPECT_EQ(p[1], 0.0);
}

TEST(Mwp, DeadNeuronGetsZeroSalience) {
    Rng rng(3);
    auto layers = positive_net({4, 5, 3}, rng);
    // Unit 2 of the hidden layer never fires.
    for (std::size_t j = 0; j < 4; ++j) {
        layers[0].weights(j, 2) = 0.0;
    }
    layers[0].bias[2] = -1.0;
    Dense2D x(6, 4);
    for (auto& v : x.data()) {
        v = rng.uniform(0.1, 1.0);
    }
    const auto act = propagate_mwp(layers, layer_inputs(layers, x), {0.2, 0.3, 0.5});
    EXPECT_EQ(act.levels[1][2], 0.0);
    const auto gamma = weight_salience(act);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(gamma.weights[0](j, 2), 0.0);
    }
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(gamma.weights[1](2, i), 0.0);
    }
}

TEST(Mwp, ModelOverloadUsesCachedActivations) {
    Rng rng(4);
    const auto m = Model::init(small_model_config(), rng);
    Dense2D x(7, 6);
    for (auto& v : x.data()) {
        v = rng.uniform(0.0, 1.0);
    }
    const auto p = init_output_salience(MaskVector{{1.0, -1.0, 1.0, 1.0}});
    const auto act = propagate_mwp(m, x, p);
    ASSERT_EQ(act.levels.size(), m.layers().size() + 1);
    EXPECT_EQ(act.levels.back(), p);
    for (const auto& level : act.levels) {
        EXPECT_LE(sum(level), 1.0 + 1e-9);
        for (double v : level) {
            EXPECT_GE(v, 0.0);
        }
    }
}

TEST(WeightSalience, GeometricMean) {
    ActivationSalience act{{{0.25, 0.0}, {1.0, 0.5}}};
    const auto g = weight_salience(act);
    EXPECT_NEAR(g.weights[0](0, 0), 0.5, 1e-15);
    EXPECT_EQ(g.weights[0](1, 0), 0.0);
    EXPECT_EQ(g.bias[0], (std::vector<double>{1.0, 0.5}));
    ActivationSalience swapped{{{1.0, 0.5}, {0.25, 0.0}}};
    const auto h = weight_salience(swapped);
    EXPECT_EQ(h.weights[0](0, 0), g.weights[0](0, 0));
}

TEST(Modulation, Formula) {
    ParamGrads grads(1);
    grads[0].weights = Dense2D::from_rows({{2.0, 2.0, -3.0}});
    grads[0].bias = {1.0, 1.0, 1.0};
    ParameterSalience s;
    s.weights.push_back(Dense2D::from_rows({{0.0, 0.36, 1.5}}));
    s.bias.push_back({0.0, 1.0, 0.5});
    modulate_gradients(grads, s);
    EXPECT_EQ(grads[0].weights(0, 0), 2.0);
    EXPECT_NEAR(grads[0].weights(0, 1), 1.28, 1e-15);
    EXPECT_EQ(grads[0].weights(0, 2), 0.0);
    EXPECT_EQ(grads[0].bias, (std::vector<double>{1.0, 0.0, 0.5}));
}

TEST(Modulation, ContractsEverywhere) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        ParamGrads grads(2);
        ParameterSalience s;
        for (int l = 0; l < 2; ++l) {
            grads[l].weights = random_matrix(3, 4, rng);
            grads[l].bias = random_matrix(1, 4, rng).data();
            Dense2D g(3, 4);
            for (auto& v : g.data()) {
                v = rng.uniform(0.0, 2.0);
            }
            s.weights.push_back(g);
            s.bias.push_back(std::vector<double>(4, rng.uniform(0.0, 2.0)));
        }
        const auto before = grads;
        modulate_gradients(grads, s);
        for (int l = 0; l < 2; ++l) {
            for (std::size_t k = 0; k < 12; ++k) {
                EXPECT_LE(std::abs(grads[l].weights.data()[k]), std::abs(before[l].weights.data()[k]));
                if (s.weights[l].data()[k] >= 1.0) {
                    EXPECT_EQ(grads[l].weights.data()[k], 0.0);
                }
            }
        }
    }
}

TEST(Modulation, ShapeMismatchThrows) {
    ParamGrads grads(1);
    grads[0].weights = Dense2D(2, 2);
    grads[0].bias = {0.0, 0.0};
    ParameterSalience s;
    s.weights.push_back(Dense2D(3, 2));
    s.bias.push_back({0.0, 0.0});
    EXPECT_THROW(modulate_gradients(grads, s), DimensionError);
}

TEST(SalienceCsv, HeaderAndRowCount) {
    ParameterSalience s;
    s.weights.push_back(Dense2D::from_rows({{0.1, 0.2}}));
    s.bias.push_back({0.3, 0.4});
    std::ostringstream os;
    write_salience_csv(os, s);
    const std::string text = os.str();
    EXPECT_EQ(text.rfind("layer,from,to,gamma\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
    EXPECT_NE(text.find("0,bias,1,0.4"), std::string::npos);
}
