#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "lasp/error.hpp"
#include "lasp/losses.hpp"
#include "lasp/model.hpp"
#include "lasp/numerics.hpp"

namespace lasp {

// Excitation-backprop salience over a stack of linear layers.
//
// Layer l maps activations a^l (its input) to a^{l+1}. Winning probabilities
// are passed top-down through non-negative weights only:
//
//   P(a_j^l | a_i^{l+1}) = a_j^l w_ji / sum_{j': w_j'i >= 0} a_j'^l w_j'i   if w_ji >= 0, else 0
//   P(a_j^l)             = sum_i P(a_j^l | a_i^{l+1}) P(a_i^{l+1})
//
// An upper neuron whose normalizer is zero passes nothing down. L2
// normalization stages sit between layers and are transparent: the input of
// the layer after them is already the normalized activation, and the
// normalizer above cancels any positive per-sample scale.

enum class SalienceSource { thresholded_uniform, mask_weighted };

struct ActivationSalience {
    // levels[0] is the network input, levels.back() the embedding.
    std::vector<std::vector<double>> levels;
};

struct ParameterSalience {
    std::vector<Dense2D> weights;            // aligned with layer weights (in x out)
    std::vector<std::vector<double>> bias;   // aligned with layer biases

    static ParameterSalience zeros_like(const std::vector<Layer>& layers) {
        ParameterSalience s;
        for (const auto& l : layers) {
            s.weights.emplace_back(l.in_dim(), l.out_dim());
            s.bias.emplace_back(l.out_dim(), 0.0);
        }
        return s;
    }
};

inline std::vector<double> init_output_salience(const MaskVector& mask, const SelectionConfig& sel = {},
                                                SalienceSource source = SalienceSource::thresholded_uniform) {
    const auto dims = selected_dims(mask, sel);
    if (dims.empty()) {
        throw EmptySelectionError();
    }
    std::vector<double> p(mask.size(), 0.0);
    if (source == SalienceSource::thresholded_uniform) {
        for (auto k : dims) {
            p[k] = 1.0 / static_cast<double>(dims.size());
        }
        return p;
    }
    const auto s_hat = mask.sigmoid();
    double total = 0.0;
    for (auto k : dims) {
        total += s_hat[k];
    }
    for (auto k : dims) {
        p[k] = s_hat[k] / total;
    }
    return p;
}

// One step down: salience of a^l given salience of a^{l+1}, for one sample.
inline std::vector<double> mwp_step(const Layer& layer, std::span<const double> lower_activation,
                                    std::span<const double> upper_salience) {
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    require_dim("mwp lower activation", in, lower_activation.size());
    require_dim("mwp upper salience", out, upper_salience.size());
    std::vector<double> a(in);
    for (std::size_t j = 0; j < in; ++j) {
        // The raw input level may be signed; negative activations do not excite.
        a[j] = lower_activation[j] > 0.0 ? lower_activation[j] : 0.0;
    }
    std::vector<double> denom(out, 0.0);
    for (std::size_t j = 0; j < in; ++j) {
        if (a[j] == 0.0) {
            continue;
        }
        const double* w = layer.weights.row(j).data();
        for (std::size_t i = 0; i < out; ++i) {
            if (w[i] >= 0.0) {
                denom[i] += a[j] * w[i];
            }
        }
    }
    std::vector<double> scale(out, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
        if (denom[i] > 0.0 && upper_salience[i] != 0.0) {
            scale[i] = upper_salience[i] / denom[i];
        }
    }
    std::vector<double> lower(in, 0.0);
    for (std::size_t j = 0; j < in; ++j) {
        if (a[j] == 0.0) {
            continue;
        }
        const double* w = layer.weights.row(j).data();
        double acc = 0.0;
        for (std::size_t i = 0; i < out; ++i) {
            if (w[i] >= 0.0) {
                acc += w[i] * scale[i];
            }
        }
        lower[j] = a[j] * acc;
    }
    return lower;
}

// layer_inputs[l] holds a^l for every sample (rows). Per-sample passes are
// averaged arithmetically.
inline ActivationSalience propagate_mwp(const std::vector<Layer>& layers, const std::vector<Dense2D>& layer_inputs,
                                        const std::vector<double>& output_salience) {
    require(!layers.empty(), "propagate_mwp: no layers");
    require_dim("propagate_mwp activation levels", layers.size(), layer_inputs.size());
    require_dim("output salience length", layers.back().out_dim(), output_salience.size());
    const std::size_t batch = layer_inputs.front().rows();
    require(batch > 0, "propagate_mwp: empty batch");

    ActivationSalience out;
    out.levels.resize(layers.size() + 1);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        out.levels[l].assign(layers[l].in_dim(), 0.0);
    }
    out.levels.back() = output_salience;

    for (std::size_t s = 0; s < batch; ++s) {
        std::vector<double> upper = output_salience;
        for (std::size_t l = layers.size(); l-- > 0;) {
            require_dim("activation batch size", batch, layer_inputs[l].rows());
            upper = mwp_step(layers[l], layer_inputs[l].row(s), upper);
            auto& level = out.levels[l];
            for (std::size_t j = 0; j < upper.size(); ++j) {
                level[j] += upper[j];
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (auto& v : out.levels[l]) {
            v *= inv;
        }
    }
    return out;
}

inline ActivationSalience propagate_mwp(const Model& model, const Dense2D& batch,
                                        const std::vector<double>& output_salience) {
    const auto fwd = model.embed(batch);
    std::vector<Dense2D> inputs;
    inputs.reserve(fwd.caches.size());
    for (const auto& c : fwd.caches) {
        inputs.push_back(c.input);
    }
    return propagate_mwp(model.layers(), inputs, output_salience);
}

// gamma(w_ji) = sqrt(P(a_j^l) P(a_i^{l+1})); a bias takes the salience of
// its downstream neuron.
inline ParameterSalience weight_salience(const ActivationSalience& act) {
    require(act.levels.size() >= 2, "weight_salience needs at least two levels");
    ParameterSalience out;
    for (std::size_t l = 0; l + 1 < act.levels.size(); ++l) {
        const auto& lower = act.levels[l];
        const auto& upper = act.levels[l + 1];
        Dense2D g(lower.size(), upper.size());
        for (std::size_t j = 0; j < lower.size(); ++j) {
            for (std::size_t i = 0; i < upper.size(); ++i) {
                g(j, i) = std::sqrt(std::max(0.0, lower[j]) * std::max(0.0, upper[i]));
            }
        }
        out.weights.push_back(std::move(g));
        out.bias.push_back(upper);
    }
    return out;
}

// d <- d * (1 - min(1, gamma)), elementwise.
inline void modulate_gradients(ParamGrads& grads, const ParameterSalience& salience) {
    require_dim("modulation layer count", salience.weights.size(), grads.size());
    for (std::size_t l = 0; l < grads.size(); ++l) {
        auto& gw = grads[l].weights.data();
        const auto& sw = salience.weights[l].data();
        require_dim("modulation weight shape", sw.size(), gw.size());
        for (std::size_t k = 0; k < gw.size(); ++k) {
            gw[k] *= 1.0 - std::min(1.0, sw[k]);
        }
        require_dim("modulation bias shape", salience.bias[l].size(), grads[l].bias.size());
        for (std::size_t k = 0; k < grads[l].bias.size(); ++k) {
            grads[l].bias[k] *= 1.0 - std::min(1.0, salience.bias[l][k]);
        }
    }
}

struct SalienceStats {
    double max_gamma = 0.0;
    double mean_gamma = 0.0;
    std::size_t nonzero = 0;
    std::size_t total = 0;
};

inline SalienceStats salience_stats(const ParameterSalience& s) {
    SalienceStats st;
    double sum = 0.0;
    for (const auto& w : s.weights) {
        for (double v : w.data()) {
            st.max_gamma = std::max(st.max_gamma, v);
            sum += v;
            st.nonzero += v > 0.0 ? 1 : 0;
            ++st.total;
        }
    }
    st.mean_gamma = st.total == 0 ? 0.0 : sum / static_cast<double>(st.total);
    return st;
}

// CSV rows: layer,from,to,gamma. Bias rows use "bias" as the source index.
inline void write_salience_csv(std::ostream& os, const ParameterSalience& s) {
    os << "layer,from,to,gamma\n";
    os.precision(17);
    for (std::size_t l = 0; l < s.weights.size(); ++l) {
        const auto& w = s.weights[l];
        for (std::size_t j = 0; j < w.rows(); ++j) {
            for (std::size_t i = 0; i < w.cols(); ++i) {
                os << l << ',' << j << ',' << i << ',' << w(j, i) << '\n';
            }
        }
        for (std::size_t i = 0; i < s.bias[l].size(); ++i) {
            os << l << ",bias," << i << ',' << s.bias[l][i] << '\n';
        }
    }
}

}  // namespace lasp
