#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lasp/error.hpp"
#include "lasp/numerics.hpp"
#include "lasp/rng.hpp"
#include "lasp/serialize.hpp"

namespace lasp {

struct ModelConfig {
    std::size_t input_dim = 32;
    std::vector<std::size_t> encoder_widths{256, 128};  // hidden widths before the representation layer
    std::size_t representation_dim = 128;
    std::size_t projection_hidden = 128;
    std::size_t embedding_dim = 64;

    void validate() const {
        if (input_dim < 1 || representation_dim < 1 || projection_hidden < 1 || embedding_dim < 1) {
            throw ConfigError("model widths must all be >= 1");
        }
        for (auto w : encoder_widths) {
            if (w < 1) {
                throw ConfigError("encoder widths must be >= 1");
            }
        }
        if (embedding_dim > projection_hidden) {
            throw ConfigError("embedding_dim (" + std::to_string(embedding_dim) +
                              ") must not exceed projection_hidden (" + std::to_string(projection_hidden) + ")");
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

using Layer = LinearLayer<double>;
using LayerGrad = LinearGrad<double>;

// Per-layer parameter gradients, aligned with Model::layers().
using ParamGrads = std::vector<LayerGrad>;

// Cached forward state. caches[l].input is a^l, the input of layer l.
struct EmbedResult {
    Dense2D representations;  // unit rows
    Dense2D embeddings;       // unit rows
    std::vector<LinearCache<double>> caches;
    std::vector<double> representation_norms;
    std::vector<double> embedding_norms;
    std::vector<bool> degenerate;
};

// Encoder f (linear+ReLU stages, then L2 normalization) followed by the
// projection head g (hidden ReLU, identity output, then L2 normalization).
// Layers are held in one list: encoder first, then the two head stages.
class Model {
public:
    Model() = default;

    static Model init(const ModelConfig& config, Rng& rng) {
        config.validate();
        Model m;
        m.config_ = config;
        std::size_t in = config.input_dim;
        for (auto w : config.encoder_widths) {
            m.layers_.push_back(make_linear<double>(in, w, Activation::relu, rng));
            in = w;
        }
        m.layers_.push_back(make_linear<double>(in, config.representation_dim, Activation::relu, rng));
        m.layers_.push_back(
            make_linear<double>(config.representation_dim, config.projection_hidden, Activation::relu, rng));
        m.layers_.push_back(
            make_linear<double>(config.projection_hidden, config.embedding_dim, Activation::identity, rng));
        return m;
    }

    // Builds a model from explicit layers; shapes are checked against config.
    static Model from_layers(const ModelConfig& config, std::vector<Layer> layers) {
        config.validate();
        Model m;
        m.config_ = config;
        m.layers_ = std::move(layers);
        m.check_shapes();
        return m;
    }

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    [[nodiscard]] std::size_t encoder_depth() const { return layers_.size() - 2; }

    [[nodiscard]] EmbedResult embed(const Dense2D& inputs) const {
        require_dim("embed input columns", config_.input_dim, inputs.cols());
        EmbedResult out;
        out.caches.reserve(layers_.size());
        Dense2D current = inputs;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            auto fwd = forward_linear(layers_[l], current);
            out.caches.push_back({std::move(current), std::move(fwd.pre_activation)});
            current = std::move(fwd.output);
            if (l + 1 == encoder_depth()) {
                out.representation_norms = normalize_rows(current);
                out.representations = current;
            }
        }
        out.embedding_norms = normalize_rows(current);
        out.embeddings = std::move(current);
        out.degenerate.resize(inputs.rows());
        for (std::size_t i = 0; i < inputs.rows(); ++i) {
            out.degenerate[i] = out.embedding_norms[i] <= 1e-12 || out.representation_norms[i] <= 1e-12;
        }
        return out;
    }

    [[nodiscard]] Dense2D representations(const Dense2D& inputs) const { return embed(inputs).representations; }

    // Backpropagates dL/de (and optionally an extra dL/dr) into parameter gradients.
    [[nodiscard]] ParamGrads backward(const EmbedResult& cache, const Dense2D& grad_embeddings,
                                      const Dense2D* grad_representations = nullptr) const {
        if (cache.caches.size() != layers_.size()) {
            throw Error("Model::backward: missing forward cache");
        }
        require_dim("grad embedding rows", cache.embeddings.rows(), grad_embeddings.rows());
        require_dim("grad embedding cols", cache.embeddings.cols(), grad_embeddings.cols());
        ParamGrads grads(layers_.size());
        Dense2D upstream = normalize_rows_backward<double>(cache.embeddings, cache.embedding_norms, grad_embeddings);
        for (std::size_t l = layers_.size(); l-- > 0;) {
            auto back = backward_linear(layers_[l], cache.caches[l], upstream);
            grads[l] = std::move(back.grad);
            upstream = std::move(back.grad_input);
            if (l == encoder_depth()) {
                // upstream is dL/dr here.
                if (grad_representations != nullptr) {
                    require_dim("grad representation cols", upstream.cols(), grad_representations->cols());
                    for (std::size_t i = 0; i < upstream.size(); ++i) {
                        upstream.data()[i] += grad_representations->data()[i];
                    }
                }
                upstream = normalize_rows_backward<double>(cache.representations, cache.representation_norms,
                                                           upstream);
            }
        }
        return grads;
    }

    // Raw parameter bytes (layer order: weights then bias), used for hashing.
    [[nodiscard]] std::vector<std::uint8_t> parameter_bytes() const {
        io::ByteWriter w;
        for (const auto& layer : layers_) {
            for (double v : layer.weights.data()) {
                w.f64(v);
            }
            for (double v : layer.bias) {
                w.f64(v);
            }
        }
        return w.bytes();
    }

    [[nodiscard]] std::uint64_t parameter_hash() const { return io::fnv1a(parameter_bytes()); }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& layer : layers_) {
            n += layer.weights.size() + layer.bias.size();
        }
        return n;
    }

    bool operator==(const Model&) const = default;

private:
    void check_shapes() const {
        const std::size_t expected_layers = config_.encoder_widths.size() + 3;
        require_dim("layer count", expected_layers, layers_.size());
        std::size_t in = config_.input_dim;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            std::size_t out = 0;
            if (l < config_.encoder_widths.size()) {
                out = config_.encoder_widths[l];
            } else if (l == config_.encoder_widths.size()) {
                out = config_.representation_dim;
            } else if (l == config_.encoder_widths.size() + 1) {
                out = config_.projection_hidden;
            } else {
                out = config_.embedding_dim;
            }
            require_dim("layer input dim", in, layers_[l].in_dim());
            require_dim("layer output dim", out, layers_[l].out_dim());
            require_dim("layer bias length", out, layers_[l].bias.size());
            in = out;
        }
    }

    ModelConfig config_;
    std::vector<Layer> layers_;
};

inline ParamGrads zero_grads(const Model& model) {
    ParamGrads g;
    for (const auto& layer : model.layers()) {
        g.push_back({Dense2D(layer.in_dim(), layer.out_dim()), std::vector<double>(layer.out_dim(), 0.0)});
    }
    return g;
}

inline void accumulate(ParamGrads& into, const ParamGrads& from, double scale = 1.0) {
    require_dim("gradient layer count", into.size(), from.size());
    for (std::size_t l = 0; l < into.size(); ++l) {
        auto& dst = into[l].weights.data();
        const auto& src = from[l].weights.data();
        require_dim("gradient weight size", dst.size(), src.size());
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += scale * src[i];
        }
        for (std::size_t i = 0; i < into[l].bias.size(); ++i) {
            into[l].bias[i] += scale * from[l].bias[i];
        }
    }
}

// The frozen past model. Holds its own copy of the parameters; nothing can
// mutate it after construction.
class ModelSnapshot {
public:
    explicit ModelSnapshot(const Model& model) : model_(std::make_shared<const Model>(model)) {}

    [[nodiscard]] EmbedResult embed(const Dense2D& inputs) const { return model_->embed(inputs); }
    [[nodiscard]] const Model& model() const { return *model_; }
    [[nodiscard]] std::uint64_t parameter_hash() const { return model_->parameter_hash(); }

private:
    std::shared_ptr<const Model> model_;
};

[[nodiscard]] inline ModelSnapshot snapshot(const Model& model) { return ModelSnapshot(model); }

// --- Parameter file -------------------------------------------------------
//
// Little-endian layout:
//   "LASP" | u32 version | config block | parameter blobs | u32 section count | sections
// config block: u32 input_dim, u32 n_widths, u32 widths[n], u32 representation_dim,
//               u32 projection_hidden, u32 embedding_dim
// parameter blobs, per layer in order: f64 weights[in*out] (row-major), f64 bias[out]
// section: 4-byte tag, u64 payload length, payload

inline constexpr std::uint32_t kParamFormatVersion = 1;

struct Section {
    std::string tag;  // exactly 4 chars
    std::vector<std::uint8_t> payload;
};

inline void write_model(io::ByteWriter& w, const Model& model) {
    const auto& c = model.config();
    w.tag("LASP");
    w.u32(kParamFormatVersion);
    w.u32(static_cast<std::uint32_t>(c.input_dim));
    w.u32(static_cast<std::uint32_t>(c.encoder_widths.size()));
    for (auto width : c.encoder_widths) {
        w.u32(static_cast<std::uint32_t>(width));
    }
    w.u32(static_cast<std::uint32_t>(c.representation_dim));
    w.u32(static_cast<std::uint32_t>(c.projection_hidden));
    w.u32(static_cast<std::uint32_t>(c.embedding_dim));
    w.raw(model.parameter_bytes());
}

inline Model read_model(io::ByteReader& r) {
    if (r.tag() != "LASP") {
        throw FormatError("corrupt file: bad magic");
    }
    const auto version = r.u32();
    if (version != kParamFormatVersion) {
        throw FormatError("unsupported parameter file version " + std::to_string(version) + " (expected " +
                          std::to_string(kParamFormatVersion) + ")");
    }
    constexpr std::uint32_t kMaxDim = 1u << 20;
    auto dim = [&r](const char* what) {
        const auto v = r.u32();
        if (v == 0 || v > kMaxDim) {
            throw FormatError(std::string("corrupt file: implausible ") + what);
        }
        return static_cast<std::size_t>(v);
    };
    ModelConfig c;
    c.input_dim = dim("input_dim");
    const auto n_widths = r.u32();
    if (n_widths > 64) {
        throw FormatError("corrupt file: implausible encoder depth");
    }
    c.encoder_widths.clear();
    for (std::uint32_t i = 0; i < n_widths; ++i) {
        c.encoder_widths.push_back(dim("encoder width"));
    }
    c.representation_dim = dim("representation_dim");
    c.projection_hidden = dim("projection_hidden");
    c.embedding_dim = dim("embedding_dim");
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("corrupt file: ") + e.what());
    }

    std::vector<Layer> layers;
    std::size_t in = c.input_dim;
    std::vector<std::pair<std::size_t, Activation>> shapes;
    for (auto width : c.encoder_widths) {
        shapes.emplace_back(width, Activation::relu);
    }
    shapes.emplace_back(c.representation_dim, Activation::relu);
    shapes.emplace_back(c.projection_hidden, Activation::relu);
    shapes.emplace_back(c.embedding_dim, Activation::identity);
    for (auto [out, act] : shapes) {
        Layer layer{Dense2D(in, out), std::vector<double>(out), act};
        for (auto& v : layer.weights.data()) {
            v = r.f64();
        }
        for (auto& v : layer.bias) {
            v = r.f64();
        }
        layers.push_back(std::move(layer));
        in = out;
    }
    return Model::from_layers(c, std::move(layers));
}

inline void save_params(const Model& model, const std::string& path, const std::vector<Section>& sections = {}) {
    io::ByteWriter w;
    write_model(w, model);
    w.u32(static_cast<std::uint32_t>(sections.size()));
    for (const auto& s : sections) {
        require(s.tag.size() == 4, "section tag must be 4 characters");
        char tag[5] = {s.tag[0], s.tag[1], s.tag[2], s.tag[3], '\0'};
        w.tag(tag);
        w.u64(s.payload.size());
        w.raw(s.payload);
    }
    io::write_file(path, w.bytes());
}

struct LoadedParams {
    Model model;
    std::vector<Section> sections;

    [[nodiscard]] const Section* find(const std::string& tag) const {
        for (const auto& s : sections) {
            if (s.tag == tag) {
                return &s;
            }
        }
        return nullptr;
    }
};

inline LoadedParams load_params_with_sections(const std::string& path) {
    const auto bytes = io::read_file(path);
    io::ByteReader r(bytes);
    LoadedParams out{read_model(r), {}};
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        Section s;
        s.tag = r.tag();
        s.payload = r.raw(r.u64());
        out.sections.push_back(std::move(s));
    }
    if (!r.at_end()) {
        throw FormatError("corrupt file: trailing bytes");
    }
    return out;
}

inline Model load_params(const std::string& path) { return load_params_with_sections(path).model; }

// Loads and checks the stored config against the expected one.
inline Model load_params(const std::string& path, const ModelConfig& expected) {
    Model m = load_params(path);
    const auto& c = m.config();
    require_dim("checkpoint input_dim", expected.input_dim, c.input_dim);
    require_dim("checkpoint encoder depth", expected.encoder_widths.size(), c.encoder_widths.size());
    for (std::size_t i = 0; i < c.encoder_widths.size(); ++i) {
        require_dim("checkpoint encoder width", expected.encoder_widths[i], c.encoder_widths[i]);
    }
    require_dim("checkpoint representation_dim", expected.representation_dim, c.representation_dim);
    require_dim("checkpoint projection_hidden", expected.projection_hidden, c.projection_hidden);
    require_dim("checkpoint embedding_dim", expected.embedding_dim, c.embedding_dim);
    return m;
}

}  // namespace lasp
