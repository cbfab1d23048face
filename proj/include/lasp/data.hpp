#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lasp/error.hpp"
#include "lasp/numerics.hpp"
#include "lasp/rng.hpp"
#include "lasp/serialize.hpp"

namespace lasp {

struct Dataset {
    Dense2D inputs;
    std::vector<int> labels;
    std::size_t image_side = 0;  // > 0 when rows are square images

    [[nodiscard]] std::size_t size() const { return labels.size(); }
    [[nodiscard]] std::size_t dim() const { return inputs.cols(); }
    [[nodiscard]] bool empty() const { return labels.empty(); }

    [[nodiscard]] std::vector<int> classes() const {
        std::set<int> s(labels.begin(), labels.end());
        return {s.begin(), s.end()};
    }

    [[nodiscard]] Dataset subset(const std::vector<std::size_t>& indices) const {
        Dataset out{Dense2D(indices.size(), dim()), {}, image_side};
        out.labels.reserve(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = inputs.row(indices[i]);
            std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
            out.labels.push_back(labels[indices[i]]);
        }
        return out;
    }

    void append(const Dataset& other) {
        if (empty()) {
            *this = other;
            return;
        }
        require_dim("append dim", dim(), other.dim());
        auto& data = inputs.data();
        data.insert(data.end(), other.inputs.data().begin(), other.inputs.data().end());
        inputs = Dense2D(labels.size() + other.size(), dim(), std::move(data));
        labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    }

    bool operator==(const Dataset&) const = default;
};

enum class Scenario { task_incremental, class_incremental, domain_incremental };

struct TaskSpec {
    int id = 0;
    Dataset train;
    Dataset test;
    std::vector<int> classes;
    double angle = 0.0;  // rotation for domain-incremental streams
};

struct TaskStream {
    std::vector<TaskSpec> tasks;
    Scenario scenario = Scenario::class_incremental;

    [[nodiscard]] std::vector<int> all_classes() const {
        std::set<int> s;
        for (const auto& t : tasks) {
            s.insert(t.classes.begin(), t.classes.end());
        }
        return {s.begin(), s.end()};
    }
};

// Class-conditional unit-covariance Gaussians with means on a sphere.
struct SyntheticSource {
    Dense2D means;  // classes x dim

    static SyntheticSource create(std::size_t classes, std::size_t dim, double separation, Rng& rng) {
        if (classes < 2) {
            throw ConfigError("synthetic data needs >= 2 classes");
        }
        if (dim < 2) {
            throw ConfigError("synthetic data needs dim >= 2");
        }
        if (!(separation > 0.0)) {
            throw ConfigError("synthetic separation must be > 0");
        }
        SyntheticSource s{Dense2D(classes, dim)};
        for (std::size_t c = 0; c < classes; ++c) {
            auto row = s.means.row(c);
            double n = 0.0;
            while (n < 1e-9) {
                for (auto& v : row) {
                    v = rng.normal();
                }
                n = norm<double>(row);
            }
            for (auto& v : row) {
                v *= separation / n;
            }
        }
        return s;
    }

    [[nodiscard]] Dataset draw(std::size_t samples_per_class, Rng& rng) const {
        const std::size_t classes = means.rows();
        const std::size_t dim = means.cols();
        Dataset d{Dense2D(classes * samples_per_class, dim), {}, 0};
        d.labels.reserve(classes * samples_per_class);
        std::size_t i = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t n = 0; n < samples_per_class; ++n, ++i) {
                auto row = d.inputs.row(i);
                for (std::size_t k = 0; k < dim; ++k) {
                    row[k] = means(c, k) + rng.normal();
                }
                d.labels.push_back(static_cast<int>(c));
            }
        }
        return d;
    }
};

inline Dataset make_synthetic(std::size_t classes, std::size_t dim, double separation, std::size_t samples_per_class,
                              Rng& rng) {
    return SyntheticSource::create(classes, dim, separation, rng).draw(samples_per_class, rng);
}

namespace detail {

inline Dataset filter_classes(const Dataset& d, const std::set<int>& keep) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (keep.count(d.labels[i]) != 0) {
            idx.push_back(i);
        }
    }
    return d.subset(idx);
}

}  // namespace detail

// Contiguous class blocks in ascending id order.
inline TaskStream split_by_class(const Dataset& train, const Dataset& test, std::size_t n_tasks,
                                 Scenario scenario = Scenario::class_incremental) {
    if (n_tasks == 0) {
        throw ConfigError("split_by_class: n_tasks must be >= 1");
    }
    if (scenario == Scenario::domain_incremental) {
        throw ConfigError("split_by_class builds task/class-incremental streams only");
    }
    const auto classes = train.classes();
    if (classes.size() % n_tasks != 0) {
        throw ConfigError("split_by_class: " + std::to_string(classes.size()) + " classes not divisible into " +
                          std::to_string(n_tasks) + " tasks");
    }
    const std::size_t per = classes.size() / n_tasks;
    TaskStream stream;
    stream.scenario = scenario;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        TaskSpec spec;
        spec.id = static_cast<int>(t);
        spec.classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(t * per),
                            classes.begin() + static_cast<std::ptrdiff_t>((t + 1) * per));
        const std::set<int> keep(spec.classes.begin(), spec.classes.end());
        spec.train = detail::filter_classes(train, keep);
        spec.test = test.empty() ? Dataset{Dense2D(0, train.dim()), {}, train.image_side}
                                 : detail::filter_classes(test, keep);
        stream.tasks.push_back(std::move(spec));
    }
    return stream;
}

inline TaskStream split_by_class(const Dataset& dataset, std::size_t n_tasks) {
    return split_by_class(dataset, Dataset{}, n_tasks);
}

// Planar rotation of consecutive coordinate pairs (0,1), (2,3), ...; an odd
// trailing coordinate is left alone.
inline void rotate_planar(std::span<double> v, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t k = 0; k + 1 < v.size(); k += 2) {
        const double x = v[k];
        const double y = v[k + 1];
        v[k] = c * x - s * y;
        v[k + 1] = s * x + c * y;
    }
}

// Bilinear rotation of a square image about its centre; pixels sampled from
// outside the frame are 0.
inline std::vector<double> rotate_image(std::span<const double> image, std::size_t side, double angle) {
    require_dim("image size", side * side, image.size());
    std::vector<double> out(image.size(), 0.0);
    const double centre = (static_cast<double>(side) - 1.0) / 2.0;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    auto at = [&](long y, long x) -> double {
        if (y < 0 || x < 0 || y >= static_cast<long>(side) || x >= static_cast<long>(side)) {
            return 0.0;
        }
        return image[static_cast<std::size_t>(y) * side + static_cast<std::size_t>(x)];
    };
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const double dx = static_cast<double>(x) - centre;
            const double dy = static_cast<double>(y) - centre;
            // inverse map: rotate the destination point by -angle
            const double sx = c * dx + s * dy + centre;
            const double sy = -s * dx + c * dy + centre;
            const double fx = std::floor(sx);
            const double fy = std::floor(sy);
            const double ax = sx - fx;
            const double ay = sy - fy;
            const long x0 = static_cast<long>(fx);
            const long y0 = static_cast<long>(fy);
            double v = (1 - ay) * ((1 - ax) * at(y0, x0) + (ax > 0 ? ax * at(y0, x0 + 1) : 0.0));
            if (ay > 0) {
                v += ay * ((1 - ax) * at(y0 + 1, x0) + (ax > 0 ? ax * at(y0 + 1, x0 + 1) : 0.0));
            }
            out[y * side + x] = v;
        }
    }
    return out;
}

inline Dataset rotate_dataset(const Dataset& d, double angle) {
    Dataset out = d;
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto row = out.inputs.row(i);
        if (d.image_side > 0) {
            auto rotated = rotate_image(d.inputs.row(i), d.image_side, angle);
            std::copy(rotated.begin(), rotated.end(), row.begin());
        } else {
            rotate_planar(row, angle);
        }
    }
    return out;
}

// n_tasks copies of the base data, each rotated by its own angle ~ U[0, pi).
inline TaskStream make_rotated_stream(const Dataset& train, const Dataset& test, std::size_t n_tasks, Rng& rng) {
    if (n_tasks == 0) {
        throw ConfigError("make_rotated_stream: n_tasks must be >= 1");
    }
    if (train.image_side > 0 && train.image_side * train.image_side != train.dim()) {
        throw ConfigError("make_rotated_stream: image payload is not square");
    }
    if (train.image_side == 0 && train.dim() < 2) {
        throw ConfigError("make_rotated_stream: planar rotation needs dim >= 2");
    }
    TaskStream stream;
    stream.scenario = Scenario::domain_incremental;
    const auto classes = train.classes();
    for (std::size_t t = 0; t < n_tasks; ++t) {
        TaskSpec spec;
        spec.id = static_cast<int>(t);
        spec.angle = rng.uniform() * std::numbers::pi;
        spec.classes = classes;
        spec.train = rotate_dataset(train, spec.angle);
        spec.test = rotate_dataset(test, spec.angle);
        stream.tasks.push_back(std::move(spec));
    }
    return stream;
}

inline TaskStream make_rotated_stream(const Dataset& base, std::size_t n_tasks, Rng& rng) {
    return make_rotated_stream(base, Dataset{Dense2D(0, base.dim()), {}, base.image_side}, n_tasks, rng);
}

struct AugmentConfig {
    // vector payloads
    double noise_sigma = 0.1;
    double scale_lo = 0.8;
    double scale_hi = 1.2;
    // image payloads
    std::size_t crop_pad = 2;
    double flip_prob = 0.5;

    void validate() const {
        if (noise_sigma < 0.0) {
            throw ConfigError("augment noise_sigma must be >= 0");
        }
        if (scale_lo > scale_hi || scale_lo <= 0.0) {
            throw ConfigError("augment scale range must satisfy 0 < lo <= hi");
        }
        if (flip_prob < 0.0 || flip_prob > 1.0) {
            throw ConfigError("augment flip_prob must lie in [0, 1]");
        }
    }
};

inline std::vector<double> augment(std::span<const double> x, std::size_t image_side, const AugmentConfig& cfg,
                                   Rng& rng) {
    std::vector<double> out(x.begin(), x.end());
    if (image_side == 0) {
        const double scale = cfg.scale_lo == cfg.scale_hi ? cfg.scale_lo : rng.uniform(cfg.scale_lo, cfg.scale_hi);
        for (auto& v : out) {
            v = scale * v + (cfg.noise_sigma > 0.0 ? rng.normal(0.0, cfg.noise_sigma) : 0.0);
        }
        return out;
    }
    // Random crop from a zero-padded frame, then horizontal flip.
    const auto side = static_cast<long>(image_side);
    const auto pad = static_cast<long>(cfg.crop_pad);
    const long oy = pad > 0 ? static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * pad + 1))) - pad : 0;
    const long ox = pad > 0 ? static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * pad + 1))) - pad : 0;
    const bool flip = cfg.flip_prob > 0.0 && rng.bernoulli(cfg.flip_prob);
    for (long y = 0; y < side; ++y) {
        for (long x0 = 0; x0 < side; ++x0) {
            const long sx = (flip ? side - 1 - x0 : x0) + ox;
            const long sy = y + oy;
            double v = 0.0;
            if (sx >= 0 && sy >= 0 && sx < side && sy < side) {
                v = x[static_cast<std::size_t>(sy * side + sx)];
            }
            out[static_cast<std::size_t>(y * side + x0)] = v;
        }
    }
    return out;
}

struct ViewPair {
    std::vector<double> first;
    std::vector<double> second;
    int label = 0;
    std::size_t origin = 0;
};

inline ViewPair two_views(std::span<const double> x, int label, std::size_t origin, std::size_t image_side,
                          const AugmentConfig& cfg, Rng& rng) {
    ViewPair p;
    p.first = augment(x, image_side, cfg, rng);
    p.second = augment(x, image_side, cfg, rng);
    p.label = label;
    p.origin = origin;
    return p;
}

// --- Loaders ---------------------------------------------------------------

namespace detail {

inline std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 4 > b.size()) {
        throw FormatError("IDX: truncated header");
    }
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = io::read_file(images_path);
    const auto lab = io::read_file(labels_path);
    if (detail::be32(img, 0) != kIdxImageMagic) {
        throw FormatError("IDX: bad image magic in " + images_path);
    }
    if (detail::be32(lab, 0) != kIdxLabelMagic) {
        throw FormatError("IDX: bad label magic in " + labels_path);
    }
    const std::size_t n = detail::be32(img, 4);
    const std::size_t rows = detail::be32(img, 8);
    const std::size_t cols = detail::be32(img, 12);
    const std::size_t n_labels = detail::be32(lab, 4);
    if (n != n_labels) {
        throw FormatError("IDX: " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
    }
    const std::size_t dim = rows * cols;
    if (img.size() != 16 + n * dim) {
        throw FormatError("IDX: image payload length does not match header");
    }
    if (lab.size() != 8 + n) {
        throw FormatError("IDX: label payload length does not match header");
    }
    Dataset d{Dense2D(n, dim), std::vector<int>(n), rows == cols ? rows : 0};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
            d.inputs(i, k) = static_cast<double>(img[16 + i * dim + k]) / 255.0;
        }
        d.labels[i] = lab[8 + i];
    }
    return d;
}

// Label-first rows; feature values in [0, 255] are scaled to [0, 1]. Pass
// image_side > 0 when rows are square images.
inline Dataset load_csv(const std::string& path, bool skip_header = false, std::size_t image_side = 0) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open CSV: " + path);
    }
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    auto bad = [&](const std::string& why) {
        return FormatError("CSV " + path + " line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1 && skip_header) {
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() < 2) {
            throw bad("need a label and at least one feature");
        }
        int label = 0;
        const auto& lf = fields[0];
        if (auto [p, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
            ec != std::errc{} || p != lf.data() + lf.size()) {
            throw bad("malformed label '" + lf + "'");
        }
        if (dim == 0) {
            dim = fields.size() - 1;
        } else if (fields.size() - 1 != dim) {
            throw bad("expected " + std::to_string(dim) + " features, got " + std::to_string(fields.size() - 1));
        }
        for (std::size_t k = 1; k < fields.size(); ++k) {
            double v = 0.0;
            try {
                std::size_t used = 0;
                v = std::stod(fields[k], &used);
                if (used != fields[k].size()) {
                    throw std::invalid_argument("trailing");
                }
            } catch (const std::exception&) {
                throw bad("malformed value '" + fields[k] + "'");
            }
            if (v < 0.0 || v > 255.0) {
                throw bad("value out of [0, 255]");
            }
            values.push_back(v / 255.0);
        }
        labels.push_back(label);
    }
    if (labels.empty()) {
        throw FormatError("CSV " + path + ": no data rows");
    }
    if (image_side > 0 && image_side * image_side != dim) {
        throw FormatError("CSV " + path + ": " + std::to_string(dim) + " features is not a " +
                          std::to_string(image_side) + "x" + std::to_string(image_side) + " image");
    }
    const std::size_t n = labels.size();
    return {Dense2D(n, dim, std::move(values)), std::move(labels), image_side};
}

}  // namespace lasp
