// Fully connected network with logistic units on every layer, trained by
// mini-batch gradient descent on summed sigmoid cross-entropy against soft
// survival-curve targets. Predictions are made monotone by a running minimum.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "geosurv/core.hpp"
#include "geosurv/survival.hpp"

namespace geosurv {

struct NetworkConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_sizes;
    std::size_t output_dim = 0;
    double learning_rate = 0.1;
    int max_epochs = 2500;
    double batch_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (input_dim == 0) throw InvalidArgument("network config: input_dim must be positive");
        if (output_dim == 0) throw InvalidArgument("network config: output_dim must be positive");
        if (hidden_sizes.empty()) throw InvalidArgument("network config: at least one hidden layer required");
        for (auto h : hidden_sizes)
            if (h == 0) throw InvalidArgument("network config: zero-size hidden layer");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
            throw InvalidArgument("network config: learning_rate must be positive");
        }
        if (max_epochs < 0) throw InvalidArgument("network config: max_epochs must be non-negative");
        if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) {
            throw InvalidArgument("network config: batch_fraction must lie in (0, 1]");
        }
    }

    bool operator==(const NetworkConfig&) const = default;
};

/// weights is (out x in); activations are logistic on every layer.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;

    std::size_t inputs() const noexcept { return weights.cols(); }
    std::size_t outputs() const noexcept { return weights.rows(); }
    bool operator==(const DenseLayer&) const = default;
};

struct Network {
    NetworkConfig config;
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().inputs(); }
    std::size_t output_dim() const { return layers.back().outputs(); }
    bool operator==(const Network&) const = default;
};

/// Same shape as a network's parameters.
using Gradients = std::vector<DenseLayer>;

inline Network init_network(const NetworkConfig& config) {
    config.validate();
    Network net{config, {}};
    Rng rng(config.seed);
    std::vector<std::size_t> dims{config.input_dim};
    dims.insert(dims.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    dims.push_back(config.output_dim);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer layer{Matrix(dims[i + 1], dims[i]), std::vector<double>(dims[i + 1], 0.0)};
        const double r = std::sqrt(6.0 / static_cast<double>(dims[i] + dims[i + 1]));
        for (double& w : layer.weights.data()) w = rng.uniform(-r, r);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

namespace detail {

/// Activations of every layer (index 0 is the input) plus output logits.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;
    std::vector<double> logits;
};

inline void check_input(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim()) {
        throw InvalidArgument("network input has " + std::to_string(x.size()) + " features, expected " +
                              std::to_string(net.input_dim()));
    }
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidArgument("network input is not finite");
}

inline ForwardTrace trace(const Network& net, std::span<const double> x) {
    check_input(net, x);
    ForwardTrace tr;
    tr.activations.emplace_back(x.begin(), x.end());
    for (const auto& layer : net.layers) {
        const auto& in = tr.activations.back();
        std::vector<double> z(layer.outputs());
        for (std::size_t o = 0; o < z.size(); ++o) z[o] = layer.bias[o] + dot(layer.weights.row(o), in);
        std::vector<double> a(z.size());
        for (std::size_t o = 0; o < z.size(); ++o) a[o] = logistic(z[o]);
        tr.activations.push_back(std::move(a));
        tr.logits = std::move(z);
    }
    return tr;
}

}  // namespace detail

/// Pre-activation values of the output layer.
inline std::vector<double> forward_logits(const Network& net, std::span<const double> x) {
    return detail::trace(net, x).logits;
}

/// Raw network output, each entry in (0, 1).
inline std::vector<double> forward(const Network& net, std::span<const double> x) {
    return std::move(detail::trace(net, x).activations.back());
}

/// Summed sigmoid cross-entropy of one example, from logits:
///   max(z, 0) - z*y + log(1 + exp(-|z|)).
inline double loss(std::span<const double> logits, std::span<const double> target) {
    if (logits.size() != target.size()) throw InvalidArgument("loss: length mismatch");
    double total = 0.0;
    for (std::size_t t = 0; t < logits.size(); ++t) {
        const double z = logits[t];
        total += std::max(z, 0.0) - z * target[t] + std::log1p(std::exp(-std::abs(z)));
    }
    return total;
}

struct Example {
    std::vector<double> x;
    std::vector<double> y;
};

/// Mean loss over a batch.
inline double batch_loss(const Network& net, std::span<const Example> batch) {
    if (batch.empty()) throw InvalidArgument("batch_loss: empty batch");
    double total = 0.0;
    for (const auto& ex : batch) total += loss(forward_logits(net, ex.x), ex.y);
    return total / static_cast<double>(batch.size());
}

namespace detail {

inline Gradients zero_like(const Network& net) {
    Gradients g;
    for (const auto& layer : net.layers) {
        g.push_back({Matrix(layer.outputs(), layer.inputs()), std::vector<double>(layer.outputs(), 0.0)});
    }
    return g;
}

/// Reusable buffers for forward/backward passes.
struct Workspace {
    std::vector<std::vector<double>> activations;
    std::vector<double> logits;
    std::vector<double> delta;
    std::vector<double> prev;
};

inline void trace_into(const Network& net, std::span<const double> x, Workspace& ws) {
    check_input(net, x);
    ws.activations.resize(net.layers.size() + 1);
    ws.activations[0].assign(x.begin(), x.end());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto& layer = net.layers[li];
        const auto& in = ws.activations[li];
        auto& a = ws.activations[li + 1];
        ws.logits.resize(layer.outputs());
        a.resize(layer.outputs());
        for (std::size_t o = 0; o < a.size(); ++o) {
            ws.logits[o] = layer.bias[o] + dot(layer.weights.row(o), in);
            a[o] = logistic(ws.logits[o]);
        }
    }
}

/// Adds the gradient of one example's loss into `g`; returns that loss.
inline double accumulate(const Network& net, const Example& ex, Gradients& g, Workspace& ws) {
    if (ex.y.size() != net.output_dim()) {
        throw InvalidArgument("target has " + std::to_string(ex.y.size()) + " entries, expected " +
                              std::to_string(net.output_dim()));
    }
    trace_into(net, ex.x, ws);
    // For logistic outputs under sigmoid cross-entropy, dL/dz = sigma(z) - y.
    const auto& out = ws.activations.back();
    ws.delta.resize(out.size());
    double example_loss = 0.0;
    for (std::size_t t = 0; t < out.size(); ++t) {
        const double z = ws.logits[t];
        ws.delta[t] = out[t] - ex.y[t];
        // log(1 + exp(-|z|)) == -log(max(a, 1 - a)) for a = sigma(z).
        example_loss += std::max(z, 0.0) - z * ex.y[t] - std::log(std::max(out[t], 1.0 - out[t]));
    }

    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        const auto& in = ws.activations[li];
        auto& gl = g[li];
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            const double d = ws.delta[o];
            gl.bias[o] += d;
            auto row = gl.weights.row(o);
            for (std::size_t i = 0; i < in.size(); ++i) row[i] += d * in[i];
        }
        if (li == 0) break;
        ws.prev.assign(layer.inputs(), 0.0);
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            const auto row = layer.weights.row(o);
            const double d = ws.delta[o];
            for (std::size_t i = 0; i < ws.prev.size(); ++i) ws.prev[i] += row[i] * d;
        }
        for (std::size_t i = 0; i < ws.prev.size(); ++i) ws.prev[i] *= in[i] * (1.0 - in[i]);
        std::swap(ws.delta, ws.prev);
    }
    return example_loss;
}

inline void clear(Gradients& g) {
    for (auto& layer : g) {
        std::fill(layer.weights.data().begin(), layer.weights.data().end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

inline void scale(Gradients& g, double factor) {
    for (auto& layer : g) {
        for (double& w : layer.weights.data()) w *= factor;
        for (double& b : layer.bias) b *= factor;
    }
}

}  // namespace detail

/// Analytic gradient of the batch-mean loss.
inline Gradients gradient(const Network& net, std::span<const Example> batch) {
    if (batch.empty()) throw InvalidArgument("gradient: empty batch");
    auto g = detail::zero_like(net);
    detail::Workspace ws;
    for (const auto& ex : batch) detail::accumulate(net, ex, g, ws);
    detail::scale(g, 1.0 / static_cast<double>(batch.size()));
    return g;
}

struct TrainResult {
    Network network;
    int epochs_run = 0;
    /// Mean loss over the full training set with the final parameters.
    double final_loss = std::numeric_limits<double>::quiet_NaN();
};

struct EarlyStopping {
    double min_improvement = 1e-6;
    int patience = 25;
};

/// Mini-batch gradient descent. Each epoch reshuffles the data with the
/// config's seed stream and steps once per batch of ceil(fraction * n)
/// examples. Stops after `patience` consecutive epochs whose mean loss
/// improves on the best so far by less than `min_improvement`.
inline TrainResult train(const NetworkConfig& config, std::span<const Example> data,
                         EarlyStopping stopping = {}) {
    config.validate();
    if (data.empty()) throw InvalidArgument("train: empty training data");
    for (const auto& ex : data) {
        if (ex.x.size() != config.input_dim || ex.y.size() != config.output_dim) {
            throw InvalidArgument("train: example dimensions do not match the network config");
        }
    }
    TrainResult result{init_network(config), 0, 0.0};
    auto& net = result.network;
    const std::size_t n = data.size();
    const auto batch_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(config.batch_fraction * static_cast<double>(n) - 1e-9)));

    // Separate stream from the weight initialisation.
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    auto g = detail::zero_like(net);
    detail::Workspace ws;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t end = std::min(n, start + batch_size);
            detail::clear(g);
            for (std::size_t i = start; i < end; ++i) epoch_loss += detail::accumulate(net, data[order[i]], g, ws);
            const double step = config.learning_rate / static_cast<double>(end - start);
            for (std::size_t li = 0; li < net.layers.size(); ++li) {
                auto w = net.layers[li].weights.data();
                const auto gw = g[li].weights.data();
                for (std::size_t k = 0; k < w.size(); ++k) w[k] -= step * gw[k];
                auto& b = net.layers[li].bias;
                for (std::size_t k = 0; k < b.size(); ++k) b[k] -= step * g[li].bias[k];
            }
        }
        epoch_loss /= static_cast<double>(n);
        result.epochs_run = epoch + 1;
        if (best - epoch_loss < stopping.min_improvement) {
            if (++stale >= stopping.patience) break;
        } else {
            stale = 0;
        }
        best = std::min(best, epoch_loss);
    }
    result.final_loss = batch_loss(net, data);
    return result;
}

/// Running minimum: out[0] = raw[0], out[t] = min(out[t-1], raw[t]).
inline std::vector<double> smooth(std::span<const double> raw) {
    std::vector<double> out(raw.begin(), raw.end());
    for (std::size_t t = 1; t < out.size(); ++t) out[t] = std::min(out[t - 1], out[t]);
    return out;
}

inline SurvivalCurve predict(const Network& net, std::span<const double> x) {
    return SurvivalCurve(smooth(forward(net, x)));
}

namespace detail {

inline std::string hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double parse_hex(const std::string& token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw ParseError("checkpoint: bad number '" + token + "'");
    return v;
}

}  // namespace detail

inline constexpr std::string_view kCheckpointMagic = "geosurv-network";
inline constexpr int kCheckpointVersion = 1;

/// Text checkpoint; doubles are written as hex floats so a reload is bit-exact.
inline std::string save_checkpoint(const Network& net) {
    std::ostringstream out;
    const auto& c = net.config;
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "input_dim " << c.input_dim << '\n';
    out << "hidden";
    for (auto h : c.hidden_sizes) out << ' ' << h;
    out << '\n';
    out << "output_dim " << c.output_dim << '\n';
    out << "learning_rate " << detail::hex(c.learning_rate) << '\n';
    out << "max_epochs " << c.max_epochs << '\n';
    out << "batch_fraction " << detail::hex(c.batch_fraction) << '\n';
    out << "seed " << c.seed << '\n';
    out << "layers " << net.layers.size() << '\n';
    for (const auto& layer : net.layers) {
        out << "layer " << layer.outputs() << ' ' << layer.inputs() << '\n';
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            out << detail::hex(layer.bias[o]);
            for (double w : layer.weights.row(o)) out << ' ' << detail::hex(w);
            out << '\n';
        }
    }
    return out.str();
}

inline Network load_checkpoint(std::string_view text) {
    std::istringstream in{std::string(text)};
    auto expect = [&](const char* word) {
        std::string tok;
        if (!(in >> tok) || tok != word) throw ParseError(std::string("checkpoint: expected '") + word + "'");
    };
    auto next = [&] {
        std::string tok;
        if (!(in >> tok)) throw ParseError("checkpoint: unexpected end of input");
        return tok;
    };
    auto next_size = [&] {
        const auto tok = next();
        try {
            std::size_t used = 0;
            const auto v = std::stoull(tok, &used);
            if (used != tok.size()) throw ParseError("");
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ParseError("checkpoint: bad integer '" + tok + "'");
        }
    };

    expect(std::string(kCheckpointMagic).c_str());
    if (next_size() != static_cast<std::size_t>(kCheckpointVersion)) {
        throw ParseError("checkpoint: unsupported version");
    }
    Network net;
    auto& c = net.config;
    expect("input_dim");
    c.input_dim = next_size();
    expect("hidden");
    std::string line;
    std::getline(in, line);
    std::istringstream hs(line);
    for (std::string tok; hs >> tok;) {
        std::size_t h = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), h);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw ParseError("checkpoint: bad hidden size");
        c.hidden_sizes.push_back(h);
    }
    expect("output_dim");
    c.output_dim = next_size();
    expect("learning_rate");
    c.learning_rate = detail::parse_hex(next());
    expect("max_epochs");
    c.max_epochs = static_cast<int>(next_size());
    expect("batch_fraction");
    c.batch_fraction = detail::parse_hex(next());
    expect("seed");
    c.seed = static_cast<std::uint64_t>(next_size());
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    expect("layers");
    const auto count = next_size();
    if (count != c.hidden_sizes.size() + 1) throw ParseError("checkpoint: layer count mismatch");
    std::size_t expected_in = c.input_dim;
    for (std::size_t li = 0; li < count; ++li) {
        expect("layer");
        const auto outs = next_size();
        const auto ins = next_size();
        const auto expected_out = li < c.hidden_sizes.size() ? c.hidden_sizes[li] : c.output_dim;
        if (ins != expected_in || outs != expected_out) throw ParseError("checkpoint: layer shape mismatch");
        DenseLayer layer{Matrix(outs, ins), std::vector<double>(outs)};
        for (std::size_t o = 0; o < outs; ++o) {
            layer.bias[o] = detail::parse_hex(next());
            for (double& w : layer.weights.row(o)) w = detail::parse_hex(next());
        }
        net.layers.push_back(std::move(layer));
        expected_in = outs;
    }
    return net;
}

}  // namespace geosurv
