// Differentiable-predicate providers: the provider contract and the built-in
// multilayer perceptron with softmax outputs, trained from upstream gradients
// handed down by the symbolic layer.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sle/common.hpp"
#include "sle/parser.hpp"

namespace sle {

// ---------------------------------------------------------------------------
// Provider contract. Entities are rows of the provider's feature matrix; the
// engine calls forward per entity, reads the cached outputs, sends upstream
// gradients to backward, and commits accumulated gradients with step.
// ---------------------------------------------------------------------------

class NeuralProvider {
public:
    virtual ~NeuralProvider() = default;

    virtual std::size_t input_width() const = 0;
    virtual std::size_t output_width() const = 0;
    virtual std::size_t entity_count() const = 0;

    virtual void forward(std::size_t entity) = 0;
    virtual std::span<const double> outputs(std::size_t entity) const = 0;
    virtual void backward(std::size_t entity, std::span<const double> upstream) = 0;
    virtual void step(double learning_rate) = 0;

    virtual std::vector<double> parameters() const = 0;
    virtual void set_parameters(const std::vector<double>& flat) = 0;
};

// ---------------------------------------------------------------------------
// Multilayer perceptron provider.
// ---------------------------------------------------------------------------

struct ProviderSpec {
    std::vector<std::size_t> layers;          // widths after each affine layer
    std::vector<ActivationKind> activations;  // one per layer; final softmax
    std::size_t input_width = 0;
    std::uint64_t seed = 42;

    std::size_t output_width() const { return layers.back(); }
};

class MlpProvider final : public NeuralProvider {
public:
    MlpProvider(ProviderSpec spec, std::vector<double> features, std::size_t entity_count)
        : spec_(std::move(spec)), features_(std::move(features)), entities_(entity_count) {
        if (spec_.layers.empty()) throw DataError("mlp: no layers");
        if (spec_.activations.size() != spec_.layers.size()) throw DataError("mlp: activation count");
        if (spec_.activations.back() != ActivationKind::Softmax) throw DataError("mlp: final softmax required");
        if (features_.size() != entities_ * spec_.input_width) throw DataError("mlp: feature matrix shape");
        init_parameters();
        cache_.resize(entities_);
    }

    std::size_t input_width() const override { return spec_.input_width; }
    std::size_t output_width() const override { return spec_.layers.back(); }
    std::size_t entity_count() const override { return entities_; }
    const ProviderSpec& spec() const { return spec_; }

    void forward(std::size_t entity) override {
        if (entity >= entities_) throw DataError("mlp: entity out of range");
        EntityCache& cache = cache_[entity];
        cache.post.resize(spec_.layers.size());
        cache.pre.resize(spec_.layers.size());
        std::span<const double> input(features_.data() + entity * spec_.input_width, spec_.input_width);
        for (std::size_t layer = 0; layer < spec_.layers.size(); ++layer) {
            const std::size_t out_w = spec_.layers[layer];
            const std::size_t in_w = layer_input_width(layer);
            std::span<const double> in =
                layer == 0 ? input : std::span<const double>(cache.post[layer - 1]);
            std::vector<double>& pre = cache.pre[layer];
            pre.assign(out_w, 0.0);
            const double* W = weights_[layer].data();
            for (std::size_t o = 0; o < out_w; ++o) {
                double sum = biases_[layer][o];
                const double* wrow = W + o * in_w;
                for (std::size_t i = 0; i < in_w; ++i) sum += wrow[i] * in[i];
                pre[o] = sum;
            }
            std::vector<double>& post = cache.post[layer];
            post.resize(out_w);
            apply_activation(spec_.activations[layer], pre, post);
        }
        cache.valid = true;
    }

    std::span<const double> outputs(std::size_t entity) const override {
        const EntityCache& cache = cache_.at(entity);
        if (!cache.valid) throw DataError("mlp: outputs requested before forward");
        return std::span<const double>(cache.post.back());
    }

    // Chain rule from upstream dL/d(outputs) down to parameter gradients;
    // gradients accumulate across calls until step().
    void backward(std::size_t entity, std::span<const double> upstream) override {
        const EntityCache& cache = cache_.at(entity);
        if (!cache.valid) throw DataError("mlp: backward without forward");
        if (upstream.size() != output_width()) throw DataError("mlp: upstream width");

        std::vector<double> delta(upstream.begin(), upstream.end());
        for (std::size_t layer = spec_.layers.size(); layer-- > 0;) {
            const std::size_t out_w = spec_.layers[layer];
            const std::size_t in_w = layer_input_width(layer);
            // delta currently holds dL/d(post[layer]); convert to dL/d(pre[layer]).
            std::vector<double> dpre(out_w, 0.0);
            switch (spec_.activations[layer]) {
                case ActivationKind::Softmax: {
                    const std::vector<double>& s = cache.post[layer];
                    double dot = 0.0;
                    for (std::size_t o = 0; o < out_w; ++o) dot += delta[o] * s[o];
                    for (std::size_t o = 0; o < out_w; ++o) dpre[o] = s[o] * (delta[o] - dot);
                    break;
                }
                case ActivationKind::Relu:
                    for (std::size_t o = 0; o < out_w; ++o) {
                        dpre[o] = cache.pre[layer][o] > 0.0 ? delta[o] : 0.0;
                    }
                    break;
                case ActivationKind::Elu:
                    for (std::size_t o = 0; o < out_w; ++o) {
                        const double x = cache.pre[layer][o];
                        dpre[o] = delta[o] * (x > 0.0 ? 1.0 : std::exp(x));
                    }
                    break;
            }
            std::span<const double> in = layer == 0
                ? std::span<const double>(features_.data() + entity * spec_.input_width, spec_.input_width)
                : std::span<const double>(cache.post[layer - 1]);
            double* gW = weight_grads_[layer].data();
            for (std::size_t o = 0; o < out_w; ++o) {
                const double d = dpre[o];
                if (d == 0.0) continue;
                double* grow = gW + o * in_w;
                for (std::size_t i = 0; i < in_w; ++i) grow[i] += d * in[i];
                bias_grads_[layer][o] += d;
            }
            if (layer == 0) break;
            std::vector<double> next(in_w, 0.0);
            const double* W = weights_[layer].data();
            for (std::size_t o = 0; o < out_w; ++o) {
                const double d = dpre[o];
                if (d == 0.0) continue;
                const double* wrow = W + o * in_w;
                for (std::size_t i = 0; i < in_w; ++i) next[i] += d * wrow[i];
            }
            delta = std::move(next);
        }
    }

    void step(double learning_rate) override {
        for (std::size_t layer = 0; layer < weights_.size(); ++layer) {
            for (std::size_t i = 0; i < weights_[layer].size(); ++i) {
                weights_[layer][i] -= learning_rate * weight_grads_[layer][i];
                weight_grads_[layer][i] = 0.0;
            }
            for (std::size_t i = 0; i < biases_[layer].size(); ++i) {
                biases_[layer][i] -= learning_rate * bias_grads_[layer][i];
                bias_grads_[layer][i] = 0.0;
            }
        }
        ++step_count_;
        for (EntityCache& cache : cache_) cache.valid = false;  // parameters changed
    }

    std::size_t step_count() const { return step_count_; }

    std::vector<double> parameters() const override {
        std::vector<double> flat;
        for (std::size_t layer = 0; layer < weights_.size(); ++layer) {
            flat.insert(flat.end(), weights_[layer].begin(), weights_[layer].end());
            flat.insert(flat.end(), biases_[layer].begin(), biases_[layer].end());
        }
        return flat;
    }

    void set_parameters(const std::vector<double>& flat) override {
        std::size_t pos = 0;
        for (std::size_t layer = 0; layer < weights_.size(); ++layer) {
            if (pos + weights_[layer].size() + biases_[layer].size() > flat.size()) {
                throw DataError("mlp: parameter stream too short");
            }
            std::copy(flat.begin() + pos, flat.begin() + pos + weights_[layer].size(),
                      weights_[layer].begin());
            pos += weights_[layer].size();
            std::copy(flat.begin() + pos, flat.begin() + pos + biases_[layer].size(),
                      biases_[layer].begin());
            pos += biases_[layer].size();
        }
        if (pos != flat.size()) throw DataError("mlp: parameter stream too long");
        for (EntityCache& cache : cache_) cache.valid = false;
    }

private:
    struct EntityCache {
        bool valid = false;
        std::vector<std::vector<double>> pre, post;
    };

    std::size_t layer_input_width(std::size_t layer) const {
        return layer == 0 ? spec_.input_width : spec_.layers[layer - 1];
    }

    void init_parameters() {
        Rng rng(spec_.seed);
        weights_.resize(spec_.layers.size());
        biases_.resize(spec_.layers.size());
        weight_grads_.resize(spec_.layers.size());
        bias_grads_.resize(spec_.layers.size());
        for (std::size_t layer = 0; layer < spec_.layers.size(); ++layer) {
            const std::size_t in_w = layer_input_width(layer);
            const std::size_t out_w = spec_.layers[layer];
            const double bound = 1.0 / std::sqrt(static_cast<double>(in_w));
            weights_[layer].resize(in_w * out_w);
            for (double& w : weights_[layer]) w = uniform_real(rng, -bound, bound);
            biases_[layer].assign(out_w, 0.0);
            weight_grads_[layer].assign(in_w * out_w, 0.0);
            bias_grads_[layer].assign(out_w, 0.0);
        }
    }

    static void apply_activation(ActivationKind kind, const std::vector<double>& pre,
                                 std::vector<double>& post) {
        switch (kind) {
            case ActivationKind::Relu:
                for (std::size_t i = 0; i < pre.size(); ++i) post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
                break;
            case ActivationKind::Elu:
                for (std::size_t i = 0; i < pre.size(); ++i) {
                    post[i] = pre[i] > 0.0 ? pre[i] : std::exp(pre[i]) - 1.0;
                }
                break;
            case ActivationKind::Softmax: {
                double max = pre[0];
                for (double v : pre) max = std::max(max, v);
                double sum = 0.0;
                for (std::size_t i = 0; i < pre.size(); ++i) {
                    post[i] = std::exp(pre[i] - max);
                    sum += post[i];
                }
                for (double& v : post) v /= sum;
                break;
            }
        }
    }

    ProviderSpec spec_;
    std::vector<double> features_;  // entity-major, entities x input_width
    std::size_t entities_ = 0;
    std::vector<std::vector<double>> weights_, biases_;
    std::vector<std::vector<double>> weight_grads_, bias_grads_;
    std::vector<EntityCache> cache_;
    std::size_t step_count_ = 0;
};

// ---------------------------------------------------------------------------
// Parameter serialization: magic "NPRV", version u32, then the little-endian
// f64 parameter stream in layer order (weights row-major, then biases).
// ---------------------------------------------------------------------------

inline void write_nprv(const std::string& path, const NeuralProvider& provider) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write("NPRV", 4);
    const std::uint32_t version = 1;
    unsigned char v[4] = {static_cast<unsigned char>(version & 0xff),
                          static_cast<unsigned char>((version >> 8) & 0xff),
                          static_cast<unsigned char>((version >> 16) & 0xff),
                          static_cast<unsigned char>((version >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(v), 4);
    for (double value : provider.parameters()) {
        std::uint64_t bits;
        std::memcpy(&bits, &value, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline void read_nprv(const std::string& path, NeuralProvider& provider) {
    std::vector<unsigned char> bytes = [&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open " + path);
        return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
    }();
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "NPRV", 4) != 0) {
        throw DataError(path + ": not an NPRV parameter file");
    }
    const std::uint32_t version = bytes[4] | (bytes[5] << 8) | (bytes[6] << 16) |
                                  (std::uint32_t(bytes[7]) << 24);
    if (version != 1) throw DataError(path + ": unsupported NPRV version " + std::to_string(version));
    if ((bytes.size() - 8) % 8 != 0) throw DataError(path + ": truncated parameter stream");
    std::vector<double> flat((bytes.size() - 8) / 8);
    for (std::size_t i = 0; i < flat.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[8 + i * 8 + b];
        std::memcpy(&flat[i], &bits, 8);
    }
    provider.set_parameters(flat);
}

}  // namespace sle
