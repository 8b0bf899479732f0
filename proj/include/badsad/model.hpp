#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "badsad/adam.hpp"
#include "badsad/autograd.hpp"
#include "badsad/image.hpp"
#include "badsad/rng.hpp"

namespace badsad {

enum class ArchTag { mnist28, cifar32, dense2 };

inline std::string arch_tag_name(ArchTag t) {
    switch (t) {
        case ArchTag::mnist28: return "mnist28";
        case ArchTag::cifar32: return "cifar32";
        case ArchTag::dense2: return "dense2";
    }
    return "mnist28";
}

inline ArchTag arch_tag_from_name(const std::string& s) {
    if (s == "mnist28") return ArchTag::mnist28;
    if (s == "cifar32") return ArchTag::cifar32;
    if (s == "dense2") return ArchTag::dense2;
    throw ConfigError("unknown architecture tag: " + s);
}

// Geometry of one encoder/decoder pair. All layers are bias-free, so an
// all-zero input maps to the zero latent vector and the trivial collapse
// solution is excluded by the center zero guard.
struct ArchSpec {
    ArchTag tag = ArchTag::mnist28;
    int in_c = 1;
    int in_h = 28;
    int in_w = 28;
    int rep_dim = 32;
    int hidden = 32;  // dense2 only
    float lrelu_slope = 0.1f;

    std::size_t input_numel() const {
        return static_cast<std::size_t>(in_c) * in_h * in_w;
    }
};

inline ArchSpec arch_mnist28() { return ArchSpec{ArchTag::mnist28, 1, 28, 28, 32, 0, 0.1f}; }
inline ArchSpec arch_cifar32() { return ArchSpec{ArchTag::cifar32, 3, 32, 32, 128, 0, 0.1f}; }
inline ArchSpec arch_dense(int in_dim, int hidden, int rep_dim) {
    return ArchSpec{ArchTag::dense2, 1, 1, in_dim, rep_dim, hidden, 0.1f};
}

template <typename T>
struct ModelState {
    ArchSpec arch;
    std::vector<NodePtr<T>> encoder;
    std::vector<NodePtr<T>> decoder;

    std::vector<NodePtr<T>> all_params() const {
        std::vector<NodePtr<T>> out = encoder;
        out.insert(out.end(), decoder.begin(), decoder.end());
        return out;
    }

    NodePtr<T> find(const std::string& name) const {
        for (const auto& p : encoder)
            if (p->name == name) return p;
        for (const auto& p : decoder)
            if (p->name == name) return p;
        throw UsageError("no parameter named '" + name + "'");
    }

    ModelState clone() const {
        ModelState out;
        out.arch = arch;
        for (const auto& p : encoder) out.encoder.push_back(make_param<T>(p->name, p->value));
        for (const auto& p : decoder) out.decoder.push_back(make_param<T>(p->name, p->value));
        return out;
    }
};

namespace detail {

template <typename T>
Tensor<T> init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

}  // namespace detail

template <typename T>
ModelState<T> init_model(const ArchSpec& arch, std::uint64_t seed) {
    ModelState<T> st;
    st.arch = arch;
    std::uint64_t layer = 0;
    auto weight = [&](const std::string& name, Shape shape, std::size_t fan_in) {
        Rng rng(derive_seed(seed, 0xA0, layer++));
        return make_param<T>(name, detail::init_weight<T>(std::move(shape), fan_in, rng));
    };
    switch (arch.tag) {
        case ArchTag::mnist28:
            st.encoder.push_back(weight("enc.conv1.w", {8, 1, 5, 5}, 1 * 25));
            st.encoder.push_back(weight("enc.conv2.w", {4, 8, 5, 5}, 8 * 25));
            st.encoder.push_back(weight("enc.fc.w", {196, 32}, 196));
            st.decoder.push_back(weight("dec.fc.w", {32, 196}, 32));
            st.decoder.push_back(weight("dec.conv1.w", {8, 4, 5, 5}, 4 * 25));
            st.decoder.push_back(weight("dec.conv2.w", {1, 8, 5, 5}, 8 * 25));
            break;
        case ArchTag::cifar32:
            st.encoder.push_back(weight("enc.conv1.w", {32, 3, 5, 5}, 3 * 25));
            st.encoder.push_back(weight("enc.conv2.w", {64, 32, 5, 5}, 32 * 25));
            st.encoder.push_back(weight("enc.conv3.w", {128, 64, 5, 5}, 64 * 25));
            st.encoder.push_back(weight("enc.fc.w", {2048, 128}, 2048));
            st.decoder.push_back(weight("dec.fc.w", {128, 2048}, 128));
            st.decoder.push_back(weight("dec.conv1.w", {64, 128, 5, 5}, 128 * 25));
            st.decoder.push_back(weight("dec.conv2.w", {32, 64, 5, 5}, 64 * 25));
            st.decoder.push_back(weight("dec.conv3.w", {3, 32, 5, 5}, 32 * 25));
            break;
        case ArchTag::dense2: {
            const auto in = static_cast<std::size_t>(arch.in_w);
            const auto hid = static_cast<std::size_t>(arch.hidden);
            const auto rep = static_cast<std::size_t>(arch.rep_dim);
            st.encoder.push_back(weight("enc.fc1.w", {in, hid}, in));
            st.encoder.push_back(weight("enc.fc2.w", {hid, rep}, hid));
            st.decoder.push_back(weight("dec.fc1.w", {rep, hid}, rep));
            st.decoder.push_back(weight("dec.fc2.w", {hid, in}, hid));
            break;
        }
    }
    return st;
}

template <typename T>
void require_batch_shape(const ModelState<T>& st, const NodePtr<T>& x) {
    const auto& s = x->value.shape;
    if (s.size() != 4 || s[1] != static_cast<std::size_t>(st.arch.in_c) ||
        s[2] != static_cast<std::size_t>(st.arch.in_h) ||
        s[3] != static_cast<std::size_t>(st.arch.in_w)) {
        throw DimensionError("batch shape " + shape_str(s) + " does not match architecture " +
                             arch_tag_name(st.arch.tag) + " input " +
                             std::to_string(st.arch.in_c) + "x" + std::to_string(st.arch.in_h) +
                             "x" + std::to_string(st.arch.in_w));
    }
}

// phi(X; theta): [N,C,H,W] -> [N,d]
template <typename T>
NodePtr<T> encode(const ModelState<T>& st, const NodePtr<T>& x) {
    require_batch_shape(st, x);
    const std::size_t n = x->value.shape[0];
    const T slope = static_cast<T>(st.arch.lrelu_slope);
    switch (st.arch.tag) {
        case ArchTag::mnist28: {
            auto h1 = maxpool2d(leaky_relu(conv2d(x, st.encoder[0], 1, 2), slope), 2, 2);
            auto h2 = maxpool2d(leaky_relu(conv2d(h1, st.encoder[1], 1, 2), slope), 2, 2);
            return dense(reshape(h2, {n, 196}), st.encoder[2]);
        }
        case ArchTag::cifar32: {
            auto h1 = maxpool2d(leaky_relu(conv2d(x, st.encoder[0], 1, 2), slope), 2, 2);
            auto h2 = maxpool2d(leaky_relu(conv2d(h1, st.encoder[1], 1, 2), slope), 2, 2);
            auto h3 = maxpool2d(leaky_relu(conv2d(h2, st.encoder[2], 1, 2), slope), 2, 2);
            return dense(reshape(h3, {n, 2048}), st.encoder[3]);
        }
        case ArchTag::dense2: {
            auto flat = reshape(x, {n, st.arch.input_numel()});
            auto h = leaky_relu(dense(flat, st.encoder[0]), slope);
            return dense(h, st.encoder[1]);
        }
    }
    throw UsageError("unreachable arch");
}

// decoder used only during reconstruction pretraining: [N,d] -> [N,C,H,W]
template <typename T>
NodePtr<T> decode(const ModelState<T>& st, const NodePtr<T>& z) {
    const std::size_t n = z->value.shape[0];
    const T slope = static_cast<T>(st.arch.lrelu_slope);
    switch (st.arch.tag) {
        case ArchTag::mnist28: {
            auto h = reshape(dense(z, st.decoder[0]), {n, 4, 7, 7});
            auto u1 = leaky_relu(conv2d(upsample2x(h), st.decoder[1], 1, 2), slope);
            auto u2 = conv2d(upsample2x(u1), st.decoder[2], 1, 2);
            return clamp01(u2);
        }
        case ArchTag::cifar32: {
            auto h = reshape(dense(z, st.decoder[0]), {n, 128, 4, 4});
            auto u1 = leaky_relu(conv2d(upsample2x(h), st.decoder[1], 1, 2), slope);
            auto u2 = leaky_relu(conv2d(upsample2x(u1), st.decoder[2], 1, 2), slope);
            auto u3 = conv2d(upsample2x(u2), st.decoder[3], 1, 2);
            return clamp01(u3);
        }
        case ArchTag::dense2: {
            auto h = leaky_relu(dense(z, st.decoder[0]), slope);
            auto out = dense(h, st.decoder[1]);
            return reshape(out, {n, 1, 1, st.arch.input_numel()});
        }
    }
    throw UsageError("unreachable arch");
}

// Inference encoding of an image list, chunked so memory stays bounded.
template <typename T>
Tensor<T> encode_images(const ModelState<T>& st, const std::vector<const Image*>& imgs,
                        std::size_t chunk = 256) {
    if (imgs.empty()) throw UsageError("encode_images: empty image list");
    const auto d = static_cast<std::size_t>(st.arch.rep_dim);
    Tensor<T> out({imgs.size(), d});
    for (std::size_t base = 0; base < imgs.size(); base += chunk) {
        const std::size_t end = std::min(imgs.size(), base + chunk);
        std::vector<const Image*> part(imgs.begin() + static_cast<std::ptrdiff_t>(base),
                                       imgs.begin() + static_cast<std::ptrdiff_t>(end));
        auto z = encode(st, make_constant<T>(make_batch<T>(part)));
        for (std::size_t i = 0; i < part.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) out.at2(base + i, j) = z->value.at2(i, j);
    }
    return out;
}

template <typename T>
std::vector<const Image*> image_ptrs(const std::vector<Image>& imgs) {
    std::vector<const Image*> out;
    out.reserve(imgs.size());
    for (const auto& im : imgs) out.push_back(&im);
    return out;
}

// Fixed hypersphere centers. Computed once from the pretrained encoder and
// frozen before attack training starts.
template <typename T>
struct Centers {
    Tensor<T> c;
    Tensor<T> c_p;
    Tensor<T> c_a;
    double zero_guard = 0.1;
};

// coordinate-wise mean of encodings; coordinates inside the guard band are
// pushed to sign(c_i)*zero_guard (sign(0) treated as +1)
template <typename T>
Tensor<T> compute_center(const ModelState<T>& st, const std::vector<const Image*>& imgs,
                         double zero_guard) {
    if (imgs.empty()) throw UsageError("compute_center: empty image list");
    auto z = encode_images(st, imgs);
    const std::size_t n = z.shape[0], d = z.shape[1];
    Tensor<T> c({d});
    for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(z.at2(i, j));
        double m = acc / static_cast<double>(n);
        if (std::abs(m) < zero_guard) m = (m >= 0.0 ? zero_guard : -zero_guard);
        c[j] = static_cast<T>(m);
    }
    return c;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> compute_attack_centers(const ModelState<T>& st,
                                                       const std::vector<const Image*>& poisoned,
                                                       const std::vector<const Image*>& abnormal,
                                                       double zero_guard) {
    if (poisoned.empty()) throw UsageError("compute_attack_centers: empty poisoned set");
    if (abnormal.empty()) throw UsageError("compute_attack_centers: empty abnormal set");
    return {compute_center(st, poisoned, zero_guard), compute_center(st, abnormal, zero_guard)};
}

struct PretrainOptions {
    std::size_t epochs = 30;
    double lr = 1e-3;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
    double weight_decay = 1e-6;
};

// Reconstruction pretraining of encoder+decoder on D_u union D_l+ images.
// Returns the per-epoch mean squared reconstruction error.
template <typename T>
std::vector<double> pretrain_autoencoder(ModelState<T>& st,
                                         const std::vector<const Image*>& data,
                                         const PretrainOptions& opts) {
    if (data.empty()) throw UsageError("pretrain_autoencoder: empty dataset");
    Adam<T> opt({opts.lr, 0.9, 0.999, 1e-8, opts.weight_decay}, st.all_params());
    std::vector<double> history;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        Rng rng(derive_seed(opts.seed, 0xE0, epoch));
        rng.shuffle(order);
        double mse_sum = 0.0;
        std::size_t px_count = 0;
        for (std::size_t base = 0; base < order.size(); base += opts.batch_size) {
            const std::size_t end = std::min(order.size(), base + opts.batch_size);
            std::vector<const Image*> batch;
            batch.reserve(end - base);
            for (std::size_t i = base; i < end; ++i) batch.push_back(data[order[i]]);

            Tape<T> tape;
            for (auto& p : st.encoder) tape.attach(p);
            for (auto& p : st.decoder) tape.attach(p);
            auto x = tape.leaf(make_batch<T>(batch));
            auto recon = decode(st, encode(st, x));
            auto diff = sub(recon, x);
            auto sq = mul(diff, diff);
            auto total = sum(sq);
            const double batch_px = static_cast<double>(x->value.numel());
            auto loss = scale(total, static_cast<T>(1.0 / batch_px));
            const double lv = static_cast<double>(scalar_value(loss));
            if (!std::isfinite(lv)) {
                throw TrainingError("pretraining loss became non-finite at epoch " +
                                    std::to_string(epoch));
            }
            mse_sum += lv * batch_px;
            px_count += x->value.numel();
            tape.backward(loss);
            opt.step();
        }
        history.push_back(mse_sum / static_cast<double>(px_count));
    }
    return history;
}

}  // namespace badsad
