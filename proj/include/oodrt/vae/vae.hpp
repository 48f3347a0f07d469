#pragma once

// Convolutional VAE over flow stacks. The encoder maps [C,H,W] to mean and
// log-variance of a diagonal Gaussian; the decoder maps a latent back to
// [C,H,W]. OOD score = reconstruction MSE at z = mean.

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "oodrt/core/rng.hpp"
#include "oodrt/nn/model.hpp"
#include "oodrt/nn/optim.hpp"
#include "oodrt/nn/serialize.hpp"
#include "oodrt/quant/quant.hpp"

namespace oodrt::vae {

using nn::Dims;
using nn::ModelGraph;
using nn::Tensor;

struct VaeConfig {
    Dims input{10, 60, 80};
    std::size_t latent = 32;
    std::size_t hidden = 64;
    std::size_t ch1 = 8, ch2 = 16;  // encoder conv widths (decoder mirrors them)
    float beta = 1.0f;
    int epochs = 10;
    std::size_t batch = 32;
    float learning_rate = 1e-3f;
    std::uint64_t seed = 1;

    void validate() const {
        if (input.size() != 3) throw config_error("vae input must be [C,H,W]");
        nn::check_dims(input);
        if (latent < 2) throw config_error("vae latent dim must be >= 2");
        if (!(beta >= 0.0f)) throw config_error("vae beta must be >= 0");
        if (epochs < 1 || batch < 1) throw config_error("vae epochs and batch must be >= 1");
        if (!(learning_rate > 0.0f)) throw config_error("vae learning rate must be positive");
    }
};

// ---------------------------------------------------------------- loss

struct ElboTerms {
    double total = 0, recon = 0, kl = 0;
};

struct ElboGrads {
    Tensor d_recon;  // d total / d x_hat
    std::vector<float> d_mu, d_logvar;
};

// recon = mean squared error; kl = -1/2 sum(1 + lv - mu^2 - exp(lv)) for a
// single sample (batch averaging is the caller's job).
inline ElboTerms elbo_loss(const Tensor& x, const Tensor& xhat, std::span<const float> mu,
                           std::span<const float> logvar, double beta, ElboGrads* grads = nullptr) {
    if (x.dims() != xhat.dims()) throw argument_error("elbo: reconstruction dims differ from input");
    if (mu.size() != logvar.size()) throw argument_error("elbo: mean and log-variance sizes differ");
    ElboTerms t;
    const auto n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(xhat[i]) - x[i];
        t.recon += d * d;
    }
    t.recon /= n;
    for (std::size_t j = 0; j < mu.size(); ++j) {
        const double m = mu[j], lv = logvar[j];
        t.kl += -0.5 * (1.0 + lv - m * m - std::exp(lv));
    }
    t.total = t.recon + beta * t.kl;
    if (!std::isfinite(t.total)) throw numeric_error("elbo: non-finite loss");
    if (grads) {
        grads->d_recon = Tensor(x.dims());
        for (std::size_t i = 0; i < x.size(); ++i) grads->d_recon[i] = static_cast<float>(2.0 * (xhat[i] - x[i]) / n);
        grads->d_mu.resize(mu.size());
        grads->d_logvar.resize(mu.size());
        for (std::size_t j = 0; j < mu.size(); ++j) {
            grads->d_mu[j] = static_cast<float>(beta * mu[j]);
            grads->d_logvar[j] = static_cast<float>(beta * 0.5 * (std::exp(static_cast<double>(logvar[j])) - 1.0));
        }
    }
    return t;
}

// ---------------------------------------------------------------- model

namespace detail {

inline std::size_t half_up(std::size_t n) { return (n + 1) / 2; }

}  // namespace detail

inline ModelGraph build_encoder(const VaeConfig& c) {
    using nn::LayerSpec;
    const std::size_t h2 = detail::half_up(detail::half_up(c.input[1])), w2 = detail::half_up(detail::half_up(c.input[2]));
    return ModelGraph("enc", c.input,
                      {LayerSpec::conv2d(c.input[0], c.ch1, 3, 2, 1), LayerSpec::relu(),
                       LayerSpec::conv2d(c.ch1, c.ch2, 3, 2, 1), LayerSpec::relu(), LayerSpec::flatten(),
                       LayerSpec::dense(c.ch2 * h2 * w2, c.hidden), LayerSpec::relu(),
                       LayerSpec::dense(c.hidden, 2 * c.latent)});
}

inline ModelGraph build_decoder(const VaeConfig& c) {
    using nn::LayerSpec;
    const std::size_t h2 = detail::half_up(detail::half_up(c.input[1])), w2 = detail::half_up(detail::half_up(c.input[2]));
    std::vector<LayerSpec> L{LayerSpec::dense(c.latent, c.ch2 * h2 * w2), LayerSpec::relu(),
                             LayerSpec::reshape({c.ch2, h2, w2}),       LayerSpec::upsample2x(),
                             LayerSpec::conv2d(c.ch2, c.ch1, 3, 1, 1),  LayerSpec::relu(),
                             LayerSpec::upsample2x(),                   LayerSpec::conv2d(c.ch1, c.input[0], 3, 1, 1)};
    if (4 * h2 != c.input[1] || 4 * w2 != c.input[2]) L.push_back(LayerSpec::crop(c.input[1], c.input[2]));
    return ModelGraph("dec", {c.latent}, std::move(L));
}

struct VaeModel {
    VaeConfig config;
    ModelGraph encoder, decoder;

    static VaeModel create(const VaeConfig& c) {
        c.validate();
        VaeModel m{c, build_encoder(c), build_decoder(c)};
        Rng rng(derive_seed(c.seed, "vae-init"));
        m.encoder.init_weights(rng);
        m.decoder.init_weights(rng);
        return m;
    }
};

// Split of the encoder head.
inline std::span<const float> head_mu(const Tensor& h, std::size_t latent) { return h.data().subspan(0, latent); }
inline std::span<const float> head_logvar(const Tensor& h, std::size_t latent) { return h.data().subspan(latent, latent); }

inline void check_input(const VaeConfig& c, const Tensor& x) {
    if (x.dims() != c.input)
        throw argument_error("vae expects stack " + nn::dims_to_string(c.input) + ", got " + nn::dims_to_string(x.dims()));
}

inline double mse(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

// Deterministic reconstruction through the posterior mean.
inline Tensor reconstruct(const VaeModel& m, const Tensor& x) {
    check_input(m.config, x);
    const Tensor h = nn::forward(m.encoder, x);
    const auto mu = head_mu(h, m.config.latent);
    return nn::forward(m.decoder, Tensor({m.config.latent}, std::vector<float>(mu.begin(), mu.end())));
}

inline double ood_score(const VaeModel& m, const Tensor& x) { return mse(reconstruct(m, x), x); }

// Int8 dynamic-quantized twin of a trained VAE.
struct QuantizedVae {
    VaeConfig config;
    quant::QuantizedModel encoder, decoder;

    explicit QuantizedVae(const VaeModel& m) : config(m.config), encoder(m.encoder), decoder(m.decoder) {}
    QuantizedVae(VaeConfig c, quant::QuantizedModel e, quant::QuantizedModel d)
        : config(std::move(c)), encoder(std::move(e)), decoder(std::move(d)) {}

    Tensor reconstruct(const Tensor& x) const {
        check_input(config, x);
        const Tensor h = encoder.forward(x);
        const auto mu = head_mu(h, config.latent);
        return decoder.forward(Tensor({config.latent}, std::vector<float>(mu.begin(), mu.end())));
    }
    double score(const Tensor& x) const { return mse(reconstruct(x), x); }
};

inline QuantizedVae quantize(const VaeModel& m) { return QuantizedVae(m); }

// ---------------------------------------------------------------- training

struct TrainLog {
    std::vector<ElboTerms> epochs;  // epoch-mean terms
};

// `get(i)` yields training stack i of `count`; stacks may be built lazily.
template <class GetStack>
VaeModel train_vae(std::size_t count, GetStack&& get, const VaeConfig& cfg, TrainLog* log = nullptr) {
    cfg.validate();
    if (count == 0) throw argument_error("train_vae: empty dataset");
    VaeModel m = VaeModel::create(cfg);
    nn::Adam opt_e({cfg.learning_rate}), opt_d({cfg.learning_rate});
    Rng shuffle_rng(derive_seed(cfg.seed, "vae-shuffle"));
    Rng eps_rng(derive_seed(cfg.seed, "vae-eps"));
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t L = cfg.latent;
    nn::ForwardCache ce, cd;
    ElboGrads eg;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)  // Fisher-Yates with our own RNG draw
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng() % i)]);
        ElboTerms sum;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
            const float inv_b = 1.0f / static_cast<float>(b1 - b0);
            nn::Gradients ge = nn::Gradients::zeros_like(m.encoder), gd = nn::Gradients::zeros_like(m.decoder);
            for (std::size_t bi = b0; bi < b1; ++bi) {
                const Tensor x = get(order[bi]);
                check_input(cfg, x);
                const Tensor h = nn::forward(m.encoder, x, &ce);
                const auto mu = head_mu(h, L), lv = head_logvar(h, L);
                std::vector<float> eps(L), z(L);
                for (std::size_t j = 0; j < L; ++j) {
                    eps[j] = static_cast<float>(normal(eps_rng));
                    z[j] = mu[j] + std::exp(0.5f * std::clamp(lv[j], -15.0f, 15.0f)) * eps[j];
                }
                const Tensor xhat = nn::forward(m.decoder, Tensor({L}, z), &cd);
                ElboTerms t;
                try {
                    t = elbo_loss(x, xhat, mu, lv, cfg.beta, &eg);
                } catch (const numeric_error&) {
                    throw training_error("vae training diverged (non-finite loss) in epoch " + std::to_string(epoch), epoch);
                }
                sum.total += t.total;
                sum.recon += t.recon;
                sum.kl += t.kl;
                const nn::Gradients g_dec = nn::backward(m.decoder, cd, eg.d_recon);
                Tensor dh({2 * L});
                for (std::size_t j = 0; j < L; ++j) {
                    const float dz = g_dec.input[j];
                    dh[j] = dz + eg.d_mu[j];
                    const float s = lv[j] > -15.0f && lv[j] < 15.0f ? 0.5f * std::exp(0.5f * lv[j]) * eps[j] : 0.0f;
                    dh[L + j] = dz * s + eg.d_logvar[j];
                }
                ge.add(nn::backward(m.encoder, ce, dh), inv_b);
                gd.add(g_dec, inv_b);
            }
            try {
                opt_e.step(m.encoder, ge);
                opt_d.step(m.decoder, gd);
            } catch (const training_error& e) {
                throw training_error(std::string(e.what()) + " in epoch " + std::to_string(epoch), epoch);
            }
        }
        const auto n = static_cast<double>(order.size());
        const ElboTerms mean{sum.total / n, sum.recon / n, sum.kl / n};
        if (!std::isfinite(mean.total))
            throw training_error("vae training diverged in epoch " + std::to_string(epoch), epoch);
        if (log) log->epochs.push_back(mean);
    }
    return m;
}

inline VaeModel train_vae(const std::vector<Tensor>& stacks, const VaeConfig& cfg, TrainLog* log = nullptr) {
    return train_vae(stacks.size(), [&](std::size_t i) -> const Tensor& { return stacks[i]; }, cfg, log);
}

// ---------------------------------------------------------------- files

inline std::vector<nn::OodmEntry> config_entries(const VaeConfig& c) {
    std::vector<float> dims(c.input.begin(), c.input.end());
    return {nn::OodmEntry::vector("vae.input", dims),
            nn::OodmEntry::vector("vae.shape", {static_cast<float>(c.latent), static_cast<float>(c.hidden),
                                                static_cast<float>(c.ch1), static_cast<float>(c.ch2)})};
}

inline VaeConfig config_from_entries(const std::vector<nn::OodmEntry>& entries) {
    VaeConfig c;
    const Tensor in = nn::find_entry(entries, "vae.input").tensor();
    const Tensor sh = nn::find_entry(entries, "vae.shape").tensor();
    if (in.size() != 3 || sh.size() != 4) throw io_error("OODM: malformed vae metadata");
    c.input = {static_cast<std::size_t>(in[0]), static_cast<std::size_t>(in[1]), static_cast<std::size_t>(in[2])};
    c.latent = static_cast<std::size_t>(sh[0]);
    c.hidden = static_cast<std::size_t>(sh[1]);
    c.ch1 = static_cast<std::size_t>(sh[2]);
    c.ch2 = static_cast<std::size_t>(sh[3]);
    c.validate();
    return c;
}

inline std::vector<nn::OodmEntry> vae_entries(const VaeModel& m) {
    auto out = config_entries(m.config);
    for (auto& e : nn::model_entries(m.encoder)) out.push_back(std::move(e));
    for (auto& e : nn::model_entries(m.decoder)) out.push_back(std::move(e));
    return out;
}

inline VaeModel vae_from_entries(const std::vector<nn::OodmEntry>& entries) {
    const VaeConfig c = config_from_entries(entries);
    VaeModel m{c, build_encoder(c), build_decoder(c)};
    nn::load_model_params(m.encoder, entries);
    nn::load_model_params(m.decoder, entries);
    return m;
}

inline std::vector<nn::OodmEntry> qvae_entries(const QuantizedVae& q) {
    auto out = config_entries(q.config);
    for (auto& e : q.encoder.entries()) out.push_back(std::move(e));
    for (auto& e : q.decoder.entries()) out.push_back(std::move(e));
    return out;
}

inline QuantizedVae qvae_from_entries(const std::vector<nn::OodmEntry>& entries) {
    const VaeConfig c = config_from_entries(entries);
    return QuantizedVae(c, quant::QuantizedModel::from_entries(build_encoder(c), entries),
                        quant::QuantizedModel::from_entries(build_decoder(c), entries));
}

}  // namespace oodrt::vae
