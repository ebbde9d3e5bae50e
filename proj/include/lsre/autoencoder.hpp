#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsre/common.hpp"
#include "lsre/ela.hpp"

namespace lsre::ae {

using Feature = std::array<double, ela::kFeatureCount>;

// Per-feature min-max scaling fitted on the training split only. Inputs from
// outside the fitted range are clamped into [0, 1] after the transform.
struct Normalizer {
    Vec mins;
    Vec maxs;

    bool fitted() const { return !mins.empty(); }
    static Normalizer fit(const std::vector<Feature>& train_rows);
    static Normalizer identity();
    Vec normalize(const Feature& e) const;
};

// Encoder 21 -> 128 -> 64 -> 32 -> 16 -> 8 -> 2 and the mirrored decoder.
// PReLU (one learnable slope per site) after every layer except the encoder
// head, which uses Tanh, and the decoder head, which is affine.
inline const std::vector<int> kEncoderWidths = {21, 128, 64, 32, 16, 8, 2};

class Model {
public:
    Model();  // zero-sized; call init or load before use

    void init(std::uint64_t seed);
    bool initialized() const { return !enc_w_.empty(); }

    std::array<double, 2> encode(const Feature& e) const;
    Vec decode(const std::array<double, 2>& h) const;
    // Forward pass in normalized feature space (used by training/tests).
    Vec reconstruct_normalized(const Vec& e_norm) const;

    Normalizer normalizer;

    std::size_t parameter_count() const;
    Vec flatten_parameters() const;
    void load_parameters(const Vec& flat);

    std::string to_json(std::uint64_t seed, int epochs, double final_train_loss,
                        double final_val_loss) const;
    static Model from_json(const std::string& text);

    std::string content_hash() const;

    // Exposed for the trainer and the gradient checker.
    std::vector<Eigen::MatrixXd> enc_w_, dec_w_;
    std::vector<Eigen::VectorXd> enc_b_, dec_b_;
    Vec enc_slope_, dec_slope_;  // PReLU slopes, one per activation site
};

// Mean over the batch of 1/2 * ||e_norm - e_rec||^2 per sample.
double reconstruction_loss(std::span<const double> e_norm, std::span<const double> e_rec);

struct TrainConfig {
    int epochs = 300;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double lr_decay_gamma = 0.9862327;
    double split = 0.8;
    std::uint64_t seed = 0;
};

double learning_rate_at(const TrainConfig& config, int epoch);

struct TrainOptions {
    bool enforce_min_size = true;         // require |dataset| >= 10 * batch_size
    std::optional<Normalizer> normalizer; // override the fit on the train split
    double split = -1.0;                  // override config.split when >= 0
};

struct TrainResult {
    Model model;
    Vec train_curve;
    Vec val_curve;  // empty when the validation split is empty
};

TrainResult train(const std::vector<Feature>& dataset, const TrainConfig& config);
TrainResult train_with_options(const std::vector<Feature>& dataset, const TrainConfig& config,
                               const TrainOptions& options);

// Analytic gradient of the mean batch loss for every parameter, flattened in
// the same order as Model::flatten_parameters.
Vec loss_gradient(const Model& model, const std::vector<Vec>& batch_normalized);
double batch_loss(const Model& model, const std::vector<Vec>& batch_normalized);

}  // namespace lsre::ae
