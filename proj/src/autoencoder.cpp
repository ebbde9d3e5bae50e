#include "lsre/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace lsre::ae {
namespace {

using json = nlohmann::ordered_json;

constexpr double kPreluInitSlope = 0.25;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::vector<int> decoder_widths() {
    std::vector<int> w(kEncoderWidths.rbegin(), kEncoderWidths.rend());
    return w;
}

}  // namespace

Normalizer Normalizer::fit(const std::vector<Feature>& train_rows) {
    if (train_rows.empty()) throw degenerate_error("cannot fit normalizer on empty train split");
    Normalizer n;
    n.mins.assign(ela::kFeatureCount, std::numeric_limits<double>::infinity());
    n.maxs.assign(ela::kFeatureCount, -std::numeric_limits<double>::infinity());
    for (const auto& row : train_rows) {
        for (int k = 0; k < ela::kFeatureCount; ++k) {
            n.mins[static_cast<std::size_t>(k)] = std::min(n.mins[static_cast<std::size_t>(k)], row[static_cast<std::size_t>(k)]);
            n.maxs[static_cast<std::size_t>(k)] = std::max(n.maxs[static_cast<std::size_t>(k)], row[static_cast<std::size_t>(k)]);
        }
    }
    for (int k = 0; k < ela::kFeatureCount; ++k) {
        if (!(n.maxs[static_cast<std::size_t>(k)] > n.mins[static_cast<std::size_t>(k)])) {
            throw degenerate_error(std::string("degenerate feature in train split: ") +
                                   ela::kFeatureNames[static_cast<std::size_t>(k)]);
        }
    }
    return n;
}

Normalizer Normalizer::identity() {
    Normalizer n;
    n.mins.assign(ela::kFeatureCount, 0.0);
    n.maxs.assign(ela::kFeatureCount, 1.0);
    return n;
}

Vec Normalizer::normalize(const Feature& e) const {
    if (!fitted()) throw std::logic_error("normalizer not fitted");
    Vec out(ela::kFeatureCount);
    for (int k = 0; k < ela::kFeatureCount; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double t = (e[i] - mins[i]) / (maxs[i] - mins[i]);
        out[i] = std::clamp(t, 0.0, 1.0);
    }
    return out;
}

Model::Model() = default;

void Model::init(std::uint64_t seed) {
    Rng rng(seed);
    const auto dec_widths = decoder_widths();
    const auto make_stack = [&rng](const std::vector<int>& widths, std::vector<Eigen::MatrixXd>& ws,
                                   std::vector<Eigen::VectorXd>& bs) {
        ws.clear();
        bs.clear();
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            const int fan_in = widths[l];
            const int fan_out = widths[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            Eigen::MatrixXd w(fan_out, fan_in);
            for (int i = 0; i < fan_out; ++i) {
                for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-bound, bound);
            }
            ws.push_back(std::move(w));
            bs.push_back(Eigen::VectorXd::Zero(fan_out));
        }
    };
    make_stack(kEncoderWidths, enc_w_, enc_b_);
    make_stack(dec_widths, dec_w_, dec_b_);
    enc_slope_.assign(enc_w_.size() - 1, kPreluInitSlope);
    dec_slope_.assign(dec_w_.size() - 1, kPreluInitSlope);
}

namespace {

Eigen::VectorXd prelu(const Eigen::VectorXd& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

}  // namespace

std::array<double, 2> Model::encode(const Feature& e) const {
    const Vec n = normalizer.normalize(e);
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(n.data(), static_cast<Eigen::Index>(n.size()));
    for (std::size_t l = 0; l + 1 < enc_w_.size(); ++l) {
        a = prelu(enc_w_[l] * a + enc_b_[l], enc_slope_[l]);
    }
    a = (enc_w_.back() * a + enc_b_.back()).array().tanh();
    return {a(0), a(1)};
}

Vec Model::decode(const std::array<double, 2>& h) const {
    Eigen::VectorXd a(2);
    a << h[0], h[1];
    for (std::size_t l = 0; l + 1 < dec_w_.size(); ++l) {
        a = prelu(dec_w_[l] * a + dec_b_[l], dec_slope_[l]);
    }
    a = dec_w_.back() * a + dec_b_.back();
    return Vec(a.data(), a.data() + a.size());
}

Vec Model::reconstruct_normalized(const Vec& e_norm) const {
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(e_norm.data(), static_cast<Eigen::Index>(e_norm.size()));
    for (std::size_t l = 0; l + 1 < enc_w_.size(); ++l) {
        a = prelu(enc_w_[l] * a + enc_b_[l], enc_slope_[l]);
    }
    a = (enc_w_.back() * a + enc_b_.back()).array().tanh();
    for (std::size_t l = 0; l + 1 < dec_w_.size(); ++l) {
        a = prelu(dec_w_[l] * a + dec_b_[l], dec_slope_[l]);
    }
    a = dec_w_.back() * a + dec_b_.back();
    return Vec(a.data(), a.data() + a.size());
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : enc_w_) n += static_cast<std::size_t>(w.size());
    for (const auto& b : enc_b_) n += static_cast<std::size_t>(b.size());
    for (const auto& w : dec_w_) n += static_cast<std::size_t>(w.size());
    for (const auto& b : dec_b_) n += static_cast<std::size_t>(b.size());
    return n + enc_slope_.size() + dec_slope_.size();
}

Vec Model::flatten_parameters() const {
    Vec flat;
    flat.reserve(parameter_count());
    const auto push_stack = [&flat](const std::vector<Eigen::MatrixXd>& ws,
                                    const std::vector<Eigen::VectorXd>& bs, const Vec& slopes) {
        for (std::size_t l = 0; l < ws.size(); ++l) {
            for (Eigen::Index i = 0; i < ws[l].rows(); ++i) {
                for (Eigen::Index j = 0; j < ws[l].cols(); ++j) flat.push_back(ws[l](i, j));
            }
            for (Eigen::Index i = 0; i < bs[l].size(); ++i) flat.push_back(bs[l](i));
        }
        flat.insert(flat.end(), slopes.begin(), slopes.end());
    };
    push_stack(enc_w_, enc_b_, enc_slope_);
    push_stack(dec_w_, dec_b_, dec_slope_);
    return flat;
}

void Model::load_parameters(const Vec& flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("parameter count mismatch");
    std::size_t k = 0;
    const auto pull_stack = [&flat, &k](std::vector<Eigen::MatrixXd>& ws,
                                        std::vector<Eigen::VectorXd>& bs, Vec& slopes) {
        for (std::size_t l = 0; l < ws.size(); ++l) {
            for (Eigen::Index i = 0; i < ws[l].rows(); ++i) {
                for (Eigen::Index j = 0; j < ws[l].cols(); ++j) ws[l](i, j) = flat[k++];
            }
            for (Eigen::Index i = 0; i < bs[l].size(); ++i) bs[l](i) = flat[k++];
        }
        for (auto& s : slopes) s = flat[k++];
    };
    pull_stack(enc_w_, enc_b_, enc_slope_);
    pull_stack(dec_w_, dec_b_, dec_slope_);
}

double reconstruction_loss(std::span<const double> e_norm, std::span<const double> e_rec) {
    if (e_norm.size() != e_rec.size()) throw std::invalid_argument("reconstruction loss length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < e_norm.size(); ++i) {
        const double t = e_norm[i] - e_rec[i];
        acc += t * t;
    }
    return 0.5 * acc;
}

double learning_rate_at(const TrainConfig& config, int epoch) {
    return config.learning_rate * std::pow(config.lr_decay_gamma, epoch);
}

namespace {

// Forward/backward state for one batch, columns are samples.
struct Tape {
    std::vector<Eigen::MatrixXd> pre;   // pre-activation per affine layer
    std::vector<Eigen::MatrixXd> post;  // post-activation per layer, post[0] is the input
};

enum class Act { kPrelu, kTanh, kNone };

struct Grads {
    std::vector<Eigen::MatrixXd> enc_w, dec_w;
    std::vector<Eigen::VectorXd> enc_b, dec_b;
    Vec enc_slope, dec_slope;
};

}  // namespace

double batch_loss(const Model& model, const std::vector<Vec>& batch_normalized) {
    double acc = 0.0;
    for (const auto& e : batch_normalized) {
        acc += reconstruction_loss(e, model.reconstruct_normalized(e));
    }
    return acc / static_cast<double>(batch_normalized.size());
}

Vec loss_gradient(const Model& model, const std::vector<Vec>& batch_normalized) {
    const auto b = static_cast<Eigen::Index>(batch_normalized.size());
    if (b == 0) throw std::invalid_argument("empty batch");
    const auto in_dim = static_cast<Eigen::Index>(batch_normalized[0].size());
    Eigen::MatrixXd x(in_dim, b);
    for (Eigen::Index c = 0; c < b; ++c) {
        x.col(c) = Eigen::Map<const Eigen::VectorXd>(batch_normalized[static_cast<std::size_t>(c)].data(), in_dim);
    }

    const std::size_t n_enc = model.enc_w_.size();
    const std::size_t n_dec = model.dec_w_.size();
    Tape tape;
    tape.post.push_back(x);
    const auto forward_layer = [&tape](const Eigen::MatrixXd& w, const Eigen::VectorXd& bias,
                                       Act act, double slope) {
        Eigen::MatrixXd z = (w * tape.post.back()).colwise() + bias;
        tape.pre.push_back(z);
        switch (act) {
            case Act::kPrelu:
                tape.post.push_back(z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; }));
                break;
            case Act::kTanh:
                tape.post.push_back(z.array().tanh().matrix());
                break;
            case Act::kNone:
                tape.post.push_back(std::move(z));
                break;
        }
    };
    for (std::size_t l = 0; l < n_enc; ++l) {
        const bool last = l + 1 == n_enc;
        forward_layer(model.enc_w_[l], model.enc_b_[l], last ? Act::kTanh : Act::kPrelu,
                      last ? 0.0 : model.enc_slope_[l]);
    }
    for (std::size_t l = 0; l < n_dec; ++l) {
        const bool last = l + 1 == n_dec;
        forward_layer(model.dec_w_[l], model.dec_b_[l], last ? Act::kNone : Act::kPrelu,
                      last ? 0.0 : model.dec_slope_[l]);
    }

    Grads g;
    g.enc_w.resize(n_enc);
    g.enc_b.resize(n_enc);
    g.dec_w.resize(n_dec);
    g.dec_b.resize(n_dec);
    g.enc_slope.assign(model.enc_slope_.size(), 0.0);
    g.dec_slope.assign(model.dec_slope_.size(), 0.0);

    const double inv_b = 1.0 / static_cast<double>(b);
    // dL/d(output) for the mean batch loss of 1/2 ||out - x||^2.
    Eigen::MatrixXd delta = (tape.post.back() - x) * inv_b;

    const std::size_t total_layers = n_enc + n_dec;
    for (std::size_t idx = total_layers; idx-- > 0;) {
        const bool is_dec = idx >= n_enc;
        const std::size_t l = is_dec ? idx - n_enc : idx;
        const Eigen::MatrixXd& w = is_dec ? model.dec_w_[l] : model.enc_w_[l];
        const Eigen::MatrixXd& z = tape.pre[idx];
        const Eigen::MatrixXd& a_out = tape.post[idx + 1];
        Act act;
        double slope = 0.0;
        if (is_dec) {
            act = l + 1 == n_dec ? Act::kNone : Act::kPrelu;
            if (act == Act::kPrelu) slope = model.dec_slope_[l];
        } else {
            act = l + 1 == n_enc ? Act::kTanh : Act::kPrelu;
            if (act == Act::kPrelu) slope = model.enc_slope_[l];
        }

        Eigen::MatrixXd dz;
        switch (act) {
            case Act::kPrelu: {
                dz = delta;
                double dslope = 0.0;
                for (Eigen::Index i = 0; i < z.rows(); ++i) {
                    for (Eigen::Index c = 0; c < z.cols(); ++c) {
                        if (z(i, c) <= 0.0) {
                            dz(i, c) *= slope;
                            dslope += delta(i, c) * z(i, c);
                        }
                    }
                }
                if (is_dec) {
                    g.dec_slope[l] += dslope;
                } else {
                    g.enc_slope[l] += dslope;
                }
                break;
            }
            case Act::kTanh:
                dz = delta.cwiseProduct((1.0 - a_out.array().square()).matrix());
                break;
            case Act::kNone:
                dz = delta;
                break;
        }

        const Eigen::MatrixXd dw = dz * tape.post[idx].transpose();
        const Eigen::VectorXd db = dz.rowwise().sum();
        if (is_dec) {
            g.dec_w[l] = dw;
            g.dec_b[l] = db;
        } else {
            g.enc_w[l] = dw;
            g.enc_b[l] = db;
        }
        delta = w.transpose() * dz;
    }

    Vec flat;
    flat.reserve(model.parameter_count());
    const auto push_stack = [&flat](const std::vector<Eigen::MatrixXd>& ws,
                                    const std::vector<Eigen::VectorXd>& bs, const Vec& slopes) {
        for (std::size_t l = 0; l < ws.size(); ++l) {
            for (Eigen::Index i = 0; i < ws[l].rows(); ++i) {
                for (Eigen::Index j = 0; j < ws[l].cols(); ++j) flat.push_back(ws[l](i, j));
            }
            for (Eigen::Index i = 0; i < bs[l].size(); ++i) flat.push_back(bs[l](i));
        }
        flat.insert(flat.end(), slopes.begin(), slopes.end());
    };
    push_stack(g.enc_w, g.enc_b, g.enc_slope);
    push_stack(g.dec_w, g.dec_b, g.dec_slope);
    return flat;
}

TrainResult train(const std::vector<Feature>& dataset, const TrainConfig& config) {
    return train_with_options(dataset, config, {});
}

TrainResult train_with_options(const std::vector<Feature>& dataset, const TrainConfig& config,
                               const TrainOptions& options) {
    const std::size_t n = dataset.size();
    if (options.enforce_min_size && n < 10 * static_cast<std::size_t>(config.batch_size)) {
        throw config_error("training dataset too small: need at least " +
                           std::to_string(10 * config.batch_size) + " vectors, got " + std::to_string(n));
    }
    if (n == 0) throw config_error("empty training dataset");
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : dataset[i]) {
            if (!std::isfinite(v)) throw config_error("invalid vector at dataset row " + std::to_string(i));
        }
    }

    const double split = options.split >= 0.0 ? options.split : config.split;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(seed_tag(config.seed, "ae-split"));
    split_rng.shuffle(order);
    const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(split * static_cast<double>(n))));
    std::vector<Feature> train_rows, val_rows;
    for (std::size_t i = 0; i < n; ++i) {
        (i < n_train ? train_rows : val_rows).push_back(dataset[order[i]]);
    }

    TrainResult result;
    result.model.normalizer = options.normalizer ? *options.normalizer : Normalizer::fit(train_rows);
    result.model.init(seed_tag(config.seed, "ae-init"));

    std::vector<Vec> train_norm, val_norm;
    train_norm.reserve(train_rows.size());
    for (const auto& r : train_rows) train_norm.push_back(result.model.normalizer.normalize(r));
    val_norm.reserve(val_rows.size());
    for (const auto& r : val_rows) val_norm.push_back(result.model.normalizer.normalize(r));

    Vec params = result.model.flatten_parameters();
    Vec m(params.size(), 0.0), v(params.size(), 0.0);
    std::uint64_t t = 0;

    Rng order_rng(seed_tag(config.seed, "ae-order"));
    std::vector<std::size_t> batch_order(train_norm.size());
    std::iota(batch_order.begin(), batch_order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = learning_rate_at(config, epoch);
        order_rng.shuffle(batch_order);
        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < batch_order.size()) {
            const std::size_t end = std::min(pos + static_cast<std::size_t>(config.batch_size), batch_order.size());
            std::vector<Vec> batch;
            batch.reserve(end - pos);
            for (std::size_t i = pos; i < end; ++i) batch.push_back(train_norm[batch_order[i]]);

            epoch_loss += batch_loss(result.model, batch) * static_cast<double>(batch.size());
            const Vec grads = loss_gradient(result.model, batch);
            ++t;
            const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
            for (std::size_t i = 0; i < params.size(); ++i) {
                m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grads[i];
                v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
                params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
            }
            result.model.load_parameters(params);
            pos = end;
        }
        epoch_loss /= static_cast<double>(train_norm.size());
        if (!std::isfinite(epoch_loss)) {
            throw degenerate_error("non-finite training loss at epoch " + std::to_string(epoch));
        }
        result.train_curve.push_back(epoch_loss);
        if (!val_norm.empty()) {
            const double vl = batch_loss(result.model, val_norm);
            if (!std::isfinite(vl)) {
                throw degenerate_error("non-finite validation loss at epoch " + std::to_string(epoch));
            }
            result.val_curve.push_back(vl);
        }
    }
    return result;
}

std::string Model::to_json(std::uint64_t seed, int epochs, double final_train_loss,
                           double final_val_loss) const {
    json doc;
    doc["architecture"]["encoder_widths"] = kEncoderWidths;
    doc["architecture"]["decoder_widths"] = decoder_widths();
    doc["parameters"] = flatten_parameters();
    doc["normalizer"]["mins"] = normalizer.mins;
    doc["normalizer"]["maxs"] = normalizer.maxs;
    doc["train_meta"]["seed"] = seed;
    doc["train_meta"]["epochs"] = epochs;
    doc["train_meta"]["final_losses"]["train"] = final_train_loss;
    doc["train_meta"]["final_losses"]["val"] = final_val_loss;
    return doc.dump(2);
}

Model Model::from_json(const std::string& text) {
    json doc = json::parse(text);
    const auto widths = doc.at("architecture").at("encoder_widths").get<std::vector<int>>();
    if (widths != kEncoderWidths) throw config_error("unexpected encoder architecture in model file");
    Model model;
    model.init(0);
    const auto params = doc.at("parameters").get<Vec>();
    model.load_parameters(params);
    model.normalizer.mins = doc.at("normalizer").at("mins").get<Vec>();
    model.normalizer.maxs = doc.at("normalizer").at("maxs").get<Vec>();
    if (model.normalizer.mins.size() != ela::kFeatureCount ||
        model.normalizer.maxs.size() != ela::kFeatureCount) {
        throw config_error("bad normalizer size in model file");
    }
    return model;
}

std::string Model::content_hash() const {
    std::ostringstream os;
    os.precision(17);
    for (double p : flatten_parameters()) os << p << ",";
    for (double p : normalizer.mins) os << p << ",";
    for (double p : normalizer.maxs) os << p << ",";
    std::ostringstream hex;
    hex << std::hex << fnv1a64(os.str());
    return hex.str();
}

}  // namespace lsre::ae
