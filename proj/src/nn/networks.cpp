#include <cmath>
#include <random>

#include "pdeop/nn.hpp"

namespace pdeop::nn {

namespace {

Mat init_weight(int in, int out, Activation act, std::mt19937_64& rng) {
    // He for rectifiers, Glorot otherwise
    const double sd = (act == Activation::Relu || act == Activation::Silu) ? std::sqrt(2.0 / in)
                                                                           : std::sqrt(2.0 / (in + out));
    std::normal_distribution<double> nd(0.0, sd);
    Mat w(in, out);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = nd(rng);
    return w;
}

Mat logistic(const Mat& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

}  // namespace

DenseNet::DenseNet(std::vector<int> sizes, Activation act, std::uint64_t seed, const std::string& prefix)
    : sizes_(std::move(sizes)), act_(act) {
    if (sizes_.size() < 2) throw ConfigError("DenseNet needs at least input and output sizes");
    for (int s : sizes_)
        if (s < 1) throw ConfigError("DenseNet layer sizes must be positive");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const bool last = l + 2 == sizes_.size();
        weights_.emplace_back(prefix + ".W" + std::to_string(l),
                              init_weight(sizes_[l], sizes_[l + 1], last ? Activation::Identity : act, rng));
        biases_.emplace_back(prefix + ".b" + std::to_string(l), Mat::Zero(1, sizes_[l + 1]));
    }
}

Var DenseNet::forward(Tape& tape, Var x) {
    if (x.cols() != input_dim()) throw DimensionError("DenseNet input has wrong width");
    Var h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = add_row(matmul(h, tape.param(weights_[l])), tape.param(biases_[l]));
        if (l + 1 < weights_.size()) h = activate(h, act_);
    }
    return h;
}

Mat DenseNet::eval(const Mat& x) const {
    if (x.cols() != input_dim()) throw DimensionError("DenseNet input has wrong width");
    Mat h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Mat z = h * weights_[l].value;
        z.rowwise() += biases_[l].value.row(0);
        h = (l + 1 < weights_.size()) ? apply_activation(z, act_) : std::move(z);
    }
    return h;
}

std::vector<ParamBlock*> DenseNet::parameters() {
    std::vector<ParamBlock*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

long DenseNet::parameter_count() const {
    long c = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) c += weights_[l].value.size() + biases_[l].value.size();
    return c;
}

void DenseNet::zero_last_layer() {
    if (weights_.empty()) return;
    weights_.back().value.setZero();
    biases_.back().value.setZero();
}

RecurrentCell::RecurrentCell(int input, int hidden, int layers, std::uint64_t seed, const std::string& prefix)
    : input_(input), hidden_(hidden), layers_(layers) {
    if (input < 1 || hidden < 1 || layers < 1) throw ConfigError("recurrent cell sizes must be positive");
    std::mt19937_64 rng(seed);
    for (int l = 0; l < layers; ++l) {
        const int in = l == 0 ? input : hidden;
        const std::string p = prefix + ".l" + std::to_string(l);
        params_.emplace_back(p + ".W", init_weight(in, 3 * hidden, Activation::Tanh, rng));
        params_.emplace_back(p + ".U", init_weight(hidden, 3 * hidden, Activation::Tanh, rng));
        params_.emplace_back(p + ".bx", Mat::Zero(1, 3 * hidden));
        params_.emplace_back(p + ".bh", Mat::Zero(1, 3 * hidden));
    }
}

std::vector<Var> RecurrentCell::step(Tape& tape, Var x, const std::vector<Var>& state) {
    if (static_cast<int>(state.size()) != layers_) throw DimensionError("recurrent state has wrong layer count");
    if (x.cols() != input_) throw DimensionError("recurrent input has wrong width");
    const Eigen::Index H = hidden_;
    std::vector<Var> next;
    Var in = x;
    for (int l = 0; l < layers_; ++l) {
        Var h = state[l];
        if (h.cols() != H || h.rows() != in.rows()) throw DimensionError("recurrent state has wrong shape");
        Var xw = add_row(matmul(in, tape.param(params_[4 * l])), tape.param(params_[4 * l + 2]));
        Var hu = add_row(matmul(h, tape.param(params_[4 * l + 1])), tape.param(params_[4 * l + 3]));
        Var z = sigmoid(add(slice_cols(xw, 0, H), slice_cols(hu, 0, H)));
        Var r = sigmoid(add(slice_cols(xw, H, H), slice_cols(hu, H, H)));
        Var n = tanh(add(slice_cols(xw, 2 * H, H), mul(r, slice_cols(hu, 2 * H, H))));
        Var h_new = add(n, mul(z, sub(h, n)));
        next.push_back(h_new);
        in = h_new;
    }
    return next;
}

std::vector<Mat> RecurrentCell::eval_step(const Mat& x, const std::vector<Mat>& state) const {
    if (static_cast<int>(state.size()) != layers_) throw DimensionError("recurrent state has wrong layer count");
    if (x.cols() != input_) throw DimensionError("recurrent input has wrong width");
    const Eigen::Index H = hidden_;
    std::vector<Mat> next;
    Mat in = x;
    for (int l = 0; l < layers_; ++l) {
        const Mat& h = state[l];
        Mat xw = in * params_[4 * l].value;
        xw.rowwise() += params_[4 * l + 2].value.row(0);
        Mat hu = h * params_[4 * l + 1].value;
        hu.rowwise() += params_[4 * l + 3].value.row(0);
        const Mat z = logistic(xw.leftCols(H) + hu.leftCols(H));
        const Mat r = logistic(xw.middleCols(H, H) + hu.middleCols(H, H));
        const Mat n = (xw.rightCols(H) + r.cwiseProduct(hu.rightCols(H))).array().tanh().matrix();
        Mat h_new = n + z.cwiseProduct(h - n);
        in = h_new;
        next.push_back(std::move(h_new));
    }
    return next;
}

std::vector<Mat> RecurrentCell::zero_state(Eigen::Index batch) const {
    return std::vector<Mat>(layers_, Mat::Zero(batch, hidden_));
}

std::vector<ParamBlock*> RecurrentCell::parameters() {
    std::vector<ParamBlock*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
}

long RecurrentCell::parameter_count() const {
    long c = 0;
    for (const auto& p : params_) c += p.value.size();
    return c;
}

OperatorNet::OperatorNet(const OperatorConfig& cfg, const Vec& coordinates, std::uint64_t seed)
    : cfg_(cfg), coords_(coordinates) {
    if (cfg.n < 1 || cfg.m < 1 || cfg.features < 1) throw ConfigError("operator sizes must be positive");
    if (coordinates.size() != cfg.n) throw DimensionError("operator coordinates must have n entries");
    std::vector<int> bs{cfg.n + cfg.m};
    bs.insert(bs.end(), cfg.branch_hidden.begin(), cfg.branch_hidden.end());
    bs.push_back(cfg.features);
    std::vector<int> ts{1};
    ts.insert(ts.end(), cfg.trunk_hidden.begin(), cfg.trunk_hidden.end());
    ts.push_back(cfg.features);
    branch_ = DenseNet(bs, cfg.activation, stochastic::mix_seed(seed, 1), "branch");
    trunk_ = DenseNet(ts, cfg.activation, stochastic::mix_seed(seed, 2), "trunk");
    shift_ = Mat::Zero(1, cfg.n + cfg.m);
    inv_scale_ = Mat::Ones(1, cfg.n + cfg.m);
}

void OperatorNet::set_normalization(Mat shift, Mat inv_scale, double out_scale) {
    if (shift.rows() != 1 || inv_scale.rows() != 1 || shift.cols() != cfg_.n + cfg_.m ||
        inv_scale.cols() != cfg_.n + cfg_.m)
        throw DimensionError("normalization rows must be 1 x (n + m)");
    if (!(out_scale > 0.0) || !std::isfinite(out_scale)) throw ConfigError("output scale must be positive");
    shift_ = std::move(shift);
    inv_scale_ = std::move(inv_scale);
    out_scale_ = out_scale;
    trunk_cache_.resize(0, 0);
}

void OperatorNet::fit_normalization(const stochastic::OneStepBatch& data) {
    if (data.state.cols() != cfg_.n || data.input.cols() != cfg_.m || data.state.rows() == 0)
        throw DimensionError("normalization data does not match operator shape");
    Mat x(data.state.rows(), cfg_.n + cfg_.m);
    x << data.state, data.input;
    const Mat mu = x.colwise().mean();
    Mat inv(1, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double sd = std::sqrt((x.col(j).array() - mu(0, j)).square().mean());
        inv(0, j) = sd > 1e-8 ? 1.0 / sd : 1.0;
    }
    double s = 1.0;
    if (cfg_.residual) {
        const double rms = std::sqrt((data.next - data.state).squaredNorm() / double(data.next.size()));
        s = rms > 1e-12 ? rms : 1.0;
    }
    set_normalization(mu, inv, s);
}

Mat OperatorNet::trunk_features() const { return trunk_.eval(Mat(coords_)); }

void OperatorNet::prepare_inference() { trunk_cache_ = trunk_features(); }

Var OperatorNet::step(Tape& tape, Var y, Var c) {
    if (y.cols() != cfg_.n || c.cols() != cfg_.m || y.rows() != c.rows())
        throw DimensionError("operator step: expected batch x " + std::to_string(cfg_.n) + " state and batch x " +
                             std::to_string(cfg_.m) + " control");
    Var tf;
    if (!tape.recall(this, tf)) {
        tf = trunk_.forward(tape, tape.constant(Mat(coords_)));
        tape.remember(this, tf);
    }
    Var b = branch_.forward(tape, normalize_cols(concat_cols(y, c), shift_, inv_scale_));
    Var out = matmul_nt(b, tf);
    if (!cfg_.residual) return out;
    return add(y, scale(out, out_scale_));
}

Mat OperatorNet::eval_step(const Mat& y, const Mat& c) const {
    if (y.cols() != cfg_.n || c.cols() != cfg_.m || y.rows() != c.rows())
        throw DimensionError("operator step: shape mismatch");
    Mat x(y.rows(), cfg_.n + cfg_.m);
    x << y, c;
    x = (x.rowwise() - shift_.row(0)).array().rowwise() * inv_scale_.row(0).array();
    const Mat b = branch_.eval(x);
    if (trunk_cache_.size() == 0) trunk_cache_ = trunk_features();
    Mat out = b * trunk_cache_.transpose();
    if (!cfg_.residual) return out;
    return y + out_scale_ * out;
}

std::vector<ParamBlock*> OperatorNet::parameters() {
    auto p = branch_.parameters();
    auto t = trunk_.parameters();
    p.insert(p.end(), t.begin(), t.end());
    return p;
}

long OperatorNet::parameter_count() const { return branch_.parameter_count() + trunk_.parameter_count(); }

Controller::Controller(const ControllerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.n < 1 || cfg.m < 1) throw ConfigError("controller sizes must be positive");
    if (cfg.recurrent) {
        cell_ = RecurrentCell(2 * cfg.n, cfg.recurrent_hidden, cfg.recurrent_layers, stochastic::mix_seed(seed, 1),
                              "cell");
        std::vector<int> hs{cfg.recurrent_hidden};
        hs.insert(hs.end(), cfg.hidden.begin(), cfg.hidden.end());
        hs.push_back(cfg.m);
        head_ = DenseNet(hs, cfg.activation, stochastic::mix_seed(seed, 2), "head");
    } else {
        std::vector<int> hs{2 * cfg.n};
        hs.insert(hs.end(), cfg.hidden.begin(), cfg.hidden.end());
        hs.push_back(cfg.m);
        head_ = DenseNet(hs, cfg.activation, stochastic::mix_seed(seed, 2), "head");
    }
}

Var Controller::bound(Var raw) const {
    if (!cfg_.squash) return raw;
    return squash(raw, cfg_.bounds.lower, cfg_.bounds.upper);
}

Mat Controller::bound(const Mat& raw) const {
    if (!cfg_.squash) return raw;
    return (cfg_.bounds.lower + (cfg_.bounds.upper - cfg_.bounds.lower) * logistic(raw).array()).matrix();
}

Var Controller::forward_static(Tape& tape, Var y, Var target) {
    if (cfg_.recurrent) throw ConfigError("forward_static called on a recurrent controller");
    return bound(head_.forward(tape, concat_cols(y, target)));
}

Var Controller::forward_recurrent(Tape& tape, Var y, Var target, std::vector<Var>& state) {
    if (!cfg_.recurrent) throw ConfigError("forward_recurrent called on a static controller");
    state = cell_.step(tape, concat_cols(y, target), state);
    return bound(head_.forward(tape, state.back()));
}

std::vector<Var> Controller::initial_state(Tape& tape, Eigen::Index batch) const {
    std::vector<Var> s;
    for (int l = 0; l < cfg_.recurrent_layers; ++l) s.push_back(tape.constant(Mat::Zero(batch, cfg_.recurrent_hidden)));
    return s;
}

Mat Controller::eval_static(const Mat& y, const Mat& target) const {
    if (cfg_.recurrent) throw ConfigError("eval_static called on a recurrent controller");
    Mat x(y.rows(), y.cols() + target.cols());
    x << y, target;
    return bound(head_.eval(x));
}

Mat Controller::eval_recurrent(const Mat& y, const Mat& target, std::vector<Mat>& state) const {
    if (!cfg_.recurrent) throw ConfigError("eval_recurrent called on a static controller");
    Mat x(y.rows(), y.cols() + target.cols());
    x << y, target;
    state = cell_.eval_step(x, state);
    return bound(head_.eval(state.back()));
}

std::vector<ParamBlock*> Controller::parameters() {
    auto p = head_.parameters();
    if (cfg_.recurrent) {
        auto c = cell_.parameters();
        p.insert(p.begin(), c.begin(), c.end());
    }
    return p;
}

long Controller::parameter_count() const {
    return head_.parameter_count() + (cfg_.recurrent ? cell_.parameter_count() : 0);
}

OperatorConfig default_operator_config(const SystemSpec& spec) {
    OperatorConfig c;
    c.n = spec.grid.n();
    c.m = spec.control_dim();
    // relu is too coarse for the smooth voltage and Burgers increments
    c.activation = spec.kind == SystemKind::Heat ? Activation::Relu : Activation::Silu;
    return c;
}

ControllerConfig default_controller_config(const SystemSpec& spec) {
    ControllerConfig c;
    c.n = spec.grid.n();
    c.m = spec.control_dim();
    c.bounds = spec.bounds;
    c.recurrent = !spec.static_control();
    if (c.recurrent) c.hidden = {64};
    return c;
}

}  // namespace pdeop::nn
