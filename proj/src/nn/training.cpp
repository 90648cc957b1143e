#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pdeop/nn.hpp"

namespace pdeop::nn {

AdamW::AdamW(std::vector<ParamBlock*> params, AdamWOptions opts) : params_(std::move(params)), opts_(opts) {
    for (auto* p : params_) {
        m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

double AdamW::step(double lr) {
    double sq = 0.0;
    for (auto* p : params_) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
    const double clip = (opts_.clip_norm > 0.0 && norm > opts_.clip_norm) ? opts_.clip_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ParamBlock& p = *params_[i];
        const Mat g = clip * p.grad;
        m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
        v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.cwiseAbs2();
        if (opts_.weight_decay > 0.0) p.value *= 1.0 - lr * opts_.weight_decay;
        p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opts_.eps);
    }
    return norm;
}

double cosine_lr(double base, long step, long total, double floor_fraction) {
    if (total <= 1) return base;
    const double f = std::clamp(double(step) / double(total - 1), 0.0, 1.0);
    const double lo = floor_fraction * base;
    return lo + 0.5 * (base - lo) * (1.0 + std::cos(std::numbers::pi * f));
}

double one_step_mse(const OperatorNet& net, const stochastic::OneStepBatch& data) {
    if (data.state.rows() == 0) return 0.0;
    double sq = 0.0;
    const Eigen::Index chunk = 4096;
    for (Eigen::Index r = 0; r < data.state.rows(); r += chunk) {
        const Eigen::Index k = std::min(chunk, data.state.rows() - r);
        sq += (net.eval_step(data.state.middleRows(r, k), data.input.middleRows(r, k)) - data.next.middleRows(r, k))
                  .squaredNorm();
    }
    return sq / double(data.next.size());
}

namespace {

std::vector<Mat> snapshot(const std::vector<ParamBlock*>& ps) {
    std::vector<Mat> out;
    for (auto* p : ps) out.push_back(p->value);
    return out;
}

void restore(const std::vector<ParamBlock*>& ps, const std::vector<Mat>& values) {
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = values[i];
}

stochastic::OneStepBatch rows_of(const stochastic::OneStepBatch& d, const std::vector<Eigen::Index>& idx) {
    stochastic::OneStepBatch b;
    b.state.resize(Eigen::Index(idx.size()), d.state.cols());
    b.input.resize(Eigen::Index(idx.size()), d.input.cols());
    b.next.resize(Eigen::Index(idx.size()), d.next.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        b.state.row(Eigen::Index(i)) = d.state.row(idx[i]);
        b.input.row(Eigen::Index(i)) = d.input.row(idx[i]);
        b.next.row(Eigen::Index(i)) = d.next.row(idx[i]);
    }
    return b;
}

}  // namespace

OperatorTrainReport train_operator(OperatorNet& net, const stochastic::OneStepBatch& train,
                                   const stochastic::OneStepBatch& validation, const OperatorTrainOptions& opts) {
    if (opts.epochs < 0 || opts.batch < 1 || !(opts.lr > 0.0)) throw ConfigError("bad operator training options");
    if (train.state.rows() == 0) throw ConfigError("empty training set");
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::Index count = train.state.rows();

    // fixed subset for the per-epoch train loss
    std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    std::mt19937_64 rng(stochastic::mix_seed(opts.seed, 0x7a11));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Eigen::Index> probe(order.begin(),
                                    order.begin() + std::min<Eigen::Index>(count, opts.train_eval_samples));
    const auto train_probe = rows_of(train, probe);
    const bool has_val = validation.state.rows() > 0;

    net.prepare_inference();
    OperatorTrainReport rep;
    rep.initial_train_loss = one_step_mse(net, train_probe);
    rep.initial_validation_loss = has_val ? one_step_mse(net, validation) : rep.initial_train_loss;
    rep.best_validation_loss = rep.initial_validation_loss;
    auto params = net.parameters();
    auto best = snapshot(params);

    AdamW adam(params, {opts.lr, 0.9, 0.999, 1e-8, opts.weight_decay, opts.clip_norm});
    const long batches = (count + opts.batch - 1) / opts.batch;
    const long total = batches * opts.epochs;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double lr = opts.lr;
        for (long b = 0; b < batches; ++b) {
            const auto lo = order.begin() + b * opts.batch;
            const auto hi = order.begin() + std::min<long>(count, (b + 1) * opts.batch);
            auto mb = rows_of(train, std::vector<Eigen::Index>(lo, hi));
            if (opts.input_noise > 0.0) {
                std::normal_distribution<double> nd(0.0, opts.input_noise * net.output_scale());
                for (Eigen::Index i = 0; i < mb.state.size(); ++i) mb.state.data()[i] += nd(rng);
            }
            Tape tape;
            Var pred = net.step(tape, tape.constant(mb.state), tape.constant(mb.input));
            Var loss = scale(sum_squares(sub(pred, tape.constant(mb.next))), 1.0 / double(mb.next.size()));
            if (!std::isfinite(loss.scalar())) {
                std::ostringstream os;
                os << "operator training produced a non-finite loss (epoch " << epoch << ", batch " << b
                   << ", lr " << lr << ")";
                throw NumericalError(os.str());
            }
            adam.zero_grad();
            tape.backward(loss);
            tape.accumulate_param_grads();
            lr = cosine_lr(opts.lr, adam.steps(), total);
            adam.step(lr);
        }
        net.prepare_inference();
        OperatorEpoch e;
        e.epoch = epoch;
        e.lr = lr;
        e.train_loss = one_step_mse(net, train_probe);
        e.validation_loss = has_val ? one_step_mse(net, validation) : e.train_loss;
        if (!std::isfinite(e.train_loss))
            throw NumericalError("operator training diverged at epoch " + std::to_string(epoch));
        if (e.validation_loss < rep.best_validation_loss || rep.best_epoch < 0) {
            rep.best_validation_loss = e.validation_loss;
            rep.best_epoch = epoch;
            best = snapshot(params);
        }
        rep.history.push_back(e);
        spdlog::debug("operator epoch {} train {:.3e} val {:.3e} lr {:.2e}", epoch, e.train_loss,
                      e.validation_loss, lr);
    }
    restore(params, best);
    net.prepare_inference();
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

OperatorTrainReport train_operator(OperatorNet& net, const stochastic::Dataset& data,
                                   const OperatorTrainOptions& opts) {
    const auto train = data.samples(data.splits.train);
    const auto val = data.samples(data.splits.validation);
    net.fit_normalization(train);
    return train_operator(net, train, val, opts);
}

}  // namespace pdeop::nn
