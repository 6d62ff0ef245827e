#include "beliefbench/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace beliefbench::num {

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::AdamW: return "AdamW";
        case OptimizerKind::SGD: return "SGD";
        default: return "RMSProp";
    }
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "AdamW" || s == "adamw") return OptimizerKind::AdamW;
    if (s == "SGD" || s == "sgd") return OptimizerKind::SGD;
    if (s == "RMSProp" || s == "rmsprop") return OptimizerKind::RMSProp;
    throw std::invalid_argument("unknown optimizer: " + s);
}

Optimizer::Optimizer(OptimizerKind kind, double lr)
    : Optimizer(kind, lr, kind == OptimizerKind::AdamW ? 1e-2 : 0.0) {}

Optimizer::Optimizer(OptimizerKind kind, double lr, double weight_decay)
    : kind_(kind), lr_(lr), weight_decay_(weight_decay) {}

void Optimizer::reset_state() {
    t_ = 0;
    m_.clear();
    v_.clear();
}

void Optimizer::step(model::ParamStore& params, const model::GradMap& grads) {
    ++t_;
    for (const auto& [name, g] : grads) {
        Mat& w = params.at(name);
        if (!w.same_shape(g)) throw std::invalid_argument("optimizer step: gradient shape mismatch for " + name);
        switch (kind_) {
            case OptimizerKind::SGD: {
                w.add_scaled_inplace(g, -lr_);
                break;
            }
            case OptimizerKind::AdamW: {
                auto& m = m_.try_emplace(name, Mat::zeros(w.rows(), w.cols())).first->second;
                auto& v = v_.try_emplace(name, Mat::zeros(w.rows(), w.cols())).first->second;
                const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
                const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
                for (std::size_t i = 0; i < w.size(); ++i) {
                    // decoupled weight decay
                    w[i] -= lr_ * weight_decay_ * w[i];
                    m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
                    v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
                    w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
                }
                break;
            }
            case OptimizerKind::RMSProp: {
                auto& v = v_.try_emplace(name, Mat::zeros(w.rows(), w.cols())).first->second;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    v[i] = alpha_ * v[i] + (1.0 - alpha_) * g[i] * g[i];
                    w[i] -= lr_ * g[i] / (std::sqrt(v[i]) + eps_);
                }
                break;
            }
        }
    }
}

double clip_global_norm(model::GradMap& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
        (void)name;
        for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (auto& [name, g] : grads) {
            (void)name;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
        }
    }
    return norm;
}

}  // namespace beliefbench::num
