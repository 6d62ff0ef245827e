#pragma once

#include <map>
#include <string>

#include "beliefbench/params.hpp"

namespace beliefbench::num {

// First-order update rules matching torch.optim defaults (everything except
// the learning rate), which is what the baseline grid asks for.

enum class OptimizerKind { AdamW, SGD, RMSProp };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

class Optimizer {
public:
    explicit Optimizer(OptimizerKind kind, double lr);
    Optimizer(OptimizerKind kind, double lr, double weight_decay);

    // applies one step to every (name, grad) pair present in grads
    void step(model::ParamStore& params, const model::GradMap& grads);
    void reset_state();

    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return lr_; }

private:
    OptimizerKind kind_;
    double lr_;
    double weight_decay_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    double alpha_ = 0.99;  // RMSProp smoothing
    long t_ = 0;
    std::map<std::string, Mat> m_;
    std::map<std::string, Mat> v_;
};

// Scales grads in place so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(model::GradMap& grads, double max_norm);

}  // namespace beliefbench::num
