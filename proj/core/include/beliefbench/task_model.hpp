#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "beliefbench/data.hpp"
#include "beliefbench/graph.hpp"
#include "beliefbench/params.hpp"
#include "beliefbench/vocab.hpp"

namespace beliefbench::model {

struct ModelConfig {
    data::Task task = data::Task::binary;
    int layers = 2;       // encoder depth; seq2seq adds the same decoder depth
    int width = 64;
    int ffn_mult = 4;
    int max_len = 32;
    int beam_width = 5;
    int max_decode_len = 6;

    int ffn_width() const { return width * ffn_mult; }
};

struct Prediction {
    std::string label;
    // binary: one row (p_true, p_false); seq2seq: one row per emitted token
    std::vector<std::vector<double>> scores;
    std::vector<std::string> beam;  // ranked candidates, best first (seq2seq)
};

// Binary class order is fixed: index 0 = True, 1 = False. Ties in argmax
// resolve to the lower index.
inline constexpr int kClassTrue = 0;
inline constexpr int kClassFalse = 1;

class TaskModel {
public:
    using Binding = std::map<std::string, num::Graph::Id>;

    static TaskModel init(const ModelConfig& cfg, Vocabulary vocab, std::uint64_t seed);
    static TaskModel from_parts(ModelConfig cfg, Vocabulary vocab, ParamStore params);

    const ModelConfig& config() const { return cfg_; }
    const Vocabulary& vocab() const { return vocab_; }
    const ParameterView& editable_view() const { return editable_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    TaskModel clone() const { return *this; }  // explicit deep copy

    Prediction predict(const std::string& input) const;
    bool predicts_gold(const data::BeliefRecord& record) const;

    struct LossAndGrads {
        double loss = 0.0;
        GradMap grads;  // exactly the editable view
    };
    // Cross-entropy toward target and per-matrix gradients over the editable
    // view, at the model's current parameters.
    LossAndGrads loss_and_gradients(const std::string& input, const std::string& target) const;
    // Same loss with gradients for every parameter (used by training and the
    // off-the-shelf baselines).
    LossAndGrads loss_and_gradients_all(const std::string& input, const std::string& target) const;

    double loss_value(const std::string& input, const std::string& target) const;

    // ---- graph-level API (editor / objective machinery) ----
    // Bind every parameter into g. Editable entries present in `overrides`
    // use the given node; `leaves` names become gradient leaves; everything
    // else enters as a constant.
    Binding bind(num::Graph& g, const Binding& overrides = {},
                 const std::vector<std::string>& leaves = {}) const;

    // logits node: binary -> 1x2; seq2seq -> rows per decoder input position
    num::Graph::Id logits_on_graph(num::Graph& g, const Binding& b, const std::vector<int>& input_ids,
                                   const std::vector<int>& decoder_input_ids = {}) const;
    // cross-entropy loss node toward a rendered label
    num::Graph::Id loss_on_graph(num::Graph& g, const Binding& b, const std::string& input,
                                 const std::string& target) const;
    // output distributions for KL terms; seq2seq rows follow teacher forcing
    // on `forced_label` (normally the pre-update prediction)
    num::Mat output_distribution(const std::string& input, const std::string& forced_label) const;
    num::Graph::Id distribution_logits_on_graph(num::Graph& g, const Binding& b, const std::string& input,
                                                const std::string& forced_label) const;

    std::vector<int> encode_label(const std::string& label) const;  // seq2seq target tokens + EOS

private:
    TaskModel() = default;

    ModelConfig cfg_;
    Vocabulary vocab_;
    ParamStore params_;
    ParameterView editable_;

    void build_editable_view();
};

struct TrainTaskConfig {
    int epochs = 10;          // paper default for binary; seq2seq uses 20
    double lr = 1e-3;         // desk-scale default (paper's 1e-5 targets 100M models)
    double weight_decay = 1e-4;
    int batch_size = 16;
    bool verbose = false;
};

struct TrainTaskResult {
    TaskModel model;
    double best_dev_accuracy = 0.0;
    int best_epoch = -1;
    std::vector<double> dev_accuracy_per_epoch;
};

// AdamW training with per-epoch dev checkpointing; returns the checkpoint
// with the best dev accuracy. Deterministic given seed.
TrainTaskResult train_task_model(const data::BeliefStore& train, const data::BeliefStore& dev, ModelConfig cfg,
                                 const TrainTaskConfig& tcfg, std::uint64_t seed);

double store_accuracy(const TaskModel& model, const data::BeliefStore& store);

}  // namespace beliefbench::model
