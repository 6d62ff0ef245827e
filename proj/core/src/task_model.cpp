#include "beliefbench/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "beliefbench/optim.hpp"
#include "beliefbench/rng.hpp"

namespace beliefbench::model {

namespace {

constexpr double kLnEps = 1e-5;

std::string layer_name(const char* stack, int layer, const char* rest) {
    return std::string(stack) + "." + std::to_string(layer) + "." + rest;
}

}  // namespace

void TaskModel::build_editable_view() {
    editable_.entries.clear();
    for (const auto& name : params_.names()) {
        bool editable = name.find(".attn.") != std::string::npos || name.find(".self.") != std::string::npos ||
                        name.find(".cross.") != std::string::npos || name.find(".ffn.") != std::string::npos;
        if (editable) {
            const num::Mat& m = params_.at(name);
            editable_.entries.push_back({name, m.rows(), m.cols()});
        }
    }
}

TaskModel TaskModel::init(const ModelConfig& cfg, Vocabulary vocab, std::uint64_t seed) {
    TaskModel m;
    m.cfg_ = cfg;
    m.vocab_ = std::move(vocab);
    num::Rng rng(seed);

    const int d = cfg.width;
    const int f = cfg.ffn_width();
    const int V = m.vocab_.size();
    const double ws = 1.0 / std::sqrt(static_cast<double>(d));

    auto add_ln = [&](const std::string& prefix) {
        m.params_.add(prefix + ".g", num::Mat::full(1, d, 1.0));
        m.params_.add(prefix + ".b", num::Mat::zeros(1, d));
    };

    m.params_.add("embed.tok", num::randn(V, d, rng, 0.1));
    m.params_.add("embed.pos", num::randn(cfg.max_len, d, rng, 0.1));

    auto add_block = [&](const std::string& stack, int i, bool cross) {
        add_ln(layer_name(stack.c_str(), i, "ln1"));
        m.params_.add(layer_name(stack.c_str(), i, cross ? "self.wq" : "attn.wq"), num::randn(d, d, rng, ws));
        m.params_.add(layer_name(stack.c_str(), i, cross ? "self.wk" : "attn.wk"), num::randn(d, d, rng, ws));
        m.params_.add(layer_name(stack.c_str(), i, cross ? "self.wv" : "attn.wv"), num::randn(d, d, rng, ws));
        m.params_.add(layer_name(stack.c_str(), i, cross ? "self.wo" : "attn.wo"), num::randn(d, d, rng, ws * 0.5));
        if (cross) {
            add_ln(layer_name(stack.c_str(), i, "ln2"));
            m.params_.add(layer_name(stack.c_str(), i, "cross.wq"), num::randn(d, d, rng, ws));
            m.params_.add(layer_name(stack.c_str(), i, "cross.wk"), num::randn(d, d, rng, ws));
            m.params_.add(layer_name(stack.c_str(), i, "cross.wv"), num::randn(d, d, rng, ws));
            m.params_.add(layer_name(stack.c_str(), i, "cross.wo"), num::randn(d, d, rng, ws * 0.5));
            add_ln(layer_name(stack.c_str(), i, "ln3"));
        } else {
            add_ln(layer_name(stack.c_str(), i, "ln2"));
        }
        m.params_.add(layer_name(stack.c_str(), i, "ffn.w1"), num::randn(d, f, rng, ws));
        m.params_.add(layer_name(stack.c_str(), i, "ffn.w2"), num::randn(f, d, rng, ws * 0.5));
    };

    for (int i = 0; i < cfg.layers; ++i) add_block("enc", i, false);
    add_ln("enc.lnf");
    if (cfg.task == data::Task::seq2seq) {
        for (int i = 0; i < cfg.layers; ++i) add_block("dec", i, true);
        add_ln("dec.lnf");
        m.params_.add("head.out", num::randn(d, V, rng, ws));
    } else {
        m.params_.add("head.out", num::randn(d, 2, rng, ws));
    }

    m.build_editable_view();
    return m;
}

TaskModel TaskModel::from_parts(ModelConfig cfg, Vocabulary vocab, ParamStore params) {
    TaskModel m;
    m.cfg_ = cfg;
    m.vocab_ = std::move(vocab);
    m.params_ = std::move(params);
    m.build_editable_view();
    return m;
}

TaskModel::Binding TaskModel::bind(num::Graph& g, const Binding& overrides,
                                   const std::vector<std::string>& leaves) const {
    Binding b;
    for (const auto& name : params_.names()) {
        auto ov = overrides.find(name);
        if (ov != overrides.end()) {
            b[name] = ov->second;
        } else if (std::find(leaves.begin(), leaves.end(), name) != leaves.end()) {
            b[name] = g.leaf(params_.at(name));
        } else {
            b[name] = g.constant(params_.at(name));
        }
    }
    return b;
}

namespace {

using Graph = num::Graph;
using Id = Graph::Id;

struct Ctx {
    Graph& g;
    const TaskModel::Binding& b;
    const ModelConfig& cfg;

    Id p(const std::string& name) const {
        auto it = b.find(name);
        if (it == b.end()) throw std::out_of_range("unbound parameter: " + name);
        return it->second;
    }
};

Id embed(Ctx& c, const std::vector<int>& ids) {
    if (static_cast<int>(ids.size()) > c.cfg.max_len)
        throw std::runtime_error("sequence longer than max_len (" + std::to_string(ids.size()) + " > " +
                                 std::to_string(c.cfg.max_len) + ")");
    std::vector<int> pos(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<int>(i);
    return c.g.add(c.g.gather_rows(c.p("embed.tok"), ids), c.g.gather_rows(c.p("embed.pos"), pos));
}

Id attention(Ctx& c, Id q_in, Id kv_in, const std::string& prefix, bool causal) {
    Graph& g = c.g;
    Id q = g.matmul(q_in, c.p(prefix + ".wq"));
    Id k = g.matmul(kv_in, c.p(prefix + ".wk"));
    Id v = g.matmul(kv_in, c.p(prefix + ".wv"));
    Id scores = g.scale(g.matmul(q, g.transpose(k)), 1.0 / std::sqrt(static_cast<double>(c.cfg.width)));
    if (causal) {
        const num::Mat& s = g.value(scores);
        num::Mat mask(s.rows(), s.cols());
        for (int i = 0; i < s.rows(); ++i)
            for (int j = 0; j < s.cols(); ++j)
                if (j > i) mask.at(i, j) = -1e30;
        scores = g.add(scores, g.constant(std::move(mask)));
    }
    Id probs = g.softmax_rows(scores);
    return g.matmul(g.matmul(probs, v), c.p(prefix + ".wo"));
}

Id ln(Ctx& c, Id x, const std::string& prefix) {
    return c.g.layer_norm(x, c.p(prefix + ".g"), c.p(prefix + ".b"), kLnEps);
}

Id ffn(Ctx& c, Id x, const std::string& prefix) {
    return c.g.matmul(c.g.relu(c.g.matmul(x, c.p(prefix + ".w1"))), c.p(prefix + ".w2"));
}

Id encoder_stack(Ctx& c, const std::vector<int>& ids) {
    Id x = embed(c, ids);
    for (int i = 0; i < c.cfg.layers; ++i) {
        std::string li = "enc." + std::to_string(i);
        Id a = ln(c, x, li + ".ln1");
        x = c.g.add(x, attention(c, a, a, li + ".attn", false));
        Id f = ln(c, x, li + ".ln2");
        x = c.g.add(x, ffn(c, f, li + ".ffn"));
    }
    return ln(c, x, "enc.lnf");
}

Id decoder_stack(Ctx& c, Id enc_out, const std::vector<int>& dec_ids) {
    Id y = embed(c, dec_ids);
    for (int i = 0; i < c.cfg.layers; ++i) {
        std::string li = "dec." + std::to_string(i);
        Id a = ln(c, y, li + ".ln1");
        y = c.g.add(y, attention(c, a, a, li + ".self", true));
        Id q = ln(c, y, li + ".ln2");
        y = c.g.add(y, attention(c, q, enc_out, li + ".cross", false));
        Id f = ln(c, y, li + ".ln3");
        y = c.g.add(y, ffn(c, f, li + ".ffn"));
    }
    return ln(c, y, "dec.lnf");
}

}  // namespace

num::Graph::Id TaskModel::logits_on_graph(num::Graph& g, const Binding& b, const std::vector<int>& input_ids,
                                          const std::vector<int>& decoder_input_ids) const {
    Ctx c{g, b, cfg_};
    if (cfg_.task == data::Task::binary) {
        std::vector<int> ids;
        ids.push_back(Vocabulary::kCls);
        ids.insert(ids.end(), input_ids.begin(), input_ids.end());
        Id enc = encoder_stack(c, ids);
        Id cls = g.slice_rows(enc, 0, 1);
        return g.matmul(cls, c.p("head.out"));
    }
    if (decoder_input_ids.empty()) throw std::invalid_argument("seq2seq logits need decoder input ids");
    Id enc = encoder_stack(c, input_ids);
    Id dec = decoder_stack(c, enc, decoder_input_ids);
    return g.matmul(dec, c.p("head.out"));
}

std::vector<int> TaskModel::encode_label(const std::string& label) const {
    std::vector<int> ids = vocab_.encode(label);
    ids.push_back(Vocabulary::kEos);
    return ids;
}

num::Graph::Id TaskModel::loss_on_graph(num::Graph& g, const Binding& b, const std::string& input,
                                        const std::string& target) const {
    std::vector<int> input_ids = vocab_.encode(input);
    if (cfg_.task == data::Task::binary) {
        int cls;
        if (target == "True")
            cls = kClassTrue;
        else if (target == "False")
            cls = kClassFalse;
        else
            throw std::invalid_argument("binary target must be True or False, got '" + target + "'");
        Id logits = logits_on_graph(g, b, input_ids);
        return g.cross_entropy_logits(logits, {cls});
    }
    std::vector<int> target_ids = encode_label(target);  // tokens + EOS
    std::vector<int> dec_in;
    dec_in.push_back(Vocabulary::kBos);
    dec_in.insert(dec_in.end(), target_ids.begin(), target_ids.end() - 1);
    Id logits = logits_on_graph(g, b, input_ids, dec_in);
    return g.cross_entropy_logits(logits, target_ids);
}

num::Graph::Id TaskModel::distribution_logits_on_graph(num::Graph& g, const Binding& b, const std::string& input,
                                                       const std::string& forced_label) const {
    std::vector<int> input_ids = vocab_.encode(input);
    if (cfg_.task == data::Task::binary) return logits_on_graph(g, b, input_ids);
    std::vector<int> forced = encode_label(forced_label);
    std::vector<int> dec_in;
    dec_in.push_back(Vocabulary::kBos);
    dec_in.insert(dec_in.end(), forced.begin(), forced.end() - 1);
    return logits_on_graph(g, b, input_ids, dec_in);
}

num::Mat TaskModel::output_distribution(const std::string& input, const std::string& forced_label) const {
    num::Graph g;
    Binding b = bind(g);
    Id logits = distribution_logits_on_graph(g, b, input, forced_label);
    return g.value(g.softmax_rows(logits));
}

Prediction TaskModel::predict(const std::string& input) const {
    std::vector<int> input_ids = vocab_.encode(input);
    if (cfg_.task == data::Task::binary) {
        num::Graph g;
        Binding b = bind(g);
        Id probs = g.softmax_rows(logits_on_graph(g, b, input_ids));
        const num::Mat& p = g.value(probs);
        Prediction out;
        out.scores = {{p.at(0, kClassTrue), p.at(0, kClassFalse)}};
        out.label = p.at(0, kClassTrue) >= p.at(0, kClassFalse) ? "True" : "False";
        return out;
    }

    // beam search over the decoder; ties broken by lexicographic token order
    struct Beam {
        std::vector<int> tokens;  // emitted ids (no BOS)
        double logprob = 0.0;
        bool done = false;
    };
    auto beam_less = [this](const Beam& a, const Beam& b) {
        if (a.logprob != b.logprob) return a.logprob > b.logprob;
        return vocab_.decode(a.tokens) < vocab_.decode(b.tokens);
    };

    num::Graph enc_graph;
    Binding enc_b = bind(enc_graph);
    Ctx enc_ctx{enc_graph, enc_b, cfg_};
    Id enc_node = encoder_stack(enc_ctx, input_ids);
    num::Mat enc_out = enc_graph.value(enc_node);

    std::vector<Beam> beams{Beam{}};
    const int width = std::max(1, cfg_.beam_width);
    for (int step = 0; step < cfg_.max_decode_len; ++step) {
        std::vector<Beam> next;
        bool all_done = true;
        for (const Beam& bm : beams) {
            if (bm.done) {
                next.push_back(bm);
                continue;
            }
            all_done = false;
            std::vector<int> dec_in;
            dec_in.push_back(Vocabulary::kBos);
            dec_in.insert(dec_in.end(), bm.tokens.begin(), bm.tokens.end());

            num::Graph g;
            Binding b = bind(g);
            Ctx c{g, b, cfg_};
            Id enc_const = g.constant(enc_out);
            Id dec = decoder_stack(c, enc_const, dec_in);
            Id logits = g.matmul(g.slice_rows(dec, static_cast<int>(dec_in.size()) - 1, 1), b.at("head.out"));
            const num::Mat& pr = g.value(g.softmax_rows(logits));
            for (int v = 0; v < pr.cols(); ++v) {
                if (v == Vocabulary::kPad || v == Vocabulary::kBos || v == Vocabulary::kCls ||
                    v == Vocabulary::kSep)
                    continue;
                Beam nb = bm;
                nb.logprob += std::log(std::max(pr.at(0, v), 1e-300));
                if (v == Vocabulary::kEos) {
                    nb.done = true;
                } else {
                    nb.tokens.push_back(v);
                }
                next.push_back(std::move(nb));
            }
        }
        std::sort(next.begin(), next.end(), beam_less);
        if (static_cast<int>(next.size()) > width) next.resize(width);
        beams = std::move(next);
        if (all_done) break;
    }
    std::sort(beams.begin(), beams.end(), beam_less);

    Prediction out;
    out.label = vocab_.decode(beams.front().tokens);
    for (const Beam& bm : beams) out.beam.push_back(vocab_.decode(bm.tokens));
    // per-position distributions of the winning sequence under forcing
    num::Mat dist = output_distribution(input, out.label);
    out.scores.resize(dist.rows());
    for (int r = 0; r < dist.rows(); ++r) {
        out.scores[r].resize(dist.cols());
        for (int c2 = 0; c2 < dist.cols(); ++c2) out.scores[r][c2] = dist.at(r, c2);
    }
    return out;
}

bool TaskModel::predicts_gold(const data::BeliefRecord& record) const {
    return record.label_is_gold(predict(record.main_input).label);
}

TaskModel::LossAndGrads TaskModel::loss_and_gradients(const std::string& input, const std::string& target) const {
    num::Graph g;
    Binding b = bind(g, {}, editable_.names());
    Id loss = loss_on_graph(g, b, input, target);
    g.backward(loss);
    LossAndGrads out;
    out.loss = g.value(loss).item();
    if (!std::isfinite(out.loss)) throw std::runtime_error("non-finite task loss");
    for (const auto& e : editable_.entries) {
        const num::Mat& grad = g.grad(b.at(e.name));
        out.grads[e.name] = grad.empty() ? num::Mat::zeros(e.rows, e.cols) : grad;
    }
    return out;
}

TaskModel::LossAndGrads TaskModel::loss_and_gradients_all(const std::string& input, const std::string& target) const {
    num::Graph g;
    std::vector<std::string> all_names = params_.names();
    Binding b = bind(g, {}, all_names);
    Id loss = loss_on_graph(g, b, input, target);
    g.backward(loss);
    LossAndGrads out;
    out.loss = g.value(loss).item();
    if (!std::isfinite(out.loss)) throw std::runtime_error("non-finite task loss");
    for (const auto& name : all_names) {
        const num::Mat& grad = g.grad(b.at(name));
        const num::Mat& w = params_.at(name);
        out.grads[name] = grad.empty() ? num::Mat::zeros(w.rows(), w.cols()) : grad;
    }
    return out;
}

double TaskModel::loss_value(const std::string& input, const std::string& target) const {
    num::Graph g;
    Binding b = bind(g);
    return g.value(loss_on_graph(g, b, input, target)).item();
}

double store_accuracy(const TaskModel& model, const data::BeliefStore& store) {
    if (store.empty()) return 0.0;
    int correct = 0;
    for (const auto& r : store.records)
        if (model.predicts_gold(r)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(store.size());
}

TrainTaskResult train_task_model(const data::BeliefStore& train, const data::BeliefStore& dev, ModelConfig cfg,
                                 const TrainTaskConfig& tcfg, std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("train_task_model: empty train store");
    if (dev.empty()) throw std::invalid_argument("train_task_model: empty dev store");

    Vocabulary vocab = Vocabulary::build({&train, &dev});
    TaskModel model = TaskModel::init(cfg, vocab, seed);
    num::Optimizer opt(num::OptimizerKind::AdamW, tcfg.lr, tcfg.weight_decay);
    num::Rng rng(seed ^ 0x9e3779b97f4a7c15ull);

    TrainTaskResult result;
    result.best_dev_accuracy = -1.0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        num::shuffle_vec(order, rng);
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            std::size_t end = std::min(order.size(), start + tcfg.batch_size);
            GradMap acc;
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const auto& rec = train.records[order[k]];
                auto lg = model.loss_and_gradients_all(rec.main_input, rec.gold_labels.front());
                batch_loss += lg.loss;
                for (auto& [name, gmat] : lg.grads) {
                    auto it = acc.find(name);
                    if (it == acc.end())
                        acc.emplace(name, std::move(gmat));
                    else
                        it->second.add_inplace(gmat);
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& [name, gmat] : acc) {
                (void)name;
                for (std::size_t i = 0; i < gmat.size(); ++i) gmat[i] *= inv;
            }
            batch_loss *= inv;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train_task_model: non-finite loss at epoch " + std::to_string(epoch));
            opt.step(model.params(), acc);
        }
        double acc_dev = store_accuracy(model, dev);
        result.dev_accuracy_per_epoch.push_back(acc_dev);
        if (acc_dev > result.best_dev_accuracy) {
            result.best_dev_accuracy = acc_dev;
            result.best_epoch = epoch;
            result.model = model.clone();
        }
    }
    return result;
}

}  // namespace beliefbench::model
