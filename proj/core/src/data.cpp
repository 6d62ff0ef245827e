#include "beliefbench/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace beliefbench::data {

using json = nlohmann::ordered_json;

std::string to_string(Task t) { return t == Task::binary ? "binary" : "seq2seq"; }

Task task_from_string(const std::string& s) {
    if (s == "binary") return Task::binary;
    if (s == "seq2seq") return Task::seq2seq;
    throw std::invalid_argument("unknown task: " + s);
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        default: return "test";
    }
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split: " + s);
}

std::string to_string(LabelPolicy p) { return p == LabelPolicy::hard ? "hard" : "beam"; }

LabelPolicy label_policy_from_string(const std::string& s) {
    if (s == "hard") return LabelPolicy::hard;
    if (s == "beam") return LabelPolicy::beam;
    throw std::invalid_argument("unknown label policy: " + s);
}

bool BeliefRecord::label_is_gold(const std::string& label) const {
    return std::find(gold_labels.begin(), gold_labels.end(), label) != gold_labels.end();
}

void BeliefStore::rebuild_label_vocabulary() {
    std::set<std::string> vocab;
    for (const auto& r : records)
        for (const auto& l : r.gold_labels) vocab.insert(l);
    bool any_binary = std::any_of(records.begin(), records.end(),
                                  [](const BeliefRecord& r) { return r.task == Task::binary; });
    if (any_binary) {
        vocab.insert("True");
        vocab.insert("False");
    }
    label_vocabulary.assign(vocab.begin(), vocab.end());
}

void BeliefStore::validate() const {
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (r.id.empty()) throw std::runtime_error("store validation: record with empty id");
        if (!seen.insert(r.id).second) throw std::runtime_error("store validation: duplicate id '" + r.id + "'");
        if (r.gold_labels.empty())
            throw std::runtime_error("store validation: record '" + r.id + "' has empty gold_labels");
        if (r.task == Task::binary) {
            if (r.gold_labels.size() != 1 || (r.gold_labels[0] != "True" && r.gold_labels[0] != "False"))
                throw std::runtime_error("store validation: binary record '" + r.id +
                                         "' must have a single True/False gold label");
        }
    }
}

namespace {

json entailed_to_json(const EntailedItem& e) {
    return json{{"input", e.input}, {"label", e.label}, {"holds_only_if_main_true", e.holds_only_if_main_true}};
}

json record_to_json(const BeliefRecord& r) {
    json j;
    j["id"] = r.id;
    j["task"] = to_string(r.task);
    j["main_input"] = r.main_input;
    j["gold_labels"] = r.gold_labels;
    j["paraphrases"] = r.paraphrases;
    json ent = json::array();
    for (const auto& e : r.entailed) ent.push_back(entailed_to_json(e));
    j["entailed"] = ent;
    json ln = json::array();
    for (const auto& l : r.local_neutral) ln.push_back(json{{"input", l.input}, {"gold_labels", l.gold_labels}});
    j["local_neutral"] = ln;
    return j;
}

template <class T>
T require_field(const json& j, const char* field, int line_no) {
    if (!j.contains(field))
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": missing field '" + field +
                                 "'");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad field '" + field +
                                 "': " + e.what());
    }
}

BeliefRecord record_from_json(const json& j, int line_no) {
    BeliefRecord r;
    r.id = require_field<std::string>(j, "id", line_no);
    r.task = task_from_string(require_field<std::string>(j, "task", line_no));
    r.main_input = require_field<std::string>(j, "main_input", line_no);
    r.gold_labels = require_field<std::vector<std::string>>(j, "gold_labels", line_no);
    if (r.gold_labels.empty())
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": empty field 'gold_labels'");
    if (j.contains("paraphrases")) r.paraphrases = j.at("paraphrases").get<std::vector<std::string>>();
    if (j.contains("entailed")) {
        for (const auto& e : j.at("entailed")) {
            EntailedItem item;
            item.input = require_field<std::string>(e, "input", line_no);
            item.label = require_field<std::string>(e, "label", line_no);
            item.holds_only_if_main_true = e.value("holds_only_if_main_true", true);
            r.entailed.push_back(std::move(item));
        }
    }
    if (j.contains("local_neutral")) {
        for (const auto& l : j.at("local_neutral")) {
            LocalNeutralItem item;
            item.input = require_field<std::string>(l, "input", line_no);
            item.gold_labels = require_field<std::vector<std::string>>(l, "gold_labels", line_no);
            r.local_neutral.push_back(std::move(item));
        }
    }
    return r;
}

}  // namespace

BeliefStore load_store(const std::filesystem::path& path, StoreFormat) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open store file: " + path.string());
    BeliefStore store;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("#split:", 0) == 0) {
            store.split = split_from_string(line.substr(7));
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        store.records.push_back(record_from_json(j, line_no));
    }
    store.validate();
    store.rebuild_label_vocabulary();
    return store;
}

void save_store(const BeliefStore& store, const std::filesystem::path& path, StoreFormat) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write store file: " + path.string());
    out << "#split:" << to_string(store.split) << "\n";
    for (const auto& r : store.records) out << record_to_json(r).dump() << "\n";
}

bool stores_equal(const BeliefStore& a, const BeliefStore& b) {
    if (a.split != b.split || a.records.size() != b.records.size() || a.label_vocabulary != b.label_vocabulary)
        return false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto& x = a.records[i];
        const auto& y = b.records[i];
        if (x.id != y.id || x.task != y.task || x.main_input != y.main_input || x.gold_labels != y.gold_labels ||
            x.paraphrases != y.paraphrases)
            return false;
        if (x.entailed.size() != y.entailed.size() || x.local_neutral.size() != y.local_neutral.size()) return false;
        for (std::size_t k = 0; k < x.entailed.size(); ++k) {
            if (x.entailed[k].input != y.entailed[k].input || x.entailed[k].label != y.entailed[k].label ||
                x.entailed[k].holds_only_if_main_true != y.entailed[k].holds_only_if_main_true)
                return false;
        }
        for (std::size_t k = 0; k < x.local_neutral.size(); ++k) {
            if (x.local_neutral[k].input != y.local_neutral[k].input ||
                x.local_neutral[k].gold_labels != y.local_neutral[k].gold_labels)
                return false;
        }
    }
    return true;
}

// ---- synthetic world ----

void SyntheticWorldConfig::validate() const {
    if (relations.empty()) throw std::invalid_argument("synthetic config: relations must be non-empty");
    if (num_paraphrases_per_input < 0)
        throw std::invalid_argument("synthetic config: num_paraphrases_per_input must be >= 0");
    if (num_entities < 1) throw std::invalid_argument("synthetic config: num_entities must be >= 1");
    if (fraction_with_entailment < 0.0 || fraction_with_entailment > 1.0)
        throw std::invalid_argument("synthetic config: fraction_with_entailment must be in [0,1]");
    if (task == Task::seq2seq && relations.size() < 2)
        throw std::invalid_argument("synthetic config: local-neutral pairing needs at least 2 relations");
}

SyntheticWorldConfig SyntheticWorldConfig::defaults(Task task) {
    SyntheticWorldConfig cfg;
    cfg.task = task;
    cfg.num_entities = 60;
    cfg.relations = {
        {"born_in", {"birthplace_of"}}, {"works_at", {"employer_of"}},  {"lives_in", {"resident_of"}},
        {"plays_for", {"team_of"}},     {"awarded", {"prize_given"}},
    };
    cfg.num_paraphrases_per_input = 2;
    cfg.fraction_with_entailment = task == Task::binary ? 0.5 : 0.0;
    cfg.entity_aliases = 2;
    cfg.seed = 13;
    return cfg;
}

namespace {

struct World {
    // type index per entity; answers are a pure function of (type, relation)
    std::vector<int> entity_type;
    int num_types = 0;
    int answer_pool = 0;

    int answer_index(int type, int relation) const { return (type + relation) % answer_pool; }
};

std::string entity_name(int e, int alias) { return alias == 0 ? "e" + std::to_string(e) : "e" + std::to_string(e) + "x" + std::to_string(alias); }

std::string answer_token(int a) { return "ans" + std::to_string(a); }

std::string property_token(int t) { return "prop" + std::to_string(t); }

std::string relation_alias(const RelationSpec& rel, int alias) {
    if (alias == 0 || rel.aliases.empty()) return rel.name;
    return rel.aliases[(alias - 1) % rel.aliases.size()];
}

}  // namespace

SyntheticSplits generate_synthetic_store(const SyntheticWorldConfig& cfg) {
    cfg.validate();
    num::Rng rng(cfg.seed);

    const int R = static_cast<int>(cfg.relations.size());
    World world;
    world.num_types = std::max(3, std::min(6, cfg.num_entities / 8 + 2));
    world.answer_pool = std::max(R, world.num_types) + 2;
    world.entity_type.resize(cfg.num_entities);
    for (int e = 0; e < cfg.num_entities; ++e) world.entity_type[e] = num::pick_index(rng, world.num_types);

    auto make_input = [&](int e, int e_alias, int rel, int r_alias) {
        return entity_name(e, e_alias % (cfg.entity_aliases + 1)) + " " + relation_alias(cfg.relations[rel], r_alias);
    };

    struct PendingRecord {
        BeliefRecord rec;
    };
    std::vector<BeliefRecord> all;

    int next_id = 0;
    auto fresh_id = [&] { return "syn-" + std::to_string(next_id++); };

    if (cfg.task == Task::seq2seq) {
        // paired construction: per entity, two distinct relations that serve
        // as each other's local-neutral partner
        for (int e = 0; e < cfg.num_entities; ++e) {
            int r1 = num::pick_index(rng, R);
            int r2 = (r1 + 1 + num::pick_index(rng, R - 1)) % R;
            const int t = world.entity_type[e];
            for (auto [ra, rb] : {std::pair{r1, r2}, std::pair{r2, r1}}) {
                BeliefRecord rec;
                rec.id = fresh_id();
                rec.task = Task::seq2seq;
                rec.main_input = make_input(e, 0, ra, 0);
                rec.gold_labels = {answer_token(world.answer_index(t, ra))};
                for (int p = 0; p < cfg.num_paraphrases_per_input; ++p)
                    rec.paraphrases.push_back(make_input(e, 1 + num::pick_index(rng, cfg.entity_aliases), ra, 1 + p));
                LocalNeutralItem ln;
                ln.input = make_input(e, 0, rb, 0);
                ln.gold_labels = {answer_token(world.answer_index(t, rb))};
                rec.local_neutral.push_back(std::move(ln));
                all.push_back(std::move(rec));
            }
        }
    } else {
        // binary claims "entity relation answer" with truth decided by the
        // type rule; relation 0 doubles as the type-revealing relation that
        // carries entailment
        for (int e = 0; e < cfg.num_entities; ++e) {
            const int t = world.entity_type[e];
            for (int rel = 0; rel < R; ++rel) {
                bool truthy = num::pick_index(rng, 2) == 0;
                int true_ans = world.answer_index(t, rel);
                int ans = true_ans;
                if (!truthy) {
                    ans = (true_ans + 1 + num::pick_index(rng, world.answer_pool - 1)) % world.answer_pool;
                }
                BeliefRecord rec;
                rec.id = fresh_id();
                rec.task = Task::binary;
                rec.main_input = make_input(e, 0, rel, 0) + " " + answer_token(ans);
                rec.gold_labels = {truthy ? "True" : "False"};
                for (int p = 0; p < cfg.num_paraphrases_per_input; ++p)
                    rec.paraphrases.push_back(make_input(e, 1 + num::pick_index(rng, cfg.entity_aliases), rel, 1 + p) +
                                              " " + answer_token(ans));
                // entailment only off the type-revealing relation, and only
                // when the main claim is true (LeapOfThought pattern)
                if (rel == 0 && truthy && cfg.fraction_with_entailment > 0.0 &&
                    num::uniform01(rng) < cfg.fraction_with_entailment) {
                    bool implied_true = num::pick_index(rng, 2) == 0;
                    EntailedItem ent;
                    int prop = implied_true ? t : (t + 1 + num::pick_index(rng, world.num_types - 1)) % world.num_types;
                    ent.input = entity_name(e, 0) + " hasprop " + property_token(prop);
                    ent.label = implied_true ? "True" : "False";
                    ent.holds_only_if_main_true = true;
                    rec.entailed.push_back(std::move(ent));
                }
                all.push_back(std::move(rec));
            }
        }
    }

    // split by record, deterministic shuffle; every entity appears in train
    // under most of its relations so the dev/test records stay predictable
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    num::shuffle_vec(order, rng);

    SyntheticSplits out;
    out.train.split = Split::train;
    out.dev.split = Split::dev;
    out.test.split = Split::test;
    const std::size_t n = all.size();
    const std::size_t n_dev = std::max<std::size_t>(1, n / 8);
    const std::size_t n_test = std::max<std::size_t>(1, n / 8);
    for (std::size_t i = 0; i < n; ++i) {
        const BeliefRecord& rec = all[order[i]];
        if (i < n_dev)
            out.dev.records.push_back(rec);
        else if (i < n_dev + n_test)
            out.test.records.push_back(rec);
        else
            out.train.records.push_back(rec);
    }
    for (BeliefStore* s : {&out.train, &out.dev, &out.test}) {
        s->rebuild_label_vocabulary();
        s->validate();
    }
    return out;
}

std::string draw_update_label(const BeliefRecord& record, const std::string& current_prediction, LabelPolicy policy,
                              num::Rng& rng, const std::vector<std::string>& label_vocabulary,
                              const std::vector<std::string>* beam_candidates) {
    if (record.task == Task::binary) {
        return current_prediction == "True" ? "False" : "True";
    }
    if (policy == LabelPolicy::beam) {
        if (beam_candidates == nullptr || beam_candidates->empty())
            throw std::invalid_argument("draw_update_label: beam policy requires beam candidates");
        for (const auto& c : *beam_candidates)
            if (c != current_prediction) return c;
        throw std::runtime_error("draw_update_label: no beam candidate differs from the prediction");
    }
    // hard policy
    if (!record.label_is_gold(current_prediction)) return record.gold_labels.front();
    std::vector<std::string> options;
    for (const auto& l : label_vocabulary)
        if (l != current_prediction) options.push_back(l);
    if (options.empty())
        throw std::runtime_error("draw_update_label: label vocabulary has no label distinct from the prediction");
    return options[num::pick_index(rng, static_cast<int>(options.size()))];
}

}  // namespace beliefbench::data
