#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "beliefbench/rng.hpp"

namespace beliefbench::data {

enum class Task { binary, seq2seq };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

// An input whose label is implied by the truth of the owning record's
// main input. holds_only_if_main_true marks one-directional implications:
// main true => entailed has this label, main false => no constraint
// (but entailed wrong => main false, the contrapositive).
struct EntailedItem {
    std::string input;
    std::string label;
    bool holds_only_if_main_true = true;
};

// Same head entity as the main input, logically independent of it.
struct LocalNeutralItem {
    std::string input;
    std::vector<std::string> gold_labels;
};

struct BeliefRecord {
    std::string id;
    Task task = Task::binary;
    std::string main_input;                    // whitespace-separated tokens
    std::vector<std::string> gold_labels;      // non-empty; {True|False} singleton for binary
    std::vector<std::string> paraphrases;
    std::vector<EntailedItem> entailed;
    std::vector<LocalNeutralItem> local_neutral;

    // paraphrase group = main input + paraphrases; groups smaller than 2 are
    // kept but consistency metrics skip them
    bool paraphrase_group_usable() const { return !paraphrases.empty(); }
    bool label_is_gold(const std::string& label) const;
};

enum class Split { train, dev, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct BeliefStore {
    std::vector<BeliefRecord> records;
    Split split = Split::train;
    std::vector<std::string> label_vocabulary;  // sorted unique

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    // recompute label_vocabulary from records (union of gold labels; binary
    // stores always carry both True and False)
    void rebuild_label_vocabulary();
    // throws on duplicate ids or schema violations
    void validate() const;
};

enum class StoreFormat { jsonl };

BeliefStore load_store(const std::filesystem::path& path, StoreFormat format = StoreFormat::jsonl);
void save_store(const BeliefStore& store, const std::filesystem::path& path,
                StoreFormat format = StoreFormat::jsonl);

bool stores_equal(const BeliefStore& a, const BeliefStore& b);

struct RelationSpec {
    std::string name;
    std::vector<std::string> aliases;  // may be empty; name itself is always usable
};

struct SyntheticWorldConfig {
    Task task = Task::seq2seq;
    int num_entities = 100;
    std::vector<RelationSpec> relations;
    int num_paraphrases_per_input = 2;
    double fraction_with_entailment = 0.0;  // binary task only
    int entity_aliases = 2;                 // alias forms per entity beyond the canonical one
    std::uint64_t seed = 0;

    void validate() const;  // throws on bad config
    static SyntheticWorldConfig defaults(Task task);
};

struct SyntheticSplits {
    BeliefStore train;
    BeliefStore dev;
    BeliefStore test;
};

// Pure function of cfg (including seed). Entities carry a latent type that
// determines every answer, so the tasks are learnable on held-out records:
// each entity shows up in train under some relations, and the type->answer
// rule transfers to its dev/test records.
SyntheticSplits generate_synthetic_store(const SyntheticWorldConfig& cfg);

enum class LabelPolicy { hard, beam };

std::string to_string(LabelPolicy p);
LabelPolicy label_policy_from_string(const std::string& s);

// Picks the desired output for one belief update. Binary: always the
// opposite class. Seq2seq hard: gold if the prediction is wrong, else a
// random non-matching label from the vocabulary. Seq2seq beam: a beam
// candidate different from the prediction.
std::string draw_update_label(const BeliefRecord& record, const std::string& current_prediction,
                              LabelPolicy policy, num::Rng& rng,
                              const std::vector<std::string>& label_vocabulary,
                              const std::vector<std::string>* beam_candidates = nullptr);

}  // namespace beliefbench::data
