#include "beliefbench/vocab.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace beliefbench::model {

std::vector<std::string> Vocabulary::split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

Vocabulary Vocabulary::build(const std::vector<const data::BeliefStore*>& stores) {
    std::set<std::string> corpus;
    auto absorb = [&corpus](const std::string& text) {
        for (auto& t : split_tokens(text)) corpus.insert(t);
    };
    for (const auto* store : stores) {
        for (const auto& l : store->label_vocabulary) absorb(l);
        for (const auto& r : store->records) {
            absorb(r.main_input);
            for (const auto& g : r.gold_labels) absorb(g);
            for (const auto& p : r.paraphrases) absorb(p);
            for (const auto& e : r.entailed) {
                absorb(e.input);
                absorb(e.label);
            }
            for (const auto& ln : r.local_neutral) {
                absorb(ln.input);
                for (const auto& g : ln.gold_labels) absorb(g);
            }
        }
    }
    return from_tokens({corpus.begin(), corpus.end()});
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> corpus_tokens) {
    Vocabulary v;
    v.id_to_token_ = {"<pad>", "<bos>", "<eos>", "<sep>", "<cls>"};
    for (auto& t : corpus_tokens) v.id_to_token_.push_back(std::move(t));
    if (v.id_to_token_.size() > 512)
        throw std::runtime_error("vocabulary exceeds the closed 512-token budget (" +
                                 std::to_string(v.id_to_token_.size()) + ")");
    for (int i = 0; i < static_cast<int>(v.id_to_token_.size()); ++i) {
        if (!v.token_to_id_.emplace(v.id_to_token_[i], i).second)
            throw std::runtime_error("duplicate vocabulary token: " + v.id_to_token_[i]);
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) throw std::runtime_error("unknown token: '" + token + "'");
    return it->second;
}

bool Vocabulary::contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
    return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
    std::vector<int> out;
    for (const auto& t : split_tokens(text)) out.push_back(id(t));
    return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int i : ids) {
        if (i < kNumSpecials) continue;
        if (!out.empty()) out += ' ';
        out += token(i);
    }
    return out;
}

}  // namespace beliefbench::model
