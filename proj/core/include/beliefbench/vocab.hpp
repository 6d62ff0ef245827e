#pragma once

#include <map>
#include <string>
#include <vector>

#include "beliefbench/data.hpp"

namespace beliefbench::model {

// Closed whitespace-token vocabulary built from belief stores. The id layout
// is deterministic: specials first, then every corpus token sorted.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kSep = 3;
    static constexpr int kCls = 4;
    static constexpr int kNumSpecials = 5;

    Vocabulary() = default;

    static Vocabulary build(const std::vector<const data::BeliefStore*>& stores);
    static Vocabulary from_tokens(std::vector<std::string> corpus_tokens);  // checkpoint restore

    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    int id(const std::string& token) const;        // throws on unknown token
    bool contains(const std::string& token) const;
    const std::string& token(int id) const;

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;  // skips specials

    static std::vector<std::string> split_tokens(const std::string& text);

private:
    std::vector<std::string> id_to_token_;
    std::map<std::string, int> token_to_id_;
};

}  // namespace beliefbench::model
