#include "beliefbench/params.hpp"

#include <algorithm>
#include <stdexcept>

namespace beliefbench::model {

bool ParameterView::contains(const std::string& name) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const ParameterViewEntry& e) { return e.name == name; });
}

const ParameterViewEntry& ParameterView::entry(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw std::out_of_range("ParameterView: no entry named '" + name + "'");
}

std::vector<std::string> ParameterView::names() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.name);
    return out;
}

bool ParameterView::operator==(const ParameterView& o) const {
    if (entries.size() != o.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].name != o.entries[i].name || entries[i].rows != o.entries[i].rows ||
            entries[i].cols != o.entries[i].cols)
            return false;
    }
    return true;
}

num::Mat& ParamStore::add(const std::string& name, num::Mat m) {
    auto [it, inserted] = by_name_.emplace(name, std::move(m));
    if (!inserted) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    order_.push_back(name);
    return it->second;
}

num::Mat& ParamStore::at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return it->second;
}

const num::Mat& ParamStore::at(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return it->second;
}

bool ParamStore::contains(const std::string& name) const { return by_name_.count(name) > 0; }

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += at(name).size();
    return n;
}

bool ParamStore::bitwise_equal(const ParamStore& o) const {
    if (order_ != o.order_) return false;
    for (const auto& name : order_)
        if (!at(name).bitwise_equal(o.at(name))) return false;
    return true;
}

}  // namespace beliefbench::model
