#pragma once

#include <map>
#include <string>
#include <vector>

#include "beliefbench/mat.hpp"

namespace beliefbench::model {

using GradMap = std::map<std::string, num::Mat>;

struct ParameterViewEntry {
    std::string name;
    int rows = 0;
    int cols = 0;
};

// Named, shape-annotated enumeration of the editable weight matrices.
// Order is the architecture's construction order and is stable across runs.
struct ParameterView {
    std::vector<ParameterViewEntry> entries;

    bool contains(const std::string& name) const;
    const ParameterViewEntry& entry(const std::string& name) const;
    std::vector<std::string> names() const;
    bool operator==(const ParameterView& o) const;
};

// Ordered name -> matrix collection. Insertion order is preserved and is the
// canonical serialization order.
class ParamStore {
public:
    num::Mat& add(const std::string& name, num::Mat m);
    num::Mat& at(const std::string& name);
    const num::Mat& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    const std::vector<std::string>& names() const { return order_; }
    std::size_t size() const { return order_.size(); }

    std::size_t total_values() const;
    bool bitwise_equal(const ParamStore& o) const;

private:
    std::vector<std::string> order_;
    std::map<std::string, num::Mat> by_name_;
};

}  // namespace beliefbench::model
