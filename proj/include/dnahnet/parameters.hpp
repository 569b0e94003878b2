#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "dnahnet/tensor.hpp"

namespace dnahnet::ad {

struct Parameter {
    std::string name;  // dotted path, e.g. stage0.encoder.mixer1.gate
    Tensor tensor;     // requires_grad leaf
    double lr_multiplier = 1.0;
    bool weight_decay = true;
};

// Named parameters in registration order. Names are unique.
class ParameterSet {
public:
    Tensor add(std::string name, Tensor value, double lr_multiplier = 1.0, bool weight_decay = true);

    const Parameter& at(const std::string& name) const;
    Parameter& at(const std::string& name);
    bool contains(const std::string& name) const { return index_.contains(name); }

    std::vector<Parameter>& items() { return items_; }
    const std::vector<Parameter>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    std::size_t scalar_count() const;

    void zero_grads();

private:
    std::vector<Parameter> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dnahnet::ad
