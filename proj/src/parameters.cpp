#include "dnahnet/parameters.hpp"

#include "dnahnet/errors.hpp"

namespace dnahnet::ad {

Tensor ParameterSet::add(std::string name, Tensor value, double lr_multiplier, bool weight_decay) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name " + name);
    if (!(lr_multiplier > 0.0)) throw ConfigError("parameter " + name + " needs a positive lr multiplier");
    value.node()->requires_grad = true;
    index_.emplace(name, items_.size());
    items_.push_back(Parameter{std::move(name), value, lr_multiplier, weight_decay});
    return value;
}

const Parameter& ParameterSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return items_[it->second];
}

Parameter& ParameterSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return items_[it->second];
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.tensor.size();
    return n;
}

void ParameterSet::zero_grads() {
    for (auto& p : items_) p.tensor.zero_grad();
}

}  // namespace dnahnet::ad
