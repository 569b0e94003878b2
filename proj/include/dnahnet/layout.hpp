#pragma once

// Architecture layout strings, e.g. ["m4", ["T1m4", ["T7"], "m4T1"], "m4"].
//
// A stack string is a run list like "T1m4" (m = recurrent mixer, T =
// attention). A one-element list is a plain stack; a three-element list is a
// stage (encoder stack, inner, decoder stack) whose inner is a nested list or
// a bare stack string.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dnahnet::model {

enum class LayerKind { mixer, attention };

struct StackSpec {
    std::vector<std::pair<LayerKind, std::size_t>> runs;

    // Layer kinds in execution order.
    std::vector<LayerKind> layers() const;
    std::size_t size() const;
    std::size_t count(LayerKind kind) const;
    std::string text() const;
    bool operator==(const StackSpec&) const = default;
};

struct LayoutNode {
    bool is_stage = false;
    StackSpec stack;  // leaf only
    StackSpec encoder;
    StackSpec decoder;
    std::shared_ptr<const LayoutNode> inner;

    // Number of stages from this node down.
    std::size_t depth() const;
    const StackSpec& innermost() const;
    bool operator==(const LayoutNode& other) const;
};

LayoutNode parse_layout(std::string_view text);
std::string print_layout(const LayoutNode& node);
StackSpec parse_stack(std::string_view text, std::size_t offset = 0);

}  // namespace dnahnet::model
