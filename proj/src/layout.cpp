#include "dnahnet/layout.hpp"

#include <cctype>

#include "dnahnet/errors.hpp"

namespace dnahnet::model {

std::vector<LayerKind> StackSpec::layers() const {
    std::vector<LayerKind> out;
    for (const auto& [kind, n] : runs) out.insert(out.end(), n, kind);
    return out;
}

std::size_t StackSpec::size() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.second;
    return n;
}

std::size_t StackSpec::count(LayerKind kind) const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.first == kind ? r.second : 0;
    return n;
}

std::string StackSpec::text() const {
    std::string s;
    for (const auto& [kind, n] : runs) s += (kind == LayerKind::mixer ? "m" : "T") + std::to_string(n);
    return s;
}

std::size_t LayoutNode::depth() const { return is_stage ? 1 + inner->depth() : 0; }

const StackSpec& LayoutNode::innermost() const { return is_stage ? inner->innermost() : stack; }

bool LayoutNode::operator==(const LayoutNode& other) const {
    if (is_stage != other.is_stage) return false;
    if (!is_stage) return stack == other.stack;
    return encoder == other.encoder && decoder == other.decoder && *inner == *other.inner;
}

StackSpec parse_stack(std::string_view text, std::size_t offset) {
    StackSpec spec;
    std::size_t i = 0;
    if (text.empty()) throw LayoutError(offset, "empty stack string");
    while (i < text.size()) {
        const char c = text[i];
        if (c != 'm' && c != 'T') throw LayoutError(offset + i, std::string("unknown layer kind '") + c + "'");
        std::size_t j = i + 1;
        std::size_t n = 0;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
            n = n * 10 + static_cast<std::size_t>(text[j] - '0');
            if (n > 100000) throw LayoutError(offset + j, "layer count too large");
            ++j;
        }
        if (j == i + 1) throw LayoutError(offset + j, "missing layer count");
        if (n == 0) throw LayoutError(offset + i + 1, "layer count must be positive");
        const auto kind = c == 'm' ? LayerKind::mixer : LayerKind::attention;
        if (!spec.runs.empty() && spec.runs.back().first == kind) {
            spec.runs.back().second += n;  // "m2m2" is "m4"
        } else {
            spec.runs.emplace_back(kind, n);
        }
        i = j;
    }
    return spec;
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    LayoutNode parse() {
        skip();
        auto node = list();
        skip();
        if (pos_ != s_.size()) throw LayoutError(pos_, "trailing characters after layout");
        return node;
    }

private:
    struct Item {
        bool is_list;
        std::size_t offset;
        StackSpec stack;
        LayoutNode node;
    };

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    void expect(char c) {
        skip();
        if (pos_ >= s_.size()) throw LayoutError(pos_, std::string("unbalanced: expected '") + c + "' before end");
        if (s_[pos_] != c) throw LayoutError(pos_, std::string("expected '") + c + "'");
        ++pos_;
    }

    Item item() {
        skip();
        if (pos_ >= s_.size()) throw LayoutError(pos_, "unbalanced: unexpected end of layout");
        Item it{false, pos_, {}, {}};
        if (s_[pos_] == '[') {
            it.is_list = true;
            it.node = list();
        } else if (s_[pos_] == '"') {
            const std::size_t open = pos_++;
            const std::size_t close = s_.find('"', pos_);
            if (close == std::string_view::npos) throw LayoutError(open, "unterminated string");
            it.stack = parse_stack(s_.substr(pos_, close - pos_), pos_);
            pos_ = close + 1;
        } else {
            throw LayoutError(pos_, std::string("unexpected character '") + s_[pos_] + "'");
        }
        return it;
    }

    LayoutNode list() {
        const std::size_t open = pos_;
        expect('[');
        std::vector<Item> items;
        skip();
        if (pos_ < s_.size() && s_[pos_] == ']') throw LayoutError(pos_, "empty list");
        while (true) {
            items.push_back(item());
            skip();
            if (pos_ >= s_.size()) throw LayoutError(pos_, "unbalanced: missing ']'");
            if (s_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (s_[pos_] == ']') {
                ++pos_;
                break;
            }
            throw LayoutError(pos_, "expected ',' or ']'");
        }

        LayoutNode node;
        if (items.size() == 1) {
            if (items[0].is_list) return items[0].node;
            node.stack = std::move(items[0].stack);
            return node;
        }
        if (items.size() != 3) {
            throw LayoutError(open, "a list must hold 1 element (stack) or 3 (encoder, inner, decoder), got " +
                                        std::to_string(items.size()));
        }
        if (items[0].is_list) throw LayoutError(items[0].offset, "encoder must be a stack string");
        if (items[2].is_list) throw LayoutError(items[2].offset, "decoder must be a stack string");
        node.is_stage = true;
        node.encoder = std::move(items[0].stack);
        node.decoder = std::move(items[2].stack);
        if (items[1].is_list) {
            node.inner = std::make_shared<const LayoutNode>(std::move(items[1].node));
        } else {
            LayoutNode leaf;
            leaf.stack = std::move(items[1].stack);
            node.inner = std::make_shared<const LayoutNode>(std::move(leaf));
        }
        return node;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

std::string print_node(const LayoutNode& node) {
    if (!node.is_stage) return "[\"" + node.stack.text() + "\"]";
    return "[\"" + node.encoder.text() + "\", " + print_node(*node.inner) + ", \"" + node.decoder.text() + "\"]";
}

}  // namespace

LayoutNode parse_layout(std::string_view text) { return Parser(text).parse(); }

std::string print_layout(const LayoutNode& node) { return print_node(node); }

}  // namespace dnahnet::model
