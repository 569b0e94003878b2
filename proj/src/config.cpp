#include "dnahnet/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "dnahnet/errors.hpp"
#include "dnahnet/seqdata.hpp"

namespace dnahnet {

namespace pt = boost::property_tree;

std::string_view confidence_name(Confidence c) {
    switch (c) {
        case Confidence::ste: return "ste";
        case Confidence::relaxed: return "relaxed";
        case Confidence::off: return "off";
    }
    return "?";
}

model::LayoutNode ModelConfig::tree() const {
    try {
        return model::parse_layout(layout);
    } catch (const LayoutError& e) {
        throw ConfigError(std::string("layout: ") + e.what());
    }
}

void ModelConfig::validate() const {
    const auto node = tree();
    const std::size_t depth = node.depth();
    if (levels.size() != depth + 1) {
        throw ConfigError("layout has " + std::to_string(depth) + " stage(s) and needs " + std::to_string(depth + 1) +
                          " level entries, got " + std::to_string(levels.size()));
    }
    if (targets.size() != depth) {
        throw ConfigError("layout has " + std::to_string(depth) + " stage(s) but " + std::to_string(targets.size()) +
                          " compression target(s)");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& l = levels[i];
        const std::string where = "level " + std::to_string(i) + ": ";
        if (l.dim == 0 || l.heads == 0) throw ConfigError(where + "dims and heads must be positive");
        if (l.dim % l.heads != 0) throw ConfigError(where + "heads must divide dim");
        if ((l.dim / l.heads) % 2 != 0) throw ConfigError(where + "head width must be even for rotary encoding");
        if (!(l.lr_multiplier > 0)) throw ConfigError(where + "lr multiplier must be positive");
    }
    for (double r : targets) {
        if (!(r >= 1.0)) throw ConfigError("compression targets must be >= 1");
    }
    if (!(alpha >= 0)) throw ConfigError("alpha must be >= 0");
    if (state_dim == 0 || conv_width == 0 || context == 0) throw ConfigError("state_dim, conv_width, context must be positive");
    if (!(init_std > 0)) throw ConfigError("init_std must be positive");
}

void TrainConfig::validate() const {
    if (!(base_lr > 0)) throw ConfigError("base_lr must be positive");
    if (max_steps == 0) throw ConfigError("max_steps must be positive");
    if (warmup_steps >= max_steps) throw ConfigError("warmup_steps must be below max_steps");
    if (batch_size == 0 || grad_accum == 0) throw ConfigError("batch_size and grad_accum must be positive");
    if (!(grad_clip > 0)) throw ConfigError("grad_clip must be positive");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must lie in [0, 1)");
    if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
    if (log_every == 0) throw ConfigError("log_every must be positive");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(std::string_view(s).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const std::string t = trim(text);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
}

template <typename T>
std::vector<T> parse_numbers(const std::string& key, const std::string& text) {
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
    return out;
}

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<T>) {
            s += num(xs[i]);
        } else {
            s += std::to_string(xs[i]);
        }
    }
    return s;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

struct Key {
    Setter set;
    std::function<std::string(const RunConfig&)> get;
};

struct LevelLists {
    std::vector<std::size_t> dims, heads, ffn;
    std::vector<double> mult;
};

#define DNAHNET_NUM(sec, field, type)                                                              \
    {#field,                                                                                       \
     {[](RunConfig& c, const std::string& v) { c.sec.field = parse_number<type>(#field, v); },     \
      [](const RunConfig& c) {                                                                     \
          if constexpr (std::is_floating_point_v<type>) return num(c.sec.field);                   \
          else return std::to_string(c.sec.field);                                                 \
      }}}
#define DNAHNET_STR(sec, field) \
    {#field, {[](RunConfig& c, const std::string& v) { c.sec.field = v; }, [](const RunConfig& c) { return c.sec.field; }}}
#define DNAHNET_BOOL(sec, field)                                                             \
    {#field,                                                                                 \
     {[](RunConfig& c, const std::string& v) { c.sec.field = parse_bool(#field, v); },       \
      [](const RunConfig& c) { return std::string(c.sec.field ? "true" : "false"); }}}

const std::map<std::string, Key>& model_keys() {
    static const std::map<std::string, Key> keys = {
        DNAHNET_STR(model, layout),
        {"targets",
         {[](RunConfig& c, const std::string& v) { c.model.targets = parse_numbers<double>("targets", v); },
          [](const RunConfig& c) { return join(c.model.targets); }}},
        DNAHNET_NUM(model, alpha, double),
        DNAHNET_NUM(model, state_dim, std::size_t),
        DNAHNET_NUM(model, conv_width, std::size_t),
        DNAHNET_NUM(model, context, std::size_t),
        {"confidence",
         {[](RunConfig& c, const std::string& v) {
              const auto t = trim(v);
              if (t == "ste") c.model.confidence = Confidence::ste;
              else if (t == "relaxed") c.model.confidence = Confidence::relaxed;
              else if (t == "off") c.model.confidence = Confidence::off;
              else throw ConfigError("key 'confidence': expected ste, relaxed or off, got '" + v + "'");
          },
          [](const RunConfig& c) { return std::string(confidence_name(c.model.confidence)); }}},
        DNAHNET_BOOL(model, encoder_residual),
        DNAHNET_NUM(model, init_std, double),
        DNAHNET_NUM(model, init_seed, std::uint64_t),
    };
    return keys;
}

const std::map<std::string, Key>& train_keys() {
    static const std::map<std::string, Key> keys = {
        DNAHNET_NUM(train, base_lr, double),      DNAHNET_NUM(train, weight_decay, double),
        DNAHNET_NUM(train, grad_clip, double),    DNAHNET_NUM(train, beta1, double),
        DNAHNET_NUM(train, beta2, double),        DNAHNET_NUM(train, adam_eps, double),
        DNAHNET_NUM(train, warmup_steps, std::size_t), DNAHNET_NUM(train, max_steps, std::size_t),
        DNAHNET_NUM(train, batch_size, std::size_t),   DNAHNET_NUM(train, grad_accum, std::size_t),
        DNAHNET_NUM(train, log_every, std::size_t),    DNAHNET_NUM(train, checkpoint_every, std::size_t),
        DNAHNET_NUM(train, seed, std::uint64_t),
    };
    return keys;
}

const std::map<std::string, Key>& data_keys() {
    static const std::map<std::string, Key> keys = {
        DNAHNET_STR(data, train_fasta),
        DNAHNET_STR(data, eval_fasta),
        DNAHNET_NUM(data, window, std::size_t),
        DNAHNET_BOOL(data, randomize_ambiguous),
        DNAHNET_NUM(data, synth_sequences, std::size_t),
        DNAHNET_NUM(data, synth_length, std::size_t),
        DNAHNET_NUM(data, synth_seed, std::uint64_t),
        DNAHNET_STR(data, checkpoint),
        DNAHNET_STR(data, metrics),
    };
    return keys;
}

#undef DNAHNET_NUM
#undef DNAHNET_STR
#undef DNAHNET_BOOL

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view source) {
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(std::string(source), e.line(), e.message());
    }

    RunConfig cfg;
    LevelLists lists;
    bool levels_given = false;
    const std::string src(source);
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError(src + ": key '" + section + "' outside any section");
        const std::map<std::string, Key>* keys = nullptr;
        if (section == "model") keys = &model_keys();
        else if (section == "train") keys = &train_keys();
        else if (section == "data") keys = &data_keys();
        else throw ConfigError(src + ": unknown section [" + section + "]");

        for (const auto& [key, value] : body) {
            const std::string v = value.data();
            if (section == "model" && key == "dims") {
                lists.dims = parse_numbers<std::size_t>(key, v);
                levels_given = true;
            } else if (section == "model" && key == "heads") {
                lists.heads = parse_numbers<std::size_t>(key, v);
                levels_given = true;
            } else if (section == "model" && key == "ffn") {
                lists.ffn = parse_numbers<std::size_t>(key, v);
                levels_given = true;
            } else if (section == "model" && key == "lr_multipliers") {
                lists.mult = parse_numbers<double>(key, v);
                levels_given = true;
            } else {
                auto it = keys->find(key);
                if (it == keys->end()) throw ConfigError(src + ": unknown key '" + key + "' in [" + section + "]");
                try {
                    it->second.set(cfg, v);
                } catch (const ConfigError& e) {
                    throw ConfigError(src + ": [" + section + "] " + e.what());
                }
            }
        }
    }
    if (levels_given) {
        const std::size_t n = lists.dims.size();
        if (lists.heads.size() != n || lists.ffn.size() != n || lists.mult.size() != n) {
            throw ConfigError(src + ": dims, heads, ffn and lr_multipliers must all be given with equal lengths");
        }
        cfg.model.levels.clear();
        for (std::size_t i = 0; i < n; ++i) {
            cfg.model.levels.push_back({lists.dims[i], lists.heads[i], lists.ffn[i], lists.mult[i]});
        }
    }
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

RunConfig read_config(const std::filesystem::path& path) {
    return parse_config(seq::read_text_file(path), path.string());
}

std::string format_config(const RunConfig& c) {
    std::string out = "[model]\n";
    std::vector<std::size_t> dims, heads, ffn;
    std::vector<double> mult;
    for (const auto& l : c.model.levels) {
        dims.push_back(l.dim);
        heads.push_back(l.heads);
        ffn.push_back(l.ffn);
        mult.push_back(l.lr_multiplier);
    }
    out += "layout = " + c.model.layout + "\n";
    out += "dims = " + join(dims) + "\n";
    out += "heads = " + join(heads) + "\n";
    out += "ffn = " + join(ffn) + "\n";
    out += "lr_multipliers = " + join(mult) + "\n";
    for (const auto& [k, key] : model_keys()) {
        if (k != "layout") out += k + " = " + key.get(c) + "\n";
    }
    out += "\n[train]\n";
    for (const auto& [k, key] : train_keys()) out += k + " = " + key.get(c) + "\n";
    out += "\n[data]\n";
    for (const auto& [k, key] : data_keys()) out += k + " = " + key.get(c) + "\n";
    return out;
}

}  // namespace dnahnet
