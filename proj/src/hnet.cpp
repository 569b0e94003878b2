#include "dnahnet/hnet.hpp"

#include <cmath>
#include <limits>

#include "dnahnet/errors.hpp"
#include "dnahnet/io.hpp"
#include "dnahnet/ops.hpp"
#include "dnahnet/random.hpp"

namespace dnahnet {

using namespace dnahnet::ad;
using model::LayerShape;
using model::Stack;

namespace {

struct Level {
    std::size_t index = 0;
    bool is_stage = false;
    std::unique_ptr<Stack> main;
    std::unique_ptr<Stack> encoder, decoder;
    Tensor router_wq, router_wk;
    Tensor proj_in, proj_out;  // undefined when the inner width matches
    std::unique_ptr<Level> inner;
    double target = 1.0;
};

LayerShape shape_at(const ModelConfig& c, std::size_t level) {
    const auto& l = c.levels[level];
    return {l.dim, l.heads, l.ffn, c.state_dim, c.conv_width};
}

std::unique_ptr<Level> build_level(const ModelConfig& c, const model::LayoutNode& node, std::size_t index,
                                   ParameterSet& params, Rng& rng) {
    auto lv = std::make_unique<Level>();
    lv->index = index;
    const LayerShape shape = shape_at(c, index);
    const model::Init init{params, rng, c.init_std, c.levels[index].lr_multiplier};
    const std::string prefix = "stage" + std::to_string(index);
    if (!node.is_stage) {
        lv->main = std::make_unique<Stack>(init, prefix + ".main", node.stack, shape);
        return lv;
    }
    lv->is_stage = true;
    lv->target = c.targets[index];
    lv->encoder = std::make_unique<Stack>(init, prefix + ".encoder", node.encoder, shape);
    lv->router_wq = init.weight(prefix + ".router.wq", shape.dim, shape.dim);
    lv->router_wk = init.weight(prefix + ".router.wk", shape.dim, shape.dim);
    const std::size_t inner_dim = c.levels[index + 1].dim;
    if (inner_dim != shape.dim) lv->proj_in = init.weight(prefix + ".proj_in", shape.dim, inner_dim);
    lv->inner = build_level(c, *node.inner, index + 1, params, rng);
    if (inner_dim != shape.dim) lv->proj_out = init.weight(prefix + ".proj_out", inner_dim, shape.dim);
    lv->decoder = std::make_unique<Stack>(init, prefix + ".decoder", node.decoder, shape);
    return lv;
}

}  // namespace

struct HNetModel::Net {
    std::unique_ptr<model::Embedding> embed;
    std::unique_ptr<Level> top;
    std::unique_ptr<model::Head> head;
};

HNetModel::HNetModel(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto tree = config_.tree();
    depth_ = tree.depth();
    Rng rng(config_.init_seed);
    net_ = std::make_unique<Net>();
    const model::Init top{params_, rng, config_.init_std, config_.levels[0].lr_multiplier};
    net_->embed = std::make_unique<model::Embedding>(top, "embed", config_.levels[0].dim);
    net_->top = build_level(config_, tree, 0, params_, rng);
    net_->head = std::make_unique<model::Head>(top, "head", config_.levels[0].dim);
}

HNetModel::~HNetModel() = default;

namespace {

Tensor run_level(const Level& lv, const Tensor& x, const ModelConfig& c, std::vector<StageTrace>& traces) {
    if (!lv.is_stage) return lv.main->forward(x);

    auto h = lv.encoder->forward(x);
    auto p = chunking::route(h, lv.router_wq, lv.router_wk);
    auto& tr = traces[lv.index];
    tr.decision.stage_index = lv.index;
    tr.decision.p.assign(p.data().begin(), p.data().end());
    tr.decision.b = chunking::discretize(tr.decision.p);
    auto chunks = chunking::downsample(h, tr.decision.b, p);
    tr.chunk_map = chunks.chunk_map;
    tr.boundaries = chunks.boundaries;
    tr.target = lv.target;
    tr.F = static_cast<double>(chunks.chunks()) / static_cast<double>(h.rows());
    tr.G_tensor = mean(p);
    tr.G = tr.G_tensor.item();
    tr.rate_loss = lv.target > 1.0 ? chunking::ratio_loss(tr.F, tr.G_tensor, lv.target) : Tensor::scalar(0.0);

    auto z = chunks.latents;
    if (lv.proj_in.defined()) z = matmul(z, lv.proj_in);
    auto y = run_level(*lv.inner, z, c, traces);
    if (lv.proj_out.defined()) y = matmul(y, lv.proj_out);
    auto e = chunking::smooth(y, chunks.boundary_probs);
    auto u = chunking::upsample(e, chunks.chunk_map, p, tr.decision.b, c.confidence);
    if (c.encoder_residual) u = add(u, h);
    return lv.decoder->forward(u);
}

void check_codes(std::span<const seq::Code> codes, std::size_t context) {
    if (codes.empty()) throw ShapeError("forward: empty sequence");
    if (codes.size() > context) {
        throw ContextError("sequence of length " + std::to_string(codes.size()) + " exceeds the context of " +
                           std::to_string(context));
    }
}

}  // namespace

ForwardTrace HNetModel::forward(std::span<const seq::Code> codes) const {
    check_codes(codes, config_.context);
    ForwardTrace trace;
    trace.stages.resize(depth_);
    auto x = net_->embed->forward(codes);
    auto y = run_level(*net_->top, x, config_, trace.stages);
    trace.logits = net_->head->forward(y);
    if (codes.size() >= 2) {
        trace.nll = nll_loss(trace.logits, codes);
        std::vector<Tensor> rates;
        for (const auto& s : trace.stages) rates.push_back(s.rate_loss);
        trace.total = total_loss(trace.nll, rates, config_.alpha);
    }
    return trace;
}

Tensor HNetModel::logits(std::span<const seq::Code> codes) const {
    NoGradGuard guard;
    return forward(codes).logits;
}

std::vector<int> next_targets(std::span<const seq::Code> codes) {
    std::vector<int> t(codes.size(), -1);
    for (std::size_t i = 0; i + 1 < codes.size(); ++i) t[i] = codes[i + 1];
    return t;
}

Tensor nll_loss(const Tensor& logits, std::span<const seq::Code> codes) {
    if (codes.size() < 2) throw ShapeError("nll_loss: need at least 2 positions");
    if (logits.rows() != codes.size() || logits.cols() != 4) throw ShapeError("nll_loss: logits must be [L, 4]");
    const auto targets = next_targets(codes);
    return cross_entropy(logits, targets);
}

Tensor total_loss(const Tensor& nll, std::span<const Tensor> rate_losses, double alpha) {
    if (rate_losses.empty() || alpha == 0.0) {
        Tensor t = nll;
        for (const auto& r : rate_losses) t = add(t, affine(r, 0.0));
        return t;
    }
    Tensor rate = rate_losses[0];
    for (std::size_t i = 1; i < rate_losses.size(); ++i) rate = add(rate, rate_losses[i]);
    return add(nll, affine(rate, alpha));
}

double HNetModel::sequence_loglik(std::span<const seq::Code> codes) const {
    if (codes.size() < 2) throw ShapeError("sequence_loglik: need at least 2 positions");
    NoGradGuard guard;
    const auto lg = logits(codes);
    double total = 0;
    for (std::size_t t = 1; t < codes.size(); ++t) {
        const double* row = lg.data().data() + (t - 1) * 4;
        const double mx = std::max(std::max(row[0], row[1]), std::max(row[2], row[3]));
        double s = 0;
        for (int j = 0; j < 4; ++j) s += std::exp(row[j] - mx);
        total += row[codes[t]] - mx - std::log(s);
    }
    return total;
}

// ---- incremental decoding ----

namespace {

struct LevelState {
    Stack::Cache main, encoder, decoder;
    std::unique_ptr<LevelState> inner;
    std::size_t steps = 0;
    Tensor prev_key;                // h_{t-1} Wk
    std::vector<double> smoothed;  // current smoothed chunk vector
};

std::unique_ptr<LevelState> new_state(const Level& lv) {
    auto st = std::make_unique<LevelState>();
    if (!lv.is_stage) {
        st->main = lv.main->new_cache();
        return st;
    }
    st->encoder = lv.encoder->new_cache();
    st->decoder = lv.decoder->new_cache();
    st->inner = new_state(*lv.inner);
    return st;
}

Tensor step_level(const Level& lv, const Tensor& x_row, LevelState& st, const ModelConfig& c) {
    if (!lv.is_stage) return lv.main->step(x_row, st.main);

    auto h = lv.encoder->step(x_row, st.encoder);
    double p = 1.0;
    if (st.steps > 0) {
        auto q = matmul(h, lv.router_wq);
        p = affine(cosine_rows(q, st.prev_key), -0.5, 0.5).item();
    }
    st.prev_key = matmul(h, lv.router_wk);
    const bool boundary = st.steps == 0 || p > chunking::kThreshold;
    ++st.steps;

    if (boundary) {
        auto z = h;
        if (lv.proj_in.defined()) z = matmul(z, lv.proj_in);
        auto y = step_level(*lv.inner, z, *st.inner, c);
        if (lv.proj_out.defined()) y = matmul(y, lv.proj_out);
        const auto P = Tensor::full({1, 1}, p);
        const double a = affine(P, -1.0, 1.0).item();
        const auto drive = mul(P, y);
        const std::size_t D = drive.size();
        if (st.smoothed.empty()) st.smoothed.assign(D, 0.0);
        for (std::size_t j = 0; j < D; ++j) st.smoothed[j] = a * st.smoothed[j] + drive.data()[j];
    }
    const std::size_t D = st.smoothed.size();
    Tensor u;
    if (c.confidence == Confidence::relaxed) {
        const double coeff = boundary ? p : 1.0 - p;
        std::vector<double> v(D);
        for (std::size_t j = 0; j < D; ++j) v[j] = coeff * st.smoothed[j];
        u = Tensor::from({1, D}, std::move(v));
    } else {
        u = Tensor::from({1, D}, st.smoothed);
    }
    if (c.encoder_residual) u = add(u, h);
    return lv.decoder->step(u, st.decoder);
}

seq::Code pick(std::span<const double> logits, double temperature, Rng& rng) {
    if (temperature < 0 || !std::isfinite(temperature)) throw DomainError("temperature must be >= 0");
    if (temperature == 0.0) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < 4; ++j) {
            if (logits[j] > logits[best]) best = j;
        }
        return static_cast<seq::Code>(best);
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v / temperature);
    std::array<double, 4> w{};
    for (std::size_t j = 0; j < 4; ++j) w[j] = std::exp(logits[j] / temperature - mx);
    return static_cast<seq::Code>(sample_index(rng, w));
}

std::vector<seq::Code> start_sequence(std::span<const seq::Code> prompt, double temperature, Rng& rng) {
    std::vector<seq::Code> out(prompt.begin(), prompt.end());
    if (out.empty()) out.push_back(temperature == 0.0 ? 0 : static_cast<seq::Code>(rng() >> 62));
    return out;
}

}  // namespace

class HNetModel::Decoder {
public:
    explicit Decoder(const HNetModel& m) : m_(m), state_(new_state(*m.net_->top)) {}

    // Feeds one nucleotide; returns the logits predicting the next one.
    std::vector<double> push(seq::Code code) {
        ++pos_;
        if (pos_ > m_.config_.context) throw ContextError("generation exceeds the context window");
        const seq::Code codes[1] = {code};
        auto x = m_.net_->embed->forward(codes);
        auto y = step_level(*m_.net_->top, x, *state_, m_.config_);
        auto lg = m_.net_->head->forward(y);
        return {lg.data().begin(), lg.data().end()};
    }

private:
    const HNetModel& m_;
    std::unique_ptr<LevelState> state_;
    std::size_t pos_ = 0;
};

std::vector<seq::Code> HNetModel::generate(std::span<const seq::Code> prompt, std::size_t length, double temperature,
                                           std::uint64_t seed) const {
    NoGradGuard guard;
    Rng rng(seed);
    auto out = start_sequence(prompt, temperature, rng);
    const std::size_t target = prompt.size() + length;
    if (out.size() >= target && !prompt.empty()) return out;
    Decoder dec(*this);
    std::vector<double> lg;
    for (seq::Code c : out) lg = dec.push(c);
    while (out.size() < target) {
        out.push_back(pick(lg, temperature, rng));
        if (out.size() < target) lg = dec.push(out.back());
    }
    return out;
}

std::vector<seq::Code> HNetModel::generate_reforward(std::span<const seq::Code> prompt, std::size_t length,
                                                     double temperature, std::uint64_t seed) const {
    NoGradGuard guard;
    Rng rng(seed);
    auto out = start_sequence(prompt, temperature, rng);
    const std::size_t target = prompt.size() + length;
    while (out.size() < target) {
        const auto lg = logits(out);
        out.push_back(pick(lg.data().subspan((out.size() - 1) * 4, 4), temperature, rng));
    }
    return out;
}

std::vector<ArrayEntry> HNetModel::export_parameters(DType dtype) const {
    std::vector<ArrayEntry> out;
    for (const auto& p : params_.items()) {
        ArrayEntry e{p.name, dtype, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}};
        if (dtype == DType::f32) {
            for (auto& v : e.values) v = static_cast<double>(static_cast<float>(v));
        }
        out.push_back(std::move(e));
    }
    return out;
}

void HNetModel::import_parameters(const std::vector<ArrayEntry>& entries) {
    std::unordered_map<std::string, const ArrayEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    for (auto& p : params_.items()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
        if (it->second->shape != p.tensor.shape()) {
            throw CheckpointError("parameter " + p.name + " has shape " + shape_string(it->second->shape) +
                                  " in the checkpoint, model expects " + shape_string(p.tensor.shape()));
        }
        std::copy(it->second->values.begin(), it->second->values.end(), p.tensor.mutable_data().begin());
    }
}

std::filesystem::path config_path_for(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".cfg";
    return p;
}

void save_model(const std::filesystem::path& path, const HNetModel& model, const RunConfig& run) {
    RunConfig copy = run;
    copy.model = model.config();
    write_file_atomic(config_path_for(path), format_config(copy));
    save_arrays(path, model.export_parameters());
}

std::unique_ptr<HNetModel> load_model(const std::filesystem::path& path, RunConfig* run) {
    const auto cfg_path = config_path_for(path);
    if (!std::filesystem::exists(cfg_path)) {
        throw CheckpointError("missing model config " + cfg_path.string() + " next to " + path.string());
    }
    const RunConfig cfg = read_config(cfg_path);
    auto model = std::make_unique<HNetModel>(cfg.model);
    model->import_parameters(load_arrays(path));
    if (run) *run = cfg;
    return model;
}

}  // namespace dnahnet
